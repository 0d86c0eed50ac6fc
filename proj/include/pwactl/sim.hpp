#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "palm.hpp"
#include "synthesis.hpp"

namespace pwactl {

// ---------------------------------------------------------------------------
// State, configuration, trajectory
// ---------------------------------------------------------------------------

/// State of the practical closed loop: plant state, dynamic-controller state
/// and the running integral of the surface. At t = 0: u = 0 and z = 0, so
/// s(0) = 0 by construction.
struct AugmentedState {
    VectorXd x;   // plant state
    VectorXd u;   // controller state (the plant input)
    VectorXd z;   // integral term of the sliding surface
    VectorXd x0;  // x(0)
    VectorXd u0;  // u(0), zero by construction
    double t = 0.0;

    static AugmentedState initial(const VectorXd& x_init, int m) {
        AugmentedState s;
        s.x = x_init;
        s.u = VectorXd::Zero(m);
        s.z = VectorXd::Zero(m);
        s.x0 = x_init;
        s.u0 = VectorXd::Zero(m);
        s.t = 0.0;
        return s;
    }

    VectorXd xbar() const {
        VectorXd v(x.size() + u.size());
        v << x, u;
        return v;
    }
};

struct SimConfig {
    double h = 1e-3;         // fixed RK4 step
    double T = 10.0;         // duration
    double sigma = 0.0;      // sign smoothing; 0 means exact sign
    int record_stride = 1;
    MatrixXd lyapunov;       // optional (n+m)x(n+m) matrix; records V = xbar' M xbar
};

struct TrajectorySample {
    double t = 0.0;
    VectorXd x;
    VectorXd u;
    VectorXd s;
    int region = 0;
    bool domain_exit = false;
    double V = 0.0;
};

struct Trajectory {
    int n = 0, m = 0;
    bool has_V = false;
    std::vector<TrajectorySample> samples;

    const TrajectorySample& back() const { return samples.back(); }

    double max_s_norm() const {
        double v = 0.0;
        for (const auto& s : samples) v = std::max(v, s.s.norm());
        return v;
    }
};

struct DivergenceError : std::runtime_error {
    DivergenceError(const std::string& msg, Trajectory partial_trajectory)
        : std::runtime_error(msg), partial(std::move(partial_trajectory)) {}
    Trajectory partial;
};

/// sgn with the smoothing used in the benchmarks: s / (||s|| + sigma) for
/// sigma > 0, elementwise sign otherwise.
inline VectorXd smoothed_sign(const VectorXd& s, double sigma) {
    if (sigma > 0.0) return s / (s.norm() + sigma);
    return s.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

// ---------------------------------------------------------------------------
// Surface and controller evaluation
// ---------------------------------------------------------------------------

/// s = S_x (x - x(0)) + S_u (u - u(0)) - z, where z integrates the nominal
/// surface flow alongside the plant.
inline VectorXd surface_value(const ControllerDesign& design, const AugmentedState& state) {
    return design.surface.S_x * (state.x - state.x0) +
           design.surface.S_u * (state.u - state.u0) - state.z;
}

/// sigma_i(t) = eps ||S_x|| ||xbar|| with eps = eps_f0 in region 0 and eps_f
/// elsewhere.
inline double sigma_term(const ControllerDesign& design, int region, double xbar_norm) {
    const double eps = (region == 0) ? design.bounds.eps_f0 : design.bounds.eps_f;
    return eps * spectral_norm(design.surface.S_x) * xbar_norm;
}

/// udot = F_i x + G_i u + D_i - (gamma + beta_i + sigma_i) Su^-1 sgn(s).
inline VectorXd controller_derivative(const ControllerDesign& design,
                                      const AugmentedState& state, const VectorXd& s,
                                      int region, double sigma_smoothing) {
    const MatrixXd& K = design.nominal.K.at(static_cast<std::size_t>(region));
    const VectorXd& D = design.nominal.D.at(static_cast<std::size_t>(region));
    const double gain = design.gamma + design.beta.at(static_cast<std::size_t>(region)) +
                        sigma_term(design, region, state.xbar().norm());
    return K * state.xbar() + D -
           gain * design.surface.S_u.inverse() * smoothed_sign(s, sigma_smoothing);
}

// ---------------------------------------------------------------------------
// Practical closed loop
// ---------------------------------------------------------------------------

namespace detail {

inline void rk4_step(const std::function<VectorXd(double, const VectorXd&)>& rhs, double t,
                     double h, VectorXd& y) {
    const VectorXd k1 = rhs(t, y);
    const VectorXd k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1);
    const VectorXd k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2);
    const VectorXd k4 = rhs(t + h, y + h * k3);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

/// RK4 integration of the plant + dynamic controller + surface integral. The
/// active region is re-resolved at every stage evaluation; leaving the domain
/// box is flagged on the trajectory while integration continues with clamped
/// region dispatch.
inline Trajectory simulate_practical(const NonlinearSystem& system, const PwaModel& model,
                                     const ControllerDesign& design, const SimConfig& config,
                                     const VectorXd& x0) {
    const int n = model.n, m = model.m;
    if (x0.size() != n) throw ShapeError("initial state has wrong dimension");
    const MatrixXd& Sx = design.surface.S_x;
    const MatrixXd& Su = design.surface.S_u;
    const MatrixXd Su_inv = Su.inverse();
    const double sx_norm = spectral_norm(Sx);

    Trajectory traj;
    traj.n = n;
    traj.m = m;
    traj.has_V = config.lyapunov.size() > 0;

    VectorXd y(n + 2 * m);  // [x; u; z]
    y << x0, VectorXd::Zero(m), VectorXd::Zero(m);

    auto rhs = [&](double, const VectorXd& yy) -> VectorXd {
        if (!yy.allFinite())  // divergence surfaces after the step completes
            return VectorXd::Constant(n + 2 * m, std::numeric_limits<double>::quiet_NaN());
        const VectorXd x = yy.head(n);
        const VectorXd u = yy.segment(n, m);
        const VectorXd z = yy.tail(m);
        VectorXd xbar(n + m);
        xbar << x, u;
        const int i = locate_region(model, xbar).index;
        const AffineSubmodel& sub = model.submodels[static_cast<std::size_t>(i)];
        const MatrixXd& K = design.nominal.K[static_cast<std::size_t>(i)];
        const VectorXd& D = design.nominal.D[static_cast<std::size_t>(i)];

        const VectorXd s = Sx * (x - x0) + Su * u - z;
        const double eps = (i == 0) ? design.bounds.eps_f0 : design.bounds.eps_f;
        const double gain = design.gamma + design.beta[static_cast<std::size_t>(i)] +
                            eps * sx_norm * xbar.norm();
        const VectorXd nominal_u = K * xbar + D;

        VectorXd dy(n + 2 * m);
        dy.head(n) = system.dynamics(x, u);
        dy.segment(n, m) = nominal_u - gain * Su_inv * smoothed_sign(s, config.sigma);
        dy.tail(m) = Sx * (sub.A * x + sub.B * u + sub.C) + Su * nominal_u;
        return dy;
    };

    auto record = [&](double t) {
        TrajectorySample sample;
        sample.t = t;
        sample.x = y.head(n);
        sample.u = y.segment(n, m);
        VectorXd xbar(n + m);
        xbar << sample.x, sample.u;
        sample.s = Sx * (sample.x - x0) + Su * sample.u - y.tail(m);
        const RegionLookup lk = locate_region(model, xbar);
        sample.region = lk.index;
        sample.domain_exit = lk.out_of_domain;
        if (traj.has_V) sample.V = xbar.dot(config.lyapunov * xbar);
        traj.samples.push_back(std::move(sample));
    };

    const long steps = std::lround(config.T / config.h);
    record(0.0);
    for (long k = 0; k < steps; ++k) {
        detail::rk4_step(rhs, k * config.h, config.h, y);
        if (!y.allFinite())
            throw DivergenceError("state became non-finite at t=" +
                                      std::to_string((k + 1) * config.h),
                                  traj);
        if ((k + 1) % config.record_stride == 0) record((k + 1) * config.h);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Nominal closed loop and sliding motion
// ---------------------------------------------------------------------------

struct UncertaintyPolicy {
    enum class Mode { Zero, RandomBounded, Adversarial };
    Mode mode = Mode::Zero;
    std::uint64_t seed = 0;
    bool at_limit = false;  // draw ||dAbar|| exactly at the bound instead of uniform in [0, eps]

    static UncertaintyPolicy zero() { return {}; }
    static UncertaintyPolicy random_bounded(std::uint64_t seed, bool at_limit = false) {
        UncertaintyPolicy p;
        p.mode = Mode::RandomBounded;
        p.seed = seed;
        p.at_limit = at_limit;
        return p;
    }
    static UncertaintyPolicy adversarial(std::uint64_t seed) {
        UncertaintyPolicy p;
        p.mode = Mode::Adversarial;
        p.seed = seed;
        p.at_limit = true;
        return p;
    }
};

/// Integrates the sliding motion
///   xbardot = (R1 Abar_i + R2 Kbar_i + (R1 - R2 Su^-1 Sx) dAbar_i) xbar
///             + Cbar_i + (R1 - R2 Su^-1 Sx) dC_i
/// with dAbar_i, dC_i redrawn each step within the declared bounds. The zero
/// policy reproduces the nominal closed loop exactly (same code path).
inline Trajectory simulate_sliding_motion(const PwaModel& model, const ControllerDesign& design,
                                          const SimConfig& config, const VectorXd& xbar0,
                                          const UncertaintyPolicy& policy) {
    const int n = model.n, m = model.m, N = n + m;
    if (xbar0.size() != N) throw ShapeError("initial augmented state has wrong dimension");
    const MatrixXd R1 = lift_state(n, m), R2 = lift_input(n, m);
    const bool uncertain = policy.mode != UncertaintyPolicy::Mode::Zero;

    MatrixXd mismatch_map;  // R1 - R2 Su^-1 Sx
    if (uncertain)
        mismatch_map = R1 - R2 * design.surface.S_u.inverse() * design.surface.S_x;

    std::vector<MatrixXd> H;  // closed-loop matrices per region
    std::vector<VectorXd> Cb;
    for (int i = 0; i < model.region_count(); ++i) {
        H.push_back(R1 * model.submodels[static_cast<std::size_t>(i)].Abar() +
                    R2 * design.nominal.K[static_cast<std::size_t>(i)]);
        VectorXd cb(N);
        cb << model.submodels[static_cast<std::size_t>(i)].C,
            design.nominal.D[static_cast<std::size_t>(i)];
        Cb.push_back(cb);
    }

    std::mt19937_64 rng(policy.seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Trajectory traj;
    traj.n = n;
    traj.m = m;
    traj.has_V = config.lyapunov.size() > 0;

    VectorXd y = xbar0;
    MatrixXd dA = MatrixXd::Zero(n, N);
    VectorXd dC = VectorXd::Zero(n);

    auto redraw = [&](const VectorXd& xbar) {
        const int i = locate_region(model, xbar).index;
        const double eps = model.eps_for(i);
        MatrixXd G(n, N);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < N; ++c) G(r, c) = gauss(rng);
        const double gn = spectral_norm(G);
        const double scale_a = policy.at_limit ? 1.0 : unif(rng);
        dA = (gn > 0.0) ? MatrixXd(G * (eps * scale_a / gn)) : MatrixXd::Zero(n, N);
        if (i == 0) {
            dC.setZero();  // dC_0 = 0 by the model structure
        } else {
            VectorXd g(n);
            for (int r = 0; r < n; ++r) g(r) = gauss(rng);
            const double scale_c = policy.at_limit ? 1.0 : unif(rng);
            dC = (g.norm() > 0.0) ? VectorXd(g * (model.bounds.eps_g * scale_c / g.norm()))
                                  : VectorXd::Zero(n);
        }
        if (policy.mode == UncertaintyPolicy::Mode::Adversarial) {
            if (design.surface.P.size() == 0)
                throw ShapeError("adversarial policy needs the surface Lyapunov matrix P");
            const VectorXd px = design.surface.P * xbar;
            if (px.dot(mismatch_map * (dA * xbar)) < 0.0) dA = -dA;
            if (px.dot(mismatch_map * dC) < 0.0) dC = -dC;
        }
    };

    auto rhs = [&](double, const VectorXd& yy) -> VectorXd {
        if (!yy.allFinite())
            return VectorXd::Constant(N, std::numeric_limits<double>::quiet_NaN());
        const int i = locate_region(model, yy).index;
        VectorXd dy = H[static_cast<std::size_t>(i)] * yy + Cb[static_cast<std::size_t>(i)];
        if (uncertain) dy += mismatch_map * (dA * yy + dC);
        return dy;
    };

    auto record = [&](double t) {
        TrajectorySample sample;
        sample.t = t;
        sample.x = y.head(n);
        sample.u = y.tail(m);
        sample.s = VectorXd::Zero(m);  // the sliding motion lives on s = 0
        const RegionLookup lk = locate_region(model, y);
        sample.region = lk.index;
        sample.domain_exit = lk.out_of_domain;
        if (traj.has_V) sample.V = y.dot(config.lyapunov * y);
        traj.samples.push_back(std::move(sample));
    };

    const long steps = std::lround(config.T / config.h);
    record(0.0);
    for (long k = 0; k < steps; ++k) {
        if (uncertain) redraw(y);
        detail::rk4_step(rhs, k * config.h, config.h, y);
        if (!y.allFinite())
            throw DivergenceError("state became non-finite at t=" +
                                      std::to_string((k + 1) * config.h),
                                  traj);
        if ((k + 1) % config.record_stride == 0) record((k + 1) * config.h);
    }
    return traj;
}

/// Nominal closed loop: the sliding motion with the uncertainty switched off.
inline Trajectory simulate_nominal(const PwaModel& model, const ControllerDesign& design,
                                   const SimConfig& config, const VectorXd& xbar0) {
    return simulate_sliding_motion(model, design, config, xbar0, UncertaintyPolicy::zero());
}

// ---------------------------------------------------------------------------
// Reaching law test
// ---------------------------------------------------------------------------

struct ReachPolicy {
    enum class Mode { Worst, Random };
    Mode mode = Mode::Worst;
    std::uint64_t seed = 0;

    static ReachPolicy worst() { return {}; }
    static ReachPolicy random(std::uint64_t seed) {
        ReachPolicy p;
        p.mode = Mode::Random;
        p.seed = seed;
        return p;
    }
};

struct ReachReport {
    double reach_time = 0.0;
    double bound = 0.0;  // ||s0|| / gamma + h
    bool reached = false;
    bool within_bound = false;
};

/// Integrates the synthetic surface dynamics
///   sdot = w(t) - (gamma + beta_i + sigma_i) sgn(s)
/// with ||w|| at the level beta_i + sigma_i the controller was sized for
/// (worst case aligns w with s; random draws a fresh direction each step).
/// Exact sign is required. The reach time is the first time ||s|| <= 1e-6,
/// with sign-crossing interpolation inside a step, and is checked against
/// ||s0|| / gamma + h.
inline ReachReport reaching_test(const ControllerDesign& design, const SimConfig& config,
                                 const VectorXd& s0,
                                 const ReachPolicy& policy = ReachPolicy::worst(),
                                 double xbar_norm = 1.0, int region = 0) {
    if (config.sigma != 0.0)
        throw ShapeError("reaching_test requires the exact sign (sigma = 0)");
    const int m = static_cast<int>(s0.size());
    const double beta = design.beta.at(static_cast<std::size_t>(region));
    const double sigma_i = sigma_term(design, region, xbar_norm);
    const double level = beta + sigma_i;
    const double gain = design.gamma + level;

    std::mt19937_64 rng(policy.seed ^ 0xd1b54a32d192ed03ull);
    std::normal_distribution<double> gauss(0.0, 1.0);
    VectorXd w = VectorXd::Zero(m);

    auto redraw = [&](const VectorXd& s) {
        if (policy.mode == ReachPolicy::Mode::Worst) {
            w = (s.norm() > 0.0) ? VectorXd(level * s / s.norm()) : VectorXd::Zero(m);
        } else {
            VectorXd g(m);
            for (int k = 0; k < m; ++k) g(k) = gauss(rng);
            w = (g.norm() > 0.0) ? VectorXd(level * g / g.norm()) : VectorXd::Zero(m);
        }
    };

    auto rhs = [&](double, const VectorXd& s) -> VectorXd {
        return w - gain * smoothed_sign(s, 0.0);
    };

    ReachReport report;
    report.bound = s0.norm() / design.gamma + config.h;
    VectorXd s = s0;
    if (s.norm() <= 1e-6) {
        report.reached = true;
        report.reach_time = 0.0;
        report.within_bound = true;
        return report;
    }

    const long steps = std::lround(config.T / config.h);
    for (long k = 0; k < steps; ++k) {
        const VectorXd s_prev = s;
        redraw(s);
        detail::rk4_step(rhs, k * config.h, config.h, s);
        const double t_next = (k + 1) * config.h;
        bool all_crossed = true;
        for (int c = 0; c < m; ++c)
            if (s_prev(c) * s(c) > 0.0) all_crossed = false;
        if (s.norm() <= 1e-6 || all_crossed) {
            report.reached = true;
            const double frac = s_prev.norm() / (s_prev.norm() + s.norm() + 1e-300);
            report.reach_time = k * config.h + frac * config.h;
            break;
        }
    }
    report.within_bound = report.reached && report.reach_time <= report.bound;
    return report;
}

}  // namespace pwactl
