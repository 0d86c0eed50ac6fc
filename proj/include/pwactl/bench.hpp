#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "palm.hpp"
#include "sim.hpp"
#include "synthesis.hpp"

namespace pwactl {

/// A benchmark case study: plant, partition, simulation settings and, when
/// available, the published gain/surface matrices stored to exactly their
/// printed precision.
struct Fixture {
    std::string name;
    NonlinearSystem system;
    PartitionSpec partition;

    // published matrices (empty when the source gives none)
    std::vector<MatrixXd> published_K;     // Kbar_i, m x (n+m)
    std::vector<VectorXd> published_D;     // D_i for i >= 1
    MatrixXd published_S;                  // Sbar, m x (n+m)
    std::vector<MatrixXd> published_Abar;  // Abar_i, n x (n+m)
    std::vector<VectorXd> published_C;     // C_i

    VectorXd x0;  // augmented initial state [x(0); u(0)]
    double sigma = 0.0;
    double T = 10.0;
    double h = 1e-3;
    double gamma = 1.0;
    GridSpec grid;  // synthesis grid (with symmetry ties where the model has them)
    std::optional<ErrorBounds> surface_bounds;     // design bounds for the surface LMIs
    std::optional<ErrorBounds> controller_bounds;  // bounds assumed by the published design

    std::vector<std::string> notes;

    bool has_published() const { return !published_K.empty(); }
};

// ---------------------------------------------------------------------------
// Chua circuit
// ---------------------------------------------------------------------------

/// Circuit parameters. These are canonical-flavored defaults, not taken from
/// the benchmark source (which defers the model to an external reference);
/// every value can be overridden. The defaults are picked so that the
/// uncontrolled origin is unstable (the circuit needs control) while the
/// published gains render every region of the closed loop Hurwitz.
struct ChuaParams {
    double R = 1.0;
    double C1 = 0.05;
    double C2 = 1.0;
    double L = 0.5;
    double R0 = 0.0;
    double a = -0.5;   // linear slope of the nonlinear resistor, a < 0
    double c = 0.05;   // cubic coefficient, c > 0
};

inline Fixture fixture_chua(const ChuaParams& params = {}) {
    Fixture fx;
    fx.name = "chua";
    fx.system.n = 3;
    fx.system.m = 1;
    fx.system.dynamics = [params](const VectorXd& x, const VectorXd& u) {
        const double g = params.a * x(0) + params.c * x(0) * x(0) * x(0);
        VectorXd dx(3);
        dx(0) = ((x(1) - x(0)) / params.R - g - u(0)) / params.C1;
        dx(1) = ((x(0) - x(1)) / params.R - x(2)) / params.C2;
        dx(2) = (x(1) - params.R0 * x(2)) / params.L;
        return dx;
    };
    fx.system.domain.lo = VectorXd(4);
    fx.system.domain.hi = VectorXd(4);
    fx.system.domain.lo << -6.0, -6.0, -6.0, -100.0;
    fx.system.domain.hi << 6.0, 6.0, 6.0, 100.0;

    fx.partition.theta = VectorXd::Zero(4);
    fx.partition.theta(0) = 1.0;
    SlabSpec s0, s1, s2;
    s0.lo = -1.0;
    s0.hi = 1.0;
    s0.operating_point = VectorXd::Zero(4);
    s1.lo = 1.0;
    s1.hi = 6.0;
    s1.operating_point = VectorXd::Zero(4);
    s1.operating_point(0) = 3.5;
    s2.lo = -6.0;
    s2.hi = -1.0;
    s2.operating_point = VectorXd::Zero(4);
    s2.operating_point(0) = -3.5;
    fx.partition.slabs = {s0, s1, s2};

    auto row = [](std::initializer_list<double> v) {
        MatrixXd r(1, static_cast<Eigen::Index>(v.size()));
        int k = 0;
        for (double x : v) r(0, k++) = x;
        return r;
    };
    fx.published_K = {row({6.0518, 49.6777, 20.8074, -2.5596}),
                      row({6.1412, 49.5742, 20.8064, -2.5411}),
                      row({5.7869, 48.5033, 20.3217, -2.5140})};
    VectorXd d1(1), d2(1);
    d1 << 0.200;
    d2 << -0.200;
    fx.published_D = {d1, d2};
    fx.published_S = row({-0.3318, -4.8582, -1.6437, 0.4322});

    fx.x0 = VectorXd(4);
    fx.x0 << 4.0, 1.0, 0.0, 0.0;
    fx.sigma = 0.001;
    fx.T = 50.0;
    fx.h = 5e-5;
    fx.gamma = 0.1;
    // The cubic residual over these wide slabs is large (eps_f > 10); at the
    // benchmark's sigma = 0.001 the honest switching gain would demand
    // sub-microsecond steps. The published design assumes this much smaller
    // uncertainty level for its switching terms.
    fx.controller_bounds = ErrorBounds{0.05, 0.05, 0.01};
    fx.surface_bounds = ErrorBounds{0.05, 0.05, 0.01};

    fx.grid.range = {{-1.0, 1.0}, {-1.0, 1.0}};
    fx.grid.points_per_axis = 11;
    fx.grid.tie = {-1, 0};
    fx.grid.tie_factor = {1.0, -1.0};

    fx.notes.push_back(
        "circuit parameters (R, C1, C2, L, R0, a, c) are canonical-flavored defaults, not "
        "from the benchmark source; the published gains were designed against a different "
        "circuit model, so only qualitative behavior is comparable");
    return fx;
}

// ---------------------------------------------------------------------------
// Inverted pendulum
// ---------------------------------------------------------------------------

inline Fixture fixture_pendulum() {
    constexpr double pi = std::numbers::pi;
    Fixture fx;
    fx.name = "pendulum";
    fx.system.n = 2;
    fx.system.m = 1;
    // The published A-matrices pin a = 1/(M+m) = 1/3 (they match that
    // linearization to every printed digit), so the cart and pendulum masses
    // are 2.0 and 1.0 here even though the source text says 4.0 and 2.0 —
    // with the text values the printed gains cannot hold the pendulum at the
    // benchmark's 82 degree initial angle at all.
    const double g = 9.8, M = 2.0, mp = 1.0, lp = 0.5;
    const double a = 1.0 / (M + mp);
    fx.system.dynamics = [=](const VectorXd& x, const VectorXd& u) {
        const double s1 = std::sin(x(0)), c1 = std::cos(x(0));
        const double num =
            g * s1 - 0.5 * a * mp * lp * x(1) * x(1) * std::sin(2.0 * x(0)) - a * c1 * u(0);
        const double den = 4.0 * lp / 3.0 - a * mp * lp * c1 * c1;
        VectorXd dx(2);
        dx(0) = x(1);
        dx(1) = num / den;
        return dx;
    };
    fx.system.domain.lo = VectorXd(3);
    fx.system.domain.hi = VectorXd(3);
    fx.system.domain.lo << -pi / 2.0, -3.0, -300.0;
    fx.system.domain.hi << pi / 2.0, 3.0, 300.0;

    // operating angles 0, +-pi/3, +-13pi/30 with breakpoints at the midpoints
    fx.partition.theta = VectorXd::Zero(3);
    fx.partition.theta(0) = 1.0;
    auto slab = [](double lo, double hi, double op_angle) {
        SlabSpec s;
        s.lo = lo;
        s.hi = hi;
        s.operating_point = VectorXd::Zero(3);
        s.operating_point(0) = op_angle;
        return s;
    };
    const double b1 = pi / 6.0;         // midpoint of 0 and pi/3
    const double b2 = 23.0 * pi / 60.0; // midpoint of pi/3 and 13pi/30
    fx.partition.slabs = {slab(-b1, b1, 0.0), slab(b1, b2, pi / 3.0),
                          slab(b2, pi / 2.0, 13.0 * pi / 30.0), slab(-b2, -b1, -pi / 3.0),
                          slab(-pi / 2.0, -b2, -13.0 * pi / 30.0)};

    auto mat2x3 = [](double a11, double a12, double a13, double a21, double a22, double a23) {
        MatrixXd m(2, 3);
        m << a11, a12, a13, a21, a22, a23;
        return m;
    };
    const MatrixXd A0 = mat2x3(0, 1, 0, 19.6000, 0, -0.6667);
    const MatrixXd A13 = mat2x3(0, 1, 0, 4.7040, 0, -0.2667);
    const MatrixXd A24 = mat2x3(0, 1, 0, 1.5955, 0, -0.1585);
    fx.published_Abar = {A0, A13, A24, A13, A24};
    VectorXd c0 = VectorXd::Zero(2), c13(2), c24(2);
    c13 << 0.0, 8.6533;
    c24 << 0.0, 12.3638;
    fx.published_C = {c0, c13, c24, -c13, -c24};

    auto row3 = [](double k1, double k2, double k3) {
        MatrixXd r(1, 3);
        r << k1, k2, k3;
        return r;
    };
    const MatrixXd K0 = row3(46381.5662, 13843.0990, -437.2131);
    const MatrixXd K13 = row3(13997.0179, 4213.0535, -133.2537);
    const MatrixXd K24 = row3(8287.5168, 1620.6117, -51.5002);
    fx.published_K = {K0, K13, K24, K13, K24};
    VectorXd d(1);
    std::vector<double> dv = {3.0, 5.0, -3.0, -5.0};
    for (double v : dv) {
        d(0) = v;
        fx.published_D.push_back(d);
    }
    fx.published_S = row3(-0.1269, -0.0501, 0.00066);

    fx.x0 = VectorXd(3);
    fx.x0 << 82.0 * pi / 180.0, 0.0, 0.0;
    fx.sigma = 0.020;
    fx.T = 10.0;
    fx.h = 2.5e-4;
    fx.gamma = 1.0;

    fx.grid.range = {{-8.0, 8.0}, {-8.0, 8.0}, {-8.0, 8.0}, {-8.0, 8.0}};
    fx.grid.points_per_axis = 9;
    fx.grid.tie = {-1, -1, 0, 1};
    fx.grid.tie_factor = {1.0, 1.0, -1.0, -1.0};
    // The surface LMIs for this plant are feasible only under small assumed
    // bounds (the published surface matrix implies the same); the switching
    // terms still use the estimated bounds.
    fx.surface_bounds = ErrorBounds{0.002, 0.002, 0.0};

    fx.notes.push_back(
        "published Abar_0 input coefficient is -0.6667 while direct linearization of the "
        "stated dynamics gives -1/3; benchmarks consume the published matrices verbatim "
        "and this discrepancy is recorded, not resolved");
    return fx;
}

// ---------------------------------------------------------------------------
// Fixture-backed models and designs
// ---------------------------------------------------------------------------

/// Builds the PWA model a fixture simulates against: published matrices when
/// the source prints them, otherwise fresh linearizations. Error bounds are
/// always estimated against the true dynamics.
inline PwaModel fixture_model(const Fixture& fx, bool use_published = true,
                              int samples_per_region = 400, std::uint64_t seed = 0) {
    PwaModel model;
    if (use_published && !fx.published_Abar.empty()) {
        const int n = fx.system.n, m = fx.system.m;
        model.n = n;
        model.m = m;
        model.domain = fx.system.domain;
        for (std::size_t k = 0; k < fx.partition.slabs.size(); ++k) {
            const SlabSpec& s = fx.partition.slabs[k];
            Region region;
            region.index = static_cast<int>(k);
            region.theta = fx.partition.theta;
            region.beta1 = s.lo;
            region.beta2 = s.hi;
            auto [Q, f] = slab_to_ellipsoid(fx.partition.theta, s.lo, s.hi);
            region.Q = Q;
            region.f = f;
            model.regions.push_back(region);

            AffineSubmodel sub;
            sub.A = fx.published_Abar[k].leftCols(n);
            sub.B = fx.published_Abar[k].rightCols(m);
            sub.C = fx.published_C[k];
            sub.operating_point = s.operating_point;
            model.submodels.push_back(sub);
        }
        if (!model.regions[0].contains(VectorXd::Zero(n + m)))
            throw DomainError("fixture partition does not list the origin slab first");
    } else {
        model = build_model(fx.system, fx.partition);
    }
    model.bounds = estimate_error_bounds(fx.system, model, samples_per_region, seed);
    return model;
}

/// Wraps the published gains and surface into a ControllerDesign. W and P are
/// left empty: the source prints only the gains, offsets and surface. The
/// switching terms use the fixture's controller bounds when set, otherwise
/// the estimated model bounds.
inline ControllerDesign make_published_design(const Fixture& fx, const PwaModel& model) {
    if (!fx.has_published()) throw ShapeError("fixture has no published matrices");
    ControllerDesign d;
    d.n = model.n;
    d.m = model.m;
    d.nominal.K = fx.published_K;
    d.nominal.D.push_back(VectorXd::Zero(model.m));
    for (const auto& di : fx.published_D) d.nominal.D.push_back(di);
    d.surface.S_bar = fx.published_S;
    d.surface.S_x = fx.published_S.leftCols(model.n);
    d.surface.S_u = fx.published_S.rightCols(model.m);
    d.bounds = fx.controller_bounds ? *fx.controller_bounds : model.bounds;
    PwaModel scaled = model;
    scaled.bounds = d.bounds;
    d.beta = beta_terms(scaled, d.surface.S_x);
    d.gamma = fx.gamma;
    return d;
}

inline SimConfig fixture_sim_config(const Fixture& fx) {
    SimConfig cfg;
    cfg.h = fx.h;
    cfg.T = fx.T;
    cfg.sigma = fx.sigma;
    return cfg;
}

}  // namespace pwactl
