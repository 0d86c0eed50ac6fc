#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "lmi.hpp"
#include "palm.hpp"

namespace pwactl {

// ---------------------------------------------------------------------------
// Design artifacts
// ---------------------------------------------------------------------------

/// Output of the nominal closed-loop design: common Lyapunov shape W,
/// per-region gains Kbar_j = Y_j W^{-1} and the affine offsets D_i (D_0 = 0).
struct NominalDesign {
    MatrixXd W;                  // (n+m) x (n+m), positive definite
    std::vector<MatrixXd> Y;     // m x (n+m) per region
    std::vector<double> lambda;  // one per region i >= 1
    std::vector<MatrixXd> K;     // gains, m x (n+m) per region
    std::vector<VectorXd> D;     // m-vectors per region, D[0] = 0
    double solver_margin = 0.0;
};

/// Output of the sliding-surface design: Lyapunov matrix P (normalized to
/// ||P|| = 1) and the surface Sbar = R2' P split into [S_x, S_u]. S_u equals
/// R2' P R2, hence symmetric positive definite and nonsingular.
struct SurfaceDesign {
    MatrixXd P;
    double eta0 = 0.0;
    std::vector<std::array<double, 3>> eta;  // (eta_i1, eta_i2, eta_i3) per region i >= 1
    MatrixXd S_bar;  // m x (n+m)
    MatrixXd S_x;    // m x n
    MatrixXd S_u;    // m x m
    double solver_margin = 0.0;
    // Bounds the surface LMIs were certified at. These can be tighter than
    // the estimated model bounds: the surface inequalities on hard problems
    // are feasible only for small assumed uncertainty, while the switching
    // terms of the controller always use the estimated bounds.
    ErrorBounds design_bounds;
};

struct ControllerDesign {
    int n = 0, m = 0;
    NominalDesign nominal;
    SurfaceDesign surface;
    double gamma = 0.0;
    std::vector<double> beta;  // beta_0 = 0, beta_j = eps_g ||S_x||
    ErrorBounds bounds;

    bool has_W() const { return nominal.W.size() > 0; }
    bool has_P() const { return surface.P.size() > 0; }
};

namespace detail {

inline void check_offsets(const PwaModel& model, const std::vector<VectorXd>& D) {
    if (static_cast<int>(D.size()) != model.l())
        throw ShapeError("offset list must have one entry per region i >= 1");
    for (const auto& d : D)
        if (d.size() != model.m) throw ShapeError("offset vector has wrong dimension");
}

inline VectorXd cbar(const PwaModel& model, int i, const VectorXd& Di) {
    VectorXd c(model.n + model.m);
    c << model.submodels[i].C, Di;
    return c;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// LMI assembly
// ---------------------------------------------------------------------------

/// Nominal-design LMIs: the origin-region inequality
///     R1 Abar_0 W + R2 Y_0 + (.)' < 0
/// and, per region i >= 1, the region-constrained block inequality in
/// (W, Y_i, lambda_i) built from Cbar_i = [C_i; D_i] and the ellipsoid data.
/// When `fixed_gains` is supplied Y_j is replaced by Kbar_j W and only
/// (W, lambda) remain unknown; that variant certifies published gain sets.
inline FeasibilityProblem assemble_lemma1(const PwaModel& model, const std::vector<VectorXd>& D,
                                          const std::vector<MatrixXd>* fixed_gains = nullptr) {
    detail::check_offsets(model, D);
    if (fixed_gains && static_cast<int>(fixed_gains->size()) != model.region_count())
        throw ShapeError("gain list must have one entry per region");
    const int n = model.n, m = model.m, N = n + m;
    const MatrixXd R1 = lift_state(n, m), R2 = lift_input(n, m);
    const MatrixXd I_N = MatrixXd::Identity(N, N);

    FeasibilityProblem p;
    const int W = p.add_symmetric("W", N, true);
    std::vector<int> Y;
    if (!fixed_gains)
        for (int j = 0; j < model.region_count(); ++j)
            Y.push_back(p.add_rectangular("Y" + std::to_string(j), m, N));
    std::vector<int> lam;
    for (int i = 1; i < model.region_count(); ++i)
        lam.push_back(p.add_scalar("lambda" + std::to_string(i), true));

    auto add_loop_terms = [&](ExprBuilder& b, int i) {
        if (fixed_gains) {
            b.add_term(0, 0, R1 * model.submodels[i].Abar() + R2 * (*fixed_gains)[i], W, I_N);
        } else {
            b.add_term(0, 0, R1 * model.submodels[i].Abar(), W, I_N);
            b.add_term(0, 0, R2, Y[i], I_N);
        }
    };

    {
        ExprBuilder b(p, {N});
        add_loop_terms(b, 0);
        p.add_constraint(b.take("nominal[0]"), Sense::NegativeDefinite);
    }
    for (int i = 1; i < model.region_count(); ++i) {
        const Region& region = model.regions[i];
        const VectorXd cb = detail::cbar(model, i, D[i - 1]);
        ExprBuilder b(p, {N, 1});
        // (0,0): Omega_i - lambda_i Cbar Cbar'
        add_loop_terms(b, i);
        b.add_scalar_term(0, 0, -cb * cb.transpose(), lam[i - 1]);
        // (0,1): W Q' - lambda_i Cbar f
        b.add_term(0, 1, I_N, W, region.Q.transpose());
        b.add_scalar_term(0, 1, -cb * region.f, lam[i - 1]);
        // (1,1): lambda_i (1 - f^2)
        MatrixXd ff(1, 1);
        ff(0, 0) = 1.0 - region.f * region.f;
        b.add_scalar_term(1, 1, ff, lam[i - 1]);
        p.add_constraint(b.take("nominal[" + std::to_string(i) + "]"),
                         Sense::NegativeDefinite);
    }
    return p;
}

/// Surface-design LMIs in (P, eta). For the origin region, blocks (N, n, m):
///   [ L0 + eta0 ef0^2 I   P R1              P R2        ]
///   [ .                   R1'P R1 - eta0 I  0           ]
///   [ .                   .                 -R2'P R2    ]  < 0
/// and per region i >= 1, blocks (N, n, n, 1, m):
///   [ Li + ei1 ef^2 I - ei3 Q'Q   PR1   PR1   P Cbar_i - ei3 Q'f    PR2     ]
///   [ .   R1'P R1 - ei1 I         0     0     0                             ]
///   [ .   .         R1'P R1 - ei2 I     0     0                             ]
///   [ .   .   .     ei2 eg^2 - ei3 (f^2 - 1)  0                             ]
///   [ .   .   .   .                           -R2'P R2 / 2                  ]  < 0
/// with Li = P H_i + H_i' P and H_i = R1 Abar_i + R2 Kbar_i.
inline FeasibilityProblem assemble_theorem2(const PwaModel& model,
                                            const std::vector<MatrixXd>& K,
                                            const std::vector<VectorXd>& D) {
    detail::check_offsets(model, D);
    if (static_cast<int>(K.size()) != model.region_count())
        throw ShapeError("gain list must have one entry per region");
    const int n = model.n, m = model.m, N = n + m;
    const MatrixXd R1 = lift_state(n, m), R2 = lift_input(n, m);
    const MatrixXd I_N = MatrixXd::Identity(N, N);
    const MatrixXd I_n = MatrixXd::Identity(n, n);
    const ErrorBounds& eb = model.bounds;

    FeasibilityProblem p;
    const int P = p.add_symmetric("P", N, true);
    const int eta0 = p.add_scalar("eta0", true);
    struct Etas {
        int e1, e2, e3;
    };
    std::vector<Etas> etas;
    for (int i = 1; i < model.region_count(); ++i) {
        const std::string s = std::to_string(i);
        etas.push_back({p.add_scalar("eta" + s + "_1", true),
                        p.add_scalar("eta" + s + "_2", true),
                        p.add_scalar("eta" + s + "_3", true)});
    }

    {
        const MatrixXd H0 = R1 * model.submodels[0].Abar() + R2 * K[0];
        ExprBuilder b(p, {N, n, m});
        b.add_term(0, 0, I_N, P, H0);
        b.add_scalar_term(0, 0, eb.eps_f0 * eb.eps_f0 * I_N, eta0);
        b.add_term(0, 1, I_N, P, R1);
        b.add_term(0, 2, I_N, P, R2);
        b.add_term_single(1, R1.transpose(), P, R1);
        b.add_scalar_term(1, 1, -I_n, eta0);
        b.add_term_single(2, -R2.transpose(), P, R2);
        p.add_constraint(b.take("surface[0]"), Sense::NegativeDefinite);
    }
    for (int i = 1; i < model.region_count(); ++i) {
        const Region& region = model.regions[i];
        const VectorXd cb = detail::cbar(model, i, D[i - 1]);
        const MatrixXd Hi = R1 * model.submodels[i].Abar() + R2 * K[i];
        const Etas& e = etas[i - 1];
        ExprBuilder b(p, {N, n, n, 1, m});
        b.add_term(0, 0, I_N, P, Hi);
        b.add_scalar_term(0, 0, eb.eps_f * eb.eps_f * I_N, e.e1);
        b.add_scalar_term(0, 0, -region.Q.transpose() * region.Q, e.e3);
        b.add_term(0, 1, I_N, P, R1);
        b.add_term(0, 2, I_N, P, R1);
        b.add_term(0, 3, I_N, P, MatrixXd(cb));
        b.add_scalar_term(0, 3, -region.Q.transpose() * region.f, e.e3);
        b.add_term(0, 4, I_N, P, R2);
        b.add_term_single(1, R1.transpose(), P, R1);
        b.add_scalar_term(1, 1, -I_n, e.e1);
        b.add_term_single(2, R1.transpose(), P, R1);
        b.add_scalar_term(2, 2, -I_n, e.e2);
        MatrixXd g2(1, 1);
        g2(0, 0) = eb.eps_g * eb.eps_g;
        b.add_scalar_term(3, 3, g2, e.e2);
        MatrixXd f2(1, 1);
        f2(0, 0) = -(region.f * region.f - 1.0);
        b.add_scalar_term(3, 3, f2, e.e3);
        b.add_term_single(4, -0.5 * R2.transpose(), P, R2);
        p.add_constraint(b.take("surface[" + std::to_string(i) + "]"),
                         Sense::NegativeDefinite);
    }
    return p;
}

inline FeasibilityProblem assemble_theorem2(const PwaModel& model,
                                            const NominalDesign& nominal) {
    std::vector<VectorXd> D(nominal.D.begin() + 1, nominal.D.end());
    return assemble_theorem2(model, nominal.K, D);
}

// ---------------------------------------------------------------------------
// Solution extraction
// ---------------------------------------------------------------------------

/// Recovers the nominal design from a feasible Lemma-1 solution.
inline NominalDesign extract_nominal(const PwaModel& model, const std::vector<VectorXd>& D,
                                     const FeasibilitySolution& sol) {
    NominalDesign d;
    d.W = sol.assignment.at("W");
    d.solver_margin = sol.margin;
    Eigen::LLT<MatrixXd> llt(d.W);
    for (int j = 0; j < model.region_count(); ++j) {
        const MatrixXd& Yj = sol.assignment.at("Y" + std::to_string(j));
        d.Y.push_back(Yj);
        d.K.push_back(llt.solve(Yj.transpose()).transpose());  // K W = Y
    }
    for (int i = 1; i < model.region_count(); ++i)
        d.lambda.push_back(sol.assignment.at("lambda" + std::to_string(i))(0, 0));
    d.D.push_back(VectorXd::Zero(model.m));
    for (const auto& di : D) d.D.push_back(di);
    return d;
}

/// Recovers the surface design from a feasible Theorem-2 solution. P is
/// rescaled to ||P|| = 1 (the surface is invariant to this scaling) and the
/// eta multipliers are rescaled with it. model.bounds should be the bounds
/// the problem was assembled with; they are recorded as design_bounds.
inline SurfaceDesign extract_surface(const PwaModel& model, const FeasibilitySolution& sol) {
    const int n = model.n, m = model.m;
    SurfaceDesign s;
    s.P = sol.assignment.at("P");
    const double scale = spectral_norm(s.P);
    if (scale <= 0.0) throw ConditioningError("surface solve returned a zero P");
    s.P /= scale;
    s.eta0 = sol.assignment.at("eta0")(0, 0) / scale;
    for (int i = 1; i < model.region_count(); ++i) {
        const std::string base = "eta" + std::to_string(i) + "_";
        s.eta.push_back({sol.assignment.at(base + "1")(0, 0) / scale,
                         sol.assignment.at(base + "2")(0, 0) / scale,
                         sol.assignment.at(base + "3")(0, 0) / scale});
    }
    s.S_bar = lift_input(n, m).transpose() * s.P;  // bottom m rows of P
    s.S_x = s.S_bar.leftCols(n);
    s.S_u = s.S_bar.rightCols(m);
    s.solver_margin = sol.margin;
    s.design_bounds = model.bounds;
    return s;
}

inline std::vector<double> beta_terms(const PwaModel& model, const MatrixXd& S_x) {
    std::vector<double> beta(static_cast<std::size_t>(model.region_count()), 0.0);
    const double sx = spectral_norm(S_x);
    for (int j = 1; j < model.region_count(); ++j)
        beta[static_cast<std::size_t>(j)] = model.bounds.eps_g * sx;
    return beta;
}

/// Default reaching gain: 0.1 ||S_x|| diam(X x U) max(eps_f0, eps_f),
/// floored at 1e-3. The reaching law only needs gamma > 0; this scales it
/// with the uncertainty magnitude the switching term has to dominate.
inline double default_gamma(const PwaModel& model, const MatrixXd& S_x) {
    const double g = 0.1 * spectral_norm(S_x) * model.domain.diameter() *
                     std::max(model.bounds.eps_f0, model.bounds.eps_f);
    return std::max(g, 1e-3);
}

// ---------------------------------------------------------------------------
// Offset grid search (sample method)
// ---------------------------------------------------------------------------

/// Grid over the offset vector [D_1 ... D_l]. Each scalar axis can be tied to
/// an earlier axis (value = factor * master) to exploit model symmetry.
struct GridSpec {
    std::vector<std::pair<double, double>> range;  // per region i >= 1 (applies to all m comps)
    int points_per_axis = 5;
    int max_refinements = 3;
    std::vector<int> tie;            // per scalar axis: -1 free, else master axis index
    std::vector<double> tie_factor;  // factor for tied axes
    int max_candidates_per_round = 4000;
    std::vector<std::vector<VectorXd>> explicit_points;  // overrides the grid when non-empty
};

/// Default grid: per-axis range +-2 max_i ||C_i||, five points per axis.
inline GridSpec default_grid(const PwaModel& model) {
    GridSpec g;
    double cmax = 0.0;
    for (const auto& sub : model.submodels) cmax = std::max(cmax, sub.C.norm());
    const double r = 2.0 * std::max(cmax, 1e-3);
    for (int i = 1; i < model.region_count(); ++i) g.range.emplace_back(-r, r);
    return g;
}

struct OffsetSearchLog {
    int rounds = 0;
    int candidates_tried = 0;
    std::vector<VectorXd> winning_D;
};

namespace detail {

/// Visits offset candidates in a deterministic low-discrepancy (van der
/// Corput) ordering of the grid, refining the density between rounds. Returns
/// true as soon as the visitor accepts a candidate.
template <typename Visitor>
bool visit_offset_grid(const PwaModel& model, const GridSpec& grid, Visitor&& visit_fn,
                       OffsetSearchLog* log = nullptr) {
    const int l = model.l(), m = model.m;

    auto try_one = [&](const std::vector<VectorXd>& D) -> bool {
        if (log) ++log->candidates_tried;
        if (!visit_fn(D)) return false;
        if (log) log->winning_D = D;
        return true;
    };

    if (l == 0) {
        if (log) ++log->rounds;
        return try_one({});
    }
    if (!grid.explicit_points.empty()) {
        if (log) ++log->rounds;
        for (const auto& D : grid.explicit_points)
            if (try_one(D)) return true;
        return false;
    }
    if (static_cast<int>(grid.range.size()) != l)
        throw ShapeError("grid must provide a range per region i >= 1");

    const int axes = l * m;
    std::vector<int> tie(axes, -1);
    std::vector<double> tie_factor(axes, 1.0);
    for (std::size_t a = 0; a < grid.tie.size() && a < tie.size(); ++a) {
        tie[a] = grid.tie[a];
        tie_factor[a] = (a < grid.tie_factor.size()) ? grid.tie_factor[a] : 1.0;
    }
    std::vector<int> free_axes;
    for (int a = 0; a < axes; ++a)
        if (tie[a] < 0) free_axes.push_back(a);

    int pts = grid.points_per_axis;
    for (int round = 0; round <= grid.max_refinements; ++round) {
        if (log) ++log->rounds;
        std::uint64_t total = 1;
        for (std::size_t k = 0; k < free_axes.size(); ++k) {
            total *= static_cast<std::uint64_t>(pts);
            if (total > 100000000ull) break;
        }
        const std::uint64_t visit = std::min<std::uint64_t>(
            total, static_cast<std::uint64_t>(grid.max_candidates_per_round));

        std::vector<std::uint64_t> order;
        order.reserve(visit);
        if (total <= 4 * visit) {
            std::vector<std::pair<double, std::uint64_t>> keyed;
            keyed.reserve(total);
            for (std::uint64_t idx = 0; idx < total; ++idx)
                keyed.emplace_back(radical_inverse(idx, 2), idx);
            std::sort(keyed.begin(), keyed.end());
            for (std::uint64_t k = 0; k < visit; ++k) order.push_back(keyed[k].second);
        } else {
            // large grid: stride through it with a golden-ratio jump
            const std::uint64_t stride =
                std::max<std::uint64_t>(1, static_cast<std::uint64_t>(0.6180339887 * total));
            std::uint64_t idx = 0;
            for (std::uint64_t k = 0; k < visit; ++k) {
                order.push_back(idx % total);
                idx += stride;
            }
        }

        for (std::uint64_t flat : order) {
            std::vector<double> axis_val(axes, 0.0);
            std::uint64_t rem = flat;
            for (int fa : free_axes) {
                const int gi = static_cast<int>(rem % static_cast<std::uint64_t>(pts));
                rem /= static_cast<std::uint64_t>(pts);
                const auto [lo, hi] = grid.range[fa / m];
                axis_val[fa] = (pts == 1) ? 0.5 * (lo + hi)
                                          : lo + (hi - lo) * gi / static_cast<double>(pts - 1);
            }
            for (int a = 0; a < axes; ++a)
                if (tie[a] >= 0) axis_val[a] = tie_factor[a] * axis_val[tie[a]];

            std::vector<VectorXd> D;
            for (int i = 0; i < l; ++i) {
                VectorXd d(m);
                for (int c = 0; c < m; ++c) d(c) = axis_val[i * m + c];
                D.push_back(d);
            }
            if (try_one(D)) return true;
        }
        pts = 2 * pts - 1;
    }
    return false;
}

}  // namespace detail

/// Algorithm "sample method": solve the nominal LMIs at each grid candidate
/// and return the first feasible design. On failure the grid density is
/// doubled up to max_refinements before giving up.
inline NominalDesign sample_offsets(const PwaModel& model, const GridSpec& grid,
                                    const SolveOptions& lmi_options = {},
                                    OffsetSearchLog* log = nullptr) {
    NominalDesign design;
    const bool found = detail::visit_offset_grid(
        model, grid,
        [&](const std::vector<VectorXd>& D) {
            FeasibilitySolution sol = solve_feasibility(assemble_lemma1(model, D), lmi_options);
            if (sol.status != SolveStatus::Feasible) return false;
            design = extract_nominal(model, D, sol);
            return true;
        },
        log);
    if (!found)
        throw NoFeasibleOffsets(model.l() == 0
                                    ? "nominal LMIs infeasible for the single-region model"
                                    : "offset grid exhausted after " +
                                          std::to_string(grid.max_refinements) + " refinements");
    return design;
}

// ---------------------------------------------------------------------------
// End-to-end design
// ---------------------------------------------------------------------------

struct DesignOptions {
    int samples_per_region = 400;
    std::uint64_t seed = 0;
    std::optional<GridSpec> grid;   // default_grid(model) when unset
    std::optional<double> gamma;    // default_gamma(...) when unset
    int l_max = 32;
    SolveOptions lmi;
    // Bounds assumed by the surface LMIs. Unset means the estimated model
    // bounds. The controller's switching terms always use the estimated
    // bounds regardless of this choice.
    std::optional<ErrorBounds> surface_bounds;
};

struct SynthesisResult {
    PwaModel model;
    ControllerDesign design;
    std::vector<std::string> attempts;
};

/// Runs the full design loop: build the PWA model, search the offset grid,
/// and for every nominal-feasible candidate attempt the surface LMIs; the
/// first candidate passing both wins. When the grid is exhausted the widest
/// slab is bisected and the loop repeats until l exceeds l_max.
inline SynthesisResult design_controller(const NonlinearSystem& system,
                                         const PartitionSpec& partition,
                                         const DesignOptions& options = {}) {
    system.check_assumptions();
    PartitionSpec spec = partition;
    std::vector<std::string> attempts;

    while (true) {
        PwaModel model = build_model(system, spec);
        if (model.l() > options.l_max) {
            std::ostringstream os;
            for (const auto& a : attempts) os << a << "\n";
            throw SynthesisFailed("partition count exceeded l_max without a feasible design",
                                  os.str());
        }
        model.bounds = estimate_error_bounds(system, model, options.samples_per_region,
                                             options.seed);

        GridSpec grid = options.grid ? *options.grid : default_grid(model);
        if (options.grid && static_cast<int>(grid.range.size()) != model.l() &&
            grid.explicit_points.empty()) {
            // partition was refined past the user grid; fall back to the default
            grid = default_grid(model);
        }

        PwaModel surface_model = model;
        if (options.surface_bounds) surface_model.bounds = *options.surface_bounds;

        NominalDesign nominal;
        SurfaceDesign surface;
        int nominal_feasible = 0;
        const bool found = detail::visit_offset_grid(
            model, grid, [&](const std::vector<VectorXd>& D) {
                FeasibilitySolution s1 =
                    solve_feasibility(assemble_lemma1(model, D), options.lmi);
                if (s1.status != SolveStatus::Feasible) return false;
                ++nominal_feasible;
                NominalDesign cand = extract_nominal(model, D, s1);
                FeasibilitySolution s2 =
                    solve_feasibility(assemble_theorem2(surface_model, cand), options.lmi);
                if (s2.status != SolveStatus::Feasible) return false;
                nominal = cand;
                surface = extract_surface(surface_model, s2);
                return true;
            });
        if (!found) {
            attempts.push_back("l=" + std::to_string(model.l()) + ": " +
                               (nominal_feasible == 0
                                    ? "no feasible offset"
                                    : "surface LMIs infeasible for all " +
                                          std::to_string(nominal_feasible) +
                                          " nominal-feasible offsets"));
            spec = refine_partition(spec);
            continue;
        }

        SynthesisResult result;
        result.model = model;
        result.attempts = attempts;
        ControllerDesign& d = result.design;
        d.n = model.n;
        d.m = model.m;
        d.nominal = nominal;
        d.surface = surface;
        d.bounds = model.bounds;
        d.beta = beta_terms(model, d.surface.S_x);
        d.gamma = options.gamma ? *options.gamma : default_gamma(model, d.surface.S_x);
        return result;
    }
}

// ---------------------------------------------------------------------------
// Robustness margin report
// ---------------------------------------------------------------------------

/// Converse-Lyapunov constants for the robustness inequality. The exponential
/// form uses (b3, b4, lambda); the asymptotic form uses (rho, h, mu) in the
/// same slots.
struct RobustnessConstants {
    double b3 = 0.0;
    double b4 = 0.0;
    double lambda = 0.0;
};

struct MarginReport {
    double amplification = 0.0;  // 1 + ||R2 Su^-1|| ||Sx||
    double lhs = 0.0;            // amplification * eps_f + max(eps_f, eps_g)
    double lambda_limit = 0.0;   // upper bound for an admissible lambda
    bool has_verdict = false;
    double rhs = 0.0;
    bool pass = false;
};

/// Evaluates the error-bound design inequality
///   (1 + ||R2 Su^-1|| ||Sx||) eps_f + max(eps_f, eps_g)
///       < [1 - (2 + ||R2 Su^-1|| ||Sx||) lambda] b3 / b4.
/// The constants b3, b4, lambda come from a converse-Lyapunov argument and
/// are user-supplied; without them only the left-hand side and the norm
/// amplification factor are reported.
inline MarginReport robustness_margin(const ControllerDesign& design,
                                      std::optional<RobustnessConstants> constants = {}) {
    MarginReport r;
    const MatrixXd Su_inv = design.surface.S_u.inverse();
    const double coupling = spectral_norm(Su_inv) * spectral_norm(design.surface.S_x);
    r.amplification = 1.0 + coupling;
    r.lhs = r.amplification * design.bounds.eps_f +
            std::max(design.bounds.eps_f, design.bounds.eps_g);
    r.lambda_limit = 1.0 / (2.0 + coupling);
    if (constants) {
        r.has_verdict = true;
        r.rhs = (1.0 - (2.0 + coupling) * constants->lambda) * constants->b3 / constants->b4;
        r.pass = r.lhs < r.rhs;
    }
    return r;
}

}  // namespace pwactl
