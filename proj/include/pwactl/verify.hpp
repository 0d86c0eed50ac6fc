#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lmi.hpp"
#include "palm.hpp"
#include "sim.hpp"
#include "synthesis.hpp"

namespace pwactl {

inline std::map<std::string, MatrixXd> nominal_assignment(const NominalDesign& nom) {
    std::map<std::string, MatrixXd> a;
    a["W"] = nom.W;
    for (std::size_t j = 0; j < nom.Y.size(); ++j) a["Y" + std::to_string(j)] = nom.Y[j];
    for (std::size_t i = 0; i < nom.lambda.size(); ++i)
        a["lambda" + std::to_string(i + 1)] = MatrixXd::Constant(1, 1, nom.lambda[i]);
    return a;
}

inline std::map<std::string, MatrixXd> surface_assignment(const SurfaceDesign& surf) {
    std::map<std::string, MatrixXd> a;
    a["P"] = surf.P;
    a["eta0"] = MatrixXd::Constant(1, 1, surf.eta0);
    for (std::size_t i = 0; i < surf.eta.size(); ++i) {
        const std::string base = "eta" + std::to_string(i + 1) + "_";
        a[base + "1"] = MatrixXd::Constant(1, 1, surf.eta[i][0]);
        a[base + "2"] = MatrixXd::Constant(1, 1, surf.eta[i][1]);
        a[base + "3"] = MatrixXd::Constant(1, 1, surf.eta[i][2]);
    }
    return a;
}

struct VerifyOptions {
    int descent_sims = 20;
    std::uint64_t seed = 7;
    double descent_slack = 1e-9;  // allowed V increase between samples
    double sim_T = 4.0;
    double sim_h = 1e-3;
    SolveOptions lmi;
};

struct VerifyResult {
    bool beta_ok = false;
    bool su_ok = false;
    bool nominal_ok = false;      // residuals of the nominal LMIs (stored or re-certified W)
    bool surface_ok = true;       // residuals of the surface LMIs when a P is available
    bool surface_checked = false;
    bool descent_ok = false;
    int descent_violations = 0;
    ResidualReport nominal_report;
    ResidualReport surface_report;
    MatrixXd W_used;              // the W the descent check ran against
    std::vector<std::string> messages;

    bool pass() const { return beta_ok && su_ok && nominal_ok && surface_ok && descent_ok; }
};

/// Re-checks a design against its model: the beta definitions, S_u
/// nonsingularity, the LMI residuals (re-certifying W for published gain sets
/// that carry none), and the quadratic descent of the nominal closed loop
/// along simulated trajectories.
inline VerifyResult verify_design(const PwaModel& model, const ControllerDesign& design,
                                  const VerifyOptions& options = {}) {
    VerifyResult res;
    const int n = model.n, m = model.m;
    const MatrixXd R2 = lift_input(n, m);

    // beta definitions: beta_0 = 0, beta_j = eps_g ||S_x||
    {
        const double expected = design.bounds.eps_g * spectral_norm(design.surface.S_x);
        res.beta_ok = design.beta.size() == static_cast<std::size_t>(model.region_count()) &&
                      design.beta[0] == 0.0;
        for (std::size_t j = 1; j < design.beta.size(); ++j)
            if (std::abs(design.beta[j] - expected) > 1e-10 * std::max(1.0, expected))
                res.beta_ok = false;
        if (!res.beta_ok) res.messages.push_back("beta terms do not match eps_g * ||S_x||");
    }

    // S_u nonsingular (and consistent with P when available)
    {
        if (design.has_P()) {
            const MatrixXd Su = R2.transpose() * design.surface.P * R2;
            res.su_ok = min_eigenvalue(Su) > 0.0 &&
                        (design.surface.S_bar - R2.transpose() * design.surface.P).norm() <=
                            1e-8 * std::max(1.0, design.surface.P.norm());
        } else {
            Eigen::JacobiSVD<MatrixXd> svd(design.surface.S_u);
            res.su_ok = svd.singularValues().minCoeff() > 0.0;
        }
        if (!res.su_ok) res.messages.push_back("S_u is singular or inconsistent with P");
    }

    std::vector<VectorXd> D_tail(design.nominal.D.begin() + 1, design.nominal.D.end());

    // nominal LMIs
    if (design.has_W() && design.nominal.lambda.size() ==
                              static_cast<std::size_t>(model.l())) {
        FeasibilityProblem p = assemble_lemma1(model, D_tail);
        res.nominal_report = check_residuals(p, nominal_assignment(design.nominal));
        res.nominal_ok = res.nominal_report.all_pass();
        res.W_used = design.nominal.W;
        if (!res.nominal_ok) res.messages.push_back("stored W fails the nominal LMIs");
    } else {
        // published gains: certify a W for them
        FeasibilityProblem p = assemble_lemma1(model, D_tail, &design.nominal.K);
        FeasibilitySolution sol = solve_feasibility(p, options.lmi);
        res.nominal_ok = sol.status == SolveStatus::Feasible;
        if (res.nominal_ok) {
            res.nominal_report = check_residuals(p, sol.assignment);
            res.W_used = sol.assignment.at("W");
            res.messages.push_back("published gains: W re-certified by a fixed-gain solve");
        } else {
            res.messages.push_back("published gains: no certifying W found");
        }
    }

    // surface LMIs at the bounds the design was certified for
    if (design.has_P()) {
        res.surface_checked = true;
        PwaModel surface_model = model;
        surface_model.bounds = design.surface.design_bounds;
        FeasibilityProblem p = assemble_theorem2(surface_model, design.nominal.K, D_tail);
        res.surface_report = check_residuals(p, surface_assignment(design.surface));
        res.surface_ok = res.surface_report.all_pass();
        if (!res.surface_ok) res.messages.push_back("stored (P, eta) fail the surface LMIs");
    }

    // quadratic descent of the nominal closed loop
    if (res.W_used.size() > 0) {
        const MatrixXd Winv = res.W_used.llt().solve(MatrixXd::Identity(n + m, n + m));
        SimConfig cfg;
        cfg.h = options.sim_h;
        cfg.T = options.sim_T;
        cfg.lyapunov = 0.5 * (Winv + Winv.transpose());
        std::mt19937_64 rng(options.seed ^ 0xabcdef1234567ull);
        std::uniform_real_distribution<double> unif(0.2, 0.8);
        int violations = 0;
        for (int run = 0; run < options.descent_sims; ++run) {
            VectorXd x0(n + m);
            for (int k = 0; k < n + m; ++k) {
                const double t = unif(rng);
                x0(k) = model.domain.lo(k) + t * (model.domain.hi(k) - model.domain.lo(k));
            }
            Trajectory traj = simulate_nominal(model, design, cfg, x0);
            for (std::size_t s = 1; s < traj.samples.size(); ++s)
                if (traj.samples[s].V - traj.samples[s - 1].V >
                    options.descent_slack * std::max(1.0, traj.samples[s - 1].V))
                    ++violations;
        }
        res.descent_violations = violations;
        res.descent_ok = violations == 0;
        if (!res.descent_ok)
            res.messages.push_back("x' W^-1 x increased along " + std::to_string(violations) +
                                   " nominal simulation steps");
    } else {
        res.descent_ok = false;
    }

    return res;
}

}  // namespace pwactl
