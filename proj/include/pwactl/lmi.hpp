#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace pwactl {

// ---------------------------------------------------------------------------
// Problem description
// ---------------------------------------------------------------------------

enum class VarKind { Scalar, Symmetric, Rectangular };

struct DecisionVariable {
    std::string name;
    VarKind kind = VarKind::Scalar;
    int rows = 1, cols = 1;
    bool positive = false;  // scalar > 0, or symmetric positive definite

    int components() const {
        switch (kind) {
            case VarKind::Scalar: return 1;
            case VarKind::Symmetric: return rows * (rows + 1) / 2;
            case VarKind::Rectangular: return rows * cols;
        }
        return 0;
    }
};

/// One affine term of a matrix expression. For matrix variables the
/// contribution is left * X * right (X transposed when `transpose` is set);
/// for scalar variables it is value * (left * right).
struct LinearTerm {
    MatrixXd left;
    int var = -1;
    MatrixXd right;
    bool transpose = false;
    bool scalar = false;
};

/// Affine symmetric-matrix-valued expression in the decision variables.
/// Evaluation symmetrizes the result and rejects expressions whose assembled
/// value is not symmetric to rounding error.
struct MatrixExpr {
    MatrixXd constant;
    std::vector<LinearTerm> terms;
    std::vector<int> block_sizes;
    std::string label;

    int dim() const { return static_cast<int>(constant.rows()); }
};

enum class Sense { NegativeDefinite, PositiveDefinite };

struct Constraint {
    MatrixExpr expr;
    Sense sense = Sense::NegativeDefinite;
};

class FeasibilityProblem {
public:
    int add_scalar(const std::string& name, bool positive) {
        return add_variable({name, VarKind::Scalar, 1, 1, positive});
    }
    int add_symmetric(const std::string& name, int d, bool positive_definite) {
        if (d <= 0) throw ShapeError("symmetric variable must have positive dimension");
        return add_variable({name, VarKind::Symmetric, d, d, positive_definite});
    }
    int add_rectangular(const std::string& name, int p, int q) {
        if (p <= 0 || q <= 0) throw ShapeError("rectangular variable must have positive dims");
        return add_variable({name, VarKind::Rectangular, p, q, false});
    }

    void add_constraint(MatrixExpr expr, Sense sense, const std::string& label = "") {
        if (!label.empty()) expr.label = label;
        for (const auto& t : expr.terms)
            if (t.var < 0 || t.var >= static_cast<int>(vars_.size()))
                throw ShapeError("constraint references an undeclared variable");
        constraints_.push_back({std::move(expr), sense});
    }

    const std::vector<DecisionVariable>& variables() const { return vars_; }
    const std::vector<Constraint>& constraints() const { return constraints_; }

    int var_index(const std::string& name) const {
        for (std::size_t i = 0; i < vars_.size(); ++i)
            if (vars_[i].name == name) return static_cast<int>(i);
        return -1;
    }

    int total_components() const {
        int c = 0;
        for (const auto& v : vars_) c += v.components();
        return c;
    }

private:
    int add_variable(DecisionVariable v) {
        if (var_index(v.name) >= 0) throw ShapeError("duplicate variable name: " + v.name);
        vars_.push_back(std::move(v));
        return static_cast<int>(vars_.size()) - 1;
    }

    std::vector<DecisionVariable> vars_;
    std::vector<Constraint> constraints_;
};

/// Evaluates the expression at a full assignment (one matrix per variable,
/// scalars as 1x1). Returns the symmetrized value.
inline MatrixXd evaluate(const MatrixExpr& expr, const std::vector<MatrixXd>& values,
                         double* symmetry_defect = nullptr) {
    MatrixXd E = expr.constant;
    for (const auto& term : expr.terms) {
        const MatrixXd& X = values.at(static_cast<std::size_t>(term.var));
        if (term.scalar) {
            E.noalias() += X(0, 0) * (term.left * term.right);
        } else if (term.transpose) {
            E.noalias() += term.left * X.transpose() * term.right;
        } else {
            E.noalias() += term.left * X * term.right;
        }
    }
    const double asym = (E - E.transpose()).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, E.cwiseAbs().maxCoeff());
    if (symmetry_defect) *symmetry_defect = asym;
    if (asym > 1e-10 * scale)
        throw ShapeError("expression '" + expr.label + "' evaluates to a non-symmetric matrix");
    return 0.5 * (E + E.transpose());
}

/// Block-structured builder for symmetric affine expressions. Off-diagonal
/// placements automatically add the transposed mate so the assembled
/// expression is symmetric by construction.
class ExprBuilder {
public:
    ExprBuilder(const FeasibilityProblem& problem, std::vector<int> blocks)
        : problem_(problem) {
        expr_.block_sizes = blocks;
        int dim = 0;
        for (int b : blocks) {
            offsets_.push_back(dim);
            dim += b;
        }
        expr_.constant = MatrixXd::Zero(dim, dim);
    }

    void add_const(int bi, int bj, const MatrixXd& M) {
        check_block_shape(bi, bj, M.rows(), M.cols());
        expr_.constant.block(offsets_[bi], offsets_[bj], M.rows(), M.cols()) += M;
        if (bi != bj)
            expr_.constant.block(offsets_[bj], offsets_[bi], M.cols(), M.rows()) +=
                M.transpose();
    }

    /// Places L * X * R into block (bi, bj) and its transpose into (bj, bi).
    /// On a diagonal block this contributes L X R + (L X R)'.
    void add_term(int bi, int bj, const MatrixXd& L, int var, const MatrixXd& R,
                  bool transpose = false) {
        check_var_term(var, L, R, transpose);
        check_block_shape(bi, bj, L.rows(), R.cols());
        expr_.terms.push_back({embed_left(bi, L), var, embed_right(bj, R), transpose, false});
        expr_.terms.push_back({embed_left(bj, R.transpose()), var, embed_right(bi, L.transpose()),
                               !transpose, false});
    }

    /// Places a single L * X * R on diagonal block bi; the caller guarantees
    /// the content is symmetric (e.g. R1' P R1).
    void add_term_single(int bi, const MatrixXd& L, int var, const MatrixXd& R,
                         bool transpose = false) {
        check_var_term(var, L, R, transpose);
        check_block_shape(bi, bi, L.rows(), R.cols());
        expr_.terms.push_back({embed_left(bi, L), var, embed_right(bi, R), transpose, false});
    }

    /// Places value * coeff into block (bi, bj) for a scalar variable, with
    /// the transposed mate when off-diagonal.
    void add_scalar_term(int bi, int bj, const MatrixXd& coeff, int var) {
        const auto& v = problem_.variables().at(static_cast<std::size_t>(var));
        if (v.kind != VarKind::Scalar) throw ShapeError("add_scalar_term expects a scalar var");
        check_block_shape(bi, bj, coeff.rows(), coeff.cols());
        expr_.terms.push_back({embed_left(bi, coeff), var,
                               embed_right(bj, MatrixXd::Identity(coeff.cols(), coeff.cols())),
                               false, true});
        if (bi != bj)
            expr_.terms.push_back(
                {embed_left(bj, coeff.transpose()), var,
                 embed_right(bi, MatrixXd::Identity(coeff.rows(), coeff.rows())), false, true});
    }

    MatrixExpr take(const std::string& label) {
        expr_.label = label;
        return std::move(expr_);
    }

private:
    void check_block_shape(int bi, int bj, Eigen::Index r, Eigen::Index c) const {
        if (bi < 0 || bj < 0 || bi >= static_cast<int>(expr_.block_sizes.size()) ||
            bj >= static_cast<int>(expr_.block_sizes.size()))
            throw ShapeError("block index out of range in expression '" + expr_.label + "'");
        if (r != expr_.block_sizes[bi] || c != expr_.block_sizes[bj])
            throw ShapeError("block content does not match the declared block sizes");
    }

    void check_var_term(int var, const MatrixXd& L, const MatrixXd& R, bool transpose) const {
        const auto& v = problem_.variables().at(static_cast<std::size_t>(var));
        const int xr = transpose ? v.cols : v.rows;
        const int xc = transpose ? v.rows : v.cols;
        if (L.cols() != xr || R.rows() != xc)
            throw ShapeError("term coefficients do not match variable '" + v.name + "'");
    }

    MatrixXd embed_left(int bi, const MatrixXd& L) const {
        MatrixXd full = MatrixXd::Zero(expr_.constant.rows(), L.cols());
        full.middleRows(offsets_[bi], L.rows()) = L;
        return full;
    }
    MatrixXd embed_right(int bj, const MatrixXd& R) const {
        MatrixXd full = MatrixXd::Zero(R.rows(), expr_.constant.cols());
        full.middleCols(offsets_[bj], R.cols()) = R;
        return full;
    }

    const FeasibilityProblem& problem_;
    MatrixExpr expr_;
    std::vector<int> offsets_;
};

// ---------------------------------------------------------------------------
// Feasibility solver
// ---------------------------------------------------------------------------

enum class SolveStatus { Feasible, Infeasible, MaxIterations };

struct SolveOptions {
    double tol = 1e-7;        // strict feasibility means margin >= tol
    int max_iter = 600;       // accepted Newton steps across the whole solve
    std::uint64_t seed = 0;   // unused by the deterministic path; kept for API uniformity
    double target_margin = 0.05;  // stop improving once this margin is reached
    double var_cap = 1e8;     // scale bound on every decision variable
    // Normalization floor for positive variables (scalars >= floor,
    // tr of PD matrices >= floor). The design systems solved here are
    // jointly homogeneous in their decision variables, so the floor costs
    // no generality and keeps the barrier path off the degenerate v = 0 ray.
    // Set to 0 for problems that are not scale-invariant.
    double positivity_floor = 1.0;
    double tau0 = 1.0;
    double tau_factor = 10.0;
    bool trace = false;       // print the outer path for debugging
};

struct FeasibilitySolution {
    std::map<std::string, MatrixXd> assignment;
    double margin = 0.0;
    int iterations = 0;
    SolveStatus status = SolveStatus::Infeasible;
    double achieved_t = 0.0;  // final epigraph value of the max-margin reformulation
};

namespace detail {

struct FlatLayout {
    std::vector<int> offset;
    int total = 0;
};

inline FlatLayout flatten_layout(const FeasibilityProblem& p) {
    FlatLayout lay;
    for (const auto& v : p.variables()) {
        lay.offset.push_back(lay.total);
        lay.total += v.components();
    }
    return lay;
}

inline MatrixXd unflatten_var(const DecisionVariable& v, const VectorXd& flat, int offset) {
    switch (v.kind) {
        case VarKind::Scalar: {
            MatrixXd M(1, 1);
            M(0, 0) = flat(offset);
            return M;
        }
        case VarKind::Symmetric: {
            MatrixXd M(v.rows, v.rows);
            int k = offset;
            for (int j = 0; j < v.rows; ++j)
                for (int i = 0; i <= j; ++i) {
                    M(i, j) = flat(k);
                    M(j, i) = flat(k);
                    ++k;
                }
            return M;
        }
        case VarKind::Rectangular: {
            MatrixXd M(v.rows, v.cols);
            int k = offset;
            for (int j = 0; j < v.cols; ++j)
                for (int i = 0; i < v.rows; ++i) M(i, j) = flat(k++);
            return M;
        }
    }
    throw ShapeError("unknown variable kind");
}

inline std::vector<MatrixXd> unflatten_all(const FeasibilityProblem& p, const FlatLayout& lay,
                                           const VectorXd& flat) {
    std::vector<MatrixXd> out;
    for (std::size_t i = 0; i < p.variables().size(); ++i)
        out.push_back(unflatten_var(p.variables()[i], flat, lay.offset[i]));
    return out;
}

/// One negative-definite constraint of the shifted system, expanded into a
/// constant part and per-component symmetric basis matrices.
struct SolverConstraint {
    MatrixXd E0;
    std::vector<std::pair<int, MatrixXd>> basis;  // (flat component, dE/dcomponent)
    int dim = 0;
};

inline void append_component_basis(std::vector<SolverConstraint>& out, SolverConstraint&& c) {
    c.dim = static_cast<int>(c.E0.rows());
    out.push_back(std::move(c));
}

/// Expands every user constraint (PD senses negated), positivity folds and
/// variable scale caps into plain E(v) < t I form.
inline std::vector<SolverConstraint> build_solver_constraints(const FeasibilityProblem& p,
                                                              const FlatLayout& lay,
                                                              double cap, double floor) {
    std::vector<SolverConstraint> out;
    const int ncomp = lay.total;

    // user constraints, by finite differencing the affine expression
    std::vector<MatrixXd> zero_values;
    for (const auto& v : p.variables()) zero_values.push_back(MatrixXd::Zero(v.rows, v.cols));
    for (const auto& con : p.constraints()) {
        const double sign = (con.sense == Sense::NegativeDefinite) ? 1.0 : -1.0;
        SolverConstraint sc;
        sc.E0 = sign * evaluate(con.expr, zero_values);
        // collect variables referenced by this constraint
        std::vector<bool> used(p.variables().size(), false);
        for (const auto& t : con.expr.terms) used[static_cast<std::size_t>(t.var)] = true;
        for (std::size_t vi = 0; vi < p.variables().size(); ++vi) {
            if (!used[vi]) continue;
            const auto& v = p.variables()[vi];
            for (int c = 0; c < v.components(); ++c) {
                VectorXd unit = VectorXd::Zero(ncomp);
                unit(lay.offset[vi] + c) = 1.0;
                std::vector<MatrixXd> values = zero_values;
                values[vi] = unflatten_var(v, unit, lay.offset[vi]);
                MatrixXd B = sign * evaluate(con.expr, values) - sc.E0;
                if (B.cwiseAbs().maxCoeff() > 0.0)
                    sc.basis.emplace_back(lay.offset[vi] + c, std::move(B));
            }
        }
        append_component_basis(out, std::move(sc));
    }

    // positivity folds and scale caps
    for (std::size_t vi = 0; vi < p.variables().size(); ++vi) {
        const auto& v = p.variables()[vi];
        const int off = lay.offset[vi];
        if (v.kind == VarKind::Scalar) {
            if (v.positive) {
                SolverConstraint fold;
                fold.E0 = floor * MatrixXd::Identity(1, 1);
                fold.basis.emplace_back(off, -MatrixXd::Identity(1, 1));
                append_component_basis(out, std::move(fold));
            }
            SolverConstraint hi;
            hi.E0 = -cap * MatrixXd::Identity(1, 1);
            hi.basis.emplace_back(off, MatrixXd::Identity(1, 1));
            append_component_basis(out, std::move(hi));
            if (!v.positive) {
                SolverConstraint lo;
                lo.E0 = -cap * MatrixXd::Identity(1, 1);
                lo.basis.emplace_back(off, -MatrixXd::Identity(1, 1));
                append_component_basis(out, std::move(lo));
            }
        } else if (v.kind == VarKind::Symmetric) {
            auto basis_mats = [&](double sign) {
                std::vector<std::pair<int, MatrixXd>> bs;
                int k = off;
                for (int j = 0; j < v.rows; ++j)
                    for (int i = 0; i <= j; ++i) {
                        MatrixXd B = MatrixXd::Zero(v.rows, v.rows);
                        B(i, j) = sign;
                        B(j, i) = sign;
                        bs.emplace_back(k++, std::move(B));
                    }
                return bs;
            };
            if (v.positive) {
                SolverConstraint fold;
                fold.E0 = MatrixXd::Zero(v.rows, v.rows);
                fold.basis = basis_mats(-1.0);
                append_component_basis(out, std::move(fold));
                if (floor > 0.0) {
                    // trace normalization: floor - tr(M) < t
                    SolverConstraint tr;
                    tr.E0 = floor * MatrixXd::Identity(1, 1);
                    int k = off;
                    for (int j = 0; j < v.rows; ++j)
                        for (int i = 0; i <= j; ++i) {
                            if (i == j) tr.basis.emplace_back(k, -MatrixXd::Identity(1, 1));
                            ++k;
                        }
                    append_component_basis(out, std::move(tr));
                }
            }
            SolverConstraint hi;
            hi.E0 = -cap * MatrixXd::Identity(v.rows, v.rows);
            hi.basis = basis_mats(1.0);
            append_component_basis(out, std::move(hi));
            if (!v.positive) {
                SolverConstraint lo;
                lo.E0 = -cap * MatrixXd::Identity(v.rows, v.rows);
                lo.basis = basis_mats(-1.0);
                append_component_basis(out, std::move(lo));
            }
        } else {
            // ||Y|| < cap through [-cap I, -Y; -Y', -cap I] < 0
            const int d = v.rows + v.cols;
            SolverConstraint sc;
            sc.E0 = -cap * MatrixXd::Identity(d, d);
            int k = off;
            for (int j = 0; j < v.cols; ++j)
                for (int i = 0; i < v.rows; ++i) {
                    MatrixXd B = MatrixXd::Zero(d, d);
                    B(i, v.rows + j) = -1.0;
                    B(v.rows + j, i) = -1.0;
                    sc.basis.emplace_back(k++, std::move(B));
                }
            append_component_basis(out, std::move(sc));
        }
    }
    return out;
}

inline MatrixXd constraint_value(const SolverConstraint& sc, const VectorXd& v) {
    MatrixXd E = sc.E0;
    for (const auto& [comp, B] : sc.basis) E += v(comp) * B;
    return E;
}

}  // namespace detail

/// Decides strict feasibility of the constraint system by minimizing t in the
/// shifted system E_k(v) < t I (max-margin epigraph) with a log-det barrier
/// interior-point method. Positive-definiteness requirements on variables are
/// folded into the shifted system the same way. Internals run in long double:
/// the design systems couple gains of order 1e4 with surface blocks of order
/// 1e-5, and the Newton systems are too ill-conditioned for double.
inline FeasibilitySolution solve_feasibility(const FeasibilityProblem& problem,
                                             const SolveOptions& options = {}) {
    if (problem.constraints().empty())
        throw ShapeError("feasibility problem needs at least one constraint");
    if (problem.total_components() > 5000)
        throw ShapeError("problem exceeds the supported decision-variable size");

    using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    using LVec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

    const auto lay = detail::flatten_layout(problem);
    const auto cons_d = detail::build_solver_constraints(problem, lay, options.var_cap,
                                                         options.positivity_floor);
    const int nv = lay.total;

    struct LCon {
        LMat E0;
        std::vector<std::pair<int, LMat>> basis;
        int dim;
    };
    std::vector<LCon> cons;
    long double nu = 0.0L;  // total barrier parameter
    for (const auto& c : cons_d) {
        LCon lc;
        lc.E0 = c.E0.cast<long double>();
        for (const auto& [j, B] : c.basis) lc.basis.emplace_back(j, B.cast<long double>());
        lc.dim = c.dim;
        nu += c.dim;
        cons.push_back(std::move(lc));
    }

    // initial iterate: identity for PD matrices, 1 for positive scalars, 0 otherwise
    LVec v = LVec::Zero(nv);
    for (std::size_t vi = 0; vi < problem.variables().size(); ++vi) {
        const auto& var = problem.variables()[vi];
        if (!var.positive) continue;
        if (var.kind == VarKind::Scalar) {
            v(lay.offset[vi]) = 1.0L;
        } else if (var.kind == VarKind::Symmetric) {
            int k = lay.offset[vi];
            for (int j = 0; j < var.rows; ++j)
                for (int i = 0; i <= j; ++i) v(k++) = (i == j) ? 1.0L : 0.0L;
        }
    }

    auto con_value = [&](const LCon& c, const LVec& vv) -> LMat {
        LMat E = c.E0;
        for (const auto& [j, B] : c.basis) E += vv(j) * B;
        return E;
    };

    long double t = -std::numeric_limits<long double>::infinity();
    for (const auto& c : cons) {
        Eigen::SelfAdjointEigenSolver<LMat> es(con_value(c, v), Eigen::EigenvaluesOnly);
        t = std::max(t, es.eigenvalues().maxCoeff());
    }
    t += 1.0L;

    const int nw = nv + 1;  // [v; t]
    auto eval_barrier = [&](const LVec& vv, long double tt, std::vector<LMat>* inv,
                            long double* value) -> bool {
        long double F = 0.0L;
        if (inv) inv->clear();
        for (const auto& c : cons) {
            LMat S = tt * LMat::Identity(c.dim, c.dim) - con_value(c, vv);
            Eigen::LLT<LMat> llt(S);
            if (llt.info() != Eigen::Success) return false;
            long double logdet = 0.0L;
            for (int i = 0; i < c.dim; ++i) logdet += std::log(llt.matrixL()(i, i));
            F -= 2.0L * logdet;
            if (inv) inv->push_back(llt.solve(LMat::Identity(c.dim, c.dim)));
        }
        if (value) *value = F;
        return true;
    };

    int iterations = 0;
    int stall = 0;
    long double t_prev = t;
    bool converged_above_tol = false, hit_target = false, stuck = false;
    long double tau = options.tau0;

    while (true) {
        // centering at fixed tau
        bool centered = false;
        stuck = false;
        while (iterations < options.max_iter) {
            std::vector<LMat> T;
            long double Fbar = 0.0L;
            if (!eval_barrier(v, t, &T, &Fbar))
                throw ConditioningError("barrier iterate left the interior");
            const long double F = tau * t + Fbar;

            LVec g = LVec::Zero(nw);
            LMat H = LMat::Zero(nw, nw);
            g(nv) = tau;
            for (std::size_t k = 0; k < cons.size(); ++k) {
                const auto& c = cons[k];
                const LMat& Tk = T[k];
                g(nv) -= Tk.trace();
                H(nv, nv) += Tk.cwiseProduct(Tk).sum();
                std::vector<LMat> G;
                G.reserve(c.basis.size());
                for (const auto& [comp, B] : c.basis) {
                    G.push_back(Tk * B);
                    g(comp) += Tk.cwiseProduct(B).sum();
                }
                for (std::size_t a = 0; a < c.basis.size(); ++a) {
                    const int ja = c.basis[a].first;
                    const long double ht = -(Tk.cwiseProduct(G[a].transpose())).sum();
                    H(ja, nv) += ht;
                    H(nv, ja) += ht;
                    for (std::size_t b = a; b < c.basis.size(); ++b) {
                        const int jb = c.basis[b].first;
                        const long double hab = G[a].cwiseProduct(G[b].transpose()).sum();
                        H(ja, jb) += hab;
                        if (jb != ja) H(jb, ja) += hab;
                    }
                }
            }

            // Jacobi-equilibrated Newton solve; escalate the regularization
            // until a step passes the line search.
            LVec d_scale(nw);
            for (int i = 0; i < nw; ++i)
                d_scale(i) = 1.0L / std::sqrt(std::max(H(i, i), 1e-300L));
            const LMat Hs = d_scale.asDiagonal() * H * d_scale.asDiagonal();

            bool moved = false, is_centered = false;
            long double mu = 0.0L;
            for (int tries = 0; tries < 16 && !moved; ++tries) {
                Eigen::LDLT<LMat> ldlt(Hs + mu * LMat::Identity(nw, nw));
                if (ldlt.info() == Eigen::Success) {
                    const LVec gs = d_scale.asDiagonal() * g;
                    LVec step = d_scale.asDiagonal() * ldlt.solve(-gs);
                    const long double slope = g.dot(step);
                    if (step.allFinite() && slope < 0.0L) {
                        if (mu == 0.0L && -slope < 1e-12L * std::max(1.0L, std::abs(F))) {
                            is_centered = true;
                            break;
                        }
                        long double alpha = 1.0L;
                        while (alpha > 1e-16L) {
                            LVec v_new = v + alpha * step.head(nv);
                            long double t_new = t + alpha * step(nv);
                            long double F_new;
                            if (eval_barrier(v_new, t_new, nullptr, &F_new)) {
                                F_new += tau * t_new;
                                if (F_new <= F + 1e-4L * alpha * slope) {
                                    v = v_new;
                                    t = t_new;
                                    moved = true;
                                    break;
                                }
                            }
                            alpha *= 0.5L;
                        }
                    }
                }
                mu = (mu == 0.0L) ? 1e-14L : mu * 100.0L;
            }
            if (is_centered) {
                centered = true;
                break;
            }
            if (!moved) {
                stuck = true;  // numerically unable to progress at this tau
                break;
            }
            ++iterations;

            if (t > -options.tol && t_prev - t < 1e-14L * std::max(1.0L, std::abs(t)))
                ++stall;
            else
                stall = 0;
            t_prev = t;
            if (stall >= 50) break;
            if (t <= -options.target_margin) {
                hit_target = true;
                break;
            }
        }

        if (options.trace)
            std::printf("  [lmi] tau=%.3Le t=%+.6Le gap=%.3Le iters=%d centered=%d stuck=%d\n",
                        tau, t, nu / tau, iterations, int(centered), int(stuck));
        if (hit_target || stall >= 50 || stuck) break;
        if (t <= -options.target_margin) {
            hit_target = true;
            break;
        }
        // Once the duality gap of the capped problem is below the strictness
        // tolerance and the path is centered above -tol, the path has
        // converged without crossing it: report infeasible (the design
        // systems treat that as "repeat with more partitions").
        if (centered && nu / tau < 0.01L * options.tol) {
            converged_above_tol = (t > -options.tol);
            break;
        }
        if (iterations >= options.max_iter) break;
        tau *= options.tau_factor;
    }

    FeasibilitySolution sol;
    sol.iterations = iterations;
    sol.achieved_t = static_cast<double>(t);
    VectorXd vd = v.cast<double>();
    const auto values = detail::unflatten_all(problem, lay, vd);
    for (std::size_t vi = 0; vi < problem.variables().size(); ++vi)
        sol.assignment[problem.variables()[vi].name] = values[vi];

    // a-posteriori margin over the original constraints and positivity requirements
    double margin = std::numeric_limits<double>::infinity();
    for (const auto& con : problem.constraints()) {
        const MatrixXd E = evaluate(con.expr, values);
        margin = std::min(margin, con.sense == Sense::NegativeDefinite ? -max_eigenvalue(E)
                                                                       : min_eigenvalue(E));
    }
    for (std::size_t vi = 0; vi < problem.variables().size(); ++vi) {
        const auto& var = problem.variables()[vi];
        if (!var.positive) continue;
        margin = std::min(margin, var.kind == VarKind::Scalar ? values[vi](0, 0)
                                                              : min_eigenvalue(values[vi]));
    }
    sol.margin = margin;

    if (margin >= options.tol) {
        sol.status = SolveStatus::Feasible;
    } else if (converged_above_tol || stall >= 50) {
        sol.status = SolveStatus::Infeasible;
    } else {
        sol.status = SolveStatus::MaxIterations;
    }
    return sol;
}

// ---------------------------------------------------------------------------
// Residual checking
// ---------------------------------------------------------------------------

struct ConstraintResidual {
    std::string label;
    bool negative_sense = true;
    double eigenvalue = 0.0;  // lambda_max for < 0 constraints, lambda_min for > 0
    double symmetry_defect = 0.0;
    bool pass = false;
};

struct ResidualReport {
    std::vector<ConstraintResidual> rows;

    bool all_pass() const {
        for (const auto& r : rows)
            if (!r.pass) return false;
        return true;
    }

    /// Smallest eigenvalue distance from zero across all rows.
    double margin() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& r : rows)
            m = std::min(m, r.negative_sense ? -r.eigenvalue : r.eigenvalue);
        return m;
    }

    std::string table() const {
        std::ostringstream os;
        os << std::left << std::setw(34) << "constraint" << std::setw(8) << "sense"
           << std::setw(15) << "eigenvalue" << std::setw(12) << "asym" << "status\n";
        for (const auto& r : rows) {
            os << std::left << std::setw(34) << r.label << std::setw(8)
               << (r.negative_sense ? "< 0" : "> 0") << std::setw(15) << std::scientific
               << std::setprecision(4) << r.eigenvalue << std::setw(12) << r.symmetry_defect
               << (r.pass ? "pass" : "FAIL") << "\n";
        }
        return os.str();
    }
};

/// Evaluates every constraint at the assignment and reports the binding
/// eigenvalue, the raw symmetry defect, and strict pass/fail. Positivity
/// requirements on variables are reported as additional rows.
inline ResidualReport check_residuals(const FeasibilityProblem& problem,
                                      const std::map<std::string, MatrixXd>& assignment) {
    std::vector<MatrixXd> values;
    for (const auto& var : problem.variables()) {
        auto it = assignment.find(var.name);
        if (it == assignment.end())
            throw ShapeError("assignment is missing variable '" + var.name + "'");
        if (it->second.rows() != var.rows || it->second.cols() != var.cols)
            throw ShapeError("assignment for '" + var.name + "' has the wrong shape");
        values.push_back(it->second);
    }

    ResidualReport report;
    for (const auto& con : problem.constraints()) {
        ConstraintResidual row;
        row.label = con.expr.label;
        row.negative_sense = (con.sense == Sense::NegativeDefinite);
        const MatrixXd E = evaluate(con.expr, values, &row.symmetry_defect);
        if (row.negative_sense) {
            row.eigenvalue = max_eigenvalue(E);
            row.pass = row.eigenvalue < 0.0;
        } else {
            row.eigenvalue = min_eigenvalue(E);
            row.pass = row.eigenvalue > 0.0;
        }
        report.rows.push_back(std::move(row));
    }
    for (std::size_t vi = 0; vi < problem.variables().size(); ++vi) {
        const auto& var = problem.variables()[vi];
        if (!var.positive) continue;
        ConstraintResidual row;
        row.label = var.name + " > 0";
        row.negative_sense = false;
        row.eigenvalue = var.kind == VarKind::Scalar ? values[vi](0, 0)
                                                     : min_eigenvalue(values[vi]);
        row.pass = row.eigenvalue > 0.0;
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace pwactl
