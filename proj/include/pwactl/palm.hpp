#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace pwactl {

/// Axis-aligned box over the augmented state [x; u].
struct Box {
    VectorXd lo, hi;

    int dim() const { return static_cast<int>(lo.size()); }

    bool contains(const VectorXd& p, double tol = 0.0) const {
        for (int k = 0; k < dim(); ++k)
            if (p(k) < lo(k) - tol || p(k) > hi(k) + tol) return false;
        return true;
    }

    VectorXd clamp(const VectorXd& p) const {
        return p.cwiseMax(lo).cwiseMin(hi);
    }

    /// Euclidean length of the box diagonal.
    double diameter() const { return (hi - lo).norm(); }
};

/// A continuous-time plant xdot = f(x, u) on a compact box X x U that
/// contains the origin and has f(0, 0) = 0.
struct NonlinearSystem {
    int n = 0;  // state dimension
    int m = 0;  // input dimension
    std::function<VectorXd(const VectorXd& x, const VectorXd& u)> dynamics;
    Box domain;  // over [x; u], dimension n + m

    VectorXd eval(const VectorXd& xbar) const {
        return dynamics(xbar.head(n), xbar.tail(m));
    }

    /// Checks the standing assumptions: the box contains the origin and the
    /// origin is an equilibrium (|f(0,0)| <= 1e-9).
    void check_assumptions() const {
        if (domain.dim() != n + m)
            throw ShapeError("domain box dimension does not match n + m");
        if (!domain.contains(VectorXd::Zero(n + m)))
            throw DomainError("domain box does not contain the origin");
        VectorXd f0 = dynamics(VectorXd::Zero(n), VectorXd::Zero(m));
        if (!f0.allFinite())
            throw EvaluationError("dynamics non-finite at the origin");
        if (f0.norm() > 1e-9)
            throw DomainError("origin is not an equilibrium of the dynamics");
    }
};

/// Slab {xbar : beta1 <= theta' xbar <= beta2} together with its exact
/// degenerate-ellipsoid encoding ||Q xbar + f|| <= 1.
struct Region {
    int index = 0;
    VectorXd theta;
    double beta1 = 0.0, beta2 = 0.0;
    RowVectorXd Q;
    double f = 0.0;

    bool contains(const VectorXd& xbar) const {
        double v = theta.dot(xbar);
        return v >= beta1 && v <= beta2;
    }

    double width() const { return (beta2 - beta1) / theta.norm(); }
};

/// Q = 2 theta' / (beta2 - beta1), f = -(beta2 + beta1) / (beta2 - beta1).
/// The encoding is exact: ||Q xbar + f|| <= 1 iff beta1 <= theta' xbar <= beta2.
inline std::pair<RowVectorXd, double> slab_to_ellipsoid(const VectorXd& theta, double beta1,
                                                        double beta2) {
    if (!(beta1 < beta2)) throw InvalidSlab("slab requires beta1 < beta2");
    if (theta.norm() == 0.0) throw InvalidSlab("slab normal must be nonzero");
    RowVectorXd Q = 2.0 * theta.transpose() / (beta2 - beta1);
    double f = -(beta2 + beta1) / (beta2 - beta1) + 0.0;  // +0.0 folds -0 into +0
    return {Q, f};
}

/// Local affine dynamics xdot = A x + B u + C valid on one region.
struct AffineSubmodel {
    MatrixXd A;  // n x n
    MatrixXd B;  // n x m
    VectorXd C;  // n
    VectorXd operating_point;  // [x*; u*] in R^{n+m}

    MatrixXd Abar() const {  // [A, B], n x (n+m)
        MatrixXd ab(A.rows(), A.cols() + B.cols());
        ab << A, B;
        return ab;
    }
};

/// Norm bounds on the modeling residual: ||[dA_0, dB_0]|| <= eps_f0 in the
/// origin region, ||[dA_j, dB_j]|| <= eps_f and ||dC_j|| <= eps_g elsewhere.
struct ErrorBounds {
    double eps_f0 = 0.0;
    double eps_f = 0.0;
    double eps_g = 0.0;

    bool valid() const {
        return std::isfinite(eps_f0) && std::isfinite(eps_f) && std::isfinite(eps_g) &&
               eps_f0 >= 0.0 && eps_f >= 0.0 && eps_g >= 0.0;
    }
};

/// Piecewise-affine model: region 0 contains the origin, regions 1..l do not
/// contain it in their interior, and the slabs cover the domain box.
struct PwaModel {
    int n = 0, m = 0;
    Box domain;
    std::vector<Region> regions;
    std::vector<AffineSubmodel> submodels;
    ErrorBounds bounds;

    int region_count() const { return static_cast<int>(regions.size()); }
    int l() const { return region_count() - 1; }

    double eps_for(int region) const { return region == 0 ? bounds.eps_f0 : bounds.eps_f; }
};

/// One slab of a partition along a common normal direction.
struct SlabSpec {
    double lo = 0.0, hi = 0.0;       // breakpoints along theta
    VectorXd operating_point;        // [x*; u*], defaults to the slab center on the theta axis
};

struct PartitionSpec {
    VectorXd theta;
    std::vector<SlabSpec> slabs;
};

/// Result of locating a point in the model partition. When the query lies
/// outside the domain box it is clamped for dispatch and flagged.
struct RegionLookup {
    int index = 0;
    bool out_of_domain = false;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Central-difference linearization of f at a point of X x U. The affine
/// offset is C = f(x*,u*) - A x* - B u*; at the exact origin C is forced to
/// zero so the origin submodel satisfies C_0 = 0.
inline AffineSubmodel linearize(const NonlinearSystem& system, const VectorXd& point) {
    const int n = system.n, m = system.m;
    if (point.size() != n + m) throw ShapeError("linearization point has wrong dimension");
    if (!system.domain.contains(point, 1e-12))
        throw DomainError("linearization point outside the domain box");

    VectorXd f0 = system.eval(point);
    if (!f0.allFinite()) throw EvaluationError("dynamics non-finite at linearization point");

    MatrixXd J(n, n + m);
    for (int j = 0; j < n + m; ++j) {
        const double h = std::max(1e-6, 1e-6 * std::abs(point(j)));
        VectorXd pp = point, pm = point;
        pp(j) += h;
        pm(j) -= h;
        VectorXd fp = system.eval(pp), fm = system.eval(pm);
        if (!fp.allFinite() || !fm.allFinite())
            throw EvaluationError("dynamics non-finite in finite-difference stencil");
        J.col(j) = (fp - fm) / (2.0 * h);
    }

    AffineSubmodel sub;
    sub.A = J.leftCols(n);
    sub.B = J.rightCols(m);
    sub.operating_point = point;
    if (point.isZero(0.0)) {
        sub.C = VectorXd::Zero(n);
    } else {
        sub.C = f0 - sub.A * point.head(n) - sub.B * point.tail(m);
    }
    return sub;
}

/// Region dispatch: lowest containing index wins, with region 0 taking
/// absolute priority on shared boundaries. Out-of-domain queries are clamped
/// onto the box for dispatch and flagged.
inline RegionLookup locate_region(const PwaModel& model, const VectorXd& xbar) {
    RegionLookup out;
    VectorXd q = xbar;
    if (!model.domain.contains(xbar)) {
        out.out_of_domain = true;
        q = model.domain.clamp(xbar);
    }
    for (int i = 0; i < model.region_count(); ++i) {
        if (model.regions[i].contains(q)) {
            out.index = i;
            return out;
        }
    }
    throw CoverageError("no region contains the query point (slabs do not cover the box)");
}

inline int region_index(const PwaModel& model, const VectorXd& xbar) {
    return locate_region(model, xbar).index;
}

namespace detail {

/// Samples a point of (slab ∩ box). Coordinates are drawn from a Halton
/// sequence; if theta is axis-aligned the slab axis is sampled directly,
/// otherwise rejection sampling against the slab is used.
class SlabSampler {
public:
    SlabSampler(const Box& box, const Region& region, std::uint64_t seed)
        : box_(box), region_(region), index_(1000 + seed * 7919) {
        // detect an axis-aligned normal (exactly one nonzero component)
        axis_ = -1;
        int nonzero = 0;
        for (int k = 0; k < region.theta.size(); ++k) {
            if (region.theta(k) != 0.0) {
                ++nonzero;
                axis_ = k;
            }
        }
        if (nonzero != 1) axis_ = -1;
    }

    /// Returns false when the slab has no volume inside the box.
    bool next(VectorXd& out, int max_attempts = 100000) {
        const int d = box_.dim();
        for (int attempt = 0; attempt < max_attempts; ++attempt) {
            VectorXd u = halton_point(index_++, d);
            VectorXd p = box_.lo.array() + u.array() * (box_.hi - box_.lo).array();
            if (axis_ >= 0) {
                const double th = region_.theta(axis_);
                double lo = region_.beta1 / th, hi = region_.beta2 / th;
                if (lo > hi) std::swap(lo, hi);
                lo = std::max(lo, box_.lo(axis_));
                hi = std::min(hi, box_.hi(axis_));
                if (lo > hi) return false;
                p(axis_) = lo + u(axis_) * (hi - lo);
                out = p;
                return true;
            }
            if (region_.contains(p)) {
                out = p;
                return true;
            }
        }
        return false;
    }

private:
    const Box& box_;
    const Region& region_;
    std::uint64_t index_;
    int axis_;
};

}  // namespace detail

namespace detail {

/// Deterministic probe points along the premise direction of the slab (zero
/// in the other coordinates). The model error is worst along this ridge, and
/// quasi-random box samples rarely land on it.
inline std::vector<VectorXd> axis_probes(const Box& box, const Region& region, int count) {
    std::vector<VectorXd> out;
    const double nsq = region.theta.squaredNorm();
    for (int k = 0; k <= count; ++k) {
        const double t = region.beta1 + (region.beta2 - region.beta1) * k / count;
        VectorXd p = region.theta * (t / nsq);
        if (box.contains(p, 1e-12)) out.push_back(box.clamp(p));
    }
    return out;
}

}  // namespace detail

/// Samples each region and returns bounds consistent with the decomposition
/// r(xbar) = [dA, dB] xbar + dC:
///   eps_g  = max_j>=1 ||r(op_j)||,
///   eps_f  = max slope ||r(xbar) - r(op)|| / ||xbar - op||   (regions >= 1),
///   eps_f0 = same slope over region 0,
/// each inflated by a 1.1 safety factor. The sample set per region is
/// quasi-random over (slab ∩ box) plus a sweep along the premise axis.
inline ErrorBounds estimate_error_bounds(const NonlinearSystem& system, const PwaModel& model,
                                         int samples_per_region, std::uint64_t seed = 0) {
    if (samples_per_region < 100)
        throw std::invalid_argument("samples_per_region must be >= 100");

    double eps_g = 0.0, eps_f = 0.0, eps_f0 = 0.0;
    for (int i = 0; i < model.region_count(); ++i) {
        const Region& region = model.regions[i];
        const AffineSubmodel& sub = model.submodels[i];
        const VectorXd& op = sub.operating_point;
        const VectorXd r_op =
            system.eval(op) - sub.A * op.head(model.n) - sub.B * op.tail(model.m) - sub.C;
        if (i > 0) eps_g = std::max(eps_g, r_op.norm());

        double max_slope = 0.0;
        auto absorb = [&](const VectorXd& p) {
            VectorXd r = system.eval(p) - sub.A * p.head(model.n) - sub.B * p.tail(model.m) -
                         sub.C;
            if (!r.allFinite()) throw EvaluationError("dynamics non-finite while sampling");
            const double dist = (p - op).norm();
            if (dist > 1e-12) max_slope = std::max(max_slope, (r - r_op).norm() / dist);
        };

        detail::SlabSampler sampler(model.domain, region, seed + static_cast<std::uint64_t>(i));
        int accepted = 0;
        for (int s = 0; s < samples_per_region; ++s) {
            VectorXd p;
            if (!sampler.next(p)) break;
            ++accepted;
            absorb(p);
        }
        if (accepted == 0)
            throw DegenerateRegion("region " + std::to_string(i) +
                                   " has no sampled volume inside the domain box");
        for (const VectorXd& p : detail::axis_probes(model.domain, region, 128)) absorb(p);

        if (i == 0)
            eps_f0 = std::max(eps_f0, max_slope);
        else
            eps_f = std::max(eps_f, max_slope);
    }

    ErrorBounds out;
    out.eps_f0 = 1.1 * eps_f0;
    out.eps_f = 1.1 * eps_f;
    out.eps_g = 1.1 * eps_g;
    return out;
}

struct RegionValidation {
    int region = 0;
    int samples = 0;
    double max_residual = 0.0;
    int violations = 0;  // samples with ||r|| > eps ||xbar|| + eps_g + tol
};

struct ValidationReport {
    std::vector<RegionValidation> per_region;
    int coverage_holes = 0;
    VectorXd first_hole;  // empty when no holes

    bool pass() const {
        if (coverage_holes > 0) return false;
        for (const auto& r : per_region)
            if (r.violations > 0) return false;
        return true;
    }

    std::string summary() const {
        std::ostringstream os;
        for (const auto& r : per_region)
            os << "region " << r.region << ": samples=" << r.samples
               << " max_residual=" << r.max_residual << " violations=" << r.violations << "\n";
        os << "coverage holes: " << coverage_holes << "\n";
        return os.str();
    }
};

/// Re-samples every region with a fresh quasi-random set and checks the bound
/// ||r(xbar)|| <= eps_i ||xbar|| + eps_g (eps_g only outside region 0), with
/// `tolerance` of absolute slack. Also probes the box for coverage holes.
inline ValidationReport validate_model(const PwaModel& model, const NonlinearSystem& system,
                                       double tolerance, int samples_per_region = 500,
                                       std::uint64_t seed = 1) {
    ValidationReport report;
    for (int i = 0; i < model.region_count(); ++i) {
        const Region& region = model.regions[i];
        const AffineSubmodel& sub = model.submodels[i];
        RegionValidation rv;
        rv.region = i;
        detail::SlabSampler sampler(model.domain, region,
                                    seed + 104729 * static_cast<std::uint64_t>(i + 1));
        const double eps = model.eps_for(i);
        const double offset = (i == 0) ? 0.0 : model.bounds.eps_g;
        auto check = [&](const VectorXd& p) {
            ++rv.samples;
            double r = (system.eval(p) - sub.A * p.head(model.n) - sub.B * p.tail(model.m) -
                        sub.C)
                           .norm();
            rv.max_residual = std::max(rv.max_residual, r);
            if (r > eps * p.norm() + offset + tolerance) ++rv.violations;
        };
        for (int s = 0; s < samples_per_region; ++s) {
            VectorXd p;
            if (!sampler.next(p)) break;
            check(p);
        }
        for (const VectorXd& p : detail::axis_probes(model.domain, region, 97)) check(p);
        report.per_region.push_back(rv);
    }

    // coverage probe over the whole box
    const int probes = 2000;
    for (int s = 0; s < probes; ++s) {
        VectorXd u = halton_point(500000 + seed + static_cast<std::uint64_t>(s),
                                  model.domain.dim());
        VectorXd p = model.domain.lo.array() + u.array() * (model.domain.hi - model.domain.lo).array();
        bool covered = false;
        for (const auto& region : model.regions)
            if (region.contains(p)) {
                covered = true;
                break;
            }
        if (!covered) {
            if (report.coverage_holes == 0) report.first_hole = p;
            ++report.coverage_holes;
        }
    }
    return report;
}

/// Builds the PWA model for a slab partition: one linearization per slab,
/// origin slab first. Does not estimate error bounds; see
/// estimate_error_bounds.
inline PwaModel build_model(const NonlinearSystem& system, const PartitionSpec& spec) {
    system.check_assumptions();
    const int n = system.n, m = system.m;
    if (spec.theta.size() != n + m) throw ShapeError("partition normal has wrong dimension");
    if (spec.slabs.empty()) throw InvalidSlab("partition needs at least one slab");

    // locate the slab containing theta' 0 = 0; it becomes region 0
    int origin_slab = -1;
    for (std::size_t k = 0; k < spec.slabs.size(); ++k) {
        if (spec.slabs[k].lo <= 0.0 && 0.0 <= spec.slabs[k].hi) {
            origin_slab = static_cast<int>(k);
            break;
        }
    }
    if (origin_slab < 0) throw DomainError("no slab of the partition contains the origin");

    std::vector<int> order;
    order.push_back(origin_slab);
    for (std::size_t k = 0; k < spec.slabs.size(); ++k)
        if (static_cast<int>(k) != origin_slab) order.push_back(static_cast<int>(k));

    PwaModel model;
    model.n = n;
    model.m = m;
    model.domain = system.domain;
    for (std::size_t idx = 0; idx < order.size(); ++idx) {
        const SlabSpec& slab = spec.slabs[order[idx]];
        Region region;
        region.index = static_cast<int>(idx);
        region.theta = spec.theta;
        region.beta1 = slab.lo;
        region.beta2 = slab.hi;
        auto [Q, f] = slab_to_ellipsoid(spec.theta, slab.lo, slab.hi);
        region.Q = Q;
        region.f = f;
        model.regions.push_back(region);

        VectorXd op = slab.operating_point;
        if (op.size() == 0) {
            // default: slab midpoint along theta, zero elsewhere
            const double c = 0.5 * (slab.lo + slab.hi);
            op = spec.theta * (c / spec.theta.squaredNorm());
        }
        if (idx == 0 && !(slab.lo <= spec.theta.dot(op) && spec.theta.dot(op) <= slab.hi))
            throw DomainError("operating point outside its slab");
        model.submodels.push_back(linearize(system, op));
    }
    if (!model.regions[0].contains(VectorXd::Zero(n + m)))
        throw DomainError("region 0 does not contain the origin");
    return model;
}

/// Bisects the widest slab of the partition (used when synthesis asks for a
/// finer model). If the split point would put the origin on a new boundary it
/// is shifted to keep the origin interior to a single slab.
inline PartitionSpec refine_partition(const PartitionSpec& spec) {
    PartitionSpec out;
    out.theta = spec.theta;
    int widest = 0;
    double w = -1.0;
    for (std::size_t k = 0; k < spec.slabs.size(); ++k) {
        const double wk = spec.slabs[k].hi - spec.slabs[k].lo;
        if (wk > w) {
            w = wk;
            widest = static_cast<int>(k);
        }
    }
    for (std::size_t k = 0; k < spec.slabs.size(); ++k) {
        if (static_cast<int>(k) != widest) {
            out.slabs.push_back(spec.slabs[k]);
            continue;
        }
        const SlabSpec& slab = spec.slabs[k];
        double c = 0.5 * (slab.lo + slab.hi);
        if (std::abs(c) < 1e-12 * std::max(1.0, slab.hi - slab.lo)) c = 0.5 * (slab.lo + c);
        SlabSpec a, b;
        a.lo = slab.lo;
        a.hi = c;
        b.lo = c;
        b.hi = slab.hi;
        out.slabs.push_back(a);
        out.slabs.push_back(b);
    }
    return out;
}

}  // namespace pwactl
