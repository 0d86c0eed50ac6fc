#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <pwactl/bench.hpp>
#include <pwactl/palm.hpp>

using namespace pwactl;
using Catch::Approx;

namespace {

// analytic Jacobian of the pendulum dynamics, derived by hand from
//   x2dot = (g sin x1 - a m l x2^2 sin(2 x1)/2 - a cos(x1) u) / (4l/3 - a m l cos^2 x1)
struct PendulumJacobian {
    double g = 9.8, M = 2.0, mp = 1.0, lp = 0.5;
    double a() const { return 1.0 / (M + mp); }

    MatrixXd eval(double x1, double x2, double u) const {
        const double aml = a() * mp * lp;
        const double N = g * std::sin(x1) - 0.5 * aml * x2 * x2 * std::sin(2 * x1) -
                         a() * std::cos(x1) * u;
        const double den = 4.0 * lp / 3.0 - aml * std::cos(x1) * std::cos(x1);
        const double N1 = g * std::cos(x1) - aml * x2 * x2 * std::cos(2 * x1) +
                          a() * std::sin(x1) * u;
        const double den1 = aml * std::sin(2 * x1);
        MatrixXd J(2, 3);
        J << 0, 1, 0,
            (N1 * den - N * den1) / (den * den), -aml * x2 * std::sin(2 * x1) / den,
            -a() * std::cos(x1) / den;
        return J;
    }
};

NonlinearSystem scalar_linear_system() {
    NonlinearSystem sys;
    sys.n = 1;
    sys.m = 0;
    sys.dynamics = [](const VectorXd& x, const VectorXd&) { return VectorXd(-x); };
    sys.domain.lo = VectorXd::Constant(1, -2.0);
    sys.domain.hi = VectorXd::Constant(1, 2.0);
    return sys;
}

PartitionSpec slabs_1d(std::initializer_list<std::pair<double, double>> intervals) {
    PartitionSpec spec;
    spec.theta = VectorXd::Ones(1);
    for (auto [lo, hi] : intervals) {
        SlabSpec s;
        s.lo = lo;
        s.hi = hi;
        spec.slabs.push_back(s);
    }
    return spec;
}

}  // namespace

TEST_CASE("slab_to_ellipsoid matches the degenerate-ellipsoid formulas") {
    VectorXd e1 = VectorXd::Zero(3);
    e1(0) = 1.0;

    auto [Q1, f1] = slab_to_ellipsoid(e1, -1.0, 1.0);
    CHECK(Q1(0) == 1.0);
    CHECK(Q1.tail(2).norm() == 0.0);
    CHECK(f1 == 0.0);

    auto [Q2, f2] = slab_to_ellipsoid(e1, 0.0, 2.0);
    CHECK(Q2(0) == 1.0);
    CHECK(f2 == -1.0);

    auto [Q3, f3] = slab_to_ellipsoid(VectorXd(2.0 * e1), -4.0, 4.0);
    CHECK(Q3(0) == 0.5);
    CHECK(f3 == 0.0);

    CHECK_THROWS_AS(slab_to_ellipsoid(e1, 1.0, 1.0), InvalidSlab);
    CHECK_THROWS_AS(slab_to_ellipsoid(e1, 2.0, -1.0), InvalidSlab);
    CHECK_THROWS_AS(slab_to_ellipsoid(VectorXd::Zero(3), -1.0, 1.0), InvalidSlab);
}

TEST_CASE("slab membership is exactly the ellipsoid membership") {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unif(-3.0, 3.0);

    VectorXd theta(4);
    for (int k = 0; k < 4; ++k) theta(k) = gauss(rng);
    theta(0) += 2.0;  // keep it well away from zero
    const double beta1 = -1.3, beta2 = 2.1;
    auto [Q, f] = slab_to_ellipsoid(theta, beta1, beta2);

    int checked = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        VectorXd x(4);
        for (int k = 0; k < 4; ++k) x(k) = unif(rng);
        const double v = theta.dot(x);
        const double e = std::abs(Q.dot(x) + f);
        // skip points within 1e-12 of the boundary; equality holds there only
        // up to rounding
        if (std::abs(v - beta1) < 1e-12 || std::abs(v - beta2) < 1e-12) continue;
        ++checked;
        CHECK((beta1 <= v && v <= beta2) == (e <= 1.0));
    }
    CHECK(checked > 9000);

    // boundary points map to the unit sphere of the encoding
    VectorXd xb = theta * (beta2 / theta.squaredNorm());
    CHECK(std::abs(Q.dot(xb) + f) == Approx(1.0).margin(1e-12));
}

TEST_CASE("linearize reproduces the pendulum operating-point values") {
    auto fx = fixture_pendulum();
    auto sub0 = linearize(fx.system, VectorXd::Zero(3));
    CHECK(sub0.A(1, 0) == Approx(19.6).margin(1e-4));
    CHECK(sub0.C.norm() == 0.0);  // forced to exactly zero at the origin

    PendulumJacobian jac;
    for (VectorXd p : {VectorXd(Eigen::Vector3d(M_PI / 3, 0, 0)),
                       VectorXd(Eigen::Vector3d(M_PI / 3, 0.7, 2.0)),
                       VectorXd(Eigen::Vector3d(-0.9, -1.2, 40.0))}) {
        auto sub = linearize(fx.system, p);
        MatrixXd J(2, 3);
        J << sub.A, sub.B;
        CHECK((J - jac.eval(p(0), p(1), p(2))).cwiseAbs().maxCoeff() < 1e-6);
        // affine offset reproduces the flow at the operating point
        VectorXd f = fx.system.eval(p);
        CHECK((sub.A * p.head(2) + sub.B * p.tail(1) + sub.C - f).norm() < 1e-12);
    }
}

TEST_CASE("linearize of a linear system is the system itself") {
    auto sys = scalar_linear_system();
    auto sub = linearize(sys, VectorXd::Constant(1, 0.7));
    CHECK(sub.A(0, 0) == Approx(-1.0).margin(1e-9));
    CHECK(sub.B.cols() == 0);
    CHECK(std::abs(sub.C(0)) < 1e-9);
}

TEST_CASE("central differences match the analytic Jacobian of quadratics") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> gauss;
    // dynamics f_i(z) = z' Q_i z + L_i z with z = [x; u]
    const int n = 2, m = 1, d = n + m;
    std::vector<MatrixXd> Qs;
    MatrixXd L(n, d);
    for (int i = 0; i < n; ++i) {
        MatrixXd Q(d, d);
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) Q(r, c) = 0.3 * gauss(rng);
        Qs.push_back(MatrixXd(0.5 * (Q + Q.transpose())));
        for (int c = 0; c < d; ++c) L(i, c) = gauss(rng);
    }
    NonlinearSystem sys;
    sys.n = n;
    sys.m = m;
    sys.domain.lo = VectorXd::Constant(d, -5.0);
    sys.domain.hi = VectorXd::Constant(d, 5.0);
    sys.dynamics = [&](const VectorXd& x, const VectorXd& u) {
        VectorXd z(d);
        z << x, u;
        VectorXd f(n);
        for (int i = 0; i < n; ++i) f(i) = z.dot(Qs[i] * z) + L.row(i).dot(z);
        return f;
    };
    for (int trial = 0; trial < 20; ++trial) {
        VectorXd p(d);
        for (int k = 0; k < d; ++k) p(k) = gauss(rng);
        p = p.cwiseMax(sys.domain.lo).cwiseMin(sys.domain.hi);
        auto sub = linearize(sys, p);
        MatrixXd J_true(n, d);
        for (int i = 0; i < n; ++i)
            J_true.row(i) = (2.0 * Qs[i] * p + L.row(i).transpose()).transpose();
        MatrixXd J(n, d);
        J << sub.A, sub.B;
        CHECK((J - J_true).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("linearize rejects bad points and bad dynamics") {
    auto fx = fixture_pendulum();
    CHECK_THROWS_AS(linearize(fx.system, Eigen::Vector3d(3.0, 0, 0)), DomainError);

    NonlinearSystem bad = fx.system;
    bad.dynamics = [](const VectorXd& x, const VectorXd&) {
        return VectorXd(VectorXd::Constant(2, x(0) == 0.0 ? 0.0 : std::nan("")));
    };
    CHECK_THROWS_AS(linearize(bad, Eigen::Vector3d(0.5, 0, 0)), EvaluationError);
}

TEST_CASE("region dispatch: lowest index wins, region 0 has priority") {
    auto sys = scalar_linear_system();
    auto model =
        build_model(sys, slabs_1d({{-2.0, -0.5}, {-0.5, 0.5}, {0.5, 1.0}, {1.0, 2.0}}));
    // reordered: region 0 = [-0.5, 0.5], then the rest in listed order
    CHECK(model.regions[0].beta1 == -0.5);
    CHECK(model.region_count() == 4);

    CHECK(region_index(model, VectorXd::Zero(1)) == 0);
    CHECK(region_index(model, VectorXd::Constant(1, 0.75)) == 2);
    // shared boundary with region 0: region 0 takes priority
    CHECK(region_index(model, VectorXd::Constant(1, 0.5)) == 0);
    CHECK(region_index(model, VectorXd::Constant(1, -0.5)) == 0);
    // shared boundary between regions 2 and 3: lowest index
    CHECK(region_index(model, VectorXd::Constant(1, 1.0)) == 2);

    // out-of-domain queries are clamped and flagged
    auto lk = locate_region(model, VectorXd::Constant(1, 5.0));
    CHECK(lk.out_of_domain);
    CHECK(lk.index == 3);

    // a model with a coverage gap reports it
    PwaModel gap = model;
    gap.regions.erase(gap.regions.begin());
    gap.submodels.erase(gap.submodels.begin());
    CHECK_THROWS_AS(region_index(gap, VectorXd::Zero(1)), CoverageError);
}

TEST_CASE("build_model forces C_0 = 0 and origin membership") {
    auto fx = fixture_pendulum();
    auto model = build_model(fx.system, fx.partition);
    CHECK(model.submodels[0].C.norm() == 0.0);
    CHECK(region_index(model, VectorXd::Zero(3)) == 0);
    CHECK(model.l() == 4);
}

TEST_CASE("error bounds of a linear system vanish") {
    NonlinearSystem sys;
    sys.n = 1;
    sys.m = 1;
    sys.domain.lo = VectorXd::Constant(2, -2.0);
    sys.domain.hi = VectorXd::Constant(2, 2.0);
    sys.dynamics = [](const VectorXd& x, const VectorXd& u) {
        return VectorXd(VectorXd::Constant(1, -x(0) + 0.5 * u(0)));
    };
    PartitionSpec spec;
    spec.theta = VectorXd::Zero(2);
    spec.theta(0) = 1.0;
    SlabSpec s;
    s.lo = -2.0;
    s.hi = 2.0;
    spec.slabs = {s};
    auto model = build_model(sys, spec);
    auto bounds = estimate_error_bounds(sys, model, 200);
    CHECK(bounds.eps_f0 <= 1e-9);
    CHECK(bounds.eps_f <= 1e-9);
    CHECK(bounds.eps_g <= 1e-9);

    model.bounds = bounds;
    auto report = validate_model(model, sys, 1e-9);
    CHECK(report.pass());
}

TEST_CASE("cubic scalar system matches the dense-grid slope oracle") {
    NonlinearSystem sys;
    sys.n = 1;
    sys.m = 0;
    sys.domain.lo = VectorXd::Constant(1, -1.0);
    sys.domain.hi = VectorXd::Constant(1, 1.0);
    sys.dynamics = [](const VectorXd& x, const VectorXd&) {
        return VectorXd(VectorXd::Constant(1, x(0) * x(0) * x(0)));
    };
    auto model = build_model(sys, slabs_1d({{-1.0, 1.0}}));
    auto bounds = estimate_error_bounds(sys, model, 2000);

    // dense-grid oracle: residual r(x) = x^3 - A x with A from the origin fit
    const double A = model.submodels[0].A(0, 0);
    double oracle = 0.0;
    for (int k = -1000; k <= 1000; ++k) {
        const double x = k / 1000.0;
        if (std::abs(x) < 1e-9) continue;
        oracle = std::max(oracle, std::abs(x * x * x - A * x) / std::abs(x));
    }
    CHECK(bounds.eps_f0 == Approx(1.1 * oracle).epsilon(0.1));
}

TEST_CASE("error bounds shrink when the pendulum partition is refined") {
    auto fx = fixture_pendulum();
    auto model5 = build_model(fx.system, fx.partition);
    auto b5 = estimate_error_bounds(fx.system, model5, 400);

    PartitionSpec refined = fx.partition;
    for (int k = 0; k < 4; ++k) refined = refine_partition(refined);
    auto model9 = build_model(fx.system, refined);
    CHECK(model9.l() == 8);
    auto b9 = estimate_error_bounds(fx.system, model9, 400);

    CHECK(std::isfinite(b5.eps_f));
    CHECK(b9.eps_f < b5.eps_f);
}

TEST_CASE("estimated bounds validate on a fresh sample set") {
    auto fx = fixture_pendulum();
    auto model = build_model(fx.system, fx.partition);
    model.bounds = estimate_error_bounds(fx.system, model, 400, /*seed=*/0);
    auto report = validate_model(model, fx.system, 1e-9, 400, /*seed=*/12345);
    INFO(report.summary());
    CHECK(report.pass());

    // zeroed bounds cannot absorb the nonlinear residual
    PwaModel zeroed = model;
    zeroed.bounds = ErrorBounds{};
    auto bad = validate_model(zeroed, fx.system, 1e-9, 400, 12345);
    CHECK_FALSE(bad.pass());
    int violations = 0;
    for (const auto& r : bad.per_region) violations += r.violations;
    CHECK(violations > 0);
}

TEST_CASE("estimate_error_bounds rejects tiny sample counts and empty regions") {
    auto fx = fixture_pendulum();
    auto model = build_model(fx.system, fx.partition);
    CHECK_THROWS_AS(estimate_error_bounds(fx.system, model, 10), std::invalid_argument);

    // a slab entirely outside the domain box has no sampled volume
    PwaModel degenerate = model;
    degenerate.regions[1].beta1 = 10.0;
    degenerate.regions[1].beta2 = 11.0;
    CHECK_THROWS_AS(estimate_error_bounds(fx.system, degenerate, 200), DegenerateRegion);
}

TEST_CASE("system assumption checks") {
    auto fx = fixture_pendulum();
    CHECK_NOTHROW(fx.system.check_assumptions());

    NonlinearSystem off = fx.system;
    off.dynamics = [](const VectorXd& x, const VectorXd&) {
        return VectorXd(VectorXd::Constant(2, 1.0 + x(0)));
    };
    CHECK_THROWS_AS(off.check_assumptions(), DomainError);

    NonlinearSystem shifted = fx.system;
    shifted.domain.lo(0) = 0.5;
    CHECK_THROWS_AS(shifted.check_assumptions(), DomainError);
}
