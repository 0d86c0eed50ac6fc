#pragma once

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bench.hpp"
#include "lmi.hpp"
#include "palm.hpp"
#include "sim.hpp"
#include "synthesis.hpp"

namespace pwactl {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Matrices <-> JSON (row-major nested arrays of decimals)
// ---------------------------------------------------------------------------

inline json to_json(const MatrixXd& M) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json to_json(const VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline MatrixXd matrix_from_json(const json& j) {
    if (!j.is_array()) throw ParseError("expected a nested array for a matrix");
    if (j.empty()) return MatrixXd();
    const std::size_t rows = j.size(), cols = j.at(0).size();
    MatrixXd M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        if (j.at(r).size() != cols) throw ParseError("ragged matrix rows");
        for (std::size_t c = 0; c < cols; ++c)
            M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                j.at(r).at(c).get<double>();
    }
    return M;
}

inline VectorXd vector_from_json(const json& j) {
    if (!j.is_array()) throw ParseError("expected an array for a vector");
    VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
    return v;
}

// ---------------------------------------------------------------------------
// PwaModel
// ---------------------------------------------------------------------------

inline json to_json(const ErrorBounds& b) {
    return json{{"eps_f0", b.eps_f0}, {"eps_f", b.eps_f}, {"eps_g", b.eps_g}};
}

inline ErrorBounds bounds_from_json(const json& j) {
    ErrorBounds b;
    b.eps_f0 = j.at("eps_f0").get<double>();
    b.eps_f = j.at("eps_f").get<double>();
    b.eps_g = j.at("eps_g").get<double>();
    return b;
}

inline json to_json(const PwaModel& model) {
    json j;
    j["n"] = model.n;
    j["m"] = model.m;
    j["domain"] = {{"lo", to_json(model.domain.lo)}, {"hi", to_json(model.domain.hi)}};
    json regions = json::array();
    for (const auto& r : model.regions) {
        regions.push_back(json{{"theta", to_json(r.theta)},
                               {"beta1", r.beta1},
                               {"beta2", r.beta2},
                               {"Q", to_json(VectorXd(r.Q.transpose()))},
                               {"f", r.f}});
    }
    j["regions"] = std::move(regions);
    json subs = json::array();
    for (const auto& s : model.submodels) {
        subs.push_back(json{{"A", to_json(s.A)},
                            {"B", to_json(s.B)},
                            {"C", to_json(s.C)},
                            {"op_point", to_json(s.operating_point)}});
    }
    j["submodels"] = std::move(subs);
    j["bounds"] = to_json(model.bounds);
    return j;
}

inline PwaModel model_from_json(const json& j) {
    PwaModel model;
    try {
        model.n = j.at("n").get<int>();
        model.m = j.at("m").get<int>();
        model.domain.lo = vector_from_json(j.at("domain").at("lo"));
        model.domain.hi = vector_from_json(j.at("domain").at("hi"));
        int index = 0;
        for (const auto& rj : j.at("regions")) {
            Region r;
            r.index = index++;
            r.theta = vector_from_json(rj.at("theta"));
            r.beta1 = rj.at("beta1").get<double>();
            r.beta2 = rj.at("beta2").get<double>();
            r.Q = vector_from_json(rj.at("Q")).transpose();
            r.f = rj.at("f").get<double>();
            model.regions.push_back(std::move(r));
        }
        for (const auto& sj : j.at("submodels")) {
            AffineSubmodel s;
            s.A = matrix_from_json(sj.at("A"));
            s.B = matrix_from_json(sj.at("B"));
            if (s.B.size() == 0) s.B = MatrixXd::Zero(model.n, model.m);
            s.C = vector_from_json(sj.at("C"));
            s.operating_point = vector_from_json(sj.at("op_point"));
            model.submodels.push_back(std::move(s));
        }
        model.bounds = bounds_from_json(j.at("bounds"));
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed model document: ") + e.what());
    }
    if (model.regions.size() != model.submodels.size())
        throw ParseError("model document: regions and submodels differ in count");
    return model;
}

// ---------------------------------------------------------------------------
// ControllerDesign
// ---------------------------------------------------------------------------

inline json to_json(const ControllerDesign& d) {
    json j;
    j["n"] = d.n;
    j["m"] = d.m;
    json K = json::array();
    for (const auto& k : d.nominal.K) K.push_back(to_json(k));
    j["K"] = std::move(K);
    json D = json::array();
    for (const auto& di : d.nominal.D) D.push_back(to_json(di));
    j["D"] = std::move(D);
    j["S_bar"] = to_json(d.surface.S_bar);
    j["S_x"] = to_json(d.surface.S_x);
    j["S_u"] = to_json(d.surface.S_u);
    j["gamma"] = d.gamma;
    j["beta"] = d.beta;
    j["bounds"] = to_json(d.bounds);
    j["P"] = to_json(d.surface.P);
    j["W"] = to_json(d.nominal.W);
    j["lambda"] = d.nominal.lambda;
    j["eta0"] = d.surface.eta0;
    json eta = json::array();
    for (const auto& e : d.surface.eta) eta.push_back(json::array({e[0], e[1], e[2]}));
    j["eta"] = std::move(eta);
    j["surface_bounds"] = to_json(d.surface.design_bounds);
    return j;
}

inline ControllerDesign controller_from_json(const json& j) {
    ControllerDesign d;
    try {
        d.n = j.at("n").get<int>();
        d.m = j.at("m").get<int>();
        for (const auto& kj : j.at("K")) d.nominal.K.push_back(matrix_from_json(kj));
        for (const auto& dj : j.at("D")) d.nominal.D.push_back(vector_from_json(dj));
        d.surface.S_bar = matrix_from_json(j.at("S_bar"));
        d.surface.S_x = matrix_from_json(j.at("S_x"));
        d.surface.S_u = matrix_from_json(j.at("S_u"));
        d.gamma = j.at("gamma").get<double>();
        d.beta = j.at("beta").get<std::vector<double>>();
        d.bounds = bounds_from_json(j.at("bounds"));
        d.surface.P = matrix_from_json(j.at("P"));
        d.nominal.W = matrix_from_json(j.at("W"));
        if (j.contains("lambda")) d.nominal.lambda = j.at("lambda").get<std::vector<double>>();
        if (j.contains("eta0")) d.surface.eta0 = j.at("eta0").get<double>();
        if (j.contains("eta"))
            for (const auto& e : j.at("eta"))
                d.surface.eta.push_back({e.at(0).get<double>(), e.at(1).get<double>(),
                                         e.at(2).get<double>()});
        d.surface.design_bounds =
            j.contains("surface_bounds") ? bounds_from_json(j.at("surface_bounds")) : d.bounds;
        if (d.nominal.W.size() > 0) {
            Eigen::LLT<MatrixXd> llt(d.nominal.W);
            for (const auto& k : d.nominal.K)
                d.nominal.Y.push_back(k * d.nominal.W);  // K W = Y
            (void)llt;
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed controller document: ") + e.what());
    }
    return d;
}

// ---------------------------------------------------------------------------
// FeasibilityProblem / FeasibilitySolution
// ---------------------------------------------------------------------------

inline json to_json(const FeasibilityProblem& p) {
    json vars = json::array();
    for (const auto& v : p.variables()) {
        const char* kind = v.kind == VarKind::Scalar ? "scalar"
                           : v.kind == VarKind::Symmetric ? "symmetric"
                                                          : "rectangular";
        vars.push_back(json{{"name", v.name},
                            {"kind", kind},
                            {"rows", v.rows},
                            {"cols", v.cols},
                            {"positive", v.positive}});
    }
    json cons = json::array();
    for (const auto& c : p.constraints()) {
        json terms = json::array();
        for (const auto& t : c.expr.terms) {
            terms.push_back(json{{"left", to_json(t.left)},
                                 {"var", p.variables()[static_cast<std::size_t>(t.var)].name},
                                 {"right", to_json(t.right)},
                                 {"transpose", t.transpose},
                                 {"scalar", t.scalar}});
        }
        cons.push_back(json{{"label", c.expr.label},
                            {"sense", c.sense == Sense::NegativeDefinite ? "negative_definite"
                                                                         : "positive_definite"},
                            {"blocks", c.expr.block_sizes},
                            {"constant", to_json(c.expr.constant)},
                            {"terms", std::move(terms)}});
    }
    return json{{"variables", std::move(vars)}, {"constraints", std::move(cons)}};
}

inline json to_json(const FeasibilitySolution& s) {
    json a;
    for (const auto& [name, value] : s.assignment) a[name] = to_json(value);
    const char* status = s.status == SolveStatus::Feasible ? "feasible"
                         : s.status == SolveStatus::Infeasible ? "infeasible"
                                                               : "max_iterations";
    return json{{"status", status},
                {"margin", s.margin},
                {"iterations", s.iterations},
                {"assignment", std::move(a)}};
}

// ---------------------------------------------------------------------------
// Trajectory CSV and plot script
// ---------------------------------------------------------------------------

inline void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
    os << "t";
    for (int i = 1; i <= traj.n; ++i) os << ",x" << i;
    for (int i = 1; i <= traj.m; ++i) os << ",u" << i;
    for (int i = 1; i <= traj.m; ++i) os << ",s" << i;
    os << ",region,domain_exit";
    if (traj.has_V) os << ",V";
    os << "\n";
    os << std::setprecision(15);
    for (const auto& s : traj.samples) {
        os << s.t;
        for (int i = 0; i < traj.n; ++i) os << "," << s.x(i);
        for (int i = 0; i < traj.m; ++i) os << "," << s.u(i);
        for (int i = 0; i < traj.m; ++i) os << "," << s.s(i);
        os << "," << s.region << "," << (s.domain_exit ? 1 : 0);
        if (traj.has_V) os << "," << s.V;
        os << "\n";
    }
}

/// Emits a gnuplot script with the three-panel layout used throughout:
/// states, inputs, sliding variable.
inline void write_plot_script(std::ostream& os, const std::string& csv_path, int n, int m) {
    os << "# three-panel trajectory plot (states, inputs, sliding variable)\n";
    os << "set datafile separator ','\n";
    os << "set terminal pngcairo size 900,1100\n";
    os << "set output 'trajectory.png'\n";
    os << "set multiplot layout 3,1\n";
    os << "set xlabel 't [s]'\n";
    auto series = [&](int first_col, int count, const char* prefix) {
        std::ostringstream line;
        line << "plot ";
        for (int i = 0; i < count; ++i) {
            if (i) line << ", ";
            line << "'" << csv_path << "' skip 1 using 1:" << (first_col + i)
                 << " with lines title '" << prefix << (i + 1) << "'";
        }
        return line.str();
    };
    os << "set ylabel 'states'\n" << series(2, n, "x") << "\n";
    os << "set ylabel 'input'\n" << series(2 + n, m, "u") << "\n";
    os << "set ylabel 'sliding variable'\n" << series(2 + n + m, m, "s") << "\n";
    os << "unset multiplot\n";
}

// ---------------------------------------------------------------------------
// Misc parsing
// ---------------------------------------------------------------------------

/// Parses "a,b,c" with an optional per-component `deg` suffix (degrees are
/// converted to radians): "82deg,0,0".
inline VectorXd parse_state_list(const std::string& text) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        bool deg = false;
        std::string t = item;
        const auto pos = t.find("deg");
        if (pos != std::string::npos) {
            deg = true;
            t = t.substr(0, pos);
        }
        try {
            double v = std::stod(t);
            vals.push_back(deg ? v * 3.14159265358979323846 / 180.0 : v);
        } catch (...) {
            throw ParseError("cannot parse state component '" + item + "'");
        }
    }
    VectorXd v(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) v(static_cast<Eigen::Index>(i)) = vals[i];
    return v;
}

inline PartitionSpec partition_from_json(const json& j) {
    PartitionSpec spec;
    try {
        spec.theta = vector_from_json(j.at("theta"));
        for (const auto& sj : j.at("slabs")) {
            SlabSpec s;
            s.lo = sj.at("lo").get<double>();
            s.hi = sj.at("hi").get<double>();
            if (sj.contains("op")) s.operating_point = vector_from_json(sj.at("op"));
            spec.slabs.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed partition document: ") + e.what());
    }
    return spec;
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("parse error in '" + path + "': " + e.what());
    }
}

inline void save_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
}

}  // namespace pwactl
