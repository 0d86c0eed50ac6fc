// Command-line front end: model construction, controller synthesis,
// closed-loop simulation and design verification.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <pwactl/bench.hpp>
#include <pwactl/serialize.hpp>
#include <pwactl/verify.hpp>

using namespace pwactl;

namespace {

Fixture fixture_by_name(const std::string& name) {
    if (name == "pendulum") return fixture_pendulum();
    if (name == "chua") return fixture_chua();
    throw ParseError("unknown system '" + name + "' (expected pendulum or chua)");
}

int cmd_model(const std::string& system, const std::string& partition_path,
              const std::string& out, int samples, std::uint64_t seed) {
    Fixture fx = fixture_by_name(system);
    PartitionSpec spec = fx.partition;
    if (partition_path != "default")
        spec = partition_from_json(load_json_file(partition_path));
    PwaModel model = build_model(fx.system, spec);
    model.bounds = estimate_error_bounds(fx.system, model, samples, seed);
    ValidationReport report = validate_model(model, fx.system, 1e-9, 400, seed + 1);
    save_json_file(out, to_json(model));
    std::cout << "model: " << model.region_count() << " regions, bounds eps_f0="
              << model.bounds.eps_f0 << " eps_f=" << model.bounds.eps_f
              << " eps_g=" << model.bounds.eps_g << "\n";
    std::cout << report.summary();
    for (const auto& note : fx.notes) std::cout << "note: " << note << "\n";
    if (!report.pass()) {
        std::cout << "model validation FAILED\n";
        return 2;
    }
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_synthesize(const std::string& model_path, const std::string& out,
                   std::optional<double> gamma, const std::string& fixture_name,
                   const std::string& grid_spec, const std::string& surface_eps,
                   std::uint64_t seed) {
    PwaModel model = model_from_json(load_json_file(model_path));
    GridSpec grid = default_grid(model);
    std::optional<ErrorBounds> surface_bounds;
    if (!fixture_name.empty()) {
        Fixture fx = fixture_by_name(fixture_name);
        if (static_cast<int>(fx.grid.range.size()) == model.l()) grid = fx.grid;
        surface_bounds = fx.surface_bounds;
    }
    if (!grid_spec.empty()) {
        // "lo:hi:points" applied to every offset axis
        double lo, hi;
        int pts;
        if (std::sscanf(grid_spec.c_str(), "%lf:%lf:%d", &lo, &hi, &pts) != 3)
            throw ParseError("grid spec must be lo:hi:points");
        grid = GridSpec{};
        for (int i = 1; i <= model.l(); ++i) grid.range.emplace_back(lo, hi);
        grid.points_per_axis = pts;
    }
    if (!surface_eps.empty()) {
        ErrorBounds eb;
        if (std::sscanf(surface_eps.c_str(), "%lf,%lf,%lf", &eb.eps_f0, &eb.eps_f,
                        &eb.eps_g) != 3)
            throw ParseError("surface eps must be eps_f0,eps_f,eps_g");
        surface_bounds = eb;
    }

    PwaModel surface_model = model;
    if (surface_bounds) surface_model.bounds = *surface_bounds;

    SolveOptions lmi;
    lmi.seed = seed;
    NominalDesign nominal;
    SurfaceDesign surface;
    OffsetSearchLog log;
    const bool found = detail::visit_offset_grid(
        model, grid,
        [&](const std::vector<VectorXd>& D) {
            FeasibilitySolution s1 = solve_feasibility(assemble_lemma1(model, D), lmi);
            if (s1.status != SolveStatus::Feasible) return false;
            NominalDesign cand = extract_nominal(model, D, s1);
            FeasibilitySolution s2 =
                solve_feasibility(assemble_theorem2(surface_model, cand), lmi);
            if (s2.status != SolveStatus::Feasible) return false;
            nominal = cand;
            surface = extract_surface(surface_model, s2);
            return true;
        },
        &log);
    if (!found) {
        std::cerr << "SynthesisFailed: no (offset, surface) pair found after "
                  << log.candidates_tried << " candidates over " << log.rounds << " rounds\n";
        return 1;
    }

    ControllerDesign d;
    d.n = model.n;
    d.m = model.m;
    d.nominal = nominal;
    d.surface = surface;
    d.bounds = model.bounds;
    d.beta = beta_terms(model, d.surface.S_x);
    d.gamma = gamma ? *gamma : default_gamma(model, d.surface.S_x);
    save_json_file(out, to_json(d));
    std::cout << "design found after " << log.candidates_tried << " candidates; gamma="
              << d.gamma << "\n";
    std::cout << "S_bar = [" << d.surface.S_bar << "]\n";
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_simulate(const std::string& controller_path, const std::string& fixture_name,
                 const std::string& model_path, const std::string& mode,
                 const std::string& x0_text, std::optional<double> sigma,
                 std::optional<double> h, std::optional<double> T, int stride,
                 const std::string& policy_name, std::uint64_t seed, const std::string& out,
                 const std::string& plot_path) {
    ControllerDesign design = controller_from_json(load_json_file(controller_path));

    std::optional<Fixture> fx;
    PwaModel model;
    if (!fixture_name.empty()) {
        fx = fixture_by_name(fixture_name);
        model = model_path.empty() ? fixture_model(*fx)
                                   : model_from_json(load_json_file(model_path));
    } else if (!model_path.empty()) {
        model = model_from_json(load_json_file(model_path));
    } else {
        throw ParseError("simulate needs --fixture or --model");
    }

    SimConfig cfg;
    cfg.sigma = sigma ? *sigma : (fx ? fx->sigma : 0.0);
    cfg.h = h ? *h : (fx ? fx->h : 1e-3);
    cfg.T = T ? *T : (fx ? fx->T : 10.0);
    cfg.record_stride = stride;

    VectorXd x0_full = fx ? fx->x0 : VectorXd(VectorXd::Zero(model.n + model.m));
    if (!x0_text.empty()) {
        VectorXd parsed = parse_state_list(x0_text);
        if (parsed.size() == model.n) {
            x0_full = VectorXd::Zero(model.n + model.m);
            x0_full.head(model.n) = parsed;
        } else if (parsed.size() == model.n + model.m) {
            x0_full = parsed;
        } else {
            throw ParseError("--x0 needs n or n+m components");
        }
    }

    Trajectory traj;
    if (mode == "practical") {
        if (!fx) throw ParseError("practical simulation needs --fixture for the plant");
        traj = simulate_practical(fx->system, model, design, cfg, x0_full.head(model.n));
    } else if (mode == "nominal") {
        traj = simulate_nominal(model, design, cfg, x0_full);
    } else if (mode == "sliding") {
        UncertaintyPolicy policy;
        if (policy_name == "zero") policy = UncertaintyPolicy::zero();
        else if (policy_name == "random") policy = UncertaintyPolicy::random_bounded(seed);
        else if (policy_name == "adversarial") policy = UncertaintyPolicy::adversarial(seed);
        else throw ParseError("unknown policy '" + policy_name + "'");
        traj = simulate_sliding_motion(model, design, cfg, x0_full, policy);
    } else {
        throw ParseError("unknown mode '" + mode + "'");
    }

    std::ofstream os(out);
    if (!os) throw ParseError("cannot write '" + out + "'");
    write_trajectory_csv(traj, os);
    std::cout << "wrote " << traj.samples.size() << " samples to " << out << "\n";
    bool exited = false;
    for (const auto& s : traj.samples) exited |= s.domain_exit;
    if (exited) std::cout << "note: trajectory left the approximation domain (flagged)\n";
    if (!plot_path.empty()) {
        std::ofstream ps(plot_path);
        if (!ps) throw ParseError("cannot write '" + plot_path + "'");
        write_plot_script(ps, out, traj.n, traj.m);
        std::cout << "wrote plot script " << plot_path << "\n";
    }
    return 0;
}

int cmd_verify(const std::string& controller_path, const std::string& model_path,
               int sims, std::uint64_t seed, const std::string& dump_path) {
    PwaModel model = model_from_json(load_json_file(model_path));
    ControllerDesign design = controller_from_json(load_json_file(controller_path));
    VerifyOptions opt;
    opt.descent_sims = sims;
    opt.seed = seed;
    VerifyResult res = verify_design(model, design, opt);

    std::cout << "beta definitions:      " << (res.beta_ok ? "pass" : "FAIL") << "\n";
    std::cout << "S_u nonsingular:       " << (res.su_ok ? "pass" : "FAIL") << "\n";
    std::cout << "nominal LMI residuals: " << (res.nominal_ok ? "pass" : "FAIL") << "\n";
    if (!res.nominal_report.rows.empty()) std::cout << res.nominal_report.table();
    if (res.surface_checked) {
        std::cout << "surface LMI residuals: " << (res.surface_ok ? "pass" : "FAIL") << "\n";
        std::cout << res.surface_report.table();
    } else {
        std::cout << "surface LMI residuals: skipped (no P stored)\n";
    }
    std::cout << "nominal descent (" << sims << " sims): "
              << (res.descent_ok ? "pass" : "FAIL") << "\n";
    for (const auto& msg : res.messages) std::cout << "note: " << msg << "\n";

    if (!dump_path.empty()) {
        std::vector<VectorXd> D_tail(design.nominal.D.begin() + 1, design.nominal.D.end());
        json dump;
        dump["lemma1_problem"] = to_json(assemble_lemma1(model, D_tail));
        if (design.has_P()) {
            PwaModel sm = model;
            sm.bounds = design.surface.design_bounds;
            dump["theorem2_problem"] = to_json(assemble_theorem2(sm, design.nominal.K, D_tail));
        }
        save_json_file(dump_path, dump);
        std::cout << "wrote " << dump_path << "\n";
    }
    return res.pass() ? 0 : 2;
}

int cmd_fixture(const std::string& name, const std::string& controller_out,
                const std::string& model_out, bool recompute, int samples,
                std::uint64_t seed) {
    Fixture fx = fixture_by_name(name);
    PwaModel model = fixture_model(fx, !recompute, samples, seed);
    if (!model_out.empty()) {
        save_json_file(model_out, to_json(model));
        std::cout << "wrote " << model_out << "\n";
    }
    if (!controller_out.empty()) {
        if (!fx.has_published()) throw ParseError("fixture has no published design");
        save_json_file(controller_out, to_json(make_published_design(fx, model)));
        std::cout << "wrote " << controller_out << "\n";
    }
    for (const auto& note : fx.notes) std::cout << "note: " << note << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"piecewise-affine integral sliding-mode control toolkit"};
    app.set_help_flag("--help", "print help");  // keep --h free for the step size
    app.require_subcommand(1);

    // model
    std::string m_system, m_partition = "default", m_out = "model.json";
    int m_samples = 400;
    std::uint64_t m_seed = 0;
    auto* model_cmd = app.add_subcommand("model", "build a PWA model of a builtin system");
    model_cmd->add_option("system", m_system, "pendulum | chua")->required();
    model_cmd->add_option("partition", m_partition, "partition JSON file or 'default'");
    model_cmd->add_option("-o,--output", m_out, "output model file");
    model_cmd->add_option("--samples", m_samples, "samples per region for error bounds");
    model_cmd->add_option("--seed", m_seed, "sampling seed");

    // synthesize
    std::string s_model, s_out = "controller.json", s_fixture, s_grid, s_eps;
    double s_gamma = -1.0;
    std::uint64_t s_seed = 0;
    auto* synth_cmd = app.add_subcommand("synthesize", "design gains and sliding surface");
    synth_cmd->add_option("model", s_model, "model JSON file")->required();
    synth_cmd->add_option("-o,--output", s_out, "output controller file");
    synth_cmd->add_option("--gamma", s_gamma, "reaching gain (default: scaled heuristic)");
    synth_cmd->add_option("--fixture", s_fixture, "use this fixture's grid and surface bounds");
    synth_cmd->add_option("--grid", s_grid, "offset grid as lo:hi:points");
    synth_cmd->add_option("--surface-eps", s_eps, "surface design bounds eps_f0,eps_f,eps_g");
    synth_cmd->add_option("--seed", s_seed, "solver seed");

    // simulate
    std::string c_controller, c_fixture, c_model, c_mode = "practical", c_x0, c_policy = "random";
    std::string c_out = "traj.csv", c_plot;
    double c_sigma = -1.0, c_h = -1.0, c_T = -1.0;
    int c_stride = 1;
    std::uint64_t c_seed = 0;
    auto* sim_cmd = app.add_subcommand("simulate", "simulate a closed loop to CSV");
    sim_cmd->add_option("controller", c_controller, "controller JSON file")->required();
    sim_cmd->add_option("--fixture", c_fixture, "pendulum | chua (plant for practical mode)");
    sim_cmd->add_option("--model", c_model, "model JSON (for nominal/sliding, or dispatch)");
    sim_cmd->add_option("--mode", c_mode, "practical | nominal | sliding");
    sim_cmd->add_option("--x0", c_x0, "initial state, e.g. '82deg,0' or full n+m list");
    sim_cmd->add_option("--sigma", c_sigma, "sign smoothing");
    sim_cmd->add_option("--h", c_h, "step size");
    sim_cmd->add_option("--T", c_T, "duration");
    sim_cmd->add_option("--stride", c_stride, "record every k-th step");
    sim_cmd->add_option("--policy", c_policy, "zero | random | adversarial (sliding mode)");
    sim_cmd->add_option("--seed", c_seed, "uncertainty seed");
    sim_cmd->add_option("-o,--output", c_out, "output CSV");
    sim_cmd->add_option("--plot-script", c_plot, "write a gnuplot script here");

    // verify
    std::string v_controller, v_model, v_dump;
    int v_sims = 20;
    std::uint64_t v_seed = 7;
    auto* verify_cmd = app.add_subcommand("verify", "re-check a design against its model");
    verify_cmd->add_option("controller", v_controller, "controller JSON file")->required();
    verify_cmd->add_option("model", v_model, "model JSON file")->required();
    verify_cmd->add_option("--sims", v_sims, "number of nominal descent simulations");
    verify_cmd->add_option("--seed", v_seed, "simulation seed");
    verify_cmd->add_option("--dump", v_dump, "write the assembled LMI problems as JSON");

    // fixture
    std::string f_name, f_controller, f_model;
    bool f_recompute = false;
    int f_samples = 400;
    std::uint64_t f_seed = 0;
    auto* fixture_cmd =
        app.add_subcommand("fixture", "export a benchmark's published design and model");
    fixture_cmd->add_option("name", f_name, "pendulum | chua")->required();
    fixture_cmd->add_option("-o,--output", f_controller, "output controller file");
    fixture_cmd->add_option("--model-out", f_model, "output model file");
    fixture_cmd->add_flag("--recompute-model", f_recompute,
                          "linearize instead of using published matrices");
    fixture_cmd->add_option("--samples", f_samples, "samples per region for error bounds");
    fixture_cmd->add_option("--seed", f_seed, "sampling seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (model_cmd->parsed()) return cmd_model(m_system, m_partition, m_out, m_samples, m_seed);
        if (synth_cmd->parsed())
            return cmd_synthesize(s_model, s_out,
                                  s_gamma >= 0 ? std::optional<double>(s_gamma) : std::nullopt,
                                  s_fixture, s_grid, s_eps, s_seed);
        if (sim_cmd->parsed())
            return cmd_simulate(c_controller, c_fixture, c_model, c_mode, c_x0,
                                c_sigma >= 0 ? std::optional<double>(c_sigma) : std::nullopt,
                                c_h > 0 ? std::optional<double>(c_h) : std::nullopt,
                                c_T > 0 ? std::optional<double>(c_T) : std::nullopt, c_stride,
                                c_policy, c_seed, c_out, c_plot);
        if (verify_cmd->parsed()) return cmd_verify(v_controller, v_model, v_sims, v_seed, v_dump);
        if (fixture_cmd->parsed())
            return cmd_fixture(f_name, f_controller, f_model, f_recompute, f_samples, f_seed);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DivergenceError& e) {
        std::cerr << "error: simulation diverged: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
