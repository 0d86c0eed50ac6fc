#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <pwactl/serialize.hpp>

using namespace pwactl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("pwactl_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args) {
    const std::string cmd = std::string(PWACTL_BIN) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("fixture export, simulation and verification round") {
    TempDir tmp;
    const auto ctrl = tmp.file("ctrl.json"), model = tmp.file("model.json");
    REQUIRE(run("fixture pendulum -o " + ctrl + " --model-out " + model) == 0);
    REQUIRE(fs::exists(ctrl));
    REQUIRE(fs::exists(model));

    const auto csv = tmp.file("traj.csv"), gp = tmp.file("traj.gp");
    REQUIRE(run("simulate " + ctrl + " --fixture pendulum --T 1 --stride 50 -o " + csv +
                " --plot-script " + gp) == 0);
    std::istringstream is(slurp(csv));
    std::string header, first;
    std::getline(is, header);
    std::getline(is, first);
    CHECK(header == "t,x1,x2,u1,s1,region,domain_exit");
    CHECK(first.rfind("0,", 0) == 0);
    CHECK(first.find(",0,2,0") != std::string::npos);  // s(0) = 0
    CHECK(slurp(gp).find("multiplot") != std::string::npos);

    CHECK(run("verify " + ctrl + " " + model) == 0);
}

TEST_CASE("model + synthesize + verify pipeline") {
    TempDir tmp;
    const auto model = tmp.file("model.json"), ctrl = tmp.file("ctrl.json");
    REQUIRE(run("model pendulum default -o " + model) == 0);
    REQUIRE(run("synthesize " + model + " --fixture pendulum -o " + ctrl) == 0);
    CHECK(run("verify " + ctrl + " " + model) == 0);

    const auto dump = tmp.file("problems.json");
    CHECK(run("verify " + ctrl + " " + model + " --dump " + dump) == 0);
    const json dumped = json::parse(slurp(dump));
    CHECK(dumped.contains("lemma1_problem"));
    CHECK(dumped.contains("theorem2_problem"));

    // nominal and sliding simulations run from the model file alone
    const auto csv = tmp.file("nom.csv");
    CHECK(run("simulate " + ctrl + " --model " + model +
              " --mode nominal --x0 30deg,0,0 --T 2 -o " + csv) == 0);
    CHECK(run("simulate " + ctrl + " --model " + model +
              " --mode sliding --policy random --x0 30deg,0,0 --T 2 --seed 3 -o " + csv) == 0);
}

TEST_CASE("synthesize fails with exit 1 on an uncontrollable model") {
    TempDir tmp;
    // hand-built single-region model with zero dynamics and zero input
    PwaModel model;
    model.n = 1;
    model.m = 1;
    model.domain.lo = VectorXd::Constant(2, -1.0);
    model.domain.hi = VectorXd::Constant(2, 1.0);
    Region r;
    r.index = 0;
    r.theta = VectorXd::Zero(2);
    r.theta(0) = 1.0;
    r.beta1 = -1.0;
    r.beta2 = 1.0;
    auto [Q, f] = slab_to_ellipsoid(r.theta, r.beta1, r.beta2);
    r.Q = Q;
    r.f = f;
    model.regions = {r};
    AffineSubmodel sub;
    sub.A = MatrixXd::Zero(1, 1);
    sub.B = MatrixXd::Zero(1, 1);
    sub.C = VectorXd::Zero(1);
    sub.operating_point = VectorXd::Zero(2);
    model.submodels = {sub};

    const auto path = tmp.file("dead.json");
    save_json_file(path, to_json(model));
    CHECK(run("synthesize " + path + " -o " + tmp.file("ctrl.json")) == 1);
}

TEST_CASE("malformed documents exit with a diagnostic") {
    TempDir tmp;
    const auto bad = tmp.file("bad.json");
    std::ofstream(bad) << "{ not json";
    CHECK(run("synthesize " + bad) == 1);
    CHECK(run("verify " + bad + " " + bad) == 1);
    CHECK(run("simulate " + bad + " --fixture pendulum") == 1);
    CHECK(run("model nosuchsystem default") == 1);
}
