#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cbdi/output.hpp"

using nlohmann::json;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
}

RunResult run_cbdi(const std::string& args) {
    static int counter = 0;
    const std::string out = "/tmp/cbdi_test_out_" + std::to_string(counter) + ".txt";
    const std::string err = "/tmp/cbdi_test_err_" + std::to_string(counter) + ".txt";
    ++counter;
    const std::string cmd =
        std::string(CBDI_CLI_PATH) + " " + args + " >" + out + " 2>" + err;
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.code = (raw >= 0) ? ((raw >> 8) & 0xff) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    std::remove(out.c_str());
    std::remove(err.c_str());
    return r;
}

const char* kFlowConfig = R"(
[mechanism]
sigma = 0.0
gamma = 0.0
levy.family = "zero"
[drift]
family = "logistic"
c = 2.0
kappa = 1.0
[sim]
dt = 1e-4
t_max = 1.5
n_paths = 1
seed = 5
[experiment]
x0 = 10.0
)";

} // namespace

TEST_CASE("classify run emits the verdict record") {
    spit("/tmp/cbdi_ex_b1.toml", R"(
[mechanism]
sigma = 0.0
gamma = 0.0
levy.family = "pareto_log_tail"
levy.alpha = 1.5
levy.c = 1.0
levy.u0 = 1.0
[drift]
family = "powerlog"
c = 1.0
alpha_hat = 1.5
kappa = 1.0
)");
    const auto r = run_cbdi("classify --config /tmp/cbdi_ex_b1.toml");
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j["report"]["verdict_cdi"] == "guaranteed");
    CHECK(j["report"]["verdict_nonexplosion"] == "guaranteed");
    const auto rows = j["report"]["table_rows"];
    CHECK(std::find(rows.begin(), rows.end(), "b1") != rows.end());
    CHECK(j["provenance"]["version"].is_string());
}

TEST_CASE("simulate run: flow value lands on the closed form") {
    spit("/tmp/cbdi_flow.toml", kFlowConfig);
    const auto r =
        run_cbdi("simulate --config /tmp/cbdi_flow.toml --format csv --out "
                 "/tmp/cbdi_flow.csv");
    REQUIRE(r.code == 0);
    const std::string csv = slurp("/tmp/cbdi_flow.csv");
    // find the row at t = 1
    double x_at_1 = -1.0;
    std::istringstream is(csv);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#' || line[0] == 'p') continue;
        double id, t, x;
        char status[32];
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%31s", &id, &t, &x, status) >= 3) {
            if (std::fabs(t - 1.0) < 1e-9) x_at_1 = x;
        }
    }
    REQUIRE(x_at_1 > 0.0);
    CHECK(x_at_1 == doctest::Approx(10.0 / 11.0).epsilon(1e-3));
    std::remove("/tmp/cbdi_flow.csv");
}

TEST_CASE("missing drift section: exit 2 and a structured error") {
    spit("/tmp/cbdi_bad.toml", "[mechanism]\nsigma = 1.0\nlevy.family = \"zero\"\n");
    const auto r = run_cbdi("classify --config /tmp/cbdi_bad.toml");
    CHECK(r.code == 2);
    const json e = json::parse(r.err);
    CHECK(e["error"]["kind"] == "config");
    const std::string msg = e["error"]["message"];
    CHECK(msg.find("[drift]") != std::string::npos);
}

TEST_CASE("binary output round-trips") {
    spit("/tmp/cbdi_flow2.toml", kFlowConfig);
    const auto r =
        run_cbdi("simulate --config /tmp/cbdi_flow2.toml --format bin --out "
                 "/tmp/cbdi_flow.bin");
    REQUIRE(r.code == 0);
    std::ifstream f("/tmp/cbdi_flow.bin", std::ios::binary);
    const auto bp = cbdi::read_paths_binary(f);
    REQUIRE(bp.paths.size() == 1);
    CHECK(bp.seed == 5);
    CHECK(bp.paths[0].values.front() == 10.0);
    CHECK(bp.paths[0].values.back() ==
          doctest::Approx(10.0 / 16.0).epsilon(2e-3)); // t = 1.5
    std::remove("/tmp/cbdi_flow.bin");
}

TEST_CASE("determinism across thread counts, and seed overrides") {
    spit("/tmp/cbdi_mc.toml", R"(
[mechanism]
sigma = 1.0
gamma = 0.3
levy.family = "point_mass"
levy.h0 = 2.0
levy.rate = 0.4
[drift]
family = "logistic"
c = 1.0
[sim]
dt = 5e-3
t_max = 1.0
n_paths = 48
seed = 21
[experiment]
x0 = 2.0
)");
    const auto a = run_cbdi(
        "simulate --config /tmp/cbdi_mc.toml --format csv --out /tmp/cbdi_a.csv "
        "--threads 1");
    const auto b = run_cbdi(
        "simulate --config /tmp/cbdi_mc.toml --format csv --out /tmp/cbdi_b.csv "
        "--threads 4");
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(slurp("/tmp/cbdi_a.csv") == slurp("/tmp/cbdi_b.csv"));

    const auto c = run_cbdi(
        "simulate --config /tmp/cbdi_mc.toml --format csv --out /tmp/cbdi_c.csv "
        "--seed 99");
    REQUIRE(c.code == 0);
    CHECK(slurp("/tmp/cbdi_a.csv") != slurp("/tmp/cbdi_c.csv"));
    std::remove("/tmp/cbdi_a.csv");
    std::remove("/tmp/cbdi_b.csv");
    std::remove("/tmp/cbdi_c.csv");
}

TEST_CASE("provenance reproduces the run when fed back") {
    spit("/tmp/cbdi_prov.toml", kFlowConfig);
    const auto r1 = run_cbdi("simulate --config /tmp/cbdi_prov.toml --format json");
    REQUIRE(r1.code == 0);
    const json j = json::parse(r1.out);
    spit("/tmp/cbdi_prov2.toml", j["provenance"]["config_toml"].get<std::string>());
    const auto r2 = run_cbdi("simulate --config /tmp/cbdi_prov2.toml --format json");
    REQUIRE(r2.code == 0);
    CHECK(r1.out == r2.out);
}

TEST_CASE("lyapunov curves come out as csv columns") {
    spit("/tmp/cbdi_lyap.toml", R"(
[mechanism]
sigma = 0.0
gamma = 0.0
levy.family = "pareto_log_tail"
levy.alpha = 0.5
levy.c = 1.0
levy.u0 = 1.0
[drift]
family = "logistic"
c = 2.0
kappa = 1.0
[experiment]
grid_hi = 1e6
)");
    const auto r = run_cbdi("lyapunov --config /tmp/cbdi_lyap.toml --format csv");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("z,Xf1,Xf2,eps1,eps2") != std::string::npos);
}

TEST_CASE("compare subcommand: cp1 bundles and the large-start envelope") {
    spit("/tmp/cbdi_cmp.toml", R"(
[mechanism]
sigma = 0.0
gamma = 0.0
levy.family = "point_mass"
levy.h0 = 1.0
levy.rate = 1.0
[drift]
family = "zero"
[sim]
dt = 1e-3
t_max = 0.5
n_paths = 20
seed = 4
[experiment]
mode = "cp1"
initials = [1.0, 5.0]
)");
    auto r = run_cbdi("compare --config /tmp/cbdi_cmp.toml");
    REQUIRE(r.code == 0);
    json j = json::parse(r.out);
    CHECK(j["ordering_violations"] == 0);

    spit("/tmp/cbdi_env.toml", R"(
[mechanism]
sigma = 0.0
gamma = 0.0
levy.family = "zero"
[drift]
family = "logistic"
c = 2.0
kappa = 1.0
[sim]
dt = 1e-3
t_max = 1.0
n_paths = 1
seed = 4
[experiment]
mode = "from_infinity"
x_grid = [100, 10000, 1000000]
t_probe = 0.01
)");
    r = run_cbdi("compare --config /tmp/cbdi_env.toml");
    REQUIRE(r.code == 0);
    j = json::parse(r.out);
    CHECK(j["stabilized"] == true);
    CHECK(j["label"] == "certified");
}

TEST_CASE("hitting subcommand reports the flow passage") {
    spit("/tmp/cbdi_hit.toml", R"(
[mechanism]
sigma = 0.0
gamma = 0.0
levy.family = "zero"
[drift]
family = "logistic"
c = 2.0
kappa = 1.0
[sim]
dt = 1e-3
t_max = 2.0
n_paths = 2
seed = 3
[experiment]
x0 = 10.0
level = 1.0
)");
    const auto r = run_cbdi("hitting --config /tmp/cbdi_hit.toml");
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j["estimate"]["mean"].get<double>() == doctest::Approx(0.9).epsilon(2e-3));
    CHECK(j["estimate"]["censored_fraction"] == 0.0);
}
