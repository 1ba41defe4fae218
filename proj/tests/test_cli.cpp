#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "glip/harness.hpp"

namespace {

struct RunResult {
  int exit_code;
  std::string out;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

RunResult run_cli(const std::string& args) {
  const std::string out_file = "/tmp/glip_cli_out.txt";
  const std::string cmd =
      std::string(GLIP_CLI_PATH) + " " + args + " > " + out_file + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WEXITSTATUS(status);
  r.out = slurp(out_file);
  return r;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

const char* kBoundaryConfig = R"({
  "scenario": "boundary_poisson",
  "tau_grid": [1e-2, 1e-3],
  "replicates": 40,
  "inner_draws": 300,
  "seed": 11
})";

const char* kGaussianConfig = R"({
  "scenario": "well_posed_gaussian",
  "tau_grid": [1e-2, 3e-3, 1e-3],
  "replicates": 50,
  "inner_draws": 300,
  "seed": 3
})";

}  // namespace

TEST_CASE("run writes csv with exact data on the boundary scenario") {
  write_file("/tmp/glip_boundary.json", kBoundaryConfig);
  const auto r = run_cli("run --config /tmp/glip_boundary.json --out /tmp/glip_b.csv");
  CHECK(r.exit_code == 0);
  std::ifstream csv("/tmp/glip_b.csv");
  std::string header, line;
  std::getline(csv, header);
  CHECK(header.rfind("scenario,tau,gamma,nu,n,p,", 0) == 0);
  int rows = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    ++rows;
    // kf_data_empirical is the 9th column
    std::stringstream ss(line);
    std::string f;
    for (int i = 0; i < 9; ++i) std::getline(ss, f, ',');
    CHECK(f == "0");
  }
  CHECK(rows == 2);
  // sidecar exists and is valid json
  const auto sidecar = nlohmann::json::parse(slurp("/tmp/glip_b.csv.json"));
  CHECK(sidecar.is_array());
}

TEST_CASE("missing or invalid configs exit with code 2") {
  CHECK(run_cli("run --config /tmp/does_not_exist.json --out /tmp/x.csv").exit_code == 2);
  write_file("/tmp/glip_bad.json", "{ not json");
  CHECK(run_cli("run --config /tmp/glip_bad.json --out /tmp/x.csv").exit_code == 2);
  write_file("/tmp/glip_unknown.json",
             R"({"scenario":"well_posed_gaussian","tau_grid":[1e-2],"frobnicate":1})");
  CHECK(run_cli("run --config /tmp/glip_unknown.json --out /tmp/x.csv").exit_code == 2);
}

TEST_CASE("identical seeds give byte-identical csv across parallelism") {
  write_file("/tmp/glip_gauss.json", kGaussianConfig);
  const auto r1 =
      run_cli("run --config /tmp/glip_gauss.json --out /tmp/glip_g1.csv --seed 42");
  const auto r2 = run_cli(
      "run --config /tmp/glip_gauss.json --out /tmp/glip_g2.csv --seed 42 --parallel 4");
  CHECK(r1.exit_code == 0);
  CHECK(r2.exit_code == 0);
  CHECK(slurp("/tmp/glip_g1.csv") == slurp("/tmp/glip_g2.csv"));
}

TEST_CASE("dump-config round trips through the parser") {
  write_file("/tmp/glip_gauss.json", kGaussianConfig);
  const auto r = run_cli("run --config /tmp/glip_gauss.json --dump-config");
  CHECK(r.exit_code == 0);
  write_file("/tmp/glip_dump.json", r.out);
  const auto r2 = run_cli("run --config /tmp/glip_dump.json --dump-config");
  CHECK(r2.exit_code == 0);
  CHECK(r.out == r2.out);
}

TEST_CASE("bound prints the report json") {
  write_file("/tmp/glip_gauss.json", kGaussianConfig);
  const auto r = run_cli("bound --config /tmp/glip_gauss.json --tau 1e-3");
  CHECK(r.exit_code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["valid"].get<bool>());
  CHECK(j.contains("variance_term"));
  CHECK(j.contains("diagnostics"));
  // gaussian noise keeps the curvature perturbation at zero
  CHECK(j["diagnostics"]["lambda_tilde"].get<double>() == 0.0);

  // the random-bias coefficient matches ||Hnu^-1 A^T Sigma^-1|| computed here
  glip::ScenarioConfig cfg;
  cfg.name = glip::ScenarioName::WellPosedGaussian;
  cfg.tau_grid = {1e-3};
  const auto prob = glip::build_problem(cfg, 1e-3);
  const glip::Mat a = prob.op().matrix();
  const glip::Mat h = a.transpose() * a + prob.nu() * glip::Mat::Identity(4, 4);
  Eigen::JacobiSVD<glip::Mat> svd(h.inverse() * a.transpose());
  CHECK(j["random_bias_coeff"].get<double>() ==
        doctest::Approx(svd.singularValues()[0]).epsilon(1e-9));
}

TEST_CASE("bound delta-auto validates the growth exponent") {
  write_file("/tmp/glip_gauss.json", kGaussianConfig);
  CHECK(run_cli("bound --config /tmp/glip_gauss.json --tau 1e-3 --delta-auto 1 5")
            .exit_code == 2);
  CHECK(run_cli("bound --config /tmp/glip_gauss.json --tau 1e-3 --delta-auto 1 2")
            .exit_code == 0);
}

TEST_CASE("slope command fits fixtures and resolves class names") {
  // synthetic exact power law written through the table layer
  glip::ResultTable table;
  for (double tau : {1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5}) {
    glip::ResultRow row;
    row.scenario = "well_posed_gaussian";
    row.tau = tau;
    row.kf_posterior_empirical = 2.0 * std::pow(tau * std::log(1.0 / tau), 1.0 / 3.0);
    table.rows.push_back(row);
  }
  std::ofstream csv("/tmp/glip_fixture.csv");
  table.write_csv(csv);
  csv.close();

  const auto pass =
      run_cli("slope --in /tmp/glip_fixture.csv --predicted 0.3333333333333333 --tol 0.01");
  CHECK(pass.exit_code == 0);
  const auto j = nlohmann::json::parse(pass.out);
  CHECK(j["pass"].get<bool>());
  CHECK(j["slope"].get<double>() == doctest::Approx(1.0 / 3.0).epsilon(1e-9));

  const auto named =
      run_cli("slope --in /tmp/glip_fixture.csv --predicted ill-posed-interior --tol 0.01");
  CHECK(named.exit_code == 0);

  const auto fail =
      run_cli("slope --in /tmp/glip_fixture.csv --predicted 0.5 --tol 0.01");
  CHECK(fail.exit_code == 1);

  CHECK(run_cli("slope --in /tmp/glip_fixture.csv --predicted 0.5 --tol -1").exit_code ==
        2);
  write_file("/tmp/glip_mangled.csv", "not,a,result,file\n1,2,3,4\n");
  CHECK(run_cli("slope --in /tmp/glip_mangled.csv --predicted 0.5 --tol 0.1").exit_code ==
        2);
}

TEST_CASE("numeric csv output carries full double precision") {
  write_file("/tmp/glip_gauss.json", kGaussianConfig);
  run_cli("run --config /tmp/glip_gauss.json --out /tmp/glip_prec.csv --seed 5");
  std::ifstream csv("/tmp/glip_prec.csv");
  std::string header, line;
  std::getline(csv, header);
  std::getline(csv, line);
  std::stringstream ss(line);
  std::string f;
  for (int i = 0; i < 11; ++i) std::getline(ss, f, ',');  // kf_posterior_empirical
  CHECK(f.size() >= 17);  // 17 significant digits plus separators
  const double parsed = std::stod(f);
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", parsed);
  CHECK(f == buf);  // lossless round trip
}
