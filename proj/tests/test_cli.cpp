#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>
#include <json.hpp>
#include <unistd.h>

#include "plap/cli.hpp"
#include "plap/config.hpp"
#include "plap/errors.hpp"

using namespace plap;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("plap_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

struct Run {
  int code = -1;
  std::string err;
};

Run run_cli(const std::string& args, const fs::path& dir, const std::string& env = "") {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd =
      env + " \"" + std::string(PLAP_CLI_PATH) + "\" " + args + " > \"" + (dir / "stdout.txt").string() + "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

const char* kSmallSweep = R"({
  "problem": {"p": 2, "bc": "dirichlet", "section": [[0, 1]],
              "coefficient": {"family": "constant", "matrix": [[1, 0.3], [0.3, 1]]}},
  "solver": {"resolution": 8},
  "sweep": {"ells": [1, 2, 4]},
  "seed": 3
})";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("solve writes lambda close to pi^2 for the 1D Laplacian") {
    const fs::path dir = scratch("solve");
    spit(dir / "cfg.json", R"({"problem": {"p": 2, "section": [[0, 1]]}, "solver": {"resolution": 128},
                               "solve": {"domain": "section"}})");
    const Run r = run_cli("solve --config \"" + (dir / "cfg.json").string() + "\" --out \"" + (dir / "out").string() +
                              "\" --dump-eigenfunction",
                          dir);
    REQUIRE(r.code == 0);
    const json doc = json::parse(slurp(dir / "out" / "result.json"));
    CHECK(doc.at("lambda").get<double>() == doctest::Approx(9.8696).epsilon(0.005));
    CHECK(doc.at("converged").get<bool>());
    CHECK(doc.contains("residual"));
    CHECK(doc.contains("iterations"));
    CHECK(doc.at("config").at("problem").at("p").get<double>() == 2.0);
    const std::string csv = slurp(dir / "out" / "eigenfunction.csv");
    CHECK(csv.rfind("# config: ", 0) == 0);
    CHECK(csv.find("# axes:") != std::string::npos);
  }

  TEST_CASE("config errors exit with 2") {
    const fs::path dir = scratch("errors");
    spit(dir / "broken.json", "{\"problem\": {\"p\": 2,");
    spit(dir / "p15.json", R"({"problem": {"p": 1.5}})");
    spit(dir / "typo.json", R"({"problem": {"p": 2, "pp": 3}})");
    spit(dir / "empty.json", R"({"sweep": {"ells": []}})");
    spit(dir / "indefinite.json",
         R"({"problem": {"coefficient": {"family": "constant", "matrix": [[1, 1.1], [1.1, 1]], "lambda_min": 0.1, "M": 3}}})");
    const std::string out = " --out \"" + (dir / "out").string() + "\"";
    auto cfg = [&](const char* name) { return " --config \"" + (dir / name).string() + "\"" + out; };

    Run r = run_cli("solve" + cfg("broken.json"), dir);
    CHECK(r.code == 2);
    CHECK_FALSE(r.err.empty());

    r = run_cli("solve" + cfg("p15.json"), dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("p must be >= 2") != std::string::npos);

    r = run_cli("solve" + cfg("typo.json"), dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("pp") != std::string::npos);

    CHECK(run_cli("sweep" + cfg("empty.json"), dir).code == 2);
    CHECK(run_cli("solve" + cfg("indefinite.json"), dir).code == 2);
    CHECK(run_cli("solve --config \"" + (dir / "missing.json").string() + "\"" + out, dir).code == 2);
  }

  TEST_CASE("non-convergence exits with 3 and still writes the result") {
    const fs::path dir = scratch("noconv");
    spit(dir / "cfg.json", R"({"problem": {"p": 3}, "solver": {"max_iter": 3, "resolution": 8}})");
    const Run r = run_cli("solve --config \"" + (dir / "cfg.json").string() + "\" --out \"" + (dir / "out").string() + "\"", dir);
    CHECK(r.code == 3);
    CHECK(fs::exists(dir / "out" / "result.json"));
  }

  TEST_CASE("picone: default passes, sign flip fails, output is reproducible") {
    const fs::path dir = scratch("picone");
    spit(dir / "ok.json", R"({"problem": {"p": 3}, "solver": {"resolution": 8}, "picone": {"draws": 200}, "seed": 4})");
    spit(dir / "flip.json", R"({"picone": {"draws": 200, "flip_sign": true}, "solver": {"resolution": 8}})");
    const std::string a = (dir / "a").string();
    const std::string b = (dir / "b").string();
    CHECK(run_cli("picone --config \"" + (dir / "ok.json").string() + "\" --out \"" + a + "\"", dir).code == 0);
    CHECK(run_cli("picone --config \"" + (dir / "ok.json").string() + "\" --out \"" + b + "\"", dir).code == 0);
    const std::string ra = slurp(dir / "a" / "picone.json");
    CHECK_FALSE(ra.empty());
    CHECK(ra == slurp(dir / "b" / "picone.json"));
    const json doc = json::parse(ra);
    CHECK(doc.at("config").at("seed").get<int>() == 4);
    CHECK(run_cli("picone --config \"" + (dir / "flip.json").string() + "\" --out \"" + (dir / "c").string() + "\"", dir).code ==
          1);
    // --seed overrides the file and is recorded.
    CHECK(run_cli("picone --seed 9 --config \"" + (dir / "ok.json").string() + "\" --out \"" + (dir / "d").string() + "\"", dir)
              .code == 0);
    CHECK(json::parse(slurp(dir / "d" / "picone.json")).at("config").at("seed").get<int>() == 9);
  }

  TEST_CASE("sweep outputs: columns, determinism, jobs, report") {
    const fs::path dir = scratch("sweep");
    spit(dir / "cfg.json", kSmallSweep);
    const std::string cfg = " --config \"" + (dir / "cfg.json").string() + "\"";
    REQUIRE(run_cli("sweep" + cfg + " --out \"" + (dir / "a").string() + "\"", dir).code == 0);
    REQUIRE(run_cli("sweep" + cfg + " --out \"" + (dir / "b").string() + "\"", dir).code == 0);
    REQUIRE(run_cli("sweep" + cfg + " --out \"" + (dir / "c").string() + "\" --jobs 3", dir).code == 0);
    REQUIRE(run_cli("sweep" + cfg + " --out \"" + (dir / "d").string() + "\"", dir, "PLAP_JOBS=2").code == 0);
    for (const char* f : {"sweep.csv", "summary.json", "records.json"}) {
      const std::string a = slurp(dir / "a" / f);
      CHECK_FALSE(a.empty());
      CHECK(a == slurp(dir / "b" / f));
      CHECK(a == slurp(dir / "c" / f));
      CHECK(a == slurp(dir / "d" / f));
    }

    const std::string csv = slurp(dir / "a" / "sweep.csv");
    std::istringstream lines(csv);
    std::string first;
    std::string header;
    std::getline(lines, first);
    std::getline(lines, header);
    CHECK(first.rfind("# config: {", 0) == 0);
    CHECK(header == "ell,lambda,residual,iterations,converged,upper_bound,mu1,reduced_lambda,coupling_measure");
    std::vector<double> lambdas;
    for (std::string row; std::getline(lines, row);) {
      if (row.empty()) continue;
      const auto c1 = row.find(',');
      const auto c2 = row.find(',', c1 + 1);
      lambdas.push_back(std::stod(row.substr(c1 + 1, c2 - c1 - 1)));
    }
    REQUIRE(lambdas.size() == 3);
    CHECK(lambdas[1] <= lambdas[0]);
    CHECK(lambdas[2] <= lambdas[1]);

    const json summary = json::parse(slurp(dir / "a" / "summary.json"));
    for (const char* k : {"fitted_C", "fitted_exponent", "gap", "config"}) CHECK(summary.contains(k));

    // report rebuilds the derived files byte for byte.
    fs::remove(dir / "a" / "sweep.csv");
    fs::remove(dir / "a" / "summary.json");
    CHECK(run_cli("report --out \"" + (dir / "a").string() + "\"", dir).code == 0);
    CHECK(slurp(dir / "a" / "sweep.csv") == slurp(dir / "b" / "sweep.csv"));
    CHECK(slurp(dir / "a" / "summary.json") == slurp(dir / "b" / "summary.json"));
    CHECK(run_cli("report --out \"" + (dir / "nothing").string() + "\"", dir).code == 2);
  }

  TEST_CASE("uncoupled mixed sweep reports NoGap") {
    const fs::path dir = scratch("nogap");
    spit(dir / "cfg.json", R"({
      "problem": {"p": 2, "bc": "mixed", "section": [[0, 1]]},
      "solver": {"resolution": 12},
      "sweep": {"ells": [0.5, 4], "gap_ell0s": [0.25], "gap_alphas": [2]}
    })");
    REQUIRE(run_cli("sweep --config \"" + (dir / "cfg.json").string() + "\" --out \"" + (dir / "o").string() + "\"", dir).code ==
            0);
    const json summary = json::parse(slurp(dir / "o" / "summary.json"));
    CHECK(summary.at("gap").get<std::string>() == "NoGap");
  }

  TEST_CASE("config parsing") {
    const RunConfig cfg = parse_config(json::parse(R"({
      "problem": {"p": 3, "bc": "mixed", "section": [[0, 2]],
                  "coefficient": {"family": "polynomial", "lambda_min": 0.5, "M": 3,
                                  "entries": [{"row": 0, "col": 0, "terms": [{"coef": 1}]},
                                              {"row": 0, "col": 1, "terms": [{"coef": 0.2, "powers": [0, 1]}]},
                                              {"row": 1, "col": 1, "terms": [{"coef": 1}, {"coef": 0.5, "powers": [0, 2]}]}]}},
      "sweep": {"range": {"start": 1, "factor": 2, "count": 4}}
    })"));
    CHECK(cfg.p == 3.0);
    CHECK(cfg.bc == Boundary::Mixed);
    REQUIRE(cfg.ells.size() == 4);
    CHECK(cfg.ells[3] == 8.0);
    const CoeffSpec spec = cfg.build_coefficient();
    const std::vector<double> x{0.0, 2.0};
    CHECK(spec.at(x)(1, 1) == doctest::Approx(3.0));
    CHECK(spec.at(x)(0, 1) == doctest::Approx(0.4));

    auto code = [](const char* text) {
      try {
        parse_config(json::parse(text));
      } catch (const Error& e) {
        return e.code();
      }
      return ErrorCode::InvalidArgument;
    };
    CHECK(code(R"({"bogus": 1})") == ErrorCode::ConfigError);
    CHECK(code(R"({"problem": {"p": 1.5}})") == ErrorCode::ConfigError);
    CHECK(code(R"({"problem": {"bc": "neumann"}})") == ErrorCode::ConfigError);
    CHECK(code(R"({"sweep": {"ells": [1], "range": {"start": 1, "count": 2}}})") == ErrorCode::ConfigError);
    CHECK(code(R"({"problem": {"coefficient": {"family": "spline"}}})") == ErrorCode::ConfigError);

    // The resolved tree round-trips.
    const RunConfig back = parse_config(resolved_json(cfg));
    CHECK(resolved_json(back) == resolved_json(cfg));
  }

  TEST_CASE("number formatting is shortest round-trip") {
    CHECK(cli::format_number(0.1) == "0.1");
    CHECK(std::stod(cli::format_number(9.869604401089358)) == 9.869604401089358);
  }
}
