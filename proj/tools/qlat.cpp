#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "qlat/error.hpp"
#include "qlat/experiment.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string out;
  long long seed = -1;
  long long budget = -1;
};

int report_config(const qlat::ConfigError& e) {
  std::cerr << "invalid configuration:\n";
  for (const auto& v : e.violations()) std::cerr << "  - " << v << "\n";
  return static_cast<int>(qlat::ExitCode::config);
}

int run(const std::string& experiment, const Overrides& o) {
  try {
    std::ifstream in(o.config);
    if (!in) throw qlat::ConfigError({"cannot read config file " + o.config});
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
      throw qlat::ConfigError({std::string("malformed JSON: ") + e.what()});
    }
    if (j.is_object()) {
      if (!o.out.empty()) j["output"]["directory"] = o.out;
      if (o.seed >= 0) j["seed"] = o.seed;
      if (o.budget >= 0) {
        const long long current = j.contains("budget") && j["budget"].contains("dense") && j["budget"]["dense"].is_number_integer()
                                      ? j["budget"]["dense"].get<long long>()
                                      : static_cast<long long>(qlat::Budget{}.dense);
        j["budget"]["dense"] = std::min(current, o.budget);
      }
    }
    const qlat::ExperimentConfig cfg = qlat::parse_config_text(j.dump(), experiment);
    const qlat::RunResult r = qlat::run_experiment(cfg);
    for (const auto& a : r.artifacts) std::cout << cfg.outDir << "/" << a << "\n";
    for (const auto& v : r.violations) std::cerr << "violation: " << v << "\n";
    return static_cast<int>(r.code);
  } catch (const qlat::ConfigError& e) {
    return report_config(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(qlat::ExitCode::contract);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heat-kernel phase experiments on small lattices"};
  app.set_version_flag("--version", std::string(qlat::kLibraryVersion));
  app.require_subcommand(1);

  Overrides o;
  std::string suite = "all";
  int code = 0;
  for (const char* name : {"kernel", "decompose", "mayer", "correlate", "thermo"}) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
    sub->add_option("--config", o.config, "JSON configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory (overrides output.directory)");
    sub->add_option("--seed", o.seed, "random seed (overrides seed)")->check(CLI::NonNegativeNumber);
    sub->add_option("--budget", o.budget, "cap on the dense grid dimension")->check(CLI::PositiveNumber);
    sub->callback([&, name] { code = run(name, o); });
  }
  CLI::App* verify = app.add_subcommand("verify", "run fast built-in oracle checks");
  verify->add_option("--suite", suite, "core, decay, cluster, thermo or all")
      ->check(CLI::IsMember({"core", "decay", "cluster", "thermo", "all"}));
  verify->callback([&] {
    try {
      bool ok = true;
      for (const auto& c : qlat::verify_suite(suite)) {
        std::printf("%s  %s  value=%.3e tol=%.1e\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.value, c.tolerance);
        ok = ok && c.passed;
      }
      code = ok ? 0 : static_cast<int>(qlat::ExitCode::contract);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      code = static_cast<int>(qlat::ExitCode::contract);
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(qlat::ExitCode::config);
  }
  return code;
}
