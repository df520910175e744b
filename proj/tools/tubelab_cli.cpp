#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tubelab/runner.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw tubelab::ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void print_summary(const tubelab::RunReport& r, const std::vector<std::filesystem::path>& files) {
  std::cout << r.experiment << " seed=" << r.seed << " wall_clock_s=" << tubelab::format_double(r.wall_clock_s) << "\n";
  for (const auto& [name, v] : r.certificates) std::cout << "  " << name << " = " << tubelab::format_double(v) << "\n";
  for (const auto& [name, ok] : r.verdicts) std::cout << "  " << (ok ? "PASS " : "FAIL ") << name << "\n";
  for (const auto& f : files) std::cout << "  wrote " << f.string() << "\n";
  std::cout << (r.pass() ? "PASS" : "FAIL") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tubelab experiment runner"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::vector<std::string> overrides;

  std::vector<CLI::App*> subs;
  for (auto e : {tubelab::Experiment::Concentration, tubelab::Experiment::Projector, tubelab::Experiment::Resolvent,
                 tubelab::Experiment::DampedWave, tubelab::Experiment::OscInt, tubelab::Experiment::SelfTest}) {
    auto* sub = app.add_subcommand(tubelab::to_string(e), "run the " + tubelab::to_string(e) + " experiment");
    sub->add_option("--config,-c", config_path, "key = value config file (defaults when omitted)");
    sub->add_option("--out,-o", out_dir, "output directory (overrides output.dir)");
    sub->add_option("--seed", seed, "seed (overrides the config)");
    sub->add_option("--set", overrides, "extra key=value override, repeatable");
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    const auto experiment = tubelab::parse_experiment(sub->get_name());
    auto cfg = tubelab::parse_config(config_path.empty() ? std::string() : read_file(config_path), experiment);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw tubelab::ConfigError("--set expects key=value, got '" + o + "'");
      cfg.set(tubelab::detail::trim(o.substr(0, eq)), o.substr(eq + 1));
    }
    if (sub->count("--seed") > 0) cfg.set("seed", std::to_string(seed));
    if (!out_dir.empty()) cfg.set("output.dir", out_dir);
    const auto report = tubelab::run(cfg);
    const auto files = tubelab::emit(report, cfg.output_dir());
    print_summary(report, files);
    return report.pass() ? 0 : 1;
  } catch (const tubelab::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const tubelab::ResolutionError& e) {
    std::cerr << "resolution error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
