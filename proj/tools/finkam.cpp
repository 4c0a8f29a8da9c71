#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "finkam/cli.hpp"
#include "finkam/errors.hpp"

namespace {

constexpr int kUsage = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw finkam::IoError("cannot open config " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constructive KAM experiments: schedules, smoothing, Diophantine measure, KAM runs, Duffing networks"};
  app.require_subcommand(1);
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<double> slack;
  app.add_option("--config", config, "JSON configuration document")->required();
  app.add_option("--out", out, "output directory (overrides the document and $FINKAM_OUT)");
  app.add_option("--seed", seed, "random seed (overrides the document)");
  app.add_option("--slack", slack, "slack factor for the norm checks (overrides the document)");
  for (const auto& name : finkam::cli::kSubcommands) app.add_subcommand(name)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  try {
    std::optional<std::string> env_out;
    if (const char* v = std::getenv(finkam::cli::kOutEnv)) env_out = v;
    const auto val = finkam::cli::parse_and_validate_text(sub, read_file(config), {seed, slack, out}, env_out);
    if (!val.ok()) {
      std::cerr << "invalid configuration:\n" << val.report();
      return static_cast<int>(finkam::Error::Family::Input);
    }
    const auto result = finkam::cli::run_experiment(*val.config);
    finkam::cli::write_outputs(result, val.config->out);
    std::cout << sub << ": wrote " << val.config->out << "/summary.json (config " << val.config->hash << ")\n";
    return 0;
  } catch (const finkam::Error& e) {
    std::cerr << sub << " failed: " << e.what() << "\n";
    return static_cast<int>(e.family());
  } catch (const std::exception& e) {
    std::cerr << sub << " failed: " << e.what() << "\n";
    return 1;
  }
}
