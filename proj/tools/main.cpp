#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "csaes/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Large-population CSA-ES with adaptive population control"};
  app.set_version_flag("--version", csaes::kToolVersion);
  app.require_subcommand(1);

  int workers = csaes::default_workers();
  app.add_option("--workers", workers, "Parallel trial workers (default: CSAES_WORKERS or hardware threads)")
      ->check(CLI::PositiveNumber);

  struct Sub {
    CLI::App* app;
    std::string config_path;
    std::map<std::string, std::string> flags;
  };
  std::map<std::string, Sub> subs;
  for (const auto& [name, fn] : csaes::subcommands()) {
    Sub& s = subs[name];
    s.app = app.add_subcommand(name);
    s.app->add_option("--config", s.config_path, "key = value config file");
    for (const auto& key : csaes::config_keys()) {
      if (key == "experiment") continue;
      s.app->add_option("--" + key, s.flags[key]);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  for (auto& [name, s] : subs) {
    if (!s.app->parsed()) continue;
    csaes::RunConfig cfg;
    try {
      csaes::ConfigEntries entries;
      if (!s.config_path.empty()) {
        std::ifstream in(s.config_path);
        if (!in) {
          std::cerr << "cannot read config file " << s.config_path << '\n';
          return 1;
        }
        std::stringstream buf;
        buf << in.rdbuf();
        entries = csaes::parse_entries(buf.str());
      }
      for (const auto& [key, value] : s.flags)
        if (s.app->count("--" + key) > 0) entries.emplace_back(key, value);
      entries.emplace_back("experiment", name);
      cfg = csaes::resolve_config(entries);
    } catch (const csaes::ConfigError& e) {
      std::cerr << e.what() << '\n';
      return 1;
    }
    return csaes::run_command(name, cfg, workers, std::cerr);
  }
  return 1;
}
