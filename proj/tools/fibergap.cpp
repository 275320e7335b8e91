// Command-line front end; talks to the library only through the C API.
#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "fibergap/fibergap.h"

namespace {

int exit_code(fg_status s) {
  if (s == FG_OK) return 0;
  if (s == FG_CONFIG_ERROR) return 2;
  return 1;
}

int report(fg_status s) {
  if (s != FG_OK) std::fprintf(stderr, "fibergap: %s: %s\n", fg_status_name(s), fg_last_error());
  return exit_code(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fibergap: transfer operators of skew products with contracting fibers"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  unsigned threads = 0;

  auto* run = app.add_subcommand("run", "run the experiment described by a config");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--out", out_dir, "output directory (FIBERGAP_OUT overrides)");
  run->add_option("--threads", threads, "worker cap (0 = hardware)");

  auto* validate = app.add_subcommand("validate", "parse and validate a config");
  validate->add_option("config", config_path, "config file")->required();

  auto* selftest = app.add_subcommand("selftest", "norm-oracle property suite");
  selftest->add_option("--threads", threads, "worker cap (0 = hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (threads) fg_set_threads(threads);

  if (*validate) {
    const fg_status s = fg_validate_config(config_path.c_str());
    if (s == FG_OK) std::printf("ok\n");
    return report(s);
  }
  if (*selftest) {
    char* table = nullptr;
    const fg_status s = fg_selftest(&table);
    if (table) std::fputs(table, stdout);
    fg_string_free(table);
    return report(s);
  }

  if (const char* env = std::getenv("FIBERGAP_OUT"); env && *env) out_dir = env;
  char* manifest = nullptr;
  const fg_status s = fg_run_experiment(config_path.c_str(), out_dir.empty() ? nullptr : out_dir.c_str(), &manifest);
  if (manifest) std::fputs(manifest, stdout);
  fg_string_free(manifest);
  return report(s);
}
