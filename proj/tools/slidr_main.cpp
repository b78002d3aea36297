// slidr command-line front end; links only the C API.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slidr.h"

namespace {

int fail_with(slidr_ctx* ctx, slidr_status status) {
  std::fprintf(stderr, "error: %s\n", slidr_ctx_error(ctx));
  slidr_ctx_free(ctx);
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slidr: superpixel-driven image-to-Lidar contrastive distillation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(slidr_version()));

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", seed, "random seed override")
      ->each([&](const std::string&) { seed_given = true; });
  app.add_option("--threads", threads, "worker threads (default 1)");
  app.add_option("--set", overrides, "config override key.path=value (repeatable)");

  const char* commands[] = {"gen", "segment", "pretrain", "probe", "simmap", "gradcheck"};
  const char* descriptions[] = {
      "generate synthetic scene directories",
      "write superpixel partitions for every scene image",
      "train the 3D model and projection heads; writes checkpoint + loss CSV",
      "linear-probe the frozen trained features; writes metrics CSV",
      "write cosine similarity maps for a query point",
      "run the finite-difference gradient suite",
  };
  for (std::size_t i = 0; i < 6; ++i)
    app.add_subcommand(commands[i], descriptions[i])->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    // usage problems map to exit code 2; --help/--version exit 0
    return code == 0 ? 0 : 2;
  }

  slidr_ctx* ctx = slidr_ctx_new();
  if (!config_path.empty()) {
    const slidr_status s = slidr_ctx_load_config(ctx, config_path.c_str());
    if (s != SLIDR_OK) return fail_with(ctx, s);
  }
  for (const std::string& kv : overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key.path=value, got '%s'\n",
                   kv.c_str());
      slidr_ctx_free(ctx);
      return 2;
    }
    const slidr_status s = slidr_ctx_set(ctx, kv.substr(0, eq).c_str(),
                                         kv.substr(eq + 1).c_str());
    if (s != SLIDR_OK) return fail_with(ctx, s);
  }
  if (seed_given) {
    const slidr_status s = slidr_ctx_set_seed(ctx, seed);
    if (s != SLIDR_OK) return fail_with(ctx, s);
  }
  if (threads > 0) {
    const slidr_status s = slidr_ctx_set_threads(ctx, threads);
    if (s != SLIDR_OK) return fail_with(ctx, s);
  }
  {
    const slidr_status s = slidr_ctx_set_out_dir(ctx, out_dir.c_str());
    if (s != SLIDR_OK) return fail_with(ctx, s);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const slidr_status s = slidr_ctx_run(ctx, command.c_str());
  if (s != SLIDR_OK) return fail_with(ctx, s);
  slidr_ctx_free(ctx);
  return 0;
}
