#include "slidr.h"

#include <cstring>
#include <string>

#include "slidr/config.hpp"
#include "slidr/pipeline.hpp"

struct slidr_ctx {
  slidr::RunConfig config = slidr::RunConfig::defaults();
  std::string out_dir = "out";
  std::string last_error;
};

namespace {

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <class Fn>
slidr_status guarded(slidr_ctx* ctx, Fn&& fn) {
  if (!ctx) return SLIDR_ERR_CONFIG;
  ctx->last_error.clear();
  try {
    fn();
    return SLIDR_OK;
  } catch (const slidr::Error& e) {
    ctx->last_error = e.what();
    return e.kind() == slidr::ErrorKind::config ? SLIDR_ERR_CONFIG : SLIDR_ERR_RUNTIME;
  } catch (const std::exception& e) {
    ctx->last_error = e.what();
    return SLIDR_ERR_RUNTIME;
  }
}

}  // namespace

extern "C" {

const char* slidr_version(void) { return "0.1.0"; }

char* slidr_default_config(void) {
  return dup_string(slidr::RunConfig::defaults().to_json_text());
}

void slidr_string_free(char* s) { delete[] s; }

slidr_ctx* slidr_ctx_new(void) { return new slidr_ctx; }

void slidr_ctx_free(slidr_ctx* ctx) { delete ctx; }

const char* slidr_ctx_error(const slidr_ctx* ctx) {
  return ctx ? ctx->last_error.c_str() : "";
}

slidr_status slidr_ctx_load_config(slidr_ctx* ctx, const char* path) {
  return guarded(ctx, [&] {
    if (!path) slidr::fail_config("config path is null");
    ctx->config = slidr::RunConfig::load(path);
  });
}

slidr_status slidr_ctx_config_text(slidr_ctx* ctx, const char* json_text) {
  return guarded(ctx, [&] {
    if (!json_text) slidr::fail_config("config text is null");
    ctx->config = slidr::RunConfig::from_json_text(json_text);
  });
}

slidr_status slidr_ctx_set(slidr_ctx* ctx, const char* key_path, const char* value) {
  return guarded(ctx, [&] {
    if (!key_path || !value) slidr::fail_config("--set needs key and value");
    ctx->config.set_path(key_path, value);
  });
}

slidr_status slidr_ctx_set_seed(slidr_ctx* ctx, uint64_t seed) {
  return guarded(ctx, [&] { ctx->config.seed = seed; });
}

slidr_status slidr_ctx_set_threads(slidr_ctx* ctx, int threads) {
  return guarded(ctx, [&] {
    if (threads < 1) slidr::fail_config("threads must be at least 1");
    ctx->config.threads = threads;
  });
}

slidr_status slidr_ctx_set_out_dir(slidr_ctx* ctx, const char* dir) {
  return guarded(ctx, [&] {
    if (!dir || !*dir) slidr::fail_config("output directory must not be empty");
    ctx->out_dir = dir;
  });
}

char* slidr_ctx_dump_config(slidr_ctx* ctx) {
  if (!ctx) return nullptr;
  return dup_string(ctx->config.to_json_text());
}

slidr_status slidr_ctx_run(slidr_ctx* ctx, const char* command) {
  return guarded(ctx, [&] {
    if (!command) slidr::fail_config("command is null");
    slidr::Pipeline pipeline(ctx->config, ctx->out_dir);
    pipeline.run(command);
  });
}

}  // extern "C"
