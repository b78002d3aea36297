/* C API for the slidr pipeline: opaque context handle, status codes, and
 * the pipeline commands. Status values double as process exit codes:
 * 0 success, 1 runtime failure, 2 configuration/usage error. */

#ifndef SLIDR_H
#define SLIDR_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum slidr_status {
  SLIDR_OK = 0,
  SLIDR_ERR_RUNTIME = 1,
  SLIDR_ERR_CONFIG = 2
} slidr_status;

typedef struct slidr_ctx slidr_ctx;

const char* slidr_version(void);

/* Default configuration as a JSON document. Free with slidr_string_free. */
char* slidr_default_config(void);
void slidr_string_free(char* s);

/* Fresh context with default configuration. Free with slidr_ctx_free. */
slidr_ctx* slidr_ctx_new(void);
void slidr_ctx_free(slidr_ctx* ctx);

/* Message of the last failed call on this context ("" if none). The
 * pointer stays valid until the next call on the same context. */
const char* slidr_ctx_error(const slidr_ctx* ctx);

slidr_status slidr_ctx_load_config(slidr_ctx* ctx, const char* path);
slidr_status slidr_ctx_config_text(slidr_ctx* ctx, const char* json_text);

/* Applies one key.path=value override (value parsed as JSON). */
slidr_status slidr_ctx_set(slidr_ctx* ctx, const char* key_path, const char* value);

slidr_status slidr_ctx_set_seed(slidr_ctx* ctx, uint64_t seed);
slidr_status slidr_ctx_set_threads(slidr_ctx* ctx, int threads);
slidr_status slidr_ctx_set_out_dir(slidr_ctx* ctx, const char* dir);

/* Current configuration as JSON. Free with slidr_string_free. */
char* slidr_ctx_dump_config(slidr_ctx* ctx);

/* command: gen | segment | pretrain | probe | simmap | gradcheck */
slidr_status slidr_ctx_run(slidr_ctx* ctx, const char* command);

#ifdef __cplusplus
}
#endif

#endif /* SLIDR_H */
