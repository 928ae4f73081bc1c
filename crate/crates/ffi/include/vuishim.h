#ifndef VUISHIM_H
#define VUISHIM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum VsStatus {
  VS_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  VS_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  VS_STATUS_INVALID_UTF8 = 2,
  /**
   * An argument was rejected (empty utterance, bad lexicon, bad config).
   */
  VS_STATUS_INVALID_ARGUMENT = 3,
  /**
   * A Rust panic was caught at the boundary; the handle may be unusable.
   */
  VS_STATUS_PANIC = 4,
} VsStatus;

/**
 * A configured rule normalizer. Safe to share across threads for reading.
 */
typedef struct VsNormalizer VsNormalizer;

/**
 * One editing session. Not thread-safe; use from one thread at a time.
 */
typedef struct VsSession VsSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *vs_last_error(void);

/**
 * Library version as a static string.
 */
const char *vs_version(void);

/**
 * Creates a normalizer. `lexicon_toml` may be NULL for the built-in
 * lexicon; `threshold` above 100 keeps the lexicon's own threshold.
 *
 * # Safety
 * `lexicon_toml` is NULL or a valid NUL-terminated string; `out` is valid
 * for one pointer write.
 */
enum VsStatus vs_normalizer_new(const char *lexicon_toml,
                                uint32_t threshold,
                                struct VsNormalizer **out);

/**
 * # Safety
 * `normalizer` is NULL or a handle from [`vs_normalizer_new`] not yet freed.
 */
void vs_normalizer_free(struct VsNormalizer *normalizer);

/**
 * Normalizes one utterance and writes the result as a JSON object.
 * `selection` may be NULL. Free `*out_json` with [`vs_string_free`].
 *
 * # Safety
 * `normalizer` is a live handle; string arguments are NULL or valid
 * NUL-terminated strings; `out_json` is valid for one pointer write.
 */
enum VsStatus vs_normalize(const struct VsNormalizer *normalizer,
                           const char *utterance,
                           const char *selection,
                           char **out_json);

/**
 * Opens a session on `initial_text`. `normalizer` may be NULL for the
 * default rules; `config_json` may be NULL for default settings.
 *
 * # Safety
 * `normalizer` is NULL or a live handle; string arguments are NULL or valid
 * NUL-terminated strings; `out` is valid for one pointer write.
 */
enum VsStatus vs_session_open(const struct VsNormalizer *normalizer,
                              const char *initial_text,
                              const char *config_json,
                              struct VsSession **out);

/**
 * # Safety
 * `session` is NULL or a handle from [`vs_session_open`] not yet freed.
 */
void vs_session_free(struct VsSession *session);

/**
 * Handles one utterance (or the answer to a pending question) and writes
 * the resulting events as newline-delimited JSON.
 *
 * # Safety
 * `session` is a live handle; `text` is a valid NUL-terminated string;
 * `out_ndjson` is valid for one pointer write.
 */
enum VsStatus vs_session_utter(struct VsSession *session, const char *text, char **out_ndjson);

/**
 * Writes the current buffer text.
 *
 * # Safety
 * `session` is a live handle; `out_text` is valid for one pointer write.
 */
enum VsStatus vs_session_buffer(const struct VsSession *session, char **out_text);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` is NULL or a string from this library not yet freed.
 */
void vs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VUISHIM_H */
