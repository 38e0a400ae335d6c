/*
 * contlab — C API for the continual-learning experiment library.
 *
 * All functionality is reached through an opaque configuration handle parsed
 * from a JSON document. Functions return CONTLAB_OK on success; on failure
 * they return a status code and store a message retrievable on the same
 * thread via contlab_last_error(). Strings returned by contlab_* functions
 * must be released with contlab_string_free().
 */
#ifndef CONTLAB_H
#define CONTLAB_H

#ifdef __cplusplus
extern "C" {
#endif

typedef struct contlab_config contlab_config;

typedef enum contlab_status {
    CONTLAB_OK = 0,
    CONTLAB_ERR_INVALID_ARG = 1, /* bad handle, dimension/index/range misuse */
    CONTLAB_ERR_CONFIG = 2,      /* configuration rejected by validation */
    CONTLAB_ERR_PARSE = 3,       /* malformed JSON, CSV row, or record */
    CONTLAB_ERR_IO = 4,          /* file system failure */
    CONTLAB_ERR_DATA = 5,        /* dataset violates a precondition */
    CONTLAB_ERR_NUMERIC = 6,     /* non-finite values during a run */
    CONTLAB_ERR_RUNTIME = 7      /* anything else */
} contlab_status;

/* Library version string, static storage. */
const char* contlab_version(void);

/* Human-readable name of a status code, static storage. */
const char* contlab_status_name(contlab_status status);

/* Message of the most recent failure on the calling thread, or "" if none.
 * Valid until the next failing contlab_* call on the same thread. */
const char* contlab_last_error(void);

/* Parses and validates a JSON configuration document. On success stores a
 * fresh handle in *out. */
contlab_status contlab_config_parse(const char* json_text, contlab_config** out);

/* Reads the file at `path` and parses it like contlab_config_parse. */
contlab_status contlab_config_load(const char* path, contlab_config** out);

void contlab_config_free(contlab_config* config);

/* Normalized JSON document with every default filled in. Caller frees. */
char* contlab_config_render(const contlab_config* config);

/* 16-hex-digit hash of the normalized document. Caller frees. */
char* contlab_config_hash(const contlab_config* config);

/* Matching-count audit for the configured scheme (CSV text, no training).
 * Caller frees. */
char* contlab_audit_cost(const contlab_config* config);

/* Runs every (class_order_seed, seed) combination and writes result files
 * under <out_dir>/<name>-<hash>/. out_dir may be NULL to use the directory
 * from the config. `force` permits writing into a non-empty run directory;
 * `jobs` caps worker threads (values < 1 mean 1). If run_dir_out is non-NULL
 * it receives the run directory path (caller frees) even when runs failed. */
contlab_status contlab_run(const contlab_config* config, const char* out_dir, int force, int jobs,
                           char** run_dir_out);

void contlab_string_free(char* text);

#ifdef __cplusplus
}
#endif

#endif /* CONTLAB_H */
