#include "contlab.h"

#include <cstring>
#include <string>

#include "contlab/runner.hpp"

struct contlab_config {
    contlab::RunConfig config;
};

namespace {

thread_local std::string g_last_error;

contlab_status status_from(const contlab::Error& e) {
    using contlab::Errc;
    switch (e.code()) {
        case Errc::config: return CONTLAB_ERR_CONFIG;
        case Errc::parse: return CONTLAB_ERR_PARSE;
        case Errc::io: return CONTLAB_ERR_IO;
        case Errc::data: return CONTLAB_ERR_DATA;
        case Errc::numeric: return CONTLAB_ERR_NUMERIC;
        case Errc::dimension:
        case Errc::index:
        case Errc::range:
        case Errc::sequencing: return CONTLAB_ERR_INVALID_ARG;
        default: return CONTLAB_ERR_RUNTIME;
    }
}

contlab_status set_error(contlab_status status, const std::string& message) {
    g_last_error = message;
    return status;
}

char* dup_string(const std::string& text) {
    char* out = new char[text.size() + 1];
    std::memcpy(out, text.c_str(), text.size() + 1);
    return out;
}

template <typename Fn>
contlab_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return CONTLAB_OK;
    } catch (const contlab::Error& e) {
        return set_error(status_from(e), e.what());
    } catch (const std::exception& e) {
        return set_error(CONTLAB_ERR_RUNTIME, e.what());
    }
}

template <typename Fn>
char* guarded_string(Fn&& fn) {
    try {
        char* out = dup_string(fn());
        g_last_error.clear();
        return out;
    } catch (const contlab::Error& e) {
        set_error(status_from(e), e.what());
        return nullptr;
    } catch (const std::exception& e) {
        set_error(CONTLAB_ERR_RUNTIME, e.what());
        return nullptr;
    }
}

}  // namespace

extern "C" {

const char* contlab_version(void) { return "0.1.0"; }

const char* contlab_status_name(contlab_status status) {
    switch (status) {
        case CONTLAB_OK: return "ok";
        case CONTLAB_ERR_INVALID_ARG: return "invalid_arg";
        case CONTLAB_ERR_CONFIG: return "config";
        case CONTLAB_ERR_PARSE: return "parse";
        case CONTLAB_ERR_IO: return "io";
        case CONTLAB_ERR_DATA: return "data";
        case CONTLAB_ERR_NUMERIC: return "numeric";
        case CONTLAB_ERR_RUNTIME: return "runtime";
    }
    return "unknown";
}

const char* contlab_last_error(void) { return g_last_error.c_str(); }

contlab_status contlab_config_parse(const char* json_text, contlab_config** out) {
    if (!json_text || !out) return set_error(CONTLAB_ERR_INVALID_ARG, "null argument");
    *out = nullptr;
    return guarded([&] { *out = new contlab_config{contlab::parse_config(json_text)}; });
}

contlab_status contlab_config_load(const char* path, contlab_config** out) {
    if (!path || !out) return set_error(CONTLAB_ERR_INVALID_ARG, "null argument");
    *out = nullptr;
    return guarded([&] { *out = new contlab_config{contlab::load_config_file(path)}; });
}

void contlab_config_free(contlab_config* config) { delete config; }

char* contlab_config_render(const contlab_config* config) {
    if (!config) {
        set_error(CONTLAB_ERR_INVALID_ARG, "null config");
        return nullptr;
    }
    return guarded_string([&] { return contlab::render_config(config->config); });
}

char* contlab_config_hash(const contlab_config* config) {
    if (!config) {
        set_error(CONTLAB_ERR_INVALID_ARG, "null config");
        return nullptr;
    }
    return guarded_string([&] { return contlab::config_hash(config->config); });
}

char* contlab_audit_cost(const contlab_config* config) {
    if (!config) {
        set_error(CONTLAB_ERR_INVALID_ARG, "null config");
        return nullptr;
    }
    return guarded_string([&] { return contlab::audit_cost(config->config); });
}

contlab_status contlab_run(const contlab_config* config, const char* out_dir, int force, int jobs,
                           char** run_dir_out) {
    if (!config) return set_error(CONTLAB_ERR_INVALID_ARG, "null config");
    if (run_dir_out) *run_dir_out = nullptr;
    contlab::ExperimentOptions options;
    options.out_dir = out_dir ? out_dir : "";
    options.force = force != 0;
    options.jobs = jobs < 1 ? 1 : jobs;
    return guarded([&] {
        try {
            contlab::ExperimentSummary summary = contlab::run_experiment(config->config, options);
            if (run_dir_out) *run_dir_out = dup_string(summary.run_dir);
        } catch (const contlab::Error&) {
            // The run directory is still useful for locating the failure
            // marker and any retained partial outputs.
            if (run_dir_out) {
                const std::string dir =
                    (options.out_dir.empty() ? config->config.output_dir : options.out_dir) + "/" +
                    config->config.name + "-" + contlab::config_hash(config->config);
                *run_dir_out = dup_string(dir);
            }
            throw;
        }
    });
}

void contlab_string_free(char* text) { delete[] text; }

}  // extern "C"
