// contlab command-line front end. Talks to the shared library exclusively
// through the C API in contlab.h.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "contlab.h"

namespace {

struct ConfigHandle {
    contlab_config* ptr = nullptr;
    ~ConfigHandle() { contlab_config_free(ptr); }
};

struct StringHandle {
    char* ptr = nullptr;
    ~StringHandle() { contlab_string_free(ptr); }
};

int report_failure(const char* verb) {
    std::fprintf(stderr, "%s failed: %s\n", verb, contlab_last_error());
    return 1;
}

int load(const std::string& path, ConfigHandle& handle) {
    if (contlab_config_load(path.c_str(), &handle.ptr) != CONTLAB_OK) return report_failure("loading config");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"contlab — continual-learning experiments with dense function matching and "
                 "gradient credit assignment"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    bool force = false;
    int jobs = 1;

    CLI::App* run = app.add_subcommand("run", "execute every (order seed, seed) run of a config");
    run->add_option("config", config_path, "path to a JSON run configuration")->required();
    run->add_option("--out", out_dir, "output directory (overrides the config)");
    run->add_flag("--force", force, "write into a non-empty run directory");
    run->add_option("--jobs", jobs, "worker threads for independent runs")->check(CLI::PositiveNumber);

    CLI::App* audit = app.add_subcommand("audit-cost", "print matching counts for the configured scheme");
    audit->add_option("config", config_path, "path to a JSON run configuration")->required();

    CLI::App* validate = app.add_subcommand("validate", "parse a config and echo it with defaults applied");
    validate->add_option("config", config_path, "path to a JSON run configuration")->required();

    CLI11_PARSE(app, argc, argv);

    ConfigHandle config;
    if (int rc = load(config_path, config)) return rc;

    if (validate->parsed()) {
        StringHandle rendered{contlab_config_render(config.ptr)};
        if (!rendered.ptr) return report_failure("rendering config");
        StringHandle hash{contlab_config_hash(config.ptr)};
        if (!hash.ptr) return report_failure("hashing config");
        std::printf("%s", rendered.ptr);
        std::fprintf(stderr, "config ok, hash %s\n", hash.ptr);
        return 0;
    }

    if (audit->parsed()) {
        StringHandle table{contlab_audit_cost(config.ptr)};
        if (!table.ptr) return report_failure("auditing cost");
        std::printf("%s", table.ptr);
        return 0;
    }

    StringHandle run_dir;
    const contlab_status status = contlab_run(config.ptr, out_dir.empty() ? nullptr : out_dir.c_str(),
                                              force ? 1 : 0, jobs, &run_dir.ptr);
    if (status != CONTLAB_OK) {
        std::fprintf(stderr, "run failed (%s): %s\n", contlab_status_name(status), contlab_last_error());
        if (run_dir.ptr) std::fprintf(stderr, "partial outputs: %s\n", run_dir.ptr);
        return 1;
    }
    std::printf("wrote %s\n", run_dir.ptr);
    return 0;
}
