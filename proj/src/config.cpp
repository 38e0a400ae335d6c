#include "contlab/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace contlab {

namespace {

using Json = nlohmann::ordered_json;

// Wraps a JSON object so every access is tracked; leftover keys are reported
// with their full path.
class Section {
public:
    Section(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) fail(Errc::config, path_ + ": expected an object");
    }

    bool has(const std::string& key) {
        touched_.insert(key);
        return node_.contains(key);
    }

    const Json& raw(const std::string& key) {
        touched_.insert(key);
        return node_.at(key);
    }

    std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    template <typename T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) return fallback;
        return convert<T>(raw(key), child_path(key));
    }

    template <typename T>
    T require(const std::string& key) {
        if (!has(key)) fail(Errc::config, "missing required key '" + child_path(key) + "'");
        return convert<T>(raw(key), child_path(key));
    }

    void finish() const {
        for (auto it = node_.begin(); it != node_.end(); ++it) {
            if (!touched_.count(it.key()))
                fail(Errc::config, "unknown key '" + child_path(it.key()) + "'");
        }
    }

    template <typename T>
    static T convert(const Json& value, const std::string& path) {
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!value.is_number()) throw std::runtime_error("not a number");
            } else if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
                if (!value.is_number_integer() && !value.is_number_unsigned())
                    throw std::runtime_error("not an integer");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!value.is_boolean()) throw std::runtime_error("not a boolean");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!value.is_string()) throw std::runtime_error("not a string");
            }
            return value.get<T>();
        } catch (const std::exception&) {
            fail(Errc::config, "key '" + path + "' has the wrong type");
        }
    }

private:
    const Json& node_;
    std::string path_;
    std::set<std::string> touched_;
};

template <typename T>
std::vector<T> get_list(Section& section, const std::string& key, std::vector<T> fallback) {
    if (!section.has(key)) return fallback;
    const Json& value = section.raw(key);
    const std::string path = section.child_path(key);
    if (!value.is_array() || value.empty()) fail(Errc::config, "key '" + path + "' must be a non-empty array");
    std::vector<T> out;
    for (const auto& item : value) out.push_back(Section::convert<T>(item, path));
    return out;
}

MatchingScheme parse_scheme(Section& parent) {
    if (!parent.has("scheme")) fail(Errc::config, "missing required key 'scheme'");
    Section section(parent.raw("scheme"), "scheme");
    MatchingScheme scheme;
    scheme.kind = scheme_kind_from_name(section.require<std::string>("kind"));
    switch (scheme.kind) {
        case SchemeKind::prefix_plus_last:
        case SchemeKind::prefix_only:
            scheme.fraction = section.require<double>("fraction");
            if (!(scheme.fraction > 0.0 && scheme.fraction <= 1.0))
                fail(Errc::config, "key 'scheme.fraction' must be in (0, 1]");
            break;
        case SchemeKind::interval:
            scheme.step = section.require<int>("step");
            if (scheme.step < 2) fail(Errc::config, "key 'scheme.step' must be >= 2");
            break;
        case SchemeKind::random_subset:
            scheme.count = section.require<int>("count");
            scheme.seed = section.get<std::uint64_t>("seed", 0);
            if (scheme.count < 1) fail(Errc::config, "key 'scheme.count' must be >= 1");
            break;
        case SchemeKind::single_function:
            scheme.index = section.require<int>("index");
            if (scheme.index < 1) fail(Errc::config, "key 'scheme.index' must be >= 1");
            break;
        default:
            break;
    }
    section.finish();
    return scheme;
}

UpdateRule::Kind parse_optimizer(Section& parent) {
    if (!parent.has("optimizer")) return SgdRule{};
    Section section(parent.raw("optimizer"), "optimizer");
    const std::string kind = section.get<std::string>("kind", "sgd");
    UpdateRule::Kind rule;
    if (kind == "sgd") {
        SgdRule sgd;
        sgd.lr = section.get<double>("lr", sgd.lr);
        if (!(sgd.lr > 0.0)) fail(Errc::config, "key 'optimizer.lr' must be positive");
        rule = sgd;
    } else if (kind == "adam") {
        AdamRule adam;
        adam.lr = section.get<double>("lr", adam.lr);
        adam.beta1 = section.get<double>("beta1", adam.beta1);
        adam.beta2 = section.get<double>("beta2", adam.beta2);
        adam.eps = section.get<double>("eps", adam.eps);
        rule = adam;
    } else if (kind == "rmsprop") {
        RmspropRule rms;
        rms.lr = section.get<double>("lr", rms.lr);
        rms.decay = section.get<double>("decay", rms.decay);
        rms.eps = section.get<double>("eps", rms.eps);
        rule = rms;
    } else if (kind == "adadelta") {
        AdadeltaRule ada;
        ada.decay = section.get<double>("decay", ada.decay);
        ada.eps = section.get<double>("eps", ada.eps);
        rule = ada;
    } else {
        fail(Errc::config, "key 'optimizer.kind': unknown optimizer '" + kind + "'");
    }
    section.finish();
    return rule;
}

}  // namespace

int RunConfig::classes_per_task() const {
    if (const auto* blobs = std::get_if<BlobsDatasetConfig>(&dataset)) return blobs->params.classes_per_task;
    return std::get<CsvDatasetConfig>(dataset).classes_per_task;
}

TaskStream RunConfig::make_stream(std::uint64_t class_order_seed) const {
    if (const auto* blobs = std::get_if<BlobsDatasetConfig>(&dataset))
        return make_blobs_stream(blobs->params, class_order_seed);
    const auto& csv = std::get<CsvDatasetConfig>(dataset);
    return load_csv_stream(csv.path, csv.classes_per_task, class_order_seed, csv.train_fraction, csv.split_seed);
}

RunOptions RunConfig::make_run_options(std::uint64_t seed) const {
    RunOptions options;
    options.net_spec.hidden_dims = hidden_dims;
    options.net_spec.activation = activation;
    options.scheme = scheme;
    options.update_rule = update_rule;
    options.credit_enabled = credit_enabled;
    options.project_newer = project_newer;
    options.epochs_first = epochs_first;
    options.epochs_rest = epochs_rest;
    options.batch_size = batch_size;
    options.seed = seed;
    options.match.kl_weight = kl_weight;
    options.match.temperature = temperature;
    options.match.normalize_kl = normalize_kl;
    options.log_every = log_every;
    return options;
}

RunConfig parse_config(const std::string& text) {
    Json root_json;
    try {
        root_json = Json::parse(text);
    } catch (const std::exception& e) {
        fail(Errc::parse, std::string("config: invalid JSON: ") + e.what());
    }
    Section root(root_json, "");
    RunConfig config;

    config.name = root.get<std::string>("name", config.name);

    {
        if (!root.has("dataset")) fail(Errc::config, "missing required key 'dataset'");
        Section section(root.raw("dataset"), "dataset");
        const std::string kind = section.require<std::string>("kind");
        if (kind == "blobs") {
            BlobsDatasetConfig blobs;
            BlobsParams& p = blobs.params;
            p.num_classes = section.get<int>("num_classes", p.num_classes);
            p.classes_per_task = section.get<int>("classes_per_task", p.classes_per_task);
            p.feature_dim = section.get<int>("feature_dim", p.feature_dim);
            p.train_per_class = section.get<int>("train_per_class", p.train_per_class);
            p.test_per_class = section.get<int>("test_per_class", p.test_per_class);
            p.cluster_spread = section.get<double>("cluster_spread", p.cluster_spread);
            p.data_seed = section.get<std::uint64_t>("data_seed", p.data_seed);
            if (p.num_classes <= 0 || p.classes_per_task <= 0 || p.num_classes % p.classes_per_task != 0)
                fail(Errc::config, "key 'dataset.num_classes' must be divisible by 'dataset.classes_per_task'");
            config.dataset = blobs;
        } else if (kind == "csv") {
            CsvDatasetConfig csv;
            csv.path = section.require<std::string>("path");
            csv.classes_per_task = section.require<int>("classes_per_task");
            csv.train_fraction = section.get<double>("train_fraction", csv.train_fraction);
            csv.split_seed = section.get<std::uint64_t>("split_seed", csv.split_seed);
            if (csv.classes_per_task <= 0) fail(Errc::config, "key 'dataset.classes_per_task' must be positive");
            if (!(csv.train_fraction > 0.0 && csv.train_fraction < 1.0))
                fail(Errc::config, "key 'dataset.train_fraction' must be in (0, 1)");
            config.dataset = csv;
        } else {
            fail(Errc::config, "key 'dataset.kind': unknown dataset '" + kind + "'");
        }
        section.finish();
    }

    if (root.has("stream")) {
        Section section(root.raw("stream"), "stream");
        config.class_order_seeds =
            get_list<std::uint64_t>(section, "class_order_seeds", config.class_order_seeds);
        section.finish();
    }

    if (root.has("model")) {
        Section section(root.raw("model"), "model");
        config.hidden_dims = get_list<int>(section, "hidden_dims", config.hidden_dims);
        for (int h : config.hidden_dims)
            if (h <= 0) fail(Errc::config, "key 'model.hidden_dims' entries must be positive");
        const std::string act = section.get<std::string>("activation", "tanh");
        if (act == "relu")
            config.activation = Activation::relu;
        else if (act == "tanh")
            config.activation = Activation::tanh;
        else
            fail(Errc::config, "key 'model.activation': unknown activation '" + act + "'");
        section.finish();
    }

    config.scheme = parse_scheme(root);
    config.update_rule = parse_optimizer(root);

    if (root.has("credit")) {
        Section section(root.raw("credit"), "credit");
        config.credit_enabled = section.get<bool>("enabled", config.credit_enabled);
        config.project_newer = section.get<bool>("project_newer", config.project_newer);
        section.finish();
    }

    if (root.has("training")) {
        Section section(root.raw("training"), "training");
        config.epochs_first = section.get<int>("epochs_first", config.epochs_first);
        config.epochs_rest = section.get<int>("epochs_rest", config.epochs_rest);
        config.batch_size = section.get<int>("batch_size", config.batch_size);
        config.kl_weight = section.get<double>("lambda", config.kl_weight);
        config.temperature = section.get<double>("temperature", config.temperature);
        config.normalize_kl = section.get<bool>("normalize_kl", config.normalize_kl);
        config.log_every = section.get<int>("log_every", config.log_every);
        if (config.epochs_first < 1 || config.epochs_rest < 1)
            fail(Errc::config, "key 'training.epochs_*' must be >= 1");
        if (config.batch_size < 1) fail(Errc::config, "key 'training.batch_size' must be >= 1");
        if (config.kl_weight < 0.0) fail(Errc::config, "key 'training.lambda' must be non-negative");
        if (!(config.temperature > 0.0)) fail(Errc::config, "key 'training.temperature' must be positive");
        if (config.log_every < 0) fail(Errc::config, "key 'training.log_every' must be >= 0");
        section.finish();
    }

    config.seeds = get_list<std::uint64_t>(root, "seeds", config.seeds);

    if (root.has("output")) {
        Section section(root.raw("output"), "output");
        config.output_dir = section.get<std::string>("dir", config.output_dir);
        section.finish();
    }

    root.finish();
    return config;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::io, "config: cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

std::string render_config(const RunConfig& config) {
    Json root;
    root["name"] = config.name;

    Json dataset;
    if (const auto* blobs = std::get_if<BlobsDatasetConfig>(&config.dataset)) {
        const BlobsParams& p = blobs->params;
        dataset["kind"] = "blobs";
        dataset["num_classes"] = p.num_classes;
        dataset["classes_per_task"] = p.classes_per_task;
        dataset["feature_dim"] = p.feature_dim;
        dataset["train_per_class"] = p.train_per_class;
        dataset["test_per_class"] = p.test_per_class;
        dataset["cluster_spread"] = p.cluster_spread;
        dataset["data_seed"] = p.data_seed;
    } else {
        const auto& csv = std::get<CsvDatasetConfig>(config.dataset);
        dataset["kind"] = "csv";
        dataset["path"] = csv.path;
        dataset["classes_per_task"] = csv.classes_per_task;
        dataset["train_fraction"] = csv.train_fraction;
        dataset["split_seed"] = csv.split_seed;
    }
    root["dataset"] = dataset;

    root["stream"] = Json{{"class_order_seeds", config.class_order_seeds}};
    root["model"] = Json{{"hidden_dims", config.hidden_dims},
                         {"activation", config.activation == Activation::relu ? "relu" : "tanh"}};

    Json scheme;
    scheme["kind"] = scheme_kind_name(config.scheme.kind);
    switch (config.scheme.kind) {
        case SchemeKind::prefix_plus_last:
        case SchemeKind::prefix_only:
            scheme["fraction"] = config.scheme.fraction;
            break;
        case SchemeKind::interval:
            scheme["step"] = config.scheme.step;
            break;
        case SchemeKind::random_subset:
            scheme["count"] = config.scheme.count;
            scheme["seed"] = config.scheme.seed;
            break;
        case SchemeKind::single_function:
            scheme["index"] = config.scheme.index;
            break;
        default:
            break;
    }
    root["scheme"] = scheme;

    Json optimizer;
    if (const auto* sgd = std::get_if<SgdRule>(&config.update_rule)) {
        optimizer = Json{{"kind", "sgd"}, {"lr", sgd->lr}};
    } else if (const auto* adam = std::get_if<AdamRule>(&config.update_rule)) {
        optimizer = Json{{"kind", "adam"}, {"lr", adam->lr}, {"beta1", adam->beta1},
                         {"beta2", adam->beta2}, {"eps", adam->eps}};
    } else if (const auto* rms = std::get_if<RmspropRule>(&config.update_rule)) {
        optimizer = Json{{"kind", "rmsprop"}, {"lr", rms->lr}, {"decay", rms->decay}, {"eps", rms->eps}};
    } else {
        const auto& ada = std::get<AdadeltaRule>(config.update_rule);
        optimizer = Json{{"kind", "adadelta"}, {"decay", ada.decay}, {"eps", ada.eps}};
    }
    root["optimizer"] = optimizer;

    root["credit"] = Json{{"enabled", config.credit_enabled}, {"project_newer", config.project_newer}};
    root["training"] = Json{{"epochs_first", config.epochs_first}, {"epochs_rest", config.epochs_rest},
                            {"batch_size", config.batch_size},     {"lambda", config.kl_weight},
                            {"temperature", config.temperature},   {"normalize_kl", config.normalize_kl},
                            {"log_every", config.log_every}};
    root["seeds"] = config.seeds;
    root["output"] = Json{{"dir", config.output_dir}};
    return root.dump(2) + "\n";
}

std::string config_hash(const RunConfig& config) {
    const std::string rendered = render_config(config);
    return to_hex(fnv1a(rendered.data(), rendered.size()));
}

}  // namespace contlab
