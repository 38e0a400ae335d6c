#include "contlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace contlab {

std::vector<int> TaskStream::class_order() const {
    std::vector<int> order;
    for (const Task& task : tasks) order.insert(order.end(), task.class_ids.begin(), task.class_ids.end());
    return order;
}

namespace {

std::vector<int> permuted_classes(int num_classes, std::uint64_t class_order_seed) {
    std::vector<int> order(static_cast<std::size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) order[static_cast<std::size_t>(c)] = c;
    Rng rng = Rng::keyed({0x6f726465u, class_order_seed});
    for (std::size_t i = order.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

TaskStream chunk_into_tasks(std::vector<std::vector<Sample>> train_per_class,
                            std::vector<std::vector<Sample>> test_per_class, int feature_dim,
                            int classes_per_task, std::uint64_t class_order_seed) {
    const int num_classes = static_cast<int>(train_per_class.size());
    if (classes_per_task <= 0 || num_classes % classes_per_task != 0)
        fail(Errc::config, "task stream: num_classes must be divisible by classes_per_task");

    TaskStream stream;
    stream.class_order_seed = class_order_seed;
    stream.feature_dim = feature_dim;
    stream.num_classes = num_classes;

    const std::vector<int> order = permuted_classes(num_classes, class_order_seed);
    const int num_tasks = num_classes / classes_per_task;
    for (int t = 0; t < num_tasks; ++t) {
        Task task;
        task.task_id = t + 1;
        task.train.feature_dim = feature_dim;
        task.train.num_classes = num_classes;
        task.test.feature_dim = feature_dim;
        task.test.num_classes = num_classes;
        for (int k = 0; k < classes_per_task; ++k) {
            const int cls = order[static_cast<std::size_t>(t * classes_per_task + k)];
            task.class_ids.push_back(cls);
            auto& train_src = train_per_class[static_cast<std::size_t>(cls)];
            auto& test_src = test_per_class[static_cast<std::size_t>(cls)];
            task.train.samples.insert(task.train.samples.end(), train_src.begin(), train_src.end());
            task.test.samples.insert(task.test.samples.end(), test_src.begin(), test_src.end());
        }
        stream.tasks.push_back(std::move(task));
    }
    return stream;
}

}  // namespace

TaskStream make_blobs_stream(const BlobsParams& params, std::uint64_t class_order_seed) {
    if (params.num_classes <= 0 || params.feature_dim <= 0 || params.train_per_class <= 0 ||
        params.test_per_class <= 0)
        fail(Errc::config, "blobs: sizes must be positive");
    if (!(params.cluster_spread >= 0.0)) fail(Errc::config, "blobs: cluster_spread must be non-negative");
    if (params.classes_per_task <= 0 || params.num_classes % params.classes_per_task != 0)
        fail(Errc::config, "blobs: num_classes must be divisible by classes_per_task");

    std::vector<std::vector<Sample>> train_per_class(static_cast<std::size_t>(params.num_classes));
    std::vector<std::vector<Sample>> test_per_class(static_cast<std::size_t>(params.num_classes));

    for (int cls = 0; cls < params.num_classes; ++cls) {
        Rng center_rng = Rng::keyed({0x63656e74u, params.data_seed, static_cast<std::uint64_t>(cls)});
        Vec center(static_cast<std::size_t>(params.feature_dim));
        for (double& c : center) c = center_rng.uniform(-1.0, 1.0);

        Rng sample_rng = Rng::keyed({0x73616d70u, params.data_seed, static_cast<std::uint64_t>(cls)});
        auto draw = [&](std::vector<Sample>& dst, int count) {
            for (int i = 0; i < count; ++i) {
                Sample s;
                s.label = cls;
                s.features.resize(static_cast<std::size_t>(params.feature_dim));
                for (int d = 0; d < params.feature_dim; ++d)
                    s.features[static_cast<std::size_t>(d)] =
                        center[static_cast<std::size_t>(d)] + params.cluster_spread * sample_rng.normal();
                dst.push_back(std::move(s));
            }
        };
        draw(train_per_class[static_cast<std::size_t>(cls)], params.train_per_class);
        draw(test_per_class[static_cast<std::size_t>(cls)], params.test_per_class);
    }

    return chunk_into_tasks(std::move(train_per_class), std::move(test_per_class), params.feature_dim,
                            params.classes_per_task, class_order_seed);
}

TaskStream load_csv_stream(const std::string& path, int classes_per_task, std::uint64_t class_order_seed,
                           double train_fraction, std::uint64_t split_seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        fail(Errc::config, "csv stream: train_fraction must be in (0, 1)");
    std::ifstream in(path);
    if (!in) fail(Errc::io, "csv stream: cannot open " + path);

    std::map<int, std::vector<Sample>> by_class;
    int feature_dim = -1;
    int max_label = -1;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> fields;
        std::stringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) {
            try {
                std::size_t used = 0;
                double value = std::stod(cell, &used);
                while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
                if (used != cell.size()) throw std::invalid_argument(cell);
                fields.push_back(value);
            } catch (const std::exception&) {
                fail(Errc::parse, "csv stream: line " + std::to_string(line_no) + ": bad field '" + cell + "'");
            }
        }
        if (fields.size() < 2)
            fail(Errc::parse, "csv stream: line " + std::to_string(line_no) + ": need features and a label");
        double label_field = fields.back();
        fields.pop_back();
        if (label_field < 0 || label_field != std::floor(label_field))
            fail(Errc::parse, "csv stream: line " + std::to_string(line_no) + ": label must be a non-negative integer");
        if (feature_dim == -1) feature_dim = static_cast<int>(fields.size());
        if (static_cast<int>(fields.size()) != feature_dim)
            fail(Errc::parse, "csv stream: line " + std::to_string(line_no) + ": inconsistent feature count");
        for (double f : fields)
            if (!std::isfinite(f))
                fail(Errc::parse, "csv stream: line " + std::to_string(line_no) + ": non-finite feature");
        Sample s;
        s.features.assign(fields.begin(), fields.end());
        s.label = static_cast<int>(label_field);
        max_label = std::max(max_label, s.label);
        by_class[s.label].push_back(std::move(s));
    }
    if (by_class.empty()) fail(Errc::data, "csv stream: no samples in " + path);

    const int num_classes = max_label + 1;
    std::vector<std::vector<Sample>> train_per_class(static_cast<std::size_t>(num_classes));
    std::vector<std::vector<Sample>> test_per_class(static_cast<std::size_t>(num_classes));
    for (int cls = 0; cls < num_classes; ++cls) {
        auto it = by_class.find(cls);
        const std::size_t count = it == by_class.end() ? 0 : it->second.size();
        if (count < 2)
            fail(Errc::data, "csv stream: class " + std::to_string(cls) + " has fewer than 2 samples");
        std::vector<std::size_t> indices(count);
        for (std::size_t i = 0; i < count; ++i) indices[i] = i;
        Rng rng = Rng::keyed({0x73706c69u, split_seed, static_cast<std::uint64_t>(cls)});
        rng.shuffle(indices);
        std::size_t train_count = static_cast<std::size_t>(
            std::floor(train_fraction * static_cast<double>(count) + 1e-9));
        train_count = std::clamp<std::size_t>(train_count, 1, count - 1);
        for (std::size_t i = 0; i < count; ++i) {
            Sample& s = it->second[indices[i]];
            (i < train_count ? train_per_class : test_per_class)[static_cast<std::size_t>(cls)].push_back(
                std::move(s));
        }
    }

    return chunk_into_tasks(std::move(train_per_class), std::move(test_per_class), feature_dim,
                            classes_per_task, class_order_seed);
}

}  // namespace contlab
