#pragma once

#include "contlab/common.hpp"

namespace contlab {

struct Sample {
    Vec features;
    int label = 0;  // global class index
};

struct LabeledDataset {
    std::vector<Sample> samples;
    int feature_dim = 0;
    int num_classes = 0;
};

struct Task {
    int task_id = 0;                // 1-based position in the stream
    std::vector<int> class_ids;     // global class indices grouped into this task
    LabeledDataset train;
    LabeledDataset test;
};

// Ordered class-incremental tasks. Class-to-task grouping comes from a seeded
// permutation, so different order seeds regroup identical per-class data.
struct TaskStream {
    std::vector<Task> tasks;
    std::uint64_t class_order_seed = 0;
    int feature_dim = 0;
    int num_classes = 0;

    int task_count() const { return static_cast<int>(tasks.size()); }
    // Concatenation of class_ids in task order: the permutation that maps
    // head index -> global class.
    std::vector<int> class_order() const;
};

struct BlobsParams {
    int num_classes = 10;
    int classes_per_task = 2;
    int feature_dim = 16;
    int train_per_class = 200;
    int test_per_class = 50;
    double cluster_spread = 0.25;
    std::uint64_t data_seed = 7;
};

// Isotropic Gaussian clusters around class centers drawn uniformly in
// [-1, 1]^dim. Per-class data depends only on (data_seed, class id), so the
// multiset of class datasets is identical across order seeds.
TaskStream make_blobs_stream(const BlobsParams& params, std::uint64_t class_order_seed);

// Rows of "f1,f2,...,fk,label", split per class into train/test by a seeded
// stratified shuffle, then chunked into tasks along the permuted class order.
TaskStream load_csv_stream(const std::string& path, int classes_per_task, std::uint64_t class_order_seed,
                           double train_fraction, std::uint64_t split_seed);

}  // namespace contlab
