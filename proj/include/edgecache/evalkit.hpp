#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "edgecache/cnn.hpp"
#include "edgecache/policies.hpp"

namespace edgecache {

struct DatasetCounts {
  int train = 256;
  int val = 64;
  int test = 64;

  int total() const { return train + val + test; }
};

// Solve-then-label dataset over one fixed topology: every instance is solved
// to optimality, the optimal placement rows become the labels.
struct DatasetTriple {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
  std::vector<Instance> train_instances;
  std::vector<Instance> val_instances;
  std::vector<Instance> test_instances;
  int resample_events = 0;  // infeasible draws that were redrawn
};

DatasetTriple build_dataset(std::uint64_t seed, const Topology& topology,
                            const DatasetCounts& counts, int num_flows = 5, int jobs = 1,
                            double alpha = 1.0, double beta = 1.0);

// Directory layout: manifest.json, topology.json, instances/inst_NNNN.json,
// labels/label_NNNN.json, images/image_NNNN.json. Byte-identical for a
// fixed seed.
struct StoredDataset {
  Topology topology;
  DatasetTriple data;
  std::uint64_t seed = 0;
  int num_flows = 0;
  double alpha = 1.0;
  double beta = 1.0;
};

void save_dataset(const StoredDataset& dataset, const std::string& dir);
StoredDataset load_dataset(const std::string& dir);

struct ConfusionCounts {
  int num_ecs = 0;
  std::vector<std::int64_t> tp;
  std::vector<std::int64_t> fp;
  std::vector<std::int64_t> tn;
  std::vector<std::int64_t> fn;

  std::int64_t samples() const {
    return num_ecs == 0 ? 0 : tp[0] + fp[0] + tn[0] + fn[0];
  }
};

// Per-EC counts over (sample, flow) pairs. Both arguments hold one EC index
// per flow; prediction rows must be one-hot (no kUnassigned entries).
ConfusionCounts confusion(const std::vector<std::vector<int>>& predictions,
                          const std::vector<std::vector<int>>& labels, int num_ecs);

struct MetricBundle {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MacroMicro {
  MetricBundle macro;
  MetricBundle micro;
  std::vector<int> undefined_ecs;  // zero-denominator ECs (counted as 0 in macro)
};

MacroMicro macro_micro(const ConfusionCounts& counts);

struct MetricsReport {
  std::string policy;
  int num_flows = 0;
  double mean_cost = 0.0;           // mean J
  double mean_penalty_score = 0.0;  // mean S
  double feasible_ratio = 0.0;      // per instance
  double feasible_ratio_per_flow = 0.0;
  double max_cost_diff_vs_benchmark = 0.0;  // on S
  std::optional<double> mean_variable_count;
  MacroMicro metrics;
  double mean_elapsed_ms = 0.0;
};

struct ComparisonConfig {
  std::uint64_t seed = 1;
  std::vector<int> flow_counts = {5, 10, 15, 20};
  int test_count = 32;  // fresh instances per non-base flow count
  double delta = kDefaultDelta;
  double gamma = kDefaultGamma;
  int jobs = 1;
};

struct ComparisonResult {
  std::vector<MetricsReport> rows;  // one per (policy, flow count)
};

// Benchmark / pure-CNN / CNN-rMILP / CNN-HCLS / GCA over per-flow-count test
// sets: the dataset's held-out split for its own flow count, freshly
// generated instances otherwise.
ComparisonResult run_comparison(const StoredDataset& dataset, const ModelEnsemble& models,
                                const ComparisonConfig& config);

std::string comparison_to_csv(const ComparisonResult& result);
std::string comparison_table(const ComparisonResult& result);

}  // namespace edgecache
