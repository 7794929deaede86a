#include "edgecache/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "edgecache/rng.hpp"
#include "edgecache/serialize.hpp"
#include "json.hpp"

namespace edgecache {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kSplitSalt = 0x5917ull;
constexpr int kMaxResampleAttempts = 64;

struct LabeledInstance {
  Instance instance;
  std::vector<int> label;  // optimal EC per flow
  FeatureImage image;
};

LabeledInstance solve_and_label(std::uint64_t base_seed, std::uint64_t index,
                                const Topology& topology, int num_flows, double alpha,
                                double beta, int* resamples) {
  for (int attempt = 0; attempt < kMaxResampleAttempts; ++attempt) {
    const std::uint64_t seed = derive_seed(derive_seed(base_seed, index), attempt);
    Instance inst = generate_instance(seed, topology, num_flows, alpha, beta);
    SolveReport report = solve_exact(inst);
    if (!report.solution.feasible) {
      if (resamples) ++(*resamples);
      continue;
    }
    LabeledInstance out;
    out.image = encode(inst);
    out.label = report.solution.assignment.ec_of_flow;
    out.instance = std::move(inst);
    return out;
  }
  throw std::runtime_error("could not draw a feasible instance after " +
                           std::to_string(kMaxResampleAttempts) + " attempts");
}

template <typename Fn>
void parallel_for(int count, int jobs, Fn&& fn) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> workers;
  for (int t = 0; t < jobs; ++t) {
    workers.emplace_back([&, t]() {
      try {
        for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

DatasetTriple build_dataset(std::uint64_t seed, const Topology& topology,
                            const DatasetCounts& counts, int num_flows, int jobs, double alpha,
                            double beta) {
  if (counts.train < 1 || counts.val < 0 || counts.test < 0) {
    throw std::invalid_argument("dataset counts must be nonnegative with train >= 1");
  }
  const int total = counts.total();
  std::vector<LabeledInstance> flat(total);
  std::vector<int> resamples(total, 0);
  parallel_for(total, jobs, [&](int i) {
    flat[i] = solve_and_label(seed, static_cast<std::uint64_t>(i), topology, num_flows, alpha,
                              beta, &resamples[i]);
  });

  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(derive_seed(seed, kSplitSalt));
  shuffle_rng.shuffle(order);

  DatasetTriple out;
  out.resample_events = std::accumulate(resamples.begin(), resamples.end(), 0);
  auto push = [&](LabeledDataset& set, std::vector<Instance>& instances, int idx) {
    LabeledInstance& li = flat[idx];
    set.images.push_back(std::move(li.image));
    set.labels.push_back(std::move(li.label));
    instances.push_back(std::move(li.instance));
  };
  int pos = 0;
  for (int i = 0; i < counts.train; ++i) push(out.train, out.train_instances, order[pos++]);
  for (int i = 0; i < counts.val; ++i) push(out.val, out.val_instances, order[pos++]);
  for (int i = 0; i < counts.test; ++i) push(out.test, out.test_instances, order[pos++]);
  return out;
}

namespace {

std::string index_name(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04d.json", prefix, i);
  return buf;
}

}  // namespace

void save_dataset(const StoredDataset& dataset, const std::string& dir) {
  const DatasetTriple& d = dataset.data;
  fs::create_directories(fs::path(dir) / "instances");
  fs::create_directories(fs::path(dir) / "labels");
  fs::create_directories(fs::path(dir) / "images");

  const int n_train = d.train.size();
  const int n_val = d.val.size();
  const int n_test = d.test.size();
  auto range = [](int start, int count) {
    std::vector<int> v(count);
    std::iota(v.begin(), v.end(), start);
    return v;
  };
  json manifest;
  manifest["format_version"] = 1;
  manifest["seed"] = dataset.seed;
  manifest["num_flows"] = dataset.num_flows;
  manifest["alpha"] = dataset.alpha;
  manifest["beta"] = dataset.beta;
  manifest["counts"] = {{"train", n_train}, {"val", n_val}, {"test", n_test}};
  manifest["split"] = {{"train", range(0, n_train)},
                       {"val", range(n_train, n_val)},
                       {"test", range(n_train + n_val, n_test)}};
  manifest["resample_events"] = d.resample_events;
  write_file((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  write_file((fs::path(dir) / "topology.json").string(), topology_to_json(dataset.topology));

  int idx = 0;
  auto dump_set = [&](const LabeledDataset& set, const std::vector<Instance>& instances) {
    for (int i = 0; i < set.size(); ++i, ++idx) {
      const Instance& inst = instances[i];
      write_file((fs::path(dir) / "instances" / index_name("inst", idx)).string(),
                 instance_to_json(inst));
      Assignment asg;
      asg.ec_of_flow = set.labels[i];
      const Solution sol = make_solution(inst, asg, complete_routing(inst, asg));
      write_file((fs::path(dir) / "labels" / index_name("label", idx)).string(),
                 solution_to_json(inst, sol));
      write_file((fs::path(dir) / "images" / index_name("image", idx)).string(),
                 image_to_json(set.images[i]));
    }
  };
  dump_set(d.train, d.train_instances);
  dump_set(d.val, d.val_instances);
  dump_set(d.test, d.test_instances);
}

StoredDataset load_dataset(const std::string& dir) {
  const json manifest = json::parse(read_file((fs::path(dir) / "manifest.json").string()));
  StoredDataset out;
  out.seed = manifest.at("seed").get<std::uint64_t>();
  out.num_flows = manifest.at("num_flows").get<int>();
  out.alpha = manifest.at("alpha").get<double>();
  out.beta = manifest.at("beta").get<double>();
  out.topology = topology_from_json(read_file((fs::path(dir) / "topology.json").string()));
  out.data.resample_events = manifest.at("resample_events").get<int>();

  auto load_set = [&](const char* key, LabeledDataset& set, std::vector<Instance>& instances) {
    for (int idx : manifest.at("split").at(key).get<std::vector<int>>()) {
      Instance inst = instance_from_json(
          read_file((fs::path(dir) / "instances" / index_name("inst", idx)).string()));
      const Solution sol = solution_from_json(
          inst, read_file((fs::path(dir) / "labels" / index_name("label", idx)).string()));
      set.labels.push_back(sol.assignment.ec_of_flow);
      set.images.push_back(image_from_json(
          read_file((fs::path(dir) / "images" / index_name("image", idx)).string())));
      instances.push_back(std::move(inst));
    }
  };
  load_set("train", out.data.train, out.data.train_instances);
  load_set("val", out.data.val, out.data.val_instances);
  load_set("test", out.data.test, out.data.test_instances);
  return out;
}

ConfusionCounts confusion(const std::vector<std::vector<int>>& predictions,
                          const std::vector<std::vector<int>>& labels, int num_ecs) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("prediction and label sample counts differ");
  }
  ConfusionCounts counts;
  counts.num_ecs = num_ecs;
  counts.tp.assign(num_ecs, 0);
  counts.fp.assign(num_ecs, 0);
  counts.tn.assign(num_ecs, 0);
  counts.fn.assign(num_ecs, 0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].size() != labels[i].size()) {
      throw std::invalid_argument("prediction and label row lengths differ");
    }
    for (std::size_t k = 0; k < predictions[i].size(); ++k) {
      const int pred = predictions[i][k];
      const int truth = labels[i][k];
      if (pred < 0 || pred >= num_ecs) {
        throw std::invalid_argument("prediction rows must be one-hot");
      }
      if (truth < 0 || truth >= num_ecs) {
        throw std::invalid_argument("label rows must be one-hot");
      }
      for (int e = 0; e < num_ecs; ++e) {
        const bool in_pred = pred == e;
        const bool in_truth = truth == e;
        if (in_pred && in_truth) ++counts.tp[e];
        else if (in_pred) ++counts.fp[e];
        else if (in_truth) ++counts.fn[e];
        else ++counts.tn[e];
      }
    }
  }
  return counts;
}

MacroMicro macro_micro(const ConfusionCounts& counts) {
  const int ne = counts.num_ecs;
  if (ne == 0) throw std::invalid_argument("confusion counts are empty");
  MacroMicro out;
  std::int64_t sum_tp = 0, sum_fp = 0, sum_tn = 0, sum_fn = 0;
  double macro_p = 0.0, macro_r = 0.0, macro_f1 = 0.0;
  for (int e = 0; e < ne; ++e) {
    const std::int64_t tp = counts.tp[e], fp = counts.fp[e];
    const std::int64_t tn = counts.tn[e], fn = counts.fn[e];
    sum_tp += tp;
    sum_fp += fp;
    sum_tn += tn;
    sum_fn += fn;
    bool undefined = false;
    if (tp + fp > 0) macro_p += double(tp) / double(tp + fp);
    else undefined = true;
    if (tp + fn > 0) macro_r += double(tp) / double(tp + fn);
    else undefined = true;
    if (2 * tp + fp + fn > 0) macro_f1 += double(2 * tp) / double(2 * tp + fp + fn);
    else undefined = true;
    if (undefined) out.undefined_ecs.push_back(e);
  }
  const std::int64_t total = sum_tp + sum_fp + sum_tn + sum_fn;
  if (total == 0) throw std::invalid_argument("confusion counts contain no samples");
  // Every per-EC accuracy shares the denominator |samples|, so the macro
  // mean and the pooled micro accuracy are the same rational number; both
  // fields are computed from the pooled sums to keep them bit-identical.
  const double accuracy = double(sum_tp + sum_tn) / double(total);
  out.macro.accuracy = accuracy;
  out.macro.precision = macro_p / ne;
  out.macro.recall = macro_r / ne;
  out.macro.f1 = macro_f1 / ne;
  out.micro.accuracy = accuracy;
  out.micro.precision = sum_tp + sum_fp > 0 ? double(sum_tp) / double(sum_tp + sum_fp) : 0.0;
  out.micro.recall = sum_tp + sum_fn > 0 ? double(sum_tp) / double(sum_tp + sum_fn) : 0.0;
  out.micro.f1 =
      2 * sum_tp + sum_fp + sum_fn > 0 ? double(2 * sum_tp) / double(2 * sum_tp + sum_fp + sum_fn)
                                       : 0.0;
  return out;
}

namespace {

constexpr int kNumPolicies = 5;
constexpr Policy kPolicyOrder[kNumPolicies] = {Policy::kBenchmark, Policy::kPureCnn,
                                               Policy::kCnnRmilp, Policy::kCnnHcls, Policy::kGca};

// Flow-level auxiliary feasibility: the flow is placed and none of the
// resources it touches is over capacity.
bool flow_satisfied(const Solution& solution, int k, const std::vector<Violation>& violations) {
  const int e = solution.assignment.ec_of_flow[k];
  if (e == Assignment::kUnassigned) return false;
  for (const Violation& v : violations) {
    if (v.code == "4c" && v.ec == e) return false;
    if (v.code == "4d" && solution.routing.y_at(k, v.link)) return false;
    if (v.flow == k) return false;
  }
  return true;
}

}  // namespace

ComparisonResult run_comparison(const StoredDataset& dataset, const ModelEnsemble& models,
                                const ComparisonConfig& config) {
  ComparisonResult result;
  for (const int flows : config.flow_counts) {
    // Test instances: held-out split for the dataset's own flow count,
    // freshly drawn (and re-solved) sets otherwise.
    std::vector<Instance> instances;
    if (flows == dataset.num_flows) {
      instances = dataset.data.test_instances;
    } else {
      const std::uint64_t base = derive_seed(config.seed, 0xE7A1u + flows);
      for (int i = 0; i < config.test_count; ++i) {
        instances.push_back(solve_and_label(base, static_cast<std::uint64_t>(i),
                                            dataset.topology, flows, dataset.alpha, dataset.beta,
                                            nullptr)
                                .instance);
      }
    }
    const int count = static_cast<int>(instances.size());
    if (count == 0) throw std::invalid_argument("empty test set");

    std::vector<std::vector<PolicyOutcome>> outcomes(count);
    parallel_for(count, config.jobs, [&](int i) {
      std::vector<PolicyOutcome> per_policy;
      per_policy.reserve(kNumPolicies);
      for (Policy p : kPolicyOrder) {
        per_policy.push_back(run_policy(instances[i], p, &models, config.delta, config.gamma));
      }
      outcomes[i] = std::move(per_policy);
    });

    for (int pi = 0; pi < kNumPolicies; ++pi) {
      MetricsReport report;
      report.policy = policy_name(kPolicyOrder[pi]);
      report.num_flows = flows;
      double sum_j = 0.0, sum_s = 0.0, sum_elapsed = 0.0, sum_vars = 0.0;
      int feasible = 0, flows_ok = 0, flows_total = 0;
      double max_diff = 0.0;
      std::vector<std::vector<int>> preds, labels;
      for (int i = 0; i < count; ++i) {
        const PolicyOutcome& out = outcomes[i][pi];
        const PolicyOutcome& bench = outcomes[i][0];
        sum_j += out.solution.objective;
        sum_s += out.solution.penalty_score;
        sum_elapsed += out.elapsed_ms;
        sum_vars += static_cast<double>(out.variable_count);
        if (out.solution.feasible) ++feasible;
        max_diff = std::max(max_diff,
                            out.solution.penalty_score - bench.solution.penalty_score);
        const auto violations = check_feasibility(instances[i], out.solution);
        for (int k = 0; k < flows; ++k) {
          ++flows_total;
          if (flow_satisfied(out.solution, k, violations)) ++flows_ok;
        }
        // Confusion over the placed rows, scored against the optimum.
        std::vector<int> pred_row, label_row;
        for (int k = 0; k < flows; ++k) {
          const int pred = out.solution.assignment.ec_of_flow[k];
          if (pred == Assignment::kUnassigned) continue;
          pred_row.push_back(pred);
          label_row.push_back(bench.solution.assignment.ec_of_flow[k]);
        }
        preds.push_back(std::move(pred_row));
        labels.push_back(std::move(label_row));
      }
      report.mean_cost = sum_j / count;
      report.mean_penalty_score = sum_s / count;
      report.feasible_ratio = static_cast<double>(feasible) / count;
      report.feasible_ratio_per_flow = static_cast<double>(flows_ok) / flows_total;
      report.max_cost_diff_vs_benchmark = max_diff;
      const Policy policy = kPolicyOrder[pi];
      if (policy == Policy::kBenchmark || policy == Policy::kCnnRmilp) {
        report.mean_variable_count = sum_vars / count;
      }
      report.metrics =
          macro_micro(confusion(preds, labels, dataset.topology.num_ecs()));
      report.mean_elapsed_ms = sum_elapsed / count;
      result.rows.push_back(std::move(report));
    }
  }
  return result;
}

namespace {

std::string csv_num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string pct(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * ratio);
  return buf;
}

std::string fixed2(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string comparison_to_csv(const ComparisonResult& result) {
  std::string out =
      "policy,flows,mean_cost,mean_penalty_score,feasible_ratio,feasible_ratio_per_flow,"
      "max_cost_diff_vs_benchmark,mean_variable_count,macro_accuracy,macro_precision,"
      "macro_recall,macro_f1,micro_precision,micro_recall,micro_f1,mean_elapsed_ms\n";
  for (const MetricsReport& r : result.rows) {
    out += r.policy;
    out += "," + std::to_string(r.num_flows);
    out += "," + csv_num(r.mean_cost);
    out += "," + csv_num(r.mean_penalty_score);
    out += "," + csv_num(r.feasible_ratio);
    out += "," + csv_num(r.feasible_ratio_per_flow);
    out += "," + csv_num(r.max_cost_diff_vs_benchmark);
    out += ",";
    if (r.mean_variable_count) out += csv_num(*r.mean_variable_count);
    out += "," + csv_num(r.metrics.macro.accuracy);
    out += "," + csv_num(r.metrics.macro.precision);
    out += "," + csv_num(r.metrics.macro.recall);
    out += "," + csv_num(r.metrics.macro.f1);
    out += "," + csv_num(r.metrics.micro.precision);
    out += "," + csv_num(r.metrics.micro.recall);
    out += "," + csv_num(r.metrics.micro.f1);
    out += "," + csv_num(r.mean_elapsed_ms);
    out += "\n";
  }
  return out;
}

std::string comparison_table(const ComparisonResult& result) {
  std::string out;
  std::vector<int> flow_counts;
  for (const MetricsReport& r : result.rows) {
    if (flow_counts.empty() || flow_counts.back() != r.num_flows) {
      flow_counts.push_back(r.num_flows);
    }
  }
  for (int flows : flow_counts) {
    std::vector<const MetricsReport*> cols;
    for (const MetricsReport& r : result.rows) {
      if (r.num_flows == flows) cols.push_back(&r);
    }
    out += "Performance comparison for the case of " + std::to_string(flows) + " requests\n";
    auto row = [&](const std::string& name, auto getter) {
      char head[64];
      std::snprintf(head, sizeof(head), "%-30s", name.c_str());
      out += head;
      for (const MetricsReport* r : cols) {
        char cell[32];
        std::snprintf(cell, sizeof(cell), " | %12s", getter(*r).c_str());
        out += cell;
      }
      out += "\n";
    };
    row("Metric", [](const MetricsReport& r) { return r.policy; });
    row("Mean time", [](const MetricsReport& r) { return fixed2(r.mean_elapsed_ms) + " ms"; });
    row("Mean total cost", [](const MetricsReport& r) { return fixed2(r.mean_penalty_score); });
    row("Mean feasible ratio", [](const MetricsReport& r) { return pct(r.feasible_ratio); });
    row("Max total cost difference",
        [](const MetricsReport& r) { return fixed2(r.max_cost_diff_vs_benchmark); });
    row("Number of decision variables", [](const MetricsReport& r) {
      return r.mean_variable_count ? fixed2(*r.mean_variable_count) : std::string("-");
    });
    row("Macro/Micro accuracy",
        [](const MetricsReport& r) { return pct(r.metrics.macro.accuracy); });
    row("Macro precision", [](const MetricsReport& r) { return pct(r.metrics.macro.precision); });
    row("Macro recall", [](const MetricsReport& r) { return pct(r.metrics.macro.recall); });
    row("Macro F1", [](const MetricsReport& r) { return pct(r.metrics.macro.f1); });
    row("Micro precision/recall/F1",
        [](const MetricsReport& r) { return pct(r.metrics.micro.precision); });
    out += "\n";
  }
  return out;
}

}  // namespace edgecache
