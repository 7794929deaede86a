#include "edgecache.h"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "edgecache/evalkit.hpp"
#include "edgecache/policies.hpp"
#include "edgecache/serialize.hpp"

struct ec_topology {
  edgecache::Topology value;
};
struct ec_instance {
  edgecache::Instance value;
};
struct ec_models {
  edgecache::ModelEnsemble value;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename Fn>
ec_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return EC_OK;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return EC_ERROR_INVALID_ARGUMENT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EC_ERROR_RUNTIME;
  } catch (...) {
    g_last_error = "unknown error";
    return EC_ERROR_RUNTIME;
  }
}

ec_status invalid(const char* message) {
  g_last_error = message;
  return EC_ERROR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* ec_version(void) { return "1.0.0"; }

const char* ec_last_error(void) { return g_last_error.c_str(); }

void ec_string_free(char* s) { std::free(s); }

void ec_buffer_free(uint8_t* p) { std::free(p); }

ec_status ec_topology_generate(uint64_t seed, int32_t num_ars, int32_t num_ecs,
                               int32_t num_links, int32_t num_routers, int32_t n_backhaul,
                               ec_topology** out) {
  if (!out) return invalid("out pointer is null");
  return guarded([&] {
    edgecache::TopologyParams params;
    params.num_ars = num_ars;
    params.num_ecs = num_ecs;
    params.num_links = num_links;
    params.num_routers = num_routers;
    params.n_backhaul = n_backhaul;
    *out = new ec_topology{edgecache::generate_topology(seed, params)};
  });
}

ec_status ec_topology_from_json(const char* json, ec_topology** out) {
  if (!json || !out) return invalid("null argument");
  const ec_status rc = guarded([&] { *out = new ec_topology{edgecache::topology_from_json(json)}; });
  return rc == EC_ERROR_INVALID_ARGUMENT ? EC_ERROR_PARSE : rc;
}

ec_status ec_topology_to_json(const ec_topology* topology, char** json_out) {
  if (!topology || !json_out) return invalid("null argument");
  return guarded([&] { *json_out = dup_string(edgecache::topology_to_json(topology->value)); });
}

void ec_topology_free(ec_topology* topology) { delete topology; }

ec_status ec_instance_generate(const ec_topology* topology, uint64_t seed, int32_t num_flows,
                               double alpha, double beta, ec_instance** out) {
  if (!topology || !out) return invalid("null argument");
  return guarded([&] {
    *out = new ec_instance{
        edgecache::generate_instance(seed, topology->value, num_flows, alpha, beta)};
  });
}

ec_status ec_instance_partition_gadget(const double* bandwidths, int32_t count,
                                       ec_instance** out) {
  if (!bandwidths || !out) return invalid("null argument");
  return guarded([&] {
    std::vector<double> b(bandwidths, bandwidths + count);
    *out = new ec_instance{edgecache::partition_gadget_instance(b)};
  });
}

ec_status ec_instance_from_json(const char* json, ec_instance** out) {
  if (!json || !out) return invalid("null argument");
  const ec_status rc = guarded([&] { *out = new ec_instance{edgecache::instance_from_json(json)}; });
  return rc == EC_ERROR_INVALID_ARGUMENT ? EC_ERROR_PARSE : rc;
}

ec_status ec_instance_to_json(const ec_instance* instance, char** json_out) {
  if (!instance || !json_out) return invalid("null argument");
  return guarded([&] { *json_out = dup_string(edgecache::instance_to_json(instance->value)); });
}

void ec_instance_free(ec_instance* instance) { delete instance; }

ec_status ec_models_from_json(const char* json, ec_models** out) {
  if (!json || !out) return invalid("null argument");
  const ec_status rc = guarded([&] { *out = new ec_models{edgecache::models_from_json(json)}; });
  return rc == EC_ERROR_INVALID_ARGUMENT ? EC_ERROR_PARSE : rc;
}

ec_status ec_models_to_json(const ec_models* models, char** json_out) {
  if (!models || !json_out) return invalid("null argument");
  return guarded([&] { *json_out = dup_string(edgecache::models_to_json(models->value)); });
}

void ec_models_free(ec_models* models) { delete models; }

ec_status ec_solve(const ec_instance* instance, const char* policy, const ec_models* models,
                   double delta, double gamma, char** outcome_json_out) {
  if (!instance || !policy || !outcome_json_out) return invalid("null argument");
  return guarded([&] {
    const edgecache::Policy p = edgecache::policy_from_name(policy);
    const edgecache::PolicyOutcome outcome = edgecache::run_policy(
        instance->value, p, models ? &models->value : nullptr, delta, gamma);
    *outcome_json_out = dup_string(edgecache::outcome_to_json(instance->value, outcome));
  });
}

ec_status ec_export_milp(const ec_instance* instance, const char* mask_json, double big_m,
                         char** lp_out) {
  if (!instance || !lp_out) return invalid("null argument");
  return guarded([&] {
    edgecache::MilpExportOptions options;
    options.big_m_linearization = big_m;
    if (mask_json) {
      const edgecache::CandidateMask mask = edgecache::mask_from_json(mask_json);
      *lp_out = dup_string(edgecache::export_milp(instance->value, &mask, options));
    } else {
      *lp_out = dup_string(edgecache::export_milp(instance->value, nullptr, options));
    }
  });
}

ec_status ec_count_variables(const ec_instance* instance, const char* mask_json,
                             int64_t* count_out) {
  if (!instance || !count_out) return invalid("null argument");
  return guarded([&] {
    if (mask_json) {
      const edgecache::CandidateMask mask = edgecache::mask_from_json(mask_json);
      *count_out = edgecache::count_variables(instance->value, &mask);
    } else {
      *count_out = edgecache::count_variables(instance->value, nullptr);
    }
  });
}

ec_status ec_encode_image_json(const ec_instance* instance, char** json_out) {
  if (!instance || !json_out) return invalid("null argument");
  return guarded([&] {
    *json_out = dup_string(edgecache::image_to_json(edgecache::encode(instance->value)));
  });
}

ec_status ec_render_pgm(const ec_instance* instance, uint8_t** bytes_out, size_t* size_out) {
  if (!instance || !bytes_out || !size_out) return invalid("null argument");
  return guarded([&] {
    const std::vector<std::uint8_t> bytes =
        edgecache::to_pgm(edgecache::encode(instance->value));
    uint8_t* buffer = static_cast<uint8_t*>(std::malloc(bytes.size()));
    std::memcpy(buffer, bytes.data(), bytes.size());
    *bytes_out = buffer;
    *size_out = bytes.size();
  });
}

ec_status ec_dataset_build(const ec_topology* topology, uint64_t seed, int32_t num_flows,
                           int32_t train_count, int32_t val_count, int32_t test_count,
                           double alpha, double beta, int32_t jobs, const char* out_dir) {
  if (!topology || !out_dir) return invalid("null argument");
  return guarded([&] {
    edgecache::DatasetCounts counts;
    counts.train = train_count;
    counts.val = val_count;
    counts.test = test_count;
    edgecache::StoredDataset stored;
    stored.topology = topology->value;
    stored.seed = seed;
    stored.num_flows = num_flows;
    stored.alpha = alpha;
    stored.beta = beta;
    stored.data = edgecache::build_dataset(seed, topology->value, counts, num_flows, jobs,
                                           alpha, beta);
    edgecache::save_dataset(stored, out_dir);
  });
}

void ec_train_options_init(ec_train_options* options) {
  if (!options) return;
  const edgecache::TrainConfig defaults;
  options->epochs = defaults.epochs;
  options->batch_size = defaults.batch_size;
  options->learning_rate = defaults.learning_rate;
  options->conv_layers = defaults.conv_layers;
  options->filters = defaults.filters;
  options->kernel_h = defaults.kernel_h;
  options->kernel_w = defaults.kernel_w;
  options->l2_lambda = defaults.l2_lambda;
  options->momentum = defaults.momentum;
  options->seed = defaults.seed;
  options->jobs = 1;
}

ec_status ec_train_dataset(const char* dataset_dir, const ec_train_options* options,
                           char** models_json_out, char** loss_csv_out) {
  if (!dataset_dir || !options || !models_json_out) return invalid("null argument");
  return guarded([&] {
    const edgecache::StoredDataset stored = edgecache::load_dataset(dataset_dir);
    edgecache::TrainConfig config;
    config.epochs = options->epochs;
    config.batch_size = options->batch_size;
    config.learning_rate = options->learning_rate;
    config.conv_layers = options->conv_layers;
    config.filters = options->filters;
    config.kernel_h = options->kernel_h;
    config.kernel_w = options->kernel_w;
    config.l2_lambda = options->l2_lambda;
    config.momentum = options->momentum;
    config.seed = options->seed;
    std::vector<edgecache::LossCurve> curves;
    const edgecache::ModelEnsemble models = edgecache::train_ensemble(
        stored.data.train, stored.data.val, config, options->jobs, &curves);
    *models_json_out = dup_string(edgecache::models_to_json(models));
    if (loss_csv_out) {
      std::string csv = "model,epoch,train_loss,val_loss\n";
      for (std::size_t m = 0; m < curves.size(); ++m) {
        for (std::size_t e = 0; e < curves[m].train_loss.size(); ++e) {
          char buf[96];
          std::snprintf(buf, sizeof(buf), "%zu,%zu,%.10g,%.10g\n", m, e + 1,
                        curves[m].train_loss[e], curves[m].val_loss[e]);
          csv += buf;
        }
      }
      *loss_csv_out = dup_string(csv);
    }
  });
}

ec_status ec_evaluate(const char* dataset_dir, const ec_models* models, uint64_t seed,
                      const int32_t* flow_counts, int32_t num_flow_counts, int32_t test_count,
                      double delta, double gamma, int32_t jobs, char** csv_out, char** table_out,
                      double* min_benchmark_feasible_ratio_out) {
  if (!dataset_dir || !models || !flow_counts || num_flow_counts <= 0 || !csv_out) {
    return invalid("null or empty argument");
  }
  return guarded([&] {
    const edgecache::StoredDataset stored = edgecache::load_dataset(dataset_dir);
    edgecache::ComparisonConfig config;
    config.seed = seed;
    config.flow_counts.assign(flow_counts, flow_counts + num_flow_counts);
    config.test_count = test_count;
    config.delta = delta;
    config.gamma = gamma;
    config.jobs = jobs;
    const edgecache::ComparisonResult result =
        edgecache::run_comparison(stored, models->value, config);
    *csv_out = dup_string(edgecache::comparison_to_csv(result));
    if (table_out) *table_out = dup_string(edgecache::comparison_table(result));
    if (min_benchmark_feasible_ratio_out) {
      double min_ratio = 1.0;
      for (const edgecache::MetricsReport& r : result.rows) {
        if (r.policy == "benchmark") min_ratio = std::min(min_ratio, r.feasible_ratio);
      }
      *min_benchmark_feasible_ratio_out = min_ratio;
    }
  });
}

}  // extern "C"
