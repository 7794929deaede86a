#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgecache/cnn.hpp"
#include "edgecache/cost.hpp"
#include "edgecache/solver.hpp"

namespace edgecache {

inline constexpr double kDefaultDelta = 0.001;

enum class Policy { kBenchmark, kPureCnn, kCnnRmilp, kCnnHcls, kGca };

const char* policy_name(Policy policy);          // benchmark / pure_cnn / ...
Policy policy_from_name(const std::string& name);  // accepts "cnn-rmilp" and "cnn_rmilp"

struct PolicyOutcome {
  Policy policy = Policy::kBenchmark;
  Solution solution;
  double elapsed_ms = 0.0;
  bool fallback_used = false;
  std::int64_t variable_count = 0;   // benchmark / rMILP
  std::int64_t nodes_explored = 0;   // benchmark / rMILP
  std::int64_t hcls_evaluations = 0;
  int cascade_rounds = 0;
};

// Keep-if-at-least-delta candidate filter over a probability matrix. A row
// with every entry below delta keeps its argmax instead of going empty; such
// rows are recorded in repaired_rows.
CandidateMask threshold_mask(const ProbMatrix& probs, double delta);

// Exact solve restricted to the thresholded candidates, with an unmasked
// fallback when the restriction is infeasible.
PolicyOutcome cnn_rmilp(const Instance& instance, const ProbMatrix& probs,
                        double delta = kDefaultDelta, double gamma = kDefaultGamma);

struct HclsMove {
  int flow = 0;
  int from_ec = 0;
  int to_ec = 0;
  double score_before = 0.0;
  double score_after = 0.0;
};

struct HclsTrace {
  double initial_score = 0.0;
  double final_score = 0.0;
  std::vector<HclsMove> accepted;
  std::int64_t evaluations = 0;  // successor states scored
};

// Hill climbing over one-flow reassignments: start from the per-row argmax
// of the thresholded matrix, move each flow down its probability-ordered
// candidate list while that strictly lowers the penalty score; a rejected
// move retires the flow, which caps successor evaluations at |K|*|E|.
PolicyOutcome hcls(const Instance& instance, const ProbMatrix& probs,
                   double delta = kDefaultDelta, double gamma = kDefaultGamma,
                   HclsTrace* trace = nullptr);

// Greedy baseline: each flow goes to the first EC, in hop order from its
// most likely AR, that still has storage left. Bandwidth is not checked.
PolicyOutcome gca(const Instance& instance, double gamma = kDefaultGamma);

// Height-5 cascade: predict a sub-image, assign per-row argmax over the
// non-excluded ECs, complete the routing, refresh the residual view, repeat.
PolicyOutcome pure_cnn_cascade(const Instance& instance, const ModelEnsemble& models,
                               double gamma = kDefaultGamma);

// Runs the cascade, but keeps the full probability rows of every round and
// hands the combined |K| x |E| matrix to HCLS or rMILP on the full instance.
PolicyOutcome hybrid_cascade(const Instance& instance, const ModelEnsemble& models, Policy mode,
                             double delta = kDefaultDelta, double gamma = kDefaultGamma);

PolicyOutcome benchmark_solve(const Instance& instance, double gamma = kDefaultGamma);

// Dispatcher used by the CLI and the C API.
PolicyOutcome run_policy(const Instance& instance, Policy policy, const ModelEnsemble* models,
                         double delta = kDefaultDelta, double gamma = kDefaultGamma);

}  // namespace edgecache
