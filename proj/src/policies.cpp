#include "edgecache/policies.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace edgecache {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

int row_argmax(const ProbMatrix& probs, int k) {
  int best = 0;
  for (int e = 1; e < probs.num_ecs; ++e) {
    if (probs.at(k, e) > probs.at(k, best)) best = e;
  }
  return best;
}

}  // namespace

const char* policy_name(Policy policy) {
  switch (policy) {
    case Policy::kBenchmark: return "benchmark";
    case Policy::kPureCnn: return "pure_cnn";
    case Policy::kCnnRmilp: return "cnn_rmilp";
    case Policy::kCnnHcls: return "cnn_hcls";
    case Policy::kGca: return "gca";
  }
  return "unknown";
}

Policy policy_from_name(const std::string& name) {
  std::string norm = name;
  std::replace(norm.begin(), norm.end(), '-', '_');
  if (norm == "benchmark") return Policy::kBenchmark;
  if (norm == "pure_cnn") return Policy::kPureCnn;
  if (norm == "cnn_rmilp") return Policy::kCnnRmilp;
  if (norm == "cnn_hcls") return Policy::kCnnHcls;
  if (norm == "gca") return Policy::kGca;
  throw std::invalid_argument("unknown policy: " + name);
}

CandidateMask threshold_mask(const ProbMatrix& probs, double delta) {
  if (delta < 0.0 || delta >= 1.0) throw std::invalid_argument("delta must be in [0,1)");
  CandidateMask mask;
  mask.num_flows = probs.num_flows;
  mask.num_ecs = probs.num_ecs;
  mask.mask.assign(static_cast<std::size_t>(probs.num_flows) * probs.num_ecs, 0);
  for (int k = 0; k < probs.num_flows; ++k) {
    bool any = false;
    for (int e = 0; e < probs.num_ecs; ++e) {
      if (probs.at(k, e) >= delta) {
        mask.mask[k * probs.num_ecs + e] = 1;
        any = true;
      }
    }
    if (!any) {
      // Never emit an all-zero row; keep the most confident candidate.
      mask.mask[k * probs.num_ecs + row_argmax(probs, k)] = 1;
      mask.repaired_rows.push_back(k);
    }
  }
  return mask;
}

PolicyOutcome benchmark_solve(const Instance& instance, double gamma) {
  const auto start = Clock::now();
  SolveReport report = solve_exact(instance, nullptr, gamma);
  PolicyOutcome out;
  out.policy = Policy::kBenchmark;
  out.solution = std::move(report.solution);
  out.variable_count = report.variable_count;
  out.nodes_explored = report.nodes_explored;
  out.elapsed_ms = ms_since(start);
  return out;
}

PolicyOutcome cnn_rmilp(const Instance& instance, const ProbMatrix& probs, double delta,
                        double gamma) {
  const auto start = Clock::now();
  const CandidateMask mask = threshold_mask(probs, delta);
  SolveReport report = solve_exact(instance, &mask, gamma);
  PolicyOutcome out;
  out.policy = Policy::kCnnRmilp;
  out.solution = std::move(report.solution);
  out.fallback_used = report.fallback_used;
  out.variable_count = report.variable_count;
  out.nodes_explored = report.nodes_explored;
  out.elapsed_ms = ms_since(start);
  return out;
}

PolicyOutcome hcls(const Instance& instance, const ProbMatrix& probs, double delta, double gamma,
                   HclsTrace* trace) {
  const auto start = Clock::now();
  if (probs.num_flows != instance.num_flows() || probs.num_ecs != instance.topology.num_ecs()) {
    throw std::invalid_argument("probability matrix dimensions do not match instance");
  }
  const int nk = probs.num_flows;

  // Candidate ECs per flow, most probable first; sub-delta entries dropped.
  std::vector<std::vector<int>> candidates(nk);
  for (int k = 0; k < nk; ++k) {
    std::vector<int> cand;
    for (int e = 0; e < probs.num_ecs; ++e) {
      if (probs.at(k, e) >= delta) cand.push_back(e);
    }
    if (cand.empty()) cand.push_back(row_argmax(probs, k));
    std::sort(cand.begin(), cand.end(), [&](int lhs, int rhs) {
      if (probs.at(k, lhs) != probs.at(k, rhs)) return probs.at(k, lhs) > probs.at(k, rhs);
      return lhs < rhs;
    });
    candidates[k] = std::move(cand);
  }

  Assignment current = Assignment::unassigned(nk);
  std::vector<std::size_t> position(nk, 0);
  for (int k = 0; k < nk; ++k) current.ec_of_flow[k] = candidates[k][0];

  auto score = [&](const Assignment& asg) {
    const Routing routing = complete_routing(instance, asg);
    return penalty_score(instance, asg, routing, gamma);
  };

  double current_score = score(current);
  HclsTrace local;
  local.initial_score = current_score;

  std::vector<std::uint8_t> active(nk, 1);
  for (int k = 0; k < nk; ++k) {
    if (candidates[k].size() < 2) active[k] = 0;
  }
  // First improvement, lowest flow first. A rejected move retires the flow,
  // so each evaluation either advances a pointer or retires a flow.
  bool any_active = std::any_of(active.begin(), active.end(), [](std::uint8_t a) { return a; });
  while (any_active) {
    bool moved = false;
    for (int k = 0; k < nk && !moved; ++k) {
      if (!active[k]) continue;
      Assignment successor = current;
      const int to = candidates[k][position[k] + 1];
      successor.ec_of_flow[k] = to;
      const double successor_score = score(successor);
      ++local.evaluations;
      if (successor_score < current_score) {
        local.accepted.push_back(
            {k, current.ec_of_flow[k], to, current_score, successor_score});
        current = std::move(successor);
        current_score = successor_score;
        ++position[k];
        if (position[k] + 1 >= candidates[k].size()) active[k] = 0;
        moved = true;
      } else {
        active[k] = 0;
      }
    }
    any_active = std::any_of(active.begin(), active.end(), [](std::uint8_t a) { return a; });
    if (!moved && !any_active) break;
  }
  local.final_score = current_score;

  PolicyOutcome out;
  out.policy = Policy::kCnnHcls;
  out.solution =
      make_solution(instance, current, complete_routing(instance, current), gamma);
  out.hcls_evaluations = local.evaluations;
  out.elapsed_ms = ms_since(start);
  if (trace) *trace = std::move(local);
  return out;
}

PolicyOutcome gca(const Instance& instance, double gamma) {
  const auto start = Clock::now();
  const int nk = instance.num_flows();
  const int na = instance.topology.num_ars();
  const int ne = instance.topology.num_ecs();

  std::vector<double> residual = instance.ec_capacity_mb;
  Assignment assignment = Assignment::unassigned(nk);
  for (int k = 0; k < nk; ++k) {
    int best_ar = 0;
    for (int a = 1; a < na; ++a) {
      if (instance.flows[k].p[a] > instance.flows[k].p[best_ar]) best_ar = a;
    }
    std::vector<int> queue(ne);
    for (int e = 0; e < ne; ++e) queue[e] = e;
    std::sort(queue.begin(), queue.end(), [&](int lhs, int rhs) {
      const int hl = instance.topology.hops(best_ar, lhs);
      const int hr = instance.topology.hops(best_ar, rhs);
      if (hl != hr) return hl < hr;
      return lhs < rhs;
    });
    for (int e : queue) {
      if (instance.flows[k].s_mb <= residual[e]) {
        assignment.ec_of_flow[k] = e;
        residual[e] -= instance.flows[k].s_mb;
        break;
      }
    }
  }

  PolicyOutcome out;
  out.policy = Policy::kGca;
  out.solution =
      make_solution(instance, assignment, complete_routing(instance, assignment), gamma);
  out.elapsed_ms = ms_since(start);
  return out;
}

namespace {

struct CascadeResult {
  Assignment assignment;
  Routing routing;
  ProbMatrix combined;
  int rounds = 0;
};

// Shared by the pure-CNN policy and the hybrid dispatchers: predict each
// sub-image in order, assign per-row argmax over the non-excluded ECs,
// refresh the residual view between rounds.
CascadeResult run_cascade(const Instance& instance, const ModelEnsemble& models) {
  const int nk = instance.num_flows();
  const int ne = instance.topology.num_ecs();

  const FeatureImage full = encode(instance);
  const std::vector<FeatureImage> subs = partition(full);

  CascadeResult result;
  result.assignment = Assignment::unassigned(nk);
  result.routing = Routing::zeros(nk, instance.topology.num_ars(), ne,
                                  instance.topology.num_links());
  result.combined.num_flows = nk;
  result.combined.num_ecs = ne;
  result.combined.o.assign(static_cast<std::size_t>(nk) * ne, 0.0);
  result.combined.valid.assign(nk, 1);

  std::vector<std::uint8_t> ec_excluded(ne, 0);
  for (std::size_t t = 0; t < subs.size(); ++t) {
    if (std::all_of(ec_excluded.begin(), ec_excluded.end(),
                    [](std::uint8_t v) { return v != 0; })) {
      break;  // no storage anywhere; remaining flows stay unassigned
    }
    FeatureImage sub = subs[t];
    if (t > 0) {
      const ResidualUpdate update =
          apply_assignment_update(instance, result.assignment, result.routing);
      const FeatureImage refreshed = encode_with_residuals(instance, update);
      for (int r = 0; r < sub.height; ++r) {
        const int src = static_cast<int>(t) * sub.height + r;
        if (src >= nk) continue;
        std::copy_n(&refreshed.pixels[static_cast<std::size_t>(src) * refreshed.width],
                    refreshed.width, &sub.pixels[static_cast<std::size_t>(r) * sub.width]);
      }
      sub.excluded_ecs = update.excluded_ecs;
      sub.excluded_links = update.excluded_links;
      for (int e : update.excluded_ecs) ec_excluded[e] = 1;
    }

    const ProbMatrix probs = predict_matrix(models, sub);
    for (int r = 0; r < probs.num_flows; ++r) {
      if (!probs.valid[r]) continue;
      const int flow = static_cast<int>(t) * sub.height + r;
      std::copy_n(&probs.o[static_cast<std::size_t>(r) * ne], ne,
                  &result.combined.o[static_cast<std::size_t>(flow) * ne]);
      int best = -1;
      for (int e = 0; e < ne; ++e) {
        if (ec_excluded[e]) continue;
        if (best < 0 || probs.at(r, e) > probs.at(r, best)) best = e;
      }
      if (best >= 0) result.assignment.ec_of_flow[flow] = best;
    }
    result.routing = complete_routing(instance, result.assignment);
    ++result.rounds;
  }
  return result;
}

}  // namespace

PolicyOutcome pure_cnn_cascade(const Instance& instance, const ModelEnsemble& models,
                               double gamma) {
  const auto start = Clock::now();
  CascadeResult cascade = run_cascade(instance, models);
  PolicyOutcome out;
  out.policy = Policy::kPureCnn;
  out.solution = make_solution(instance, std::move(cascade.assignment),
                               std::move(cascade.routing), gamma);
  out.cascade_rounds = cascade.rounds;
  out.elapsed_ms = ms_since(start);
  return out;
}

PolicyOutcome hybrid_cascade(const Instance& instance, const ModelEnsemble& models, Policy mode,
                             double delta, double gamma) {
  const auto start = Clock::now();
  CascadeResult cascade = run_cascade(instance, models);
  PolicyOutcome out;
  if (mode == Policy::kCnnRmilp) {
    out = cnn_rmilp(instance, cascade.combined, delta, gamma);
  } else if (mode == Policy::kCnnHcls) {
    out = hcls(instance, cascade.combined, delta, gamma);
  } else {
    throw std::invalid_argument("hybrid cascade dispatches to cnn_rmilp or cnn_hcls only");
  }
  out.cascade_rounds = cascade.rounds;
  out.elapsed_ms = ms_since(start);
  return out;
}

PolicyOutcome run_policy(const Instance& instance, Policy policy, const ModelEnsemble* models,
                         double delta, double gamma) {
  switch (policy) {
    case Policy::kBenchmark:
      return benchmark_solve(instance, gamma);
    case Policy::kGca:
      return gca(instance, gamma);
    case Policy::kPureCnn:
    case Policy::kCnnRmilp:
    case Policy::kCnnHcls:
      break;
  }
  if (!models) throw std::invalid_argument("policy requires trained models");
  if (policy == Policy::kPureCnn) return pure_cnn_cascade(instance, *models, gamma);
  return hybrid_cascade(instance, *models, policy, delta, gamma);
}

}  // namespace edgecache
