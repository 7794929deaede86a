#include "edgecache/cost.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace edgecache {

std::string Violation::describe() const {
  std::string s = "(" + code + ")";
  if (flow >= 0) s += " k=" + std::to_string(flow);
  if (ar >= 0) s += " a=" + std::to_string(ar);
  if (ec >= 0) s += " e=" + std::to_string(ec);
  if (link >= 0) s += " l=" + std::to_string(link);
  return s;
}

namespace {

void check_dims(const Instance& instance, const Assignment& assignment) {
  if (assignment.num_flows() != instance.num_flows()) {
    throw std::invalid_argument("assignment size does not match instance flow count");
  }
  const int ne = instance.topology.num_ecs();
  for (int e : assignment.ec_of_flow) {
    if (e != Assignment::kUnassigned && (e < 0 || e >= ne)) {
      throw std::invalid_argument("assignment references EC out of range");
    }
  }
}

double caching_cost_impl(const Instance& instance, const Assignment& assignment) {
  const int ne = instance.topology.num_ecs();
  std::vector<double> load(ne, 0.0);
  std::vector<int> count(ne, 0);
  for (int k = 0; k < assignment.num_flows(); ++k) {
    const int e = assignment.ec_of_flow[k];
    if (e == Assignment::kUnassigned) continue;
    load[e] += instance.flows[k].s_mb;
    ++count[e];
  }
  double total = 0.0;
  for (int e = 0; e < ne; ++e) {
    if (count[e] == 0) continue;
    const double util = load[e] / instance.ec_capacity_mb[e];
    if (util >= 1.0 - 1e-9) return kOverflowCost;
    total += count[e] / (1.0 - util);
  }
  return total;
}

}  // namespace

double caching_cost(const Instance& instance, const Assignment& assignment) {
  check_dims(instance, assignment);
  if (!assignment.complete()) {
    throw std::invalid_argument("caching_cost requires a complete assignment");
  }
  return caching_cost_impl(instance, assignment);
}

double caching_cost_partial(const Instance& instance, const Assignment& assignment) {
  check_dims(instance, assignment);
  return caching_cost_impl(instance, assignment);
}

double transmission_cost(const Instance& instance, const Routing& routing) {
  const int na = instance.topology.num_ars();
  const int ne = instance.topology.num_ecs();
  const int nt = instance.topology.n_backhaul;
  double total = 0.0;
  for (int k = 0; k < instance.num_flows(); ++k) {
    double hit_hops = 0.0;
    double hit_prob = 0.0;
    for (int a = 0; a < na; ++a) {
      const double p = instance.flows[k].p[a];
      for (int e = 0; e < ne; ++e) {
        if (routing.z_at(k, a, e)) {
          hit_hops += p * instance.topology.hops(a, e);
          hit_prob += p;
        }
      }
    }
    total += hit_hops + (1.0 - hit_prob) * nt;
  }
  return total;
}

double total_cost(const Instance& instance, const Assignment& assignment,
                  const Routing& routing) {
  return instance.alpha * caching_cost_partial(instance, assignment) +
         instance.beta * transmission_cost(instance, routing);
}

std::vector<Violation> check_feasibility(const Instance& instance, const Assignment& assignment,
                                         const Routing& routing) {
  const int nk = instance.num_flows();
  const int na = instance.topology.num_ars();
  const int ne = instance.topology.num_ecs();
  const int nl = instance.topology.num_links();
  std::vector<Violation> out;

  // (4b) exactly one EC per flow.
  for (int k = 0; k < nk; ++k) {
    if (assignment.ec_of_flow[k] == Assignment::kUnassigned) {
      out.push_back({"4b", k, -1, -1, -1});
    }
  }
  // (4c) strict EC storage capacity.
  for (int e = 0; e < ne; ++e) {
    double load = 0.0;
    for (int k = 0; k < nk; ++k) {
      if (assignment.ec_of_flow[k] == e) load += instance.flows[k].s_mb;
    }
    if (load >= instance.ec_capacity_mb[e] - kCapacitySlack) {
      out.push_back({"4c", -1, -1, e, -1});
    }
  }
  // (4d) strict link bandwidth capacity.
  for (int l = 0; l < nl; ++l) {
    double load = 0.0;
    for (int k = 0; k < nk; ++k) {
      if (routing.y_at(k, l)) load += instance.flows[k].b_mbps;
    }
    if (load >= instance.link_capacity_mbps[l] - kCapacitySlack) {
      out.push_back({"4d", -1, -1, -1, l});
    }
  }
  // (4e) at most one serving EC per (flow, AR).
  for (int k = 0; k < nk; ++k) {
    for (int a = 0; a < na; ++a) {
      int sum = 0;
      for (int e = 0; e < ne; ++e) sum += routing.z_at(k, a, e);
      if (sum > 1) out.push_back({"4e", k, a, -1, -1});
    }
  }
  // (4f) routed EC must host the flow.
  for (int k = 0; k < nk; ++k) {
    for (int a = 0; a < na; ++a) {
      for (int e = 0; e < ne; ++e) {
        if (routing.z_at(k, a, e) && assignment.ec_of_flow[k] != e) {
          out.push_back({"4f", k, a, e, -1});
        }
      }
    }
  }
  // (4g)/(4h) y marks exactly the links of selected paths.
  for (int k = 0; k < nk; ++k) {
    for (int l = 0; l < nl; ++l) {
      int on_path = 0;
      for (int a = 0; a < na && !on_path; ++a) {
        for (int e = 0; e < ne; ++e) {
          if (routing.z_at(k, a, e) && instance.topology.link_on_path(l, a, e)) {
            on_path = 1;
            break;
          }
        }
      }
      if (routing.y_at(k, l) && !on_path) out.push_back({"4g", k, -1, -1, l});
      if (!routing.y_at(k, l) && on_path) out.push_back({"4h", k, -1, -1, l});
    }
  }
  return out;
}

std::vector<Violation> check_feasibility(const Instance& instance, const Solution& solution) {
  return check_feasibility(instance, solution.assignment, solution.routing);
}

double penalty_score(const Instance& instance, const Assignment& assignment,
                     const Routing& routing, double gamma, PenaltyAggregation aggregation) {
  if (gamma < 0) throw std::invalid_argument("gamma must be nonnegative");
  const UtilizationView view = utilization(instance);
  const int nk = instance.num_flows();
  const int ne = view.num_ecs;
  const int nl = view.num_links;

  double excess_q = 0.0;
  double excess_r = 0.0;
  if (aggregation == PenaltyAggregation::kPooled) {
    double sum_q = 0.0;
    for (int k = 0; k < nk; ++k) {
      const int e = assignment.ec_of_flow[k];
      if (e != Assignment::kUnassigned) sum_q += view.q_at(k, e);
    }
    double sum_r = 0.0;
    for (int k = 0; k < nk; ++k) {
      for (int l = 0; l < nl; ++l) {
        if (routing.y_at(k, l)) sum_r += view.r_at(k, l);
      }
    }
    excess_q = sum_q - 1.0;
    excess_r = sum_r - 1.0;
  } else {
    excess_q = -1.0;
    for (int e = 0; e < ne; ++e) {
      double sum = 0.0;
      for (int k = 0; k < nk; ++k) {
        if (assignment.ec_of_flow[k] == e) sum += view.q_at(k, e);
      }
      excess_q = std::max(excess_q, sum - 1.0);
    }
    excess_r = -1.0;
    for (int l = 0; l < nl; ++l) {
      double sum = 0.0;
      for (int k = 0; k < nk; ++k) {
        if (routing.y_at(k, l)) sum += view.r_at(k, l);
      }
      excess_r = std::max(excess_r, sum - 1.0);
    }
  }
  const double penalty = std::max({0.0, excess_q, excess_r, excess_q + excess_r});
  return gamma * penalty + total_cost(instance, assignment, routing);
}

Routing complete_routing(const Instance& instance, const Assignment& assignment, double p_min) {
  check_dims(instance, assignment);
  const int nk = instance.num_flows();
  const int na = instance.topology.num_ars();
  const int ne = instance.topology.num_ecs();
  const int nl = instance.topology.num_links();
  Routing routing = Routing::zeros(nk, na, ne, nl);
  for (int k = 0; k < nk; ++k) {
    const int e = assignment.ec_of_flow[k];
    if (e == Assignment::kUnassigned) continue;
    for (int a = 0; a < na; ++a) {
      if (instance.flows[k].p[a] > p_min) {
        routing.set_z(k, a, e, 1);
        for (int l = 0; l < nl; ++l) {
          if (instance.topology.link_on_path(l, a, e)) routing.set_y(k, l, 1);
        }
      }
    }
  }
  return routing;
}

Solution make_solution(const Instance& instance, Assignment assignment, Routing routing,
                       double gamma) {
  Solution s;
  s.objective = total_cost(instance, assignment, routing);
  s.feasible = check_feasibility(instance, assignment, routing).empty();
  // Feasible solutions cost exactly J; the penalized score only applies to
  // placements that break some constraint.
  s.penalty_score =
      s.feasible ? s.objective : penalty_score(instance, assignment, routing, gamma);
  s.assignment = std::move(assignment);
  s.routing = std::move(routing);
  return s;
}

}  // namespace edgecache
