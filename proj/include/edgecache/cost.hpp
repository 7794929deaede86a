#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgecache/netmodel.hpp"

namespace edgecache {

// Caching cost when some EC sits at (or numerically indistinguishable from)
// full utilization; keeps the cost a total order for the local search.
inline constexpr double kOverflowCost = 1e12;
// Absolute slack used when checking the strict capacity inequalities on
// floating-point data.
inline constexpr double kCapacitySlack = 1e-9;
inline constexpr double kDefaultGamma = 100.0;

// Placement of each flow on at most one EC. kUnassigned marks an empty row.
struct Assignment {
  static constexpr int kUnassigned = -1;
  std::vector<int> ec_of_flow;

  int num_flows() const { return static_cast<int>(ec_of_flow.size()); }
  bool complete() const {
    for (int e : ec_of_flow)
      if (e == kUnassigned) return false;
    return !ec_of_flow.empty();
  }
  static Assignment unassigned(int num_flows) {
    Assignment a;
    a.ec_of_flow.assign(num_flows, kUnassigned);
    return a;
  }
};

struct Routing {
  int num_flows = 0;
  int num_ars = 0;
  int num_ecs = 0;
  int num_links = 0;
  std::vector<std::uint8_t> z;  // |K| x |A| x |E|
  std::vector<std::uint8_t> y;  // |K| x |L|

  static Routing zeros(int flows, int ars, int ecs, int links) {
    Routing r;
    r.num_flows = flows;
    r.num_ars = ars;
    r.num_ecs = ecs;
    r.num_links = links;
    r.z.assign(static_cast<std::size_t>(flows) * ars * ecs, 0);
    r.y.assign(static_cast<std::size_t>(flows) * links, 0);
    return r;
  }
  std::uint8_t z_at(int k, int a, int e) const {
    return z[(static_cast<std::size_t>(k) * num_ars + a) * num_ecs + e];
  }
  void set_z(int k, int a, int e, std::uint8_t v) {
    z[(static_cast<std::size_t>(k) * num_ars + a) * num_ecs + e] = v;
  }
  std::uint8_t y_at(int k, int l) const { return y[static_cast<std::size_t>(k) * num_links + l]; }
  void set_y(int k, int l, std::uint8_t v) { y[static_cast<std::size_t>(k) * num_links + l] = v; }
};

struct Violation {
  std::string code;  // "4b".."4h"
  int flow = -1;
  int ar = -1;
  int ec = -1;
  int link = -1;
  std::string describe() const;
};

struct Solution {
  Assignment assignment;
  Routing routing;
  double objective = 0.0;      // J
  bool feasible = false;
  double penalty_score = 0.0;  // S
};

// Load-balancing caching cost: sum over placed flows of 1/(1 - utilization)
// of the hosting EC. Requires a complete assignment (throws otherwise) and
// returns kOverflowCost when any EC utilization reaches 1 - 1e-9.
double caching_cost(const Instance& instance, const Assignment& assignment);

// Same cost with empty rows contributing nothing (used by penalty scoring of
// partial placements).
double caching_cost_partial(const Instance& instance, const Assignment& assignment);

// Expected hop count: routed attach points pay the AR->EC shortest-path
// length, the residual probability mass pays the backhaul constant.
double transmission_cost(const Instance& instance, const Routing& routing);

double total_cost(const Instance& instance, const Assignment& assignment,
                  const Routing& routing);

std::vector<Violation> check_feasibility(const Instance& instance, const Assignment& assignment,
                                         const Routing& routing);
std::vector<Violation> check_feasibility(const Instance& instance, const Solution& solution);

enum class PenaltyAggregation {
  kPooled,       // utilization sums pooled over all ECs / all links
  kPerResource,  // worst single EC / link excess
};

// Penalized score S: gamma times the utilization excess (capped below at
// zero) plus the total cost J of the partial placement.
double penalty_score(const Instance& instance, const Assignment& assignment,
                     const Routing& routing, double gamma = kDefaultGamma,
                     PenaltyAggregation aggregation = PenaltyAggregation::kPooled);

// z[k][a][e] = x[k][e] for every AR with attach probability above p_min;
// y marks exactly the links on the selected shortest paths.
Routing complete_routing(const Instance& instance, const Assignment& assignment,
                         double p_min = 0.0);

// Bundles assignment + routing with objective, penalty score and the
// feasibility verdict.
Solution make_solution(const Instance& instance, Assignment assignment, Routing routing,
                       double gamma = kDefaultGamma);

}  // namespace edgecache
