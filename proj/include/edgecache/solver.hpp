#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgecache/cost.hpp"
#include "edgecache/netmodel.hpp"

namespace edgecache {

// Per-(flow, EC) candidate filter produced by thresholding a probability
// matrix. A row of all zeros makes the masked problem trivially infeasible;
// the solver reports that through its fallback path rather than fixing it.
struct CandidateMask {
  int num_flows = 0;
  int num_ecs = 0;
  std::vector<std::uint8_t> mask;   // |K| x |E|
  std::vector<int> repaired_rows;   // rows whose argmax was force-kept

  bool allows(int k, int e) const { return mask[static_cast<std::size_t>(k) * num_ecs + e] != 0; }
  std::int64_t zero_count() const {
    std::int64_t n = 0;
    for (std::uint8_t m : mask) n += (m == 0);
    return n;
  }
  static CandidateMask all_ones(int num_flows, int num_ecs) {
    CandidateMask m;
    m.num_flows = num_flows;
    m.num_ecs = num_ecs;
    m.mask.assign(static_cast<std::size_t>(num_flows) * num_ecs, 1);
    return m;
  }
};

struct SolveReport {
  Solution solution;
  std::int64_t nodes_explored = 0;
  bool fallback_used = false;
  std::int64_t variable_count = 0;
};

// Globally optimal placement + routing by depth-first branch and bound:
// flows branch over candidate ECs (ordered by increasing storage pressure),
// then serve/skip decisions per (flow, AR) in decreasing benefit order, with
// an admissible additive lower bound. Ties within 1e-9 of the incumbent are
// broken toward the lexicographically smallest placement tuple, then the
// smallest routing bit string. Identical inputs give identical reports,
// including nodes_explored.
//
// With a mask, placements are restricted to allowed (k, e) pairs; if that
// restriction is infeasible the unmasked problem is solved instead and
// fallback_used is set. An infeasible unmasked problem yields an outcome
// with feasible=false and an infinite objective.
SolveReport solve_exact(const Instance& instance, const CandidateMask* mask = nullptr,
                        double gamma = kDefaultGamma);

// Decision-variable count of the linearized model:
// |K||E| (x) + |K||L| (y) + |K||A||E| (z) + |K||E| (chi) + |E| (t);
// a masked-out (k, e) removes one x, one chi and |A| z variables.
std::int64_t count_variables(const Instance& instance, const CandidateMask* mask = nullptr);

struct MilpExportOptions {
  // Big-M of the product-linearization rows; must dominate the largest
  // reachable t_e (utilization is expected to stay below 0.999).
  double big_m_linearization = 1e3;
};

// CPLEX-dialect LP text of the linearized model. Masked mode appends an
// `x_k_e <= 0` bound per masked-out pair. Variable names follow the fixed
// scheme x_k_e / y_k_l / z_k_a_e / chi_k_e / t_e.
std::string export_milp(const Instance& instance, const CandidateMask* mask = nullptr,
                        const MilpExportOptions& options = {});

}  // namespace edgecache
