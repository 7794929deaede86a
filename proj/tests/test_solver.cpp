#include <cctype>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "edgecache/rng.hpp"
#include "edgecache/serialize.hpp"
#include "edgecache/solver.hpp"

using namespace edgecache;

namespace {

// Exhaustive reference optimum: every one-hot placement crossed with every
// serve/skip subset per (flow, AR), evaluated through the cost module. Kept
// deliberately independent of the branch-and-bound implementation.
struct BruteForceResult {
  bool feasible = false;
  double objective = std::numeric_limits<double>::infinity();
};

BruteForceResult brute_force_optimum(const Instance& inst) {
  const int nk = inst.num_flows();
  const int na = inst.topology.num_ars();
  const int ne = inst.topology.num_ecs();
  const int nl = inst.topology.num_links();
  BruteForceResult result;

  std::vector<int> placement(nk, 0);
  std::int64_t total_x = 1;
  for (int k = 0; k < nk; ++k) total_x *= ne;
  const std::int64_t total_z = std::int64_t(1) << (nk * na);

  for (std::int64_t xi = 0; xi < total_x; ++xi) {
    std::int64_t rem = xi;
    for (int k = 0; k < nk; ++k) {
      placement[k] = static_cast<int>(rem % ne);
      rem /= ne;
    }
    Assignment asg;
    asg.ec_of_flow = placement;
    for (std::int64_t zi = 0; zi < total_z; ++zi) {
      Routing routing = Routing::zeros(nk, na, ne, nl);
      for (int k = 0; k < nk; ++k) {
        for (int a = 0; a < na; ++a) {
          if ((zi >> (k * na + a)) & 1) {
            const int e = placement[k];
            routing.set_z(k, a, e, 1);
            for (int l = 0; l < nl; ++l) {
              if (inst.topology.link_on_path(l, a, e)) routing.set_y(k, l, 1);
            }
          }
        }
      }
      if (!check_feasibility(inst, asg, routing).empty()) continue;
      const double j = total_cost(inst, asg, routing);
      if (j < result.objective) {
        result.objective = j;
        result.feasible = true;
      }
    }
  }
  return result;
}

Instance tiny_instance(std::uint64_t seed) {
  TopologyParams params;
  params.num_ars = 2 + static_cast<int>(seed % 3);   // 2..4
  params.num_routers = 1;
  params.num_ecs = 2 + static_cast<int>(seed % 2);   // 2..3
  const int n = params.num_ars + params.num_routers;
  params.num_links = std::min(n + static_cast<int>(seed % 2), n * (n - 1) / 2);
  params.max_degree = 5;
  const Topology topo = generate_topology(derive_seed(seed, 1), params);
  const int flows = 1 + static_cast<int>(seed % 3);  // 1..3
  return generate_instance(derive_seed(seed, 2), topo, flows);
}

}  // namespace

TEST_CASE("single flow with one close EC takes the obvious optimum") {
  // AR node 0, EC node 1 one hop away, ample capacity, p = 1.
  Instance inst;
  inst.topology = Topology::build(2, {{0, 1}}, {0}, {1});
  inst.flows.push_back({50.0, 1.0, {1.0}});
  inst.ec_capacity_mb = {100.0};
  inst.link_capacity_mbps = {50.0};
  const SolveReport report = solve_exact(inst);
  REQUIRE(report.solution.feasible);
  CHECK(report.solution.assignment.ec_of_flow[0] == 0);
  CHECK(report.solution.routing.z_at(0, 0, 0) == 1);
  // J = 1/(1-0.5) + 1 hop.
  CHECK(report.solution.objective == doctest::Approx(3.0));
}

TEST_CASE("gadget with no balanced split leaves one flow on the backhaul") {
  const Instance inst = partition_gadget_instance({3, 1});
  const SolveReport report = solve_exact(inst);
  REQUIRE(report.solution.feasible);
  // c = 2.25 admits only the 1-flow on a link; the 3-flow pays the miss.
  // By enumeration over 2^2 placements x 2^2 routings the optimum is
  // J = 2 (caching, both t ~= 1) + 1 + 12.
  const BruteForceResult brute = brute_force_optimum(inst);
  CHECK(report.solution.objective == doctest::Approx(brute.objective).epsilon(1e-12));
  int served = 0;
  for (int k = 0; k < 2; ++k) served += report.solution.routing.z_at(k, 0, 0) ||
                                        report.solution.routing.z_at(k, 0, 1);
  CHECK(served == 1);
}

TEST_CASE("solver matches the exhaustive oracle on random small instances") {
  int compared = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Instance inst = tiny_instance(seed);
    const BruteForceResult brute = brute_force_optimum(inst);
    const SolveReport report = solve_exact(inst);
    REQUIRE(report.solution.feasible == brute.feasible);
    if (brute.feasible) {
      CHECK(std::abs(report.solution.objective - brute.objective) <= 1e-9);
      CHECK(check_feasibility(inst, report.solution).empty());
      ++compared;
    }
  }
  CHECK(compared > 0);
}

TEST_CASE("masking can only raise the objective") {
  Rng rng(77);
  for (std::uint64_t seed = 40; seed < 52; ++seed) {
    const Instance inst = tiny_instance(seed);
    const SolveReport full = solve_exact(inst);
    if (!full.solution.feasible) continue;
    CandidateMask mask = CandidateMask::all_ones(inst.num_flows(), inst.topology.num_ecs());
    for (auto& bit : mask.mask) bit = rng.next_double() < 0.6 ? 1 : 0;
    const SolveReport masked = solve_exact(inst, &mask);
    REQUIRE(masked.solution.feasible);
    if (masked.fallback_used) {
      CHECK(masked.solution.objective == doctest::Approx(full.solution.objective));
    } else {
      CHECK(masked.solution.objective >= full.solution.objective - 1e-9);
    }
  }
}

TEST_CASE("mask keeping only the optimal placement reproduces the benchmark") {
  const Instance inst = tiny_instance(3);
  const SolveReport full = solve_exact(inst);
  REQUIRE(full.solution.feasible);
  CandidateMask mask;
  mask.num_flows = inst.num_flows();
  mask.num_ecs = inst.topology.num_ecs();
  mask.mask.assign(static_cast<std::size_t>(mask.num_flows) * mask.num_ecs, 0);
  for (int k = 0; k < mask.num_flows; ++k) {
    mask.mask[k * mask.num_ecs + full.solution.assignment.ec_of_flow[k]] = 1;
  }
  const SolveReport masked = solve_exact(inst, &mask);
  CHECK_FALSE(masked.fallback_used);
  CHECK(masked.solution.objective == doctest::Approx(full.solution.objective));
}

TEST_CASE("an unsatisfiable mask falls back to the unmasked problem") {
  Instance inst = tiny_instance(5);
  // Allow only one EC everywhere and make it too small for every flow.
  CandidateMask mask;
  mask.num_flows = inst.num_flows();
  mask.num_ecs = inst.topology.num_ecs();
  mask.mask.assign(static_cast<std::size_t>(mask.num_flows) * mask.num_ecs, 0);
  for (int k = 0; k < mask.num_flows; ++k) mask.mask[k * mask.num_ecs] = 1;
  double total = 0.0;
  for (const auto& f : inst.flows) total += f.s_mb;
  inst.ec_capacity_mb[0] = total * 0.9;
  inst.flows[0].s_mb = inst.ec_capacity_mb[0] * 0.95;
  if (inst.num_flows() == 1) inst.ec_capacity_mb[0] = inst.flows[0].s_mb * 0.5;
  const SolveReport full = solve_exact(inst);
  const SolveReport masked = solve_exact(inst, &mask);
  if (full.solution.feasible) {
    CHECK(masked.fallback_used);
    CHECK(masked.solution.objective == doctest::Approx(full.solution.objective));
  } else {
    CHECK_FALSE(masked.solution.feasible);
  }
}

TEST_CASE("storage too small for any placement reports infeasibility") {
  Instance inst;
  inst.topology = Topology::build(2, {{0, 1}}, {0}, {1});
  inst.flows.push_back({50.0, 1.0, {1.0}});
  inst.ec_capacity_mb = {40.0};
  inst.link_capacity_mbps = {50.0};
  const SolveReport report = solve_exact(inst);
  CHECK_FALSE(report.solution.feasible);
  CHECK(std::isinf(report.solution.objective));
}

TEST_CASE("variable counts match the closed form on the reference topology") {
  const Topology topo = generate_topology(1);  // 7 ARs, 6 ECs, 20 links
  for (const auto& [flows, expected] : std::vector<std::pair<int, std::int64_t>>{
           {5, 376}, {10, 746}, {15, 1116}, {20, 1486}}) {
    Instance inst = generate_instance(9, topo, flows);
    CHECK(count_variables(inst) == expected);
  }
}

TEST_CASE("masked variable count removes x, chi and the z row") {
  const Topology topo = generate_topology(1);
  const Instance inst = generate_instance(9, topo, 5);
  CandidateMask mask = CandidateMask::all_ones(5, topo.num_ecs());
  mask.mask[0] = 0;
  mask.mask[7] = 0;
  mask.mask[13] = 0;
  CHECK(count_variables(inst, &mask) == 376 - 3 * (2 + topo.num_ars()));
}

TEST_CASE("repeated solves are bit-identical including node counts") {
  const Instance inst = tiny_instance(8);
  const SolveReport a = solve_exact(inst);
  const SolveReport b = solve_exact(inst);
  CHECK(a.nodes_explored == b.nodes_explored);
  CHECK(a.solution.objective == b.solution.objective);
  CHECK(a.solution.assignment.ec_of_flow == b.solution.assignment.ec_of_flow);
  CHECK(a.solution.routing.z == b.solution.routing.z);
  CHECK(solution_to_json(inst, a.solution) == solution_to_json(inst, b.solution));
}

namespace {

// Distinct identifier tokens in an LP document, excluding keywords and row
// labels.
std::set<std::string> lp_variables(const std::string& text) {
  static const std::set<std::string> keywords = {"Minimize", "Subject", "To",
                                                 "Bounds",   "Binary",  "End"};
  std::set<std::string> vars;
  std::string token;
  bool in_comment = false;
  auto flush = [&]() {
    if (token.empty()) return;
    const bool label = token.back() == ':';
    if (label) token.pop_back();
    if (!label && !keywords.count(token) && !std::isdigit(token[0]) && token != "obj") {
      vars.insert(token);
    }
    token.clear();
  };
  for (char c : text) {
    if (c == '\\') in_comment = true;
    if (c == '\n') {
      in_comment = false;
      flush();
      continue;
    }
    if (in_comment) continue;
    if (std::isspace(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '<' ||
        c == '>' || c == '=') {
      flush();
    } else {
      token += c;
    }
  }
  flush();
  // Numeric tokens like "1e-09" split on '-'; drop leftovers starting with a
  // digit or dot.
  std::set<std::string> cleaned;
  for (const std::string& v : vars) {
    if (!std::isdigit(static_cast<unsigned char>(v[0])) && v[0] != '.') cleaned.insert(v);
  }
  return cleaned;
}

}  // namespace

TEST_CASE("exported LP declares exactly the counted variables") {
  const Instance inst = tiny_instance(4);
  const std::string lp = export_milp(inst);
  const auto vars = lp_variables(lp);
  CHECK(static_cast<std::int64_t>(vars.size()) == count_variables(inst));
  // Naming scheme spot checks.
  CHECK(vars.count("x_0_0") == 1);
  CHECK(vars.count("t_0") == 1);
  CHECK(vars.count("chi_0_0") == 1);
  CHECK(vars.count("y_0_0") == 1);
  CHECK(vars.count("z_0_0_0") == 1);
}

TEST_CASE("LP sections appear in the required order") {
  const Instance inst = tiny_instance(4);
  const std::string lp = export_milp(inst);
  const auto minimize = lp.find("Minimize");
  const auto subject = lp.find("Subject To");
  const auto bounds = lp.find("Bounds");
  const auto binary = lp.find("Binary");
  const auto end = lp.find("End");
  REQUIRE(minimize != std::string::npos);
  REQUIRE(subject != std::string::npos);
  REQUIRE(bounds != std::string::npos);
  REQUIRE(binary != std::string::npos);
  REQUIRE(end != std::string::npos);
  CHECK(minimize < subject);
  CHECK(subject < bounds);
  CHECK(bounds < binary);
  CHECK(binary < end);
}

namespace {

// Lines of the form " x_k_e <= 0" (mask bounds, not labeled constraint rows).
int count_mask_bound_lines(const std::string& lp) {
  int bound_lines = 0;
  std::size_t start = 0;
  while (start < lp.size()) {
    std::size_t end = lp.find('\n', start);
    if (end == std::string::npos) end = lp.size();
    const std::string line = lp.substr(start, end - start);
    if (line.rfind(" x_", 0) == 0 && line.find("<= 0") != std::string::npos) ++bound_lines;
    start = end + 1;
  }
  return bound_lines;
}

}  // namespace

TEST_CASE("masked export appends one bound line per masked-out pair") {
  const Instance inst = tiny_instance(4);
  CandidateMask mask = CandidateMask::all_ones(inst.num_flows(), inst.topology.num_ecs());
  mask.mask[0] = 0;
  mask.mask[1] = 0;
  mask.mask[2] = 0;
  CHECK(count_mask_bound_lines(export_milp(inst, &mask)) == 3);
  CHECK(count_mask_bound_lines(export_milp(inst)) == 0);
}

TEST_CASE("solver rejects dimension-mismatched masks") {
  const Instance inst = tiny_instance(4);
  CandidateMask mask = CandidateMask::all_ones(inst.num_flows() + 1, inst.topology.num_ecs());
  CHECK_THROWS_AS(solve_exact(inst, &mask), std::invalid_argument);
}
