#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "edgecache/cost.hpp"
#include "edgecache/netmodel.hpp"
#include "edgecache/rng.hpp"

using namespace edgecache;

namespace {

// One AR (node 0), two ECs (nodes 1 at 1 hop, 3 at 2 hops via node 2).
Instance two_ec_instance() {
  Instance inst;
  inst.topology = Topology::build(4, {{0, 1}, {0, 2}, {2, 3}}, {0}, {1, 3});
  inst.flows.push_back({50.0, 10.0, {1.0}});
  inst.ec_capacity_mb = {100.0, 200.0};
  inst.link_capacity_mbps = {50.0, 50.0, 50.0};
  validate(inst);
  return inst;
}

Assignment assign(std::vector<int> placement) {
  Assignment a;
  a.ec_of_flow = std::move(placement);
  return a;
}

}  // namespace

TEST_CASE("caching cost of one flow at half utilization") {
  const Instance inst = two_ec_instance();
  CHECK(caching_cost(inst, assign({0})) == doctest::Approx(2.0));  // 1/(1-0.5)
}

TEST_CASE("caching cost with an empty placement is an empty sum") {
  const Instance inst = two_ec_instance();
  CHECK(caching_cost_partial(inst, assign({Assignment::kUnassigned})) == 0.0);
  CHECK_THROWS_AS(caching_cost(inst, assign({Assignment::kUnassigned})), std::invalid_argument);
}

TEST_CASE("caching cost of two flows sharing an EC") {
  Instance inst = two_ec_instance();
  inst.flows.push_back({20.0, 1.0, {1.0}});
  inst.flows[0].s_mb = 30.0;
  CHECK(caching_cost(inst, assign({0, 0})) == doctest::Approx(4.0));  // 2 * 1/(1-0.5)
}

TEST_CASE("caching cost overflows to the sentinel at full utilization") {
  Instance inst = two_ec_instance();
  inst.flows[0].s_mb = 100.0;
  inst.ec_capacity_mb[0] = 100.0;
  CHECK(caching_cost(inst, assign({0})) == kOverflowCost);
}

TEST_CASE("transmission cost single attach point") {
  const Instance inst = two_ec_instance();
  Routing r = complete_routing(inst, assign({0}));
  CHECK(transmission_cost(inst, r) == doctest::Approx(1.0));  // 1 hop, hit probability 1
}

TEST_CASE("transmission cost with no routing is the full backhaul price") {
  Instance inst = two_ec_instance();
  for (int i = 0; i < 4; ++i) inst.flows.push_back(inst.flows[0]);
  const Routing zeros = Routing::zeros(5, 1, 2, 3);
  CHECK(transmission_cost(inst, zeros) == doctest::Approx(60.0));  // 5 * 12
}

TEST_CASE("transmission cost splits over attach probabilities") {
  // Two ARs with p = {0.7, 0.3}; only the first is routed at 1 hop.
  Instance inst;
  inst.topology = Topology::build(3, {{0, 2}, {1, 2}}, {0, 1}, {2});
  inst.flows.push_back({10.0, 1.0, {0.7, 0.3}});
  inst.ec_capacity_mb = {100.0};
  inst.link_capacity_mbps = {50.0, 50.0};
  Routing r = Routing::zeros(1, 2, 1, 2);
  r.set_z(0, 0, 0, 1);
  r.set_y(0, 0, 1);
  CHECK(transmission_cost(inst, r) == doctest::Approx(0.7 * 1 + 0.3 * 12));
}

TEST_CASE("total cost weights the two parts") {
  Instance inst = two_ec_instance();
  const Assignment a = assign({0});
  const Routing r = complete_routing(inst, a);
  SUBCASE("equal weights") {
    CHECK(total_cost(inst, a, r) == doctest::Approx(3.0));  // 2 + 1
  }
  SUBCASE("alpha zero leaves only transmission") {
    inst.alpha = 0.0;
    CHECK(total_cost(inst, a, r) == doctest::Approx(1.0));
  }
  SUBCASE("mixed weights") {
    inst.alpha = 2.0;
    inst.beta = 0.5;
    CHECK(total_cost(inst, a, r) ==
          doctest::Approx(2.0 * caching_cost(inst, a) + 0.5 * transmission_cost(inst, r)));
  }
}

TEST_CASE("feasibility flags storage overflow with the EC id") {
  Instance inst = two_ec_instance();
  inst.flows[0].s_mb = 101.0;  // one MB over
  inst.ec_capacity_mb[0] = 100.0;
  const Assignment a = assign({0});
  const auto violations = check_feasibility(inst, a, complete_routing(inst, a));
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].code == "4c");
  CHECK(violations[0].ec == 0);
}

TEST_CASE("feasibility flags routing to a non-hosting EC") {
  const Instance inst = two_ec_instance();
  const Assignment a = assign({0});
  Routing r = complete_routing(inst, a);
  r.set_z(0, 0, 1, 1);  // routed to EC 1, cached at EC 0
  bool found_4f = false;
  for (const auto& v : check_feasibility(inst, a, r)) found_4f |= v.code == "4f";
  CHECK(found_4f);
}

TEST_CASE("feasibility flags y inconsistencies both ways") {
  const Instance inst = two_ec_instance();
  const Assignment a = assign({0});
  SUBCASE("y set without a covering path") {
    Routing r = complete_routing(inst, a);
    r.set_y(0, 1, 1);
    bool found = false;
    for (const auto& v : check_feasibility(inst, a, r)) found |= v.code == "4g";
    CHECK(found);
  }
  SUBCASE("y missing although a path covers the link") {
    Routing r = complete_routing(inst, a);
    r.set_y(0, 0, 0);
    bool found = false;
    for (const auto& v : check_feasibility(inst, a, r)) found |= v.code == "4h";
    CHECK(found);
  }
}

TEST_CASE("feasibility flags unassigned flows as 4b") {
  const Instance inst = two_ec_instance();
  const Assignment a = assign({Assignment::kUnassigned});
  const auto violations = check_feasibility(inst, a, Routing::zeros(1, 1, 2, 3));
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].code == "4b");
  CHECK(violations[0].flow == 0);
}

TEST_CASE("penalty score equals the cost when nothing is overloaded") {
  const Instance inst = two_ec_instance();
  const Assignment a = assign({0});
  const Routing r = complete_routing(inst, a);
  CHECK(penalty_score(inst, a, r, 100.0) == doctest::Approx(total_cost(inst, a, r)));
}

TEST_CASE("penalty score charges the dominant excess") {
  // Two half-loaded ECs: every per-resource constraint holds, yet the pooled
  // storage pressure sums to 1.5 and is charged as printed.
  Instance inst;
  inst.topology = Topology::build(3, {{0, 1}, {0, 2}}, {0}, {1, 2});
  inst.flows.push_back({75.0, 0.1, {1.0}});
  inst.flows.push_back({75.0, 0.1, {1.0}});
  inst.ec_capacity_mb = {100.0, 100.0};
  inst.link_capacity_mbps = {100.0, 100.0};
  const Assignment a = assign({0, 1});
  const Routing r = complete_routing(inst, a);
  const double j = total_cost(inst, a, r);
  CHECK(penalty_score(inst, a, r, 100.0) == doctest::Approx(100.0 * 0.5 + j));
}

TEST_CASE("penalty score adds both excesses when both overflow") {
  Instance inst;
  inst.topology = Topology::build(3, {{0, 1}, {0, 2}}, {0}, {1, 2});
  inst.flows.push_back({60.0, 6.5, {1.0}});
  inst.flows.push_back({60.0, 6.5, {1.0}});
  inst.ec_capacity_mb = {100.0, 100.0};
  inst.link_capacity_mbps = {10.0, 10.0};
  const Assignment a = assign({0, 1});
  const Routing r = complete_routing(inst, a);
  const double j = total_cost(inst, a, r);
  // sum q x = 1.2, sum r y = 1.3 -> max{0, .2, .3, .5} = .5
  CHECK(penalty_score(inst, a, r, 10.0) == doctest::Approx(10.0 * 0.5 + j));
}

TEST_CASE("per-resource penalty looks at the worst single resource") {
  // Each link carries 0.65 of its capacity: pooled pressure 1.3 is charged,
  // while no single resource is overloaded.
  Instance inst;
  inst.topology = Topology::build(3, {{0, 1}, {0, 2}}, {0}, {1, 2});
  inst.flows.push_back({10.0, 6.5, {1.0}});
  inst.flows.push_back({10.0, 6.5, {1.0}});
  inst.ec_capacity_mb = {100.0, 100.0};
  inst.link_capacity_mbps = {10.0, 10.0};
  const Assignment a = assign({0, 1});
  const Routing r = complete_routing(inst, a);
  const double j = total_cost(inst, a, r);
  CHECK(penalty_score(inst, a, r, 10.0, PenaltyAggregation::kPooled) ==
        doctest::Approx(10.0 * 0.3 + j));
  CHECK(penalty_score(inst, a, r, 10.0, PenaltyAggregation::kPerResource) == doctest::Approx(j));
}

TEST_CASE("penalty score is nondecreasing in gamma for infeasible placements") {
  Instance inst = two_ec_instance();
  inst.flows[0].s_mb = 150.0;
  inst.ec_capacity_mb[0] = 100.0;
  const Assignment a = assign({0});
  const Routing r = complete_routing(inst, a);
  double prev = -1.0;
  for (double gamma : {0.0, 1.0, 10.0, 100.0, 1000.0}) {
    const double s = penalty_score(inst, a, r, gamma);
    CHECK(s >= prev);
    prev = s;
  }
}

TEST_CASE("complete_routing respects the probability threshold") {
  Instance inst;
  inst.topology = Topology::build(3, {{0, 2}, {1, 2}}, {0, 1}, {2});
  inst.flows.push_back({10.0, 1.0, {0.7, 0.3}});
  inst.ec_capacity_mb = {100.0};
  inst.link_capacity_mbps = {50.0, 50.0};
  SUBCASE("default threshold routes every positive attach point") {
    const Routing r = complete_routing(inst, assign({0}));
    CHECK(r.z_at(0, 0, 0) == 1);
    CHECK(r.z_at(0, 1, 0) == 1);
  }
  SUBCASE("higher threshold keeps only the likely AR") {
    const Routing r = complete_routing(inst, assign({0}), 0.5);
    CHECK(r.z_at(0, 0, 0) == 1);
    CHECK(r.z_at(0, 1, 0) == 0);
  }
}

TEST_CASE("complete_routing marks exactly the union of path links") {
  const Topology topo = generate_topology(31);
  const Instance inst = generate_instance(31, topo, 4);
  Rng rng(99);
  for (int trial = 0; trial < 25; ++trial) {
    Assignment a = Assignment::unassigned(4);
    for (int k = 0; k < 4; ++k) {
      a.ec_of_flow[k] = static_cast<int>(rng.next_below(topo.num_ecs()));
    }
    const Routing r = complete_routing(inst, a);
    for (int k = 0; k < 4; ++k) {
      for (int l = 0; l < topo.num_links(); ++l) {
        bool expected = false;
        for (int ar = 0; ar < topo.num_ars(); ++ar) {
          for (int e = 0; e < topo.num_ecs(); ++e) {
            expected |= r.z_at(k, ar, e) && topo.link_on_path(l, ar, e);
          }
        }
        CHECK(r.y_at(k, l) == (expected ? 1 : 0));
      }
    }
  }
}

TEST_CASE("completed routings satisfy the routing invariants") {
  const Topology topo = generate_topology(53);
  const Instance inst = generate_instance(53, topo, 4);
  Rng rng(53);
  for (int trial = 0; trial < 25; ++trial) {
    Assignment a = Assignment::unassigned(4);
    for (int k = 0; k < 4; ++k) {
      a.ec_of_flow[k] = static_cast<int>(rng.next_below(topo.num_ecs()));
    }
    const Routing r = complete_routing(inst, a);
    for (const auto& v : check_feasibility(inst, a, r)) {
      // Capacity findings are legitimate; routing consistency must hold.
      CHECK(v.code != "4e");
      CHECK(v.code != "4f");
      CHECK(v.code != "4g");
      CHECK(v.code != "4h");
    }
  }
}

TEST_CASE("caching cost never decreases when a flow is added") {
  const Topology topo = generate_topology(37);
  const Instance inst = generate_instance(37, topo, 5);
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Assignment partial = Assignment::unassigned(5);
    for (int k = 0; k < 5; ++k) {
      if (rng.next_double() < 0.5) {
        partial.ec_of_flow[k] = static_cast<int>(rng.next_below(topo.num_ecs()));
      }
    }
    const double before = caching_cost_partial(inst, partial);
    int free_flow = -1;
    for (int k = 0; k < 5; ++k) {
      if (partial.ec_of_flow[k] == Assignment::kUnassigned) free_flow = k;
    }
    if (free_flow < 0) continue;
    Assignment more = partial;
    more.ec_of_flow[free_flow] = static_cast<int>(rng.next_below(topo.num_ecs()));
    CHECK(caching_cost_partial(inst, more) >= before - 1e-12);
  }
}

TEST_CASE("closer-than-backhaul routing flips only lower the transmission cost") {
  const Topology topo = generate_topology(41);
  const Instance inst = generate_instance(41, topo, 3);
  Assignment a = assign({0, 1, 2});
  Routing r = Routing::zeros(3, topo.num_ars(), topo.num_ecs(), topo.num_links());
  const double base = transmission_cost(inst, r);
  for (int k = 0; k < 3; ++k) {
    for (int ar = 0; ar < topo.num_ars(); ++ar) {
      const int e = a.ec_of_flow[k];
      if (topo.hops(ar, e) >= topo.n_backhaul) continue;
      Routing flipped = r;
      flipped.set_z(k, ar, e, 1);
      CHECK(transmission_cost(inst, flipped) <= base + 1e-12);
    }
  }
}

TEST_CASE("penalty equality tracks feasibility") {
  // The printed pooled aggregation can charge a feasible placement (six
  // lightly loaded ECs already sum past one), so only one direction holds
  // for it; the per-resource variant matches the feasibility verdict.
  const Topology topo = generate_topology(43);
  Rng rng(43);
  for (int trial = 0; trial < 40; ++trial) {
    const Instance inst = generate_instance(rng.next_u64(), topo, 6);
    Assignment a = Assignment::unassigned(6);
    for (int k = 0; k < 6; ++k) {
      a.ec_of_flow[k] = static_cast<int>(rng.next_below(topo.num_ecs()));
    }
    const Routing r = complete_routing(inst, a);
    const bool feasible = check_feasibility(inst, a, r).empty();
    const double j = total_cost(inst, a, r);
    bool pooled_equal = true;
    bool per_resource_equal = true;
    for (double gamma : {1.0, 100.0, 1e4}) {
      if (std::abs(penalty_score(inst, a, r, gamma) - j) > 1e-9) pooled_equal = false;
      if (std::abs(penalty_score(inst, a, r, gamma, PenaltyAggregation::kPerResource) - j) >
          1e-9) {
        per_resource_equal = false;
      }
    }
    if (feasible) {
      CHECK(per_resource_equal);
      CHECK(caching_cost_partial(inst, a) < kOverflowCost);
    }
    if (pooled_equal) {
      // Unpenalized under the pooled rule implies every resource fits.
      CHECK(feasible);
    }
  }
}
