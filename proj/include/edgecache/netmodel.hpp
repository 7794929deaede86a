#pragma once

#include <cstdint>
#include <vector>

namespace edgecache {

inline constexpr int kDefaultBackhaulHops = 12;

struct Link {
  int u = -1;
  int v = -1;
};

struct HopData {
  std::vector<int> hops;           // |A| x |E|, row-major
  std::vector<std::uint8_t> incidence;  // |L| x |A| x |E|
};

// Undirected network graph with access routers (ARs) and edge clouds (ECs).
// Hop counts and per-link path incidence are derived at construction time
// from one canonical shortest path per (AR, EC) pair.
struct Topology {
  int num_nodes = 0;
  std::vector<Link> links;
  std::vector<int> ar_ids;
  std::vector<int> ec_ids;
  int n_backhaul = kDefaultBackhaulHops;

  // Derived.
  std::vector<int> hop_matrix;          // |A| x |E|
  std::vector<std::uint8_t> incidence;  // |L| x |A| x |E|

  int num_ars() const { return static_cast<int>(ar_ids.size()); }
  int num_ecs() const { return static_cast<int>(ec_ids.size()); }
  int num_links() const { return static_cast<int>(links.size()); }

  int hops(int a, int e) const { return hop_matrix[a * num_ecs() + e]; }
  bool link_on_path(int l, int a, int e) const {
    return incidence[(l * num_ars() + a) * num_ecs() + e] != 0;
  }

  // Validates the inputs, computes hop_matrix and incidence.
  static Topology build(int num_nodes, std::vector<Link> links, std::vector<int> ar_ids,
                        std::vector<int> ec_ids, int n_backhaul = kDefaultBackhaulHops);
};

// Breadth-first hop counts plus the links of one canonical shortest path per
// (AR, EC) pair. Ties are broken toward the lexicographically smallest
// node-id sequence. Throws if some pair is disconnected.
HopData shortest_hops(int num_nodes, const std::vector<Link>& links,
                      const std::vector<int>& ar_ids, const std::vector<int>& ec_ids);

struct TopologyParams {
  int num_ars = 7;
  int num_ecs = 6;
  int num_links = 20;
  int num_routers = 5;  // general (non-AR) nodes
  int n_backhaul = kDefaultBackhaulHops;
  int max_degree = 5;
};

// Random mesh tree-like topology: spanning tree plus chord links, node
// degrees capped at max_degree, ECs drawn from all nodes. Deterministic per
// seed.
Topology generate_topology(std::uint64_t seed, const TopologyParams& params = {});

struct FlowDemand {
  double s_mb = 0.0;      // content size
  double b_mbps = 0.0;    // transmission rate
  std::vector<double> p;  // attach probability per AR
};

struct Instance {
  Topology topology;
  std::vector<FlowDemand> flows;
  std::vector<double> ec_capacity_mb;       // per EC
  std::vector<double> link_capacity_mbps;   // per link
  double alpha = 1.0;
  double beta = 1.0;

  int num_flows() const { return static_cast<int>(flows.size()); }
};

// Throws std::invalid_argument when structural invariants are violated
// (non-positive demands or capacities, bad probability rows, ...).
void validate(const Instance& instance);

// Demands and capacities drawn uniformly from the paper's experiment ranges:
// s in [10,50] MB, b in [1,10] Mbps, w in [100,500] MB, c in [50,100] Mbps;
// p rows sampled uniformly then normalized to sum to one.
Instance generate_instance(std::uint64_t seed, const Topology& topology, int num_flows,
                           double alpha = 1.0, double beta = 1.0);

// Minimal two-EC / one-AR instance whose link capacities encode a balanced
// set-partition question over the given flow bandwidths: both links get
// capacity sum(b)/2 + min(b)/4 and EC storage is effectively unbounded.
Instance partition_gadget_instance(const std::vector<double>& flow_bandwidths);

struct UtilizationView {
  int num_flows = 0;
  int num_ecs = 0;
  int num_links = 0;
  std::vector<double> q;  // |K| x |E|, q_ke = s_k / w_e
  std::vector<double> r;  // |K| x |L|, r_kl = b_k / c_l

  double q_at(int k, int e) const { return q[k * num_ecs + e]; }
  double r_at(int k, int l) const { return r[k * num_links + l]; }
};

UtilizationView utilization(const Instance& instance);

}  // namespace edgecache
