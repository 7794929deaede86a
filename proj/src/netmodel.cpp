#include "edgecache/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>

#include "edgecache/rng.hpp"

namespace edgecache {

namespace {

std::vector<std::vector<int>> adjacency(int num_nodes, const std::vector<Link>& links) {
  std::vector<std::vector<int>> adj(num_nodes);
  for (const Link& l : links) {
    if (l.u < 0 || l.u >= num_nodes || l.v < 0 || l.v >= num_nodes || l.u == l.v) {
      throw std::invalid_argument("link endpoints out of range: (" + std::to_string(l.u) + "," +
                                  std::to_string(l.v) + ")");
    }
    adj[l.u].push_back(l.v);
    adj[l.v].push_back(l.u);
  }
  for (auto& nbrs : adj) std::sort(nbrs.begin(), nbrs.end());
  return adj;
}

std::map<std::pair<int, int>, int> link_index(const std::vector<Link>& links) {
  std::map<std::pair<int, int>, int> idx;
  for (int l = 0; l < static_cast<int>(links.size()); ++l) {
    const int u = std::min(links[l].u, links[l].v);
    const int v = std::max(links[l].u, links[l].v);
    if (!idx.emplace(std::make_pair(u, v), l).second) {
      throw std::invalid_argument("duplicate link (" + std::to_string(u) + "," +
                                  std::to_string(v) + ")");
    }
  }
  return idx;
}

}  // namespace

HopData shortest_hops(int num_nodes, const std::vector<Link>& links,
                      const std::vector<int>& ar_ids, const std::vector<int>& ec_ids) {
  const auto adj = adjacency(num_nodes, links);
  const auto lidx = link_index(links);
  const int na = static_cast<int>(ar_ids.size());
  const int ne = static_cast<int>(ec_ids.size());
  const int nl = static_cast<int>(links.size());

  for (int id : ar_ids)
    if (id < 0 || id >= num_nodes) throw std::invalid_argument("ar id out of range");
  for (int id : ec_ids)
    if (id < 0 || id >= num_nodes) throw std::invalid_argument("ec id out of range");

  HopData out;
  out.hops.assign(static_cast<std::size_t>(na) * ne, 0);
  out.incidence.assign(static_cast<std::size_t>(nl) * na * ne, 0);

  for (int e = 0; e < ne; ++e) {
    // BFS from the EC node; dist[v] is the hop count to that EC.
    std::vector<int> dist(num_nodes, -1);
    std::queue<int> q;
    dist[ec_ids[e]] = 0;
    q.push(ec_ids[e]);
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      for (int nb : adj[v]) {
        if (dist[nb] < 0) {
          dist[nb] = dist[v] + 1;
          q.push(nb);
        }
      }
    }
    for (int a = 0; a < na; ++a) {
      const int start = ar_ids[a];
      if (dist[start] < 0) {
        throw std::runtime_error("no path between AR node " + std::to_string(start) +
                                 " and EC node " + std::to_string(ec_ids[e]));
      }
      out.hops[a * ne + e] = dist[start];
      // Greedy descent toward the EC, always through the smallest node id,
      // yields the lexicographically smallest shortest node sequence.
      int cur = start;
      while (dist[cur] > 0) {
        int next = -1;
        for (int nb : adj[cur]) {
          if (dist[nb] == dist[cur] - 1) {
            next = nb;
            break;  // neighbours sorted ascending
          }
        }
        const int u = std::min(cur, next);
        const int v = std::max(cur, next);
        const int l = lidx.at(std::make_pair(u, v));
        out.incidence[(static_cast<std::size_t>(l) * na + a) * ne + e] = 1;
        cur = next;
      }
    }
  }
  return out;
}

Topology Topology::build(int num_nodes, std::vector<Link> links, std::vector<int> ar_ids,
                         std::vector<int> ec_ids, int n_backhaul) {
  if (num_nodes <= 0) throw std::invalid_argument("num_nodes must be positive");
  if (ar_ids.empty()) throw std::invalid_argument("at least one AR required");
  if (ec_ids.empty()) throw std::invalid_argument("at least one EC required");
  if (n_backhaul <= 0) throw std::invalid_argument("n_backhaul must be positive");
  Topology t;
  t.num_nodes = num_nodes;
  t.links = std::move(links);
  t.ar_ids = std::move(ar_ids);
  t.ec_ids = std::move(ec_ids);
  t.n_backhaul = n_backhaul;
  HopData hd = shortest_hops(t.num_nodes, t.links, t.ar_ids, t.ec_ids);
  t.hop_matrix = std::move(hd.hops);
  t.incidence = std::move(hd.incidence);
  return t;
}

Topology generate_topology(std::uint64_t seed, const TopologyParams& params) {
  const int n = params.num_ars + params.num_routers;
  if (params.num_ars < 1 || params.num_ecs < 1) {
    throw std::invalid_argument("need at least one AR and one EC");
  }
  if (params.num_ecs > n) throw std::invalid_argument("more ECs than nodes");
  if (params.num_links < n - 1) {
    throw std::invalid_argument("num_links=" + std::to_string(params.num_links) +
                                " cannot connect " + std::to_string(n) + " nodes");
  }
  if (2 * params.num_links > params.max_degree * n) {
    throw std::invalid_argument("degree bound " + std::to_string(params.max_degree) +
                                " cannot host " + std::to_string(params.num_links) + " links on " +
                                std::to_string(n) + " nodes");
  }
  if (params.num_links > n * (n - 1) / 2) {
    throw std::invalid_argument("a simple graph on " + std::to_string(n) +
                                " nodes holds at most " + std::to_string(n * (n - 1) / 2) +
                                " links");
  }

  Rng rng(seed);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);

  std::vector<int> degree(n, 0);
  std::vector<Link> links;
  std::map<std::pair<int, int>, bool> used;
  auto add_link = [&](int u, int v) {
    links.push_back({std::min(u, v), std::max(u, v)});
    used[{std::min(u, v), std::max(u, v)}] = true;
    ++degree[u];
    ++degree[v];
  };

  // Random spanning tree under the degree cap.
  for (int i = 1; i < n; ++i) {
    std::vector<int> candidates;
    for (int j = 0; j < i; ++j) {
      if (degree[perm[j]] < params.max_degree) candidates.push_back(perm[j]);
    }
    if (candidates.empty()) {
      throw std::runtime_error("degree bound too tight to build a spanning tree");
    }
    const int parent = candidates[rng.next_below(candidates.size())];
    add_link(parent, perm[i]);
  }

  // Chord links.
  std::uint64_t attempts = 0;
  const std::uint64_t max_attempts = 10000ull * static_cast<std::uint64_t>(params.num_links) + 10000;
  while (static_cast<int>(links.size()) < params.num_links) {
    if (++attempts > max_attempts) {
      throw std::runtime_error("could not place requested links under the degree bound");
    }
    const int u = static_cast<int>(rng.next_below(n));
    const int v = static_cast<int>(rng.next_below(n));
    if (u == v) continue;
    if (degree[u] >= params.max_degree || degree[v] >= params.max_degree) continue;
    if (used.count({std::min(u, v), std::max(u, v)})) continue;
    add_link(u, v);
  }

  std::vector<int> ar_ids(params.num_ars);
  std::iota(ar_ids.begin(), ar_ids.end(), 0);

  std::vector<int> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  rng.shuffle(pool);
  std::vector<int> ec_ids(pool.begin(), pool.begin() + params.num_ecs);
  std::sort(ec_ids.begin(), ec_ids.end());

  return Topology::build(n, std::move(links), std::move(ar_ids), std::move(ec_ids),
                         params.n_backhaul);
}

void validate(const Instance& instance) {
  const int na = instance.topology.num_ars();
  const int ne = instance.topology.num_ecs();
  const int nl = instance.topology.num_links();
  if (static_cast<int>(instance.ec_capacity_mb.size()) != ne) {
    throw std::invalid_argument("ec capacity count does not match EC count");
  }
  if (static_cast<int>(instance.link_capacity_mbps.size()) != nl) {
    throw std::invalid_argument("link capacity count does not match link count");
  }
  if (instance.alpha < 0 || instance.beta < 0) {
    throw std::invalid_argument("cost weights must be nonnegative");
  }
  for (double w : instance.ec_capacity_mb)
    if (!(w > 0)) throw std::invalid_argument("EC capacity must be strictly positive");
  for (double c : instance.link_capacity_mbps)
    if (!(c > 0)) throw std::invalid_argument("link capacity must be strictly positive");
  for (const FlowDemand& f : instance.flows) {
    if (!(f.s_mb > 0)) throw std::invalid_argument("flow size must be strictly positive");
    if (!(f.b_mbps > 0)) throw std::invalid_argument("flow bandwidth must be strictly positive");
    if (static_cast<int>(f.p.size()) != na) {
      throw std::invalid_argument("probability row length does not match AR count");
    }
    double sum = 0.0;
    for (double p : f.p) {
      if (p < 0.0 || p > 1.0) throw std::invalid_argument("attach probability outside [0,1]");
      sum += p;
    }
    if (sum > 1.0 + 1e-9) throw std::invalid_argument("probability row sums above one");
  }
}

Instance generate_instance(std::uint64_t seed, const Topology& topology, int num_flows,
                           double alpha, double beta) {
  if (num_flows < 1) throw std::invalid_argument("num_flows must be at least 1");
  Rng rng(seed);
  Instance inst;
  inst.topology = topology;
  inst.alpha = alpha;
  inst.beta = beta;
  const int na = topology.num_ars();
  inst.flows.resize(num_flows);
  for (FlowDemand& f : inst.flows) {
    f.s_mb = rng.uniform(10.0, 50.0);
    f.b_mbps = rng.uniform(1.0, 10.0);
    f.p.resize(na);
    double sum = 0.0;
    for (double& p : f.p) {
      p = rng.next_double();
      sum += p;
    }
    if (sum <= 0.0) {
      f.p.assign(na, 0.0);
      f.p[0] = 1.0;
    } else {
      for (double& p : f.p) p /= sum;
    }
  }
  inst.ec_capacity_mb.resize(topology.num_ecs());
  for (double& w : inst.ec_capacity_mb) w = rng.uniform(100.0, 500.0);
  inst.link_capacity_mbps.resize(topology.num_links());
  for (double& c : inst.link_capacity_mbps) c = rng.uniform(50.0, 100.0);
  validate(inst);
  return inst;
}

Instance partition_gadget_instance(const std::vector<double>& flow_bandwidths) {
  if (flow_bandwidths.empty()) {
    throw std::invalid_argument("gadget needs at least one flow bandwidth");
  }
  double sum = 0.0;
  double min_b = flow_bandwidths.front();
  for (double b : flow_bandwidths) {
    if (!(b > 0)) throw std::invalid_argument("flow bandwidth must be strictly positive");
    sum += b;
    min_b = std::min(min_b, b);
  }
  // Node 0 is the single AR; nodes 1 and 2 are the ECs, one link to each.
  Instance inst;
  inst.topology = Topology::build(3, {{0, 1}, {0, 2}}, {0}, {1, 2});
  const double nu = min_b / 4.0;
  const double cap = sum / 2.0 + nu;
  inst.link_capacity_mbps = {cap, cap};
  inst.ec_capacity_mb = {1e9, 1e9};
  for (double b : flow_bandwidths) {
    FlowDemand f;
    f.s_mb = 1.0;
    f.b_mbps = b;
    f.p = {1.0};
    inst.flows.push_back(std::move(f));
  }
  validate(inst);
  return inst;
}

UtilizationView utilization(const Instance& instance) {
  UtilizationView view;
  view.num_flows = instance.num_flows();
  view.num_ecs = instance.topology.num_ecs();
  view.num_links = instance.topology.num_links();
  view.q.resize(static_cast<std::size_t>(view.num_flows) * view.num_ecs);
  view.r.resize(static_cast<std::size_t>(view.num_flows) * view.num_links);
  for (int k = 0; k < view.num_flows; ++k) {
    for (int e = 0; e < view.num_ecs; ++e) {
      view.q[k * view.num_ecs + e] = instance.flows[k].s_mb / instance.ec_capacity_mb[e];
    }
    for (int l = 0; l < view.num_links; ++l) {
      view.r[k * view.num_links + l] = instance.flows[k].b_mbps / instance.link_capacity_mbps[l];
    }
  }
  return view;
}

}  // namespace edgecache
