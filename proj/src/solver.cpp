#include "edgecache/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace edgecache {

namespace {

constexpr double kTieEps = 1e-9;

struct ZDecision {
  int flow = 0;
  int ar = 0;
  double benefit = 0.0;
};

class BranchAndBound {
 public:
  BranchAndBound(const Instance& inst, const CandidateMask* mask)
      : inst_(inst),
        mask_(mask),
        nk_(inst.num_flows()),
        na_(inst.topology.num_ars()),
        ne_(inst.topology.num_ecs()),
        nl_(inst.topology.num_links()),
        nt_(inst.topology.n_backhaul),
        view_(utilization(inst)) {
    placement_.assign(nk_, Assignment::kUnassigned);
    ec_load_.assign(ne_, 0.0);
    ec_count_.assign(ne_, 0);
    link_load_.assign(nl_, 0.0);
    flow_link_cover_.assign(static_cast<std::size_t>(nk_) * nl_, 0);

    // Per-flow EC visiting order: increasing storage pressure, then id.
    ec_order_.resize(nk_);
    hop_lb_.assign(static_cast<std::size_t>(nk_) * ne_, 0.0);
    for (int k = 0; k < nk_; ++k) {
      for (int e = 0; e < ne_; ++e) {
        double lb = 0.0;
        for (int a = 0; a < na_; ++a) {
          lb += inst.flows[k].p[a] * std::min(inst.topology.hops(a, e), nt_);
        }
        hop_lb_[k * ne_ + e] = lb;
      }
      std::vector<int> order;
      for (int e = 0; e < ne_; ++e) {
        if (mask_ && !mask_->allows(k, e)) continue;
        order.push_back(e);
      }
      std::sort(order.begin(), order.end(), [&](int lhs, int rhs) {
        const double ql = view_.q_at(k, lhs);
        const double qr = view_.q_at(k, rhs);
        if (ql != qr) return ql < qr;
        return lhs < rhs;
      });
      ec_order_[k] = std::move(order);
    }

    // Suffix sums of the per-flow best-case transmission cost.
    suffix_tmin_.assign(nk_ + 1, 0.0);
    for (int k = nk_ - 1; k >= 0; --k) {
      double tmin = std::numeric_limits<double>::infinity();
      for (int e : ec_order_[k]) tmin = std::min(tmin, hop_lb_[k * ne_ + e]);
      if (!std::isfinite(tmin)) tmin = 0.0;  // empty candidate row; search dead-ends anyway
      suffix_tmin_[k] = suffix_tmin_[k + 1] + tmin;
    }
  }

  bool run() {
    branch_x(0);
    return have_best_;
  }

  std::int64_t nodes() const { return nodes_; }

  Solution best_solution(double gamma) const {
    Assignment asg;
    asg.ec_of_flow = best_placement_;
    Routing routing = routing_from(best_placement_, best_z_);
    return make_solution(inst_, std::move(asg), std::move(routing), gamma);
  }

 private:
  void branch_x(int k) {
    ++nodes_;
    if (k == nk_) {
      solve_z();
      return;
    }
    const double s = inst_.flows[k].s_mb;
    for (int e : ec_order_[k]) {
      if (ec_load_[e] + s >= inst_.ec_capacity_mb[e] - kCapacitySlack) continue;
      placement_[k] = e;
      ec_load_[e] += s;
      ++ec_count_[e];
      assigned_hop_lb_ += hop_lb_[k * ne_ + e];
      if (!have_best_ || lower_bound_x(k + 1) <= best_j_ + kTieEps) {
        branch_x(k + 1);
      }
      assigned_hop_lb_ -= hop_lb_[k * ne_ + e];
      --ec_count_[e];
      ec_load_[e] -= s;
      placement_[k] = Assignment::kUnassigned;
    }
  }

  double lower_bound_x(int assigned) const {
    double cc = 0.0;
    for (int e = 0; e < ne_; ++e) {
      if (ec_count_[e] == 0) continue;
      cc += ec_count_[e] / (1.0 - ec_load_[e] / inst_.ec_capacity_mb[e]);
    }
    // Each still-unplaced flow contributes at least t_e >= 1; the overflow
    // sentinel caps the caching term so the bound stays admissible.
    const double cc_lb = std::min(cc + (nk_ - assigned) * 1.0, kOverflowCost);
    const double trans_lb = assigned_hop_lb_ + suffix_tmin_[assigned];
    return inst_.alpha * cc_lb + inst_.beta * trans_lb;
  }

  void solve_z() {
    decisions_.clear();
    for (int k = 0; k < nk_; ++k) {
      const int e = placement_[k];
      for (int a = 0; a < na_; ++a) {
        const double p = inst_.flows[k].p[a];
        const int hops = inst_.topology.hops(a, e);
        if (p > 0.0 && hops < nt_) {
          decisions_.push_back({k, a, inst_.beta * p * (nt_ - hops)});
        }
      }
    }
    std::sort(decisions_.begin(), decisions_.end(), [](const ZDecision& l, const ZDecision& r) {
      if (l.benefit != r.benefit) return l.benefit > r.benefit;
      if (l.flow != r.flow) return l.flow < r.flow;
      return l.ar < r.ar;
    });
    const int n = static_cast<int>(decisions_.size());
    suffix_benefit_.assign(n + 1, 0.0);
    for (int i = n - 1; i >= 0; --i) {
      suffix_benefit_[i] = suffix_benefit_[i + 1] + decisions_[i].benefit;
    }
    take_.assign(n, 0);

    Assignment asg;
    asg.ec_of_flow = placement_;
    const double base =
        inst_.alpha * caching_cost_partial(inst_, asg) + inst_.beta * (double(nk_) * nt_);
    branch_z(0, base);
  }

  void branch_z(int i, double cur_j) {
    ++nodes_;
    if (have_best_ && cur_j - suffix_benefit_[i] > best_j_ + kTieEps) return;
    if (i == static_cast<int>(decisions_.size())) {
      offer_leaf();
      return;
    }
    const ZDecision& d = decisions_[i];
    // Take: cover the path links not already used by this flow.
    const int e = placement_[d.flow];
    const double b = inst_.flows[d.flow].b_mbps;
    bool ok = true;
    for (int l = 0; l < nl_ && ok; ++l) {
      if (!inst_.topology.link_on_path(l, d.ar, e)) continue;
      if (flow_link_cover_[d.flow * nl_ + l] > 0) continue;
      if (link_load_[l] + b >= inst_.link_capacity_mbps[l] - kCapacitySlack) ok = false;
    }
    if (ok) {
      for (int l = 0; l < nl_; ++l) {
        if (!inst_.topology.link_on_path(l, d.ar, e)) continue;
        if (flow_link_cover_[d.flow * nl_ + l]++ == 0) link_load_[l] += b;
      }
      take_[i] = 1;
      branch_z(i + 1, cur_j - d.benefit);
      take_[i] = 0;
      for (int l = 0; l < nl_; ++l) {
        if (!inst_.topology.link_on_path(l, d.ar, e)) continue;
        if (--flow_link_cover_[d.flow * nl_ + l] == 0) link_load_[l] -= b;
      }
    }
    branch_z(i + 1, cur_j);
  }

  void offer_leaf() {
    std::vector<std::uint8_t> zbits(static_cast<std::size_t>(nk_) * na_, 0);
    for (std::size_t i = 0; i < decisions_.size(); ++i) {
      if (take_[i]) zbits[decisions_[i].flow * na_ + decisions_[i].ar] = 1;
    }
    Assignment asg;
    asg.ec_of_flow = placement_;
    const Routing routing = routing_from(placement_, zbits);
    const double j = total_cost(inst_, asg, routing);
    if (!have_best_ || j < best_j_ - kTieEps) {
      have_best_ = true;
      best_j_ = j;
      best_placement_ = placement_;
      best_z_ = std::move(zbits);
      return;
    }
    if (j <= best_j_ + kTieEps) {
      if (std::make_pair(std::cref(placement_), std::cref(zbits)) <
          std::make_pair(std::cref(best_placement_), std::cref(best_z_))) {
        best_j_ = std::min(best_j_, j);
        best_placement_ = placement_;
        best_z_ = std::move(zbits);
      }
    }
  }

  Routing routing_from(const std::vector<int>& placement,
                       const std::vector<std::uint8_t>& zbits) const {
    Routing routing = Routing::zeros(nk_, na_, ne_, nl_);
    for (int k = 0; k < nk_; ++k) {
      const int e = placement[k];
      if (e == Assignment::kUnassigned) continue;
      for (int a = 0; a < na_; ++a) {
        if (!zbits[k * na_ + a]) continue;
        routing.set_z(k, a, e, 1);
        for (int l = 0; l < nl_; ++l) {
          if (inst_.topology.link_on_path(l, a, e)) routing.set_y(k, l, 1);
        }
      }
    }
    return routing;
  }

  const Instance& inst_;
  const CandidateMask* mask_;
  const int nk_, na_, ne_, nl_, nt_;
  UtilizationView view_;

  std::vector<std::vector<int>> ec_order_;
  std::vector<double> hop_lb_;
  std::vector<double> suffix_tmin_;

  std::vector<int> placement_;
  std::vector<double> ec_load_;
  std::vector<int> ec_count_;
  double assigned_hop_lb_ = 0.0;

  std::vector<ZDecision> decisions_;
  std::vector<double> suffix_benefit_;
  std::vector<std::uint8_t> take_;
  std::vector<double> link_load_;
  std::vector<int> flow_link_cover_;

  std::int64_t nodes_ = 0;
  bool have_best_ = false;
  double best_j_ = std::numeric_limits<double>::infinity();
  std::vector<int> best_placement_;
  std::vector<std::uint8_t> best_z_;
};

Solution infeasible_solution(const Instance& inst) {
  Solution s;
  s.assignment = Assignment::unassigned(inst.num_flows());
  s.routing = Routing::zeros(inst.num_flows(), inst.topology.num_ars(),
                             inst.topology.num_ecs(), inst.topology.num_links());
  s.objective = std::numeric_limits<double>::infinity();
  s.penalty_score = std::numeric_limits<double>::infinity();
  s.feasible = false;
  return s;
}

}  // namespace

SolveReport solve_exact(const Instance& instance, const CandidateMask* mask, double gamma) {
  validate(instance);
  if (mask) {
    if (mask->num_flows != instance.num_flows() ||
        mask->num_ecs != instance.topology.num_ecs()) {
      throw std::invalid_argument("candidate mask dimensions do not match instance");
    }
  }
  SolveReport report;
  BranchAndBound masked(instance, mask);
  if (masked.run()) {
    report.solution = masked.best_solution(gamma);
    report.nodes_explored = masked.nodes();
    report.variable_count = count_variables(instance, mask);
    return report;
  }
  report.nodes_explored = masked.nodes();
  if (mask) {
    // Masked restriction infeasible: slack the mask and solve the original.
    BranchAndBound full(instance, nullptr);
    const bool found = full.run();
    report.fallback_used = true;
    report.nodes_explored += full.nodes();
    report.variable_count = count_variables(instance, nullptr);
    report.solution = found ? full.best_solution(gamma) : infeasible_solution(instance);
    return report;
  }
  report.variable_count = count_variables(instance, nullptr);
  report.solution = infeasible_solution(instance);
  return report;
}

std::int64_t count_variables(const Instance& instance, const CandidateMask* mask) {
  const std::int64_t k = instance.num_flows();
  const std::int64_t a = instance.topology.num_ars();
  const std::int64_t e = instance.topology.num_ecs();
  const std::int64_t l = instance.topology.num_links();
  std::int64_t count = k * e + k * l + k * a * e + k * e + e;
  if (mask) count -= mask->zero_count() * (2 + a);
  return count;
}

namespace {

std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Builds one logical LP row, wrapping long rows with continuation indent.
class RowBuilder {
 public:
  explicit RowBuilder(std::string head) : line_(std::move(head)) {}

  void term(double coef, const std::string& name) {
    std::string tok;
    if (first_) {
      tok = (coef < 0 ? "- " : "") + fmt_num(std::fabs(coef)) + " " + name;
      first_ = false;
    } else {
      tok = std::string(coef < 0 ? "- " : "+ ") + fmt_num(std::fabs(coef)) + " " + name;
    }
    push(tok);
  }

  void constant(double v) {
    push(std::string(v < 0 ? "- " : "+ ") + fmt_num(std::fabs(v)));
    first_ = false;
  }

  void finish(const std::string& op, double rhs) { push(op + " " + fmt_num(rhs)); }

  bool empty_terms() const { return first_; }

  std::string str() const { return line_ + "\n"; }

 private:
  void push(const std::string& tok) {
    if (line_.size() - last_break_ + tok.size() > 200) {
      line_ += "\n   ";
      last_break_ = line_.size();
    } else if (!line_.empty()) {
      line_ += " ";
    }
    line_ += tok;
  }

  std::string line_;
  std::size_t last_break_ = 0;
  bool first_ = true;
};

}  // namespace

std::string export_milp(const Instance& instance, const CandidateMask* mask,
                        const MilpExportOptions& options) {
  validate(instance);
  if (mask && (mask->num_flows != instance.num_flows() ||
               mask->num_ecs != instance.topology.num_ecs())) {
    throw std::invalid_argument("candidate mask dimensions do not match instance");
  }
  const int nk = instance.num_flows();
  const int na = instance.topology.num_ars();
  const int ne = instance.topology.num_ecs();
  const int nl = instance.topology.num_links();
  const int nt = instance.topology.n_backhaul;
  const double big_m = options.big_m_linearization;
  if (!(big_m > 1.0)) throw std::invalid_argument("big-M must exceed the t_e lower bound");
  const double m_route = 1.0 + na;

  auto x_name = [](int k, int e) { return "x_" + std::to_string(k) + "_" + std::to_string(e); };
  auto y_name = [](int k, int l) { return "y_" + std::to_string(k) + "_" + std::to_string(l); };
  auto z_name = [](int k, int a, int e) {
    return "z_" + std::to_string(k) + "_" + std::to_string(a) + "_" + std::to_string(e);
  };
  auto chi_name = [](int k, int e) {
    return "chi_" + std::to_string(k) + "_" + std::to_string(e);
  };
  auto t_name = [](int e) { return "t_" + std::to_string(e); };

  std::string out;
  out += "\\ proactive edge caching placement, linearized model\n";
  out += "Minimize\n";
  {
    RowBuilder row(" obj:");
    if (instance.alpha != 0.0) {
      for (int k = 0; k < nk; ++k) {
        for (int e = 0; e < ne; ++e) row.term(instance.alpha, chi_name(k, e));
      }
    }
    if (instance.beta != 0.0) {
      for (int k = 0; k < nk; ++k) {
        for (int a = 0; a < na; ++a) {
          const double p = instance.flows[k].p[a];
          if (p == 0.0) continue;
          for (int e = 0; e < ne; ++e) {
            const double coef = instance.beta * p * (instance.topology.hops(a, e) - nt);
            if (coef != 0.0) row.term(coef, z_name(k, a, e));
          }
        }
      }
      // Expected cost of serving every flow from the backhaul.
      row.constant(instance.beta * nk * nt);
    }
    if (row.empty_terms()) row.constant(0.0);
    out += row.str();
  }

  out += "Subject To\n";
  for (int k = 0; k < nk; ++k) {
    RowBuilder row(" c4b_" + std::to_string(k) + ":");
    for (int e = 0; e < ne; ++e) row.term(1.0, x_name(k, e));
    row.finish("=", 1.0);
    out += row.str();
  }
  for (int e = 0; e < ne; ++e) {
    RowBuilder row(" c4c_" + std::to_string(e) + ":");
    for (int k = 0; k < nk; ++k) row.term(instance.flows[k].s_mb, x_name(k, e));
    row.finish("<=", instance.ec_capacity_mb[e] - kCapacitySlack);
    out += row.str();
  }
  for (int l = 0; l < nl; ++l) {
    RowBuilder row(" c4d_" + std::to_string(l) + ":");
    for (int k = 0; k < nk; ++k) row.term(instance.flows[k].b_mbps, y_name(k, l));
    row.finish("<=", instance.link_capacity_mbps[l] - kCapacitySlack);
    out += row.str();
  }
  for (int k = 0; k < nk; ++k) {
    for (int a = 0; a < na; ++a) {
      RowBuilder row(" c4e_" + std::to_string(k) + "_" + std::to_string(a) + ":");
      for (int e = 0; e < ne; ++e) row.term(1.0, z_name(k, a, e));
      row.finish("<=", 1.0);
      out += row.str();
    }
  }
  for (int k = 0; k < nk; ++k) {
    for (int a = 0; a < na; ++a) {
      for (int e = 0; e < ne; ++e) {
        RowBuilder row(" c4f_" + std::to_string(k) + "_" + std::to_string(a) + "_" +
                       std::to_string(e) + ":");
        row.term(1.0, z_name(k, a, e));
        row.term(-1.0, x_name(k, e));
        row.finish("<=", 0.0);
        out += row.str();
      }
    }
  }
  for (int k = 0; k < nk; ++k) {
    for (int l = 0; l < nl; ++l) {
      RowBuilder low(" c4g_" + std::to_string(k) + "_" + std::to_string(l) + ":");
      low.term(1.0, y_name(k, l));
      RowBuilder high(" c4h_" + std::to_string(k) + "_" + std::to_string(l) + ":");
      high.term(m_route, y_name(k, l));
      for (int a = 0; a < na; ++a) {
        for (int e = 0; e < ne; ++e) {
          if (instance.topology.link_on_path(l, a, e)) {
            low.term(-1.0, z_name(k, a, e));
            high.term(-1.0, z_name(k, a, e));
          }
        }
      }
      low.finish("<=", 0.0);
      high.finish(">=", 0.0);
      out += low.str();
      out += high.str();
    }
  }
  for (int e = 0; e < ne; ++e) {
    RowBuilder row(" c9_" + std::to_string(e) + ":");
    row.term(1.0, t_name(e));
    for (int k = 0; k < nk; ++k) {
      row.term(-instance.flows[k].s_mb / instance.ec_capacity_mb[e], chi_name(k, e));
    }
    row.finish("=", 1.0);
    out += row.str();
  }
  for (int k = 0; k < nk; ++k) {
    for (int e = 0; e < ne; ++e) {
      const std::string suffix = std::to_string(k) + "_" + std::to_string(e);
      RowBuilder a(" c8a_" + suffix + ":");
      a.term(1.0, chi_name(k, e));
      a.term(-1.0, t_name(e));
      a.finish("<=", 0.0);
      out += a.str();
      RowBuilder b(" c8b_" + suffix + ":");
      b.term(1.0, chi_name(k, e));
      b.term(-big_m, x_name(k, e));
      b.finish("<=", 0.0);
      out += b.str();
      RowBuilder c(" c8c_" + suffix + ":");
      c.term(1.0, chi_name(k, e));
      c.term(-1.0, t_name(e));
      c.term(-big_m, x_name(k, e));
      c.finish(">=", -big_m);
      out += c.str();
    }
  }

  out += "Bounds\n";
  for (int e = 0; e < ne; ++e) out += " " + t_name(e) + " >= 1e-09\n";
  // The paper states chi > 0, but chi <= M x forces chi = 0 for unused
  // pairs, so the usable lower bound is zero.
  for (int k = 0; k < nk; ++k) {
    for (int e = 0; e < ne; ++e) out += " " + chi_name(k, e) + " >= 0\n";
  }
  if (mask) {
    for (int k = 0; k < nk; ++k) {
      for (int e = 0; e < ne; ++e) {
        if (!mask->allows(k, e)) out += " " + x_name(k, e) + " <= 0\n";
      }
    }
  }

  out += "Binary\n";
  {
    std::string line = " ";
    auto push = [&](const std::string& name) {
      if (line.size() + name.size() > 200) {
        out += line + "\n";
        line = " ";
      }
      if (line.size() > 1) line += " ";
      line += name;
    };
    for (int k = 0; k < nk; ++k)
      for (int e = 0; e < ne; ++e) push(x_name(k, e));
    for (int k = 0; k < nk; ++k)
      for (int l = 0; l < nl; ++l) push(y_name(k, l));
    for (int k = 0; k < nk; ++k)
      for (int a = 0; a < na; ++a)
        for (int e = 0; e < ne; ++e) push(z_name(k, a, e));
    out += line + "\n";
  }
  out += "End\n";
  return out;
}

}  // namespace edgecache
