#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <vector>

#include "cbench/error.hpp"
#include "cbench/matching.hpp"
#include "cbench/stats.hpp"

namespace cbench {

namespace {

using Clock = std::chrono::steady_clock;

// Branch-and-bound over unit inclusion, maximizing the matched count m
// subject to |sum_T x_j - sum_C x_j| <= bound_j * m for every constraint.
// The relaxation bound treats covariates independently: given the partial
// selection, each constraint is checked against the interval of sums
// reachable by picking q more units from the undecided pool.
struct CardinalityProblem {
  int nt = 0, nc = 0, p = 0;
  // values[j] holds treated values first, then control values.
  std::vector<std::vector<double>> values;
  std::vector<double> bounds;  // per covariate, in raw units per matched pair

  const double* treated_col(int j) const { return values[static_cast<std::size_t>(j)].data(); }
  const double* control_col(int j) const {
    return values[static_cast<std::size_t>(j)].data() + nt;
  }
};

enum class Status : signed char { undecided = 0, in = 1, out = -1 };

struct Node {
  std::vector<Status> status;  // nt treated then nc controls
  int bound = 0;
  int depth = 0;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound < b.bound;  // max-heap on bound
    return a.depth < b.depth;                          // then deepest first
  }
};

struct SideTotals {
  int in_count = 0, undecided_count = 0;
  std::vector<double> in_sum;                      // per covariate
  std::vector<std::vector<double>> prefix_sorted;  // per covariate, ascending prefix sums
};

SideTotals side_totals(const CardinalityProblem& prob, const std::vector<Status>& status,
                       bool treated) {
  SideTotals t;
  const int n = treated ? prob.nt : prob.nc;
  const int offset = treated ? 0 : prob.nt;
  t.in_sum.assign(static_cast<std::size_t>(prob.p), 0.0);
  std::vector<int> undecided;
  for (int i = 0; i < n; ++i) {
    const Status s = status[static_cast<std::size_t>(offset + i)];
    if (s == Status::in) {
      ++t.in_count;
      for (int j = 0; j < prob.p; ++j) {
        t.in_sum[static_cast<std::size_t>(j)] +=
            prob.values[static_cast<std::size_t>(j)][static_cast<std::size_t>(offset + i)];
      }
    } else if (s == Status::undecided) {
      undecided.push_back(offset + i);
    }
  }
  t.undecided_count = static_cast<int>(undecided.size());
  t.prefix_sorted.resize(static_cast<std::size_t>(prob.p));
  for (int j = 0; j < prob.p; ++j) {
    std::vector<double> vals;
    vals.reserve(undecided.size());
    for (int idx : undecided) {
      vals.push_back(prob.values[static_cast<std::size_t>(j)][static_cast<std::size_t>(idx)]);
    }
    std::sort(vals.begin(), vals.end());
    std::vector<double>& pre = t.prefix_sorted[static_cast<std::size_t>(j)];
    pre.assign(vals.size() + 1, 0.0);
    for (std::size_t i = 0; i < vals.size(); ++i) pre[i + 1] = pre[i] + vals[i];
  }
  return t;
}

// Smallest / largest achievable sum of q undecided values for covariate j.
double min_pick(const SideTotals& t, int j, int q) {
  return t.prefix_sorted[static_cast<std::size_t>(j)][static_cast<std::size_t>(q)];
}
double max_pick(const SideTotals& t, int j, int q) {
  const auto& pre = t.prefix_sorted[static_cast<std::size_t>(j)];
  const std::size_t n = pre.size() - 1;
  return pre[n] - pre[n - static_cast<std::size_t>(q)];
}

// Largest m whose constraint intervals all intersect; 0 if none. Also reports
// the covariate with the least slack at that m, for branching.
int relaxation_bound(const CardinalityProblem& prob, const SideTotals& t, const SideTotals& c,
                     int* tightest_covariate) {
  const int m_hi = std::min(t.in_count + t.undecided_count, c.in_count + c.undecided_count);
  const int m_lo = std::max({t.in_count, c.in_count, 1});
  for (int m = m_hi; m >= m_lo; --m) {
    const int qt = m - t.in_count;
    const int qc = m - c.in_count;
    if (qt < 0 || qc < 0 || qt > t.undecided_count || qc > c.undecided_count) continue;
    bool ok = true;
    double worst_slack = std::numeric_limits<double>::infinity();
    int worst_j = 0;
    for (int j = 0; j < prob.p; ++j) {
      const double lo_t = t.in_sum[static_cast<std::size_t>(j)] + min_pick(t, j, qt);
      const double hi_t = t.in_sum[static_cast<std::size_t>(j)] + max_pick(t, j, qt);
      const double lo_c = c.in_sum[static_cast<std::size_t>(j)] + min_pick(c, j, qc);
      const double hi_c = c.in_sum[static_cast<std::size_t>(j)] + max_pick(c, j, qc);
      const double b = prob.bounds[static_cast<std::size_t>(j)] * m + 1e-9;
      // Interval of sum_T - sum_C must meet [-b, b].
      const double lo = lo_t - hi_c;
      const double hi = hi_t - lo_c;
      if (lo > b || hi < -b) {
        ok = false;
        break;
      }
      const double slack = std::min(b - lo, hi + b);
      if (slack < worst_slack) {
        worst_slack = slack;
        worst_j = j;
      }
    }
    if (ok) {
      if (tightest_covariate) *tightest_covariate = worst_j;
      return m;
    }
  }
  return 0;
}

struct Selection {
  std::vector<int> treated;  // indices into the treated list
  std::vector<int> control;  // indices into the control list
};

bool selection_feasible(const CardinalityProblem& prob, const Selection& sel) {
  if (sel.treated.size() != sel.control.size() || sel.treated.empty()) return false;
  const double m = static_cast<double>(sel.treated.size());
  for (int j = 0; j < prob.p; ++j) {
    double st = 0.0, sc = 0.0;
    for (int i : sel.treated) st += prob.treated_col(j)[i];
    for (int i : sel.control) sc += prob.control_col(j)[i];
    if (std::fabs(st - sc) > prob.bounds[static_cast<std::size_t>(j)] * m + 1e-9) return false;
  }
  return true;
}

// Primal heuristic: start from the optimal pairing's closest m pairs, then
// run a unit-exchange local search (swap one selected unit for an unselected
// one on either side). When the search stalls while still infeasible, drop
// the treated and control units that most reduce the violation and continue
// one size smaller — the state carries over, so the descent over m is cheap.
struct ExchangeState {
  Selection sel;
  std::vector<char> in_t, in_c;
  std::vector<double> delta;  // per covariate, sum_T - sum_C
};

double state_violation(const CardinalityProblem& prob, const ExchangeState& state) {
  const double m = static_cast<double>(state.sel.treated.size());
  double v = 0.0;
  for (int j = 0; j < prob.p; ++j) {
    v += std::max(0.0, std::fabs(state.delta[static_cast<std::size_t>(j)]) -
                           prob.bounds[static_cast<std::size_t>(j)] * m);
  }
  return v;
}

double swapped_violation(const CardinalityProblem& prob, const ExchangeState& state,
                         bool treated_side, int out_idx, int in_idx) {
  const double m = static_cast<double>(state.sel.treated.size());
  double v = 0.0;
  for (int j = 0; j < prob.p; ++j) {
    const double* col = treated_side ? prob.treated_col(j) : prob.control_col(j);
    const double shift = col[in_idx] - col[out_idx];
    const double d = state.delta[static_cast<std::size_t>(j)] + (treated_side ? shift : -shift);
    v += std::max(0.0, std::fabs(d) - prob.bounds[static_cast<std::size_t>(j)] * m);
  }
  return v;
}

bool exchange_local_search(const CardinalityProblem& prob, ExchangeState& state, int max_passes) {
  double current = state_violation(prob, state);
  for (int pass = 0; pass < max_passes && current > 0.0; ++pass) {
    double best_v = current;
    bool best_side = true;
    int best_slot = -1, best_in = -1;
    for (int side = 0; side < 2; ++side) {
      const bool treated_side = side == 0;
      const auto& members = treated_side ? state.sel.treated : state.sel.control;
      const auto& flags = treated_side ? state.in_t : state.in_c;
      const int n_side = treated_side ? prob.nt : prob.nc;
      for (std::size_t slot = 0; slot < members.size(); ++slot) {
        for (int cand = 0; cand < n_side; ++cand) {
          if (flags[static_cast<std::size_t>(cand)]) continue;
          const double v = swapped_violation(prob, state, treated_side, members[slot], cand);
          if (v < best_v - 1e-12) {
            best_v = v;
            best_side = treated_side;
            best_slot = static_cast<int>(slot);
            best_in = cand;
          }
        }
      }
    }
    if (best_slot < 0) break;  // local minimum
    auto& members = best_side ? state.sel.treated : state.sel.control;
    auto& flags = best_side ? state.in_t : state.in_c;
    const int out_idx = members[static_cast<std::size_t>(best_slot)];
    for (int j = 0; j < prob.p; ++j) {
      const double* col = best_side ? prob.treated_col(j) : prob.control_col(j);
      const double shift = col[best_in] - col[out_idx];
      state.delta[static_cast<std::size_t>(j)] += best_side ? shift : -shift;
    }
    flags[static_cast<std::size_t>(out_idx)] = 0;
    flags[static_cast<std::size_t>(best_in)] = 1;
    members[static_cast<std::size_t>(best_slot)] = best_in;
    current = best_v;
  }
  return current <= 0.0;
}

// Feasible (selection, m) with the largest m the descent reaches; m = 0 when
// even a single pair fails.
int greedy_incumbent(const CardinalityProblem& prob, const Assignment& base_pairs, int start_m,
                     Selection* out, const Clock::time_point& deadline) {
  const int pool = static_cast<int>(base_pairs.pairs.size());
  int m = std::min(start_m, pool);
  if (m <= 0) return 0;

  ExchangeState state;
  state.in_t.assign(static_cast<std::size_t>(prob.nt), 0);
  state.in_c.assign(static_cast<std::size_t>(prob.nc), 0);
  state.delta.assign(static_cast<std::size_t>(prob.p), 0.0);
  for (int i = 0; i < m; ++i) {
    const auto [t, c] = base_pairs.pairs[static_cast<std::size_t>(i)];
    state.sel.treated.push_back(t);
    state.sel.control.push_back(c);
    state.in_t[static_cast<std::size_t>(t)] = 1;
    state.in_c[static_cast<std::size_t>(c)] = 1;
    for (int j = 0; j < prob.p; ++j) {
      state.delta[static_cast<std::size_t>(j)] +=
          prob.treated_col(j)[t] - prob.control_col(j)[c];
    }
  }

  while (m >= 1) {
    if (exchange_local_search(prob, state, 200)) {
      *out = state.sel;
      return m;
    }
    if (Clock::now() > deadline) return 0;
    // Drop the treated unit and the control unit whose removal most lowers
    // the violation, then keep searching one size down.
    auto drop_best = [&](bool treated_side) {
      auto& members = treated_side ? state.sel.treated : state.sel.control;
      auto& flags = treated_side ? state.in_t : state.in_c;
      const double m_next = static_cast<double>(state.sel.treated.size()) - 1.0;
      double best_v = std::numeric_limits<double>::infinity();
      std::size_t best_slot = 0;
      for (std::size_t slot = 0; slot < members.size(); ++slot) {
        double v = 0.0;
        for (int j = 0; j < prob.p; ++j) {
          const double* col = treated_side ? prob.treated_col(j) : prob.control_col(j);
          const double d = state.delta[static_cast<std::size_t>(j)] -
                           (treated_side ? col[members[slot]] : -col[members[slot]]);
          v += std::max(0.0, std::fabs(d) - prob.bounds[static_cast<std::size_t>(j)] * m_next);
        }
        if (v < best_v) {
          best_v = v;
          best_slot = slot;
        }
      }
      const int out_idx = members[best_slot];
      for (int j = 0; j < prob.p; ++j) {
        const double* col = treated_side ? prob.treated_col(j) : prob.control_col(j);
        state.delta[static_cast<std::size_t>(j)] -=
            treated_side ? col[out_idx] : -col[out_idx];
      }
      flags[static_cast<std::size_t>(out_idx)] = 0;
      members.erase(members.begin() + static_cast<std::ptrdiff_t>(best_slot));
    };
    drop_best(true);
    drop_best(false);
    --m;
  }
  return 0;
}

Selection selection_from_status(const CardinalityProblem& prob, const std::vector<Status>& status) {
  Selection sel;
  for (int i = 0; i < prob.nt; ++i) {
    if (status[static_cast<std::size_t>(i)] == Status::in) sel.treated.push_back(i);
  }
  for (int i = 0; i < prob.nc; ++i) {
    if (status[static_cast<std::size_t>(prob.nt + i)] == Status::in) sel.control.push_back(i);
  }
  return sel;
}

}  // namespace

MatchResult cardinality_match(const Dataset& d, const std::vector<BalanceConstraint>& constraints,
                              const CardinalityConfig& config) {
  require(!constraints.empty(), "DomainError", "cardinality_match needs >= 1 constraint");
  const std::vector<int> treated = d.treated_indices();
  const std::vector<int> control = d.control_indices();
  require(!treated.empty() && !control.empty(), "DegenerateArm",
          "cardinality_match needs both treated and control units");

  CardinalityProblem prob;
  prob.nt = static_cast<int>(treated.size());
  prob.nc = static_cast<int>(control.size());
  prob.p = static_cast<int>(constraints.size());
  prob.values.resize(static_cast<std::size_t>(prob.p));
  prob.bounds.resize(static_cast<std::size_t>(prob.p));
  for (int j = 0; j < prob.p; ++j) {
    const BalanceConstraint& c = constraints[static_cast<std::size_t>(j)];
    require(c.max_abs_std_diff >= 0.0, "DomainError", "max_abs_std_diff must be >= 0");
    const int col = d.column_index(c.covariate);
    require(col >= 0, "MissingColumn", "constraint covariate '" + c.covariate + "' not found");
    std::vector<double> xt(treated.size()), xc(control.size());
    for (std::size_t i = 0; i < treated.size(); ++i) xt[i] = d.x(treated[i], col);
    for (std::size_t i = 0; i < control.size(); ++i) xc[i] = d.x(control[i], col);
    const double sd = std::sqrt(0.5 * (sample_variance(xt) + sample_variance(xc)));
    prob.bounds[static_cast<std::size_t>(j)] = c.max_abs_std_diff * sd;
    auto& col_vals = prob.values[static_cast<std::size_t>(j)];
    col_vals.reserve(treated.size() + control.size());
    col_vals.insert(col_vals.end(), xt.begin(), xt.end());
    col_vals.insert(col_vals.end(), xc.begin(), xc.end());
  }

  const auto deadline =
      Clock::now() + std::chrono::duration_cast<Clock::duration>(
                         std::chrono::duration<double>(config.time_limit_seconds));

  // Pair pool for the heuristic: optimal match on the constraint covariates
  // (sd-scaled Euclidean), pairs sorted by distance.
  Assignment base_pairs;
  {
    Eigen::MatrixXd dist(prob.nt, prob.nc);
    for (int i = 0; i < prob.nt; ++i) {
      for (int k = 0; k < prob.nc; ++k) {
        double s = 0.0;
        for (int j = 0; j < prob.p; ++j) {
          const double scale = std::max(prob.bounds[static_cast<std::size_t>(j)], 1e-12);
          const double diff = (prob.treated_col(j)[i] - prob.control_col(j)[k]) / scale;
          s += diff * diff;
        }
        dist(i, k) = std::sqrt(s);
      }
    }
    base_pairs = optimal_pair_match(dist);
    std::stable_sort(base_pairs.pairs.begin(), base_pairs.pairs.end(),
                     [&](const auto& a, const auto& b) {
                       return dist(a.first, a.second) < dist(b.first, b.second);
                     });
  }

  Node root;
  root.status.assign(static_cast<std::size_t>(prob.nt + prob.nc), Status::undecided);
  SideTotals rt = side_totals(prob, root.status, true);
  SideTotals rc = side_totals(prob, root.status, false);
  int tight_j = 0;
  root.bound = relaxation_bound(prob, rt, rc, &tight_j);
  require(root.bound > 0, "Infeasible", "no nonempty subset can satisfy the balance constraints");

  Selection incumbent;
  int incumbent_m = greedy_incumbent(prob, base_pairs, root.bound, &incumbent, deadline);

  bool timed_out = false;
  if (incumbent_m < root.bound) {
    std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
    open.push(std::move(root));
    std::int64_t nodes = 0;
    while (!open.empty()) {
      if (Clock::now() > deadline || ++nodes > config.max_nodes) {
        timed_out = true;
        break;
      }
      Node node = open.top();
      open.pop();
      if (node.bound <= incumbent_m) break;  // best-first: nothing better remains

      const SideTotals t = side_totals(prob, node.status, true);
      const SideTotals c = side_totals(prob, node.status, false);
      int branch_j = 0;
      const int bound = relaxation_bound(prob, t, c, &branch_j);
      if (bound <= incumbent_m) continue;

      if (t.undecided_count == 0 && c.undecided_count == 0) {
        Selection sel = selection_from_status(prob, node.status);
        if (static_cast<int>(sel.treated.size()) == static_cast<int>(sel.control.size()) &&
            static_cast<int>(sel.treated.size()) > incumbent_m &&
            selection_feasible(prob, sel)) {
          incumbent = sel;
          incumbent_m = static_cast<int>(sel.treated.size());
        }
        continue;
      }

      // Branch on the undecided unit most extreme on the tightest covariate.
      int pick = -1;
      double pick_score = -1.0;
      const auto& vals = prob.values[static_cast<std::size_t>(branch_j)];
      const double col_mean =
          std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
      for (int i = 0; i < prob.nt + prob.nc; ++i) {
        if (node.status[static_cast<std::size_t>(i)] != Status::undecided) continue;
        const double score = std::fabs(vals[static_cast<std::size_t>(i)] - col_mean);
        if (score > pick_score) {
          pick_score = score;
          pick = i;
        }
      }
      if (pick < 0) continue;

      for (Status s : {Status::out, Status::in}) {
        Node child;
        child.status = node.status;
        child.status[static_cast<std::size_t>(pick)] = s;
        child.depth = node.depth + 1;
        const SideTotals ct = side_totals(prob, child.status, true);
        const SideTotals cc = side_totals(prob, child.status, false);
        child.bound = relaxation_bound(prob, ct, cc, nullptr);
        if (child.bound > incumbent_m) {
          // A child whose relaxation is already exact gets checked right away.
          if (ct.undecided_count == 0 && cc.undecided_count == 0) {
            Selection sel = selection_from_status(prob, child.status);
            if (sel.treated.size() == sel.control.size() &&
                static_cast<int>(sel.treated.size()) > incumbent_m &&
                selection_feasible(prob, sel)) {
              incumbent = sel;
              incumbent_m = static_cast<int>(sel.treated.size());
            }
          } else {
            open.push(std::move(child));
          }
        }
      }
    }
  }

  require(incumbent_m > 0, timed_out ? "TimeLimit" : "Infeasible",
          timed_out ? "time limit hit before any feasible selection was found"
                    : "no nonempty subset can satisfy the balance constraints");

  // Second pass: pair the selected units by an optimal Mahalanobis match.
  // (A single pair has nothing to optimize and no within-group covariance.)
  MatchResult out;
  if (incumbent_m == 1) {
    out.pairs.push_back({d.id(treated[static_cast<std::size_t>(incumbent.treated.front())]),
                         d.id(control[static_cast<std::size_t>(incumbent.control.front())]),
                         0.0});
  } else {
    std::vector<int> selected_rows;
    for (int i : incumbent.treated) selected_rows.push_back(treated[static_cast<std::size_t>(i)]);
    for (int i : incumbent.control) selected_rows.push_back(control[static_cast<std::size_t>(i)]);
    std::sort(selected_rows.begin(), selected_rows.end());
    const Dataset sub = d.subset(selected_rows);
    DistanceSpec spec;
    spec.metric = DistanceMetric::mahalanobis;
    const DistanceMatrix dm = distance_matrix(sub, spec);
    const Assignment pairing = optimal_pair_match(dm.d);
    out = to_match_result(pairing, dm, sub);
  }
  if (timed_out) out.flags.push_back("TimeLimit");
  return out;
}

}  // namespace cbench
