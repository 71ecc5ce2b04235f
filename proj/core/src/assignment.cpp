#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cbench/error.hpp"
#include "cbench/matching.hpp"

namespace cbench {

// Successive shortest augmenting paths with node potentials. Every
// augmentation runs one multi-source Dijkstra from the set of free rows, so
// the final matching has maximum cardinality and, among maximum-cardinality
// matchings, minimum total distance. Row-by-row processing would not give
// that guarantee once +inf entries make the instance infeasible for some rows.
Assignment optimal_pair_match(const Eigen::MatrixXd& D) {
  const int nt = static_cast<int>(D.rows());
  const int nc = static_cast<int>(D.cols());
  constexpr double kInf = std::numeric_limits<double>::infinity();

  for (int r = 0; r < nt; ++r) {
    for (int c = 0; c < nc; ++c) {
      require(!(D(r, c) < 0.0) && !std::isnan(D(r, c)), "DomainError",
              "distance matrix entries must be nonnegative");
    }
  }

  std::vector<int> match_row(static_cast<std::size_t>(nt), -1);
  std::vector<int> match_col(static_cast<std::size_t>(nc), -1);
  std::vector<double> u(static_cast<std::size_t>(nt), 0.0);  // row potentials
  std::vector<double> v(static_cast<std::size_t>(nc), 0.0);  // col potentials

  std::vector<double> dist_col(static_cast<std::size_t>(nc));
  std::vector<double> dist_row(static_cast<std::size_t>(nt));
  std::vector<int> parent_col(static_cast<std::size_t>(nc));  // row that reaches each col
  std::vector<bool> done_col(static_cast<std::size_t>(nc));

  const int max_pairs = std::min(nt, nc);
  for (int round = 0; round < max_pairs; ++round) {
    std::fill(dist_col.begin(), dist_col.end(), kInf);
    std::fill(dist_row.begin(), dist_row.end(), kInf);
    std::fill(parent_col.begin(), parent_col.end(), -1);
    std::fill(done_col.begin(), done_col.end(), false);

    // Seed: one hop from every free row.
    for (int r = 0; r < nt; ++r) {
      if (match_row[static_cast<std::size_t>(r)] != -1) continue;
      dist_row[static_cast<std::size_t>(r)] = 0.0;
      for (int c = 0; c < nc; ++c) {
        if (!std::isfinite(D(r, c))) continue;
        const double rc = D(r, c) - u[static_cast<std::size_t>(r)] - v[static_cast<std::size_t>(c)];
        if (rc < dist_col[static_cast<std::size_t>(c)]) {
          dist_col[static_cast<std::size_t>(c)] = rc;
          parent_col[static_cast<std::size_t>(c)] = r;
        }
      }
    }

    int end_col = -1;
    for (;;) {
      int best = -1;
      double best_d = kInf;
      for (int c = 0; c < nc; ++c) {
        if (!done_col[static_cast<std::size_t>(c)] && dist_col[static_cast<std::size_t>(c)] < best_d) {
          best_d = dist_col[static_cast<std::size_t>(c)];
          best = c;
        }
      }
      if (best < 0) break;  // nothing reachable
      done_col[static_cast<std::size_t>(best)] = true;
      const int owner = match_col[static_cast<std::size_t>(best)];
      if (owner == -1) {
        end_col = best;
        break;
      }
      // Continue through the matched row.
      dist_row[static_cast<std::size_t>(owner)] = best_d;
      for (int c = 0; c < nc; ++c) {
        if (done_col[static_cast<std::size_t>(c)] || !std::isfinite(D(owner, c))) continue;
        const double rc =
            D(owner, c) - u[static_cast<std::size_t>(owner)] - v[static_cast<std::size_t>(c)];
        if (best_d + rc < dist_col[static_cast<std::size_t>(c)]) {
          dist_col[static_cast<std::size_t>(c)] = best_d + rc;
          parent_col[static_cast<std::size_t>(c)] = owner;
        }
      }
    }
    if (end_col < 0) break;  // maximum cardinality reached

    const double delta = dist_col[static_cast<std::size_t>(end_col)];
    for (int r = 0; r < nt; ++r) {
      if (dist_row[static_cast<std::size_t>(r)] < delta) {
        u[static_cast<std::size_t>(r)] += delta - dist_row[static_cast<std::size_t>(r)];
      }
    }
    for (int c = 0; c < nc; ++c) {
      const double dc = std::min(dist_col[static_cast<std::size_t>(c)], delta);
      v[static_cast<std::size_t>(c)] -= delta - dc;
    }

    // Augment along parent pointers.
    int c = end_col;
    while (c != -1) {
      const int r = parent_col[static_cast<std::size_t>(c)];
      const int next = match_row[static_cast<std::size_t>(r)];
      match_row[static_cast<std::size_t>(r)] = c;
      match_col[static_cast<std::size_t>(c)] = r;
      c = next;
    }
  }

  Assignment out;
  for (int r = 0; r < nt; ++r) {
    const int c = match_row[static_cast<std::size_t>(r)];
    if (c >= 0) {
      out.pairs.emplace_back(r, c);
      out.objective += D(r, c);
    } else {
      out.unmatched_rows.push_back(r);
    }
  }
  return out;
}

}  // namespace cbench
