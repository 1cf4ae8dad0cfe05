#include "qtrack/hungarian.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace qtrack {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Dense potential-based shortest augmenting path solver, square matrix,
// 1-based internal indexing.
std::vector<int> solve_square(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j]) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

// Benefit scale that makes cardinality dominate any total-score difference.
constexpr double kCardinalityWeight = 1024.0;
constexpr double kTieEps = 1e-9;

struct MatchValue {
  int cardinality = 0;
  double total = 0.0;
};

// Optimal (cardinality, total score) of the gated matching restricted to the
// given row/col index subsets.
MatchValue solve_value(const Eigen::MatrixXd& score, double min_score,
                       const std::vector<int>& rows,
                       const std::vector<int>& cols,
                       std::vector<MatchPair>* pairs_out) {
  const int n = static_cast<int>(rows.size());
  const int m = static_cast<int>(cols.size());
  MatchValue out;
  if (n == 0 || m == 0) return out;
  const int s = std::max(n, m);
  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(s, s);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      const double sc = score(rows[i], cols[j]);
      if (sc >= min_score) cost(i, j) = -(kCardinalityWeight + sc);
    }
  const auto asg = solve_square(cost);
  for (int i = 0; i < n; ++i) {
    const int j = asg[i];
    if (j < 0 || j >= m) continue;
    if (cost(i, j) == 0.0) continue;  // gated-out or dummy pairing
    out.cardinality += 1;
    out.total += score(rows[i], cols[j]);
    if (pairs_out) pairs_out->push_back({rows[i], cols[j]});
  }
  return out;
}

bool value_equal(const MatchValue& a, const MatchValue& b) {
  return a.cardinality == b.cardinality && std::abs(a.total - b.total) < kTieEps;
}

}  // namespace

std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (n == 0 || m == 0) return std::vector<int>(n, -1);
  if (!cost.allFinite())
    throw std::invalid_argument("assignment cost matrix must be finite");
  const int s = std::max(n, m);
  Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(s, s);
  padded.topLeftCorner(n, m) = cost;
  const auto asg = solve_square(padded);
  std::vector<int> out(n, -1);
  for (int i = 0; i < n; ++i)
    if (asg[i] >= 0 && asg[i] < m) out[i] = asg[i];
  return out;
}

std::vector<MatchPair> gated_max_match(const Eigen::MatrixXd& score,
                                       double min_score) {
  const int n = static_cast<int>(score.rows());
  const int m = static_cast<int>(score.cols());
  std::vector<MatchPair> result;
  if (n == 0 || m == 0) return result;

  std::vector<int> rows(n), cols(m);
  for (int i = 0; i < n; ++i) rows[i] = i;
  for (int j = 0; j < m; ++j) cols[j] = j;
  MatchValue target = solve_value(score, min_score, rows, cols, nullptr);

  // Fix pairs in (row, col) order whenever an optimal completion remains.
  std::vector<int> free_cols = cols;
  MatchValue fixed;
  for (int i = 0; i < n; ++i) {
    std::vector<int> rest_rows;
    for (int r = i + 1; r < n; ++r) rest_rows.push_back(r);
    bool matched = false;
    for (size_t jc = 0; jc < free_cols.size(); ++jc) {
      const int j = free_cols[jc];
      const double sc = score(i, j);
      if (sc < min_score) continue;
      std::vector<int> rest_cols;
      for (size_t k = 0; k < free_cols.size(); ++k)
        if (k != jc) rest_cols.push_back(free_cols[k]);
      MatchValue sub = solve_value(score, min_score, rest_rows, rest_cols, nullptr);
      MatchValue cand{fixed.cardinality + 1 + sub.cardinality,
                      fixed.total + sc + sub.total};
      if (value_equal(cand, target)) {
        result.push_back({i, j});
        fixed.cardinality += 1;
        fixed.total += sc;
        free_cols.erase(free_cols.begin() + static_cast<long>(jc));
        matched = true;
        break;
      }
    }
    (void)matched;  // unmatched rows simply stay out
  }
  return result;
}

}  // namespace qtrack
