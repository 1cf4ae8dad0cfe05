#include "qtrack/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

namespace {

using qtrack::MatchPair;

// Exhaustive assignment oracle: try every way of matching each row to a
// distinct column (rows may stay unmatched only when rows > cols).
void enumerate_assignments(const Eigen::MatrixXd& cost, Eigen::Index row,
                           std::vector<int>& cols_used, std::vector<int>& cur,
                           int assigned, int want, double total, double* best) {
  if (row == cost.rows()) {
    if (assigned == want) *best = std::min(*best, total);
    return;
  }
  // Leave this row out (only useful when rows exceed columns).
  if (cost.rows() - row - 1 >= want - assigned)
    enumerate_assignments(cost, row + 1, cols_used, cur, assigned, want, total,
                          best);
  for (Eigen::Index c = 0; c < cost.cols(); ++c) {
    if (cols_used[static_cast<size_t>(c)]) continue;
    cols_used[static_cast<size_t>(c)] = 1;
    cur[static_cast<size_t>(row)] = static_cast<int>(c);
    enumerate_assignments(cost, row + 1, cols_used, cur, assigned + 1, want,
                          total + cost(row, c), best);
    cols_used[static_cast<size_t>(c)] = 0;
    cur[static_cast<size_t>(row)] = -1;
  }
}

double brute_force_min_cost(const Eigen::MatrixXd& cost) {
  std::vector<int> used(static_cast<size_t>(cost.cols()), 0);
  std::vector<int> cur(static_cast<size_t>(cost.rows()), -1);
  double best = std::numeric_limits<double>::infinity();
  const int want = static_cast<int>(std::min(cost.rows(), cost.cols()));
  enumerate_assignments(cost, 0, used, cur, 0, want, 0.0, &best);
  return best;
}

struct Matching {
  std::vector<MatchPair> pairs;  // sorted by construction (rows ascend)
  double total = 0.0;
};

void enumerate_matchings(const Eigen::MatrixXd& score, double min_score,
                         Eigen::Index row, std::vector<int>& cols_used,
                         Matching& cur, std::vector<Matching>& out) {
  if (row == score.rows()) {
    out.push_back(cur);
    return;
  }
  enumerate_matchings(score, min_score, row + 1, cols_used, cur, out);
  for (Eigen::Index c = 0; c < score.cols(); ++c) {
    if (cols_used[static_cast<size_t>(c)] || score(row, c) < min_score)
      continue;
    cols_used[static_cast<size_t>(c)] = 1;
    cur.pairs.push_back({static_cast<int>(row), static_cast<int>(c)});
    cur.total += score(row, c);
    enumerate_matchings(score, min_score, row + 1, cols_used, cur, out);
    cur.total -= score(row, c);
    cur.pairs.pop_back();
    cols_used[static_cast<size_t>(c)] = 0;
  }
}

bool pair_list_less(const std::vector<MatchPair>& a,
                    const std::vector<MatchPair>& b) {
  return std::lexicographical_compare(
      a.begin(), a.end(), b.begin(), b.end(),
      [](const MatchPair& x, const MatchPair& y) {
        return x.row != y.row ? x.row < y.row : x.col < y.col;
      });
}

// Reference semantics: among all maximum-cardinality matchings over gated
// pairs, keep those of maximum total score, then take the one whose sorted
// pair list is lexicographically smallest.
std::vector<MatchPair> brute_force_match(const Eigen::MatrixXd& score,
                                         double min_score) {
  std::vector<int> used(static_cast<size_t>(score.cols()), 0);
  Matching cur;
  std::vector<Matching> all;
  enumerate_matchings(score, min_score, 0, used, cur, all);
  size_t best_card = 0;
  for (const Matching& m : all) best_card = std::max(best_card, m.pairs.size());
  double best_total = -1.0;
  for (const Matching& m : all)
    if (m.pairs.size() == best_card) best_total = std::max(best_total, m.total);
  const Matching* pick = nullptr;
  for (const Matching& m : all) {
    if (m.pairs.size() != best_card || std::abs(m.total - best_total) > 1e-9)
      continue;
    if (!pick || pair_list_less(m.pairs, pick->pairs)) pick = &m;
  }
  return pick ? pick->pairs : std::vector<MatchPair>{};
}

}  // namespace

TEST_CASE("min_cost_assignment equals brute force on random matrices") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<int> dim(1, 6);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = dim(rng), m = dim(rng);
    Eigen::MatrixXd cost(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) cost(i, j) = u(rng);
    const std::vector<int> assign = qtrack::min_cost_assignment(cost);
    REQUIRE(static_cast<int>(assign.size()) == n);
    double total = 0.0;
    int count = 0;
    std::vector<int> seen(static_cast<size_t>(m), 0);
    for (int i = 0; i < n; ++i) {
      if (assign[static_cast<size_t>(i)] < 0) continue;
      const int j = assign[static_cast<size_t>(i)];
      REQUIRE(j < m);
      CHECK(seen[static_cast<size_t>(j)] == 0);
      seen[static_cast<size_t>(j)] = 1;
      total += cost(i, j);
      ++count;
    }
    CHECK(count == std::min(n, m));
    CHECK(total == doctest::Approx(brute_force_min_cost(cost)).epsilon(1e-9));
  }
}

TEST_CASE("min_cost_assignment degenerate shapes") {
  CHECK(qtrack::min_cost_assignment(Eigen::MatrixXd(0, 0)).empty());
  Eigen::MatrixXd one(1, 1);
  one(0, 0) = 3.5;
  CHECK(qtrack::min_cost_assignment(one) == std::vector<int>{0});
  Eigen::MatrixXd wide(1, 4);
  wide << 4, 1, 2, 3;
  CHECK(qtrack::min_cost_assignment(wide) == std::vector<int>{1});
  Eigen::MatrixXd tall(3, 1);
  tall << 5, 2, 4;
  CHECK(qtrack::min_cost_assignment(tall) == std::vector<int>{-1, 0, -1});
}

TEST_CASE("gated matching prefers cardinality over total score") {
  Eigen::MatrixXd score(2, 2);
  score << 0.95, 0.15, 0.1, 0.05;
  const auto pairs = qtrack::gated_max_match(score, 0.1);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].row == 0);
  CHECK(pairs[0].col == 1);
  CHECK(pairs[1].row == 1);
  CHECK(pairs[1].col == 0);
}

TEST_CASE("gated matching excludes pairs below the threshold") {
  Eigen::MatrixXd score(2, 2);
  score << 0.4, 0.9, 0.2, 0.3;
  const auto pairs = qtrack::gated_max_match(score, 0.5);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].row == 0);
  CHECK(pairs[0].col == 1);
}

TEST_CASE("gated matching breaks exact ties canonically") {
  Eigen::MatrixXd score = Eigen::MatrixXd::Constant(2, 2, 0.9);
  const auto pairs = qtrack::gated_max_match(score, 0.5);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].row == 0);
  CHECK(pairs[0].col == 0);
  CHECK(pairs[1].row == 1);
  CHECK(pairs[1].col == 1);
}

TEST_CASE("gated matching equals the exhaustive reference on random inputs") {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> dim(0, 5);
  // Scores on a coarse grid make ties exact, exercising every tier of the
  // (cardinality, total, lexicographic) ordering.
  std::uniform_int_distribution<int> step(0, 8);
  for (int trial = 0; trial < 120; ++trial) {
    const int n = dim(rng), m = dim(rng);
    Eigen::MatrixXd score(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) score(i, j) = 0.125 * step(rng);
    const double min_score = 0.25;
    const auto got = qtrack::gated_max_match(score, min_score);
    const auto want = brute_force_match(score, min_score);
    REQUIRE(got.size() == want.size());
    auto sorted = got;
    std::sort(sorted.begin(), sorted.end(),
              [](const MatchPair& a, const MatchPair& b) {
                return a.row != b.row ? a.row < b.row : a.col < b.col;
              });
    for (size_t k = 0; k < want.size(); ++k) {
      CHECK(sorted[k].row == want[k].row);
      CHECK(sorted[k].col == want[k].col);
    }
  }
}

TEST_CASE("gated matching handles empty inputs") {
  CHECK(qtrack::gated_max_match(Eigen::MatrixXd(0, 0), 0.5).empty());
  CHECK(qtrack::gated_max_match(Eigen::MatrixXd(0, 3), 0.5).empty());
  CHECK(qtrack::gated_max_match(Eigen::MatrixXd::Zero(3, 0), 0.5).empty());
  // All below threshold: nothing matches even though the matrix is nonempty.
  CHECK(qtrack::gated_max_match(Eigen::MatrixXd::Constant(2, 2, 0.1), 0.5)
            .empty());
}
