#pragma once

#include <Eigen/Core>
#include <vector>

namespace qtrack {

/// Minimum-cost assignment on an n x m cost matrix (Jonker-Volgenant style
/// shortest augmenting paths, internally padded square). Exactly min(n, m)
/// pairs are assigned; returns row -> col, -1 for rows left out when n > m.
std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost);

struct MatchPair {
  int row;
  int col;
};

/// Maximum-cardinality matching over pairs with score >= min_score, breaking
/// cardinality ties by maximum total score. Additional ties are resolved
/// canonically: pairs are fixed greedily in (row, col) lexicographic order
/// among optimal completions, so the result is a deterministic function of
/// the score matrix alone.
std::vector<MatchPair> gated_max_match(const Eigen::MatrixXd& score,
                                       double min_score);

}  // namespace qtrack
