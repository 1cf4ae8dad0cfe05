#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace qtrack::ad {

/// Named parameter tensors with paired gradient buffers. Iteration follows
/// declaration order, which fixes the flat scalar indexing used by the
/// optimizer, checkpointing and finite-difference audits.
class ParamSet {
 public:
  Eigen::MatrixXd& declare(const std::string& name, int rows, int cols);

  bool contains(const std::string& name) const;
  Eigen::MatrixXd& value(const std::string& name);
  const Eigen::MatrixXd& value(const std::string& name) const;
  Eigen::MatrixXd& grad(const std::string& name);
  const Eigen::MatrixXd& grad(const std::string& name) const;

  const std::vector<std::string>& names() const { return order_; }
  void zero_grads();

  /// Total number of scalar parameters.
  std::int64_t scalar_count() const;
  /// Flat access in declaration order, column-major within each tensor.
  double get_scalar(std::int64_t flat) const;
  void add_scalar(std::int64_t flat, double delta);
  double grad_scalar(std::int64_t flat) const;
  /// Name of the tensor owning a flat index (for audit reporting).
  const std::string& owner_of(std::int64_t flat) const;

 private:
  int index_of(const std::string& name) const;
  std::pair<int, std::int64_t> locate(std::int64_t flat) const;

  std::vector<std::string> order_;
  std::unordered_map<std::string, int> index_;
  // Deques keep references returned by declare()/value() stable across
  // later declarations.
  std::deque<Eigen::MatrixXd> values_;
  std::deque<Eigen::MatrixXd> grads_;
};

/// Xavier/Glorot uniform fill, deterministic for a given engine state.
void init_xavier(Eigen::MatrixXd& m, std::mt19937_64& rng);
void init_normal(Eigen::MatrixXd& m, std::mt19937_64& rng, double stddev);

/// Decoupled weight decay Adam. Moment state is keyed by parameter name and
/// created on first step.
class AdamW {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
  };

  AdamW() : AdamW(Options{}) {}
  explicit AdamW(Options opt) : opt_(opt) {}

  void step(ParamSet& params, double lr);
  void reset() { m_.clear(); v_.clear(); t_ = 0; }

 private:
  Options opt_;
  std::unordered_map<std::string, Eigen::MatrixXd> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace qtrack::ad
