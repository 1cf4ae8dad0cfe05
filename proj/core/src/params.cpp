#include "qtrack/params.hpp"

#include <cmath>
#include <stdexcept>

namespace qtrack::ad {

Eigen::MatrixXd& ParamSet::declare(const std::string& name, int rows, int cols) {
  if (index_.count(name))
    throw std::invalid_argument("parameter redeclared: " + name);
  index_[name] = static_cast<int>(order_.size());
  order_.push_back(name);
  values_.emplace_back(Eigen::MatrixXd::Zero(rows, cols));
  grads_.emplace_back(Eigen::MatrixXd::Zero(rows, cols));
  return values_.back();
}

int ParamSet::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

bool ParamSet::contains(const std::string& name) const {
  return index_.count(name) != 0;
}

Eigen::MatrixXd& ParamSet::value(const std::string& name) {
  return values_[index_of(name)];
}
const Eigen::MatrixXd& ParamSet::value(const std::string& name) const {
  return values_[index_of(name)];
}
Eigen::MatrixXd& ParamSet::grad(const std::string& name) {
  return grads_[index_of(name)];
}
const Eigen::MatrixXd& ParamSet::grad(const std::string& name) const {
  return grads_[index_of(name)];
}

void ParamSet::zero_grads() {
  for (auto& g : grads_) g.setZero();
}

std::int64_t ParamSet::scalar_count() const {
  std::int64_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

std::pair<int, std::int64_t> ParamSet::locate(std::int64_t flat) const {
  if (flat < 0) throw std::out_of_range("flat parameter index out of range");
  std::int64_t off = flat;
  for (size_t i = 0; i < values_.size(); ++i) {
    if (off < values_[i].size()) return {static_cast<int>(i), off};
    off -= values_[i].size();
  }
  throw std::out_of_range("flat parameter index out of range");
}

double ParamSet::get_scalar(std::int64_t flat) const {
  auto [i, off] = locate(flat);
  return values_[i].data()[off];
}

void ParamSet::add_scalar(std::int64_t flat, double delta) {
  auto [i, off] = locate(flat);
  values_[i].data()[off] += delta;
}

double ParamSet::grad_scalar(std::int64_t flat) const {
  auto [i, off] = locate(flat);
  return grads_[i].data()[off];
}

const std::string& ParamSet::owner_of(std::int64_t flat) const {
  auto [i, off] = locate(flat);
  (void)off;
  return order_[i];
}

void init_xavier(Eigen::MatrixXd& m, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
}

void init_normal(Eigen::MatrixXd& m, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
}

void AdamW::step(ParamSet& params, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (const auto& name : params.names()) {
    Eigen::MatrixXd& theta = params.value(name);
    const Eigen::MatrixXd& g = params.grad(name);
    auto mit = m_.find(name);
    if (mit == m_.end()) {
      m_[name] = Eigen::MatrixXd::Zero(theta.rows(), theta.cols());
      v_[name] = Eigen::MatrixXd::Zero(theta.rows(), theta.cols());
    }
    Eigen::MatrixXd& m = m_[name];
    Eigen::MatrixXd& v = v_[name];
    m = opt_.beta1 * m + (1.0 - opt_.beta1) * g;
    v = opt_.beta2 * v + (1.0 - opt_.beta2) * g.cwiseProduct(g);
    const Eigen::MatrixXd mhat = m / bc1;
    const Eigen::MatrixXd vhat = v / bc2;
    theta -= lr * (mhat.array() / (vhat.array().sqrt() + opt_.eps)).matrix();
    theta -= lr * opt_.weight_decay * theta;
  }
}

}  // namespace qtrack::ad
