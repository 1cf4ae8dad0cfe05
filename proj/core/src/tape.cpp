#include "qtrack/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "qtrack/posenc.hpp"

namespace qtrack::ad {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

const Matrix& Var::value() const {
  if (!tape_) throw std::logic_error("value() on empty Var");
  return tape_->value(*this);
}

const Matrix& Tape::value(Var v) const {
  require(v.tape_ == this, "Var belongs to a different tape");
  return nodes_[static_cast<size_t>(v.idx_)].value;
}

Matrix Tape::gradient(Var v) const {
  require(v.tape_ == this, "Var belongs to a different tape");
  const Node& n = nodes_[static_cast<size_t>(v.idx_)];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::make(Matrix v, std::function<void(Tape&)> back) {
  Node n;
  n.value = std::move(v);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Matrix& Tape::grad_buf(int idx) {
  Node& n = nodes_[static_cast<size_t>(idx)];
  if (n.grad.size() == 0)
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

bool Tape::has_grad(int idx) const {
  return nodes_[static_cast<size_t>(idx)].grad.size() != 0;
}

Var Tape::input(Matrix v) { return make(std::move(v)); }

Var Tape::param(ParamSet& ps, const std::string& name) {
  Var v = make(ps.value(name));
  Node& n = nodes_.back();
  n.pset = &ps;
  param_names_.push_back(name);
  n.pname = static_cast<int>(param_names_.size()) - 1;
  return v;
}

Var Tape::add(Var a, Var b) {
  require(a.value().rows() == b.value().rows() &&
              a.value().cols() == b.value().cols(),
          "add: shape mismatch");
  const int ia = a.idx_, ib = b.idx_;
  return make(a.value() + b.value(), [ia, ib](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<size_t>(t.cursor_)].grad;
    t.grad_buf(ia) += g;
    t.grad_buf(ib) += g;
  });
}

Var Tape::sub(Var a, Var b) {
  require(a.value().rows() == b.value().rows() &&
              a.value().cols() == b.value().cols(),
          "sub: shape mismatch");
  const int ia = a.idx_, ib = b.idx_;
  return make(a.value() - b.value(), [ia, ib](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<size_t>(t.cursor_)].grad;
    t.grad_buf(ia) += g;
    t.grad_buf(ib) -= g;
  });
}

Var Tape::mul(Var a, Var b) {
  require(a.value().rows() == b.value().rows() &&
              a.value().cols() == b.value().cols(),
          "mul: shape mismatch");
  const int ia = a.idx_, ib = b.idx_;
  return make(a.value().cwiseProduct(b.value()), [ia, ib](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<size_t>(t.cursor_)].grad;
    t.grad_buf(ia) += g.cwiseProduct(t.val(ib));
    t.grad_buf(ib) += g.cwiseProduct(t.val(ia));
  });
}

Var Tape::cwise_div(Var a, Var b) {
  require(a.value().rows() == b.value().rows() &&
              a.value().cols() == b.value().cols(),
          "cwise_div: shape mismatch");
  const int ia = a.idx_, ib = b.idx_;
  return make(a.value().cwiseQuotient(b.value()), [ia, ib](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<size_t>(t.cursor_)].grad;
    const Matrix& bv = t.val(ib);
    t.grad_buf(ia) += g.cwiseQuotient(bv);
    t.grad_buf(ib) -=
        g.cwiseProduct(t.val(ia)).cwiseQuotient(bv.cwiseProduct(bv));
  });
}

Var Tape::scale(Var a, double s) {
  const int ia = a.idx_;
  return make(a.value() * s, [ia, s](Tape& t) {
    t.grad_buf(ia) += s * t.nodes_[static_cast<size_t>(t.cursor_)].grad;
  });
}

Var Tape::add_scalar(Var a, double c) {
  const int ia = a.idx_;
  return make((a.value().array() + c).matrix(), [ia](Tape& t) {
    t.grad_buf(ia) += t.nodes_[static_cast<size_t>(t.cursor_)].grad;
  });
}

Var Tape::add_rowvec(Var a, Var row) {
  require(row.value().rows() == 1, "add_rowvec: row must be 1 x c");
  require(row.value().cols() == a.value().cols(),
          "add_rowvec: column mismatch");
  const int ia = a.idx_, ir = row.idx_;
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return make(std::move(out), [ia, ir](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<size_t>(t.cursor_)].grad;
    t.grad_buf(ia) += g;
    t.grad_buf(ir) += g.colwise().sum();
  });
}

Var Tape::matmul(Var a, Var b) {
  require(a.value().cols() == b.value().rows(), "matmul: inner dim mismatch");
  const int ia = a.idx_, ib = b.idx_;
  return make(a.value() * b.value(), [ia, ib](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<size_t>(t.cursor_)].grad;
    t.grad_buf(ia) += g * t.val(ib).transpose();
    t.grad_buf(ib) += t.val(ia).transpose() * g;
  });
}

Var Tape::transpose(Var a) {
  const int ia = a.idx_;
  return make(a.value().transpose(), [ia](Tape& t) {
    t.grad_buf(ia) +=
        t.nodes_[static_cast<size_t>(t.cursor_)].grad.transpose();
  });
}

Var Tape::concat_rows(Var a, Var b) {
  require(a.value().cols() == b.value().cols(), "concat_rows: column mismatch");
  const int ia = a.idx_, ib = b.idx_;
  const Eigen::Index ra = a.value().rows(), rb = b.value().rows();
  Matrix out(ra + rb, a.value().cols());
  out.topRows(ra) = a.value();
  out.bottomRows(rb) = b.value();
  return make(std::move(out), [ia, ib, ra, rb](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<size_t>(t.cursor_)].grad;
    t.grad_buf(ia) += g.topRows(ra);
    t.grad_buf(ib) += g.bottomRows(rb);
  });
}

Var Tape::slice_rows(Var a, int r0, int n) {
  require(r0 >= 0 && n >= 0 && r0 + n <= a.value().rows(),
          "slice_rows: range out of bounds");
  const int ia = a.idx_;
  return make(a.value().middleRows(r0, n), [ia, r0, n](Tape& t) {
    t.grad_buf(ia).middleRows(r0, n) +=
        t.nodes_[static_cast<size_t>(t.cursor_)].grad;
  });
}

Var Tape::select_rows(Var a, std::vector<int> rows) {
  for (int r : rows)
    require(r >= 0 && r < a.value().rows(), "select_rows: index out of bounds");
  const int ia = a.idx_;
  Matrix out(static_cast<Eigen::Index>(rows.size()), a.value().cols());
  for (size_t k = 0; k < rows.size(); ++k) out.row(k) = a.value().row(rows[k]);
  return make(std::move(out), [ia, rows = std::move(rows)](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<size_t>(t.cursor_)].grad;
    Matrix& ga = t.grad_buf(ia);
    for (size_t k = 0; k < rows.size(); ++k) ga.row(rows[k]) += g.row(k);
  });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  Eigen::Index rows = parts[0].value().rows(), cols = 0;
  for (const Var& p : parts) {
    require(p.value().rows() == rows, "concat_cols: row mismatch");
    cols += p.value().cols();
  }
  Matrix out(rows, cols);
  std::vector<int> idx;
  std::vector<Eigen::Index> offs, widths;
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.value().cols()) = p.value();
    idx.push_back(p.idx_);
    offs.push_back(c);
    widths.push_back(p.value().cols());
    c += p.value().cols();
  }
  return make(std::move(out), [idx = std::move(idx), offs = std::move(offs),
                               widths = std::move(widths)](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<size_t>(t.cursor_)].grad;
    for (size_t k = 0; k < idx.size(); ++k)
      t.grad_buf(idx[k]) += g.middleCols(offs[k], widths[k]);
  });
}

Var Tape::slice_cols(Var a, int c0, int n) {
  require(c0 >= 0 && n >= 0 && c0 + n <= a.value().cols(),
          "slice_cols: range out of bounds");
  const int ia = a.idx_;
  return make(a.value().middleCols(c0, n), [ia, c0, n](Tape& t) {
    t.grad_buf(ia).middleCols(c0, n) +=
        t.nodes_[static_cast<size_t>(t.cursor_)].grad;
  });
}

Var Tape::softmax_rows(Var a) {
  Matrix y = a.value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const double m = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  const int ia = a.idx_;
  return make(std::move(y), [ia](Tape& t) {
    const Node& self = t.nodes_[static_cast<size_t>(t.cursor_)];
    const Matrix& g = self.grad;
    const Matrix& y = self.value;
    Matrix& ga = t.grad_buf(ia);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = g.row(r).cwiseProduct(y.row(r)).sum();
      ga.row(r) += y.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
  });
}

Var Tape::layer_norm_rows(Var a, Var gamma, Var beta, double eps) {
  require(gamma.value().rows() == 1 && beta.value().rows() == 1,
          "layer_norm_rows: gamma/beta must be 1 x c");
  require(gamma.value().cols() == a.value().cols() &&
              beta.value().cols() == a.value().cols(),
          "layer_norm_rows: width mismatch");
  const Eigen::Index n = a.value().rows(), d = a.value().cols();
  Matrix xhat(n, d);
  Eigen::VectorXd inv_sigma(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = a.value().row(r).mean();
    const Eigen::RowVectorXd centered = a.value().row(r).array() - mu;
    const double var = centered.squaredNorm() / static_cast<double>(d);
    inv_sigma(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = centered * inv_sigma(r);
  }
  Matrix out = xhat;
  out.array().rowwise() *= gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  const int ia = a.idx_, ig = gamma.idx_, ib = beta.idx_;
  return make(std::move(out),
              [ia, ig, ib, xhat = std::move(xhat),
               inv_sigma = std::move(inv_sigma), d](Tape& t) {
                const Matrix& g = t.nodes_[static_cast<size_t>(t.cursor_)].grad;
                t.grad_buf(ib) += g.colwise().sum();
                t.grad_buf(ig) += g.cwiseProduct(xhat).colwise().sum();
                const Eigen::RowVectorXd gw = t.val(ig).row(0);
                Matrix& ga = t.grad_buf(ia);
                for (Eigen::Index r = 0; r < g.rows(); ++r) {
                  const Eigen::RowVectorXd dxh = g.row(r).cwiseProduct(gw);
                  const double m1 = dxh.mean();
                  const double m2 =
                      dxh.cwiseProduct(xhat.row(r)).sum() / static_cast<double>(d);
                  ga.row(r) += inv_sigma(r) *
                               (dxh.array() - m1 - xhat.row(r).array() * m2)
                                   .matrix();
                }
              });
}

Var Tape::relu(Var a) {
  const int ia = a.idx_;
  return make(a.value().cwiseMax(0.0), [ia](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<size_t>(t.cursor_)].grad;
    t.grad_buf(ia) +=
        g.cwiseProduct((t.val(ia).array() > 0.0).cast<double>().matrix());
  });
}

Var Tape::sigmoid(Var a) {
  Matrix y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  const int ia = a.idx_;
  return make(std::move(y), [ia](Tape& t) {
    const Node& self = t.nodes_[static_cast<size_t>(t.cursor_)];
    const auto y = self.value.array();
    t.grad_buf(ia) += (self.grad.array() * y * (1.0 - y)).matrix();
  });
}

Var Tape::softplus(Var a) {
  // max(x, 0) + log1p(exp(-|x|)) is stable for large |x|.
  Matrix y = a.value().unaryExpr([](double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  });
  const int ia = a.idx_;
  return make(std::move(y), [ia](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<size_t>(t.cursor_)].grad;
    const Eigen::ArrayXXd s = 1.0 / (1.0 + (-t.val(ia).array()).exp());
    t.grad_buf(ia) += (g.array() * s).matrix();
  });
}

Var Tape::log(Var a) {
  const int ia = a.idx_;
  return make(a.value().array().log().matrix(), [ia](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<size_t>(t.cursor_)].grad;
    t.grad_buf(ia) += g.cwiseQuotient(t.val(ia));
  });
}

Var Tape::abs(Var a) {
  const int ia = a.idx_;
  return make(a.value().cwiseAbs(), [ia](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<size_t>(t.cursor_)].grad;
    t.grad_buf(ia) += g.cwiseProduct(
        t.val(ia).unaryExpr([](double x) { return x < 0.0 ? -1.0 : 1.0; }));
  });
}

Var Tape::cwise_max(Var a, Var b) {
  require(a.value().rows() == b.value().rows() &&
              a.value().cols() == b.value().cols(),
          "cwise_max: shape mismatch");
  const int ia = a.idx_, ib = b.idx_;
  return make(a.value().cwiseMax(b.value()), [ia, ib](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<size_t>(t.cursor_)].grad;
    const Matrix mask =
        (t.val(ia).array() >= t.val(ib).array()).cast<double>().matrix();
    t.grad_buf(ia) += g.cwiseProduct(mask);
    t.grad_buf(ib) += g - g.cwiseProduct(mask);
  });
}

Var Tape::cwise_min(Var a, Var b) {
  require(a.value().rows() == b.value().rows() &&
              a.value().cols() == b.value().cols(),
          "cwise_min: shape mismatch");
  const int ia = a.idx_, ib = b.idx_;
  return make(a.value().cwiseMin(b.value()), [ia, ib](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<size_t>(t.cursor_)].grad;
    const Matrix mask =
        (t.val(ia).array() <= t.val(ib).array()).cast<double>().matrix();
    t.grad_buf(ia) += g.cwiseProduct(mask);
    t.grad_buf(ib) += g - g.cwiseProduct(mask);
  });
}

Var Tape::sum(Var a) {
  const int ia = a.idx_;
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make(std::move(out), [ia](Tape& t) {
    const double g = t.nodes_[static_cast<size_t>(t.cursor_)].grad(0, 0);
    t.grad_buf(ia).array() += g;
  });
}

Var Tape::mean(Var a) {
  const int ia = a.idx_;
  const double n = static_cast<double>(a.value().size());
  Matrix out(1, 1);
  out(0, 0) = a.value().sum() / n;
  return make(std::move(out), [ia, n](Tape& t) {
    const double g = t.nodes_[static_cast<size_t>(t.cursor_)].grad(0, 0);
    t.grad_buf(ia).array() += g / n;
  });
}

Var Tape::pow_scalar(Var a, double p) {
  const int ia = a.idx_;
  const Eigen::ArrayXXd base = a.value().array().max(0.0);
  return make(base.pow(p).matrix(), [ia, p, base](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<size_t>(t.cursor_)].grad;
    // d/dx x^p = p x^(p-1); the clamp at zero contributes no gradient.
    const Eigen::ArrayXXd active =
        (t.val(ia).array() > 0.0).cast<double>();
    const Eigen::ArrayXXd slope = p * base.pow(p - 1.0) * active;
    t.grad_buf(ia).array() += g.array() * slope;
  });
}

Var Tape::logit(Var a, double eps) {
  const int ia = a.idx_;
  Matrix clamped = a.value().cwiseMax(eps).cwiseMin(1.0 - eps);
  Matrix y = (clamped.array() / (1.0 - clamped.array())).log().matrix();
  return make(std::move(y), [ia, eps, clamped = std::move(clamped)](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<size_t>(t.cursor_)].grad;
    const Eigen::ArrayXXd x = t.val(ia).array();
    const Eigen::ArrayXXd c = clamped.array();
    const Eigen::ArrayXXd active =
        (x > eps && x < 1.0 - eps).cast<double>();
    t.grad_buf(ia) += (g.array() * active / (c * (1.0 - c))).matrix();
  });
}

Var Tape::posenc_boxes(Var boxes, int d_model, double temperature) {
  require(boxes.value().cols() == 4, "posenc_boxes: input must be n x 4");
  require(d_model > 0 && d_model % 8 == 0,
          "posenc_boxes: d_model must be a positive multiple of 8");
  const int coord_dim = d_model / 4;
  const Eigen::Index n = boxes.value().rows();
  Matrix out(n, d_model);
  Matrix slope(n, d_model);  // d out(r, j) / d coord-owning out column j
  std::vector<double> vbuf(coord_dim), gbuf(coord_dim);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (int c = 0; c < 4; ++c) {
      sinusoid_slot(boxes.value()(r, c), temperature, coord_dim, vbuf.data(),
                    gbuf.data());
      for (int k = 0; k < coord_dim; ++k) {
        out(r, c * coord_dim + k) = vbuf[k];
        slope(r, c * coord_dim + k) = gbuf[k];
      }
    }
  }
  const int ia = boxes.idx_;
  return make(std::move(out),
              [ia, coord_dim, slope = std::move(slope)](Tape& t) {
                const Matrix& g = t.nodes_[static_cast<size_t>(t.cursor_)].grad;
                Matrix& ga = t.grad_buf(ia);
                const Matrix weighted = g.cwiseProduct(slope);
                for (int c = 0; c < 4; ++c)
                  ga.col(c) +=
                      weighted.middleCols(c * coord_dim, coord_dim).rowwise().sum();
              });
}

void Tape::backward(Var loss) {
  require(loss.tape_ == this, "backward: Var belongs to a different tape");
  require(loss.value().rows() == 1 && loss.value().cols() == 1,
          "backward: loss must be 1 x 1");
  grad_buf(loss.idx_).setOnes();
  for (int i = loss.idx_; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.grad.size() == 0) continue;  // never reached from the loss
    if (n.back) {
      cursor_ = i;
      n.back(*this);
    }
    if (n.pset) n.pset->grad(param_names_[static_cast<size_t>(n.pname)]) += n.grad;
  }
}

}  // namespace qtrack::ad
