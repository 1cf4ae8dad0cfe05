#include "qtrack/posenc.hpp"

#include <cmath>
#include <stdexcept>

namespace qtrack {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_dims(int d_model) {
  if (d_model <= 0 || d_model % 8 != 0)
    throw std::invalid_argument("d_model must be a positive multiple of 8");
}

// Fills coord_dim entries: (sin, cos) pairs over a geometric frequency ladder.
void encode_coord(double v, double temperature, int coord_dim, double* out,
                  double* grad) {
  const int n_freq = coord_dim / 2;
  for (int i = 0; i < n_freq; ++i) {
    const double omega =
        kTwoPi / std::pow(temperature, 2.0 * i / static_cast<double>(coord_dim));
    const double s = std::sin(v * omega);
    const double c = std::cos(v * omega);
    out[2 * i] = s;
    out[2 * i + 1] = c;
    if (grad) {
      grad[2 * i] = omega * c;
      grad[2 * i + 1] = -omega * s;
    }
  }
}
}  // namespace

void sinusoid_slot(double value, double temperature, int coord_dim,
                   double* out_value, double* out_grad) {
  encode_coord(value, temperature, coord_dim, out_value, out_grad);
}

Eigen::VectorXd encode_box_position(const BoundingBox& box, int d_model,
                                    double temperature) {
  check_dims(d_model);
  const int coord_dim = d_model / 4;
  Eigen::VectorXd out(d_model);
  const double coords[4] = {box.cx, box.cy, box.w, box.h};
  for (int c = 0; c < 4; ++c)
    encode_coord(coords[c], temperature, coord_dim, out.data() + c * coord_dim,
                 nullptr);
  return out;
}

Eigen::MatrixXd encode_box_positions(const Eigen::MatrixXd& boxes, int d_model,
                                     double temperature) {
  check_dims(d_model);
  if (boxes.cols() != 4)
    throw std::invalid_argument("boxes must be n x 4 (cx, cy, w, h)");
  const int coord_dim = d_model / 4;
  Eigen::MatrixXd out(boxes.rows(), d_model);
  std::vector<double> buf(coord_dim);
  for (Eigen::Index r = 0; r < boxes.rows(); ++r) {
    for (int c = 0; c < 4; ++c) {
      encode_coord(boxes(r, c), temperature, coord_dim, buf.data(), nullptr);
      for (int k = 0; k < coord_dim; ++k) out(r, c * coord_dim + k) = buf[k];
    }
  }
  return out;
}

Eigen::MatrixXd encode_grid_positions(int grid_h, int grid_w, int d_model,
                                      double temperature) {
  check_dims(d_model);
  if (grid_h <= 0 || grid_w <= 0)
    throw std::invalid_argument("grid dimensions must be positive");
  const int half = d_model / 2;
  Eigen::MatrixXd out(grid_h * grid_w, d_model);
  std::vector<double> buf(half);
  for (int gy = 0; gy < grid_h; ++gy) {
    for (int gx = 0; gx < grid_w; ++gx) {
      const int row = gy * grid_w + gx;
      const double x = (gx + 0.5) / grid_w;
      const double y = (gy + 0.5) / grid_h;
      encode_coord(x, temperature, half, buf.data(), nullptr);
      for (int k = 0; k < half; ++k) out(row, k) = buf[k];
      encode_coord(y, temperature, half, buf.data(), nullptr);
      for (int k = 0; k < half; ++k) out(row, half + k) = buf[k];
    }
  }
  return out;
}

}  // namespace qtrack
