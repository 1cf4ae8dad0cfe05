#include "qtrack/posenc.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Independent scalar-loop reference for the box encoding layout: d_model/4
// dims per coordinate in (cx, cy, w, h) order, each a (sin, cos) ladder.
std::vector<double> reference_encoding(const qtrack::BoundingBox& b,
                                       int d_model, double temperature) {
  const int coord_dim = d_model / 4;
  const double coords[4] = {b.cx, b.cy, b.w, b.h};
  std::vector<double> out(static_cast<size_t>(d_model));
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < coord_dim / 2; ++i) {
      const double omega =
          kTwoPi / std::pow(temperature, 2.0 * i / coord_dim);
      out[static_cast<size_t>(c * coord_dim + 2 * i)] =
          std::sin(coords[c] * omega);
      out[static_cast<size_t>(c * coord_dim + 2 * i + 1)] =
          std::cos(coords[c] * omega);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("box encoding matches the scalar-loop reference") {
  const qtrack::BoundingBox b{0.37, 0.82, 0.15, 0.4};
  for (int d_model : {8, 32, 64}) {
    const Eigen::VectorXd enc = qtrack::encode_box_position(b, d_model);
    const auto ref = reference_encoding(b, d_model, 20.0);
    REQUIRE(enc.size() == d_model);
    for (int k = 0; k < d_model; ++k)
      CHECK(enc(k) == doctest::Approx(ref[static_cast<size_t>(k)])
                          .epsilon(1e-12));
  }
}

TEST_CASE("zero coordinates encode as sin 0, cos 1") {
  const qtrack::BoundingBox b{0.0, 0.0, 0.3, 0.4};
  const Eigen::VectorXd enc = qtrack::encode_box_position(b, 32);
  const int coord_dim = 8;  // 32 / 4
  for (int c = 0; c < 2; ++c) {  // cx and cy slots hold the zeros
    for (int i = 0; i < coord_dim / 2; ++i) {
      CHECK(enc(c * coord_dim + 2 * i) == 0.0);
      CHECK(enc(c * coord_dim + 2 * i + 1) == 1.0);
    }
  }
}

TEST_CASE("encoding is Lipschitz in the box coordinates") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int trial = 0; trial < 50; ++trial) {
    const qtrack::BoundingBox b{u(rng), u(rng), u(rng), u(rng)};
    qtrack::BoundingBox p = b;
    p.cx += 1e-6;
    const Eigen::VectorXd e0 = qtrack::encode_box_position(b, 64);
    const Eigen::VectorXd e1 = qtrack::encode_box_position(p, 64);
    CHECK((e1 - e0).cwiseAbs().maxCoeff() < 1e-3);
  }
}

TEST_CASE("box encoding entries stay in [-1, 1] and vary with temperature") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int trial = 0; trial < 20; ++trial) {
    const qtrack::BoundingBox b{u(rng), u(rng), u(rng), u(rng)};
    const Eigen::VectorXd enc = qtrack::encode_box_position(b, 64);
    CHECK(enc.maxCoeff() <= 1.0);
    CHECK(enc.minCoeff() >= -1.0);
    const Eigen::VectorXd hot = qtrack::encode_box_position(b, 64, 100.0);
    CHECK((enc - hot).cwiseAbs().maxCoeff() > 1e-6);
  }
}

TEST_CASE("batched encoding agrees with the single-box path") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Eigen::MatrixXd boxes(5, 4);
  for (Eigen::Index r = 0; r < boxes.rows(); ++r)
    for (Eigen::Index c = 0; c < 4; ++c) boxes(r, c) = u(rng);
  const Eigen::MatrixXd enc = qtrack::encode_box_positions(boxes, 32);
  REQUIRE(enc.rows() == 5);
  REQUIRE(enc.cols() == 32);
  for (Eigen::Index r = 0; r < boxes.rows(); ++r) {
    const qtrack::BoundingBox b{boxes(r, 0), boxes(r, 1), boxes(r, 2),
                                boxes(r, 3)};
    const Eigen::VectorXd one = qtrack::encode_box_position(b, 32);
    CHECK((enc.row(r).transpose() - one).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("dimension validation") {
  const qtrack::BoundingBox b{0.5, 0.5, 0.2, 0.2};
  CHECK_THROWS_AS(qtrack::encode_box_position(b, 12), std::invalid_argument);
  CHECK_THROWS_AS(qtrack::encode_box_position(b, 0), std::invalid_argument);
  CHECK_THROWS_AS(qtrack::encode_box_position(b, -8), std::invalid_argument);
  CHECK_THROWS_AS(qtrack::encode_box_positions(Eigen::MatrixXd::Zero(2, 3), 8),
                  std::invalid_argument);
  CHECK_THROWS_AS(qtrack::encode_grid_positions(0, 4, 8),
                  std::invalid_argument);
}

TEST_CASE("sinusoid_slot derivative matches central differences") {
  const double temperature = 20.0;
  const int coord_dim = 8;
  std::vector<double> v0(coord_dim), g(coord_dim), vp(coord_dim), vm(coord_dim);
  const double h = 1e-6;
  for (double x : {0.1, 0.43, 0.77}) {
    qtrack::sinusoid_slot(x, temperature, coord_dim, v0.data(), g.data());
    qtrack::sinusoid_slot(x + h, temperature, coord_dim, vp.data(), nullptr);
    qtrack::sinusoid_slot(x - h, temperature, coord_dim, vm.data(), nullptr);
    for (int k = 0; k < coord_dim; ++k) {
      const double fd = (vp[static_cast<size_t>(k)] -
                         vm[static_cast<size_t>(k)]) / (2 * h);
      CHECK(g[static_cast<size_t>(k)] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("grid encoding is row-major with x in the low half, y in the high half") {
  const int gh = 2, gw = 3, d_model = 16;
  const Eigen::MatrixXd grid = qtrack::encode_grid_positions(gh, gw, d_model);
  REQUIRE(grid.rows() == gh * gw);
  REQUIRE(grid.cols() == d_model);
  const int half = d_model / 2;
  std::vector<double> buf(static_cast<size_t>(half));
  for (int gy = 0; gy < gh; ++gy) {
    for (int gx = 0; gx < gw; ++gx) {
      const int row = gy * gw + gx;
      qtrack::sinusoid_slot((gx + 0.5) / gw, 20.0, half, buf.data(), nullptr);
      for (int k = 0; k < half; ++k)
        CHECK(grid(row, k) == doctest::Approx(buf[static_cast<size_t>(k)]));
      qtrack::sinusoid_slot((gy + 0.5) / gh, 20.0, half, buf.data(), nullptr);
      for (int k = 0; k < half; ++k)
        CHECK(grid(row, half + k) ==
              doctest::Approx(buf[static_cast<size_t>(k)]));
    }
  }
  // All cells get distinct encodings.
  for (int r = 0; r < grid.rows(); ++r)
    for (int s = r + 1; s < grid.rows(); ++s)
      CHECK((grid.row(r) - grid.row(s)).cwiseAbs().maxCoeff() > 1e-9);
}
