#pragma once

#include <Eigen/Core>

#include "qtrack/box.hpp"

namespace qtrack {

/// Sinusoidal encoding of one box into a d_model vector: d_model/4 dims per
/// coordinate (cx, cy, w, h), interleaved sin/cos pairs, DAB-style 2*pi
/// coordinate scaling. d_model must be divisible by 8. Entries lie in [-1,1].
Eigen::VectorXd encode_box_position(const BoundingBox& box, int d_model,
                                    double temperature = 20.0);

/// Row i encodes boxes.row(i) = (cx, cy, w, h). Same layout as
/// encode_box_position.
Eigen::MatrixXd encode_box_positions(const Eigen::MatrixXd& boxes, int d_model,
                                     double temperature = 20.0);

/// d(output)/d(coord) for one scalar coordinate slot; used by the autodiff
/// tape. coord_dim = d_model / 4.
void sinusoid_slot(double value, double temperature, int coord_dim,
                   double* out_value, double* out_grad);

/// 2D sinusoidal grid encoding for memory tokens: one row per cell, row-major
/// over (gy, gx), half the dims encode x = (gx+0.5)/grid_w, half encode y.
/// d_model must be divisible by 8.
Eigen::MatrixXd encode_grid_positions(int grid_h, int grid_w, int d_model,
                                      double temperature = 20.0);

}  // namespace qtrack
