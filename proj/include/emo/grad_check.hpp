#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include <Eigen/Dense>

#include "emo/params.hpp"

namespace emo {

struct GradCheckOptions {
  double eps = 1e-5;
  std::size_t num_coordinates = 200;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::string worst_coordinate;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

/// Returns f(x) and writes the analytic gradient into *grad when non-null.
using VectorFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

/// Compares the analytic gradient of fn at point with central differences
/// (f(x+eps) - f(x-eps)) / (2 eps) on a random coordinate subset (all
/// coordinates when there are fewer than requested).
GradCheckResult gradient_check(const VectorFn& fn, const Eigen::VectorXd& point, const GradCheckOptions& opts = {});

/// Same contract over named tensors: loss() evaluates at the current values of
/// params, analytic holds d loss / d params with matching names and shapes.
/// Coordinates are drawn by picking a tensor uniformly, then an entry. Every
/// perturbation is undone before returning.
GradCheckResult gradient_check(ParamStore& params, const ParamStore& analytic, const std::function<double()>& loss,
                               const GradCheckOptions& opts = {});

}  // namespace emo
