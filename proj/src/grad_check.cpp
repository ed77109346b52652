#include "emo/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "emo/error.hpp"
#include "emo/rng.hpp"

namespace emo {

namespace {

double finite_or_throw(double v) {
  if (!std::isfinite(v)) throw Error("gradient check: function returned a non-finite value");
  return v;
}

void record(GradCheckResult& r, const std::string& where, double analytic, double numeric) {
  const double err = relative_error(analytic, numeric);
  ++r.coordinates_checked;
  if (err > r.max_relative_error || r.worst_coordinate.empty()) {
    r.max_relative_error = std::max(err, r.max_relative_error);
    r.worst_coordinate = where;
    r.worst_analytic = analytic;
    r.worst_numeric = numeric;
  }
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

// The divisor is the step actually taken after rounding, (x + eps) - (x - eps)
// in floating point, rather than the nominal 2 eps.
GradCheckResult gradient_check(const VectorFn& fn, const Eigen::VectorXd& point, const GradCheckOptions& opts) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(point.size());
  finite_or_throw(fn(point, &grad));
  if (grad.size() != point.size()) throw Error("gradient check: gradient has wrong length");

  std::vector<Eigen::Index> coords(static_cast<std::size_t>(point.size()));
  std::iota(coords.begin(), coords.end(), Eigen::Index{0});
  if (coords.size() > opts.num_coordinates) {
    Rng rng(opts.seed);
    rng.shuffle(coords);
    coords.resize(opts.num_coordinates);
  }

  GradCheckResult result;
  Eigen::VectorXd x = point;
  for (Eigen::Index i : coords) {
    const double orig = x[i];
    x[i] = orig + opts.eps;
    const double fp = finite_or_throw(fn(x, nullptr));
    const double hi = x[i];
    x[i] = orig - opts.eps;
    const double fm = finite_or_throw(fn(x, nullptr));
    const double lo = x[i];
    x[i] = orig;
    record(result, "x[" + std::to_string(i) + "]", grad[i], (fp - fm) / (hi - lo));
  }
  return result;
}

GradCheckResult gradient_check(ParamStore& params, const ParamStore& analytic, const std::function<double()>& loss,
                               const GradCheckOptions& opts) {
  const auto& names = analytic.names();
  if (names.empty()) throw Error("gradient check: no tensors to check");
  Rng rng(opts.seed);
  GradCheckResult result;
  for (std::size_t c = 0; c < opts.num_coordinates; ++c) {
    const std::string& name = names[rng.uniform_index(names.size())];
    ad::Matrix& value = params.at(name);
    const ad::Matrix& g = analytic.at(name);
    if (g.rows() != value.rows() || g.cols() != value.cols()) throw Error("gradient check: shape mismatch for " + name);
    const Eigen::Index flat = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(value.size())));
    double& entry = value.data()[flat];
    const double orig = entry;
    entry = orig + opts.eps;
    const double fp = finite_or_throw(loss());
    const double hi = entry;
    entry = orig - opts.eps;
    const double fm = finite_or_throw(loss());
    const double lo = entry;
    entry = orig;
    record(result, name + "[" + std::to_string(flat) + "]", g.data()[flat], (fp - fm) / (hi - lo));
  }
  return result;
}

}  // namespace emo
