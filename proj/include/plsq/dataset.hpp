#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "plsq/matrix.hpp"

namespace plsq {

// Response y (length n) with dense design X (n×p) and optional column names.
struct Dataset {
  Vector y;
  Matrix x;
  std::optional<std::vector<std::string>> names;

  std::size_t n() const { return y.size(); }
  std::size_t p() const { return x.cols(); }

  void validate(const char* who = "dataset") const {
    if (y.empty() || x.cols() == 0) throw ValidationError(std::string(who) + ": empty dataset");
    if (x.rows() != y.size())
      throw ValidationError(std::string(who) + ": X has " + std::to_string(x.rows()) +
                            " rows but y has length " + std::to_string(y.size()));
    require_finite(x, who);
    require_finite(y, who);
    if (names && names->size() != x.cols())
      throw ValidationError(std::string(who) + ": name count does not match columns");
  }
};

// Centering/scaling that maps a dataset to mean(y)=0, column means 0 and
// diag(X'X/n)=I. scales are the per-column divisors (root mean square of the
// centered column).
struct StandardizeTransform {
  Vector x_bar;
  double y_bar = 0.0;
  Vector scales;
};

inline std::pair<Dataset, StandardizeTransform> standardize(const Dataset& d) {
  d.validate("standardize");
  const std::size_t n = d.n(), p = d.p();
  StandardizeTransform t;
  t.x_bar.assign(p, 0.0);
  t.scales.assign(p, 0.0);

  double ysum = 0.0;
  for (double v : d.y) ysum += v;
  t.y_bar = ysum / static_cast<double>(n);

  for (std::size_t j = 0; j < p; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += d.x(i, j);
    t.x_bar[j] = s / static_cast<double>(n);
  }

  Dataset out = d;
  for (std::size_t i = 0; i < n; ++i) out.y[i] -= t.y_bar;
  for (std::size_t j = 0; j < p; ++j) {
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      out.x(i, j) = d.x(i, j) - t.x_bar[j];
      ss += out.x(i, j) * out.x(i, j);
    }
    const double scale = std::sqrt(ss / static_cast<double>(n));
    if (!(scale > 0.0)) {
      const std::string label = d.names ? (*d.names)[j] : std::to_string(j + 1);
      throw ValidationError("standardize: column " + label + " has zero variance");
    }
    t.scales[j] = scale;
    for (std::size_t i = 0; i < n; ++i) out.x(i, j) /= scale;
  }
  return {std::move(out), std::move(t)};
}

// Undoes `standardize`; used by tests and to round-trip datasets.
inline Dataset unstandardize(const Dataset& d, const StandardizeTransform& t) {
  Dataset out = d;
  for (std::size_t i = 0; i < out.n(); ++i) out.y[i] += t.y_bar;
  for (std::size_t j = 0; j < out.p(); ++j)
    for (std::size_t i = 0; i < out.n(); ++i) out.x(i, j) = out.x(i, j) * t.scales[j] + t.x_bar[j];
  return out;
}

// theta must already be on the original column scale.
inline double recover_intercept(const Vector& theta, const StandardizeTransform& t) {
  if (theta.size() != t.x_bar.size())
    throw ValidationError("recover_intercept: coefficient length does not match transform");
  return t.y_bar - dot(t.x_bar, theta);
}

inline Vector predict(const Matrix& x, const Vector& theta) {
  if (x.cols() != theta.size())
    throw ValidationError("predict: X has " + std::to_string(x.cols()) +
                          " columns but theta has length " + std::to_string(theta.size()));
  return x * theta;
}

}  // namespace plsq
