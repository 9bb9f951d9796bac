#include "cogspeech/spline.hpp"

#include <algorithm>

#include "cogspeech/error.hpp"

namespace cogspeech {

NaturalCubicSpline::NaturalCubicSpline(std::vector<double> knots_x,
                                       std::vector<double> knots_y)
    : x_(std::move(knots_x)), y_(std::move(knots_y)) {
  const std::size_t n = x_.size();
  if (n < 2 || y_.size() != n) {
    throw PreconditionError("spline needs at least two knots with matching values");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!(x_[i] > x_[i - 1])) throw PreconditionError("spline knots must increase strictly");
  }
  m_.assign(n, 0.0);
  if (n == 2) return;

  // Tridiagonal system for interior second derivatives (Thomas algorithm).
  const std::size_t k = n - 2;
  std::vector<double> diag(k), upper(k), rhs(k);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = x_[i] - x_[i - 1];
    const double h1 = x_[i + 1] - x_[i];
    diag[i - 1] = 2.0 * (h0 + h1);
    upper[i - 1] = h1;
    rhs[i - 1] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
  }
  for (std::size_t i = 1; i < k; ++i) {
    const double lower = x_[i + 1] - x_[i];  // h_{i}, sub-diagonal of row i
    const double w = lower / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  m_[k] = rhs[k - 1] / diag[k - 1];
  for (std::size_t i = k - 1; i-- > 0;) {
    m_[i + 1] = (rhs[i] - upper[i] * m_[i + 2]) / diag[i];
  }
}

double NaturalCubicSpline::operator()(double x) const {
  // Segment index, clamped to the end segments for extrapolation.
  auto it = std::upper_bound(x_.begin(), x_.end(), x);
  std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
  i = std::min(i, x_.size() - 2);
  const double h = x_[i + 1] - x_[i];
  const double a = (x_[i + 1] - x) / h;
  const double b = (x - x_[i]) / h;
  return a * y_[i] + b * y_[i + 1] +
         ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * (h * h) / 6.0;
}

}  // namespace cogspeech
