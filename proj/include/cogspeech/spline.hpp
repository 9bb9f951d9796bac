#pragma once

#include <vector>

namespace cogspeech {

// Natural cubic spline interpolant (zero second derivative at both ends).
class NaturalCubicSpline {
 public:
  // knots_x strictly increasing, at least 2 knots.
  NaturalCubicSpline(std::vector<double> knots_x, std::vector<double> knots_y);

  double operator()(double x) const;

  const std::vector<double>& second_derivatives() const noexcept { return m_; }

 private:
  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> m_;
};

}  // namespace cogspeech
