#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>

namespace hbest {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Spline coefficient vector of length B+1; index 0 is the intercept,
// indices 1..B are cosine-basis coefficients.
using SplineVector = Eigen::VectorXd;

// One observed stationary series. `sample_rate` is metadata only; all
// frequencies in this library are in radians per sample.
struct TimeSeries {
  Vec values;
  std::optional<double> sample_rate;
  std::string label;

  int n() const { return static_cast<int>(values.size()); }
  // Throws InvalidInput unless all values are finite and n >= min_length.
  void validate(int min_length = 2) const;
};

// Periodogram ordinates at the fundamental frequencies 2*pi*j/n,
// j = 1..floor(n/2), strictly increasing in (0, pi].
struct Periodogram {
  Vec frequencies;
  Vec ordinates;
  int n = 0;  // length of the originating series

  int m() const { return static_cast<int>(ordinates.size()); }
};

// Cosine design matrix: row j is (1, sqrt(2)cos(1*w_j), ..., sqrt(2)cos(B*w_j)).
struct BasisMatrix {
  Mat rows;
  int B = 0;
  Vec frequencies;
};

}  // namespace hbest
