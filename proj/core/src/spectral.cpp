#include "hbest/spectral.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>

#include "hbest/errors.hpp"

namespace hbest {

void TimeSeries::validate(int min_length) const {
  if (n() < min_length)
    throw InvalidInput("series '" + label + "': length " + std::to_string(n()) +
                       " < required " + std::to_string(min_length));
  if (!values.allFinite())
    throw InvalidInput("series '" + label + "': non-finite values");
}

Vec fundamental_frequencies(int n) {
  if (n < 2) throw InvalidInput("fundamental_frequencies: n must be >= 2");
  const int m = n / 2;
  Vec freqs(m);
  for (int j = 1; j <= m; ++j)
    freqs[j - 1] = 2.0 * std::numbers::pi * j / n;
  return freqs;
}

namespace {

// Full-grid squared DFT magnitudes over n; kissfft handles any n.
Vec dft_power(const Vec& x) {
  Eigen::FFT<double> fft;
  std::vector<double> in(x.data(), x.data() + x.size());
  std::vector<std::complex<double>> out;
  fft.fwd(out, in);
  const int n = static_cast<int>(x.size());
  Vec power(n);
  for (int k = 0; k < n; ++k) power[k] = std::norm(out[k]) / n;
  return power;
}

}  // namespace

Periodogram periodogram(const TimeSeries& series) {
  series.validate(2);
  const int n = series.n();
  const Vec power = dft_power(series.values);
  const int m = n / 2;
  Periodogram p;
  p.n = n;
  p.frequencies = fundamental_frequencies(n);
  p.ordinates = power.segment(1, m);
  return p;
}

Vec periodogram_full_grid(const TimeSeries& series) {
  series.validate(2);
  return dft_power(series.values);
}

TimeSeries standardize(const TimeSeries& series) {
  series.validate(2);
  const double mean = series.values.mean();
  const double var = (series.values.array() - mean).square().mean();
  if (var <= 0.0)
    throw DegenerateInput("standardize: series '" + series.label + "' has zero variance");
  TimeSeries out = series;
  out.values = (series.values.array() - mean) / std::sqrt(var);
  return out;
}

BasisMatrix basis_matrix(const Vec& frequencies, int B) {
  if (B < 1) throw InvalidInput("basis_matrix: B must be >= 1");
  if (!frequencies.allFinite()) throw InvalidInput("basis_matrix: non-finite frequencies");
  const int m = static_cast<int>(frequencies.size());
  BasisMatrix basis;
  basis.B = B;
  basis.frequencies = frequencies;
  basis.rows.resize(m, B + 1);
  basis.rows.col(0).setOnes();
  const double root2 = std::numbers::sqrt2;
  for (int b = 1; b <= B; ++b)
    basis.rows.col(b) = (frequencies.array() * b).cos() * root2;
  return basis;
}

Vec eval_log_spectrum(const SplineVector& coeffs, const Vec& frequencies) {
  if (coeffs.size() < 2) throw InvalidInput("eval_log_spectrum: need intercept plus >= 1 coefficient");
  if (!coeffs.allFinite()) throw InvalidInput("eval_log_spectrum: non-finite coefficients");
  const int B = static_cast<int>(coeffs.size()) - 1;
  return basis_matrix(frequencies, B).rows * coeffs;
}

}  // namespace hbest
