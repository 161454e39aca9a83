#pragma once

#include "hbest/types.hpp"

namespace hbest {

// Fundamental frequencies 2*pi*j/n for j = 1..floor(n/2).
// Throws InvalidInput for n < 2.
Vec fundamental_frequencies(int n);

// Raw periodogram Y(w) = |sum_{t=1..n} x_t e^{-iwt}|^2 / n at the fundamental
// frequencies. The series mean is NOT subtracted here; use standardize() first
// if zero mean / unit variance is wanted. Time is indexed t = 1..n; the phase
// convention is irrelevant to |.|^2.
Periodogram periodogram(const TimeSeries& series);

// Ordinates on the full n-point Fourier grid 2*pi*k/n, k = 0..n-1.
// Satisfies Parseval: sum_k Y_k == sum_t x_t^2.
Vec periodogram_full_grid(const TimeSeries& series);

// Rescale to sample mean 0 and sample variance 1 (divisor n).
// Throws DegenerateInput for a constant series.
TimeSeries standardize(const TimeSeries& series);

// Design matrix with rows (1, sqrt(2)cos(w), ..., sqrt(2)cos(Bw)).
BasisMatrix basis_matrix(const Vec& frequencies, int B);

// g(w) = coeffs[0] + sum_b coeffs[b] * sqrt(2) cos(b w).
Vec eval_log_spectrum(const SplineVector& coeffs, const Vec& frequencies);

}  // namespace hbest
