#pragma once

#include <array>
#include <cstdint>
#include <variant>
#include <vector>

#include "hbest/rng.hpp"
#include "hbest/types.hpp"

namespace hbest {

enum class Ma4Variation { None, Moderate, High };

// Conditional MA(4): X_t = e_t + sum_k theta_k e_{t-k}, unit Gaussian noise.
// Under variation, the first coefficient is drawn per replicate from
// N(-0.3, (0.3*alpha)^2) with alpha = 0.15 (moderate) or 0.3 (high).
struct Ma4Setting {
  Ma4Variation variation = Ma4Variation::None;
  int L = 15;
  int n = 1000;
  std::uint64_t seed = 0;
  bool standardize = true;
};

// Sum of two AR(2) processes with peak/bandwidth parameterization
// phi_1 = 2 cos(gamma) e^{-kappa}, phi_2 = -e^{-2 kappa}; gamma_1 ~ U(0.2,0.23),
// kappa_1 ~ U(0.1,0.2), gamma_2 ~ U(pi/5 - 0.1, pi/5 + 0.1), kappa_2 = 0.15.
struct Ar2MixSetting {
  int L = 15;
  int n = 1000;
  std::uint64_t seed = 0;
  bool standardize = true;
};

struct LengthMixEntry {
  int n = 0;
  double proportion = 0.0;
};

// Gaussian series with log-spectra drawn from the model's own prior-style
// hyperdraws and autocovariance gamma(h) = int_0^{2pi} e^{g*(w) + i h w} dw
// (unnormalized; gamma(0) = 2pi for g* = 0).
struct HierSetting {
  double kappa = 0.1;  // 0.1 moderate variation, 1.0 high variation
  std::vector<LengthMixEntry> length_mix{{600, 0.8}, {1200, 0.2}};
  int L = 15;
  int B = 15;
  std::uint64_t seed = 0;
  bool standardize = false;
};

struct Ma4Params {
  std::array<double, 4> theta{};
};
struct Ar2MixParams {
  double gamma1 = 0, kappa1 = 0, gamma2 = 0, kappa2 = 0;
  double phi11 = 0, phi12 = 0, phi21 = 0, phi22 = 0;
};
struct HierParams {
  Vec coeffs;  // alpha* at index 0, beta*_b at 1..B (global + local combined)
  double zeta_star = 0.0;
};
using TruthParams = std::variant<Ma4Params, Ar2MixParams, HierParams>;

// Log of the process's power spectrum under the periodogram convention
// (the function E[Y(w)] tends to), WITHOUT any standardization offset.
// For the hierarchical family this is g*(w) + log(2pi).
Vec true_log_spectrum(const TruthParams& params, const Vec& frequencies);

// Process variance (1/2pi) int_0^{2pi} f(w) dw by quadrature of the spectrum.
double process_variance(const TruthParams& params);

struct SimulatedReplicate {
  TimeSeries series;
  TruthParams truth;
  double process_variance = 0.0;
  double log_offset = 0.0;  // -log(process_variance) when standardized, else 0
};

struct SimulatedDataset {
  std::string family;
  std::vector<SimulatedReplicate> replicates;
  bool standardized = false;
  double hier_tau_star = 0.0;      // hierarchical family only
  SplineVector hier_global;        // alpha*_glob, beta*_glob (hierarchical family)

  int L() const { return static_cast<int>(replicates.size()); }
  std::vector<TimeSeries> series() const;
  // Evaluation-ready truth: true_log_spectrum(truth) + log_offset.
  Vec truth_on_grid(int ell, const Vec& frequencies) const;
};

SimulatedDataset gen_ma4(const Ma4Setting& setting);
SimulatedDataset gen_ar2_mixture(const Ar2MixSetting& setting);
SimulatedDataset gen_hierarchical(const HierSetting& setting);

// Building blocks, exposed for reuse and verification.

// One MA(4) realization; discards `burn_in` pre-samples.
TimeSeries draw_ma4_series(const std::array<double, 4>& theta, int n, RngStream& rng,
                           int burn_in = 1000);
// One AR(2)+AR(2) mixture realization.
TimeSeries draw_ar2_mixture_series(const Ar2MixParams& params, int n, RngStream& rng,
                                   int burn_in = 1000);

// gamma(h) = int_0^{2pi} exp{g*(w)} cos(h w) dw for h = 0..n_lags-1, by
// trapezoidal quadrature on a uniform grid of `grid_size` points (one FFT;
// 2^14 by default, sized so that doubling it moves gamma(0) by < 1e-8
// relative for B <= 15). The imaginary parts vanish by symmetry; their
// maximum magnitude is written to *max_imag when given.
Vec hier_autocovariance(const Vec& coeffs, int n_lags, double* max_imag = nullptr,
                        int grid_size = 1 << 14);

// Dense symmetric factorization of the Toeplitz matrix built from gamma.
// On an indefinite factorization, retries once with jitter 1e-10*gamma(0) on
// the diagonal, then throws SamplerFailure.
class ToeplitzFactor {
 public:
  explicit ToeplitzFactor(const Vec& gamma);
  int n() const { return static_cast<int>(llt_.matrixLLT().rows()); }
  Vec draw(RngStream& rng) const;  // x ~ N(0, Gamma)
  bool jitter_applied() const { return jittered_; }

 private:
  Eigen::LLT<Mat> llt_;
  bool jittered_ = false;
};

}  // namespace hbest
