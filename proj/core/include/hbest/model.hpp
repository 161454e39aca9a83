#pragma once

#include <string>
#include <vector>

#include "hbest/spectral.hpp"
#include "hbest/types.hpp"

namespace hbest {

// Model hyperparameters. Defaults follow the reference configuration used
// throughout the simulation studies.
struct Hyperparameters {
  int B = 15;                   // number of cosine basis functions
  double nu_tau = 2.0;          // Half-t df for the global scale tau
  double nu_zeta = 5.0;         // Half-t df for the local scales zeta_l
  double sigma2_alpha = 100.0;  // prior variance of the global intercept
  double delta2 = 0.1;          // prior variance of the local intercepts
  double tau_min = 0.001, tau_max = 100.0;
  double zeta_min = 1.001, zeta_max = 15.0;
  int K_tau = 500, K_zeta = 500;  // Griddy Gibbs grid sizes
  double eta = 1.0;               // proposal covariance scale

  void validate() const;
};

// Shrinkage schedule d_b = (4 pi b^2)^{-1}, b = 1..B. Strictly decreasing,
// all positive; stronger shrinkage for higher-frequency basis functions.
Vec d_schedule(int B);

// One replicate prepared for fitting: its periodogram, the basis evaluated at
// its own fundamental frequencies, and log-ordinates cached for the
// exp-in-log-space likelihood terms (log Y, with -inf marking Y == 0).
struct ReplicateData {
  std::string label;
  Periodogram pgram;
  BasisMatrix psi;
  Vec log_ordinates;
  Vec psi_colsum;  // Psi^T 1

  int m() const { return pgram.m(); }
};

struct Dataset {
  std::vector<ReplicateData> replicates;
  int B = 0;

  int L() const { return static_cast<int>(replicates.size()); }
};

// Builds periodograms and basis matrices for a collection of series.
// Enforces the fitting-entry floor n >= 8 on every series.
Dataset make_dataset(const std::vector<TimeSeries>& series, int B);

// Full sampler state. beta_loc/zeta have one entry per replicate in the
// hierarchical model and are empty when the model has no local component
// (common fits and per-series independent fits).
struct ParameterState {
  SplineVector beta_glob;
  std::vector<SplineVector> beta_loc;
  double tau = 1.0;
  std::vector<double> zeta;

  int L() const { return static_cast<int>(beta_loc.size()); }
  static ParameterState zeros(int B, int L_local);
};

// Inverse prior variances (diagonal). Global: (sigma2_alpha, tau^2 d_1, ...,
// tau^2 d_B); local: (delta2, tau^2 (zeta^2-1) d_1, ...).
Vec prior_precision_global(const Hyperparameters& hp, double tau, const Vec& d);
Vec prior_precision_local(const Hyperparameters& hp, double tau, double zeta, const Vec& d);

// Log of the product Whittle likelihood, up to an additive constant fixed
// at 0:  -sum_l 1'Psi_l(bg + bl_l) - sum_l sum_j Y_jl exp{-psi_jl'(bg + bl_l)}.
// Missing local vectors are treated as zero. Throws InvalidInput on
// dimension mismatch.
double whittle_loglik(const ParameterState& state, const Dataset& data);

// Per-replicate contribution to whittle_loglik (same formula, one l).
double whittle_loglik_replicate(const ParameterState& state, const Dataset& data, int ell);

// Unnormalized log density of a Student-t(nu) truncated to (lower, inf):
// -((nu+1)/2) log(1 + x^2/nu) on the support, -inf below it. The additive
// constant is consistent across calls with the same (nu, lower) and fixed
// at 0; normalizing constants are never needed by the sampler.
double log_prior_half_t(double x, double nu, double lower);

// Conditional log-posteriors, gradients, and Hessians. All values are up to
// additive constants fixed at 0; only differences are ever used.

// tau | rest: depends on the state only through the non-intercept quadratic
// forms; the leading exponent counts the spline vectors governed by tau
// (1 global + one per local vector present).
double cond_logpost_tau(double tau, const ParameterState& state, const Hyperparameters& hp);

// zeta_l | rest.
double cond_logpost_zeta(double zeta, int ell, const ParameterState& state,
                         const Hyperparameters& hp);

// beta_loc_l | rest, evaluated at `beta_loc` (the state's own local vector for
// replicate ell is ignored).
double cond_logpost_local(const SplineVector& beta_loc, int ell, const ParameterState& state,
                          const Dataset& data, const Hyperparameters& hp);
Vec grad_local(const SplineVector& beta_loc, int ell, const ParameterState& state,
               const Dataset& data, const Hyperparameters& hp);
Mat hess_local(const SplineVector& beta_loc, int ell, const ParameterState& state,
               const Dataset& data, const Hyperparameters& hp);

// beta_glob | rest, summed over all replicates. Includes the prior quadratic
// term -1/2 bg' (Sigma_glob)^{-1} bg, consistent with its gradient/Hessian.
double cond_logpost_global(const SplineVector& beta_glob, const ParameterState& state,
                           const Dataset& data, const Hyperparameters& hp);
Vec grad_global(const SplineVector& beta_glob, const ParameterState& state,
                const Dataset& data, const Hyperparameters& hp);
Mat hess_global(const SplineVector& beta_glob, const ParameterState& state,
                const Dataset& data, const Hyperparameters& hp);

// Joint prior covariance of the combined coefficients beta_{l,b} =
// beta_glob_b + beta_loc_{l,b} (intercepts excluded), an LB x LB matrix in
// b-major layout (index = (b-1)L + l-1):
//   Cov(beta_{lb}, beta_{l'b'}) = tau^2 d_b [ 1{b=b'} + (zeta_l^2-1) 1{b=b', l=l'} ].
Mat induced_coefficient_covariance(double tau, const std::vector<double>& zeta, const Vec& d);

}  // namespace hbest
