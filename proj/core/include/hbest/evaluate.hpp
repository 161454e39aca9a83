#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hbest/sampler.hpp"
#include "hbest/types.hpp"

namespace hbest {

// Evaluation frequency grid: omega_k = pi * k/(K-1) for k = 0..K-1, with the
// trimmed index set J = { k : trim_lo <= k/(K-1) < trim_hi }.
struct EvalGrid {
  int K = 1000;
  double trim_lo = 0.05;
  double trim_hi = 0.95;

  void validate() const;
  Vec omegas() const;
  std::vector<int> trimmed_indices() const;
};

// Approximate expected posterior loss: the mean over replicates, stored
// iterations, and trimmed grid frequencies of the squared deviation between
// the sampled log-spectrum and the truth. `truths` holds one vector per
// replicate, tabulated on grid.omegas(). Throws InvalidInput on an empty
// chain or shape mismatch.
double aepl(const Chain& chain, const std::vector<Vec>& truths, const EvalGrid& grid);

// Same with J = all grid indices.
double aepl_untrimmed(const Chain& chain, const std::vector<Vec>& truths, const EvalGrid& grid);

struct SeriesSummary {
  Vec mean, lower, upper;  // pointwise mean and 2.5% / 97.5% quantiles
};

// Posterior summaries of log-spectra on the evaluation grid. `global` is
// absent for independent fits; `local` is filled for hierarchical fits only.
struct SpectrumSummary {
  EvalGrid grid;
  std::vector<std::string> labels;
  std::optional<SeriesSummary> global;
  std::vector<SeriesSummary> individual;  // g_l per replicate
  std::vector<SeriesSummary> local;       // g_loc_l per replicate
};

SpectrumSummary posterior_summary(const Chain& chain, const EvalGrid& grid);

// Cross-replicate standard deviation (divisor L-1) of the posterior-mean
// local log-spectra, per grid frequency. Requires a hierarchical chain with
// L >= 2.
Vec local_sd(const Chain& chain, const EvalGrid& grid);

struct EssResult {
  double ess = 0.0;
  bool degenerate = false;  // zero-variance input; ess reported as N
};

// Effective sample size via the initial-positive-sequence estimator:
// N / (1 + 2 sum rho_k), the sum truncated at the first nonpositive pair sum
// rho_{2j-1} + rho_{2j}, clamped to at most N. Requires length >= 10.
EssResult ess(const Vec& samples);

// Type-7 quantile (linear interpolation of order statistics), p in [0,1].
double quantile_type7(std::vector<double> values, double p);

}  // namespace hbest
