#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hbest/model.hpp"
#include "hbest/rng.hpp"
#include "hbest/types.hpp"

namespace hbest {

enum class ModelMode { Hierarchical, Common, Independent };

std::string to_string(ModelMode mode);
ModelMode model_mode_from_string(const std::string& s);

struct SamplerConfig {
  long iterations = 5000;  // total, counting the initial state as iteration 1
  long burn_in = 500;      // iterations discarded before storage begins
  std::uint64_t seed = 0;
  Hyperparameters hp;
  ModelMode mode = ModelMode::Hierarchical;
  int threads = 1;  // local-spline updates run in parallel across replicates
  // When set, Metropolis steps use the bare conditional-posterior ratio
  // instead of the full independence-proposal ratio.
  bool paper_literal_ratio = false;
  double init_tau = 1.0;
  std::optional<double> init_zeta;  // default: middle grid point
  // Initialize the spline vectors at their conditional MAP given
  // (init_tau, init_zeta) instead of zero. Starting from zero, the first tau
  // update sees a zero quadratic form and collapses tau onto the bottom grid
  // point, pinning the coefficients there for thousands of sweeps.
  bool init_map = true;
  // Debug: recompute the tracked log-likelihood from scratch every iteration
  // and fail loudly on drift.
  bool check_consistency = false;

  void validate() const;
};

struct AcceptCounts {
  long global_accept = 0, global_total = 0;
  std::vector<long> local_accept, local_total;

  double global_rate() const { return global_total ? double(global_accept) / global_total : 0.0; }
  double local_rate(int ell) const {
    return local_total[ell] ? double(local_accept[ell]) / local_total[ell] : 0.0;
  }
};

// Stored post-burn-in samples plus diagnostics. Hierarchical and common fits
// fill `samples`; independent fits hold one single-spline chain per replicate
// in `replicate_samples` (per-replicate tau lives in each sub-state).
struct Chain {
  SamplerConfig config;
  std::vector<std::string> labels;
  std::vector<ParameterState> samples;
  std::vector<double> loglik;  // tracked Whittle log-likelihood per stored sample
  std::vector<std::vector<ParameterState>> replicate_samples;
  std::vector<std::vector<double>> replicate_loglik;
  AcceptCounts accept;
  double seconds_total = 0.0;
  double seconds_post_burnin = 0.0;

  long stored() const {
    return samples.empty()
               ? (replicate_samples.empty() ? 0 : long(replicate_samples.front().size()))
               : long(samples.size());
  }
};

// Discretization of a Student-t prior's support between two bounds: a uniform
// grid in CDF space mapped back through the quantile function.
struct Grid {
  Vec points;
  double nu = 1.0, lower = 0.0, upper = 1.0;

  static Grid student_t(double nu, double lower, double upper, int K);
};

// Student-t CDF / quantile used for grid construction.
double student_t_cdf(double nu, double x);
double student_t_quantile(double nu, double p);

// Normalized selection probabilities exp(logw - max) / sum; invariant to a
// uniform shift of logw. Throws SamplerFailure if no entry is finite.
Vec softmax_probs(const Vec& log_weights);

// Index of the category containing u in the cumulative distribution.
int sample_discrete(const Vec& probs, double u);

// One Griddy Gibbs draw: evaluates log_post on every grid point and samples
// proportionally. `probs_out`, when given, receives the selection
// probabilities (for diagnostics/tests).
double griddy_sample(const Grid& grid, const std::function<double(double)>& log_post,
                     RngStream& rng, Vec* probs_out = nullptr);

double griddy_gibbs_tau(const ParameterState& state, const Hyperparameters& hp,
                        const Grid& grid, RngStream& rng);
double griddy_gibbs_zeta(const ParameterState& state, const Hyperparameters& hp, int ell,
                         const Grid& grid, RngStream& rng);

struct MapOptions {
  double grad_tol = 1e-8;  // sup-norm of the gradient at the returned point
  int max_iterations = 100;
};

struct MapResult {
  Vec point;
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

using Objective = std::function<double(const Vec&)>;
using Gradient = std::function<Vec(const Vec&)>;
using Hessian = std::function<Mat(const Vec&)>;

// Maximizes a strictly concave objective by Newton steps with step halving.
// Returns the best iterate with converged=false if the tolerance is not met
// within max_iterations. Throws InvalidInput if the objective is non-finite
// at init.
MapResult map_optimize(const Objective& f, const Gradient& grad, const Hessian& hess,
                       Vec init, const MapOptions& opts = {});

// Draw from N(mode, -eta H^{-1}) given H = hess(mode) (negative definite).
// Throws SamplerFailure if -H has no Cholesky factorization.
Vec draw_laplace_proposal(const Vec& mode, const Mat& hess_at_mode, double eta, RngStream& rng);

struct MhResult {
  Vec value;
  bool accepted = false;
  double log_ratio = 0.0;  // log acceptance ratio before min{0, .}
};

// Independence Metropolis-Hastings step with a Laplace proposal: optimize to
// the conditional mode, propose from the Gaussian approximation, and accept
// with the full proposal-corrected ratio (or the bare posterior ratio when
// literal_ratio is set).
MhResult laplace_mh(const Objective& f, const Gradient& grad, const Hessian& hess,
                    const Vec& current, double eta, bool literal_ratio, RngStream& rng);

MhResult laplace_mh_local(const ParameterState& state, const Dataset& data,
                          const Hyperparameters& hp, int ell, double eta, bool literal_ratio,
                          RngStream& rng);
MhResult laplace_mh_global(const ParameterState& state, const Dataset& data,
                           const Hyperparameters& hp, double eta, bool literal_ratio,
                           RngStream& rng);

// Runs the full Metropolis-within-Gibbs chain. Per sweep: tau (Griddy Gibbs),
// each zeta_l (Griddy Gibbs), each beta_loc_l (Laplace MH, parallelizable
// across replicates), then beta_glob (Laplace MH); the state is stored once
// the iteration index exceeds burn_in. Common mode drops the local component;
// independent mode fits each replicate as its own single-spline chain with a
// derived seed. Deterministic given (config, data) regardless of `threads`.
Chain run_chain(const Dataset& data, const SamplerConfig& config);

}  // namespace hbest
