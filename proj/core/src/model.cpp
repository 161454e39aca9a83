#include "hbest/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "hbest/errors.hpp"

namespace hbest {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void Hyperparameters::validate() const {
  if (B < 1) throw InvalidInput("hyperparameters: B must be >= 1");
  if (!(nu_tau > 0.0) || !(nu_zeta > 0.0))
    throw InvalidInput("hyperparameters: degrees of freedom must be positive");
  if (!(sigma2_alpha > 0.0) || !(delta2 > 0.0) || !(eta > 0.0))
    throw InvalidInput("hyperparameters: variances and eta must be positive");
  if (!(0.0 < tau_min && tau_min < tau_max))
    throw InvalidInput("hyperparameters: need 0 < tau_min < tau_max");
  if (!(1.0 < zeta_min && zeta_min < zeta_max))
    throw InvalidInput("hyperparameters: need 1 < zeta_min < zeta_max");
  if (K_tau < 2 || K_zeta < 2)
    throw InvalidInput("hyperparameters: grid sizes must be >= 2");
}

Vec d_schedule(int B) {
  if (B < 1) throw InvalidInput("d_schedule: B must be >= 1");
  Vec d(B);
  for (int b = 1; b <= B; ++b)
    d[b - 1] = 1.0 / (4.0 * std::numbers::pi * b * b);
  return d;
}

Dataset make_dataset(const std::vector<TimeSeries>& series, int B) {
  if (series.empty()) throw InvalidInput("make_dataset: need at least one series");
  if (B < 1) throw InvalidInput("make_dataset: B must be >= 1");
  Dataset data;
  data.B = B;
  data.replicates.reserve(series.size());
  for (const auto& s : series) {
    s.validate(8);
    ReplicateData rep;
    rep.label = s.label;
    rep.pgram = periodogram(s);
    rep.psi = basis_matrix(rep.pgram.frequencies, B);
    rep.log_ordinates.resize(rep.pgram.m());
    for (int j = 0; j < rep.pgram.m(); ++j) {
      const double y = rep.pgram.ordinates[j];
      rep.log_ordinates[j] = y > 0.0 ? std::log(y) : kNegInf;
    }
    rep.psi_colsum = rep.psi.rows.colwise().sum();
    data.replicates.push_back(std::move(rep));
  }
  return data;
}

ParameterState ParameterState::zeros(int B, int L_local) {
  ParameterState st;
  st.beta_glob = SplineVector::Zero(B + 1);
  st.beta_loc.assign(L_local, SplineVector::Zero(B + 1));
  st.tau = 1.0;
  st.zeta.assign(L_local, 2.0);
  return st;
}

Vec prior_precision_global(const Hyperparameters& hp, double tau, const Vec& d) {
  Vec prec(d.size() + 1);
  prec[0] = 1.0 / hp.sigma2_alpha;
  const double t2 = tau * tau;
  for (int b = 0; b < d.size(); ++b) prec[b + 1] = 1.0 / (t2 * d[b]);
  return prec;
}

Vec prior_precision_local(const Hyperparameters& hp, double tau, double zeta, const Vec& d) {
  Vec prec(d.size() + 1);
  prec[0] = 1.0 / hp.delta2;
  const double scale = tau * tau * (zeta * zeta - 1.0);
  for (int b = 0; b < d.size(); ++b) prec[b + 1] = 1.0 / (scale * d[b]);
  return prec;
}

namespace {

void check_dims(const ParameterState& state, const Dataset& data) {
  const int p = data.B + 1;
  if (state.beta_glob.size() != p)
    throw InvalidInput("state/data mismatch: beta_glob has " +
                       std::to_string(state.beta_glob.size()) + " entries, expected " +
                       std::to_string(p));
  if (!state.beta_loc.empty()) {
    if (state.L() != data.L())
      throw InvalidInput("state/data mismatch: " + std::to_string(state.L()) +
                         " local vectors for " + std::to_string(data.L()) + " replicates");
    for (const auto& bl : state.beta_loc)
      if (bl.size() != p) throw InvalidInput("state/data mismatch: local vector length");
    if (static_cast<int>(state.zeta.size()) != state.L())
      throw InvalidInput("state/data mismatch: zeta length");
  }
}

// -1'Psi b - sum_j Y_j exp{-psi_j' b} for one replicate with combined
// coefficients b. Y = 0 ordinates contribute nothing to the exp sum.
double whittle_term(const ReplicateData& rep, const SplineVector& combined) {
  const Vec g = rep.psi.rows * combined;
  double acc = -rep.psi_colsum.dot(combined);
  for (int j = 0; j < rep.m(); ++j) {
    const double ly = rep.log_ordinates[j];
    if (ly == kNegInf) continue;
    acc -= std::exp(ly - g[j]);
  }
  return acc;
}

}  // namespace

double whittle_loglik_replicate(const ParameterState& state, const Dataset& data, int ell) {
  check_dims(state, data);
  SplineVector combined = state.beta_glob;
  if (!state.beta_loc.empty()) combined += state.beta_loc[ell];
  return whittle_term(data.replicates[ell], combined);
}

double whittle_loglik(const ParameterState& state, const Dataset& data) {
  check_dims(state, data);
  double acc = 0.0;
  for (int ell = 0; ell < data.L(); ++ell) {
    SplineVector combined = state.beta_glob;
    if (!state.beta_loc.empty()) combined += state.beta_loc[ell];
    acc += whittle_term(data.replicates[ell], combined);
  }
  return acc;
}

double log_prior_half_t(double x, double nu, double lower) {
  if (!(nu > 0.0)) throw InvalidInput("log_prior_half_t: nu must be positive");
  if (x <= lower) return kNegInf;
  return -0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

// Quadratic form beta_{-0}' D^{-1} beta_{-0}, evaluated diagonally.
static double shrink_quadform(const SplineVector& beta, const Vec& d) {
  double q = 0.0;
  for (int b = 0; b < d.size(); ++b) {
    const double v = beta[b + 1];
    q += v * v / d[b];
  }
  return q;
}

double cond_logpost_tau(double tau, const ParameterState& state, const Hyperparameters& hp) {
  if (!(tau > 0.0)) throw InvalidInput("cond_logpost_tau: tau must be positive");
  const Vec d = d_schedule(hp.B);
  const double t2 = tau * tau;
  double quad = shrink_quadform(state.beta_glob, d);
  for (int ell = 0; ell < state.L(); ++ell) {
    const double z = state.zeta[ell];
    quad += shrink_quadform(state.beta_loc[ell], d) / (z * z - 1.0);
  }
  const double n_vectors = 1.0 + state.L();
  return -0.5 * hp.B * n_vectors * std::log(t2) - quad / (2.0 * t2) +
         log_prior_half_t(tau, hp.nu_tau, 0.0);
}

double cond_logpost_zeta(double zeta, int ell, const ParameterState& state,
                         const Hyperparameters& hp) {
  if (!(zeta > 1.0)) throw InvalidInput("cond_logpost_zeta: zeta must exceed 1");
  if (ell < 0 || ell >= state.L()) throw InvalidInput("cond_logpost_zeta: replicate index");
  const Vec d = d_schedule(hp.B);
  const double z2m1 = zeta * zeta - 1.0;
  const double quad = shrink_quadform(state.beta_loc[ell], d);
  return -0.5 * hp.B * std::log(z2m1) - quad / (2.0 * state.tau * state.tau * z2m1) +
         log_prior_half_t(zeta, hp.nu_zeta, 1.0);
}

namespace {

// Shared guts of the local/global conditionals: value, gradient, and Hessian
// of  -1'Psi b_free - sum_j Y_j e^{-psi_j'(b_free + b_fixed)} - 1/2 b_free' P b_free
// accumulated over the given replicates, where P is the diagonal prior
// precision of the free block.
struct ConditionalAccum {
  double value = 0.0;
  Vec grad;
  Mat hess;
};

enum class Want { Value, Grad, Hess };

ConditionalAccum accumulate_conditional(const SplineVector& b_free,
                                        const std::vector<const ReplicateData*>& reps,
                                        const std::vector<SplineVector>& b_fixed,
                                        const Vec& prior_prec, Want want) {
  const int p = static_cast<int>(b_free.size());
  ConditionalAccum acc;
  if (want != Want::Value) acc.grad = Vec::Zero(p);
  if (want == Want::Hess) acc.hess = Mat::Zero(p, p);

  for (std::size_t r = 0; r < reps.size(); ++r) {
    const ReplicateData& rep = *reps[r];
    const Vec g = rep.psi.rows * (b_free + b_fixed[r]);
    double sum_lambda = 0.0;
    Vec lambda;
    if (want != Want::Value) lambda.resize(rep.m());
    for (int j = 0; j < rep.m(); ++j) {
      const double ly = rep.log_ordinates[j];
      const double lam = (ly == kNegInf) ? 0.0 : std::exp(ly - g[j]);
      sum_lambda += lam;
      if (want != Want::Value) lambda[j] = lam;
    }
    acc.value += -rep.psi_colsum.dot(b_free) - sum_lambda;
    if (want != Want::Value) acc.grad += -rep.psi_colsum + rep.psi.rows.transpose() * lambda;
    if (want == Want::Hess)
      acc.hess -= rep.psi.rows.transpose() * lambda.asDiagonal() * rep.psi.rows;
  }

  acc.value -= 0.5 * b_free.dot(prior_prec.asDiagonal() * b_free);
  if (want != Want::Value) acc.grad -= prior_prec.asDiagonal() * b_free;
  if (want == Want::Hess) acc.hess -= Mat(prior_prec.asDiagonal());
  return acc;
}

void check_local_args(const SplineVector& beta_loc, int ell, const ParameterState& state,
                      const Dataset& data) {
  check_dims(state, data);
  if (ell < 0 || ell >= data.L()) throw InvalidInput("local conditional: replicate index");
  if (beta_loc.size() != data.B + 1)
    throw InvalidInput("local conditional: coefficient vector length");
  if (state.zeta.size() <= static_cast<std::size_t>(ell))
    throw InvalidInput("local conditional: no zeta for replicate");
}

ConditionalAccum local_conditional(const SplineVector& beta_loc, int ell,
                                   const ParameterState& state, const Dataset& data,
                                   const Hyperparameters& hp, Want want) {
  check_local_args(beta_loc, ell, state, data);
  const Vec prec = prior_precision_local(hp, state.tau, state.zeta[ell], d_schedule(hp.B));
  return accumulate_conditional(beta_loc, {&data.replicates[ell]}, {state.beta_glob}, prec,
                                want);
}

ConditionalAccum global_conditional(const SplineVector& beta_glob, const ParameterState& state,
                                    const Dataset& data, const Hyperparameters& hp, Want want) {
  check_dims(state, data);
  if (beta_glob.size() != data.B + 1)
    throw InvalidInput("global conditional: coefficient vector length");
  std::vector<const ReplicateData*> reps;
  std::vector<SplineVector> fixed;
  for (int ell = 0; ell < data.L(); ++ell) {
    reps.push_back(&data.replicates[ell]);
    fixed.push_back(state.beta_loc.empty() ? SplineVector::Zero(data.B + 1)
                                           : state.beta_loc[ell]);
  }
  const Vec prec = prior_precision_global(hp, state.tau, d_schedule(hp.B));
  return accumulate_conditional(beta_glob, reps, fixed, prec, want);
}

}  // namespace

double cond_logpost_local(const SplineVector& beta_loc, int ell, const ParameterState& state,
                          const Dataset& data, const Hyperparameters& hp) {
  return local_conditional(beta_loc, ell, state, data, hp, Want::Value).value;
}

Vec grad_local(const SplineVector& beta_loc, int ell, const ParameterState& state,
               const Dataset& data, const Hyperparameters& hp) {
  return local_conditional(beta_loc, ell, state, data, hp, Want::Grad).grad;
}

Mat hess_local(const SplineVector& beta_loc, int ell, const ParameterState& state,
               const Dataset& data, const Hyperparameters& hp) {
  return local_conditional(beta_loc, ell, state, data, hp, Want::Hess).hess;
}

double cond_logpost_global(const SplineVector& beta_glob, const ParameterState& state,
                           const Dataset& data, const Hyperparameters& hp) {
  return global_conditional(beta_glob, state, data, hp, Want::Value).value;
}

Vec grad_global(const SplineVector& beta_glob, const ParameterState& state,
                const Dataset& data, const Hyperparameters& hp) {
  return global_conditional(beta_glob, state, data, hp, Want::Grad).grad;
}

Mat hess_global(const SplineVector& beta_glob, const ParameterState& state,
                const Dataset& data, const Hyperparameters& hp) {
  return global_conditional(beta_glob, state, data, hp, Want::Hess).hess;
}

Mat induced_coefficient_covariance(double tau, const std::vector<double>& zeta, const Vec& d) {
  if (!(tau > 0.0)) throw InvalidInput("induced_coefficient_covariance: tau must be positive");
  const int L = static_cast<int>(zeta.size());
  const int B = static_cast<int>(d.size());
  if (L < 1 || B < 1) throw InvalidInput("induced_coefficient_covariance: empty dimensions");
  const double t2 = tau * tau;
  Mat cov = Mat::Zero(L * B, L * B);
  for (int b = 0; b < B; ++b) {
    for (int l = 0; l < L; ++l) {
      for (int lp = 0; lp < L; ++lp) {
        double v = t2 * d[b];
        if (l == lp) v += t2 * d[b] * (zeta[l] * zeta[l] - 1.0);
        cov(b * L + l, b * L + lp) = v;
      }
    }
  }
  return cov;
}

}  // namespace hbest
