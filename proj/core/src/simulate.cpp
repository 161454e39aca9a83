#include "hbest/simulate.hpp"

#include <unsupported/Eigen/FFT>

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <complex>
#include <numbers>

#include "hbest/errors.hpp"
#include "hbest/model.hpp"
#include "hbest/spectral.hpp"

namespace hbest {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string replicate_label(int ell, int L) {
  int width = 2;
  for (int v = L; v >= 100; v /= 10) ++width;
  std::string digits = std::to_string(ell + 1);
  return "rep" + std::string(width - digits.size(), '0') + digits;
}

double ma4_spectrum(const std::array<double, 4>& theta, double w) {
  double re = 1.0, im = 0.0;
  for (int k = 1; k <= 4; ++k) {
    re += theta[k - 1] * std::cos(k * w);
    im -= theta[k - 1] * std::sin(k * w);
  }
  return re * re + im * im;
}

double ar2_component_spectrum(double phi1, double phi2, double w) {
  const double re = 1.0 - phi1 * std::cos(w) - phi2 * std::cos(2.0 * w);
  const double im = phi1 * std::sin(w) + phi2 * std::sin(2.0 * w);
  return 1.0 / (re * re + im * im);
}

double spectrum_value(const TruthParams& params, double w) {
  if (const auto* ma = std::get_if<Ma4Params>(&params))
    return ma4_spectrum(ma->theta, w);
  if (const auto* ar = std::get_if<Ar2MixParams>(&params))
    return ar2_component_spectrum(ar->phi11, ar->phi12, w) +
           ar2_component_spectrum(ar->phi21, ar->phi22, w);
  const auto& hier = std::get<HierParams>(params);
  Vec one(1);
  one[0] = w;
  return kTwoPi * std::exp(eval_log_spectrum(hier.coeffs, one)[0]);
}

}  // namespace

Vec true_log_spectrum(const TruthParams& params, const Vec& frequencies) {
  if (const auto* hier = std::get_if<HierParams>(&params)) {
    Vec g = eval_log_spectrum(hier->coeffs, frequencies);
    return g.array() + std::log(kTwoPi);
  }
  Vec out(frequencies.size());
  for (int i = 0; i < frequencies.size(); ++i)
    out[i] = std::log(spectrum_value(params, frequencies[i]));
  return out;
}

double process_variance(const TruthParams& params) {
  // Mean of the spectrum over one period equals (1/2pi) int f dw.
  constexpr int M = 1 << 14;
  double acc = 0.0;
  for (int m = 0; m < M; ++m) acc += spectrum_value(params, kTwoPi * m / M);
  return acc / M;
}

std::vector<TimeSeries> SimulatedDataset::series() const {
  std::vector<TimeSeries> out;
  out.reserve(replicates.size());
  for (const auto& rep : replicates) out.push_back(rep.series);
  return out;
}

Vec SimulatedDataset::truth_on_grid(int ell, const Vec& frequencies) const {
  const auto& rep = replicates.at(ell);
  return true_log_spectrum(rep.truth, frequencies).array() + rep.log_offset;
}

TimeSeries draw_ma4_series(const std::array<double, 4>& theta, int n, RngStream& rng,
                           int burn_in) {
  if (n < 1) throw InvalidInput("draw_ma4_series: n must be >= 1");
  const int total = n + burn_in;
  const Vec eps = rng.normal_vec(total + 4);
  TimeSeries ts;
  ts.values.resize(n);
  for (int t = 0; t < n; ++t) {
    const int i = burn_in + t + 4;
    double x = eps[i];
    for (int k = 1; k <= 4; ++k) x += theta[k - 1] * eps[i - k];
    ts.values[t] = x;
  }
  return ts;
}

TimeSeries draw_ar2_mixture_series(const Ar2MixParams& p, int n, RngStream& rng,
                                   int burn_in) {
  if (n < 1) throw InvalidInput("draw_ar2_mixture_series: n must be >= 1");
  // Stationarity holds for any kappa > 0: |phi_2| = e^{-2 kappa} < 1.
  if (!(std::abs(p.phi12) < 1.0) || !(std::abs(p.phi22) < 1.0))
    throw SamplerFailure("draw_ar2_mixture_series: unstable AR coefficients");
  const int total = n + burn_in;
  TimeSeries ts;
  ts.values.resize(n);
  std::array<std::pair<double, double>, 2> phis{{{p.phi11, p.phi12}, {p.phi21, p.phi22}}};
  Vec sum = Vec::Zero(n);
  for (const auto& [phi1, phi2] : phis) {
    double z1 = 0.0, z2 = 0.0;  // z_{t-1}, z_{t-2}
    for (int t = 0; t < total; ++t) {
      const double z = phi1 * z1 + phi2 * z2 + rng.normal();
      z2 = z1;
      z1 = z;
      if (t >= burn_in) sum[t - burn_in] += z;
    }
  }
  ts.values = sum;
  return ts;
}

namespace {

void apply_standardization(SimulatedReplicate& rep, bool standardize) {
  if (!standardize) return;
  rep.series = hbest::standardize(rep.series);
  rep.log_offset = -std::log(rep.process_variance);
}

}  // namespace

SimulatedDataset gen_ma4(const Ma4Setting& setting) {
  if (setting.L < 1) throw InvalidInput("gen_ma4: L must be >= 1");
  const std::array<double, 4> base{-0.3, -0.6, -0.3, 0.6};
  const double alpha = setting.variation == Ma4Variation::None ? 0.0
                       : setting.variation == Ma4Variation::Moderate ? 0.15
                                                                     : 0.3;
  SimulatedDataset data;
  data.family = "ma4";
  data.standardized = setting.standardize;
  for (int ell = 0; ell < setting.L; ++ell) {
    RngStream rng(derive_seed(setting.seed, 0, StreamStep::SimulateReplicate, ell));
    Ma4Params params{base};
    if (alpha > 0.0) params.theta[0] = rng.normal(-0.3, 0.3 * alpha);
    SimulatedReplicate rep;
    rep.series = draw_ma4_series(params.theta, setting.n, rng);
    rep.series.label = replicate_label(ell, setting.L);
    rep.truth = params;
    rep.process_variance = process_variance(rep.truth);
    apply_standardization(rep, setting.standardize);
    data.replicates.push_back(std::move(rep));
  }
  return data;
}

SimulatedDataset gen_ar2_mixture(const Ar2MixSetting& setting) {
  if (setting.L < 1) throw InvalidInput("gen_ar2_mixture: L must be >= 1");
  SimulatedDataset data;
  data.family = "ar2_mixture";
  data.standardized = setting.standardize;
  for (int ell = 0; ell < setting.L; ++ell) {
    RngStream rng(derive_seed(setting.seed, 0, StreamStep::SimulateReplicate, ell));
    Ar2MixParams p;
    // Draw order is part of the reproducibility contract:
    // gamma1, kappa1, gamma2 (kappa2 fixed), then the two innovation streams.
    p.gamma1 = 0.2 + 0.03 * rng.uniform();
    p.kappa1 = 0.1 + 0.1 * rng.uniform();
    p.gamma2 = (std::numbers::pi / 5.0 - 0.1) + 0.2 * rng.uniform();
    p.kappa2 = 0.15;
    p.phi11 = 2.0 * std::cos(p.gamma1) * std::exp(-p.kappa1);
    p.phi12 = -std::exp(-2.0 * p.kappa1);
    p.phi21 = 2.0 * std::cos(p.gamma2) * std::exp(-p.kappa2);
    p.phi22 = -std::exp(-2.0 * p.kappa2);
    SimulatedReplicate rep;
    rep.series = draw_ar2_mixture_series(p, setting.n, rng);
    rep.series.label = replicate_label(ell, setting.L);
    rep.truth = p;
    rep.process_variance = process_variance(rep.truth);
    apply_standardization(rep, setting.standardize);
    data.replicates.push_back(std::move(rep));
  }
  return data;
}

Vec hier_autocovariance(const Vec& coeffs, int n_lags, double* max_imag, int grid_size) {
  const int M = grid_size;
  if (M < 16 || (M & (M - 1)) != 0)
    throw InvalidInput("hier_autocovariance: grid_size must be a power of two >= 16");
  if (n_lags < 1 || n_lags > M / 4)
    throw InvalidInput("hier_autocovariance: n_lags out of range");
  Vec omegas(M);
  for (int m = 0; m < M; ++m) omegas[m] = kTwoPi * m / M;
  const Vec g = eval_log_spectrum(coeffs, omegas);
  std::vector<double> values(M);
  for (int m = 0; m < M; ++m) values[m] = std::exp(g[m]);

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, values);

  Vec gamma(n_lags);
  double worst_imag = 0.0;
  for (int h = 0; h < n_lags; ++h) {
    gamma[h] = (kTwoPi / M) * spec[h].real();
    worst_imag = std::max(worst_imag, std::abs((kTwoPi / M) * spec[h].imag()));
  }
  if (max_imag) *max_imag = worst_imag;
  return gamma;
}

ToeplitzFactor::ToeplitzFactor(const Vec& gamma) {
  const int n = static_cast<int>(gamma.size());
  if (n < 1) throw InvalidInput("ToeplitzFactor: empty autocovariance");
  Mat G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) G(i, j) = gamma[std::abs(i - j)];
  llt_.compute(G);
  if (llt_.info() != Eigen::Success) {
    // Quadrature roundoff can push tiny eigenvalues negative; repair once.
    G.diagonal().array() += 1e-10 * gamma[0];
    llt_.compute(G);
    jittered_ = true;
    if (llt_.info() != Eigen::Success)
      throw SamplerFailure("ToeplitzFactor: covariance not positive definite after jitter");
  }
}

Vec ToeplitzFactor::draw(RngStream& rng) const {
  const Vec z = rng.normal_vec(n());
  return llt_.matrixL() * z;
}

SimulatedDataset gen_hierarchical(const HierSetting& setting) {
  if (setting.L < 1) throw InvalidInput("gen_hierarchical: L must be >= 1");
  if (setting.B < 1) throw InvalidInput("gen_hierarchical: B must be >= 1");
  if (!(setting.kappa > 0.0)) throw InvalidInput("gen_hierarchical: kappa must be positive");
  if (setting.length_mix.empty())
    throw InvalidInput("gen_hierarchical: empty length mix");
  double prop_sum = 0.0;
  for (const auto& e : setting.length_mix) {
    if (e.n < 8) throw InvalidInput("gen_hierarchical: series length must be >= 8");
    prop_sum += e.proportion;
  }
  if (std::abs(prop_sum - 1.0) > 1e-9)
    throw InvalidInput("gen_hierarchical: length proportions must sum to 1");

  // Replicate lengths: rounded proportions, last entry absorbs the remainder.
  std::vector<int> lengths;
  {
    int assigned = 0;
    for (std::size_t i = 0; i + 1 < setting.length_mix.size(); ++i) {
      int c = static_cast<int>(std::lround(setting.length_mix[i].proportion * setting.L));
      c = std::min(c, setting.L - assigned);
      assigned += c;
      lengths.insert(lengths.end(), c, setting.length_mix[i].n);
    }
    lengths.insert(lengths.end(), setting.L - assigned, setting.length_mix.back().n);
  }

  const Vec d = d_schedule(setting.B);
  boost::math::normal_distribution<double> stdnorm;
  const double u_lo = boost::math::cdf(stdnorm, 1.0);
  const double u_hi = boost::math::cdf(stdnorm, 1.1);

  SimulatedDataset data;
  data.family = "hierarchical";
  data.standardized = setting.standardize;

  // Dataset-level hyperdraws: tau*, alpha*_glob, beta*_glob.
  RngStream ds_rng(derive_seed(setting.seed, 0, StreamStep::SimulateDataset, 0));
  const double tau_star = 3.0 + 5.0 * ds_rng.uniform();
  data.hier_tau_star = tau_star;
  SplineVector glob(setting.B + 1);
  glob[0] = ds_rng.normal(0.0, std::sqrt(50.0 / 3.0));
  for (int b = 1; b <= setting.B; ++b)
    glob[b] = ds_rng.normal(0.0, tau_star * std::sqrt(d[b - 1]));
  data.hier_global = glob;

  for (int ell = 0; ell < setting.L; ++ell) {
    RngStream rng(derive_seed(setting.seed, 0, StreamStep::SimulateReplicate, ell));
    // zeta*_l: standard normal truncated to [1, 1.1] by inverse CDF.
    const double zeta_star =
        boost::math::quantile(stdnorm, u_lo + (u_hi - u_lo) * rng.uniform());
    HierParams params;
    params.zeta_star = zeta_star;
    params.coeffs = glob;
    params.coeffs[0] += rng.normal(0.0, std::sqrt(setting.kappa * 0.005));
    const double loc_scale = setting.kappa * tau_star * tau_star * (zeta_star * zeta_star - 1.0);
    for (int b = 1; b <= setting.B; ++b)
      params.coeffs[b] += rng.normal(0.0, std::sqrt(loc_scale * d[b - 1]));

    const Vec gamma = hier_autocovariance(params.coeffs, lengths[ell]);
    const ToeplitzFactor factor(gamma);

    SimulatedReplicate rep;
    rep.series.values = factor.draw(rng);
    rep.series.label = replicate_label(ell, setting.L);
    rep.truth = std::move(params);
    rep.process_variance = gamma[0];
    apply_standardization(rep, setting.standardize);
    data.replicates.push_back(std::move(rep));
  }
  return data;
}

}  // namespace hbest
