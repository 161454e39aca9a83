#include "hbest/simulate.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hbest/errors.hpp"
#include "hbest/spectral.hpp"
#include "oracles.hpp"

using namespace hbest;
constexpr double kPi = std::numbers::pi;

namespace {

Vec mean_periodogram(const std::function<TimeSeries(RngStream&)>& draw, int n, int R,
                     unsigned seed) {
  Vec mean = Vec::Zero(n / 2);
  for (int r = 0; r < R; ++r) {
    RngStream rng(derive_seed(seed, 0, StreamStep::SimulateReplicate, r));
    TimeSeries ts = draw(rng);
    mean += periodogram(ts).ordinates;
  }
  return mean / R;
}

// Exact finite-n periodogram expectation from the autocovariance:
// E[Y(w_j)] = gamma(0) + 2 sum_{h<n} (1 - h/n) gamma(h) cos(h w_j).
// Sharper than the spectral density itself, which carries leakage bias for
// peaked spectra at finite n.
Vec expected_periodogram(const Vec& acv, int n) {
  const Vec freqs = fundamental_frequencies(n);
  Vec out(freqs.size());
  for (int j = 0; j < freqs.size(); ++j) {
    double acc = acv[0];
    for (int h = 1; h < n; ++h)
      acc += 2.0 * (1.0 - double(h) / n) * acv[h] * std::cos(h * freqs[j]);
    out[j] = acc;
  }
  return out;
}

Vec ar2_autocovariance(double phi1, double phi2, int nmax) {
  Vec g(nmax);
  g[0] = (1 - phi2) / ((1 + phi2) * ((1 - phi2) * (1 - phi2) - phi1 * phi1));
  g[1] = phi1 * g[0] / (1 - phi2);
  for (int k = 2; k < nmax; ++k) g[k] = phi1 * g[k - 1] + phi2 * g[k - 2];
  return g;
}

// Ratios of the averaged periodogram to a reference, restricted to the
// trimmed band.
Vec band_ratio(const Vec& mean_pg, const Vec& reference, int n) {
  const Vec freqs = fundamental_frequencies(n);
  std::vector<double> ratios;
  for (int j = 0; j < n / 2; ++j)
    if (freqs[j] >= 0.05 * kPi && freqs[j] < 0.95 * kPi)
      ratios.push_back(mean_pg[j] / reference[j]);
  return Eigen::Map<const Vec>(ratios.data(), ratios.size());
}

}  // namespace

TEST_CASE("MA(4) generator") {
  SUBCASE("no variation: all replicates share one true spectrum") {
    Ma4Setting setting;
    setting.L = 4;
    setting.n = 64;
    setting.seed = 11;
    const SimulatedDataset data = gen_ma4(setting);
    const Vec w = fundamental_frequencies(128);
    const Vec g0 = data.truth_on_grid(0, w);
    for (int ell = 1; ell < 4; ++ell)
      CHECK((data.truth_on_grid(ell, w) - g0).lpNorm<Eigen::Infinity>() < 1e-14);
  }
  SUBCASE("transfer-function truth at omega=0 for the base coefficients") {
    // (1 - 0.3 - 0.6 - 0.3 + 0.6)^2 = 0.4^2
    Ma4Params params{{-0.3, -0.6, -0.3, 0.6}};
    Vec zero(1);
    zero << 0.0;
    CHECK(true_log_spectrum(params, zero)[0] ==
          doctest::Approx(std::log(0.16)).epsilon(1e-12));
  }
  SUBCASE("averaged periodograms track the truth (no systematic bias)") {
    const Ma4Params truth{{-0.3, -0.6, -0.3, 0.6}};
    const int n = 512;
    const Vec mean = mean_periodogram(
        [&](RngStream& rng) { return draw_ma4_series(truth.theta, n, rng); }, n, 150, 5);
    const Vec f_true = true_log_spectrum(truth, fundamental_frequencies(n)).array().exp();
    const Vec ratio = band_ratio(mean, f_true, n);
    CHECK(std::abs(ratio.mean() - 1.0) < 0.05);
    CHECK((ratio.array() - 1.0).abs().maxCoeff() < 0.5);
  }
  SUBCASE("sample autocovariance cuts off beyond lag 4") {
    RngStream rng(3);
    const TimeSeries ts = draw_ma4_series({-0.3, -0.6, -0.3, 0.6}, 20000, rng);
    const Vec x = ts.values.array() - ts.values.mean();
    const double c0 = x.squaredNorm() / ts.n();
    for (int lag : {5, 6, 8}) {
      double c = 0.0;
      for (int t = 0; t + lag < ts.n(); ++t) c += x[t] * x[t + lag];
      c /= ts.n();
      CHECK(std::abs(c / c0) < 4.0 / std::sqrt(double(ts.n())));
    }
  }
  SUBCASE("standardization is applied and recorded") {
    Ma4Setting setting;
    setting.L = 2;
    setting.n = 256;
    setting.seed = 4;
    const SimulatedDataset data = gen_ma4(setting);
    CHECK(data.standardized);
    for (const auto& rep : data.replicates) {
      CHECK(std::abs(rep.series.values.mean()) < 1e-12);
      const double var = rep.series.values.squaredNorm() / rep.series.n() -
                         rep.series.values.mean() * rep.series.values.mean();
      CHECK(var == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(rep.log_offset == doctest::Approx(-std::log(rep.process_variance)).epsilon(1e-14));
      // Base MA(4) process variance is 1 + sum theta^2 = 1.9.
      if (setting.variation == Ma4Variation::None)
        CHECK(rep.process_variance == doctest::Approx(1.9).epsilon(1e-6));
    }
  }
  SUBCASE("moderate variation draws theta_1 per replicate") {
    Ma4Setting setting;
    setting.variation = Ma4Variation::Moderate;
    setting.L = 3;
    setting.n = 64;
    setting.seed = 12;
    const SimulatedDataset data = gen_ma4(setting);
    const auto t0 = std::get<Ma4Params>(data.replicates[0].truth).theta;
    const auto t1 = std::get<Ma4Params>(data.replicates[1].truth).theta;
    CHECK(t0[0] != t1[0]);
    CHECK(t0[1] == t1[1]);
  }
  SUBCASE("bit-reproducible from the setting") {
    Ma4Setting setting;
    setting.L = 2;
    setting.n = 128;
    setting.seed = 77;
    const SimulatedDataset a = gen_ma4(setting);
    const SimulatedDataset b = gen_ma4(setting);
    for (int ell = 0; ell < 2; ++ell)
      CHECK((a.replicates[ell].series.values - b.replicates[ell].series.values)
                .lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("AR(2) mixture generator") {
  Ar2MixSetting setting;
  setting.L = 5;
  setting.n = 128;
  setting.seed = 21;
  const SimulatedDataset data = gen_ar2_mixture(setting);

  SUBCASE("parameterization is stationary and within the sampled ranges") {
    for (const auto& rep : data.replicates) {
      const auto& p = std::get<Ar2MixParams>(rep.truth);
      CHECK(std::abs(p.phi12) < 1.0);
      CHECK(std::abs(p.phi22) < 1.0);
      CHECK(p.gamma1 >= 0.2);
      CHECK(p.gamma1 <= 0.23);
      CHECK(p.kappa1 >= 0.1);
      CHECK(p.kappa1 <= 0.2);
      CHECK(p.gamma2 >= kPi / 5 - 0.1);
      CHECK(p.gamma2 <= kPi / 5 + 0.1);
      CHECK(p.kappa2 == 0.15);
      CHECK(p.phi11 == doctest::Approx(2 * std::cos(p.gamma1) * std::exp(-p.kappa1)));
      CHECK(p.phi12 == doctest::Approx(-std::exp(-2 * p.kappa1)));
    }
  }
  SUBCASE("true spectrum is the sum of the component spectra") {
    const auto& p = std::get<Ar2MixParams>(data.replicates[0].truth);
    const auto component = [](double phi1, double phi2, double w) {
      const std::complex<double> z =
          1.0 - phi1 * std::exp(std::complex<double>(0, -w)) -
          phi2 * std::exp(std::complex<double>(0, -2 * w));
      return 1.0 / std::norm(z);
    };
    for (double w : {0.1, 0.21, 0.5, 1.5, 3.0}) {
      Vec freq(1);
      freq << w;
      const double expected =
          component(p.phi11, p.phi12, w) + component(p.phi21, p.phi22, w);
      CHECK(true_log_spectrum(data.replicates[0].truth, freq)[0] ==
            doctest::Approx(std::log(expected)).epsilon(1e-12));
    }
  }
  SUBCASE("component peaks match the analytic argmax; second component near gamma_2") {
    // The AR(2) spectrum peaks where cos(w) = cos(gamma)(1+rho^2)/(2 rho),
    // rho = e^{-kappa}: the peak is pulled below gamma, noticeably so for
    // gamma near 0 with kappa near 0.2.
    for (const auto& rep : data.replicates) {
      const auto& p = std::get<Ar2MixParams>(rep.truth);
      const auto peak_of = [](double phi1, double phi2) {
        double best_w = 0.0, best = -1.0;
        for (int i = 0; i <= 40000; ++i) {
          const double w = kPi * i / 40000.0;
          const std::complex<double> z =
              1.0 - phi1 * std::exp(std::complex<double>(0, -w)) -
              phi2 * std::exp(std::complex<double>(0, -2 * w));
          const double f = 1.0 / std::norm(z);
          if (f > best) {
            best = f;
            best_w = w;
          }
        }
        return best_w;
      };
      const auto analytic_peak = [](double gamma, double kappa) {
        const double rho = std::exp(-kappa);
        const double c = std::cos(gamma) * (1 + rho * rho) / (2 * rho);
        return c >= 1.0 ? 0.0 : std::acos(c);
      };
      CHECK(std::abs(peak_of(p.phi11, p.phi12) - analytic_peak(p.gamma1, p.kappa1)) < 1e-3);
      CHECK(std::abs(peak_of(p.phi21, p.phi22) - analytic_peak(p.gamma2, p.kappa2)) < 1e-3);
      CHECK(std::abs(peak_of(p.phi21, p.phi22) - p.gamma2) < 0.05);
    }
  }
  SUBCASE("averaged periodograms match the exact periodogram expectation") {
    const auto& p = std::get<Ar2MixParams>(data.replicates[0].truth);
    const int n = 512, R = 150;
    const Vec mean = mean_periodogram(
        [&](RngStream& rng) { return draw_ar2_mixture_series(p, n, rng); }, n, R, 6);
    const Vec acv =
        ar2_autocovariance(p.phi11, p.phi12, n) + ar2_autocovariance(p.phi21, p.phi22, n);
    const Vec ratio = band_ratio(mean, expected_periodogram(acv, n), n);
    CHECK(std::abs(ratio.mean() - 1.0) < 0.02);
    CHECK((ratio.array() - 1.0).abs().maxCoeff() < 6.0 / std::sqrt(double(R)));
  }
  SUBCASE("unstable coefficients are rejected") {
    Ar2MixParams bad;
    bad.phi11 = 1.0;
    bad.phi12 = -1.0000001;
    bad.phi21 = 0.5;
    bad.phi22 = -1.5;
    RngStream rng(1);
    CHECK_THROWS_AS(draw_ar2_mixture_series(bad, 32, rng), SamplerFailure);
  }
}

TEST_CASE("hierarchical autocovariance quadrature") {
  SUBCASE("flat log-spectrum: gamma(0)=2pi, gamma(h>=1)=0") {
    SplineVector coeffs = SplineVector::Zero(4);
    double max_imag = 0.0;
    const Vec gamma = hier_autocovariance(coeffs, 8, &max_imag);
    CHECK(gamma[0] == doctest::Approx(2 * kPi).epsilon(1e-12));
    for (int h = 1; h < 8; ++h) CHECK(std::abs(gamma[h]) < 1e-12);
    CHECK(max_imag < 1e-10);
    const ToeplitzFactor factor(gamma);
    CHECK(!factor.jitter_applied());
  }
  SUBCASE("imaginary parts vanish for arbitrary coefficients") {
    const ParameterState st = oracle::random_state(15, 1, 1, 2, 15, 0.3);
    double max_imag = 0.0;
    hier_autocovariance(st.beta_glob, 64, &max_imag);
    CHECK(max_imag < 1e-10);
  }
  SUBCASE("doubling the quadrature grid moves gamma by < 1e-8 relative") {
    const ParameterState st = oracle::random_state(15, 1, 1, 2, 16, 0.4);
    const Vec g14 = hier_autocovariance(st.beta_glob, 32, nullptr, 1 << 14);
    const Vec g15 = hier_autocovariance(st.beta_glob, 32, nullptr, 1 << 15);
    CHECK(std::abs(g14[0] - g15[0]) < 1e-8 * std::abs(g15[0]));
    CHECK((g14 - g15).lpNorm<Eigen::Infinity>() < 1e-8 * std::abs(g15[0]));
  }
  SUBCASE("single cosine component integrates analytically") {
    // g(w) = c * sqrt(2) cos(w): gamma(h) = 2 pi I_h(sqrt(2) c) (modified
    // Bessel), checked for h = 0 against a direct series evaluation.
    SplineVector coeffs = SplineVector::Zero(2);
    coeffs[1] = 0.5;
    const Vec gamma = hier_autocovariance(coeffs, 2);
    const double a = std::numbers::sqrt2 * 0.5;
    double bessel0 = 0.0;
    for (int k = 0; k < 30; ++k) {
      double term = 1.0;
      for (int i = 1; i <= k; ++i) term *= (a / 2) / i;
      bessel0 += term * term;
    }
    CHECK(gamma[0] == doctest::Approx(2 * kPi * bessel0).epsilon(1e-10));
  }
}

TEST_CASE("hierarchical generator") {
  SUBCASE("length mix assigns 80/20 short/long") {
    HierSetting setting;
    setting.L = 10;
    setting.length_mix = {{64, 0.8}, {128, 0.2}};
    setting.B = 4;
    setting.seed = 31;
    const SimulatedDataset data = gen_hierarchical(setting);
    int n_short = 0, n_long = 0;
    for (const auto& rep : data.replicates)
      (rep.series.n() == 64 ? n_short : n_long)++;
    CHECK(n_short == 8);
    CHECK(n_long == 2);
  }
  SUBCASE("truth includes the periodogram-convention offset log(2pi)") {
    HierSetting setting;
    setting.L = 1;
    setting.length_mix = {{64, 1.0}};
    setting.B = 3;
    setting.seed = 32;
    const SimulatedDataset data = gen_hierarchical(setting);
    const auto& params = std::get<HierParams>(data.replicates[0].truth);
    Vec w(1);
    w << 0.8;
    const double g_star = eval_log_spectrum(params.coeffs, w)[0];
    CHECK(data.truth_on_grid(0, w)[0] ==
          doctest::Approx(g_star + std::log(2 * kPi)).epsilon(1e-12));
  }
  SUBCASE("zeta* stays inside [1, 1.1] and tau* inside [3, 8]") {
    HierSetting setting;
    setting.L = 50;
    setting.length_mix = {{16, 1.0}};
    setting.B = 3;
    setting.seed = 33;
    const SimulatedDataset data = gen_hierarchical(setting);
    CHECK(data.hier_tau_star >= 3.0);
    CHECK(data.hier_tau_star <= 8.0);
    for (const auto& rep : data.replicates) {
      const double z = std::get<HierParams>(rep.truth).zeta_star;
      CHECK(z >= 1.0);
      CHECK(z <= 1.1);
    }
  }
  SUBCASE("local coefficient hyperdraws have the advertised variances") {
    HierSetting setting;
    setting.L = 4000;
    setting.length_mix = {{16, 1.0}};
    setting.B = 3;
    setting.kappa = 0.7;
    setting.seed = 34;
    const SimulatedDataset data = gen_hierarchical(setting);
    const Vec d = d_schedule(setting.B);
    // Standardized residuals across replicates should have unit variance.
    for (int b = 1; b <= setting.B; ++b) {
      double ss = 0.0;
      for (const auto& rep : data.replicates) {
        const auto& p = std::get<HierParams>(rep.truth);
        const double loc = p.coeffs[b] - data.hier_global[b];
        const double var =
            setting.kappa * data.hier_tau_star * data.hier_tau_star * d[b - 1] *
            (p.zeta_star * p.zeta_star - 1.0);
        ss += loc * loc / var;
      }
      const double emp = ss / setting.L;
      CHECK(std::abs(emp - 1.0) < 4.0 * std::sqrt(2.0 / setting.L));
    }
  }
  SUBCASE("sample variance of generated series matches gamma(0)") {
    HierSetting setting;
    setting.L = 1;
    setting.length_mix = {{400, 1.0}};
    setting.B = 5;
    setting.seed = 35;
    const SimulatedDataset data = gen_hierarchical(setting);
    const auto& params = std::get<HierParams>(data.replicates[0].truth);
    const Vec gamma = hier_autocovariance(params.coeffs, 400);
    const ToeplitzFactor factor(gamma);
    double mean_var = 0.0;
    const int R = 200;
    for (int r = 0; r < R; ++r) {
      RngStream rng(derive_seed(99, 0, StreamStep::SimulateReplicate, r));
      const Vec x = factor.draw(rng);
      mean_var += (x.array() - x.mean()).square().mean();
    }
    mean_var /= R;
    CHECK(std::abs(mean_var - gamma[0]) < 0.1 * gamma[0]);
  }
  SUBCASE("averaged periodograms match the exact periodogram expectation") {
    HierSetting setting;
    setting.L = 1;
    setting.length_mix = {{512, 1.0}};
    setting.B = 5;
    setting.seed = 36;
    const SimulatedDataset data = gen_hierarchical(setting);
    const auto& params = std::get<HierParams>(data.replicates[0].truth);
    const int n = 512, R = 150;
    const Vec gamma = hier_autocovariance(params.coeffs, n);
    const ToeplitzFactor factor(gamma);
    const Vec mean = mean_periodogram(
        [&](RngStream& rng) {
          TimeSeries ts;
          ts.values = factor.draw(rng);
          return ts;
        },
        n, R, 7);
    const Vec ratio = band_ratio(mean, expected_periodogram(gamma, n), n);
    CHECK(std::abs(ratio.mean() - 1.0) < 0.02);
    CHECK((ratio.array() - 1.0).abs().maxCoeff() < 6.0 / std::sqrt(double(R)));
  }
  SUBCASE("bit-reproducible from the setting") {
    HierSetting setting;
    setting.L = 3;
    setting.length_mix = {{32, 1.0}};
    setting.B = 4;
    setting.seed = 37;
    const SimulatedDataset a = gen_hierarchical(setting);
    const SimulatedDataset b = gen_hierarchical(setting);
    for (int ell = 0; ell < 3; ++ell)
      CHECK((a.replicates[ell].series.values - b.replicates[ell].series.values)
                .lpNorm<Eigen::Infinity>() == 0.0);
  }
  SUBCASE("proportions must sum to one") {
    HierSetting setting;
    setting.length_mix = {{32, 0.5}, {64, 0.2}};
    CHECK_THROWS_AS(gen_hierarchical(setting), InvalidInput);
  }
}

TEST_CASE("process variance by quadrature agrees with closed forms") {
  SUBCASE("MA(4)") {
    const Ma4Params p{{-0.3, -0.6, -0.3, 0.6}};
    CHECK(process_variance(p) == doctest::Approx(1.9).epsilon(1e-10));
  }
  SUBCASE("AR(2) component via the Yule-Walker closed form") {
    Ar2MixParams p;
    p.kappa1 = 0.15;
    p.gamma1 = 0.5;
    p.phi11 = 2 * std::cos(p.gamma1) * std::exp(-p.kappa1);
    p.phi12 = -std::exp(-2 * p.kappa1);
    // Make the second component vanish by reusing the first with zero power:
    // instead compare the sum of two closed forms.
    p.kappa2 = 0.3;
    p.gamma2 = 1.1;
    p.phi21 = 2 * std::cos(p.gamma2) * std::exp(-p.kappa2);
    p.phi22 = -std::exp(-2 * p.kappa2);
    const auto ar2_var = [](double phi1, double phi2) {
      return (1 - phi2) / ((1 + phi2) * ((1 - phi2) * (1 - phi2) - phi1 * phi1));
    };
    CHECK(process_variance(p) ==
          doctest::Approx(ar2_var(p.phi11, p.phi12) + ar2_var(p.phi21, p.phi22))
              .epsilon(1e-8));
  }
}
