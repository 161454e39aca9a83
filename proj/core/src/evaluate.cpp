#include "hbest/evaluate.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "hbest/errors.hpp"
#include "hbest/spectral.hpp"

namespace hbest {

void EvalGrid::validate() const {
  if (K < 2) throw InvalidInput("eval grid: K must be >= 2");
  if (!(0.0 <= trim_lo && trim_lo < trim_hi && trim_hi <= 1.0))
    throw InvalidInput("eval grid: need 0 <= trim_lo < trim_hi <= 1");
}

Vec EvalGrid::omegas() const {
  validate();
  Vec w(K);
  for (int k = 0; k < K; ++k) w[k] = std::numbers::pi * k / (K - 1);
  return w;
}

std::vector<int> EvalGrid::trimmed_indices() const {
  validate();
  std::vector<int> idx;
  for (int k = 0; k < K; ++k) {
    const double u = double(k) / (K - 1);
    if (u >= trim_lo && u < trim_hi) idx.push_back(k);
  }
  return idx;
}

namespace {

struct ChainView {
  long iterations = 0;
  int L = 0;
  bool hierarchical = false;
  bool independent = false;
  const Chain* chain = nullptr;

  SplineVector coeffs(long i, int ell) const {
    if (independent) return chain->replicate_samples[ell][i].beta_glob;
    const ParameterState& st = chain->samples[i];
    if (hierarchical) return st.beta_glob + st.beta_loc[ell];
    return st.beta_glob;
  }
};

ChainView view_of(const Chain& chain) {
  ChainView v;
  v.chain = &chain;
  v.independent = chain.config.mode == ModelMode::Independent;
  v.hierarchical = chain.config.mode == ModelMode::Hierarchical;
  if (v.independent) {
    if (chain.replicate_samples.empty() || chain.replicate_samples.front().empty())
      throw InvalidInput("chain is empty");
    v.L = static_cast<int>(chain.replicate_samples.size());
    v.iterations = static_cast<long>(chain.replicate_samples.front().size());
    for (const auto& sub : chain.replicate_samples)
      if (static_cast<long>(sub.size()) != v.iterations)
        throw InvalidInput("independent chain: ragged sample counts");
  } else {
    if (chain.samples.empty()) throw InvalidInput("chain is empty");
    v.iterations = static_cast<long>(chain.samples.size());
    v.L = static_cast<int>(chain.labels.size());
    if (v.L == 0) v.L = v.hierarchical ? int(chain.samples.front().beta_loc.size()) : 1;
  }
  return v;
}

double aepl_over(const Chain& chain, const std::vector<Vec>& truths, const EvalGrid& grid,
                 const std::vector<int>& idx) {
  const ChainView v = view_of(chain);
  if (static_cast<int>(truths.size()) != v.L)
    throw InvalidInput("aepl: truth count does not match replicate count");
  for (const auto& t : truths)
    if (t.size() != grid.K) throw InvalidInput("aepl: truth not tabulated on the grid");
  if (idx.empty()) throw InvalidInput("aepl: empty frequency index set");

  const Vec w_all = grid.omegas();
  Vec w(idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) w[j] = w_all[idx[j]];
  const Mat phi = basis_matrix(w, chain.config.hp.B).rows;

  double acc = 0.0;
  for (int ell = 0; ell < v.L; ++ell) {
    Vec truth(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) truth[j] = truths[ell][idx[j]];
    for (long i = 0; i < v.iterations; ++i) {
      const Vec g = phi * v.coeffs(i, ell);
      acc += (g - truth).squaredNorm();
    }
  }
  return acc / (double(v.L) * double(v.iterations) * double(idx.size()));
}

}  // namespace

double aepl(const Chain& chain, const std::vector<Vec>& truths, const EvalGrid& grid) {
  return aepl_over(chain, truths, grid, grid.trimmed_indices());
}

double aepl_untrimmed(const Chain& chain, const std::vector<Vec>& truths, const EvalGrid& grid) {
  std::vector<int> idx(grid.K);
  for (int k = 0; k < grid.K; ++k) idx[k] = k;
  return aepl_over(chain, truths, grid, idx);
}

double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) throw InvalidInput("quantile: empty sample");
  if (!(0.0 <= p && p <= 1.0)) throw InvalidInput("quantile: p outside [0,1]");
  std::sort(values.begin(), values.end());
  const double h = (values.size() - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  const double frac = h - double(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

namespace {

SeriesSummary summarize_rows(const Mat& g_by_iter) {
  const long I = g_by_iter.rows();
  const int K = static_cast<int>(g_by_iter.cols());
  SeriesSummary s;
  s.mean = g_by_iter.colwise().mean();
  s.lower.resize(K);
  s.upper.resize(K);
  std::vector<double> buf(I);
  for (int k = 0; k < K; ++k) {
    for (long i = 0; i < I; ++i) buf[i] = g_by_iter(i, k);
    std::sort(buf.begin(), buf.end());
    const auto interp = [&](double p) {
      const double h = (I - 1) * p;
      const long lo = static_cast<long>(std::floor(h));
      if (lo + 1 >= I) return buf[I - 1];
      return buf[lo] + (h - lo) * (buf[lo + 1] - buf[lo]);
    };
    s.lower[k] = interp(0.025);
    s.upper[k] = interp(0.975);
  }
  return s;
}

}  // namespace

SpectrumSummary posterior_summary(const Chain& chain, const EvalGrid& grid) {
  const ChainView v = view_of(chain);
  const Mat phi = basis_matrix(grid.omegas(), chain.config.hp.B).rows;
  const int K = grid.K;

  SpectrumSummary out;
  out.grid = grid;
  out.labels = chain.labels;

  Mat g(v.iterations, K);
  if (!v.independent) {
    for (long i = 0; i < v.iterations; ++i)
      g.row(i) = (phi * chain.samples[i].beta_glob).transpose();
    out.global = summarize_rows(g);
  }
  if (v.hierarchical || v.independent) {
    for (int ell = 0; ell < v.L; ++ell) {
      for (long i = 0; i < v.iterations; ++i)
        g.row(i) = (phi * v.coeffs(i, ell)).transpose();
      out.individual.push_back(summarize_rows(g));
    }
  }
  if (v.hierarchical) {
    for (int ell = 0; ell < v.L; ++ell) {
      for (long i = 0; i < v.iterations; ++i)
        g.row(i) = (phi * chain.samples[i].beta_loc[ell]).transpose();
      out.local.push_back(summarize_rows(g));
    }
  }
  return out;
}

Vec local_sd(const Chain& chain, const EvalGrid& grid) {
  if (chain.config.mode != ModelMode::Hierarchical)
    throw InvalidInput("local_sd: requires a hierarchical chain");
  const ChainView v = view_of(chain);
  if (v.L < 2) throw InvalidInput("local_sd: requires L >= 2 replicates");

  const Mat phi = basis_matrix(grid.omegas(), chain.config.hp.B).rows;
  Mat mean_local(v.L, grid.K);
  for (int ell = 0; ell < v.L; ++ell) {
    SplineVector m = SplineVector::Zero(chain.config.hp.B + 1);
    for (long i = 0; i < v.iterations; ++i) m += chain.samples[i].beta_loc[ell];
    m /= double(v.iterations);
    mean_local.row(ell) = (phi * m).transpose();
  }
  Vec sd(grid.K);
  for (int k = 0; k < grid.K; ++k) {
    const double mu = mean_local.col(k).mean();
    sd[k] = std::sqrt((mean_local.col(k).array() - mu).square().sum() / (v.L - 1));
  }
  return sd;
}

namespace {

// All lagged autocovariances at once via zero-padded FFT.
Vec autocovariances(const Vec& centered) {
  const int N = static_cast<int>(centered.size());
  int M = 1;
  while (M < 2 * N) M <<= 1;
  std::vector<double> padded(M, 0.0);
  for (int t = 0; t < N; ++t) padded[t] = centered[t];
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, padded);
  for (auto& z : spec) z = std::norm(z);
  std::vector<std::complex<double>> back;
  fft.inv(back, spec);
  Vec c(N);
  for (int k = 0; k < N; ++k) c[k] = back[k].real() / N;
  return c;
}

}  // namespace

EssResult ess(const Vec& samples) {
  const int N = static_cast<int>(samples.size());
  if (N < 10) throw InvalidInput("ess: need at least 10 samples");
  const Vec centered = samples.array() - samples.mean();
  const double c0 = centered.squaredNorm() / N;
  if (!(c0 > 0.0)) return {double(N), true};

  const Vec c = autocovariances(centered);
  double acc = 0.0;
  for (int j = 1; 2 * j < N; ++j) {
    const double pair = (c[2 * j - 1] + c[2 * j]) / c[0];
    if (pair <= 0.0) break;
    acc += pair;
  }
  const double e = double(N) / (1.0 + 2.0 * acc);
  return {std::min(e, double(N)), false};
}

}  // namespace hbest
