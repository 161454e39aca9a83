#include "hbest/sampler.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "hbest/errors.hpp"

namespace hbest {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string dump_state(const ParameterState& state) {
  std::ostringstream os;
  os.precision(17);
  os << "{\"tau\":" << state.tau << ",\"zeta\":[";
  for (std::size_t i = 0; i < state.zeta.size(); ++i)
    os << (i ? "," : "") << state.zeta[i];
  os << "],\"beta_glob\":[";
  for (int i = 0; i < state.beta_glob.size(); ++i)
    os << (i ? "," : "") << state.beta_glob[i];
  os << "],\"beta_loc\":[";
  for (std::size_t l = 0; l < state.beta_loc.size(); ++l) {
    os << (l ? ",[" : "[");
    for (int i = 0; i < state.beta_loc[l].size(); ++i)
      os << (i ? "," : "") << state.beta_loc[l][i];
    os << "]";
  }
  os << "]}";
  return os.str();
}

// Runs body(0..n-1) on up to `threads` workers, strided by worker index.
// Safe only when the bodies are independent; exceptions are rethrown on the
// caller thread.
void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  threads = std::clamp(threads, 1, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int i = t; i < n; i += threads) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

std::string to_string(ModelMode mode) {
  switch (mode) {
    case ModelMode::Hierarchical: return "hierarchical";
    case ModelMode::Common: return "common";
    case ModelMode::Independent: return "independent";
  }
  return "hierarchical";
}

ModelMode model_mode_from_string(const std::string& s) {
  if (s == "hierarchical") return ModelMode::Hierarchical;
  if (s == "common") return ModelMode::Common;
  if (s == "independent") return ModelMode::Independent;
  throw InvalidInput("unknown model mode '" + s + "' (expected hierarchical|common|independent)");
}

void SamplerConfig::validate() const {
  hp.validate();
  if (iterations < 2) throw InvalidInput("sampler config: iterations must be >= 2");
  if (burn_in < 0 || burn_in >= iterations)
    throw InvalidInput("sampler config: need 0 <= burn_in < iterations");
  if (threads < 1) throw InvalidInput("sampler config: threads must be >= 1");
  if (!(init_tau > 0.0)) throw InvalidInput("sampler config: init_tau must be positive");
  if (init_zeta && !(*init_zeta > 1.0))
    throw InvalidInput("sampler config: init_zeta must exceed 1");
}

double student_t_cdf(double nu, double x) {
  boost::math::students_t_distribution<double> dist(nu);
  return boost::math::cdf(dist, x);
}

double student_t_quantile(double nu, double p) {
  boost::math::students_t_distribution<double> dist(nu);
  return boost::math::quantile(dist, p);
}

Grid Grid::student_t(double nu, double lower, double upper, int K) {
  if (!(nu > 0.0)) throw InvalidInput("grid: nu must be positive");
  if (!(lower < upper)) throw InvalidInput("grid: need lower < upper");
  if (K < 2) throw InvalidInput("grid: K must be >= 2");
  boost::math::students_t_distribution<double> dist(nu);
  const double p_lo = boost::math::cdf(dist, lower);
  const double p_hi = boost::math::cdf(dist, upper);
  Grid grid;
  grid.nu = nu;
  grid.lower = lower;
  grid.upper = upper;
  grid.points.resize(K);
  for (int k = 0; k < K; ++k) {
    const double p = p_lo + (p_hi - p_lo) * double(k) / double(K - 1);
    grid.points[k] = boost::math::quantile(dist, p);
  }
  return grid;
}

Vec softmax_probs(const Vec& log_weights) {
  const int K = static_cast<int>(log_weights.size());
  double max_lw = kNegInf;
  for (int k = 0; k < K; ++k) {
    const double lw = log_weights[k];
    if (std::isfinite(lw) && lw > max_lw) max_lw = lw;
  }
  if (max_lw == kNegInf)
    throw SamplerFailure("griddy gibbs: no finite grid log-weight");
  Vec probs(K);
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    const double lw = log_weights[k];
    probs[k] = std::isfinite(lw) ? std::exp(lw - max_lw) : 0.0;
    total += probs[k];
  }
  probs /= total;
  return probs;
}

int sample_discrete(const Vec& probs, double u) {
  double cum = 0.0;
  int last_positive = 0;
  for (int k = 0; k < probs.size(); ++k) {
    if (probs[k] > 0.0) last_positive = k;
    cum += probs[k];
    if (u < cum) return k;
  }
  return last_positive;  // u landed on accumulated roundoff
}

double griddy_sample(const Grid& grid, const std::function<double(double)>& log_post,
                     RngStream& rng, Vec* probs_out) {
  const int K = static_cast<int>(grid.points.size());
  Vec logw(K);
  for (int k = 0; k < K; ++k) logw[k] = log_post(grid.points[k]);
  const Vec probs = softmax_probs(logw);
  if (probs_out) *probs_out = probs;
  return grid.points[sample_discrete(probs, rng.uniform())];
}

double griddy_gibbs_tau(const ParameterState& state, const Hyperparameters& hp,
                        const Grid& grid, RngStream& rng) {
  return griddy_sample(
      grid, [&](double t) { return cond_logpost_tau(t, state, hp); }, rng);
}

double griddy_gibbs_zeta(const ParameterState& state, const Hyperparameters& hp, int ell,
                         const Grid& grid, RngStream& rng) {
  return griddy_sample(
      grid, [&](double z) { return cond_logpost_zeta(z, ell, state, hp); }, rng);
}

MapResult map_optimize(const Objective& f, const Gradient& grad, const Hessian& hess,
                       Vec init, const MapOptions& opts) {
  double fx = f(init);
  if (!std::isfinite(fx)) throw InvalidInput("map_optimize: objective non-finite at init");
  Vec x = std::move(init);
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    const Vec g = grad(x);
    if (g.lpNorm<Eigen::Infinity>() < opts.grad_tol)
      return {x, fx, true, it};
    const Mat A = -hess(x);
    Eigen::LLT<Mat> llt(A);
    Vec dir;
    if (llt.info() == Eigen::Success) {
      dir = llt.solve(g);
    } else {
      Eigen::LDLT<Mat> ldlt(A);
      if (ldlt.info() != Eigen::Success)
        throw SamplerFailure("map_optimize: Hessian factorization failed");
      dir = ldlt.solve(g);
    }
    bool improved = false;
    double step = 1.0;
    for (int h = 0; h < 60; ++h, step *= 0.5) {
      const Vec cand = x + step * dir;
      const double fc = f(cand);
      if (std::isfinite(fc) && fc > fx) {
        x = cand;
        fx = fc;
        improved = true;
        break;
      }
    }
    if (!improved) break;  // no ascent left at floating-point resolution
  }
  const bool at_tol = grad(x).lpNorm<Eigen::Infinity>() < opts.grad_tol;
  return {x, fx, at_tol, it};
}

Vec draw_laplace_proposal(const Vec& mode, const Mat& hess_at_mode, double eta,
                          RngStream& rng) {
  const Mat A = -hess_at_mode;
  Eigen::LLT<Mat> llt(A);
  if (llt.info() != Eigen::Success)
    throw SamplerFailure("laplace proposal: negated Hessian is not positive definite");
  const Vec z = rng.normal_vec(static_cast<int>(mode.size()));
  // cov( U^{-1} z ) = (L L^T)^{-1} = A^{-1}
  const Vec y = llt.matrixU().solve(z);
  return mode + std::sqrt(eta) * y;
}

MhResult laplace_mh(const Objective& f, const Gradient& grad, const Hessian& hess,
                    const Vec& current, double eta, bool literal_ratio, RngStream& rng) {
  const MapResult mode = map_optimize(f, grad, hess, current);
  const Mat H = hess(mode.point);
  const Vec proposal = draw_laplace_proposal(mode.point, H, eta, rng);

  double log_ratio = f(proposal) - f(current);
  if (!literal_ratio) {
    // Independence proposal: correct by q(current)/q(proposal),
    // log q(x) = -(x-mode)'(-H)(x-mode)/(2 eta) + const.
    const auto log_q = [&](const Vec& x) {
      const Vec dx = x - mode.point;
      return dx.dot(H * dx) / (2.0 * eta);
    };
    log_ratio += log_q(current) - log_q(proposal);
  }
  const double u = rng.uniform();
  const bool accepted = std::log(u) < log_ratio;
  return {accepted ? proposal : current, accepted, log_ratio};
}

MhResult laplace_mh_local(const ParameterState& state, const Dataset& data,
                          const Hyperparameters& hp, int ell, double eta, bool literal_ratio,
                          RngStream& rng) {
  const auto f = [&](const Vec& b) { return cond_logpost_local(b, ell, state, data, hp); };
  const auto g = [&](const Vec& b) { return grad_local(b, ell, state, data, hp); };
  const auto h = [&](const Vec& b) { return hess_local(b, ell, state, data, hp); };
  return laplace_mh(f, g, h, state.beta_loc[ell], eta, literal_ratio, rng);
}

MhResult laplace_mh_global(const ParameterState& state, const Dataset& data,
                           const Hyperparameters& hp, double eta, bool literal_ratio,
                           RngStream& rng) {
  const auto f = [&](const Vec& b) { return cond_logpost_global(b, state, data, hp); };
  const auto g = [&](const Vec& b) { return grad_global(b, state, data, hp); };
  const auto h = [&](const Vec& b) { return hess_global(b, state, data, hp); };
  return laplace_mh(f, g, h, state.beta_glob, eta, literal_ratio, rng);
}

namespace {

// Shared engine for hierarchical fits and single-spline fits (common mode and
// the per-replicate chains of independent mode).
Chain run_single(const Dataset& data, const SamplerConfig& cfg, bool with_locals) {
  const Hyperparameters& hp = cfg.hp;
  const int L = data.L();

  const Grid tau_grid = Grid::student_t(hp.nu_tau, hp.tau_min, hp.tau_max, hp.K_tau);
  Grid zeta_grid;
  if (with_locals)
    zeta_grid = Grid::student_t(hp.nu_zeta, hp.zeta_min, hp.zeta_max, hp.K_zeta);

  ParameterState state = ParameterState::zeros(hp.B, with_locals ? L : 0);
  state.tau = std::clamp(cfg.init_tau, hp.tau_min, hp.tau_max);
  if (with_locals) {
    const double z0 = cfg.init_zeta ? *cfg.init_zeta : zeta_grid.points[hp.K_zeta / 2];
    state.zeta.assign(L, z0);
  }
  if (cfg.init_map) {
    state.beta_glob =
        map_optimize([&](const Vec& b) { return cond_logpost_global(b, state, data, hp); },
                     [&](const Vec& b) { return grad_global(b, state, data, hp); },
                     [&](const Vec& b) { return hess_global(b, state, data, hp); },
                     state.beta_glob)
            .point;
    if (with_locals) {
      for (int ell = 0; ell < L; ++ell) {
        state.beta_loc[ell] =
            map_optimize(
                [&](const Vec& b) { return cond_logpost_local(b, ell, state, data, hp); },
                [&](const Vec& b) { return grad_local(b, ell, state, data, hp); },
                [&](const Vec& b) { return hess_local(b, ell, state, data, hp); },
                state.beta_loc[ell])
                .point;
      }
    }
  }

  Chain chain;
  chain.config = cfg;
  for (const auto& rep : data.replicates) chain.labels.push_back(rep.label);
  chain.accept.local_accept.assign(with_locals ? L : 0, 0);
  chain.accept.local_total.assign(with_locals ? L : 0, 0);
  chain.samples.reserve(cfg.iterations - cfg.burn_in);

  // Tracked per-replicate likelihood terms; refreshed only when an update
  // touches them. The consistency check compares their sum against a scratch
  // recomputation.
  std::vector<double> w(L);
  for (int ell = 0; ell < L; ++ell) w[ell] = whittle_loglik_replicate(state, data, ell);
  const auto tracked_loglik = [&] {
    double s = 0.0;
    for (double v : w) s += v;
    return s;
  };

  const auto t0 = Clock::now();
  auto t_post = t0;
  if (cfg.burn_in < 1) {
    chain.samples.push_back(state);
    chain.loglik.push_back(tracked_loglik());
  }

  for (long iter = 2; iter <= cfg.iterations; ++iter) {
    if (iter == cfg.burn_in + 1) t_post = Clock::now();
    try {
      // Step 1: global scale.
      {
        RngStream rs(derive_seed(cfg.seed, iter, StreamStep::Tau, 0));
        state.tau = griddy_gibbs_tau(state, hp, tau_grid, rs);
      }
      // Step 2: local scales.
      if (with_locals) {
        for (int ell = 0; ell < L; ++ell) {
          RngStream rs(derive_seed(cfg.seed, iter, StreamStep::Zeta, ell));
          state.zeta[ell] = griddy_gibbs_zeta(state, hp, ell, zeta_grid, rs);
        }
      }
      // Step 3: local splines, conditionally independent across replicates.
      if (with_locals) {
        std::vector<MhResult> results(L);
        parallel_for(L, cfg.threads, [&](int ell) {
          RngStream rs(derive_seed(cfg.seed, iter, StreamStep::LocalSpline, ell));
          results[ell] =
              laplace_mh_local(state, data, hp, ell, hp.eta, cfg.paper_literal_ratio, rs);
        });
        for (int ell = 0; ell < L; ++ell) {
          ++chain.accept.local_total[ell];
          if (results[ell].accepted) {
            ++chain.accept.local_accept[ell];
            state.beta_loc[ell] = results[ell].value;
            w[ell] = whittle_loglik_replicate(state, data, ell);
          }
        }
      }
      // Step 4: global spline.
      {
        RngStream rs(derive_seed(cfg.seed, iter, StreamStep::GlobalSpline, 0));
        const MhResult res =
            laplace_mh_global(state, data, hp, hp.eta, cfg.paper_literal_ratio, rs);
        ++chain.accept.global_total;
        if (res.accepted) {
          ++chain.accept.global_accept;
          state.beta_glob = res.value;
          for (int ell = 0; ell < L; ++ell)
            w[ell] = whittle_loglik_replicate(state, data, ell);
        }
      }

      if (cfg.check_consistency) {
        const double fresh = whittle_loglik(state, data);
        const double tracked = tracked_loglik();
        if (std::abs(fresh - tracked) > 1e-9 * std::max(1.0, std::abs(fresh)))
          throw SamplerFailure("tracked log-likelihood drifted from recomputation");
      }
    } catch (const SamplerFailure& e) {
      throw SamplerFailure(std::string(e.what()) + " (iteration " + std::to_string(iter) + ")",
                           iter, dump_state(state));
    }

    // Step 5: store.
    if (iter > cfg.burn_in) {
      chain.samples.push_back(state);
      chain.loglik.push_back(tracked_loglik());
    }
  }

  chain.seconds_total = seconds_since(t0);
  chain.seconds_post_burnin = seconds_since(t_post);
  return chain;
}

Dataset single_replicate(const Dataset& data, int ell) {
  Dataset out;
  out.B = data.B;
  out.replicates.push_back(data.replicates[ell]);
  return out;
}

}  // namespace

Chain run_chain(const Dataset& data, const SamplerConfig& config) {
  config.validate();
  if (data.L() < 1) throw InvalidInput("run_chain: empty dataset");

  if (config.mode == ModelMode::Hierarchical)
    return run_single(data, config, /*with_locals=*/true);
  if (config.mode == ModelMode::Common)
    return run_single(data, config, /*with_locals=*/false);

  // Independent: one single-spline chain per replicate, each with its own
  // derived seed; per-replicate beta acceptance is recorded under local_*.
  const int L = data.L();
  Chain chain;
  chain.config = config;
  for (const auto& rep : data.replicates) chain.labels.push_back(rep.label);
  chain.replicate_samples.resize(L);
  chain.replicate_loglik.resize(L);
  chain.accept.local_accept.assign(L, 0);
  chain.accept.local_total.assign(L, 0);

  const auto t0 = Clock::now();
  std::vector<Chain> subs(L);
  parallel_for(L, config.threads, [&](int ell) {
    SamplerConfig sub = config;
    sub.mode = ModelMode::Common;
    sub.seed = derive_seed(config.seed, 0, StreamStep::IndependentSubchain, ell);
    sub.threads = 1;
    subs[ell] = run_single(single_replicate(data, ell), sub, /*with_locals=*/false);
  });
  double post = 0.0;
  for (int ell = 0; ell < L; ++ell) {
    chain.replicate_samples[ell] = std::move(subs[ell].samples);
    chain.replicate_loglik[ell] = std::move(subs[ell].loglik);
    chain.accept.local_accept[ell] = subs[ell].accept.global_accept;
    chain.accept.local_total[ell] = subs[ell].accept.global_total;
    post += subs[ell].seconds_post_burnin;
  }
  chain.seconds_total = seconds_since(t0);
  chain.seconds_post_burnin = post;
  return chain;
}

}  // namespace hbest
