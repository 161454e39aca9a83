#include "hbest/model.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hbest/errors.hpp"
#include "oracles.hpp"

using namespace hbest;

TEST_CASE("d schedule") {
  const Vec d = d_schedule(6);
  CHECK(d[0] == doctest::Approx(1.0 / (4 * std::numbers::pi)).epsilon(1e-15));
  for (int b = 1; b < 6; ++b) {
    CHECK(d[b] > 0.0);
    CHECK(d[b] < d[b - 1]);
  }
}

TEST_CASE("whittle log-likelihood") {
  const Dataset data = oracle::random_dataset(2, 24, 4, 7);

  SUBCASE("all coefficients zero gives minus the ordinate sum") {
    const ParameterState st = ParameterState::zeros(4, 2);
    double ysum = 0.0;
    for (const auto& rep : data.replicates) ysum += rep.pgram.ordinates.sum();
    CHECK(whittle_loglik(st, data) == doctest::Approx(-ysum).epsilon(1e-12));
  }
  SUBCASE("single unit ordinate at flat zero spectrum") {
    // Hand-build a dataset with one replicate and one ordinate Y = 1.
    Dataset tiny;
    tiny.B = 1;
    ReplicateData rep;
    rep.label = "one";
    rep.pgram.n = 2;
    rep.pgram.frequencies = fundamental_frequencies(2);
    rep.pgram.ordinates = Vec::Ones(1);
    rep.psi = basis_matrix(rep.pgram.frequencies, 1);
    rep.log_ordinates = Vec::Zero(1);
    rep.psi_colsum = rep.psi.rows.colwise().sum();
    tiny.replicates.push_back(rep);
    const ParameterState st = ParameterState::zeros(1, 0);
    CHECK(whittle_loglik(st, tiny) == doctest::Approx(-1.0).epsilon(1e-15));
  }
  SUBCASE("matches the scalar-loop oracle on random states") {
    for (unsigned seed : {1u, 2u, 3u}) {
      const ParameterState st = oracle::random_state(4, 2, 1.0, 2.0, seed);
      const double lib = whittle_loglik(st, data);
      const double ref = oracle::naive_whittle(st, data);
      CHECK(std::abs(lib - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
    }
  }
  SUBCASE("decomposes additively over replicates") {
    const ParameterState st = oracle::random_state(4, 2, 1.0, 2.0, 9);
    double parts = 0.0;
    for (int ell = 0; ell < 2; ++ell) parts += whittle_loglik_replicate(st, data, ell);
    CHECK(whittle_loglik(st, data) == doctest::Approx(parts).epsilon(1e-13));
  }
  SUBCASE("dimension mismatch is rejected") {
    ParameterState st = ParameterState::zeros(5, 2);  // wrong B
    CHECK_THROWS_AS(whittle_loglik(st, data), InvalidInput);
  }
}

TEST_CASE("half-t log prior") {
  SUBCASE("outside the support") {
    CHECK(log_prior_half_t(0.0, 2.0, 0.0) == -std::numeric_limits<double>::infinity());
    CHECK(log_prior_half_t(0.5, 5.0, 1.0) == -std::numeric_limits<double>::infinity());
  }
  SUBCASE("kernel differences") {
    const double nu = 3.0;
    for (double x : {0.5, 1.5, 4.0}) {
      const double expected = -0.5 * (nu + 1) * (std::log1p(x * x / nu) - std::log1p(1.0 / nu));
      CHECK(log_prior_half_t(x, nu, 0.0) - log_prior_half_t(1.0, nu, 0.0) ==
            doctest::Approx(expected).epsilon(1e-14));
    }
  }
  SUBCASE("Cauchy case: difference between x=1 and x=0+ is -log 2") {
    const double diff = log_prior_half_t(1.0, 1.0, 0.0) - log_prior_half_t(1e-300, 1.0, 0.0);
    CHECK(diff == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  }
}

namespace {

// Scalar-loop reference for the tau conditional.
double naive_tau_logpost(double tau, const ParameterState& st, const Hyperparameters& hp) {
  const Vec d = d_schedule(hp.B);
  double quad = 0.0;
  for (int b = 1; b <= hp.B; ++b) quad += st.beta_glob[b] * st.beta_glob[b] / d[b - 1];
  for (int ell = 0; ell < st.L(); ++ell) {
    double q = 0.0;
    for (int b = 1; b <= hp.B; ++b) q += st.beta_loc[ell][b] * st.beta_loc[ell][b] / d[b - 1];
    quad += q / (st.zeta[ell] * st.zeta[ell] - 1.0);
  }
  return -0.5 * hp.B * (st.L() + 1) * std::log(tau * tau) - quad / (2 * tau * tau) -
         0.5 * (hp.nu_tau + 1) * std::log(1 + tau * tau / hp.nu_tau);
}

Hyperparameters small_hp(int B) {
  Hyperparameters hp;
  hp.B = B;
  return hp;
}

}  // namespace

TEST_CASE("tau conditional log-posterior") {
  SUBCASE("closed form with zero coefficients, L=1, B=1, nu=2") {
    Hyperparameters hp = small_hp(1);
    hp.nu_tau = 2.0;
    const ParameterState st = ParameterState::zeros(1, 1);
    for (double tau : {0.05, 0.7, 3.0}) {
      const double expected =
          -std::log(tau * tau) - 1.5 * std::log(1 + tau * tau / 2.0);
      CHECK(cond_logpost_tau(tau, st, hp) == doctest::Approx(expected).epsilon(1e-13));
    }
  }
  SUBCASE("doubling the coefficients scales only the quadratic term by 4") {
    const Hyperparameters hp = small_hp(3);
    ParameterState st = oracle::random_state(3, 2, 1.0, 2.0, 21);
    const double tau = 0.8;
    const double base = cond_logpost_tau(tau, st, hp);
    ParameterState doubled = st;
    doubled.beta_glob.tail(3) *= 2.0;
    for (auto& bl : doubled.beta_loc) bl.tail(3) *= 2.0;
    const double quad_before = naive_tau_logpost(tau, st, hp) -
                               naive_tau_logpost(tau, ParameterState::zeros(3, 2), hp) +
                               0.0;
    const double got = cond_logpost_tau(tau, doubled, hp);
    CHECK(got - base == doctest::Approx(3.0 * quad_before).epsilon(1e-10));
  }
  SUBCASE("matches the scalar-loop oracle") {
    const Hyperparameters hp = small_hp(5);
    const ParameterState st = oracle::random_state(5, 3, 1.0, 1.7, 33);
    for (double tau : {0.01, 0.3, 1.0, 12.0}) {
      const double lib = cond_logpost_tau(tau, st, hp);
      const double ref = naive_tau_logpost(tau, st, hp);
      CHECK(std::abs(lib - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
    }
  }
  SUBCASE("scale identity: (c beta, c tau) shifts by -B(L+1) log c plus nothing else "
          "except the half-t term") {
    const Hyperparameters hp = small_hp(4);
    const ParameterState st = oracle::random_state(4, 2, 1.0, 2.5, 44);
    const double tau = 0.9, c = 3.0;
    ParameterState scaled = st;
    scaled.beta_glob.tail(4) *= c;
    for (auto& bl : scaled.beta_loc) bl.tail(4) *= c;
    const double lhs = cond_logpost_tau(c * tau, scaled, hp);
    const double half_t_shift =
        -0.5 * (hp.nu_tau + 1) * (std::log1p(c * c * tau * tau / hp.nu_tau) -
                                  std::log1p(tau * tau / hp.nu_tau));
    const double rhs =
        cond_logpost_tau(tau, st, hp) - hp.B * (st.L() + 1) * std::log(c) + half_t_shift;
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));
  }
  SUBCASE("invalid tau") {
    const Hyperparameters hp = small_hp(2);
    const ParameterState st = ParameterState::zeros(2, 1);
    CHECK_THROWS_AS(cond_logpost_tau(0.0, st, hp), InvalidInput);
    CHECK_THROWS_AS(cond_logpost_tau(-1.0, st, hp), InvalidInput);
  }
}

TEST_CASE("zeta conditional log-posterior") {
  const Hyperparameters hp = small_hp(4);

  SUBCASE("zero local coefficients: closed form, decreasing beyond sqrt(2)") {
    const ParameterState st = ParameterState::zeros(4, 2);
    double prev = cond_logpost_zeta(std::sqrt(2.0), 0, st, hp);
    for (double z = 1.5; z < 8.0; z += 0.25) {
      const double expected = -0.5 * hp.B * std::log(z * z - 1) -
                              0.5 * (hp.nu_zeta + 1) * std::log1p(z * z / hp.nu_zeta);
      const double got = cond_logpost_zeta(z, 0, st, hp);
      CHECK(got == doctest::Approx(expected).epsilon(1e-13));
      CHECK(got < prev);
      prev = got;
    }
  }
  SUBCASE("depends on the replicate only through its local vector") {
    ParameterState st = oracle::random_state(4, 3, 1.2, 2.0, 55);
    st.beta_loc[2] = st.beta_loc[0];
    CHECK(cond_logpost_zeta(1.8, 0, st, hp) ==
          doctest::Approx(cond_logpost_zeta(1.8, 2, st, hp)).epsilon(1e-14));
  }
  SUBCASE("matches a scalar-loop oracle") {
    const ParameterState st = oracle::random_state(4, 2, 0.7, 2.0, 66);
    const Vec d = d_schedule(4);
    for (double z : {1.01, 1.5, 4.0, 12.0}) {
      double quad = 0.0;
      for (int b = 1; b <= 4; ++b) quad += st.beta_loc[1][b] * st.beta_loc[1][b] / d[b - 1];
      const double expected = -0.5 * 4 * std::log(z * z - 1) -
                              quad / (2 * st.tau * st.tau * (z * z - 1)) -
                              0.5 * (hp.nu_zeta + 1) * std::log1p(z * z / hp.nu_zeta);
      CHECK(cond_logpost_zeta(z, 1, st, hp) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  SUBCASE("invalid zeta") {
    const ParameterState st = ParameterState::zeros(4, 1);
    CHECK_THROWS_AS(cond_logpost_zeta(1.0, 0, st, hp), InvalidInput);
  }
}

TEST_CASE("local conditional log-posterior") {
  const int B = 4, L = 2;
  const Dataset data = oracle::random_dataset(L, 32, B, 13);
  const Hyperparameters hp = small_hp(B);

  SUBCASE("zero local vector reduces to the replicate Whittle term at the global spectrum") {
    ParameterState st = oracle::random_state(B, L, 1.1, 2.0, 77);
    for (auto& bl : st.beta_loc) bl.setZero();
    const double got = cond_logpost_local(SplineVector::Zero(B + 1), 0, st, data, hp);
    // whittle_loglik_replicate includes the -1'Psi beta_glob part that the
    // local conditional drops; add it back for comparison.
    const double linear_glob = data.replicates[0].psi_colsum.dot(st.beta_glob);
    CHECK(got == doctest::Approx(whittle_loglik_replicate(st, data, 0) + linear_glob)
                     .epsilon(1e-11));
  }
  SUBCASE("intercept-only local vector adds -c^2/(2 delta2) to the prior part") {
    const ParameterState st = oracle::random_state(B, L, 1.0, 2.0, 78);
    SplineVector zero = SplineVector::Zero(B + 1);
    SplineVector c_only = zero;
    const double c = 0.37;
    c_only[0] = c;
    const double with_c = cond_logpost_local(c_only, 1, st, data, hp);
    // Separate the likelihood change from the prior change analytically.
    const auto& rep = data.replicates[1];
    double lik_zero = 0.0, lik_c = 0.0;
    for (int j = 0; j < rep.m(); ++j) {
      const double g0 = rep.psi.rows.row(j).dot(st.beta_glob);
      lik_zero += -rep.pgram.ordinates[j] * std::exp(-g0);
      lik_c += -c - rep.pgram.ordinates[j] * std::exp(-(g0 + c));
    }
    const double base = cond_logpost_local(zero, 1, st, data, hp);
    CHECK(with_c - base ==
          doctest::Approx((lik_c - lik_zero) - c * c / (2 * hp.delta2)).epsilon(1e-10));
  }
  SUBCASE("matches a scalar-loop oracle") {
    const ParameterState st = oracle::random_state(B, L, 0.9, 1.8, 79);
    const SplineVector cand = oracle::random_state(B, L, 1, 2, 80).beta_loc[0];
    const auto& rep = data.replicates[0];
    const Vec d = d_schedule(B);
    double expected = 0.0;
    for (int j = 0; j < rep.m(); ++j) {
      double g_loc = 0.0, g_all = 0.0;
      for (int b = 0; b <= B; ++b) {
        g_loc += rep.psi.rows(j, b) * cand[b];
        g_all += rep.psi.rows(j, b) * (cand[b] + st.beta_glob[b]);
      }
      expected += -g_loc - rep.pgram.ordinates[j] * std::exp(-g_all);
    }
    expected -= cand[0] * cand[0] / (2 * hp.delta2);
    for (int b = 1; b <= B; ++b)
      expected -= cand[b] * cand[b] /
                  (2 * st.tau * st.tau * (st.zeta[0] * st.zeta[0] - 1) * d[b - 1]);
    CHECK(cond_logpost_local(cand, 0, st, data, hp) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("derivatives match finite differences across the scale grid") {
  const int B = 4, L = 3;
  const Dataset data = oracle::random_dataset(L, 32, B, 23);
  const Hyperparameters hp = small_hp(B);
  const double taus[] = {0.01, 1.0, 50.0};
  const double zetas[] = {1.01, 2.0, 10.0};

  int case_id = 0;
  for (double tau : taus) {
    for (double zeta : zetas) {
      for (int rep = 0; rep < 3; ++rep, ++case_id) {
        const ParameterState st = oracle::random_state(B, L, tau, zeta, 100 + case_id, 0.4);
        const int ell = case_id % L;

        const auto f_loc = [&](const Vec& b) { return cond_logpost_local(b, ell, st, data, hp); };
        const auto g_loc = [&](const Vec& b) { return grad_local(b, ell, st, data, hp); };
        const Vec x_loc = st.beta_loc[ell];
        CHECK(oracle::rel_err_inf(oracle::fd_gradient(f_loc, x_loc), g_loc(x_loc)) < 1e-6);
        CHECK(oracle::rel_err_inf(oracle::fd_jacobian(g_loc, x_loc),
                                  hess_local(x_loc, ell, st, data, hp)) < 1e-5);

        const auto f_glob = [&](const Vec& b) { return cond_logpost_global(b, st, data, hp); };
        const auto g_glob = [&](const Vec& b) { return grad_global(b, st, data, hp); };
        const Vec x_glob = st.beta_glob;
        CHECK(oracle::rel_err_inf(oracle::fd_gradient(f_glob, x_glob), g_glob(x_glob)) < 1e-6);
        CHECK(oracle::rel_err_inf(oracle::fd_jacobian(g_glob, x_glob),
                                  hess_global(x_glob, st, data, hp)) < 1e-5);
      }
    }
  }
}

TEST_CASE("gradient with all-zero ordinates is exactly the linear-plus-prior part") {
  const int B = 3;
  Dataset data;
  data.B = B;
  ReplicateData rep;
  rep.label = "zeros";
  rep.pgram.n = 16;
  rep.pgram.frequencies = fundamental_frequencies(16);
  rep.pgram.ordinates = Vec::Zero(8);
  rep.psi = basis_matrix(rep.pgram.frequencies, B);
  rep.log_ordinates = Vec::Constant(8, -std::numeric_limits<double>::infinity());
  rep.psi_colsum = rep.psi.rows.colwise().sum();
  data.replicates.push_back(rep);

  const Hyperparameters hp = small_hp(B);
  ParameterState st = oracle::random_state(B, 1, 1.3, 2.2, 7);
  const Vec cand = st.beta_loc[0];
  const Vec prec = prior_precision_local(hp, st.tau, st.zeta[0], d_schedule(B));
  const Vec expected = -rep.psi_colsum - Vec(prec.asDiagonal() * cand);
  CHECK((grad_local(cand, 0, st, data, hp) - expected).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("Hessians are negative definite and the conditionals concave") {
  const int B = 4, L = 2;
  const Dataset data = oracle::random_dataset(L, 40, B, 31);
  const Hyperparameters hp = small_hp(B);
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (int trial = 0; trial < 20; ++trial) {
    const double tau = std::vector<double>{0.01, 1.0, 50.0}[trial % 3];
    const double zeta = std::vector<double>{1.01, 2.0, 10.0}[(trial / 3) % 3];
    const ParameterState st = oracle::random_state(B, L, tau, zeta, 500 + trial, 0.4);

    const Mat h_loc = hess_local(st.beta_loc[0], 0, st, data, hp);
    const Mat h_glob = hess_global(st.beta_glob, st, data, hp);
    Eigen::SelfAdjointEigenSolver<Mat> es_loc(h_loc), es_glob(h_glob);
    CHECK(es_loc.eigenvalues().maxCoeff() < 0.0);
    CHECK(es_glob.eigenvalues().maxCoeff() < 0.0);

    // Midpoint concavity along a random segment.
    Vec a(B + 1), b(B + 1);
    for (int i = 0; i <= B; ++i) {
      a[i] = 2.0 * unif(gen) - 1.0;
      b[i] = 2.0 * unif(gen) - 1.0;
    }
    const auto f = [&](const Vec& x) { return cond_logpost_global(x, st, data, hp); };
    CHECK(f((a + b) / 2) >= 0.5 * (f(a) + f(b)) - 1e-9);
  }
}

TEST_CASE("induced coefficient covariance") {
  const Vec d = d_schedule(3);
  const std::vector<double> zeta{1.5, 2.0};
  const double tau = 0.8;
  const Mat cov = induced_coefficient_covariance(tau, zeta, d);
  const int L = 2, B = 3;
  REQUIRE(cov.rows() == L * B);

  SUBCASE("entry cases") {
    const double t2 = tau * tau;
    for (int b = 0; b < B; ++b) {
      for (int bp = 0; bp < B; ++bp) {
        for (int l = 0; l < L; ++l) {
          for (int lp = 0; lp < L; ++lp) {
            const double got = cov(b * L + l, bp * L + lp);
            if (b != bp) {
              CHECK(got == 0.0);
            } else if (l != lp) {
              CHECK(got == doctest::Approx(t2 * d[b]).epsilon(1e-14));
            } else {
              CHECK(got == doctest::Approx(t2 * d[b] * zeta[l] * zeta[l]).epsilon(1e-14));
            }
          }
        }
      }
    }
  }
  SUBCASE("equals the Kronecker form tau^2 D x (diag(zeta^2-1) + 11')") {
    Mat inner(L, L);
    for (int l = 0; l < L; ++l)
      for (int lp = 0; lp < L; ++lp)
        inner(l, lp) = 1.0 + (l == lp ? zeta[l] * zeta[l] - 1.0 : 0.0);
    Mat kron = Mat::Zero(L * B, L * B);
    for (int b = 0; b < B; ++b)
      kron.block(b * L, b * L, L, L) = tau * tau * d[b] * inner;
    CHECK((cov - kron).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("prior draws of combined coefficients match the induced covariance") {
  // Monte Carlo version at unit-test scale; the acceptance suite runs the
  // full-size check.
  const int L = 2, B = 3, N = 20000;
  const Vec d = d_schedule(B);
  const double tau = 1.3;
  const std::vector<double> zeta{1.4, 2.2};
  const Mat expected = induced_coefficient_covariance(tau, zeta, d);

  std::mt19937 gen(321);
  std::normal_distribution<double> norm;
  Mat sum = Mat::Zero(L * B, L * B);
  Vec draw(L * B);
  for (int i = 0; i < N; ++i) {
    for (int b = 0; b < B; ++b) {
      const double glob = norm(gen) * tau * std::sqrt(d[b]);
      for (int l = 0; l < L; ++l) {
        const double loc = norm(gen) * tau * std::sqrt(d[b] * (zeta[l] * zeta[l] - 1.0));
        draw[b * L + l] = glob + loc;
      }
    }
    sum += draw * draw.transpose();
  }
  const Mat emp = sum / N;
  for (int i = 0; i < L * B; ++i) {
    for (int j = 0; j < L * B; ++j) {
      const double se = std::sqrt((expected(i, i) * expected(j, j) +
                                   expected(i, j) * expected(i, j)) /
                                  N);
      CHECK(std::abs(emp(i, j) - expected(i, j)) < 4.0 * se + 1e-12);
    }
  }
}
