#include <cmath>
#include <random>

#include "doctest.h"
#include "qlat/error.hpp"
#include "qlat/thermo.hpp"

using namespace qlat;

namespace {

GridSpec grid(double L, int n, Stencil st = Stencil::sineDvr) {
  GridSpec g;
  g.L = L;
  g.n = n;
  g.stencil = st;
  return g;
}

InteractionSpec chain(double J, double eps = 0.2) {
  return {SitePotentialSpec::pseudo_linear_well(1.0), PairCouplingSpec::cosine_diff(J, eps), 1, 1.0};
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

// Embeds a one-site operator at position p of an N-site register.
Eigen::MatrixXd embed(const Eigen::MatrixXd& a, std::size_t p, std::size_t N) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(1, 1);
  for (std::size_t s = 0; s < N; ++s) out = kron(out, s == p ? a : Eigen::MatrixXd::Identity(n, n));
  return out;
}

Eigen::MatrixXd expm_sym(const Eigen::MatrixXd& H, double t) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  const double e0 = es.eigenvalues().minCoeff();
  Eigen::VectorXd w = (-t * (es.eigenvalues().array() - e0)).exp().matrix();
  return es.eigenvectors() * w.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd random_symmetric(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = g(rng);
  return 0.5 * (m + m.transpose());
}

Eigen::VectorXd random_vector(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

}  // namespace

TEST_CASE("observable norms and sizes") {
  const GridSpec g = grid(3.0, 9);
  Observable a = Observable::multiplication({Site{0}}, g, [](const double* x) { return std::tanh(x[0]); });
  CHECK(a.local_dim() == 9);
  CHECK(a.opNorm == doctest::Approx(std::tanh(3.0)).epsilon(1e-12));
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(9, 9);
  m(0, 1) = m(1, 0) = 2.0;
  Observable d = Observable::dense({Site{1}}, 9, m);
  CHECK(d.opNorm == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_WITH(Observable::multiplication({Site{0}}, 9, Eigen::VectorXd::Zero(8)),
                    "observable size does not match its support");
  CHECK_THROWS_WITH(disjoint_product(a, a), "overlapping supports");
  Observable p = disjoint_product(a, d);
  CHECK(p.support.size() == 2);
  CHECK(p.local_dim() == 81);
  CHECK((p.as_matrix() - kron(a.as_matrix(), m)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("gibbs means: identity, parity and ground state") {
  const GridSpec g = grid(4.0, 41);
  const InteractionSpec s = chain(0.0);
  const Box one = Box::interval(0, 0);
  LatticeOperator H = build_hamiltonian(s, one, g);
  Observable id = Observable::multiplication(one.sites(), g, [](const double*) { return 1.0; });
  Observable x = Observable::multiplication(one.sites(), g, [](const double* v) { return v[0]; });
  CHECK(gibbs_mean(H, one.sites(), id, 0.7) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(gibbs_mean(H, one.sites(), x, 0.7)) < 1e-10);

  Observable x2 = Observable::multiplication(one.sites(), g, [](const double* v) { return v[0] * v[0]; });
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H.to_dense());
  const Eigen::VectorXd v0 = es.eigenvectors().col(0);
  const double ground = v0.cwiseAbs2().dot(x2.values);
  const double gap = es.eigenvalues()(1) - es.eigenvalues()(0);
  const double t = 40.0 / gap;
  CHECK(gibbs_mean(H, one.sites(), x2, t) == doctest::Approx(ground).epsilon(1e-10));

  Observable off = Observable::multiplication({Site{3}}, g, [](const double*) { return 1.0; });
  CHECK_THROWS_WITH(gibbs_mean(H, one.sites(), off, 0.5), "support not contained in Lambda");
}

TEST_CASE("covariance matches brute-force trace arithmetic") {
  const GridSpec g = grid(3.0, 6);
  const Box lambda = Box::interval(0, 2);
  const double t = 0.4;
  LatticeOperator H = build_hamiltonian(chain(0.3, 0.4), lambda, g);
  const Eigen::MatrixXd rho = expm_sym(H.to_dense(), t);
  const double Z = rho.trace();
  GibbsState st = GibbsState::dense(H, lambda.sites(), t);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd a = random_vector(6, rng), b = random_vector(6, rng);
    const Eigen::MatrixXd ma = random_symmetric(6, rng);
    Observable A = Observable::multiplication({Site{0}}, 6, a);
    Observable B = Observable::multiplication({Site{2}}, 6, b);
    Observable D = Observable::dense({Site{1}}, 6, ma);
    const Eigen::MatrixXd EA = embed(A.as_matrix(), 0, 3), EB = embed(B.as_matrix(), 2, 3), ED = embed(ma, 1, 3);
    const double oracleAB = (rho * EA * EB).trace() / Z - (rho * EA).trace() * (rho * EB).trace() / (Z * Z);
    const double oracleDB = (rho * ED * EB).trace() / Z - (rho * ED).trace() * (rho * EB).trace() / (Z * Z);
    CHECK(std::abs(st.covariance(A, B) - oracleAB) < 1e-12);
    CHECK(std::abs(st.covariance(D, B) - oracleDB) < 1e-12);
    CHECK(std::abs(st.mean(D) - (rho * ED).trace() / Z) < 1e-12);
  }
}

TEST_CASE("covariance equals the doubled-space trace") {
  // Cov(A,B) = Tr[(rho x rho)(A' - A'')(B' - B'')] / (2 Z^2) with literal tensor products.
  const GridSpec g = grid(2.5, 5);
  const Box lambda = Box::interval(0, 1);
  const double t = 0.5;
  LatticeOperator H = build_hamiltonian(chain(0.4, 0.5), lambda, g);
  const Eigen::MatrixXd rho = expm_sym(H.to_dense(), t);
  const double Z = rho.trace();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(rho.rows(), rho.cols());
  const Eigen::MatrixXd rr = kron(rho, rho);
  GibbsState st = GibbsState::dense(H, lambda.sites(), t);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 4; ++trial) {
    Observable A = Observable::dense({Site{0}}, 5, random_symmetric(5, rng));
    Observable B = Observable::multiplication({Site{1}}, 5, random_vector(5, rng));
    const Eigen::MatrixXd EA = embed(A.as_matrix(), 0, 2), EB = embed(B.as_matrix(), 1, 2);
    const Eigen::MatrixXd dA = kron(EA, I) - kron(I, EA), dB = kron(EB, I) - kron(I, EB);
    const double doubled = (rr * dA * dB).trace() / (2.0 * Z * Z);
    CHECK(std::abs(st.covariance(A, B) - doubled) < 1e-12);
  }
}

TEST_CASE("covariance properties") {
  const GridSpec g = grid(3.0, 8);
  const Box lambda = Box::interval(0, 2);
  std::mt19937_64 rng(3);
  SUBCASE("decoupled chain has zero covariance") {
    LatticeOperator H = build_hamiltonian(chain(0.0), lambda, g);
    GibbsState st = GibbsState::dense(H, lambda.sites(), 0.3);
    for (int k = 0; k < 5; ++k) {
      Observable A = Observable::multiplication({Site{0}}, 8, random_vector(8, rng));
      Observable B = Observable::dense({Site{1}}, 8, random_symmetric(8, rng));
      CHECK(std::abs(st.covariance(A, B)) < 1e-12);
    }
  }
  SUBCASE("symmetry and the bound 2|A||B|") {
    LatticeOperator H = build_hamiltonian(chain(0.5, 0.6), lambda, g);
    GibbsState st = GibbsState::dense(H, lambda.sites(), 0.8);
    for (int k = 0; k < 10; ++k) {
      Observable A = Observable::multiplication({Site{0}}, 8, random_vector(8, rng));
      Observable B = Observable::multiplication({Site{2}}, 8, random_vector(8, rng));
      Observable C = Observable::dense({Site{1}}, 8, random_symmetric(8, rng));
      CHECK(std::abs(st.covariance(A, B) - st.covariance(B, A)) < 1e-14);
      CHECK(std::abs(st.covariance(A, B)) <= 2.0 * A.opNorm * B.opNorm);
      CHECK(std::abs(st.covariance(C, B)) <= 2.0 * C.opNorm * B.opNorm);
    }
    Observable A = Observable::multiplication({Site{0}}, 8, random_vector(8, rng));
    CHECK_THROWS_WITH(st.covariance(A, A), "overlapping supports");
  }
}

TEST_CASE("probed diagonal matches the dense state") {
  const GridSpec g = grid(3.0, 10, Stencil::central3);
  const Box lambda = Box::interval(0, 2);
  const double t = 0.2;
  LatticeOperator Hd = build_hamiltonian(chain(0.1), lambda, g);
  LatticeOperator Hs = build_hamiltonian(chain(0.1), lambda, g, {}, true);
  GibbsState dense = GibbsState::dense(Hd, lambda.sites(), t);
  ProbingParams pp;
  pp.tol = 1e-9;
  GibbsState probed = GibbsState::probed(Hs, lambda.sites(), t, pp);
  CHECK_FALSE(probed.full());
  Observable A = Observable::multiplication({Site{0}}, g, [](const double* x) { return std::tanh(x[0]); });
  Observable B = Observable::multiplication({Site{2}}, g, [](const double* x) { return std::tanh(x[0]); });
  CHECK(std::abs(probed.covariance(A, B) - dense.covariance(A, B)) < 1e-8);
  CHECK(probed.mean_energy() == doctest::Approx(dense.mean_energy()).epsilon(1e-8));
  CHECK(std::abs(probed.log_z() - dense.log_z()) < 1e-9);
  Observable D = Observable::dense({Site{1}}, 10, Eigen::MatrixXd::Identity(10, 10));
  CHECK_THROWS_WITH(probed.mean(D), "dense observable requires the full heat matrix");

  SUBCASE("decoupled chain uses the exact product diagonal") {
    LatticeOperator H0 = build_hamiltonian(chain(0.0), lambda, g, {}, true);
    LatticeOperator H0d = build_hamiltonian(chain(0.0), lambda, g);
    GibbsState p0 = GibbsState::probed(H0, lambda.sites(), t);
    GibbsState d0 = GibbsState::dense(H0d, lambda.sites(), t);
    CHECK((p0.heat_diagonal() / p0.trace() - d0.heat_diagonal() / d0.trace()).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(p0.mean_energy() == doctest::Approx(d0.mean_energy()).epsilon(1e-12));
  }
}

TEST_CASE("mean energy") {
  SUBCASE("single eigenvalue") {
    LatticeOperator H;
    H.kind = LatticeOperator::Kind::dense;
    H.dim = 1;
    H.sites = 1;
    H.n = 1;
    H.matrix = Eigen::MatrixXd::Constant(1, 1, 2.5);
    CHECK(mean_energy(H, 0.3).value == doctest::Approx(-2.5).epsilon(1e-14));
  }
  SUBCASE("central difference of ln Z") {
    const GridSpec g = grid(3.0, 9);
    const Box lambda = Box::interval(0, 2);
    LatticeOperator H = build_hamiltonian(chain(0.2), lambda, g);
    const double t = 0.4, dt = 1e-4;
    const double lp = GibbsState::dense(H, lambda.sites(), t + dt).log_z();
    const double lm = GibbsState::dense(H, lambda.sites(), t - dt).log_z();
    const double X = mean_energy(H, t).value;
    CHECK(std::abs(X - (lp - lm) / (2 * dt)) < 1e-6);
    CHECK(GibbsState::dense(H, lambda.sites(), t).mean_energy() == doctest::Approx(X).epsilon(1e-13));
  }
  SUBCASE("stochastic estimate at dimension 4096") {
    const GridSpec g = grid(4.0, 64, Stencil::central3);
    const Box lambda = Box::interval(0, 1);
    LatticeOperator Hd = build_hamiltonian(chain(0.1), lambda, g);
    LatticeOperator Hs = build_hamiltonian(chain(0.1), lambda, g, {}, true);
    REQUIRE(Hs.dim == 4096);
    const double t = 0.5;
    const double exact = mean_energy(Hd, t).value;
    HutchinsonParams hp;
    hp.kprobes = 32;
    TraceEstimate est = mean_energy(Hs, t, EnergyMethod::stochastic, hp);
    MESSAGE("dense " << exact << " stochastic " << est.value << " +- " << est.stderr_);
    CHECK(std::abs(est.value - exact) <= 0.05 * std::abs(exact));
    CHECK(est.stderr_ > 0);
  }
  CHECK_THROWS_WITH(mean_energy(LatticeOperator{}, 0.0), "mean energy requires t > 0");
}

TEST_CASE("decay fit") {
  std::vector<DecayRowCov> rows;
  for (int r = 1; r <= 4; ++r) rows.push_back({r, -3e-3 * std::pow(0.25, r)});
  DecayFit f = fit_decay(rows, 0.2);
  CHECK(f.status == "ok");
  CHECK(f.fittedDelta == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.monotone);
  CHECK(f.empiricalN[0] == doctest::Approx(3e-3 / 0.2).epsilon(1e-10));

  rows.push_back({5, 1e-16});
  rows.push_back({6, 2e-15});
  DecayFit g = fit_decay(rows, 0.2);
  CHECK(g.fittedDelta == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_FALSE(g.monotone);

  CHECK(fit_decay({{1, 1e-15}, {2, 0.0}}, 0.2).status == "signal underflow");
  CHECK(fit_decay({{1, 1e-3}, {2, 0.0}}, 0.2).status == "insufficient signal");
}

TEST_CASE("decay sweep") {
  const GridSpec g = grid(3.0, 10);
  SUBCASE("decoupled control") {
    DecayFit f = decay_sweep(chain(0.0), 3, 0.2, g);
    CHECK(f.status == "signal underflow");
    for (const auto& r : f.rows) CHECK(std::abs(r.cov) <= 1e-12);
  }
  SUBCASE("fitted delta grows with eps") {
    double prev = 0.0;
    for (double eps : {0.1, 0.2, 0.4}) {
      DecayFit f = decay_sweep(chain(0.1, eps), 3, 0.2, g);
      REQUIRE(f.status == "ok");
      MESSAGE("eps " << eps << " delta " << f.fittedDelta << " r2 " << f.r2);
      CHECK(f.monotone);
      CHECK(f.fittedDelta < 1.0);
      CHECK(f.fittedDelta > prev);
      prev = f.fittedDelta;
    }
  }
  CHECK_THROWS_WITH(decay_sweep(chain(0.1), 1, 0.2, g), "decay sweep needs at least two sites");
}

TEST_CASE("thermodynamic sweep") {
  const GridSpec g = grid(3.0, 7, Stencil::central3);
  ThermoSweepOptions opt;
  opt.probing.tol = 1e-9;
  SUBCASE("decoupled energy per site is exact") {
    auto rows = thermo_sweep(chain(0.0), {0, 1, 2}, 0.2, g, opt);
    REQUIRE(rows.size() == 3);
    CHECK(std::isnan(rows[0].splitDefect));
    for (const auto& r : rows) {
      CHECK(r.status == "ok");
      CHECK(std::abs(r.energyPerSite - rows[0].energyPerSite) < 1e-10);
      CHECK(std::abs(r.meanA - rows[0].meanA) < 1e-12);
    }
    CHECK(rows[1].splitDefect < 1e-10);
    CHECK(rows[2].splitDefect < 1e-10);
  }
  SUBCASE("coupled chain converges") {
    auto rows = thermo_sweep(chain(0.1), {0, 1, 2}, 0.2, g, opt);
    REQUIRE(rows.size() == 3);
    CHECK(rows[2].method == "probing");
    const double dA1 = std::abs(rows[1].meanA - rows[0].meanA), dA2 = std::abs(rows[2].meanA - rows[1].meanA);
    const double dE1 = std::abs(rows[1].energyPerSite - rows[0].energyPerSite);
    const double dE2 = std::abs(rows[2].energyPerSite - rows[1].energyPerSite);
    MESSAGE("mean differences " << dA1 << " " << dA2 << " energy differences " << dE1 << " " << dE2);
    CHECK(dA2 < 0.5 * dA1);
    CHECK(dE2 < dE1);
    CHECK(rows[2].splitDefect < 2.0 * rows[1].splitDefect);
  }
  SUBCASE("budget exhaustion truncates the table") {
    ThermoSweepOptions small = opt;
    small.budget.sparse = 400;
    auto rows = thermo_sweep(chain(0.1), {0, 1, 2, 3}, 0.2, g, small);
    REQUIRE(rows.size() == 3);
    CHECK(rows[1].status == "ok");
    CHECK(rows[2].status == "budget exceeded");
  }
}

TEST_CASE("theta interpolation") {
  const double t = 0.3;
  SUBCASE("decoupled potential is theta independent") {
    const GridSpec g = grid(2.5, 15);
    auto rows = theta_interpolation(chain(0.0), Box::interval(0, 0), Box::interval(1, 1), t, g, {0.0, 0.5, 1.0});
    for (const auto& r : rows) CHECK(r.supDtheta < 1e-8);
  }
  SUBCASE("full decoupling gives the product kernel") {
    const GridSpec g = grid(2.5, 15);
    const InteractionSpec s = chain(0.3, 0.5);
    KernelField k2 = theta_kernel(s, Box::interval(0, 0), Box::interval(1, 1), t, g, 1.0);
    KernelField k1 = spectral_kernel(s, Box::interval(0, 0), g, t);
    // Roundoff in U limits psi to about 1e-15 / (U / max U).
    const double umax = k2.U.maxCoeff();
    double errBulk = 0.0, errMask = 0.0;
    std::size_t count = 0;
    for (std::size_t I = 0; I < k2.dim(); ++I)
      for (std::size_t J = 0; J < k2.dim(); ++J) {
        const auto ei = static_cast<Eigen::Index>(I), ej = static_cast<Eigen::Index>(J);
        if (!k2.mask(ei, ej) || !k2.in_window(I) || !k2.in_window(J)) continue;
        const auto xi = k2.index(I), yi = k2.index(J);
        const double e = std::abs(k2.psi(ei, ej) - k1.psi(xi[0], yi[0]) - k1.psi(xi[1], yi[1]));
        errMask = std::max(errMask, e);
        if (k2.U(ei, ej) >= 1e-6 * umax) errBulk = std::max(errBulk, e);
        ++count;
      }
    CHECK(count > 0);
    CHECK(errBulk < 1e-8);
    CHECK(errMask < 1e-6);
  }
  SUBCASE("three sites: gradient decays away from the split") {
    const GridSpec g = grid(2.5, 11);
    auto rows = theta_interpolation(chain(0.1, 0.2), Box::interval(0, 0), Box::interval(1, 2), t, g, {0.5});
    REQUIRE(rows.size() == 1);
    const auto& r = rows[0];
    CHECK(r.distBySite == std::vector<int>{0, 0, 1});
    MESSAGE("grad by site " << r.gradBySite[0] << " " << r.gradBySite[1] << " " << r.gradBySite[2]);
    CHECK(r.gradBySite[2] <= 0.5 * std::min(r.gradBySite[0], r.gradBySite[1]));
  }
  const GridSpec g = grid(2.5, 9);
  CHECK_THROWS_WITH(theta_interpolation(chain(0.1), Box::interval(0, 0), Box::interval(2, 2), t, g, {0.5}),
                    "non-adjacent split");
  CHECK_THROWS_WITH(theta_kernel(chain(0.1), Box::interval(0, 1), Box::interval(1, 2), t, g, 0.5),
                    "non-adjacent split");
}
