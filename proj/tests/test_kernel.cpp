#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "json.hpp"
#include "qlat/duhamel.hpp"
#include "qlat/error.hpp"
#include "qlat/kernel.hpp"
#include "qlat/quadrature.hpp"

using namespace qlat;

namespace {

GridSpec grid(double L, int n, Stencil s = Stencil::sineDvr) {
  GridSpec g;
  g.L = L;
  g.n = n;
  g.stencil = s;
  return g;
}

InteractionSpec site_only(SitePotentialSpec a) { return {a, PairCouplingSpec::zero(), 1, 1.0}; }

double sup_on_mask(const KernelField& kf, const std::function<double(std::size_t, std::size_t)>& f) {
  double s = 0.0;
  for (Eigen::Index J = 0; J < kf.psi.cols(); ++J)
    for (Eigen::Index I = 0; I < kf.psi.rows(); ++I)
      if (kf.mask(I, J)) s = std::max(s, std::abs(f(static_cast<std::size_t>(I), static_cast<std::size_t>(J))));
  return s;
}

}  // namespace

TEST_CASE("free and constant kernels give flat psi") {
  GridSpec g = grid(8.0, 128);
  auto kf = spectral_kernel(site_only(SitePotentialSpec::zero()), Box::interval(0, 0), g, 0.1);
  CHECK(kf.mask.count() > 1000);
  CHECK(sup_on_mask(kf, [&](auto I, auto J) { return kf.psi(I, J); }) <= 1e-5);
  // Free kernel against the closed-form Gaussian.
  CHECK(sup_on_mask(kf, [&](auto I, auto J) {
          return kf.U(I, J) / free_kernel(kf.coords(I), kf.coords(J), 0.1, 1.0) - 1.0;
        }) <= 1e-3);
  auto kc = spectral_kernel(site_only(SitePotentialSpec::constant(0.8)), Box::interval(0, 0), g, 0.1);
  CHECK(sup_on_mask(kc, [&](auto I, auto J) { return kc.psi(I, J) - 0.08; }) <= 1e-5);
}

TEST_CASE("linear and harmonic oracles") {
  GridSpec g = grid(8.0, 128);
  auto kl = spectral_kernel(site_only(SitePotentialSpec::linear(0.5)), Box::interval(0, 0), g, 0.1);
  CHECK(sup_on_mask(kl, [&](auto I, auto J) {
          return kl.psi(I, J) - linear_psi(kl.coords(I)[0], kl.coords(J)[0], 0.5, 0.1, 1.0);
        }) <= 1e-4);
  auto kh = spectral_kernel(site_only(SitePotentialSpec::harmonic(1.0)), Box::interval(0, 0), g, 0.1);
  double scale = sup_on_mask(kh, [&](auto I, auto J) { return mehler_psi(kh.coords(I)[0], kh.coords(J)[0], 1, 0.1, 1); });
  double err = sup_on_mask(kh, [&](auto I, auto J) {
    return kh.psi(I, J) - mehler_psi(kh.coords(I)[0], kh.coords(J)[0], 1.0, 0.1, 1.0);
  });
  CHECK(err <= 1e-3 * scale);
  // Mehler closed form reduces to the free kernel as omega -> 0.
  CHECK(mehler_kernel(0.3, -0.2, 1e-5, 0.4, 1.0) == doctest::Approx(free_kernel({0.3}, {-0.2}, 0.4, 1.0)).epsilon(1e-8));
}

TEST_CASE("kernel field properties") {
  GridSpec g = grid(3.0, 15);
  InteractionSpec spec{SitePotentialSpec::pseudo_linear_well(1.0), PairCouplingSpec::cosine_diff(0.3, 0.2), 1, 1.0};
  auto kf = spectral_kernel(spec, Box::interval(0, 1), g, 0.4);
  const double th2 = 0.4;
  double recon = 0, sym = 0;
  for (Eigen::Index J = 0; J < kf.psi.cols(); ++J)
    for (Eigen::Index I = 0; I < kf.psi.rows(); ++I) {
      if (!kf.mask(I, J)) continue;
      auto x = kf.coords(static_cast<std::size_t>(I)), y = kf.coords(static_cast<std::size_t>(J));
      const double r2 = (x[0] - y[0]) * (x[0] - y[0]) + (x[1] - y[1]) * (x[1] - y[1]);
      const double Ur = std::pow(2 * std::numbers::pi * th2, -1.0) * std::exp(-r2 / (2 * th2)) * std::exp(-kf.psi(I, J));
      recon = std::max(recon, std::abs(Ur - kf.U(I, J)) / kf.U(I, J));
      REQUIRE(kf.mask(J, I));
      sym = std::max(sym, std::abs(kf.psi(I, J) - kf.psi(J, I)));
    }
  CHECK(recon <= 1e-10);
  CHECK(sym <= 1e-8);
  CHECK((kf.U - kf.U.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * kf.U.maxCoeff());

  // Decoupled two-site kernel factorises into single-site kernels.
  InteractionSpec dec{SitePotentialSpec::pseudo_linear_well(1.0), PairCouplingSpec::zero(), 1, 1.0};
  auto k2 = spectral_kernel(dec, Box::interval(0, 1), g, 0.4);
  auto k1 = spectral_kernel(dec, Box::interval(0, 0), g, 0.4);
  double fac = 0;
  const int n = g.n;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d)
          fac = std::max(fac, std::abs(k2.U(a * n + b, c * n + d) - k1.U(a, c) * k1.U(b, d)));
  CHECK(fac <= 1e-10 * k2.U.maxCoeff());
}

TEST_CASE("kernel from operator scaling and errors") {
  LatticeOperator op;
  op.kind = LatticeOperator::Kind::dense;
  op.dim = 4;
  op.sites = 1;
  op.n = 4;
  op.t = 0.1;
  op.matrix = Eigen::MatrixXd::Identity(4, 4) * 0.5;
  GridSpec g = grid(1.5, 4);  // dx = 1
  auto kf = kernel_from_operator(op, g, 1);
  CHECK((kf.U - op.matrix).cwiseAbs().maxCoeff() == 0.0);
  GridSpec g2 = grid(0.75, 4);  // dx = 1/2
  CHECK(kernel_from_operator(op, g2, 1).U(0, 0) == doctest::Approx(2 * 0.5));
  LatticeOperator sp;
  sp.kind = LatticeOperator::Kind::kroneckerSum;
  CHECK_THROWS_WITH_AS(kernel_from_operator(sp, g, 1), "kernel extraction requires dense", Error);
  KernelField z = kf;
  z.U.setZero();
  CHECK_THROWS_WITH_AS(extract_psi(z), "kernel underflow", Error);
}

TEST_CASE("gaussian propagator") {
  std::vector<double> x{0.7}, y{-0.4};
  const double t = 0.5, s = 0.2, h = 1.1;
  double mass = 0;
  for (double xp = -15; xp <= 15; xp += 1e-3) mass += 1e-3 * gaussian_propagator(x, {xp}, y, s, t, h);
  CHECK(std::abs(mass - 1.0) <= 1e-6);
  CHECK(propagator_a(t / 2, t) == doctest::Approx(4 / t));
  // Mass concentrates at x as s -> t.
  const double near = gaussian_propagator(x, x, y, t * (1 - 1e-6), t, h);
  CHECK(near > 100);
  CHECK_THROWS_AS(gaussian_propagator(x, x, y, 0.0, t, h), Error);
  CHECK_THROWS_AS(gaussian_propagator(x, x, y, t, t, h), Error);
  // The smoothing matrix reproduces the propagator integral on smooth data.
  GridSpec g = grid(6.0, 121);
  Eigen::MatrixXd M = gaussian_smoothing_matrix(g, y[0], s, t, h, 20, 6);
  Eigen::VectorXd f(g.n);
  for (int i = 0; i < g.n; ++i) f(i) = std::cos(0.5 * g.x(i));
  Eigen::VectorXd Mf = M * f;
  const double sig2 = h * h * s * (t - s) / t;
  for (int i = 40; i < 80; ++i) {
    const double m = (1 - s / t) * y[0] + (s / t) * g.x(i);
    CHECK(Mf(i) == doctest::Approx(std::cos(0.5 * m) * std::exp(-0.125 * sig2)).epsilon(1e-8));
  }
}

TEST_CASE("maximum principle for the drift equation") {
  GridSpec g = grid(5.0, 81);
  const double y = 0.4, t0 = 0.05, t = 0.6, h = 1.0;
  Eigen::VectorXd u0(g.n);
  for (int i = 0; i < g.n; ++i) u0(i) = std::sin(1.3 * g.x(i)) * std::exp(-0.1 * g.x(i) * g.x(i));
  auto forcing = [&](double s) {
    Eigen::VectorXd f(g.n);
    for (int i = 0; i < g.n; ++i) f(i) = 0.7 * std::cos(g.x(i) - s);
    return f;
  };
  const auto& q = gauss_legendre01(32);
  Eigen::VectorXd u = gaussian_smoothing_matrix(g, y, t0, t, h, 20, 6) * u0;
  double fint = 0;
  for (Eigen::Index k = 0; k < q.x.size(); ++k) {
    const double s = t0 + (t - t0) * q.x(k);
    Eigen::VectorXd f = forcing(s);
    u += (t - t0) * q.w(k) * (gaussian_smoothing_matrix(g, y, s, t, h, 20, 6) * f);
    fint += (t - t0) * q.w(k) * f.cwiseAbs().maxCoeff();
  }
  double sup = 0;
  for (int i = 0; i < g.n; ++i)
    if (g.in_window(i)) sup = std::max(sup, std::abs(u(i)));
  CHECK(sup <= 1.05 * (u0.cwiseAbs().maxCoeff() + fint));
}

TEST_CASE("quadrature rules") {
  const auto& gl = gauss_legendre01(64);
  CHECK(gl.w.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK((gl.w.array() * gl.x.array().pow(7)).sum() == doctest::Approx(1.0 / 8).epsilon(1e-14));
  const auto& gh = gauss_hermite_normalized(20);
  CHECK(gh.w.sum() == doctest::Approx(1.0).epsilon(1e-13));
  CHECK((gh.w.array() * gh.x.array().square()).sum() == doctest::Approx(0.5).epsilon(1e-13));
}

TEST_CASE("duhamel solver against oracles") {
  SUBCASE("zero potential is a fixed point") {
    GridSpec g = grid(4.0, 21);
    auto r = duhamel_solve(site_only(SitePotentialSpec::zero()), Box::interval(0, 0), g, {10}, 0.3);
    CHECK(r.psi.cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.u[0].cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("linear potential closed form") {
    GridSpec g = grid(5.0, 41);
    const double k = 0.5, t = 0.3;
    auto r = duhamel_solve(site_only(SitePotentialSpec::linear(k)), Box::interval(0, 0), g, {22}, t);
    double e = 0, eu = 0;
    for (int i = 0; i < g.n; ++i) {
      if (!g.in_window(i)) continue;
      e = std::max(e, std::abs(r.psi(i) - linear_psi(g.x(i), g.x(22), k, t, 1.0)));
      eu = std::max(eu, std::abs(r.u[0](i) - k * t / 2));
    }
    CHECK(e <= 1e-5);
    CHECK(eu <= 1e-5);
  }
  SUBCASE("single-site well against the spectral kernel") {
    GridSpec g = grid(4.0, 33);
    const double t = 0.5;
    InteractionSpec spec = site_only(SitePotentialSpec::pseudo_linear_well(1.0));
    auto kf = spectral_kernel(spec, Box::interval(0, 0), g, t);
    auto r = duhamel_solve(spec, Box::interval(0, 0), g, {18}, t);
    double e = 0;
    for (int i = 0; i < g.n; ++i)
      if (kf.mask(i, 18)) e = std::max(e, std::abs(r.psi(i) - kf.psi(i, 18)));
    CHECK(e <= 1e-3);
  }
  SUBCASE("coupled pair against the spectral kernel") {
    GridSpec g = grid(4.0, 33);
    const double t = 0.5;
    InteractionSpec spec{SitePotentialSpec::pseudo_linear_well(1.0), PairCouplingSpec::cosine_diff(0.1, 0.2), 1, 1.0};
    auto kf = spectral_kernel(spec, Box::interval(0, 1), g, t);
    const std::vector<int> y{18, 14};
    const std::size_t J = kf.flat(y);
    auto r = duhamel_solve(spec, Box::interval(0, 1), g, y, t);
    double e = 0;
    for (std::size_t I = 0; I < kf.dim(); ++I)
      if (kf.mask(I, J)) e = std::max(e, std::abs(r.psi(I) - kf.psi(I, J)));
    MESSAGE("pair duhamel error " << e);
    CHECK(e <= 1e-3);
  }
  SUBCASE("errors") {
    GridSpec g = grid(4.0, 9);
    InteractionSpec spec{SitePotentialSpec::pseudo_linear_well(1.0), PairCouplingSpec::cosine_diff(0.1, 0.2), 1, 1.0};
    CHECK_THROWS_AS(duhamel_solve(spec, Box::interval(0, 2), g, {4, 4, 4}, 0.1), Error);
    CHECK_THROWS_WITH_AS(duhamel_solve(spec, Box::interval(0, 0), g, {4}, 5.0), "ht exceeds T0", Error);
  }
}

TEST_CASE("residual of the Cauchy problem") {
  GridSpec g = grid(8.0, 128);
  const double t = 0.1, dt = 1e-3 * t;
  for (auto a : {SitePotentialSpec::zero(), SitePotentialSpec::constant(0.8), SitePotentialSpec::linear(0.5)}) {
    InteractionSpec spec = site_only(a);
    auto H = build_hamiltonian(spec, Box::interval(0, 0), g);
    auto es = eigensystem(H);
    auto km = spectral_kernel(es, g, 1, t - dt, 1.0);
    auto k0 = spectral_kernel(es, g, 1, t, 1.0);
    auto kp = spectral_kernel(es, g, 1, t + dt, 1.0);
    auto rep = residual_check(km, k0, kp, [&](const double* x) { return a.value(x[0]); });
    CHECK(rep.points > 100);
    CHECK(rep.sup <= 1e-4);
  }
  GridSpec tiny = grid(1.0, 4);
  tiny.interiorMargin = 1;
  auto ka = spectral_kernel(site_only(SitePotentialSpec::zero()), Box::interval(0, 0), tiny, 0.49);
  auto kb = spectral_kernel(site_only(SitePotentialSpec::zero()), Box::interval(0, 0), tiny, 0.5);
  auto kc = spectral_kernel(site_only(SitePotentialSpec::zero()), Box::interval(0, 0), tiny, 0.51);
  CHECK_THROWS_WITH_AS(residual_check(ka, kb, kc, [](const double*) { return 0.0; }), "window too small for stencil",
                       Error);
}

TEST_CASE("weighted norms") {
  GridSpec g = grid(3.0, 15);
  InteractionSpec dec{SitePotentialSpec::pseudo_linear_well(1.0), PairCouplingSpec::zero(), 1, 1.0};
  auto kf = spectral_kernel(dec, Box::interval(0, 1), g, 0.4);
  SiteSet s = Box::interval(0, 1).sites();
  // Mixed derivative of a sum of single-site functions vanishes up to roundoff.
  double mixed = 0;
  for (Eigen::Index J = 0; J < kf.psi.cols(); ++J)
    for (Eigen::Index I = 0; I < kf.psi.rows(); ++I) {
      if (!kf.mask(I, J)) continue;
      auto d = psi_derivative(kf, static_cast<std::size_t>(I), static_cast<std::size_t>(J), {1, 1, 0, 0});
      if (d) mixed = std::max(mixed, std::abs(*d));
    }
  CHECK(mixed <= 1e-6);

  KernelField zero = kf;
  for (Eigen::Index J = 0; J < zero.psi.cols(); ++J)
    for (Eigen::Index I = 0; I < zero.psi.rows(); ++I)
      if (zero.mask(I, J)) zero.psi(I, J) = 0.0;
  for (int m = 1; m <= 3; ++m) {
    NormOptions o;
    o.m = m;
    CHECK(weighted_norms(zero, s, o) == 0.0);
  }
  NormOptions bad;
  bad.m = 4;
  CHECK_THROWS_AS(weighted_norms(kf, s, bad), Error);

  // Analytic field psi = x0^2 x1 / 2: d0 d0 d1 psi = 1 exactly for the stencils used.
  KernelField poly = kf;
  for (Eigen::Index J = 0; J < poly.psi.cols(); ++J)
    for (Eigen::Index I = 0; I < poly.psi.rows(); ++I) {
      auto x = poly.coords(static_cast<std::size_t>(I));
      poly.psi(I, J) = 0.5 * x[0] * x[0] * x[1];
      poly.mask(I, J) = true;
    }
  NormOptions inf;
  inf.m = 3;
  inf.infinity = true;
  inf.eps = 0.5;
  CHECK(weighted_norms(poly, s, inf) == doctest::Approx(2.0).epsilon(1e-9));  // 1 / eps^1
}

TEST_CASE("translation differences") {
  GridSpec g = grid(3.0, 13);
  InteractionSpec dec{SitePotentialSpec::pseudo_linear_well(1.0), PairCouplingSpec::zero(), 1, 1.0};
  auto kf = spectral_kernel(dec, Box::interval(0, 1), g, 0.4);
  auto z = translate_difference(kf, kf.psi, {0, 0});
  double m = 0;
  for (Eigen::Index k = 0; k < z.size(); ++k)
    if (!std::isnan(z(k))) m = std::max(m, std::abs(z(k)));
  CHECK(m == 0.0);

  // f linear in x + y: S_u f is constant.
  Eigen::MatrixXd f(kf.psi.rows(), kf.psi.cols());
  for (Eigen::Index J = 0; J < f.cols(); ++J)
    for (Eigen::Index I = 0; I < f.rows(); ++I) {
      auto x = kf.coords(static_cast<std::size_t>(I)), y = kf.coords(static_cast<std::size_t>(J));
      f(I, J) = 0.3 * (x[0] + y[0]) - 0.7 * (x[1] + y[1]);
    }
  auto sf = translate_difference(kf, f, {1, -2});
  const double expect = 0.3 * 2 * g.dx() + 0.7 * 2 * 2 * g.dx();
  for (Eigen::Index k = 0; k < sf.size(); ++k)
    if (!std::isnan(sf(k))) CHECK(sf(k) == doctest::Approx(expect).epsilon(1e-12));

  // Disjoint shifts on a decoupled system: S_u S_v psi = 0.
  auto sv = translate_difference(kf, kf.psi, {0, 1});
  auto suv = translate_difference(kf, sv, {1, 0});
  double worst = 0;
  std::size_t count = 0;
  for (Eigen::Index k = 0; k < suv.size(); ++k)
    if (!std::isnan(suv(k))) {
      worst = std::max(worst, std::abs(suv(k)));
      ++count;
    }
  CHECK(count > 0);
  CHECK(worst <= 1e-7);
  CHECK(shift_in_steps(g, {0.5, -1.0}) == std::vector<int>{1, -2});
  CHECK_THROWS_AS(shift_in_steps(g, {0.3, 0.0}), Error);
}

TEST_CASE("kernel csv round trip") {
  GridSpec g = grid(2.0, 7);
  auto kf = spectral_kernel(site_only(SitePotentialSpec::zero()), Box::interval(0, 0), g, 0.2);
  auto dir = std::filesystem::temp_directory_path() / "qlat_kernel_io";
  std::filesystem::create_directories(dir);
  write_kernel_csv(kf, (dir / "k.csv").string(), (dir / "k.json").string(), Box::interval(0, 0).sites());
  std::ifstream in(dir / "k.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "x_index,y_index,U,psi,mask");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 49);
  auto j = nlohmann::json::parse(std::ifstream(dir / "k.json"));
  CHECK(j["t"].get<double>() == 0.2);
  CHECK(j["grid"]["n"].get<int>() == 7);
}
