#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "qlat/decomposition.hpp"
#include "qlat/error.hpp"

using namespace qlat;

namespace {

GridSpec grid(double L, int n, double window = 0.6) {
  GridSpec g;
  g.L = L;
  g.n = n;
  g.windowFraction = window;
  return g;
}

FieldConfig config(const Box& lambda, std::vector<double> v) { return {lambda.sites(), std::move(v)}; }

// Random cubic polynomial in three variables.
struct Cubic {
  std::vector<double> c;
  explicit Cubic(unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    c.resize(64);
    for (auto& v : c) v = u(rng);
  }
  double operator()(const FieldConfig& x) const {
    double s = 0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int d = 0; d < 4; ++d)
          if (a + b + d <= 3)
            s += c[static_cast<std::size_t>(16 * a + 4 * b + d)] * std::pow(x.values[0], a) *
                 std::pow(x.values[1], b) * std::pow(x.values[2], d);
    return s;
  }
};

double sup_abs(const Eigen::MatrixXd& m) {
  double s = 0;
  for (Eigen::Index k = 0; k < m.size(); ++k)
    if (!std::isnan(m(k))) s = std::max(s, std::abs(m(k)));
  return s;
}

}  // namespace

TEST_CASE("single-variable T_Q") {
  const Box lam = Box::interval(0, 1);
  FieldFunction f = [](const FieldConfig& x) { return x.values[0] * x.values[1]; };
  auto x = config(lam, {1.3, -0.7});
  CHECK(t_q_single(f, Box::interval(0, 0), x) == 0.0);
  CHECK(t_q_single(f, Box::interval(1, 1), x) == 0.0);
  CHECK(t_q_single(f, lam, x) == doctest::Approx(1.3 * -0.7).epsilon(1e-15));

  const Box lam3 = Box::interval(0, 2);
  FieldFunction g = [](const FieldConfig& y) { return std::sin(y.values[0]) + y.values[0] * y.values[0]; };
  auto x3 = config(lam3, {0.4, 1.1, -2.0});
  for (const auto& q : enumerate_boxes(lam3, 2))
    if (!q.contains(Site{0}) && q.diam() >= 1) CHECK(t_q_single(g, q, x3) == 0.0);

  Cubic c(7);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  FieldFunction cf = [&](const FieldConfig& y) { return c(y); };
  const auto zero = config(lam3, {0, 0, 0});
  for (int trial = 0; trial < 50; ++trial) {
    auto p = config(lam3, {u(rng), u(rng), u(rng)});
    double sum = 0;
    for (const auto& q : enumerate_boxes(lam3, 2)) sum += t_q_single(cf, q, p);
    CHECK(std::abs(sum - (c(p) - c(zero))) <= 1e-12);
  }
}

TEST_CASE("gradient of T_Q f is controlled by the gradient of f") {
  const Box lam = Box::interval(0, 2);
  Cubic c(11);
  FieldFunction cf = [&](const FieldConfig& y) { return c(y); };
  const double step = 1e-5;
  auto grad = [&](const FieldFunction& f, FieldConfig x, std::size_t l) {
    x.values[l] += step;
    const double a = f(x);
    x.values[l] -= 2 * step;
    return (a - f(x)) / (2 * step);
  };
  for (std::size_t l = 0; l < 3; ++l) {
    double supF = 0;
    for (double a = -1; a <= 1.0001; a += 0.1)
      for (double b = -1; b <= 1.0001; b += 0.1)
        for (double d = -1; d <= 1.0001; d += 0.1) supF = std::max(supF, std::abs(grad(cf, config(lam, {a, b, d}), l)));
    for (const auto& q : enumerate_boxes(lam, 2)) {
      FieldFunction tq = [&](const FieldConfig& y) { return t_q_single(cf, q, y); };
      double supT = 0;
      for (double a = -1; a <= 1.0001; a += 0.25)
        for (double b = -1; b <= 1.0001; b += 0.25)
          for (double d = -1; d <= 1.0001; d += 0.25) supT = std::max(supT, std::abs(grad(tq, config(lam, {a, b, d}), l)));
      CHECK(supT <= 4.0 * supF * 1.05);
    }
  }
}

TEST_CASE("segment average") {
  CHECK(segment_average(SitePotentialSpec::constant(2.5), 1.0, -3.0) == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(segment_average(SitePotentialSpec::linear(0.5), 1.2, -0.4) == doctest::Approx(0.5 * 0.8 / 2).epsilon(1e-14));
  const double exact = 0.25 * (2 * std::sqrt(5.0) + std::asinh(2.0));
  CHECK(segment_average(SitePotentialSpec::pseudo_linear_well(1.0), 0.0, 2.0) == doctest::Approx(exact).epsilon(1e-14));
}

TEST_CASE("doubled T_Q on extracted kernels") {
  const Box lam = Box::interval(0, 2);
  GridSpec g = grid(2.5, 11);
  const double t = 0.3;
  InteractionSpec dec{SitePotentialSpec::pseudo_linear_well(1.0), PairCouplingSpec::zero(), 1, 1.0};
  InteractionSpec cpl{SitePotentialSpec::pseudo_linear_well(1.0), PairCouplingSpec::cosine_diff(0.1, 0.2), 1, 1.0};

  SUBCASE("telescoping and decoupled control") {
    for (const auto& spec : {dec, cpl}) {
      auto kf = spectral_kernel(spec, lam, g, t);
      auto terms = decompose(kf, lam, 2);
      auto gauge = decomposition_gauge(kf);
      Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(kf.psi.rows(), kf.psi.cols());
      for (const auto& tm : terms) sum += tm.values;
      double err = 0;
      std::size_t cnt = 0;
      for (Eigen::Index k = 0; k < sum.size(); ++k) {
        if (std::isnan(sum(k))) continue;
        err = std::max(err, std::abs(sum(k) - (kf.psi(k) - gauge(k))));
        ++cnt;
      }
      CHECK(cnt > 1000);
      CHECK(err <= 1e-10);
      if (spec.pair.vanishes())
        for (const auto& tm : terms)
          if (tm.diam >= 1) CHECK(tm.supNorm <= 1e-8);
    }
  }

  SUBCASE("support on the diagonal") {
    auto kf = spectral_kernel(cpl, lam, g, t);
    auto tm = t_q_doubled(kf, lam, Box::interval(0, 1), true);
    const int n = g.n;
    double worst = 0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        double ref = std::nan("");
        for (int c = 0; c < n; ++c) {
          const auto I = static_cast<Eigen::Index>(kf.flat({a, b, c}));
          const double v = tm.values(I, I);
          if (std::isnan(v)) continue;
          if (std::isnan(ref)) ref = v;
          worst = std::max(worst, std::abs(v - ref));
        }
      }
    CHECK(worst <= 1e-10);
  }

  SUBCASE("point terms follow the segment average") {
    std::vector<double> ratio;
    for (double tt : {0.1, 0.2, 0.4}) {
      auto kf = spectral_kernel(cpl, lam, g, tt);
      auto tm = t_q_doubled(kf, lam, Box::interval(1, 1));
      const int o = g.origin_index();
      double dev = 0;
      for (Eigen::Index J = 0; J < tm.values.cols(); ++J)
        for (Eigen::Index I = 0; I < tm.values.rows(); ++I) {
          const double v = tm.values(I, J);
          if (std::isnan(v)) continue;
          const int i = kf.index(static_cast<std::size_t>(I))[1], j = kf.index(static_cast<std::size_t>(J))[1];
          const double x = g.x(i), y = g.x(j), yd = g.x(o + j - i);
          const double a = tt * (segment_average(cpl.site, x, y) - segment_average(cpl.site, 0.0, yd));
          dev = std::max(dev, std::abs(v - a));
        }
      ratio.push_back(dev / (tt + tt * tt));
    }
    MESSAGE("point-term ratios " << ratio[0] << " " << ratio[1] << " " << ratio[2]);
    CHECK(ratio[2] <= 2.0 * ratio[0]);
  }

  SUBCASE("decay in the box diameter") {
    auto kf = spectral_kernel(cpl, lam, g, t);
    auto prof = decay_profile(decompose(kf, lam, 2), 0.2);
    REQUIRE(prof.rows.size() == 3);
    MESSAGE("sup norms " << prof.rows[0].supNorm << " " << prof.rows[1].supNorm << " " << prof.rows[2].supNorm);
    CHECK(prof.rows[2].supNorm / prof.rows[1].supNorm <= 0.5);
    CHECK_FALSE(prof.violation);
    CHECK(prof.rows[1].boxes == 2);

    InteractionSpec half = cpl;
    half.pair.J = 0.05;
    auto ph = decay_profile(decompose(spectral_kernel(half, lam, g, t), lam, 2), 0.2);
    for (int r = 1; r <= 2; ++r) {
      const double q = prof.rows[static_cast<std::size_t>(r)].supNorm / ph.rows[static_cast<std::size_t>(r)].supNorm;
      CHECK(q == doctest::Approx(2.0).epsilon(0.2));
    }
    auto pd = decay_profile(decompose(spectral_kernel(dec, lam, g, t), lam, 2), 0.2);
    CHECK(pd.rows[1].normalized <= 1e-6);
    CHECK(pd.rows[2].normalized <= 1e-6);

    auto dir = std::filesystem::temp_directory_path() / "qlat_decay.csv";
    write_decay_csv(prof, dir.string());
    std::ifstream in(dir);
    std::string header;
    std::getline(in, header);
    CHECK(header == "diam,supnorm,normalized,boxesCounted");
  }

  SUBCASE("grid without origin") {
    GridSpec even = grid(2.5, 10);
    auto kf = spectral_kernel(dec, Box::interval(0, 0), even, t);
    CHECK_THROWS_WITH_AS(t_q_doubled(kf, Box::interval(0, 0), Box::interval(0, 0)), "grid must contain origin", Error);
  }
}

TEST_CASE("translation differences decay with the distance between supports") {
  const Box lam = Box::interval(0, 3);
  GridSpec g = grid(1.5, 7, 0.8);
  InteractionSpec cpl{SitePotentialSpec::pseudo_linear_well(1.0), PairCouplingSpec::cosine_diff(0.1, 0.2), 1, 1.0};
  auto kf = spectral_kernel(cpl, lam, g, 0.3);
  std::vector<double> sup;
  for (int r = 1; r <= 3; ++r) {
    std::vector<int> v(4, 0);
    v[static_cast<std::size_t>(r)] = 1;
    auto sv = translate_difference(kf, kf.psi, v);
    auto suv = translate_difference(kf, sv, {1, 0, 0, 0});
    sup.push_back(sup_abs(suv));
  }
  MESSAGE("S_u S_v sups " << sup[0] << " " << sup[1] << " " << sup[2]);
  CHECK(sup[1] <= 0.5 * sup[0]);
  CHECK(sup[2] <= 0.5 * sup[1]);
}

TEST_CASE("splitting check") {
  GridSpec g = grid(2.5, 49);
  SUBCASE("single-site linear defect is the semiclassical term") {
    InteractionSpec lin{SitePotentialSpec::linear(0.5), PairCouplingSpec::zero(), 1, 1.0};
    for (double t : {0.05, 0.1, 0.2}) {
      auto r = splitting_check(lin, Box::interval(0, 0), {Site{0}}, grid(4.0, 128), t);
      CHECK(std::abs(r.defect - 0.25 * t * t * t / 24) <= 1e-5);
    }
  }
  SUBCASE("decoupled pair") {
    InteractionSpec dec{SitePotentialSpec::pseudo_linear_well(1.0), PairCouplingSpec::zero(), 1, 1.0};
    auto r = splitting_check(dec, Box::interval(0, 1), {Site{0}}, g, 0.05);
    CHECK(r.defect <= 1e-3);
    CHECK(r.scale == doctest::Approx(0.05 + 0.0025));
  }
  SUBCASE("coupled pair defect vanishes at least linearly") {
    InteractionSpec cpl{SitePotentialSpec::pseudo_linear_well(1.0), PairCouplingSpec::cosine_diff(0.1, 0.2), 1, 1.0};
    SplittingExperiment ex(cpl, Box::interval(0, 1), {Site{0}}, g);
    std::vector<double> lt, ld;
    for (double t : {0.05, 0.1, 0.2}) {
      auto r = ex.check(t);
      lt.push_back(std::log(t));
      ld.push_back(std::log(r.defect));
    }
    const double slope = ((ld[2] - ld[0]) / (lt[2] - lt[0]));
    MESSAGE("splitting slope " << slope);
    CHECK(slope >= 0.9);
  }
}
