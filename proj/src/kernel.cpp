#include "qlat/kernel.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>

#include "json.hpp"
#include "qlat/error.hpp"

namespace qlat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::vector<int> KernelField::index(std::size_t I) const {
  std::vector<int> idx(sites);
  for (std::size_t ax = sites; ax-- > 0;) {
    idx[ax] = static_cast<int>(I % static_cast<std::size_t>(grid.n));
    I /= static_cast<std::size_t>(grid.n);
  }
  return idx;
}

std::size_t KernelField::flat(const std::vector<int>& idx) const {
  std::size_t I = 0;
  for (int i : idx) I = I * static_cast<std::size_t>(grid.n) + static_cast<std::size_t>(i);
  return I;
}

std::vector<double> KernelField::coords(std::size_t I) const {
  std::vector<double> x;
  for (int i : index(I)) x.push_back(grid.x(i));
  return x;
}

bool KernelField::in_window(std::size_t I) const {
  for (int i : index(I))
    if (!grid.in_window(i)) return false;
  return true;
}

KernelField kernel_from_operator(const LatticeOperator& op, const GridSpec& grid, std::size_t sites) {
  if (!op.is_dense()) throw Error("kernel extraction requires dense");
  if (grid_dimension(grid.n, sites) != op.dim) throw Error("kernel grid does not match operator dimension");
  KernelField kf;
  kf.grid = grid;
  kf.sites = sites;
  kf.t = op.t;
  kf.h = op.h;
  kf.U = op.matrix / std::pow(grid.dx(), static_cast<double>(sites));
  return kf;
}

KernelField extract_psi(KernelField kf) {
  if (!(kf.t > 0) || !(kf.h > 0)) throw Error("kernel field needs t > 0 and h > 0");
  const Eigen::Index d = kf.U.rows();
  const double maxU = kf.U.maxCoeff();
  const double floor = std::max(kUnderflowFloor, kf.noiseFloor * maxU);
  const double th2 = kf.t * kf.h * kf.h;
  const double norm = 0.5 * static_cast<double>(kf.sites) * std::log(2.0 * std::numbers::pi * th2);
  std::vector<char> win(static_cast<std::size_t>(d));
  std::vector<std::vector<double>> xs(static_cast<std::size_t>(d));
  for (Eigen::Index I = 0; I < d; ++I) {
    win[static_cast<std::size_t>(I)] = kf.in_window(static_cast<std::size_t>(I));
    xs[static_cast<std::size_t>(I)] = kf.coords(static_cast<std::size_t>(I));
  }
  kf.mask = BoolMatrix::Constant(d, d, false);
  kf.psi = Eigen::MatrixXd::Constant(d, d, kNaN);
  bool any = false;
  for (Eigen::Index J = 0; J < d; ++J)
    for (Eigen::Index I = 0; I < d; ++I) {
      const double u = kf.U(I, J);
      if (!(u > kUnderflowFloor)) continue;
      any = true;
      if (!(u > floor) || !win[static_cast<std::size_t>(I)] || !win[static_cast<std::size_t>(J)]) continue;
      double r2 = 0.0;
      for (std::size_t k = 0; k < kf.sites; ++k) {
        const double dd = xs[static_cast<std::size_t>(I)][k] - xs[static_cast<std::size_t>(J)][k];
        r2 += dd * dd;
      }
      kf.mask(I, J) = true;
      kf.psi(I, J) = -std::log(u) - r2 / (2.0 * th2) - norm;
    }
  if (!any) throw Error("kernel underflow");
  return kf;
}

KernelField spectral_kernel(const Eigensystem& es, const GridSpec& grid, std::size_t sites, double t, double h) {
  LatticeOperator op;
  op.kind = LatticeOperator::Kind::dense;
  op.dim = static_cast<std::size_t>(es.values.size());
  op.sites = sites;
  op.n = grid.n;
  op.h = h;
  op.t = t;
  op.matrix = heat_matrix(es, t);
  return extract_psi(kernel_from_operator(op, grid, sites));
}

KernelField spectral_kernel(const InteractionSpec& spec, const Box& lambda, const GridSpec& grid, double t,
                            const Budget& budget) {
  LatticeOperator H = build_hamiltonian(spec, lambda, grid, budget);
  if (!H.is_dense()) throw BudgetError("kernel extraction requires dense", H.dim);
  return spectral_kernel(eigensystem(H), grid, H.sites, t, spec.h);
}

double free_kernel(const std::vector<double>& x, const std::vector<double>& y, double t, double h) {
  const double th2 = t * h * h;
  double r2 = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) r2 += (x[k] - y[k]) * (x[k] - y[k]);
  return std::pow(2.0 * std::numbers::pi * th2, -0.5 * static_cast<double>(x.size())) * std::exp(-r2 / (2.0 * th2));
}

double linear_psi(double x, double y, double k, double t, double h) {
  return 0.5 * k * t * (x + y) - h * h * k * k * t * t * t / 24.0;
}

double mehler_kernel(double x, double y, double omega, double t, double h) {
  const double tau = omega * h * t;
  const double s = std::sinh(tau);
  return std::sqrt(omega / (2.0 * std::numbers::pi * h * s)) *
         std::exp(-omega / (2.0 * h * s) * ((x * x + y * y) * std::cosh(tau) - 2.0 * x * y));
}

double mehler_psi(double x, double y, double omega, double t, double h) {
  const double tau = omega * h * t;
  const double s = std::sinh(tau);
  const double th2 = t * h * h;
  const double logU = 0.5 * std::log(omega / (2.0 * std::numbers::pi * h * s)) -
                      omega / (2.0 * h * s) * ((x * x + y * y) * std::cosh(tau) - 2.0 * x * y);
  return -logU - (x - y) * (x - y) / (2.0 * th2) - 0.5 * std::log(2.0 * std::numbers::pi * th2);
}

double gaussian_propagator(const std::vector<double>& x, const std::vector<double>& xp, const std::vector<double>& y,
                           double s, double t, double h) {
  if (!(s > 0 && s < t)) throw Error("gaussian propagator requires 0 < s < t");
  if (x.size() != xp.size() || x.size() != y.size()) throw Error("index mismatch in gaussian propagator");
  const double a = propagator_a(s, t);
  double r2 = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double m = (1.0 - s / t) * y[k] + (s / t) * x[k];
    r2 += (xp[k] - m) * (xp[k] - m);
  }
  return std::pow(a / (2.0 * std::numbers::pi * h * h), 0.5 * static_cast<double>(x.size())) *
         std::exp(-a / (2.0 * h * h) * r2);
}

namespace {

struct Stencil1D {
  std::vector<int> off;
  std::vector<double> w;
};

const Stencil1D& stencil_for(int k) {
  static const Stencil1D s1{{-1, 1}, {-0.5, 0.5}};
  static const Stencil1D s2{{-1, 0, 1}, {1.0, -2.0, 1.0}};
  static const Stencil1D s3{{-2, -1, 1, 2}, {-0.5, 1.0, -1.0, 0.5}};
  if (k == 1) return s1;
  if (k == 2) return s2;
  if (k == 3) return s3;
  throw Error("derivative order per variable must be 1..3");
}

}  // namespace

std::optional<double> psi_derivative(const KernelField& kf, std::size_t I, std::size_t J, const std::vector<int>& mult) {
  const std::size_t N = kf.sites;
  if (mult.size() != 2 * N) throw Error("derivative multiplicity must cover x and y axes");
  std::vector<int> base = kf.index(I);
  std::vector<int> by = kf.index(J);
  base.insert(base.end(), by.begin(), by.end());
  std::vector<std::size_t> vars;
  int order = 0;
  for (std::size_t v = 0; v < 2 * N; ++v)
    if (mult[v] > 0) {
      vars.push_back(v);
      order += mult[v];
    }
  if (vars.empty()) {
    if (!kf.mask(static_cast<Eigen::Index>(I), static_cast<Eigen::Index>(J))) return std::nullopt;
    return kf.psi(static_cast<Eigen::Index>(I), static_cast<Eigen::Index>(J));
  }
  std::vector<std::size_t> pos(vars.size(), 0);
  double acc = 0.0;
  const int n = kf.grid.n;
  while (true) {
    std::vector<int> p = base;
    double w = 1.0;
    bool ok = true;
    for (std::size_t k = 0; k < vars.size(); ++k) {
      const Stencil1D& st = stencil_for(mult[vars[k]]);
      p[vars[k]] += st.off[pos[k]];
      w *= st.w[pos[k]];
      if (p[vars[k]] < 0 || p[vars[k]] >= n) ok = false;
    }
    if (!ok) return std::nullopt;
    const std::size_t Ip = kf.flat(std::vector<int>(p.begin(), p.begin() + static_cast<long>(N)));
    const std::size_t Jp = kf.flat(std::vector<int>(p.begin() + static_cast<long>(N), p.end()));
    if (!kf.mask(static_cast<Eigen::Index>(Ip), static_cast<Eigen::Index>(Jp))) return std::nullopt;
    acc += w * kf.psi(static_cast<Eigen::Index>(Ip), static_cast<Eigen::Index>(Jp));
    std::size_t k = 0;
    while (k < vars.size() && ++pos[k] == stencil_for(mult[vars[k]]).off.size()) pos[k++] = 0;
    if (k == vars.size()) break;
  }
  return acc / std::pow(kf.grid.dx(), order);
}

ResidualReport residual_check(const KernelField& minus, const KernelField& mid, const KernelField& plus,
                              const std::function<double(const double*)>& V) {
  const double dt = 0.5 * (plus.t - minus.t);
  if (!(dt > 0)) throw Error("residual check needs t - dt < t + dt");
  const std::size_t N = mid.sites;
  const double h2 = mid.h * mid.h;
  ResidualReport rep;
  const Eigen::Index d = mid.U.rows();
  for (Eigen::Index J = 0; J < d; ++J)
    for (Eigen::Index I = 0; I < d; ++I) {
      if (!mid.mask(I, J) || !minus.mask(I, J) || !plus.mask(I, J)) continue;
      double lap = 0.0, drift = 0.0, g2 = 0.0;
      bool ok = true;
      const auto x = mid.coords(static_cast<std::size_t>(I));
      const auto y = mid.coords(static_cast<std::size_t>(J));
      for (std::size_t ax = 0; ax < N && ok; ++ax) {
        std::vector<int> m(2 * N, 0);
        m[ax] = 1;
        auto g = psi_derivative(mid, static_cast<std::size_t>(I), static_cast<std::size_t>(J), m);
        m[ax] = 2;
        auto l = psi_derivative(mid, static_cast<std::size_t>(I), static_cast<std::size_t>(J), m);
        if (!g || !l) {
          ok = false;
          break;
        }
        drift += (x[ax] - y[ax]) / mid.t * *g;
        g2 += *g * *g;
        lap += *l;
      }
      if (!ok) continue;
      const double psit = (plus.psi(I, J) - minus.psi(I, J)) / (2.0 * dt);
      const double r = std::abs(psit + drift - 0.5 * h2 * lap - V(x.data()) + 0.5 * h2 * g2);
      ++rep.points;
      if (r > rep.sup) {
        rep.sup = r;
        rep.xIndex = static_cast<std::size_t>(I);
        rep.yIndex = static_cast<std::size_t>(J);
      }
    }
  if (rep.points == 0) throw Error("window too small for stencil");
  return rep;
}

namespace {

int D_of(const std::vector<std::size_t>& lambdas, const SiteSet& sites, const NormOptions& opt) {
  std::vector<SiteSet> sets;
  for (auto l : lambdas) sets.push_back({sites[l]});
  if (opt.E) sets.push_back(*opt.E);
  if (opt.F) sets.push_back(*opt.F);
  return max_pairwise_dist(sets);
}

// Norm of the mixed derivative along the listed sites, or nullopt if a stencil point is missing.
std::optional<double> mixed_norm(const KernelField& kf, std::size_t I, std::size_t J,
                                 const std::vector<std::size_t>& lambdas, NormVariables vars) {
  const std::size_t N = kf.sites;
  if (vars == NormVariables::x) {
    std::vector<int> mult(2 * N, 0);
    for (auto l : lambdas) ++mult[l];
    auto d = psi_derivative(kf, I, J, mult);
    if (!d) return std::nullopt;
    return std::abs(*d);
  }
  double sum = 0.0;
  const std::size_t m = lambdas.size();
  for (std::size_t choice = 0; choice < (std::size_t{1} << m); ++choice) {
    std::vector<int> mult(2 * N, 0);
    for (std::size_t k = 0; k < m; ++k) ++mult[lambdas[k] + ((choice >> k) & 1 ? N : 0)];
    auto d = psi_derivative(kf, I, J, mult);
    if (!d) return std::nullopt;
    sum += *d * *d;
  }
  return std::sqrt(sum);
}

}  // namespace

double weighted_norms(const KernelField& kf, const SiteSet& lambdaSites, const NormOptions& opt) {
  if (opt.m < 1 || opt.m > 3) throw Error("norm order m must lie in 1..3");
  if (!(opt.eps > 0 && opt.eps < 1)) throw Error("decay parameter must lie in (0,1)");
  if (lambdaSites.size() != kf.sites) throw Error("index mismatch: site list does not match kernel");
  const std::size_t N = kf.sites;
  const bool sets = opt.E.has_value() || opt.F.has_value();
  const Eigen::Index d = kf.U.rows();
  double best = 0.0;
  const Eigen::Index j0 = opt.ySlice ? static_cast<Eigen::Index>(*opt.ySlice) : 0;
  const Eigen::Index j1 = opt.ySlice ? j0 + 1 : d;

  auto tuples = [&](int len) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> cur(static_cast<std::size_t>(len), 0);
    while (true) {
      out.push_back(cur);
      int k = len - 1;
      while (k >= 0 && ++cur[static_cast<std::size_t>(k)] == N) cur[static_cast<std::size_t>(k--)] = 0;
      if (k < 0) break;
    }
    return out;
  };

  for (Eigen::Index J = j0; J < j1; ++J)
    for (Eigen::Index I = 0; I < d; ++I) {
      if (!kf.mask(I, J)) continue;
      const std::size_t Iu = static_cast<std::size_t>(I), Ju = static_cast<std::size_t>(J);
      double val = 0.0;
      bool ok = true;
      if (opt.infinity) {
        for (auto& tup : tuples(opt.m)) {
          auto v = mixed_norm(kf, Iu, Ju, tup, opt.vars);
          if (!v) {
            ok = false;
            break;
          }
          val = std::max(val, *v / std::pow(opt.eps, D_of(tup, lambdaSites, opt)));
        }
      } else if (opt.m == 1) {
        for (std::size_t l = 0; l < N; ++l) {
          auto v = mixed_norm(kf, Iu, Ju, {l}, opt.vars);
          if (!v) {
            ok = false;
            break;
          }
          if (sets)
            val += *v / std::pow(opt.eps, D_of({l}, lambdaSites, opt));
          else
            val = std::max(val, *v);
        }
      } else {
        for (auto& head : tuples(opt.m - 1)) {
          double sum = 0.0;
          for (std::size_t mu = 0; mu < N && ok; ++mu) {
            auto tup = head;
            tup.push_back(mu);
            auto v = mixed_norm(kf, Iu, Ju, tup, opt.vars);
            if (!v) {
              ok = false;
              break;
            }
            sum += *v / std::pow(opt.eps, D_of(tup, lambdaSites, opt));
          }
          if (!ok) break;
          val = std::max(val, sum);
        }
      }
      if (ok) best = std::max(best, val);
    }
  return best;
}

std::vector<int> shift_in_steps(const GridSpec& grid, const std::vector<double>& u) {
  std::vector<int> s;
  for (double v : u) {
    const double k = v / grid.dx();
    const double r = std::round(k);
    if (std::abs(k - r) > 1e-9) throw Error("off-grid shift: translation must be a multiple of the grid spacing");
    s.push_back(static_cast<int>(r));
  }
  return s;
}

Eigen::MatrixXd translate_difference(const KernelField& kf, const Eigen::MatrixXd& f, const std::vector<int>& shift) {
  if (shift.size() != kf.sites) throw Error("index mismatch: shift must have one entry per site");
  const Eigen::Index d = f.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Constant(d, d, kNaN);
  std::vector<long> moved(static_cast<std::size_t>(d), -1);
  for (Eigen::Index I = 0; I < d; ++I) {
    auto idx = kf.index(static_cast<std::size_t>(I));
    bool ok = true;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      idx[k] += shift[k];
      if (idx[k] < 0 || idx[k] >= kf.grid.n) ok = false;
    }
    if (ok) moved[static_cast<std::size_t>(I)] = static_cast<long>(kf.flat(idx));
  }
  bool any = false;
  for (Eigen::Index J = 0; J < d; ++J) {
    const long Jm = moved[static_cast<std::size_t>(J)];
    if (Jm < 0) continue;
    for (Eigen::Index I = 0; I < d; ++I) {
      const long Im = moved[static_cast<std::size_t>(I)];
      if (Im < 0) continue;
      const double v = f(Im, Jm) - f(I, J);
      if (std::isnan(v)) continue;
      out(I, J) = v;
      any = true;
    }
  }
  if (!any) throw Error("translation leaves no valid points");
  return out;
}

void write_kernel_csv(const KernelField& kf, const std::string& csvPath, const std::string& jsonPath,
                      const SiteSet& lambdaSites) {
  std::FILE* f = std::fopen(csvPath.c_str(), "w");
  if (!f) throw Error("cannot open " + csvPath);
  std::fprintf(f, "x_index,y_index,U,psi,mask\n");
  const Eigen::Index d = kf.U.rows();
  for (Eigen::Index I = 0; I < d; ++I)
    for (Eigen::Index J = 0; J < d; ++J)
      std::fprintf(f, "%ld,%ld,%.17g,%.17g,%d\n", static_cast<long>(I), static_cast<long>(J), kf.U(I, J),
                   kf.mask(I, J) ? kf.psi(I, J) : 0.0, kf.mask(I, J) ? 1 : 0);
  std::fclose(f);
  nlohmann::json j;
  j["t"] = kf.t;
  j["h"] = kf.h;
  j["grid"] = {{"L", kf.grid.L},
               {"n", kf.grid.n},
               {"interiorMargin", kf.grid.interiorMargin},
               {"windowFraction", kf.grid.windowFraction},
               {"stencil", stencil_name(kf.grid.stencil)}};
  j["noiseFloor"] = kf.noiseFloor;
  j["underflowFloor"] = kUnderflowFloor;
  auto sites = nlohmann::json::array();
  for (const auto& s : lambdaSites) sites.push_back(s.c);
  j["lambda"] = sites;
  std::ofstream(jsonPath) << j.dump(2) << "\n";
}

}  // namespace qlat
