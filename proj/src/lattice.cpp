#include "qlat/lattice.hpp"

#include <algorithm>
#include <climits>
#include <cstdlib>
#include <sstream>

#include "qlat/error.hpp"

namespace qlat {

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error([&] {
        std::string msg = "invalid configuration:";
        for (const auto& v : violations) msg += "\n  - " + v;
        return msg;
      }()),
      violations_(std::move(violations)) {}

SiteSet make_site_set(std::vector<Site> sites) {
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  return sites;
}

Box::Box(std::vector<int> lo_, std::vector<int> hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (lo.size() != hi.size() || lo.empty()) throw Error("box corners must share a positive dimension");
  for (std::size_t j = 0; j < lo.size(); ++j)
    if (lo[j] > hi[j]) throw Error("box requires lo <= hi on every axis");
}

int Box::diam() const {
  int d = 0;
  for (std::size_t j = 0; j < lo.size(); ++j) d = std::max(d, hi[j] - lo[j]);
  return d;
}

std::size_t Box::size() const {
  std::size_t s = 1;
  for (std::size_t j = 0; j < lo.size(); ++j) s *= static_cast<std::size_t>(hi[j] - lo[j] + 1);
  return s;
}

bool Box::contains(const Site& s) const {
  if (s.dim() != dim()) return false;
  for (std::size_t j = 0; j < lo.size(); ++j)
    if (s.c[j] < lo[j] || s.c[j] > hi[j]) return false;
  return true;
}

bool Box::contains(const Box& b) const {
  for (std::size_t j = 0; j < lo.size(); ++j)
    if (b.lo[j] < lo[j] || b.hi[j] > hi[j]) return false;
  return true;
}

bool Box::intersects(const Box& b) const {
  for (std::size_t j = 0; j < lo.size(); ++j)
    if (b.hi[j] < lo[j] || b.lo[j] > hi[j]) return false;
  return true;
}

bool Box::meets(const SiteSet& e) const {
  return std::any_of(e.begin(), e.end(), [&](const Site& s) { return contains(s); });
}

SiteSet Box::sites() const {
  SiteSet out;
  out.reserve(size());
  std::vector<int> cur = lo;
  const int d = dim();
  while (true) {
    out.emplace_back(cur);
    int j = d - 1;
    while (j >= 0 && cur[j] == hi[j]) {
      cur[j] = lo[j];
      --j;
    }
    if (j < 0) break;
    ++cur[j];
  }
  return out;
}

std::string Box::str() const {
  std::ostringstream os;
  for (std::size_t j = 0; j < lo.size(); ++j) {
    if (j) os << "x";
    os << "[" << lo[j] << "," << hi[j] << "]";
  }
  return os.str();
}

bool Polymer::valid() const {
  if (boxes.empty()) return false;
  for (const auto& b : boxes)
    if (b.diam() < 1) return false;
  for (std::size_t j = 0; j + 1 < boxes.size(); ++j)
    if (!boxes[j].intersects(boxes[j + 1])) return false;
  return true;
}

int FieldConfig::index_of(const Site& s) const {
  auto it = std::lower_bound(sites.begin(), sites.end(), s);
  if (it == sites.end() || *it != s) return -1;
  return static_cast<int>(it - sites.begin());
}

double FieldConfig::at(const Site& s) const {
  int i = index_of(s);
  if (i < 0) throw Error("index mismatch: site not in configuration");
  return values[static_cast<std::size_t>(i)];
}

int linf_dist(const Site& a, const Site& b) {
  if (a.dim() != b.dim()) throw Error("dimension mismatch");
  int d = 0;
  for (std::size_t j = 0; j < a.c.size(); ++j) d = std::max(d, std::abs(a.c[j] - b.c[j]));
  return d;
}

int linf_dist(const Box& a, const Box& b) {
  if (a.dim() != b.dim()) throw Error("dimension mismatch");
  int d = 0;
  for (std::size_t j = 0; j < a.lo.size(); ++j) {
    int gap = std::max({0, b.lo[j] - a.hi[j], a.lo[j] - b.hi[j]});
    d = std::max(d, gap);
  }
  return d;
}

int linf_dist(const SiteSet& a, const SiteSet& b) {
  if (a.empty() || b.empty()) throw Error("empty geometry");
  int best = INT_MAX;
  for (const auto& s : a)
    for (const auto& r : b) best = std::min(best, linf_dist(s, r));
  return best;
}

int linf_dist(const Box& a, const SiteSet& b) {
  if (b.empty()) throw Error("empty geometry");
  int best = INT_MAX;
  for (const auto& s : b) best = std::min(best, linf_dist(a, Box::point(s)));
  return best;
}

int linf_dist(const SiteSet& a, const Box& b) { return linf_dist(b, a); }

int max_pairwise_dist(const std::vector<SiteSet>& sets) {
  int d = 0;
  for (std::size_t i = 0; i < sets.size(); ++i)
    for (std::size_t j = i + 1; j < sets.size(); ++j) d = std::max(d, linf_dist(sets[i], sets[j]));
  return d;
}

std::vector<std::pair<Box, int>> interior_boxes(const Box& q) {
  // Per axis: keep, drop-lo, drop-hi, drop-both; removed-face counts 0,1,1,2.
  struct Choice {
    int lo, hi, removed;
  };
  std::vector<std::vector<Choice>> axes;
  for (int j = 0; j < q.dim(); ++j) {
    int a = q.lo[j], b = q.hi[j];
    std::vector<Choice> c{{a, b, 0}};
    if (a < b) {
      c.push_back({a + 1, b, 1});
      c.push_back({a, b - 1, 1});
      if (b - a >= 2) c.push_back({a + 1, b - 1, 2});
    }
    axes.push_back(std::move(c));
  }
  std::vector<std::pair<Box, int>> out;
  std::vector<std::size_t> pick(axes.size(), 0);
  while (true) {
    std::vector<int> lo, hi;
    int m = 0;
    for (std::size_t j = 0; j < axes.size(); ++j) {
      lo.push_back(axes[j][pick[j]].lo);
      hi.push_back(axes[j][pick[j]].hi);
      m += axes[j][pick[j]].removed;
    }
    out.emplace_back(Box(lo, hi), m);
    int j = static_cast<int>(axes.size()) - 1;
    while (j >= 0 && pick[j] + 1 == axes[j].size()) {
      pick[j] = 0;
      --j;
    }
    if (j < 0) break;
    ++pick[j];
  }
  return out;
}

std::vector<Box> enumerate_boxes(const Box& lambda, int maxDiam) {
  if (maxDiam < 0) throw Error("maxDiam must be non-negative");
  std::vector<Box> out;
  for (const auto& a : lambda.sites())
    for (const auto& b : lambda.sites()) {
      bool ok = true;
      int diam = 0;
      for (int j = 0; j < lambda.dim(); ++j) {
        if (a.c[j] > b.c[j]) ok = false;
        diam = std::max(diam, b.c[j] - a.c[j]);
      }
      if (ok && diam <= maxDiam) out.emplace_back(a.c, b.c);
    }
  std::sort(out.begin(), out.end());
  return out;
}

FieldConfig project_pi(const SiteSet& q, const FieldConfig& x) {
  FieldConfig out = x;
  for (const auto& s : q)
    if (x.index_of(s) < 0) throw Error("index mismatch: projection set not contained in configuration");
  for (std::size_t i = 0; i < x.sites.size(); ++i)
    if (!std::binary_search(q.begin(), q.end(), x.sites[i])) out.values[i] = 0.0;
  return out;
}

std::pair<FieldConfig, FieldConfig> project_Pi(const SiteSet& q, const FieldConfig& x,
                                               const FieldConfig& y) {
  if (x.sites != y.sites || x.values.size() != y.values.size())
    throw Error("index mismatch: x and y must share the same site list");
  for (const auto& s : q)
    if (x.index_of(s) < 0) throw Error("index mismatch: projection set not contained in configuration");
  FieldConfig xp = x, yp = y;
  for (std::size_t i = 0; i < x.sites.size(); ++i) {
    if (std::binary_search(q.begin(), q.end(), x.sites[i])) continue;
    xp.values[i] = 0.0;
    yp.values[i] = y.values[i] - x.values[i];
  }
  return {xp, yp};
}

std::vector<Polymer> enumerate_polymers(const SiteSet& e1, const SiteSet& e2, const Box& lambda,
                                        int maxBoxes, int maxDiam, bool allowRepeats) {
  if (maxBoxes < 1) throw Error("maxBoxes must be at least 1");
  for (const auto& s : e1)
    if (std::binary_search(e2.begin(), e2.end(), s)) throw Error("overlapping supports E1 and E2");
  std::vector<Box> boxes;
  for (auto& b : enumerate_boxes(lambda, maxDiam))
    if (b.diam() >= 1) boxes.push_back(std::move(b));

  std::vector<Polymer> out;
  std::vector<std::size_t> seq;
  auto rec = [&](auto&& self) -> void {
    const Box& last = boxes[seq.back()];
    if (last.meets(e2)) {
      Polymer p;
      for (auto k : seq) p.boxes.push_back(boxes[k]);
      out.push_back(std::move(p));
    }
    if (static_cast<int>(seq.size()) == maxBoxes) return;
    for (std::size_t k = 0; k < boxes.size(); ++k) {
      if (!boxes[k].intersects(last)) continue;
      if (!allowRepeats && std::find(seq.begin(), seq.end(), k) != seq.end()) continue;
      seq.push_back(k);
      self(self);
      seq.pop_back();
    }
  };
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    if (!boxes[k].meets(e1)) continue;
    seq.assign(1, k);
    rec(rec);
  }
  return out;
}

}  // namespace qlat
