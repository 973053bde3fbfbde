#pragma once

#include <compare>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace qlat {

struct Site {
  std::vector<int> c;

  Site() = default;
  Site(std::initializer_list<int> coords) : c(coords) {}
  explicit Site(std::vector<int> coords) : c(std::move(coords)) {}

  int dim() const { return static_cast<int>(c.size()); }
  auto operator<=>(const Site&) const = default;
};

// Sorted, duplicate-free list of sites.
using SiteSet = std::vector<Site>;
SiteSet make_site_set(std::vector<Site> sites);

// Closed integer box, lo[j] <= hi[j] on every axis.
struct Box {
  std::vector<int> lo;
  std::vector<int> hi;

  Box() = default;
  Box(std::vector<int> lo_, std::vector<int> hi_);
  static Box point(const Site& s) { return Box(s.c, s.c); }
  static Box interval(int a, int b) { return Box({a}, {b}); }

  int dim() const { return static_cast<int>(lo.size()); }
  int diam() const;
  std::size_t size() const;
  bool contains(const Site& s) const;
  bool contains(const Box& b) const;
  bool intersects(const Box& b) const;
  bool meets(const SiteSet& e) const;
  SiteSet sites() const;
  std::string str() const;

  auto operator<=>(const Box&) const = default;
};

struct Polymer {
  std::vector<Box> boxes;
  bool valid() const;
};

// One configuration x = (x_lambda) indexed by an ordered site list.
struct FieldConfig {
  SiteSet sites;
  std::vector<double> values;

  double at(const Site& s) const;
  int index_of(const Site& s) const;
};

int linf_dist(const Site& a, const Site& b);
int linf_dist(const Box& a, const Box& b);
int linf_dist(const SiteSet& a, const SiteSet& b);
int linf_dist(const Box& a, const SiteSet& b);
int linf_dist(const SiteSet& a, const Box& b);

// D(E_1, ..., E_m): largest pairwise distance.
int max_pairwise_dist(const std::vector<SiteSet>& sets);

std::vector<std::pair<Box, int>> interior_boxes(const Box& q);
std::vector<Box> enumerate_boxes(const Box& lambda, int maxDiam);

FieldConfig project_pi(const SiteSet& q, const FieldConfig& x);
std::pair<FieldConfig, FieldConfig> project_Pi(const SiteSet& q, const FieldConfig& x,
                                               const FieldConfig& y);

std::vector<Polymer> enumerate_polymers(const SiteSet& e1, const SiteSet& e2, const Box& lambda,
                                        int maxBoxes, int maxDiam, bool allowRepeats = true);

}  // namespace qlat
