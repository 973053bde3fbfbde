#include "qlat/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "qlat/error.hpp"

namespace qlat {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::set<std::string> kExperiments{"kernel", "decompose", "mayer", "correlate", "thermo"};

class Reader {
 public:
  std::vector<std::string> violations;

  void only(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || key == a;
      if (!ok) violations.push_back("unknown key " + join(path, key));
    }
  }

  const json* object(const json& parent, const std::string& path, const char* key, bool required) {
    if (!parent.contains(key)) {
      if (required) violations.push_back("missing required key " + join(path, key));
      return nullptr;
    }
    const json& v = parent.at(key);
    if (!v.is_object()) {
      violations.push_back(join(path, key) + " must be an object");
      return nullptr;
    }
    return &v;
  }

  std::optional<double> number(const json& parent, const std::string& path, const char* key, bool required) {
    if (!parent.contains(key)) {
      if (required) violations.push_back("missing required key " + join(path, key));
      return std::nullopt;
    }
    const json& v = parent.at(key);
    if (!v.is_number()) {
      violations.push_back(join(path, key) + " must be a number");
      return std::nullopt;
    }
    return v.get<double>();
  }

  std::optional<long long> integer(const json& parent, const std::string& path, const char* key, bool required) {
    if (!parent.contains(key)) {
      if (required) violations.push_back("missing required key " + join(path, key));
      return std::nullopt;
    }
    const json& v = parent.at(key);
    if (!v.is_number_integer()) {
      violations.push_back(join(path, key) + " must be an integer");
      return std::nullopt;
    }
    return v.get<long long>();
  }

  std::optional<std::string> string(const json& parent, const std::string& path, const char* key, bool required) {
    if (!parent.contains(key)) {
      if (required) violations.push_back("missing required key " + join(path, key));
      return std::nullopt;
    }
    const json& v = parent.at(key);
    if (!v.is_string()) {
      violations.push_back(join(path, key) + " must be a string");
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  std::optional<bool> boolean(const json& parent, const std::string& path, const char* key) {
    if (!parent.contains(key)) return std::nullopt;
    const json& v = parent.at(key);
    if (!v.is_boolean()) {
      violations.push_back(join(path, key) + " must be true or false");
      return std::nullopt;
    }
    return v.get<bool>();
  }

  template <class T>
  std::optional<std::vector<T>> list(const json& parent, const std::string& path, const char* key, bool required) {
    if (!parent.contains(key)) {
      if (required) violations.push_back("missing required key " + join(path, key));
      return std::nullopt;
    }
    const json& v = parent.at(key);
    if (!v.is_array() || v.empty()) {
      violations.push_back(join(path, key) + " must be a non-empty array");
      return std::nullopt;
    }
    std::vector<T> out;
    for (const auto& e : v) {
      const bool ok = std::is_same_v<T, std::string> ? e.is_string()
                      : std::is_integral_v<T>         ? e.is_number_integer()
                                                      : e.is_number();
      if (!ok) {
        violations.push_back(join(path, key) + " has an entry of the wrong type");
        return std::nullopt;
      }
      out.push_back(e.get<T>());
    }
    return out;
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }
};

std::optional<SitePotentialSpec::Kind> site_kind(const std::string& s) {
  static const std::map<std::string, SitePotentialSpec::Kind> m{{"zero", SitePotentialSpec::Kind::zero},
                                                                {"constant", SitePotentialSpec::Kind::constant},
                                                                {"linear", SitePotentialSpec::Kind::linear},
                                                                {"pseudoLinearWell", SitePotentialSpec::Kind::pseudoLinearWell},
                                                                {"harmonic", SitePotentialSpec::Kind::harmonic}};
  auto it = m.find(s);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

std::optional<PairCouplingSpec::Kind> pair_kind(const std::string& s) {
  static const std::map<std::string, PairCouplingSpec::Kind> m{{"zero", PairCouplingSpec::Kind::zero},
                                                               {"cosineDiff", PairCouplingSpec::Kind::cosineDiff},
                                                               {"boundedProduct", PairCouplingSpec::Kind::boundedProduct}};
  auto it = m.find(s);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

const char* site_kind_name(SitePotentialSpec::Kind k) {
  switch (k) {
    case SitePotentialSpec::Kind::zero: return "zero";
    case SitePotentialSpec::Kind::constant: return "constant";
    case SitePotentialSpec::Kind::linear: return "linear";
    case SitePotentialSpec::Kind::pseudoLinearWell: return "pseudoLinearWell";
    case SitePotentialSpec::Kind::harmonic: return "harmonic";
  }
  return "zero";
}

const char* pair_kind_name(PairCouplingSpec::Kind k) {
  switch (k) {
    case PairCouplingSpec::Kind::zero: return "zero";
    case PairCouplingSpec::Kind::cosineDiff: return "cosineDiff";
    case PairCouplingSpec::Kind::boundedProduct: return "boundedProduct";
  }
  return "zero";
}

bool needs_dense(const ExperimentConfig& c) {
  return c.experiment == "kernel" || c.experiment == "decompose" || c.experiment == "mayer" || c.method == "dense";
}

std::size_t site_count(const ExperimentConfig& c) {
  if (c.experiment == "thermo") return static_cast<std::size_t>(2 * *std::max_element(c.nRange.begin(), c.nRange.end()) + 1);
  return c.lambda.size();
}

json canonical_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  j["interaction"] = {{"site", {{"kind", site_kind_name(c.interaction.site.kind)}, {"param", c.interaction.site.param}}},
                      {"pair", {{"kind", pair_kind_name(c.interaction.pair.kind)}, {"J", c.interaction.pair.J}, {"eps", c.interaction.pair.eps}}},
                      {"d", c.interaction.d},
                      {"h", c.interaction.h}};
  j["lattice"] = {{"lo", c.lambda.lo}, {"hi", c.lambda.hi}};
  j["grid"] = {{"n", c.grid.n},
               {"L", c.grid.L},
               {"interiorMargin", c.grid.interiorMargin},
               {"windowFraction", c.grid.windowFraction},
               {"stencil", stencil_name(c.grid.stencil)}};
  j["schedule"] = {{"t", c.t}};
  if (!c.theta.empty()) j["schedule"]["theta"] = c.theta;
  j["method"] = c.method;
  j["budget"] = {{"dense", c.budget.dense}, {"sparse", c.budget.sparse}};
  j["probing"] = {{"tol", c.probing.tol}, {"blockSize", c.probing.blockSize}, {"maxColors", c.probing.maxColors}, {"seed", c.probing.seed}};
  j["output"] = {{"directory", c.outDir}, {"formats", c.formats}};
  j["seed"] = c.seed;
  j["decompose"] = json::object();
  if (c.maxDiam >= 0) j["decompose"]["maxDiam"] = c.maxDiam;
  j["mayer"] = {{"samples", c.samples},
                {"polymer", {{"delta", c.polymer.delta}, {"T", c.polymer.T}, {"maxBoxes", c.polymer.maxBoxes}, {"maxDiam", c.polymer.maxDiam}, {"enforceAdmissible", c.polymer.enforceAdmissible}}}};
  j["thermo"] = {{"nRange", c.nRange}};
  return j;
}

ExperimentConfig from_json(const json& root, const std::optional<std::string>& experiment) {
  Reader r;
  ExperimentConfig c;
  c.grid.n = 32;
  c.grid.L = 6.0;
  c.grid.interiorMargin = 6;
  if (!root.is_object()) throw ConfigError({"configuration root must be an object"});
  r.only(root, "", {"experiment", "interaction", "lattice", "grid", "schedule", "method", "budget", "probing", "output",
                    "seed", "decompose", "mayer", "thermo"});

  if (experiment) {
    c.experiment = *experiment;
  } else if (auto e = r.string(root, "", "experiment", true)) {
    c.experiment = *e;
  }
  if (!c.experiment.empty() && !kExperiments.count(c.experiment))
    r.violations.push_back("experiment must be one of kernel, decompose, mayer, correlate, thermo");

  bool physicsOk = true;
  if (const json* in = r.object(root, "", "interaction", true)) {
    r.only(*in, "interaction", {"site", "pair", "d", "h"});
    if (const json* s = r.object(*in, "interaction", "site", true)) {
      r.only(*s, "interaction.site", {"kind", "param"});
      if (auto k = r.string(*s, "interaction.site", "kind", true)) {
        if (auto kind = site_kind(*k)) {
          c.interaction.site.kind = *kind;
          const bool needsParam = *kind != SitePotentialSpec::Kind::zero;
          if (auto p = r.number(*s, "interaction.site", "param", needsParam)) c.interaction.site.param = *p;
          if (*kind == SitePotentialSpec::Kind::pseudoLinearWell && !(c.interaction.site.param > 0))
            r.violations.push_back("pseudoLinearWell requires a > 0");
          if (*kind == SitePotentialSpec::Kind::harmonic && !(c.interaction.site.param > 0))
            r.violations.push_back("harmonic well requires omega > 0");
        } else {
          r.violations.push_back("interaction.site.kind must be one of zero, constant, linear, pseudoLinearWell, harmonic");
        }
      }
    }
    if (const json* p = r.object(*in, "interaction", "pair", true)) {
      r.only(*p, "interaction.pair", {"kind", "J", "eps"});
      if (auto k = r.string(*p, "interaction.pair", "kind", true)) {
        if (auto kind = pair_kind(*k)) {
          c.interaction.pair.kind = *kind;
          if (auto J = r.number(*p, "interaction.pair", "J", *kind != PairCouplingSpec::Kind::zero))
            c.interaction.pair.J = *J;
        } else {
          r.violations.push_back("interaction.pair.kind must be one of zero, cosineDiff, boundedProduct");
        }
      }
      if (auto e = r.number(*p, "interaction.pair", "eps", true)) {
        c.interaction.pair.eps = *e;
        if (!(*e > 0 && *e < 1)) r.violations.push_back("decay parameter must lie in (0,1)");
      }
    }
    if (auto d = r.integer(*in, "interaction", "d", true)) {
      c.interaction.d = static_cast<int>(*d);
      if (*d < 1) r.violations.push_back("lattice dimension must be at least 1");
    } else {
      physicsOk = false;
    }
    if (auto h = r.number(*in, "interaction", "h", true)) {
      c.interaction.h = *h;
      if (!(*h > 0)) r.violations.push_back("h must be positive");
    }
  } else {
    physicsOk = false;
  }

  bool latticeOk = false;
  if (const json* l = r.object(root, "", "lattice", true)) {
    r.only(*l, "lattice", {"chainLength", "lo", "hi"});
    if (l->contains("chainLength")) {
      if (auto k = r.integer(*l, "lattice", "chainLength", true)) {
        if (*k < 1) {
          r.violations.push_back("lattice.chainLength must be at least 1");
        } else if (physicsOk && c.interaction.d != 1) {
          r.violations.push_back("lattice.chainLength requires d = 1");
        } else {
          c.lambda = Box::interval(0, static_cast<int>(*k) - 1);
          latticeOk = true;
        }
      }
    } else {
      auto lo = r.list<int>(*l, "lattice", "lo", true);
      auto hi = r.list<int>(*l, "lattice", "hi", true);
      if (lo && hi) {
        if (lo->size() != hi->size() || (physicsOk && static_cast<int>(lo->size()) != c.interaction.d)) {
          r.violations.push_back("lattice.lo and lattice.hi must both have d entries");
        } else {
          try {
            c.lambda = Box(*lo, *hi);
            latticeOk = true;
          } catch (const Error& e) {
            r.violations.push_back(std::string("lattice: ") + e.what());
          }
        }
      }
    }
  }

  if (const json* g = r.object(root, "", "grid", false)) {
    r.only(*g, "grid", {"n", "L", "interiorMargin", "windowFraction", "stencil"});
    if (auto n = r.integer(*g, "grid", "n", false)) c.grid.n = static_cast<int>(*n);
    if (auto L = r.number(*g, "grid", "L", false)) c.grid.L = *L;
    if (auto m = r.integer(*g, "grid", "interiorMargin", false)) c.grid.interiorMargin = static_cast<int>(*m);
    if (auto w = r.number(*g, "grid", "windowFraction", false)) c.grid.windowFraction = *w;
    if (auto s = r.string(*g, "grid", "stencil", false)) {
      try {
        c.grid.stencil = parse_stencil(*s);
      } catch (const Error& e) {
        r.violations.push_back(std::string("grid.stencil: ") + e.what());
      }
    }
  }
  try {
    c.grid.validate();
  } catch (const Error& e) {
    r.violations.push_back(e.what());
  }

  if (const json* s = r.object(root, "", "schedule", true)) {
    r.only(*s, "schedule", {"t", "theta"});
    if (auto t = r.list<double>(*s, "schedule", "t", true)) {
      c.t = *t;
      for (double v : c.t)
        if (!(v > 0)) {
          r.violations.push_back("schedule.t entries must be positive");
          break;
        }
    }
    if (auto th = r.list<double>(*s, "schedule", "theta", false)) c.theta = *th;
  }

  if (auto m = r.string(root, "", "method", false)) {
    c.method = *m;
    if (c.method != "auto" && c.method != "dense" && c.method != "sparse")
      r.violations.push_back("method must be one of auto, dense, sparse");
  }
  if (const json* b = r.object(root, "", "budget", false)) {
    r.only(*b, "budget", {"dense", "sparse"});
    if (auto v = r.integer(*b, "budget", "dense", false)) {
      if (*v < 1) r.violations.push_back("budget.dense must be positive");
      else c.budget.dense = static_cast<std::size_t>(*v);
    }
    if (auto v = r.integer(*b, "budget", "sparse", false)) {
      if (*v < 1) r.violations.push_back("budget.sparse must be positive");
      else c.budget.sparse = static_cast<std::size_t>(*v);
    }
  }
  if (const json* p = r.object(root, "", "probing", false)) {
    r.only(*p, "probing", {"tol", "blockSize", "maxColors", "seed"});
    if (auto v = r.number(*p, "probing", "tol", false)) {
      if (!(*v > 0 && *v < 1)) r.violations.push_back("probing.tol must lie in (0,1)");
      c.probing.tol = *v;
    }
    if (auto v = r.integer(*p, "probing", "blockSize", false)) {
      if (*v < 1) r.violations.push_back("probing.blockSize must be positive");
      else c.probing.blockSize = static_cast<int>(*v);
    }
    if (auto v = r.integer(*p, "probing", "maxColors", false)) {
      if (*v < 1) r.violations.push_back("probing.maxColors must be positive");
      else c.probing.maxColors = static_cast<std::size_t>(*v);
    }
    if (auto v = r.integer(*p, "probing", "seed", false)) c.probing.seed = static_cast<std::uint64_t>(*v);
  }
  if (const json* o = r.object(root, "", "output", false)) {
    r.only(*o, "output", {"directory", "formats"});
    if (auto d = r.string(*o, "output", "directory", false)) c.outDir = *d;
    if (auto f = r.list<std::string>(*o, "output", "formats", false)) {
      c.formats = *f;
      for (const auto& x : c.formats)
        if (x != "csv" && x != "json") r.violations.push_back("output.formats entries must be csv or json");
    }
  }
  if (auto s = r.integer(root, "", "seed", false)) {
    if (*s < 0) r.violations.push_back("seed must be non-negative");
    else c.seed = static_cast<std::uint64_t>(*s);
  }
  if (const json* d = r.object(root, "", "decompose", false)) {
    r.only(*d, "decompose", {"maxDiam"});
    if (auto v = r.integer(*d, "decompose", "maxDiam", false)) {
      if (*v < 0) r.violations.push_back("decompose.maxDiam must be non-negative");
      else c.maxDiam = static_cast<int>(*v);
    }
  }
  if (const json* m = r.object(root, "", "mayer", false)) {
    r.only(*m, "mayer", {"samples", "polymer"});
    if (auto v = r.integer(*m, "mayer", "samples", false)) {
      if (*v < 1) r.violations.push_back("mayer.samples must be positive");
      else c.samples = static_cast<std::size_t>(*v);
    }
    if (const json* p = r.object(*m, "mayer", "polymer", false)) {
      r.only(*p, "mayer.polymer", {"delta", "T", "maxBoxes", "maxDiam", "enforceAdmissible"});
      if (auto v = r.number(*p, "mayer.polymer", "delta", false)) c.polymer.delta = *v;
      if (auto v = r.number(*p, "mayer.polymer", "T", false)) c.polymer.T = *v;
      if (auto v = r.integer(*p, "mayer.polymer", "maxBoxes", false)) c.polymer.maxBoxes = static_cast<int>(*v);
      if (auto v = r.integer(*p, "mayer.polymer", "maxDiam", false)) c.polymer.maxDiam = static_cast<int>(*v);
      if (auto v = r.boolean(*p, "mayer.polymer", "enforceAdmissible")) c.polymer.enforceAdmissible = *v;
    }
  }
  if (const json* t = r.object(root, "", "thermo", false)) {
    r.only(*t, "thermo", {"nRange"});
    if (auto v = r.list<int>(*t, "thermo", "nRange", false)) {
      c.nRange = *v;
      for (int n : c.nRange)
        if (n < 0) {
          r.violations.push_back("thermo.nRange entries must be non-negative");
          break;
        }
    }
  }

  // Cross-field checks, only meaningful once the pieces parsed.
  if (latticeOk && !c.experiment.empty() && kExperiments.count(c.experiment) && c.grid.n >= 4 && !c.nRange.empty()) {
    const std::size_t sites = site_count(c);
    std::size_t dim = 0;
    try {
      dim = grid_dimension(c.grid.n, sites);
    } catch (const Error&) {
      dim = std::numeric_limits<std::size_t>::max();
    }
    const std::string shape = "(n = " + std::to_string(c.grid.n) + ", |Lambda| = " + std::to_string(sites) + ")";
    if (needs_dense(c) && dim > c.budget.dense)
      r.violations.push_back("budget exceeded: dense method needs dimension " + std::to_string(dim) + " " + shape +
                             ", dense budget is " + std::to_string(c.budget.dense));
    else if (dim > c.budget.sparse)
      r.violations.push_back("budget exceeded: dimension " + std::to_string(dim) + " " + shape +
                             " exceeds the sparse budget " + std::to_string(c.budget.sparse));
    else if (!needs_dense(c) && dim > c.budget.dense && c.grid.stencil != Stencil::central3 &&
             (c.experiment == "correlate" || c.experiment == "thermo"))
      r.violations.push_back("dimension " + std::to_string(dim) +
                             " needs diagonal probing, which requires grid.stencil = central3");
    if ((c.experiment == "decompose" || c.experiment == "mayer") && c.grid.n % 2 == 0)
      r.violations.push_back(c.experiment + " requires odd grid.n so that 0 is a grid point");
    if (c.experiment == "correlate" && (c.interaction.d != 1 || c.lambda.size() < 2))
      r.violations.push_back("correlate requires a chain (d = 1) with at least two sites");
    if (c.experiment == "kernel" || !c.theta.empty()) {
      bool window = false;
      for (int i = 0; i < c.grid.n; ++i) window = window || c.grid.in_window(i);
      if (!window) r.violations.push_back("the grid window is empty; lower grid.interiorMargin or raise grid.n");
    }
    if (c.interaction.site.kind == SitePotentialSpec::Kind::harmonic && c.experiment != "kernel")
      r.violations.push_back("the harmonic well is only available to the kernel experiment");
    if (c.experiment == "thermo" && c.interaction.d != 1) r.violations.push_back("thermo requires d = 1");
    if (!c.theta.empty() && (c.interaction.d != 1 || c.lambda.size() < 2))
      r.violations.push_back("schedule.theta requires a chain (d = 1) with at least two sites");
    if (!c.theta.empty() && c.experiment == "thermo") {
      std::size_t tdim = std::numeric_limits<std::size_t>::max();
      try {
        tdim = grid_dimension(c.grid.n, c.lambda.size());
      } catch (const Error&) {
      }
      if (tdim > c.budget.dense)
        r.violations.push_back("budget exceeded: schedule.theta needs the dense method at dimension " +
                               std::to_string(tdim) + ", dense budget is " + std::to_string(c.budget.dense));
    }
    if (c.experiment == "mayer") {
      std::size_t boxes = 0;
      for (const auto& q : enumerate_boxes(c.lambda, static_cast<int>(c.lambda.size())))
        if (q.diam() >= 1) ++boxes;
      if (boxes > kMaxMayerBoxes)
        r.violations.push_back("mayer needs at most 12 boxes in Lambda, found " + std::to_string(boxes));
      const double eps = c.interaction.pair.eps;
      if (!(eps > 0 && eps < c.polymer.delta && c.polymer.delta < 1)) {
        r.violations.push_back("mayer.polymer.delta must satisfy eps < delta < 1");
      } else {
        const double t1 = admissible_t1(eps, c.polymer.delta, c.interaction.d);
        if (c.polymer.T == 0.0) c.polymer.T = 0.5 * t1;
        if (!(c.polymer.T > 0)) r.violations.push_back("mayer.polymer.T must be positive");
        else if (c.polymer.enforceAdmissible && !(c.polymer.T <= t1))
          r.violations.push_back("outside admissible temperature range");
      }
      if (c.polymer.maxBoxes < 1 || c.polymer.maxDiam < 1)
        r.violations.push_back("mayer.polymer.maxBoxes and maxDiam must be at least 1");
    }
  }

  if (!r.violations.empty()) throw ConfigError(r.violations);
  c.canonical = canonical_json(c).dump();
  return c;
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

class Writer {
 public:
  explicit Writer(const ExperimentConfig& cfg) : cfg_(cfg) {
    fs::create_directories(cfg.outDir);
    csv_ = std::find(cfg.formats.begin(), cfg.formats.end(), "csv") != cfg.formats.end();
    json_ = std::find(cfg.formats.begin(), cfg.formats.end(), "json") != cfg.formats.end();
  }

  void table(const std::string& name, const std::string& header, const std::vector<std::string>& rows,
             const json& extra, double seconds) {
    if (csv_) {
      const fs::path p = fs::path(cfg_.outDir) / (name + ".csv");
      std::ofstream out(p, std::ios::binary);
      if (!out) throw Error("cannot open " + p.string());
      out << header << "\n";
      for (const auto& r : rows) out << r << "\n";
      out.close();
      artifacts.push_back(p.filename().string());
    }
    if (json_) {
      json side;
      side["config"] = json::parse(cfg_.canonical);
      side["seed"] = cfg_.seed;
      side["libraryVersion"] = kLibraryVersion;
      side["elapsedSeconds"] = seconds;
      side["table"] = name + ".csv";
      side["diagnostics"] = extra;
      const fs::path p = fs::path(cfg_.outDir) / (name + ".json");
      std::ofstream out(p, std::ios::binary);
      if (!out) throw Error("cannot open " + p.string());
      out << side.dump(2) << "\n";
      out.close();
      artifacts.push_back(p.filename().string());
    }
  }

  void text(const std::string& name, const std::string& body) {
    const fs::path p = fs::path(cfg_.outDir) / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot open " + p.string());
    out << body;
    out.close();
    artifacts.push_back(name);
  }

  std::vector<std::string> artifacts;

 private:
  const ExperimentConfig& cfg_;
  bool csv_ = true;
  bool json_ = true;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string tname(const std::string& base, std::size_t k) { return base + "_t" + std::to_string(k); }

double oracle_psi(const SitePotentialSpec& s, double x, double y, double t, double h) {
  switch (s.kind) {
    case SitePotentialSpec::Kind::zero: return 0.0;
    case SitePotentialSpec::Kind::constant: return s.param * t;
    case SitePotentialSpec::Kind::linear: return linear_psi(x, y, s.param, t, h);
    case SitePotentialSpec::Kind::harmonic: return mehler_psi(x, y, s.param, t, h);
    default: return std::numeric_limits<double>::quiet_NaN();
  }
}

void run_kernel(const ExperimentConfig& c, Writer& w, std::vector<std::string>& violations) {
  const std::size_t N = c.lambda.size();
  std::vector<std::string> summary;
  for (std::size_t k = 0; k < c.t.size(); ++k) {
    const auto t0 = Clock::now();
    const double t = c.t[k];
    KernelField kf = spectral_kernel(c.interaction, c.lambda, c.grid, t, c.budget);
    std::vector<std::pair<std::size_t, std::size_t>> pts;
    for (std::size_t I = 0; I < kf.dim(); ++I) {
      if (!kf.in_window(I)) continue;
      for (std::size_t J = 0; J < kf.dim(); ++J)
        if (kf.in_window(J) && kf.mask(static_cast<Eigen::Index>(I), static_cast<Eigen::Index>(J))) pts.emplace_back(I, J);
    }
    const std::size_t stride = std::max<std::size_t>(1, (pts.size() + 19999) / 20000);
    std::string header = "xIndex,yIndex";
    for (std::size_t s = 0; s < N; ++s) header += ",x" + std::to_string(s);
    for (std::size_t s = 0; s < N; ++s) header += ",y" + std::to_string(s);
    header += ",U,psi";
    std::vector<std::string> rows;
    double supPsi = 0.0, oracleErr = N == 1 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
    for (std::size_t p = 0; p < pts.size(); ++p) {
      const auto [I, J] = pts[p];
      const double psi = kf.psi(static_cast<Eigen::Index>(I), static_cast<Eigen::Index>(J));
      supPsi = std::max(supPsi, std::abs(psi));
      const auto x = kf.coords(I), y = kf.coords(J);
      if (N == 1) oracleErr = std::max(oracleErr, std::abs(psi - oracle_psi(c.interaction.site, x[0], y[0], t, c.interaction.h)));
      if (p % stride) continue;
      std::string row = std::to_string(I) + "," + std::to_string(J);
      for (double v : x) row += "," + num(v);
      for (double v : y) row += "," + num(v);
      row += "," + num(kf.U(static_cast<Eigen::Index>(I), static_cast<Eigen::Index>(J))) + "," + num(psi);
      rows.push_back(std::move(row));
    }
    if (pts.empty()) violations.push_back("kernel at t = " + num(t) + " has no valid window points");
    w.table(tname("kernel", k), header, rows, {{"windowPairs", pts.size()}, {"stride", stride}}, since(t0));
    summary.push_back(num(t) + "," + std::to_string(pts.size()) + "," + num(supPsi) + "," + num(oracleErr));
  }
  w.table("kernel_summary", "t,validWindowPairs,supAbsPsi,oracleError", summary, json::object(), 0.0);
}

void run_decompose(const ExperimentConfig& c, Writer& w, std::vector<std::string>& violations) {
  const int full = c.lambda.diam();
  const int maxDiam = c.maxDiam < 0 ? full : std::min(c.maxDiam, full);
  std::vector<std::string> summary;
  for (std::size_t k = 0; k < c.t.size(); ++k) {
    const auto t0 = Clock::now();
    KernelField kf = spectral_kernel(c.interaction, c.lambda, c.grid, c.t[k], c.budget);
    auto terms = decompose(kf, c.lambda, maxDiam);
    DecayProfile prof = decay_profile(terms, c.interaction.pair.eps);
    double telescoping = std::numeric_limits<double>::quiet_NaN();
    if (maxDiam == full) {
      telescoping = 0.0;
      const Eigen::MatrixXd gauge = decomposition_gauge(kf);
      for (Eigen::Index J = 0; J < kf.psi.cols(); ++J)
        for (Eigen::Index I = 0; I < kf.psi.rows(); ++I) {
          double s = gauge(I, J);
          for (const auto& term : terms) s += term.values(I, J);
          if (std::isfinite(s)) telescoping = std::max(telescoping, std::abs(s - kf.psi(I, J)));
        }
      if (telescoping > 1e-10) violations.push_back("telescoping identity off by " + num(telescoping));
    }
    if (prof.violation) violations.push_back("T_Q sup norms do not decrease with diameter at t = " + num(c.t[k]));
    std::vector<std::string> rows;
    for (const auto& r : prof.rows)
      rows.push_back(std::to_string(r.diam) + "," + num(r.supNorm) + "," + num(r.normalized) + "," + std::to_string(r.boxes));
    w.table(tname("decay", k), "diam,supnorm,normalized,boxesCounted", rows,
            {{"slope", prof.slope}, {"violation", prof.violation}, {"telescopingError", telescoping}}, since(t0));
    summary.push_back(num(c.t[k]) + "," + num(prof.slope) + "," + (prof.violation ? "1" : "0") + "," + num(telescoping));
  }
  w.table("decompose_summary", "t,slope,violation,telescopingError", summary, json::object(), 0.0);
}

void run_mayer(const ExperimentConfig& c, Writer& w, std::vector<std::string>& violations) {
  const SiteSet sites = c.lambda.sites();
  const SiteSet e1{sites.front()}, e2{sites.back()};
  for (std::size_t k = 0; k < c.t.size(); ++k) {
    const auto t0 = Clock::now();
    MayerFactors f(spectral_kernel(c.interaction, c.lambda, c.grid, c.t[k], c.budget), c.lambda);
    const auto pts = f.sample(c.samples, c.seed + 2 * k, false);
    const auto diag = f.sample(c.samples, c.seed + 2 * k + 1, true);
    ReconstructionReport rec = mayer_reconstruct(f, pts);
    if (!(rec.maxRelError <= 1e-6)) violations.push_back("Mayer reconstruction error " + num(rec.maxRelError));
    std::vector<std::string> rows;
    const std::size_t B = f.boxes().size();
    for (std::size_t mask = 0; mask < (std::size_t{1} << B); ++mask) {
      std::vector<std::size_t> gamma;
      std::vector<Box> boxes;
      std::string label;
      for (std::size_t q = 0; q < B; ++q)
        if (mask & (std::size_t{1} << q)) {
          gamma.push_back(q);
          boxes.push_back(f.boxes()[q]);
          label += (label.empty() ? "" : " ") + f.boxes()[q].str();
        }
      if (label.empty()) label = "empty";
      if (sites.size() < 2 || classify(boxes, e1, e2) == Connectivity::C) {
        rows.push_back("\"" + label + "\",C,nan,nan,nan,0");
        continue;
      }
      CancellationReport r = nc_cancellation_check(f, gamma, e1, e2, diag);
      const double ratio = r.scale > 0 ? r.signedSup / r.scale : 0.0;
      if (ratio > 1e-10) violations.push_back("diagonal cancellation fails for " + label);
      rows.push_back("\"" + label + "\",NC," + num(r.signedSup) + "," + num(r.scale) + "," + num(ratio) + "," +
                     std::to_string(r.points));
    }
    FQFit fit = fit_fq_envelope(f, c.interaction.pair.eps);
    json fq = {{"diam", fit.diam}, {"supF", fit.supF}, {"ratio", fit.ratio}, {"a", fit.a}};
    w.table(tname("mayer", k), "gamma,class,signedSup,scale,ratio,points", rows,
            {{"reconstruction", {{"maxRelError", rec.maxRelError}, {"points", rec.points}, {"subsets", rec.subsets}}},
             {"fQEnvelope", fq},
             {"E1", sites.front().c},
             {"E2", sites.back().c}},
            since(t0));
  }
  const auto t0 = Clock::now();
  std::vector<PolymerBoundRow> prow;
  PolymerBoundOptions opt{c.polymer.maxBoxes, c.polymer.maxDiam, c.polymer.enforceAdmissible};
  std::vector<std::string> rows;
  std::vector<int> origin(static_cast<std::size_t>(c.interaction.d), 0);
  for (int r = 1; r <= 4; ++r) {
    std::vector<int> far = origin;
    far[0] = r;
    PolymerBoundRow row = polymer_bound_check({Site(origin)}, {Site(far)}, c.interaction.pair.eps, c.polymer.delta,
                                              c.polymer.T, opt);
    if (row.lhsSum > row.rhsBound) violations.push_back("polymer bound fails at distance " + std::to_string(r));
    rows.push_back(std::to_string(row.distance) + "," + num(row.lhsSum) + "," + num(row.rhsBound) + "," + num(row.margin));
  }
  w.table("polymer_bound", "distance,lhsSum,rhsBound,margin", rows,
          {{"T1", admissible_t1(c.interaction.pair.eps, c.polymer.delta, c.interaction.d)}}, since(t0));
}

Budget effective_budget(const ExperimentConfig& c) {
  Budget b = c.budget;
  if (c.method == "sparse") b.dense = 0;
  return b;
}

void run_correlate(const ExperimentConfig& c, Writer& w, std::vector<std::string>& violations) {
  for (std::size_t k = 0; k < c.t.size(); ++k) {
    const auto t0 = Clock::now();
    DecaySweepOptions opt;
    opt.budget = effective_budget(c);
    opt.probing = c.probing;
    DecayFit f = decay_sweep(c.interaction, static_cast<int>(c.lambda.size()), c.t[k], c.grid, opt);
    std::vector<std::string> rows;
    for (std::size_t i = 0; i < f.rows.size(); ++i) {
      const double n = i < f.empiricalN.size() ? f.empiricalN[i] : std::numeric_limits<double>::quiet_NaN();
      rows.push_back(std::to_string(f.rows[i].distance) + "," + num(f.rows[i].cov) + "," + num(std::abs(f.rows[i].cov)) +
                     "," + num(n));
    }
    if (f.status == "ok" && !(f.fittedDelta < 1)) violations.push_back("fitted delta " + num(f.fittedDelta) + " is not below 1");
    w.table(tname("correlate", k), "distance,cov,absCov,empiricalN", rows,
            {{"status", f.status}, {"fittedDelta", f.fittedDelta}, {"r2", f.r2}, {"monotone", f.monotone}}, since(t0));
  }
}

void run_thermo(const ExperimentConfig& c, Writer& w, std::vector<std::string>& violations) {
  for (std::size_t k = 0; k < c.t.size(); ++k) {
    const auto t0 = Clock::now();
    ThermoSweepOptions opt;
    opt.budget = effective_budget(c);
    opt.probing = c.probing;
    auto table = thermo_sweep(c.interaction, c.nRange, c.t[k], c.grid, opt);
    std::vector<std::string> rows;
    for (const auto& r : table) {
      rows.push_back(std::to_string(r.n) + "," + std::to_string(r.sites) + "," + std::to_string(r.dim) + "," +
                     num(r.meanA) + "," + num(r.energyPerSite) + "," + num(r.splitDefect) + "," + r.method + "," + r.status);
      if (r.status != "ok") violations.push_back("thermo sweep stopped at n = " + std::to_string(r.n) + ": " + r.status);
    }
    w.table(tname("thermo", k), "n,sites,dim,meanA,energyPerSite,splitDefect,method,status", rows, json::object(),
            since(t0));
  }
  if (c.theta.empty()) return;
  const int lo = c.lambda.lo[0], hi = c.lambda.hi[0], mid = lo + (hi - lo) / 2;
  const Box l1 = Box::interval(lo, mid), l2 = Box::interval(mid + 1, hi);
  for (std::size_t k = 0; k < c.t.size(); ++k) {
    const auto t0 = Clock::now();
    auto table = theta_interpolation(c.interaction, l1, l2, c.t[k], c.grid, c.theta);
    std::vector<std::string> rows;
    const SiteSet sites = c.lambda.sites();
    for (const auto& r : table)
      for (std::size_t s = 0; s < r.gradBySite.size(); ++s)
        rows.push_back(num(r.theta) + "," + std::to_string(sites[s].c[0]) + "," + std::to_string(r.distBySite[s]) + "," +
                       num(r.gradBySite[s]) + "," + num(r.supDtheta));
    w.table(tname("theta", k), "theta,site,dist,grad,supDtheta", rows, {{"split", {l1.str(), l2.str()}}}, since(t0));
  }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::optional<std::string>& experiment) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("malformed JSON: ") + e.what()});
  }
  return from_json(root, experiment);
}

ExperimentConfig parse_config(const std::string& path, const std::optional<std::string>& experiment) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file " + path});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), experiment);
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("sha256 initialisation failed");
  }
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    if (!in) break;
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

std::string schema_markdown() {
  return R"(# Output schema

Every table is a CSV file with a header row. With the `json` format enabled each table `X.csv` has a sidecar
`X.json` holding the effective config, seed, library version, elapsed seconds and per-table diagnostics.
`manifest.json` lists every artifact with its SHA-256 hash; timestamps appear only there.
Tables indexed by `_tK` belong to the K-th entry (from 0) of `schedule.t`.

## kernel

`kernel_tK.csv`: masked window pairs of the heat kernel, thinned by a fixed stride to at most 20000 rows.

| column | meaning |
|---|---|
| xIndex, yIndex | flat grid indices of x and y (site 0 most significant) |
| x0.., y0.. | coordinates per site |
| U | heat kernel value |
| psi | extracted phase |

`kernel_summary.csv`: `t, validWindowPairs, supAbsPsi, oracleError` (oracleError is the sup distance to the closed
form for single-site zero, constant, linear and harmonic potentials, `nan` otherwise).

## decompose

`decay_tK.csv`: `diam, supnorm, normalized, boxesCounted`. `supnorm` is the largest sup norm of T_Q psi over boxes of
that diameter; `normalized` divides it by t eps^diam (1 + diam)^(2d).

`decompose_summary.csv`: `t, slope, violation, telescopingError` (slope of ln supnorm against diam for diam >= 1).

## mayer

`mayer_tK.csv`: `gamma, class, signedSup, scale, ratio, points` for every subset gamma of the multi-point boxes.
`class` is C or NC for E1 = first site and E2 = last site of Lambda; NC rows report the largest signed group sum
on sampled diagonal points, the largest K_gamma on the same orbits, their ratio and the number of usable points.
The sidecar holds the reconstruction error and the f_Q envelope fit.

`polymer_bound.csv`: `distance, lhsSum, rhsBound, margin` for E1 = {0}, E2 = {r}, r = 1..4.

## correlate

`correlate_tK.csv`: `distance, cov, absCov, empiricalN`; empiricalN = |Cov| / (t delta_fit^distance), `nan` when the
fit was skipped. The sidecar holds status, fittedDelta, r2 and monotone.

## thermo

`thermo_tK.csv`: `n, sites, dim, meanA, energyPerSite, splitDefect, method, status` for Lambda_n = [-n, n];
splitDefect = |X(Lambda) - X([-n, 0]) - X([1, n])| (`nan` for n = 0).

`theta_tK.csv` (when `schedule.theta` is set): `theta, site, dist, grad, supDtheta`, with Lambda split in two halves.
)";
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  RunResult result;
  const std::string started = timestamp();
  Writer w(cfg);
  std::vector<std::string> errors;
  try {
    if (cfg.experiment == "kernel") run_kernel(cfg, w, result.violations);
    else if (cfg.experiment == "decompose") run_decompose(cfg, w, result.violations);
    else if (cfg.experiment == "mayer") run_mayer(cfg, w, result.violations);
    else if (cfg.experiment == "correlate") run_correlate(cfg, w, result.violations);
    else if (cfg.experiment == "thermo") run_thermo(cfg, w, result.violations);
    else throw Error("unknown experiment " + cfg.experiment);
  } catch (const BudgetError& e) {
    result.violations.push_back(std::string("aborted: ") + e.what() + " (dimension " + std::to_string(e.dimension()) + ")");
  } catch (const Error& e) {
    result.violations.push_back(std::string("aborted: ") + e.what());
  }
  w.text("SCHEMA.md", schema_markdown());
  result.code = result.violations.empty() ? ExitCode::ok : ExitCode::contract;

  json manifest;
  manifest["experiment"] = cfg.experiment;
  manifest["config"] = json::parse(cfg.canonical);
  manifest["seed"] = cfg.seed;
  manifest["libraryVersion"] = kLibraryVersion;
  manifest["started"] = started;
  manifest["finished"] = timestamp();
  manifest["status"] = result.violations.empty() ? "ok" : "failed";
  manifest["exitCode"] = static_cast<int>(result.code);
  manifest["violations"] = result.violations;
  json arts = json::array();
  for (const auto& a : w.artifacts) {
    const fs::path p = fs::path(cfg.outDir) / a;
    arts.push_back({{"path", a}, {"sha256", sha256_file(p.string())}, {"bytes", fs::file_size(p)}});
  }
  manifest["artifacts"] = arts;
  std::ofstream out(fs::path(cfg.outDir) / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << "\n";
  result.artifacts = w.artifacts;
  result.artifacts.push_back("manifest.json");
  return result;
}

namespace {

GridSpec small_grid(double L, int n, Stencil s = Stencil::sineDvr) {
  GridSpec g;
  g.L = L;
  g.n = n;
  g.stencil = s;
  return g;
}

InteractionSpec well_chain(double J, double eps = 0.2) {
  return {SitePotentialSpec::pseudo_linear_well(1.0), PairCouplingSpec::cosine_diff(J, eps), 1, 1.0};
}

double sup_mask(const KernelField& kf, const std::function<double(Eigen::Index, Eigen::Index)>& f) {
  double s = 0.0;
  for (Eigen::Index J = 0; J < kf.psi.cols(); ++J)
    for (Eigen::Index I = 0; I < kf.psi.rows(); ++I)
      if (kf.mask(I, J)) s = std::max(s, std::abs(f(I, J)));
  return s;
}

CheckResult below(std::string name, double value, double tol) { return {std::move(name), value <= tol, value, tol}; }

void core_checks(std::vector<CheckResult>& out) {
  const InteractionSpec lin{SitePotentialSpec::linear(0.5), PairCouplingSpec::zero(), 1, 1.0};
  KernelField kl = spectral_kernel(lin, Box::interval(0, 0), small_grid(8.0, 128), 0.1);
  out.push_back(below("core: linear kernel against closed form", sup_mask(kl, [&](auto I, auto J) {
                        return kl.psi(I, J) - linear_psi(kl.coords(I)[0], kl.coords(J)[0], 0.5, 0.1, 1.0);
                      }), 1e-4));
  const InteractionSpec harm{SitePotentialSpec::harmonic(1.0), PairCouplingSpec::zero(), 1, 1.0};
  KernelField kh = spectral_kernel(harm, Box::interval(0, 0), small_grid(8.0, 128), 0.1);
  const double scale = sup_mask(kh, [&](auto I, auto J) { return mehler_psi(kh.coords(I)[0], kh.coords(J)[0], 1.0, 0.1, 1.0); });
  out.push_back(below("core: harmonic kernel against Mehler (relative)", sup_mask(kh, [&](auto I, auto J) {
                        return kh.psi(I, J) - mehler_psi(kh.coords(I)[0], kh.coords(J)[0], 1.0, 0.1, 1.0);
                      }) / scale, 1e-3));
  const Box lambda = Box::interval(0, 2);
  KernelField kf = spectral_kernel(well_chain(0.1), lambda, small_grid(2.5, 9), 0.3);
  const auto terms = decompose(kf, lambda, lambda.diam());
  const Eigen::MatrixXd gauge = decomposition_gauge(kf);
  double tele = 0.0;
  for (Eigen::Index J = 0; J < kf.psi.cols(); ++J)
    for (Eigen::Index I = 0; I < kf.psi.rows(); ++I) {
      double v = gauge(I, J);
      for (const auto& t : terms) v += t.values(I, J);
      if (std::isfinite(v)) tele = std::max(tele, std::abs(v - kf.psi(I, J)));
    }
  out.push_back(below("core: telescoping sum of T_Q psi", tele, 1e-10));
}

void decay_checks(std::vector<CheckResult>& out) {
  const Box lambda = Box::interval(0, 2);
  KernelField kf = spectral_kernel(well_chain(0.1), lambda, small_grid(2.5, 9), 0.3);
  DecayProfile p = decay_profile(decompose(kf, lambda, lambda.diam()), 0.2);
  out.push_back(below("decay: sup norms decrease with diameter", p.violation ? 1.0 : 0.0, 0.0));
  DecaySweepOptions opt;
  DecayFit zero = decay_sweep(well_chain(0.0), 3, 0.3, small_grid(3.0, 10, Stencil::central3), opt);
  double supCov = 0.0;
  for (const auto& r : zero.rows) supCov = std::max(supCov, std::abs(r.cov));
  out.push_back(below("decay: decoupled chain covariance", supCov, 1e-12));
  DecayFit fit = decay_sweep(well_chain(0.1), 3, 0.3, small_grid(3.0, 10, Stencil::central3), opt);
  out.push_back(below("decay: fitted delta", fit.status == "ok" ? fit.fittedDelta : 1.0, 0.5));
}

void cluster_checks(std::vector<CheckResult>& out) {
  const Box lambda = Box::interval(0, 2);
  MayerFactors f(spectral_kernel(well_chain(0.1), lambda, small_grid(2.5, 11), 0.3), lambda);
  out.push_back(below("cluster: Mayer reconstruction", mayer_reconstruct(f, f.sample(100, 7, false)).maxRelError, 1e-6));
  const SiteSet e1{Site{0}}, e2{Site{2}};
  const auto diag = f.sample(100, 8, true);
  double worst = 0.0;
  const std::size_t B = f.boxes().size();
  for (std::size_t mask = 0; mask < (std::size_t{1} << B); ++mask) {
    std::vector<std::size_t> gamma;
    std::vector<Box> boxes;
    for (std::size_t q = 0; q < B; ++q)
      if (mask & (std::size_t{1} << q)) {
        gamma.push_back(q);
        boxes.push_back(f.boxes()[q]);
      }
    if (classify(boxes, e1, e2) == Connectivity::C) continue;
    CancellationReport r = nc_cancellation_check(f, gamma, e1, e2, diag);
    if (r.scale > 0) worst = std::max(worst, r.signedSup / r.scale);
  }
  out.push_back(below("cluster: NC diagonal cancellation (relative)", worst, 1e-10));
  const double T = 0.5 * admissible_t1(0.2, 0.5, 1);
  double margin = std::numeric_limits<double>::infinity();
  for (int r = 1; r <= 4; ++r) {
    PolymerBoundRow row = polymer_bound_check({Site{0}}, {Site{r}}, 0.2, 0.5, T);
    margin = std::min(margin, row.margin);
  }
  out.push_back(below("cluster: polymer bound (negated margin)", -margin, 0.0));
}

void thermo_checks(std::vector<CheckResult>& out) {
  ThermoSweepOptions opt;
  auto rows = thermo_sweep(well_chain(0.0), {0, 1, 2}, 0.2, small_grid(3.0, 7, Stencil::central3), opt);
  double defect = 0.0;
  for (const auto& r : rows)
    if (r.n > 0) defect = std::max(defect, r.splitDefect);
  out.push_back(below("thermo: decoupled split defect", defect, 1e-10));
  const Box lambda = Box::interval(0, 1);
  const GridSpec g = small_grid(3.0, 10, Stencil::central3);
  LatticeOperator H = build_hamiltonian(well_chain(0.1), lambda, g);
  Observable a = Observable::multiplication({Site{0}}, g, [](const double* x) { return std::tanh(x[0]); });
  Observable b = Observable::multiplication({Site{1}}, g, [](const double* x) { return std::cos(x[0]); });
  const SiteSet sites = lambda.sites();
  const double ab = covariance(H, sites, a, b, 0.3), ba = covariance(H, sites, b, a, 0.3);
  out.push_back(below("thermo: covariance symmetry", std::abs(ab - ba), 1e-14));
}

}  // namespace

std::vector<CheckResult> verify_suite(const std::string& suite) {
  std::vector<CheckResult> out;
  const bool all = suite == "all";
  if (!all && suite != "core" && suite != "decay" && suite != "cluster" && suite != "thermo")
    throw ConfigError({"suite must be one of core, decay, cluster, thermo, all"});
  if (all || suite == "core") core_checks(out);
  if (all || suite == "decay") decay_checks(out);
  if (all || suite == "cluster") cluster_checks(out);
  if (all || suite == "thermo") thermo_checks(out);
  return out;
}

}  // namespace qlat
