#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "bhchaos/sweep.hpp"

namespace bhchaos {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> SweepConfig::lambda_values() const {
  std::vector<double> out = lambdas;
  if (out.empty()) {
    if (grid.points < 1 || !(grid.min > 0.0) || !(grid.max >= grid.min))
      throw std::invalid_argument("bad lambda grid");
    const double lo = std::log(grid.min), hi = std::log(grid.max);
    for (int i = 0; i < grid.points; ++i) {
      const double f = grid.points == 1 ? 0.0 : double(i) / (grid.points - 1);
      out.push_back(std::exp(lo + f * (hi - lo)));
    }
    if (grid.presets)
      for (double p : kLambdaPresets)
        if (p >= grid.min && p <= grid.max) out.push_back(p);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(),
                        [](double a, double b) {
                          return std::abs(a - b) <= 1e-12 * std::abs(b);
                        }),
            out.end());
  return out;
}

std::vector<int> SweepConfig::window_indices() const {
  if (window_subset.empty()) {
    std::vector<int> all(static_cast<std::size_t>(windows));
    for (int i = 0; i < windows; ++i) all[static_cast<std::size_t>(i)] = i;
    return all;
  }
  std::set<int> s(window_subset.begin(), window_subset.end());
  return {s.begin(), s.end()};
}

int SweepConfig::effective_heatmap_bosons() const {
  if (heatmap_bosons > 0) return heatmap_bosons;
  if (bosons.empty()) throw std::invalid_argument("empty N list");
  return *std::max_element(bosons.begin(), bosons.end());
}

ChainParams SweepConfig::chain(double lambda, int n) const {
  return make_chain(sites, couplings, lambda, n);
}

std::filesystem::path SweepConfig::cache_path() const {
  return cache_dir.empty() ? out / "cache" : cache_dir;
}

namespace {

const char* average_name(KurtosisAverage a) {
  return a == KurtosisAverage::pooled ? "pooled" : "per_state";
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void validate(const SweepConfig& c) {
  make_chain(c.sites, c.couplings, 0.0, 1);
  if (c.windows < 1) throw std::invalid_argument("windows must be >= 1");
  for (int w : c.window_subset)
    if (w < 0 || w >= c.windows)
      throw std::invalid_argument("window_subset index out of range");
  if (c.samples_per_window < 1)
    throw std::invalid_argument("samples_per_window must be >= 1");
  if (!(c.ftle.t_total > 0.0)) throw std::invalid_argument("t_total must be > 0");
  if (c.max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
  if (c.bounds_restarts < 1)
    throw std::invalid_argument("bounds_restarts must be >= 1");
  for (int n : c.bosons)
    if (n < 1) throw std::invalid_argument("N must be >= 1");
  if (c.heatmap_bosons < 0) throw std::invalid_argument("heatmap_N must be >= 0");
  if (c.bins < 2) throw std::invalid_argument("bins must be >= 2");
  if (c.workers < 1) throw std::invalid_argument("workers must be >= 1");
  for (double l : c.lambdas)
    if (!(l >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  c.lambda_values();
}

}  // namespace

void to_json(json& j, const SweepConfig& c) {
  std::vector<std::string> bases;
  for (auto b : c.bases) bases.push_back(to_string(b));
  j = json{
      {"lambdas", c.lambdas},
      {"lambda_grid",
       {{"points", c.grid.points},
        {"min", c.grid.min},
        {"max", c.grid.max},
        {"presets", c.grid.presets}}},
      {"L", c.sites},
      {"couplings", c.couplings},
      {"windows", c.windows},
      {"window_subset", c.window_subset},
      {"samples_per_window", c.samples_per_window},
      {"t_total", c.ftle.t_total},
      {"renorm",
       {{"interval", c.ftle.renorm.interval},
        {"min_norm", c.ftle.renorm.min_norm},
        {"max_norm", c.ftle.renorm.max_norm}}},
      {"tolerance",
       {{"abs", c.ftle.tol.abs_tol},
        {"rel", c.ftle.tol.rel_tol},
        {"initial_dt", c.ftle.tol.initial_dt},
        {"min_dt", c.ftle.tol.min_dt}}},
      {"cutoff", c.ftle.cutoff},
      {"project_deviation", c.ftle.project_deviation},
      {"max_attempts", c.max_attempts},
      {"bounds_restarts", c.bounds_restarts},
      {"N", c.bosons},
      {"heatmap_N", c.heatmap_bosons},
      {"bins", c.bins},
      {"kurtosis_average", average_name(c.kurtosis_average)},
      {"bases", bases},
      {"caps",
       {{"kl", c.caps.kl},
        {"kurtosis", c.caps.kurtosis},
        {"exponent_lo", c.caps.exponent_lo},
        {"exponent_hi", c.caps.exponent_hi}}},
      {"seed", c.seed},
      {"workers", c.workers},
      {"out", c.out.string()},
      {"cache_dir", c.cache_dir.string()},
      {"max_new_cells", c.max_new_cells},
  };
}

void from_json(const json& j, SweepConfig& c) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  static const std::set<std::string> known = {
      "lambdas", "lambda_grid", "L", "couplings", "windows", "window_subset",
      "samples_per_window", "t_total", "renorm", "tolerance", "cutoff",
      "project_deviation", "max_attempts", "bounds_restarts", "N", "heatmap_N",
      "bins", "kurtosis_average", "bases", "caps", "seed", "workers", "out",
      "cache_dir", "max_new_cells", "export"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw std::invalid_argument("unknown config key: " + k);

  SweepConfig d;
  c.lambdas = j.value("lambdas", d.lambdas);
  if (j.contains("lambda_grid")) {
    const auto& g = j.at("lambda_grid");
    c.grid.points = g.value("points", d.grid.points);
    c.grid.min = g.value("min", d.grid.min);
    c.grid.max = g.value("max", d.grid.max);
    c.grid.presets = g.value("presets", d.grid.presets);
  }
  c.sites = j.value("L", d.sites);
  c.couplings = j.value("couplings", d.couplings);
  c.windows = j.value("windows", d.windows);
  c.window_subset = j.value("window_subset", d.window_subset);
  c.samples_per_window = j.value("samples_per_window", d.samples_per_window);
  c.ftle.t_total = j.value("t_total", d.ftle.t_total);
  if (j.contains("renorm")) {
    const auto& r = j.at("renorm");
    c.ftle.renorm.interval = r.value("interval", d.ftle.renorm.interval);
    c.ftle.renorm.min_norm = r.value("min_norm", d.ftle.renorm.min_norm);
    c.ftle.renorm.max_norm = r.value("max_norm", d.ftle.renorm.max_norm);
  }
  if (j.contains("tolerance")) {
    const auto& t = j.at("tolerance");
    c.ftle.tol.abs_tol = t.value("abs", d.ftle.tol.abs_tol);
    c.ftle.tol.rel_tol = t.value("rel", d.ftle.tol.rel_tol);
    c.ftle.tol.initial_dt = t.value("initial_dt", d.ftle.tol.initial_dt);
    c.ftle.tol.min_dt = t.value("min_dt", d.ftle.tol.min_dt);
  }
  c.ftle.cutoff = j.value("cutoff", d.ftle.cutoff);
  c.ftle.project_deviation = j.value("project_deviation", d.ftle.project_deviation);
  c.max_attempts = j.value("max_attempts", d.max_attempts);
  c.bounds_restarts = j.value("bounds_restarts", d.bounds_restarts);
  c.bosons = j.value("N", d.bosons);
  c.heatmap_bosons = j.value("heatmap_N", d.heatmap_bosons);
  c.bins = j.value("bins", d.bins);
  const auto avg = j.value("kurtosis_average", std::string("per_state"));
  if (avg == "per_state") c.kurtosis_average = KurtosisAverage::per_state;
  else if (avg == "pooled") c.kurtosis_average = KurtosisAverage::pooled;
  else throw std::invalid_argument("kurtosis_average must be per_state or pooled");
  if (j.contains("bases")) {
    c.bases.clear();
    for (const auto& b : j.at("bases"))
      c.bases.push_back(basis_kind_from_string(b.get<std::string>()));
  } else {
    c.bases = d.bases;
  }
  if (j.contains("caps")) {
    const auto& k = j.at("caps");
    c.caps.kl = k.value("kl", d.caps.kl);
    c.caps.kurtosis = k.value("kurtosis", d.caps.kurtosis);
    c.caps.exponent_lo = k.value("exponent_lo", d.caps.exponent_lo);
    c.caps.exponent_hi = k.value("exponent_hi", d.caps.exponent_hi);
  }
  c.seed = j.value("seed", d.seed);
  c.workers = j.value("workers", d.workers);
  c.out = j.value("out", d.out.string());
  c.cache_dir = j.value("cache_dir", std::string());
  c.max_new_cells = j.value("max_new_cells", d.max_new_cells);
  validate(c);
}

SweepConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return j.get<SweepConfig>();
}

std::string SweepConfig::content_hash() const {
  json j = *this;
  for (const char* k : {"workers", "out", "cache_dir", "max_new_cells"}) j.erase(k);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

std::string to_string(CellStatus s) {
  switch (s) {
    case CellStatus::done: return "done";
    case CellStatus::empty: return "empty";
    case CellStatus::failed: return "failed";
    case CellStatus::pending: return "pending";
  }
  return "unknown";
}

}  // namespace bhchaos
