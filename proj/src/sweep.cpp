#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "bhchaos/seeding.hpp"
#include "bhchaos/sweep.hpp"

namespace bhchaos {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kClassicalTag = 0xc1a5;
constexpr std::uint64_t kBoundsTag = 0xb0b0;

struct Job {
  std::string id;
  fs::path file;
  std::function<json()> compute;
};

void write_atomic(const fs::path& path, const std::string& body) {
  fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << body;
    if (!os) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::optional<json> read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    return json::parse(in);
  } catch (const json::parse_error&) {
    return std::nullopt;
  }
}

std::string cell_name(const char* prefix, int a, const char* mid, int b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%03d%s%03d", prefix, a, mid, b);
  return buf;
}

template <class F>
void parallel_for(std::size_t n, int workers, F&& f) {
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) f(i);
  };
  const auto extra = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::vector<std::jthread> pool;
  for (std::size_t w = 1; w < extra; ++w) pool.emplace_back(body);
  body();
}

CellStatus status_from(const json& j) {
  const auto s = j.value("status", std::string("failed"));
  if (s == "done") return CellStatus::done;
  if (s == "empty") return CellStatus::empty;
  return CellStatus::failed;
}

// Reuses cell files carrying the current config hash, computes up to
// `max_new_cells` of the rest on the pool, and fills `results`.
SweepSummary run_jobs(const std::vector<Job>& jobs, const SweepConfig& config,
                      std::vector<std::optional<json>>& results) {
  const auto hash = config.content_hash();
  SweepSummary summary;
  summary.jobs.resize(jobs.size());
  results.assign(jobs.size(), std::nullopt);

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto& entry = summary.jobs[i];
    entry.id = jobs[i].id;
    if (auto j = read_json(jobs[i].file);
        j && j->value("config_hash", std::string()) == hash) {
      entry.status = status_from(*j);
      entry.reused = true;
      results[i] = std::move(*j);
    } else {
      todo.push_back(i);
    }
  }
  if (config.max_new_cells >= 0 &&
      todo.size() > static_cast<std::size_t>(config.max_new_cells))
    todo.resize(static_cast<std::size_t>(config.max_new_cells));

  std::mutex writer;
  parallel_for(todo.size(), config.workers, [&](std::size_t k) {
    const std::size_t i = todo[k];
    auto& entry = summary.jobs[i];
    const auto start = std::chrono::steady_clock::now();
    try {
      json j = jobs[i].compute();
      j["config_hash"] = hash;
      entry.status = status_from(j);
      std::lock_guard lock(writer);
      write_atomic(jobs[i].file, j.dump());
      results[i] = std::move(j);
    } catch (const std::exception& e) {
      entry.status = CellStatus::failed;
      entry.message = e.what();
    }
    entry.seconds = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - start)
                        .count();
  });

  for (const auto& e : summary.jobs) {
    if (e.status == CellStatus::pending) ++summary.pending;
    else if (e.reused) ++summary.reused;
    else ++summary.computed;
    if (e.status == CellStatus::failed) ++summary.failed;
    if (e.status == CellStatus::empty) ++summary.empty;
  }
  return summary;
}

void write_manifest(const SweepConfig& config, const std::string& section,
                    const SweepSummary& summary, const json& extra) {
  const auto path = config.out / "manifest.json";
  const auto hash = config.content_hash();
  json m;
  if (auto old = read_json(path); old && old->value("config_hash", "") == hash)
    m = std::move(*old);
  m["config_hash"] = hash;
  m["config"] = config;

  json jobs = json::array();
  for (const auto& e : summary.jobs) {
    json j{{"id", e.id}, {"status", to_string(e.status)}, {"reused", e.reused},
           {"seconds", e.seconds}};
    if (!e.message.empty()) j["message"] = e.message;
    jobs.push_back(std::move(j));
  }
  json artifacts = json::array();
  for (const auto& a : summary.artifacts) artifacts.push_back(a.string());
  json s{{"jobs", jobs},
         {"computed", summary.computed},
         {"reused", summary.reused},
         {"failed", summary.failed},
         {"empty", summary.empty},
         {"pending", summary.pending},
         {"complete", summary.complete()},
         {"artifacts", artifacts}};
  for (const auto& [k, v] : extra.items()) s[k] = v;
  m[section] = std::move(s);
  write_atomic(path, m.dump(2) + "\n");
}

struct HeatCell {
  double lambda = 0.0;
  int window = 0;
  double e_rel = 0.0;
  std::optional<double> raw;
  std::optional<double> display;
  int samples = 0;
};

void write_heatmap(const fs::path& path, const std::vector<HeatCell>& cells) {
  std::ostringstream os;
  os << "lambda,window_index,E_rel,value_raw,value_display,n_samples\n";
  for (const auto& c : cells) {
    os << format_double(c.lambda) << ',' << c.window << ','
       << format_double(c.e_rel) << ','
       << (c.raw ? format_double(*c.raw) : "") << ','
       << (c.display ? format_double(*c.display) : "") << ',' << c.samples
       << '\n';
  }
  write_atomic(path, os.str());
}

std::optional<double> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

json opt_to(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

int kurtosis_slot(BasisKind k) {
  switch (k) {
    case BasisKind::computational: return 1;
    case BasisKind::free: return 2;
    case BasisKind::perturbed_free: return 3;
  }
  return 0;
}

}  // namespace

std::string kurtosis_metric_name(BasisKind kind) {
  return "kurtosis_" + std::to_string(kurtosis_slot(kind));
}

SweepSummary run_classical_sweep(const SweepConfig& config) {
  const auto lambdas = config.lambda_values();
  const auto windows = config.window_indices();
  const auto dir = config.out / "cells" / "classical";

  std::vector<EnergyBounds> bounds;
  for (std::size_t li = 0; li < lambdas.size(); ++li)
    bounds.push_back(classical_energy_bounds(
        config.chain(lambdas[li]), config.bounds_restarts,
        derive_seed(config.seed, {kBoundsTag, li})));

  std::vector<Job> jobs;
  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    for (int w : windows) {
      Job job;
      job.id = cell_name("classical_l", static_cast<int>(li), "_w", w);
      job.file = dir / (job.id + ".json");
      job.compute = [&config, &bounds, &lambdas, li, w] {
        const auto params = config.chain(lambdas[li]);
        const auto& b = bounds[li];
        const auto window = make_windows(b.e_min, b.e_max, config.windows)
            [static_cast<std::size_t>(w)];
        const auto cell_seed = derive_seed(
            config.seed, {kClassicalTag, li, static_cast<std::uint64_t>(w)});
        json records = json::array();
        bool exhausted = false, any_invalid = false;
        for (int s = 0; s < config.samples_per_window; ++s) {
          const auto base = derive_seed(cell_seed, {static_cast<std::uint64_t>(s)});
          const auto sample = sample_in_window(params, window, config.max_attempts,
                                               derive_seed(base, {0}));
          if (!sample) {
            exhausted = true;
            break;
          }
          const auto r = ftle_max(sample->state, params, config.ftle, base);
          any_invalid |= !r.valid;
          records.push_back({{"state", r.initial.coords},
                             {"E", r.energy},
                             {"t_total", r.t_total},
                             {"lyapunov", r.lyapunov},
                             {"positive", r.positive},
                             {"valid", r.valid},
                             {"seed", r.seed},
                             {"renormalizations", r.renormalizations}});
        }
        const char* status = records.empty() ? "empty"
                             : any_invalid    ? "failed"
                                              : "done";
        return json{{"kind", "classical"},
                    {"lambda", lambdas[li]},
                    {"window_index", w},
                    {"E_rel", window.rel_hi},
                    {"e_min", b.e_min},
                    {"e_max", b.e_max},
                    {"exhausted", exhausted},
                    {"status", status},
                    {"records", records}};
      };
      jobs.push_back(std::move(job));
    }
  }

  std::vector<std::optional<json>> results;
  auto summary = run_jobs(jobs, config, results);

  json bounds_json = json::array();
  for (std::size_t li = 0; li < lambdas.size(); ++li)
    bounds_json.push_back({{"lambda", lambdas[li]},
                           {"e_min", bounds[li].e_min},
                           {"e_max", bounds[li].e_max},
                           {"converged", bounds[li].converged}});

  if (summary.complete()) {
    std::ostringstream rec;
    rec << "lambda,window_index,E,t_total,lyapunov,positive,seed\n";
    std::vector<HeatCell> frac, beta, gamma;
    std::size_t k = 0;
    for (std::size_t li = 0; li < lambdas.size(); ++li) {
      std::vector<std::vector<FtleRecord>> per_window;
      double gmax = 0.0;
      for (std::size_t wi = 0; wi < windows.size(); ++wi, ++k) {
        std::vector<FtleRecord> valid;
        const json none = json::array();
        const auto& recs = results[k] ? results[k]->at("records") : none;
        for (const auto& r : recs) {
          if (!r.at("valid").get<bool>()) continue;
          FtleRecord f;
          f.energy = r.at("E").get<double>();
          f.t_total = r.at("t_total").get<double>();
          f.lyapunov = r.at("lyapunov").get<double>();
          f.positive = r.at("positive").get<bool>();
          f.seed = r.at("seed").get<std::uint64_t>();
          gmax = std::max(gmax, f.lyapunov);
          rec << format_double(lambdas[li]) << ',' << windows[wi] << ','
              << format_double(f.energy) << ',' << format_double(f.t_total)
              << ',' << format_double(f.lyapunov) << ',' << (f.positive ? 1 : 0)
              << ',' << f.seed << '\n';
          valid.push_back(f);
        }
        per_window.push_back(std::move(valid));
      }
      for (std::size_t wi = 0; wi < windows.size(); ++wi) {
        const auto& v = per_window[wi];
        HeatCell c{lambdas[li], windows[wi],
                   static_cast<double>(windows[wi] + 1) / config.windows,
                   std::nullopt, std::nullopt, static_cast<int>(v.size())};
        auto f = c, b = c, g = c;
        f.raw = f.display = positive_fraction(v, config.ftle.cutoff);
        b.raw = b.display = rescaled_mean_ftle(v, FtleScaling::beta, lambdas[li], gmax);
        g.raw = g.display = rescaled_mean_ftle(v, FtleScaling::gamma, lambdas[li], gmax);
        frac.push_back(f);
        beta.push_back(b);
        gamma.push_back(g);
      }
    }
    const auto rec_path = config.out / "ftle_records.csv";
    write_atomic(rec_path, rec.str());
    std::ostringstream bcsv;
    bcsv << "lambda,e_min,e_max,converged\n";
    for (std::size_t li = 0; li < lambdas.size(); ++li)
      bcsv << format_double(lambdas[li]) << ',' << format_double(bounds[li].e_min)
           << ',' << format_double(bounds[li].e_max) << ','
           << (bounds[li].converged ? 1 : 0) << '\n';
    const auto bounds_path = config.out / "classical_bounds.csv";
    write_atomic(bounds_path, bcsv.str());
    const std::pair<const char*, const std::vector<HeatCell>*> maps[] = {
        {"positive_fraction", &frac}, {"ftle_beta", &beta}, {"ftle_gamma", &gamma}};
    for (const auto& [name, cells] : maps) {
      const auto p = config.out / (std::string("heatmap_") + name + ".csv");
      write_heatmap(p, *cells);
      summary.artifacts.push_back(p);
    }
    summary.artifacts.push_back(rec_path);
    summary.artifacts.push_back(bounds_path);
  }

  write_manifest(config, "classical", summary, json{{"bounds", bounds_json}});
  return summary;
}

std::vector<QuantumWindowMetrics> quantum_window_metrics(
    const SpectrumBundle& bundle, const FockBasis& basis,
    const SweepConfig& config) {
  const auto indices = config.window_indices();
  const auto& ev = bundle.eigenvalues;
  const std::span<const double> levels(ev.data(), static_cast<std::size_t>(ev.size()));

  std::vector<QuantumWindowMetrics> out;
  for (int w : indices) {
    QuantumWindowMetrics m;
    m.window_index = w;
    m.e_rel = static_cast<double>(w + 1) / config.windows;
    m.kurtosis.assign(config.bases.size(), std::nullopt);
    out.push_back(std::move(m));
  }
  if (levels.size() < 2 || !(levels.back() > levels.front())) return out;

  const auto windows = make_windows(levels.front(), levels.back(), config.windows);
  std::vector<std::span<const double>> in_window;
  for (auto& m : out) {
    const auto& win = windows[static_cast<std::size_t>(m.window_index)];
    const auto lo = std::find_if(levels.begin(), levels.end(),
                                 [&](double e) { return win.contains(e); });
    auto hi = lo;
    while (hi != levels.end() && win.contains(*hi)) ++hi;
    const std::span<const double> sub(lo, hi);
    in_window.push_back(sub);
    m.levels = static_cast<int>(sub.size());
    if (sub.size() < 3) continue;
    const auto ratios = spacing_ratios(sub);
    m.ratios = static_cast<int>(ratios.values.size());
    if (ratios.empty()) continue;
    m.kl_goe = kl_divergence(ratios, ReferenceKind::goe, config.bins);
    m.kl_poisson = kl_divergence(ratios, ReferenceKind::poisson, config.bins);
    m.dist_goe = mean_ratio_distance(ratios, ReferenceKind::goe);
    m.dist_poisson = mean_ratio_distance(ratios, ReferenceKind::poisson);
  }

  if (!bundle.has_vectors()) return out;

  for (std::size_t b = 0; b < config.bases.size(); ++b) {
    Eigen::MatrixXd coeffs;
    try {
      coeffs = coefficients_in_basis(
          bundle, make_basis(config.bases[b], bundle.params, basis));
    } catch (const std::invalid_argument&) {
      continue;  // basis undefined for this chain
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
      const auto& win = windows[static_cast<std::size_t>(out[k].window_index)];
      try {
        out[k].kurtosis[b] =
            window_kurtosis(coeffs, levels, win, config.kurtosis_average);
      } catch (const std::invalid_argument&) {
        // fewer than 4 coefficients or zero variance: null
      }
    }
  }

  const auto eevs = eev_hopping(bundle, basis);
  for (auto& m : out)
    m.eev_sigma = eev_sigma(eevs, levels,
                            windows[static_cast<std::size_t>(m.window_index)]);
  return out;
}

SweepSummary run_quantum_sweep(const SweepConfig& config) {
  const auto lambdas = config.lambda_values();
  const auto heat_n = config.effective_heatmap_bosons();
  std::vector<int> ns = config.bosons;
  if (std::find(ns.begin(), ns.end(), heat_n) == ns.end()) ns.push_back(heat_n);
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());

  const SpectrumCache cache(config.cache_path());
  const auto dir = config.out / "cells" / "quantum";

  std::vector<Job> jobs;
  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    for (int n : ns) {
      Job job;
      job.id = cell_name("quantum_l", static_cast<int>(li), "_N", n);
      job.file = dir / (job.id + ".json");
      job.compute = [&config, &cache, &lambdas, li, n] {
        const auto params = config.chain(lambdas[li], n);
        bool hit = false;
        const auto bundle = cache.get(params, true, &hit);
        const auto basis = enumerate_fock_basis(n, params.sites);
        json wins = json::array();
        for (const auto& m : quantum_window_metrics(bundle, basis, config)) {
          json k = json::array();
          for (const auto& v : m.kurtosis) k.push_back(opt_to(v));
          wins.push_back({{"window_index", m.window_index},
                          {"E_rel", m.e_rel},
                          {"levels", m.levels},
                          {"ratios", m.ratios},
                          {"kl_goe", opt_to(m.kl_goe)},
                          {"kl_poisson", opt_to(m.kl_poisson)},
                          {"ratio_dist_goe", opt_to(m.dist_goe)},
                          {"ratio_dist_poisson", opt_to(m.dist_poisson)},
                          {"kurtosis", k},
                          {"eev_sigma", opt_to(m.eev_sigma)}});
        }
        return json{{"kind", "quantum"},
                    {"lambda", lambdas[li]},
                    {"N", n},
                    {"D", bundle.dimension()},
                    {"e_min", bundle.eigenvalues[0]},
                    {"e_max", bundle.eigenvalues[bundle.eigenvalues.size() - 1]},
                    {"cache_hit", hit},
                    {"status", "done"},
                    {"windows", wins}};
      };
      jobs.push_back(std::move(job));
    }
  }

  std::vector<std::optional<json>> results;
  auto summary = run_jobs(jobs, config, results);

  if (summary.complete()) {
    std::map<std::string, std::vector<HeatCell>> maps;
    const auto capped = [](std::optional<double> v, double cap) {
      return v ? std::optional<double>(std::min(*v, cap)) : std::nullopt;
    };
    std::vector<std::string> order = {"kl_goe", "kl_poisson", "ratio_dist_goe",
                                      "ratio_dist_poisson"};
    std::vector<std::pair<int, std::size_t>> slots;  // (kappa index, basis slot)
    for (std::size_t b = 0; b < config.bases.size(); ++b)
      slots.emplace_back(kurtosis_slot(config.bases[b]), b);
    std::sort(slots.begin(), slots.end());
    for (const auto& [idx, b] : slots) order.push_back(kurtosis_metric_name(config.bases[b]));
    order.push_back("kurtosis_max");
    order.push_back("eev_exponent");

    std::ostringstream metrics;
    metrics << "lambda,window_index,E_rel,metric_name,value_raw,value_display,n_samples\n";

    std::size_t k = 0;
    for (std::size_t li = 0; li < lambdas.size(); ++li) {
      const json* heat = nullptr;
      std::vector<const json*> per_n;
      for (int n : ns) {
        const auto& r = results[k++];
        if (!r) continue;  // job threw; its cells stay null
        per_n.push_back(&*r);
        if (n == heat_n) heat = &*r;
      }
      if (!heat) {
        for (const auto& name : order)
          for (int widx : config.window_indices())
            maps[name].push_back({lambdas[li], widx,
                                  static_cast<double>(widx + 1) / config.windows,
                                  std::nullopt, std::nullopt, 0});
        continue;
      }
      const auto& wins = heat->at("windows");
      for (std::size_t wi = 0; wi < wins.size(); ++wi) {
        const auto& w = wins[wi];
        const int widx = w.at("window_index").get<int>();
        const double e_rel = w.at("E_rel").get<double>();
        const int ratios = w.at("ratios").get<int>();
        const int levels = w.at("levels").get<int>();
        auto cell = [&](const std::string& name, std::optional<double> raw,
                        std::optional<double> display, int samples) {
          maps[name].push_back({lambdas[li], widx, e_rel, raw, display, samples});
        };
        for (const char* name : {"kl_goe", "kl_poisson"}) {
          const auto v = opt_from(w, name);
          cell(name, v, capped(v, config.caps.kl), ratios);
        }
        for (const char* name : {"ratio_dist_goe", "ratio_dist_poisson"}) {
          const auto v = opt_from(w, name);
          cell(name, v, v, ratios);
        }
        std::optional<double> k1, k3;
        for (const auto& [idx, b] : slots) {
          const auto& kv = w.at("kurtosis")[b];
          const auto v = kv.is_null() ? std::nullopt : std::optional<double>(kv.get<double>());
          if (idx == 1) k1 = v;
          if (idx == 3) k3 = v;
          cell(kurtosis_metric_name(config.bases[b]), v, capped(v, config.caps.kurtosis), levels);
        }
        const auto kmax = k1 && k3 ? std::optional<double>(std::max(*k1, *k3)) : std::nullopt;
        cell("kurtosis_max", kmax, capped(kmax, config.caps.kurtosis), levels);

        std::vector<std::pair<double, double>> pts;
        for (const json* r : per_n) {
          const auto& rw = r->at("windows")[wi];
          if (const auto s = opt_from(rw, "eev_sigma"))
            pts.emplace_back(r->at("D").get<double>(), *s);
        }
        std::optional<double> raw, display;
        int used = 0;
        try {
          if (const auto fit = fit_scaling_exponent(pts)) {
            raw = fit->raw;
            display = std::clamp(fit->raw, config.caps.exponent_lo, config.caps.exponent_hi);
            used = fit->points;
          }
        } catch (const std::invalid_argument&) {
          // repeated dimensions: null
        }
        cell("eev_exponent", raw, display, used);
      }
    }

    for (const auto& name : order) {
      const auto& cells = maps[name];
      const auto p = config.out / ("heatmap_" + name + ".csv");
      write_heatmap(p, cells);
      summary.artifacts.push_back(p);
    }
    // Long format, metric-major within each (lambda, window).
    const auto& ref = maps[order.front()];
    for (std::size_t i = 0; i < ref.size(); ++i) {
      for (const auto& name : order) {
        const auto& c = maps[name][i];
        metrics << format_double(c.lambda) << ',' << c.window << ','
                << format_double(c.e_rel) << ',' << name << ','
                << (c.raw ? format_double(*c.raw) : "") << ','
                << (c.display ? format_double(*c.display) : "") << ','
                << c.samples << '\n';
      }
    }
    const auto mpath = config.out / "metrics.csv";
    write_atomic(mpath, metrics.str());
    summary.artifacts.push_back(mpath);
  }

  write_manifest(config, "quantum", summary,
                 json{{"heatmap_N", heat_n}, {"N", ns}});
  return summary;
}

}  // namespace bhchaos
