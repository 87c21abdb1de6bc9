#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bhchaos/seeding.hpp"
#include "bhchaos/sweep.hpp"

using namespace bhchaos;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "master seed (overrides config)");
  cmd->add_option("--workers", c.workers, "worker threads (overrides config)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "output directory (overrides config)");
}

nlohmann::json raw_config(const Common& c) {
  if (c.config.empty()) return nlohmann::json::object();
  std::ifstream in(c.config);
  return nlohmann::json::parse(in);
}

SweepConfig resolve(const Common& c) {
  SweepConfig cfg = c.config.empty() ? SweepConfig{} : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.workers) cfg.workers = *c.workers;
  if (c.out) cfg.out = *c.out;
  fs::create_directories(cfg.out);
  return cfg;
}

void write_text(const fs::path& p, const std::string& body) {
  std::ofstream os(p, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << body;
}

int report(const char* what, const SweepSummary& s) {
  std::printf("%s: %d computed, %d reused, %d empty, %d failed, %d pending\n",
              what, s.computed, s.reused, s.empty, s.failed, s.pending);
  for (const auto& j : s.jobs)
    if (j.status == CellStatus::failed)
      std::fprintf(stderr, "failed %s: %s\n", j.id.c_str(),
                   j.message.empty() ? "invalid trajectory" : j.message.c_str());
  return s.ok() ? 0 : 1;
}

int cmd_bounds(const SweepConfig& cfg) {
  std::ostringstream os;
  os << "lambda,e_min,e_max,converged\n";
  int bad = 0;
  const auto lambdas = cfg.lambda_values();
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const auto b = classical_energy_bounds(cfg.chain(lambdas[i]), cfg.bounds_restarts,
                                           derive_seed(cfg.seed, {0xb0b0, i}));
    if (!b.converged) {
      ++bad;
      std::fprintf(stderr, "warning: bounds at lambda=%g did not converge\n", lambdas[i]);
    }
    os << format_double(lambdas[i]) << ',' << format_double(b.e_min) << ','
       << format_double(b.e_max) << ',' << (b.converged ? 1 : 0) << '\n';
  }
  write_text(cfg.out / "bounds.csv", os.str());
  std::printf("bounds: %zu lambda values, %d unconverged\n", lambdas.size(), bad);
  return 0;
}

int cmd_ftle(const SweepConfig& cfg, const std::vector<std::vector<double>>& states) {
  std::ostringstream os;
  os << "lambda,window_index,E,t_total,lyapunov,positive,seed\n";
  int invalid = 0;
  const auto lambdas = cfg.lambda_values();
  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    const auto params = cfg.chain(lambdas[li]);
    const auto b = classical_energy_bounds(params, cfg.bounds_restarts,
                                           derive_seed(cfg.seed, {0xb0b0, li}));
    std::vector<ClassicalState> initial;
    for (const auto& s : states) initial.push_back(ClassicalState{s});
    if (initial.empty())
      for (int k = 0; k < cfg.samples_per_window; ++k)
        initial.push_back(sample_uniform_sphere(
            params.sites, derive_seed(cfg.seed, {0x5a3e, li, static_cast<std::uint64_t>(k)})));
    for (std::size_t k = 0; k < initial.size(); ++k) {
      const auto seed = derive_seed(cfg.seed, {0xf71e, li, k});
      const auto r = ftle_max(initial[k], params, cfg.ftle, seed);
      if (!r.valid) {
        ++invalid;
        std::fprintf(stderr, "trajectory %zu at lambda=%g failed at t=%g\n", k,
                     lambdas[li], r.t_total);
        continue;
      }
      const auto w = window_index_of(r.energy, b.e_min, b.e_max, cfg.windows);
      os << format_double(lambdas[li]) << ',' << (w ? std::to_string(*w) : "") << ','
         << format_double(r.energy) << ',' << format_double(r.t_total) << ','
         << format_double(r.lyapunov) << ',' << (r.positive ? 1 : 0) << ',' << r.seed
         << '\n';
    }
  }
  write_text(cfg.out / "ftle_records.csv", os.str());
  return invalid == 0 ? 0 : 1;
}

int cmd_spectrum(const SweepConfig& cfg) {
  const SpectrumCache cache(cfg.cache_path());
  const auto lambdas = cfg.lambda_values();
  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    for (int n : cfg.bosons) {
      const auto params = cfg.chain(lambdas[li], n);
      const auto bundle = cache.get(params, true);
      const auto eev = eev_hopping(bundle, enumerate_fock_basis(n, params.sites));
      const auto& ev = bundle.eigenvalues;
      const double lo = ev[0], hi = ev[ev.size() - 1];
      std::ostringstream os;
      os << "index,energy,E_rel,eev\n";
      for (Eigen::Index i = 0; i < ev.size(); ++i)
        os << i << ',' << format_double(ev[i]) << ','
           << (hi > lo ? format_double(relative_energy(ev[i], lo, hi)) : "") << ','
           << format_double(eev[static_cast<std::size_t>(i)]) << '\n';
      char name[64];
      std::snprintf(name, sizeof name, "spectrum_l%03zu_N%03d.csv", li, n);
      write_text(cfg.out / name, os.str());
      std::printf("lambda=%g N=%d D=%zu\n", lambdas[li], n, bundle.dimension());
    }
  }
  return 0;
}

int cmd_metrics(const SweepConfig& cfg) {
  const SpectrumCache cache(cfg.cache_path());
  const int n = cfg.effective_heatmap_bosons();
  const auto opt = [](std::optional<double> v) { return v ? format_double(*v) : ""; };
  const auto cap = [](std::optional<double> v, double c) {
    return v ? std::optional<double>(std::min(*v, c)) : std::nullopt;
  };
  std::ostringstream os;
  os << "lambda,window_index,E_rel,metric_name,value_raw,value_display,n_samples\n";
  for (double lambda : cfg.lambda_values()) {
    const auto params = cfg.chain(lambda, n);
    const auto bundle = cache.get(params, true);
    const auto basis = enumerate_fock_basis(n, params.sites);
    for (const auto& m : quantum_window_metrics(bundle, basis, cfg)) {
      const auto row = [&](const std::string& name, std::optional<double> raw,
                           std::optional<double> shown, int count) {
        os << format_double(lambda) << ',' << m.window_index << ','
           << format_double(m.e_rel) << ',' << name << ',' << opt(raw) << ','
           << opt(shown) << ',' << count << '\n';
      };
      row("kl_goe", m.kl_goe, cap(m.kl_goe, cfg.caps.kl), m.ratios);
      row("kl_poisson", m.kl_poisson, cap(m.kl_poisson, cfg.caps.kl), m.ratios);
      row("ratio_dist_goe", m.dist_goe, m.dist_goe, m.ratios);
      row("ratio_dist_poisson", m.dist_poisson, m.dist_poisson, m.ratios);
      for (std::size_t b = 0; b < cfg.bases.size(); ++b)
        row(kurtosis_metric_name(cfg.bases[b]), m.kurtosis[b],
            cap(m.kurtosis[b], cfg.caps.kurtosis), m.levels);
      row("eev_sigma", m.eev_sigma, m.eev_sigma, m.levels);
    }
  }
  write_text(cfg.out / "metrics.csv", os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Classical and quantum chaos indicators for the Bose-Hubbard chain"};
  app.require_subcommand(1);

  Common common;
  auto* classical = app.add_subcommand("classical-sweep", "FTLE heatmaps over (lambda, E_rel)");
  auto* quantum = app.add_subcommand("quantum-sweep", "level, kurtosis and EEV heatmaps");
  auto* bounds = app.add_subcommand("bounds", "classical energy extrema per lambda");
  auto* ftle = app.add_subcommand("ftle", "FTLE of explicit or uniformly drawn states");
  auto* spectrum = app.add_subcommand("spectrum", "eigenvalues and hopping EEVs");
  auto* metrics = app.add_subcommand("metrics", "per-window quantum metrics at one N");
  auto* exporter = app.add_subcommand("export", "scatter and histogram tables for plotting");
  for (auto* c : {classical, quantum, bounds, ftle, spectrum, metrics, exporter})
    add_common(c, common);

  std::vector<std::string> state_args;
  ftle->add_option("--state", state_args,
                   "initial state as comma-separated x_1..x_L,y_1..y_L (repeatable)");

  std::optional<std::string> selector;
  std::optional<double> ex_lambda, ex_erel;
  std::optional<int> ex_window, ex_n, ex_bins;
  std::optional<std::string> ex_basis;
  exporter->add_option("--selector", selector, "scatter | ratios | coefficients");
  exporter->add_option("--lambda", ex_lambda);
  exporter->add_option("--window", ex_window);
  exporter->add_option("--E-rel", ex_erel, "upper edge of the relative-energy interval");
  exporter->add_option("--N", ex_n);
  exporter->add_option("--basis", ex_basis, "computational | free | perturbed-free");
  exporter->add_option("--bins", ex_bins);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve(common);
    if (*classical) return report("classical-sweep", run_classical_sweep(cfg));
    if (*quantum) return report("quantum-sweep", run_quantum_sweep(cfg));
    if (*bounds) return cmd_bounds(cfg);
    if (*spectrum) return cmd_spectrum(cfg);
    if (*metrics) return cmd_metrics(cfg);
    if (*ftle) {
      std::vector<std::vector<double>> states;
      for (const auto& s : state_args) {
        std::vector<double> v;
        std::stringstream ss(s);
        for (std::string tok; std::getline(ss, tok, ',');) v.push_back(std::stod(tok));
        if (static_cast<int>(v.size()) != 2 * cfg.sites)
          throw std::invalid_argument("--state needs 2L coordinates");
        states.push_back(std::move(v));
      }
      return cmd_ftle(cfg, states);
    }
    if (*exporter) {
      auto j = raw_config(common).value("export", nlohmann::json::object());
      if (selector) j["selector"] = *selector;
      if (ex_lambda) j["lambda"] = *ex_lambda;
      if (ex_window) j["window"] = *ex_window;
      if (ex_erel) j["E_rel"] = *ex_erel;
      if (ex_n) j["N"] = *ex_n;
      if (ex_basis) j["basis"] = *ex_basis;
      if (ex_bins) j["bins"] = *ex_bins;
      if (!j.contains("selector")) throw std::invalid_argument("export needs --selector");
      const auto path = scatter_export(cfg, j.get<ExportRequest>());
      std::printf("%s\n", path.string().c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
