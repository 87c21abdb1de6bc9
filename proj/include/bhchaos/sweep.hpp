#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bhchaos/classical.hpp"
#include "bhchaos/lattice.hpp"
#include "bhchaos/metrics.hpp"
#include "bhchaos/quantum.hpp"

namespace bhchaos {

inline constexpr double kLambdaPresets[] = {0.28, 0.43, 2.48, 12.33};

struct LambdaGrid {
  int points = 40;
  double min = 0.1;
  double max = 100.0;
  bool presets = true;  // merge kLambdaPresets into the grid
};

struct SweepConfig {
  std::vector<double> lambdas;  // explicit list; overrides `grid` if set
  LambdaGrid grid;
  int sites = 3;
  std::vector<double> couplings;  // empty = default_couplings(sites)

  int windows = 100;
  std::vector<int> window_subset;  // empty = every window

  // classical
  int samples_per_window = 100;
  FtleOptions ftle;
  long max_attempts = 1'000'000;
  int bounds_restarts = 100;

  // quantum
  std::vector<int> bosons = {30, 40, 50, 60, 70};
  int heatmap_bosons = 0;  // 0 = largest of `bosons`
  int bins = 20;
  KurtosisAverage kurtosis_average = KurtosisAverage::per_state;
  std::vector<BasisKind> bases = {BasisKind::computational, BasisKind::free,
                                  BasisKind::perturbed_free};
  DisplayCaps caps;

  // run
  std::uint64_t seed = 0;
  int workers = 1;
  std::filesystem::path out = "out";
  std::filesystem::path cache_dir;  // empty = <out>/cache
  long max_new_cells = -1;          // stop after computing this many jobs

  std::vector<double> lambda_values() const;
  std::vector<int> window_indices() const;
  int effective_heatmap_bosons() const;
  ChainParams chain(double lambda, int bosons = 1) const;
  std::filesystem::path cache_path() const;

  // Hash of every field that affects results (not workers, out, cache
  // location or the interruption budget).
  std::string content_hash() const;
};

void to_json(nlohmann::json& j, const SweepConfig& c);
// Unknown keys are rejected.
void from_json(const nlohmann::json& j, SweepConfig& c);
SweepConfig load_config(const std::filesystem::path& path);

enum class CellStatus { done, empty, failed, pending };
std::string to_string(CellStatus s);

struct JobEntry {
  std::string id;
  CellStatus status = CellStatus::pending;
  bool reused = false;
  double seconds = 0.0;
  std::string message;
};

struct SweepSummary {
  std::vector<JobEntry> jobs;
  int computed = 0;
  int reused = 0;
  int failed = 0;
  int empty = 0;
  int pending = 0;
  std::vector<std::filesystem::path> artifacts;

  bool complete() const { return pending == 0; }
  bool ok() const { return complete() && failed == 0; }
};

// Job granularity: one (lambda, window) cell of FTLE samples.
SweepSummary run_classical_sweep(const SweepConfig& config);

// Job granularity: one (lambda, N) diagonalization with every window's
// metrics.
SweepSummary run_quantum_sweep(const SweepConfig& config);

// Cache of diagonalizations keyed by (L, couplings, lambda, N).
class SpectrumCache {
 public:
  explicit SpectrumCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  static std::string key(const ChainParams& params);
  std::filesystem::path path_for(const ChainParams& params) const;

  std::optional<SpectrumBundle> load(const ChainParams& params,
                                     bool need_vectors) const;
  void store(const SpectrumBundle& bundle) const;

  // Loads or diagonalizes (and stores) the bundle.
  SpectrumBundle get(const ChainParams& params, bool need_vectors,
                     bool* hit = nullptr) const;

 private:
  std::filesystem::path dir_;
};

struct QuantumWindowMetrics {
  int window_index = 0;
  double e_rel = 0.0;
  int levels = 0;
  int ratios = 0;
  std::optional<double> kl_goe, kl_poisson, dist_goe, dist_poisson;
  std::vector<std::optional<double>> kurtosis;  // one per configured basis
  std::optional<double> eev_sigma;
};

// Window metrics for one diagonalization, windows spanning the spectrum.
std::vector<QuantumWindowMetrics> quantum_window_metrics(
    const SpectrumBundle& bundle, const FockBasis& basis,
    const SweepConfig& config);

// Export selectors: "scatter" (FTLE vs energy at one lambda), "ratios"
// (ratio histogram in one window), "coefficients" (eigenvector
// coefficient histogram in one window).
struct ExportRequest {
  std::string selector;
  double lambda = 0.0;
  std::optional<int> window;  // all windows when unset (scatter only)
  std::optional<double> e_rel;  // alternative to `window`: interval [E - w, E]
  int bosons = 0;             // 0 = heatmap N
  BasisKind basis = BasisKind::computational;
  int bins = 50;
};

void from_json(const nlohmann::json& j, ExportRequest& r);

// Writes <out>/export_<selector>.csv and returns its path. Throws
// std::invalid_argument for an unknown selector.
std::filesystem::path scatter_export(const SweepConfig& config,
                                     const ExportRequest& request);

// "kurtosis_1" (computational), "kurtosis_2" (free), "kurtosis_3"
// (perturbed free).
std::string kurtosis_metric_name(BasisKind kind);

// Shared 17-significant-digit formatting for every CSV.
std::string format_double(double v);

}  // namespace bhchaos
