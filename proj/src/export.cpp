#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "bhchaos/sweep.hpp"

namespace bhchaos {

using nlohmann::json;
namespace fs = std::filesystem;

void from_json(const json& j, ExportRequest& r) {
  r.selector = j.at("selector").get<std::string>();
  r.lambda = j.value("lambda", 0.0);
  if (j.contains("window")) r.window = j.at("window").get<int>();
  r.bosons = j.value("N", 0);
  r.basis = basis_kind_from_string(j.value("basis", std::string("computational")));
  r.bins = j.value("bins", 50);
  if (j.contains("E_rel")) r.e_rel = j.at("E_rel").get<double>();
}

namespace {

std::size_t lambda_index(const std::vector<double>& lambdas, double lambda) {
  for (std::size_t i = 0; i < lambdas.size(); ++i)
    if (std::abs(lambdas[i] - lambda) <= 1e-9 * std::max(1.0, lambda)) return i;
  throw std::invalid_argument("lambda " + format_double(lambda) +
                              " is not on the configured grid");
}

void write_file(const fs::path& path, const std::string& body) {
  fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << body;
}

std::string scatter(const SweepConfig& config, const ExportRequest& req) {
  const auto lambdas = config.lambda_values();
  const auto li = lambda_index(lambdas, req.lambda);
  std::ostringstream os;
  os << "lambda,window_index,E,E_rel,lyapunov,positive\n";
  const auto hash = config.content_hash();
  for (int w : config.window_indices()) {
    if (req.window && *req.window != w) continue;
    char name[64];
    std::snprintf(name, sizeof name, "classical_l%03zu_w%03d.json", li, w);
    const auto path = config.out / "cells" / "classical" / name;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing " + path.string() + "; run classical-sweep first");
    const auto cell = json::parse(in);
    if (cell.value("config_hash", std::string()) != hash)
      throw std::runtime_error(path.string() + " belongs to a different configuration");
    const double e_min = cell.at("e_min").get<double>();
    const double e_max = cell.at("e_max").get<double>();
    for (const auto& r : cell.at("records")) {
      if (!r.at("valid").get<bool>()) continue;
      const double e = r.at("E").get<double>();
      os << format_double(cell.at("lambda").get<double>()) << ',' << w << ','
         << format_double(e) << ',' << format_double(relative_energy(e, e_min, e_max))
         << ',' << format_double(r.at("lyapunov").get<double>()) << ','
         << (r.at("positive").get<bool>() ? 1 : 0) << '\n';
    }
  }
  return os.str();
}

struct WindowSlice {
  SpectrumBundle bundle;
  FockBasis basis;
  std::vector<Eigen::Index> columns;  // eigenstates inside the window
};

WindowSlice window_slice(const SweepConfig& config, const ExportRequest& req,
                         bool need_vectors) {
  if (!req.window) throw std::invalid_argument("selector needs a window or E_rel");
  if (*req.window < 0 || *req.window >= config.windows)
    throw std::invalid_argument("window out of range");
  const int n = req.bosons > 0 ? req.bosons : config.effective_heatmap_bosons();
  const auto params = config.chain(req.lambda, n);
  const SpectrumCache cache(config.cache_path());
  WindowSlice s{cache.get(params, need_vectors), enumerate_fock_basis(n, params.sites), {}};
  const auto& ev = s.bundle.eigenvalues;
  if (ev.size() >= 2 && ev[ev.size() - 1] > ev[0]) {
    const auto win = make_windows(ev[0], ev[ev.size() - 1], config.windows)
        [static_cast<std::size_t>(*req.window)];
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      if (win.contains(ev[i])) s.columns.push_back(i);
  }
  return s;
}

std::string ratios(const SweepConfig& config, const ExportRequest& req) {
  const auto s = window_slice(config, req, false);
  std::ostringstream os;
  os << "bin_lo,bin_hi,count,density,goe_density,poisson_density\n";
  if (s.columns.size() < 3) return os.str();
  std::vector<double> levels;
  for (auto c : s.columns) levels.push_back(s.bundle.eigenvalues[c]);
  const auto sample = spacing_ratios(levels);
  if (sample.empty()) return os.str();
  const auto counts = ratio_histogram(sample.values, req.bins);
  const double width = 1.0 / req.bins;
  const double total = static_cast<double>(sample.values.size());
  for (int b = 0; b < req.bins; ++b) {
    const double lo = b * width, hi = (b + 1) * width;
    const int c = counts[static_cast<std::size_t>(b)];
    os << format_double(lo) << ',' << format_double(hi) << ',' << c << ','
       << format_double(c / total / width) << ','
       << format_double(reference_mass(ReferenceKind::goe, lo, hi) / width) << ','
       << format_double(reference_mass(ReferenceKind::poisson, lo, hi) / width)
       << '\n';
  }
  return os.str();
}

std::string coefficients(const SweepConfig& config, const ExportRequest& req) {
  const auto s = window_slice(config, req, true);
  std::ostringstream os;
  os << "bin_lo,bin_hi,count,density,gaussian_density\n";
  if (s.columns.empty()) return os.str();
  const auto coeffs = coefficients_in_basis(
      s.bundle, make_basis(req.basis, s.bundle.params, s.basis));
  // Rescaled by sqrt(D) so a random state has unit variance.
  const double scale = std::sqrt(static_cast<double>(coeffs.rows()));
  std::vector<double> values;
  for (auto c : s.columns)
    for (Eigen::Index r = 0; r < coeffs.rows(); ++r) values.push_back(coeffs(r, c) * scale);
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  if (m == 0.0) m = 1.0;
  const double width = 2.0 * m / req.bins;
  std::vector<int> counts(static_cast<std::size_t>(req.bins), 0);
  for (double v : values) {
    auto b = static_cast<int>((v + m) / width);
    b = std::clamp(b, 0, req.bins - 1);
    ++counts[static_cast<std::size_t>(b)];
  }
  const double total = static_cast<double>(values.size());
  for (int b = 0; b < req.bins; ++b) {
    const double lo = -m + b * width, hi = lo + width, mid = 0.5 * (lo + hi);
    const int c = counts[static_cast<std::size_t>(b)];
    os << format_double(lo) << ',' << format_double(hi) << ',' << c << ','
       << format_double(c / total / width) << ','
       << format_double(std::exp(-0.5 * mid * mid) / std::sqrt(2.0 * std::numbers::pi))
       << '\n';
  }
  return os.str();
}

}  // namespace

fs::path scatter_export(const SweepConfig& config, const ExportRequest& request) {
  if (request.bins < 1) throw std::invalid_argument("bins must be >= 1");
  ExportRequest req = request;
  if (!req.window && req.e_rel)
    req.window = static_cast<int>(std::lround(*req.e_rel * config.windows)) - 1;
  std::string body;
  if (req.selector == "scatter") body = scatter(config, req);
  else if (req.selector == "ratios") body = ratios(config, req);
  else if (req.selector == "coefficients") body = coefficients(config, req);
  else throw std::invalid_argument("unknown export selector: " + req.selector);
  const auto path = config.out / ("export_" + req.selector + ".csv");
  write_file(path, body);
  return path;
}

}  // namespace bhchaos
