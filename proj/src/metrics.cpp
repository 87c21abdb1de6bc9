#include "bhchaos/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace bhchaos {

RatioSample spacing_ratios(std::span<const double> levels,
                           double degeneracy_threshold) {
  RatioSample out;
  if (levels.size() < 3) return out;
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (levels[i] < levels[i - 1])
      throw std::invalid_argument("levels must be ascending");
  if (degeneracy_threshold < 0.0)
    degeneracy_threshold = 1e-12 * (levels.back() - levels.front());
  out.values.reserve(levels.size() - 2);
  for (std::size_t i = 0; i + 2 < levels.size(); ++i) {
    const double s0 = levels[i + 1] - levels[i];
    const double s1 = levels[i + 2] - levels[i + 1];
    if (s0 <= degeneracy_threshold || s1 <= degeneracy_threshold) {
      ++out.dropped;
      continue;
    }
    out.values.push_back(std::min(s1 / s0, s0 / s1));
  }
  return out;
}

std::string to_string(ReferenceKind kind) {
  return kind == ReferenceKind::goe ? "goe" : "poisson";
}

double reference_pdf(ReferenceKind kind, double r) {
  if (r < 0.0 || r > 1.0) return 0.0;
  if (kind == ReferenceKind::poisson) return 2.0 / ((1.0 + r) * (1.0 + r));
  constexpr double z_goe = 8.0 / 27.0;
  const double q = 1.0 + r + r * r;
  return 2.0 / z_goe * (r + r * r) / std::pow(q, 2.5);
}

double reference_mass(ReferenceKind kind, double a, double b) {
  a = std::clamp(a, 0.0, 1.0);
  b = std::clamp(b, 0.0, 1.0);
  if (b <= a) return 0.0;
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 61>::integrate(
      [kind](double r) { return reference_pdf(kind, r); }, a, b, 8, 1e-15);
}

double reference_mean(ReferenceKind kind) {
  return kind == ReferenceKind::goe ? kGoeMeanRatio : kPoissonMeanRatio;
}

std::vector<int> ratio_histogram(std::span<const double> values, int bins) {
  if (bins < 1) throw std::invalid_argument("bins must be >= 1");
  std::vector<int> counts(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) continue;
    auto b = static_cast<int>(v * bins);
    if (b >= bins) b = bins - 1;
    ++counts[static_cast<std::size_t>(b)];
  }
  return counts;
}

std::vector<double> reference_bin_masses(ReferenceKind kind, int bins) {
  if (bins < 1) throw std::invalid_argument("bins must be >= 1");
  std::vector<double> q(static_cast<std::size_t>(bins));
  for (int i = 0; i < bins; ++i)
    q[static_cast<std::size_t>(i)] =
        reference_mass(kind, static_cast<double>(i) / bins,
                       static_cast<double>(i + 1) / bins);
  return q;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("bin count mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return INFINITY;
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

double kl_divergence(const RatioSample& sample, ReferenceKind reference,
                     int bins) {
  if (sample.empty()) throw std::invalid_argument("empty ratio sample");
  if (bins < 2) throw std::invalid_argument("bins must be >= 2");
  const auto counts = ratio_histogram(sample.values, bins);
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  std::vector<double> p(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) p[i] = counts[i] / total;
  return kl_divergence(p, reference_bin_masses(reference, bins));
}

double mean_ratio_distance(const RatioSample& sample, ReferenceKind kind) {
  if (sample.empty()) throw std::invalid_argument("empty ratio sample");
  const double mean =
      std::accumulate(sample.values.begin(), sample.values.end(), 0.0) /
      static_cast<double>(sample.values.size());
  return std::abs(mean - reference_mean(kind));
}

double excess_kurtosis(std::span<const double> values) {
  if (values.size() < 4)
    throw std::invalid_argument("kurtosis needs at least 4 values");
  if (std::adjacent_find(values.begin(), values.end(),
                         std::not_equal_to<>()) == values.end())
    throw std::invalid_argument("zero variance");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double m2 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= n;
  m4 /= n;
  if (m2 <= 0.0) throw std::invalid_argument("zero variance");
  return m4 / (m2 * m2) - 3.0;
}

std::optional<double> window_kurtosis(const Eigen::MatrixXd& coefficients,
                                      std::span<const double> eigenvalues,
                                      const EnergyWindow& window,
                                      KurtosisAverage mode) {
  if (static_cast<std::size_t>(coefficients.cols()) != eigenvalues.size())
    throw std::invalid_argument("one eigenvalue per coefficient column");
  const auto rows = static_cast<std::size_t>(coefficients.rows());
  std::vector<double> pooled;
  double sum = 0.0;
  int count = 0;
  for (std::size_t c = 0; c < eigenvalues.size(); ++c) {
    if (!window.contains(eigenvalues[c])) continue;
    const double* col = coefficients.col(static_cast<Eigen::Index>(c)).data();
    if (mode == KurtosisAverage::per_state) {
      sum += excess_kurtosis(std::span<const double>(col, rows));
    } else {
      pooled.insert(pooled.end(), col, col + rows);
    }
    ++count;
  }
  if (count == 0) return std::nullopt;
  if (mode == KurtosisAverage::pooled) return excess_kurtosis(pooled);
  return sum / count;
}

std::optional<double> eev_sigma(std::span<const double> eevs,
                                std::span<const double> eigenvalues,
                                const EnergyWindow& window) {
  if (eevs.size() != eigenvalues.size())
    throw std::invalid_argument("one EEV per eigenvalue");
  std::vector<double> in;
  for (std::size_t i = 0; i < eevs.size(); ++i)
    if (window.contains(eigenvalues[i])) in.push_back(eevs[i]);
  if (in.size() < 2) return std::nullopt;
  const double n = static_cast<double>(in.size());
  const double mean = std::accumulate(in.begin(), in.end(), 0.0) / n;
  double var = 0.0;
  for (double v : in) var += (v - mean) * (v - mean);
  return std::sqrt(var / n);
}

std::optional<ScalingFit> fit_scaling_exponent(
    std::span<const std::pair<double, double>> points) {
  std::vector<double> xs, ys;
  for (const auto& [dim, sigma] : points) {
    if (!(sigma > 0.0) || !(dim > 0.0)) continue;
    xs.push_back(std::log(dim));
    ys.push_back(-std::log(sigma));
  }
  if (xs.size() < 3) return std::nullopt;
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("dimensions must be distinct");
  ScalingFit fit;
  fit.raw = sxy / sxx;
  fit.clipped = std::clamp(fit.raw, 0.0, 0.3);
  fit.points = static_cast<int>(xs.size());
  return fit;
}

std::optional<double> positive_fraction(std::span<const FtleRecord> records,
                                        double cutoff) {
  int valid = 0, positive = 0;
  for (const auto& r : records) {
    if (!r.valid) continue;
    ++valid;
    if (r.lyapunov > cutoff) ++positive;
  }
  if (valid == 0) return std::nullopt;
  return static_cast<double>(positive) / valid;
}

std::optional<double> rescaled_mean_ftle(std::span<const FtleRecord> records,
                                         FtleScaling mode, double lambda,
                                         double global_max) {
  double sum = 0.0;
  int valid = 0;
  for (const auto& r : records) {
    if (!r.valid) continue;
    sum += r.lyapunov;
    ++valid;
  }
  if (valid == 0) return std::nullopt;
  const double scale =
      mode == FtleScaling::beta ? beta_scale(lambda) : gamma_scale(global_max);
  return sum / valid / scale;
}

}  // namespace bhchaos
