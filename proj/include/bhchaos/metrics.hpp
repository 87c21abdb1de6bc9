#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bhchaos/classical.hpp"
#include "bhchaos/lattice.hpp"

namespace bhchaos {

inline const double kGoeMeanRatio = 4.0 - 2.0 * std::sqrt(3.0);
inline const double kPoissonMeanRatio = 2.0 * std::log(2.0) - 1.0;

struct RatioSample {
  std::vector<double> values;  // r~ in [0, 1]
  int dropped = 0;             // ratios skipped because of a degenerate spacing

  bool empty() const { return values.empty(); }
};

// r~ = min(r, 1/r) for consecutive spacing ratios of ascending levels.
// Spacings at or below `degeneracy_threshold` drop the ratios that use
// them; a negative threshold means 1e-12 times the width of `levels`.
RatioSample spacing_ratios(std::span<const double> levels,
                           double degeneracy_threshold = -1.0);

enum class ReferenceKind { goe, poisson };

std::string to_string(ReferenceKind kind);

// Ratio densities on [0, 1], zero outside.
double reference_pdf(ReferenceKind kind, double r);

// Integral of reference_pdf over [a, b] (Gauss-Kronrod).
double reference_mass(ReferenceKind kind, double a, double b);

double reference_mean(ReferenceKind kind);

// Counts of `values` in `bins` equal-width bins on [0, 1]; 1 lands in the
// last bin.
std::vector<int> ratio_histogram(std::span<const double> values, int bins);

// sum_i P_i log(P_i / Q_i) with P the histogram of the sample and Q the
// reference mass of each bin. Empty bins contribute nothing.
double kl_divergence(const RatioSample& sample, ReferenceKind reference,
                     int bins = 20);

// sum_i p_i log(p_i / q_i) over bins with p_i > 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

std::vector<double> reference_bin_masses(ReferenceKind kind, int bins);

double mean_ratio_distance(const RatioSample& sample, ReferenceKind kind);

// m4 / m2^2 - 3 with population central moments.
double excess_kurtosis(std::span<const double> values);

enum class KurtosisAverage {
  per_state,  // kurtosis of each eigenstate, then the mean
  pooled,     // kurtosis of all coefficients of all states in the window
};

// Kurtosis of the columns of `coefficients` whose eigenvalue lies in
// `window`; nullopt when the window holds no eigenstate.
std::optional<double> window_kurtosis(
    const Eigen::MatrixXd& coefficients, std::span<const double> eigenvalues,
    const EnergyWindow& window,
    KurtosisAverage mode = KurtosisAverage::per_state);

// Population standard deviation of the EEVs inside `window`; nullopt
// below two states.
std::optional<double> eev_sigma(std::span<const double> eevs,
                                std::span<const double> eigenvalues,
                                const EnergyWindow& window);

struct ScalingFit {
  double raw = 0.0;
  double clipped = 0.0;  // clamped to [0, 0.3]
  int points = 0;
};

// Least-squares slope of -log(sigma) against log(D). Points with
// sigma <= 0 are dropped; nullopt below three usable points.
std::optional<ScalingFit> fit_scaling_exponent(
    std::span<const std::pair<double, double>> points);

std::optional<double> positive_fraction(std::span<const FtleRecord> records,
                                        double cutoff = 1e-4);

enum class FtleScaling { beta, gamma };

inline double beta_scale(double lambda) { return std::max(1.5, lambda); }
inline double gamma_scale(double global_max) {
  return std::max(1e-4, global_max);
}

// Mean lambda_max divided by beta = max(1.5, Lambda) or
// gamma = max(1e-4, global_max).
std::optional<double> rescaled_mean_ftle(std::span<const FtleRecord> records,
                                         FtleScaling mode, double lambda,
                                         double global_max);

struct DisplayCaps {
  double kl = 0.15;
  double kurtosis = 16.0;
  double exponent_lo = 0.0;
  double exponent_hi = 0.3;
};

}  // namespace bhchaos
