#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bhchaos/lattice.hpp"

namespace bhchaos {

// Phase-space point of the discrete nonlinear Schroedinger chain.
// Layout is [x_0 .. x_{L-1}, y_0 .. y_{L-1}] with psi_j = x_j + i y_j.
struct ClassicalState {
  std::vector<double> coords;

  int sites() const { return static_cast<int>(coords.size() / 2); }
  double norm_squared() const;
};

struct DeviationVector {
  std::vector<double> coords;
  double log_norm_sum = 0.0;
};

// At 1e-10 the norm drifts by ~1e-7 over t = 1e3; 1e-12 keeps it ~1e-9.
struct ToleranceSpec {
  double abs_tol = 1e-12;
  double rel_tol = 1e-12;
  double initial_dt = 1e-2;
  double min_dt = 1e-12;
};

// Benettin renormalization cadence plus overflow guard.
struct RenormPolicy {
  double interval = 1.0;
  double min_norm = 1e-6;
  double max_norm = 1e6;
};

struct FtleRecord {
  ClassicalState initial;
  double energy = 0.0;
  double t_total = 0.0;  // time actually integrated
  double lyapunov = 0.0;
  bool positive = false;
  bool valid = true;
  std::uint64_t seed = 0;
  int renormalizations = 0;
};

struct EnergyBounds {
  double e_min = 0.0;
  double e_max = 0.0;
  bool converged = true;
};

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double t_reached)
      : std::runtime_error(what), t_reached_(t_reached) {}
  double t_reached() const { return t_reached_; }

 private:
  double t_reached_;
};

// Time derivative from  i dpsi_j/dt = -(1/2) sum_l J_jl psi_l + lambda |psi_j|^2 psi_j.
void dnls_rhs(std::span<const double> state, const ChainParams& params,
              std::span<double> out);
std::vector<double> dnls_rhs(const ClassicalState& state,
                             const ChainParams& params);

// H = -(1/2) sum_<j,l> J psi_j^* psi_l + (lambda/2) sum |psi_j|^4, both
// bond orientations included.
double classical_energy(std::span<const double> state,
                        const ChainParams& params);
inline double classical_energy(const ClassicalState& state,
                               const ChainParams& params) {
  return classical_energy(state.coords, params);
}

// Euclidean gradient of classical_energy with respect to (x, y).
void classical_energy_gradient(std::span<const double> state,
                               const ChainParams& params,
                               std::span<double> out);

// Jacobian of dnls_rhs at `state` applied to `dev`.
void variational_rhs(std::span<const double> state, std::span<const double> dev,
                     const ChainParams& params, std::span<double> out);
std::vector<double> variational_rhs(const ClassicalState& state,
                                    const DeviationVector& dev,
                                    const ChainParams& params);

// Adaptive Runge-Kutta-Fehlberg 7(8). Throws IntegrationError on step
// underflow or a non-finite state.
ClassicalState integrate(const ClassicalState& state, const ChainParams& params,
                         double t, const ToleranceSpec& tol = {});

struct FtleOptions {
  double t_total = 1e5;
  RenormPolicy renorm{};
  ToleranceSpec tol{};
  double cutoff = 1e-4;
  // Restrict the initial deviation to the tangent space of the norm sphere
  // and the energy shell.
  bool project_deviation = true;
};

// Largest finite-time Lyapunov exponent. The deviation vector starts in a
// random unit direction drawn from `seed`.
FtleRecord ftle_max(const ClassicalState& state0, const ChainParams& params,
                    const FtleOptions& options, std::uint64_t seed);

// Same, with an explicit initial deviation direction (normalized here).
FtleRecord ftle_max(const ClassicalState& state0, const ChainParams& params,
                    const FtleOptions& options,
                    std::span<const double> deviation0);

ClassicalState sample_uniform_sphere(int sites, std::uint64_t seed);

struct WindowSample {
  ClassicalState state;
  double energy = 0.0;
  long attempts = 0;
};

// Rejection sampling of the uniform sphere measure restricted to one
// energy window. Returns nullopt when `max_attempts` draws all miss.
std::optional<WindowSample> sample_in_window(const ChainParams& params,
                                             const EnergyWindow& window,
                                             long max_attempts,
                                             std::uint64_t seed);

// Multi-start projected gradient extremization of the energy on the
// unit sphere.
EnergyBounds classical_energy_bounds(const ChainParams& params, int restarts,
                                     std::uint64_t seed);

}  // namespace bhchaos
