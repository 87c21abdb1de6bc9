#include "bhchaos/classical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

#include "bhchaos/seeding.hpp"

namespace bhchaos {

namespace odeint = boost::numeric::odeint;

namespace {

using StateVec = std::vector<double>;

void check_dims(std::size_t n, const ChainParams& params) {
  if (n != static_cast<std::size_t>(2 * params.sites))
    throw std::invalid_argument("state dimension does not match 2L");
}

// (M v)_j with M_{j,j+1} = M_{j+1,j} = -J_{j,j+1} / 2.
inline double hop(std::span<const double> v, std::span<const double> j,
                  int site, int sites) {
  double acc = 0.0;
  if (site > 0) acc -= 0.5 * j[site - 1] * v[site - 1];
  if (site + 1 < sites) acc -= 0.5 * j[site] * v[site + 1];
  return acc;
}

double squared_norm(std::span<const double> v) {
  return std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
}

void normalize(std::span<double> v) {
  const double n = std::sqrt(squared_norm(v));
  for (double& c : v) c /= n;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double c) { return std::isfinite(c); });
}

using Stepper = odeint::runge_kutta_fehlberg78<StateVec>;
using Controlled = odeint::controlled_runge_kutta<Stepper>;

// Steps `x` from t to t_end with step-size control. `dt` carries the
// natural step size across calls. `after_step(x, t)` runs on every
// accepted step.
template <class System, class AfterStep>
void advance(Controlled& stepper, System& system, StateVec& x, double& t,
             double t_end, double& dt, const ToleranceSpec& tol,
             AfterStep&& after_step) {
  const double eps_t = 1e-13 * std::max(1.0, std::abs(t_end));
  while (t_end - t > eps_t) {
    double trial = std::min(dt, t_end - t);
    const bool truncated = trial < dt;
    const auto result = stepper.try_step(system, x, t, trial);
    if (result == odeint::success) {
      if (!truncated) dt = trial;
      if (!all_finite(x)) throw IntegrationError("non-finite state", t);
      after_step(x, t);
    } else {
      dt = trial;
      if (dt < tol.min_dt) throw IntegrationError("step size underflow", t);
    }
  }
  t = t_end;
}

}  // namespace

double ClassicalState::norm_squared() const { return squared_norm(coords); }

void dnls_rhs(std::span<const double> s, const ChainParams& params,
              std::span<double> out) {
  const int n = params.sites;
  const auto x = s.subspan(0, n);
  const auto y = s.subspan(n, n);
  const std::span<const double> j(params.couplings);
  for (int k = 0; k < n; ++k) {
    const double dens = x[k] * x[k] + y[k] * y[k];
    const double g_re = hop(x, j, k, n) + params.lambda * dens * x[k];
    const double g_im = hop(y, j, k, n) + params.lambda * dens * y[k];
    // dpsi/dt = -i g
    out[k] = g_im;
    out[n + k] = -g_re;
  }
}

std::vector<double> dnls_rhs(const ClassicalState& state,
                             const ChainParams& params) {
  check_dims(state.coords.size(), params);
  std::vector<double> out(state.coords.size());
  dnls_rhs(state.coords, params, out);
  return out;
}

double classical_energy(std::span<const double> s, const ChainParams& params) {
  check_dims(s.size(), params);
  const int n = params.sites;
  double e = 0.0;
  for (int k = 0; k + 1 < n; ++k)
    e -= params.couplings[k] * (s[k] * s[k + 1] + s[n + k] * s[n + k + 1]);
  double quartic = 0.0;
  for (int k = 0; k < n; ++k) {
    const double dens = s[k] * s[k] + s[n + k] * s[n + k];
    quartic += dens * dens;
  }
  return e + 0.5 * params.lambda * quartic;
}

void classical_energy_gradient(std::span<const double> s,
                               const ChainParams& params,
                               std::span<double> out) {
  const int n = params.sites;
  const auto x = s.subspan(0, n);
  const auto y = s.subspan(n, n);
  const std::span<const double> j(params.couplings);
  for (int k = 0; k < n; ++k) {
    const double dens = x[k] * x[k] + y[k] * y[k];
    out[k] = 2.0 * hop(x, j, k, n) + 2.0 * params.lambda * dens * x[k];
    out[n + k] = 2.0 * hop(y, j, k, n) + 2.0 * params.lambda * dens * y[k];
  }
}

void variational_rhs(std::span<const double> s, std::span<const double> d,
                     const ChainParams& params, std::span<double> out) {
  const int n = params.sites;
  const auto x = s.subspan(0, n);
  const auto y = s.subspan(n, n);
  const auto dx = d.subspan(0, n);
  const auto dy = d.subspan(n, n);
  const std::span<const double> j(params.couplings);
  const double lam = params.lambda;
  for (int k = 0; k < n; ++k) {
    const double dens = x[k] * x[k] + y[k] * y[k];
    const double ddens = 2.0 * (x[k] * dx[k] + y[k] * dy[k]);
    out[k] = hop(dy, j, k, n) + lam * (ddens * y[k] + dens * dy[k]);
    out[n + k] = -hop(dx, j, k, n) - lam * (ddens * x[k] + dens * dx[k]);
  }
}

std::vector<double> variational_rhs(const ClassicalState& state,
                                    const DeviationVector& dev,
                                    const ChainParams& params) {
  check_dims(state.coords.size(), params);
  check_dims(dev.coords.size(), params);
  std::vector<double> out(state.coords.size());
  variational_rhs(state.coords, dev.coords, params, out);
  return out;
}

ClassicalState integrate(const ClassicalState& state, const ChainParams& params,
                         double t, const ToleranceSpec& tol) {
  check_dims(state.coords.size(), params);
  if (!(t >= 0.0)) throw std::invalid_argument("integration time must be >= 0");
  StateVec x = state.coords;
  auto system = [&params](const StateVec& s, StateVec& dsdt, double) {
    dnls_rhs(s, params, dsdt);
  };
  Controlled stepper(
      Controlled::error_checker_type(tol.abs_tol, tol.rel_tol));
  double now = 0.0;
  double dt = tol.initial_dt;
  advance(stepper, system, x, now, t, dt, tol, [](const StateVec&, double) {});
  return ClassicalState{std::move(x)};
}

FtleRecord ftle_max(const ClassicalState& state0, const ChainParams& params,
                    const FtleOptions& options, std::uint64_t seed) {
  check_dims(state0.coords.size(), params);
  std::mt19937_64 rng(derive_seed(seed, {0xf7e1ULL}));
  std::normal_distribution<double> gauss;
  std::vector<double> dev(state0.coords.size());
  do {
    for (double& c : dev) c = gauss(rng);
  } while (squared_norm(dev) == 0.0);
  FtleRecord rec = ftle_max(state0, params, options, dev);
  rec.seed = seed;
  return rec;
}

FtleRecord ftle_max(const ClassicalState& state0, const ChainParams& params,
                    const FtleOptions& options,
                    std::span<const double> deviation0) {
  check_dims(state0.coords.size(), params);
  check_dims(deviation0.size(), params);
  if (!(options.t_total > 0.0))
    throw std::invalid_argument("t_total must be positive");
  if (!(options.renorm.interval > 0.0))
    throw std::invalid_argument("renormalization interval must be positive");

  const std::size_t n2 = state0.coords.size();
  StateVec z(2 * n2);
  std::copy(state0.coords.begin(), state0.coords.end(), z.begin());
  std::copy(deviation0.begin(), deviation0.end(), z.begin() + n2);
  if (options.project_deviation) {
    auto dev = std::span<double>(z).subspan(n2);
    const std::span<const double> pos(state0.coords);
    // Remove the components along grad N (= 2 psi) and grad E; both
    // pairings are conserved by the tangent flow.
    std::vector<double> u1(pos.begin(), pos.end()), u2(n2);
    normalize(u1);
    classical_energy_gradient(pos, params, u2);
    const double c = std::inner_product(u2.begin(), u2.end(), u1.begin(), 0.0);
    for (std::size_t i = 0; i < n2; ++i) u2[i] -= c * u1[i];
    const double n_u2 = std::sqrt(squared_norm(u2));
    for (const auto* u : {&u1, &u2}) {
      if (u == &u2 && n_u2 < 1e-14) continue;
      const double scale = u == &u2 ? n_u2 : 1.0;
      double dot = 0.0;
      for (std::size_t i = 0; i < n2; ++i) dot += dev[i] * (*u)[i] / scale;
      for (std::size_t i = 0; i < n2; ++i) dev[i] -= dot * (*u)[i] / scale;
    }
    if (squared_norm(dev) == 0.0)
      throw std::invalid_argument("deviation vector lies in the conserved directions");
  }
  normalize(std::span<double>(z).subspan(n2));

  auto system = [&params, n2](const StateVec& s, StateVec& dsdt, double) {
    const std::span<const double> all(s);
    const std::span<double> out(dsdt);
    dnls_rhs(all.subspan(0, n2), params, out.subspan(0, n2));
    variational_rhs(all.subspan(0, n2), all.subspan(n2), params,
                    out.subspan(n2));
  };

  FtleRecord rec;
  rec.initial = state0;
  rec.energy = classical_energy(state0, params);

  double log_sum = 0.0;
  int renorms = 0;
  auto renormalize = [&](StateVec& s) {
    auto dev = std::span<double>(s).subspan(n2);
    const double norm = std::sqrt(squared_norm(dev));
    log_sum += std::log(norm);
    for (double& c : dev) c /= norm;
    ++renorms;
  };
  const double lo2 = options.renorm.min_norm * options.renorm.min_norm;
  const double hi2 = options.renorm.max_norm * options.renorm.max_norm;
  auto guard = [&](StateVec& s, double) {
    const double n = squared_norm(std::span<const double>(s).subspan(n2));
    if (n < lo2 || n > hi2) renormalize(s);
  };

  Controlled stepper(
      Controlled::error_checker_type(options.tol.abs_tol, options.tol.rel_tol));
  double t = 0.0;
  double dt = options.tol.initial_dt;
  try {
    while (t < options.t_total) {
      const double next = std::min(options.t_total, t + options.renorm.interval);
      advance(stepper, system, z, t, next, dt, options.tol, guard);
      renormalize(z);
    }
  } catch (const IntegrationError& err) {
    rec.valid = false;
    rec.t_total = err.t_reached();
    rec.lyapunov = err.t_reached() > 0.0 ? log_sum / err.t_reached() : 0.0;
    rec.positive = false;
    rec.renormalizations = renorms;
    return rec;
  }
  rec.t_total = options.t_total;
  rec.lyapunov = log_sum / options.t_total;
  rec.positive = rec.lyapunov > options.cutoff;
  rec.renormalizations = renorms;
  return rec;
}

namespace {

ClassicalState draw_sphere(int sites, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  ClassicalState s{std::vector<double>(static_cast<std::size_t>(2 * sites))};
  double n2 = 0.0;
  do {
    for (double& c : s.coords) c = gauss(rng);
    n2 = squared_norm(s.coords);
  } while (n2 == 0.0);
  const double n = std::sqrt(n2);
  for (double& c : s.coords) c /= n;
  return s;
}

}  // namespace

ClassicalState sample_uniform_sphere(int sites, std::uint64_t seed) {
  if (sites < 2) throw std::invalid_argument("chain needs at least 2 sites");
  std::mt19937_64 rng(seed);
  return draw_sphere(sites, rng);
}

std::optional<WindowSample> sample_in_window(const ChainParams& params,
                                             const EnergyWindow& window,
                                             long max_attempts,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (long attempt = 1; attempt <= max_attempts; ++attempt) {
    ClassicalState s = draw_sphere(params.sites, rng);
    const double e = classical_energy(s, params);
    if (window.contains(e)) return WindowSample{std::move(s), e, attempt};
  }
  return std::nullopt;
}

namespace {

struct DescentResult {
  double value;
  bool converged;
};

constexpr double kGradTol = 1e-10;

// Euclidean Hessian of classical_energy.
Eigen::MatrixXd energy_hessian(std::span<const double> z,
                               const ChainParams& params) {
  const int n = params.sites;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (int k = 0; k + 1 < n; ++k) {
    const double j = -params.couplings[static_cast<std::size_t>(k)];
    h(k, k + 1) = h(k + 1, k) = j;
    h(n + k, n + k + 1) = h(n + k + 1, n + k) = j;
  }
  const double lam = params.lambda;
  for (int k = 0; k < n; ++k) {
    const double x = z[static_cast<std::size_t>(k)];
    const double y = z[static_cast<std::size_t>(n + k)];
    const double dens = x * x + y * y;
    h(k, k) += 2.0 * lam * (dens + 2.0 * x * x);
    h(n + k, n + k) += 2.0 * lam * (dens + 2.0 * y * y);
    h(k, n + k) += 4.0 * lam * x * y;
    h(n + k, k) += 4.0 * lam * x * y;
  }
  return h;
}

// Minimizes sign * E on the unit sphere from `z`: projected gradient
// descent with Armijo backtracking, then Riemannian Newton polishing.
DescentResult sphere_descent(const ChainParams& params, std::vector<double> z,
                             double sign) {
  constexpr int kMaxIter = 20000;
  constexpr int kMaxNewton = 30;
  const std::size_t n = z.size();
  std::vector<double> g(n), trial(n);
  auto value = [&](std::span<const double> v) {
    return sign * classical_energy(v, params);
  };
  auto projected_gradient = [&](std::span<const double> v,
                                std::vector<double>& out) {
    classical_energy_gradient(v, params, out);
    double radial = 0.0;
    for (std::size_t i = 0; i < n; ++i) radial += sign * out[i] * v[i];
    for (std::size_t i = 0; i < n; ++i) out[i] = sign * out[i] - radial * v[i];
    return std::sqrt(squared_norm(out));
  };

  double f = value(z);
  double gnorm = projected_gradient(z, g);
  double step = 0.1;
  for (int it = 0; it < kMaxIter && gnorm >= 1e-6; ++it) {
    step = std::min(step * 2.0, 10.0);
    bool moved = false;
    while (step >= 1e-16) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = z[i] - step * g[i];
      normalize(trial);
      const double ft = value(trial);
      if (ft <= f - 1e-4 * step * gnorm * gnorm) {
        z.swap(trial);
        f = ft;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
    gnorm = projected_gradient(z, g);
  }

  // Newton on the sphere; the pseudo-inverse discards the global-phase
  // direction, along which the energy is flat.
  std::vector<double> g_new(n);
  for (int it = 0; it < kMaxNewton && gnorm >= kGradTol; ++it) {
    const Eigen::Map<const Eigen::VectorXd> zv(z.data(), static_cast<Eigen::Index>(n));
    Eigen::VectorXd euclid(static_cast<Eigen::Index>(n));
    classical_energy_gradient(z, params, std::span<double>(euclid.data(), n));
    euclid *= sign;
    const double mu = zv.dot(euclid);
    const Eigen::MatrixXd proj =
        Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                  static_cast<Eigen::Index>(n)) -
        zv * zv.transpose();
    const Eigen::MatrixXd hess =
        proj * (sign * energy_hessian(z, params) -
                mu * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                               static_cast<Eigen::Index>(n))) *
        proj;
    const Eigen::Map<const Eigen::VectorXd> gv(g.data(), static_cast<Eigen::Index>(n));
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(hess);
    cod.setThreshold(1e-10);
    const Eigen::VectorXd eta = proj * cod.solve(-gv);
    for (std::size_t i = 0; i < n; ++i)
      trial[i] = z[i] + eta[static_cast<Eigen::Index>(i)];
    normalize(trial);
    const double ft = value(trial);
    const double gt = projected_gradient(trial, g_new);
    if (gt >= gnorm || ft > f + 1e-12 * std::max(1.0, std::abs(f))) break;
    z.swap(trial);
    g.swap(g_new);
    f = ft;
    gnorm = gt;
  }
  return {sign * f, gnorm < kGradTol};
}

}  // namespace

EnergyBounds classical_energy_bounds(const ChainParams& params, int restarts,
                                     std::uint64_t seed) {
  if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  std::vector<std::vector<double>> starts;
  const auto dim = static_cast<std::size_t>(2 * params.sites);
  // Site-localized starts reach the self-trapped extrema directly.
  for (int k = 0; k < params.sites; ++k) {
    std::vector<double> z(dim, 0.0);
    z[static_cast<std::size_t>(k)] = 1.0;
    starts.push_back(std::move(z));
  }
  std::mt19937_64 rng(seed);
  for (int r = 0; r < restarts; ++r)
    starts.push_back(draw_sphere(params.sites, rng).coords);

  std::vector<DescentResult> lows, highs;
  for (const auto& z : starts) {
    lows.push_back(sphere_descent(params, z, +1.0));
    highs.push_back(sphere_descent(params, z, -1.0));
  }
  EnergyBounds out;
  out.e_min = std::min_element(lows.begin(), lows.end(), [](auto& a, auto& b) {
                return a.value < b.value;
              })->value;
  out.e_max = std::max_element(highs.begin(), highs.end(), [](auto& a, auto& b) {
                return a.value < b.value;
              })->value;
  // Several starts reach the same extremum up to rounding; any converged
  // one certifies it.
  auto certified = [](const std::vector<DescentResult>& runs, double best) {
    const double slack = 1e-9 * std::max(1.0, std::abs(best));
    return std::any_of(runs.begin(), runs.end(), [&](const DescentResult& r) {
      return r.converged && std::abs(r.value - best) <= slack;
    });
  };
  const bool min_ok = certified(lows, out.e_min);
  const bool max_ok = certified(highs, out.e_max);
  out.converged = min_ok && max_ok;
  return out;
}

}  // namespace bhchaos
