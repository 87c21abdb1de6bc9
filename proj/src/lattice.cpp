#include "bhchaos/lattice.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bhchaos {

std::vector<double> default_couplings(int sites) {
  if (sites < 2) throw std::invalid_argument("chain needs at least 2 sites");
  std::vector<double> j(static_cast<std::size_t>(sites - 1), 1.0);
  j[0] = 1.5;
  return j;
}

ChainParams make_chain(int sites, std::vector<double> couplings, double lambda,
                       int bosons) {
  if (sites < 2) throw std::invalid_argument("chain needs at least 2 sites");
  if (couplings.empty()) couplings = default_couplings(sites);
  if (couplings.size() != static_cast<std::size_t>(sites - 1))
    throw std::invalid_argument("couplings length must be L-1=" +
                                std::to_string(sites - 1));
  for (double j : couplings)
    if (!std::isfinite(j)) throw std::invalid_argument("non-finite coupling");
  if (!std::isfinite(lambda) || lambda < 0.0)
    throw std::invalid_argument("lambda must be finite and >= 0");
  if (bosons < 1) throw std::invalid_argument("boson count must be >= 1");
  return ChainParams{sites, std::move(couplings), lambda, bosons};
}

double relative_energy(double energy, double e_min, double e_max) {
  if (!(e_max > e_min)) throw std::invalid_argument("degenerate energy range");
  return (energy - e_min) / (e_max - e_min);
}

std::vector<EnergyWindow> make_windows(double e_min, double e_max, int count) {
  if (!(e_max > e_min)) throw std::invalid_argument("degenerate energy range");
  if (count < 1) throw std::invalid_argument("window count must be >= 1");
  std::vector<EnergyWindow> out;
  out.reserve(static_cast<std::size_t>(count));
  const double width = e_max - e_min;
  for (int i = 0; i < count; ++i) {
    const double f_lo = static_cast<double>(i) / count;
    const double f_hi = static_cast<double>(i + 1) / count;
    EnergyWindow w;
    w.index = i;
    w.lo = i == 0 ? e_min : e_min + width * f_lo;
    w.hi = i + 1 == count ? e_max : e_min + width * f_hi;
    w.rel_hi = f_hi;
    out.push_back(w);
  }
  return out;
}

std::optional<int> window_index_of(double energy, double e_min, double e_max,
                                   int count) {
  if (!(e_max > e_min) || count < 1) return std::nullopt;
  if (energy < e_min || energy > e_max) return std::nullopt;
  const double width = e_max - e_min;
  // ceil gives the (lo, hi] owner; nudge for rounding at shared edges.
  int idx = static_cast<int>(std::ceil((energy - e_min) / width * count)) - 1;
  if (idx < 0) idx = 0;
  if (idx >= count) idx = count - 1;
  auto edge = [&](int k) {
    if (k <= 0) return e_min;
    if (k >= count) return e_max;
    return e_min + width * (static_cast<double>(k) / count);
  };
  while (idx > 0 && energy <= edge(idx)) --idx;
  while (idx + 1 < count && energy > edge(idx + 1)) ++idx;
  return idx;
}

void to_json(nlohmann::json& j, const ChainParams& p) {
  j = nlohmann::json{{"L", p.sites},
                     {"couplings", p.couplings},
                     {"lambda", p.lambda},
                     {"N", p.bosons}};
}

void from_json(const nlohmann::json& j, ChainParams& p) {
  const int sites = j.value("L", 3);
  auto couplings = j.value("couplings", std::vector<double>{});
  const double lambda = j.value("lambda", 0.0);
  const int bosons = j.value("N", 1);
  p = make_chain(sites, std::move(couplings), lambda, bosons);
}

}  // namespace bhchaos
