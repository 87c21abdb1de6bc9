#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <json.hpp>

namespace bhchaos {

// Open-boundary Bose-Hubbard chain. Interaction is parameterized by
// lambda = U * N; the classical side ignores `bosons`.
struct ChainParams {
  int sites = 3;
  std::vector<double> couplings;  // J_{j,j+1}, size sites - 1
  double lambda = 0.0;
  int bosons = 1;

  double onsite_u() const { return lambda / static_cast<double>(bosons); }
};

// J_{1,2} = 1.5 and every other bond 1.0.
std::vector<double> default_couplings(int sites);

// Validates and builds a parameter bundle. An empty `couplings` list
// selects default_couplings(sites). Throws std::invalid_argument.
ChainParams make_chain(int sites, std::vector<double> couplings, double lambda,
                       int bosons);

double relative_energy(double energy, double e_min, double e_max);

struct EnergyWindow {
  int index = 0;
  double lo = 0.0;
  double hi = 0.0;
  double rel_hi = 0.0;  // relative-energy upper edge

  // Half-open (lo, hi]; the first window also owns its lower edge.
  bool contains(double energy) const {
    return (energy > lo || (index == 0 && energy == lo)) && energy <= hi;
  }
};

std::vector<EnergyWindow> make_windows(double e_min, double e_max,
                                       int count = 100);

// Window owning `energy` under the (lo, hi] convention, or nullopt when
// the energy lies outside [e_min, e_max].
std::optional<int> window_index_of(double energy, double e_min, double e_max,
                                   int count = 100);

void to_json(nlohmann::json& j, const ChainParams& p);
void from_json(const nlohmann::json& j, ChainParams& p);

}  // namespace bhchaos
