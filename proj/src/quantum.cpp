#include "bhchaos/quantum.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <lapacke.h>

namespace bhchaos {

std::size_t fock_dimension(int bosons, int sites) {
  if (bosons < 0 || sites < 1)
    throw std::invalid_argument("need N >= 0 and L >= 1");
  // binomial(N + L - 1, L - 1), exact at every step.
  unsigned __int128 c = 1;
  const int n = bosons + sites - 1;
  const int k = sites - 1;
  for (int i = 0; i < k; ++i) {
    c = c * static_cast<unsigned>(n - i) / static_cast<unsigned>(i + 1);
    if (c > std::numeric_limits<std::size_t>::max())
      throw std::overflow_error("Fock dimension overflows size_t");
  }
  return static_cast<std::size_t>(c);
}

FockBasis::FockBasis(int bosons, int sites)
    : bosons_(bosons), sites_(sites), size_(fock_dimension(bosons, sites)) {
  const auto ks = static_cast<std::size_t>(sites + 1);
  comp_table_.assign(static_cast<std::size_t>(bosons + 1) * ks, 0);
  for (int m = 0; m <= bosons; ++m)
    for (int k = 0; k <= sites; ++k)
      comp_table_[static_cast<std::size_t>(m) * ks + k] =
          k == 0 ? (m == 0 ? 1 : 0) : fock_dimension(m, k);

  if (size_ > std::numeric_limits<std::size_t>::max() /
                  static_cast<std::size_t>(sites))
    throw std::overflow_error("Fock basis storage overflows size_t");
  occupations_.reserve(size_ * static_cast<std::size_t>(sites));
  std::vector<int> occ(static_cast<std::size_t>(sites), 0);
  occ[0] = bosons;
  // Walk compositions in descending lexicographic order.
  for (;;) {
    occupations_.insert(occupations_.end(), occ.begin(), occ.end());
    // Rightmost movable boson: last site j < L-1 with occ[j] > 0.
    int j = sites - 2;
    while (j >= 0 && occ[static_cast<std::size_t>(j)] == 0) --j;
    if (j < 0) break;
    const int tail = occ[static_cast<std::size_t>(sites - 1)];
    occ[static_cast<std::size_t>(sites - 1)] = 0;
    --occ[static_cast<std::size_t>(j)];
    occ[static_cast<std::size_t>(j + 1)] = tail + 1;
  }
}

std::size_t FockBasis::compositions(int m, int k) const {
  if (m < 0) return 0;
  return comp_table_[static_cast<std::size_t>(m) *
                         static_cast<std::size_t>(sites_ + 1) +
                     static_cast<std::size_t>(k)];
}

std::optional<std::size_t> FockBasis::find(std::span<const int> occ) const {
  if (occ.size() != static_cast<std::size_t>(sites_)) return std::nullopt;
  int remaining = bosons_;
  std::size_t rank = 0;
  for (int j = 0; j < sites_; ++j) {
    const int n = occ[static_cast<std::size_t>(j)];
    if (n < 0 || n > remaining) return std::nullopt;
    const int after = sites_ - j - 1;
    if (after == 0) {
      if (n != remaining) return std::nullopt;
      break;
    }
    // States with a larger occupation on site j come first; their count
    // sums to compositions(remaining - n - 1, after + 1).
    rank += compositions(remaining - n - 1, after + 1);
    remaining -= n;
  }
  return rank;
}

std::size_t FockBasis::index_of(std::span<const int> occ) const {
  if (auto idx = find(occ)) return *idx;
  throw std::invalid_argument("occupation tuple not in basis");
}

FockBasis enumerate_fock_basis(int bosons, int sites) {
  return FockBasis(bosons, sites);
}

namespace {

// Adds -(J_b / 2) sqrt(n_{b+1} (n_b + 1)) for a_b^dag a_{b+1} and its
// transpose, so each unordered pair is visited once.
void push_hopping(const FockBasis& basis, std::span<const double> couplings,
                  std::vector<Eigen::Triplet<double>>& triplets) {
  const int sites = basis.sites();
  std::vector<int> moved(static_cast<std::size_t>(sites));
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const auto occ = basis.state(i);
    for (int b = 0; b + 1 < sites; ++b) {
      const int from = occ[static_cast<std::size_t>(b + 1)];
      if (from == 0) continue;
      const int to = occ[static_cast<std::size_t>(b)];
      std::copy(occ.begin(), occ.end(), moved.begin());
      ++moved[static_cast<std::size_t>(b)];
      --moved[static_cast<std::size_t>(b + 1)];
      const std::size_t t = basis.index_of(moved);
      const double amp = -0.5 * couplings[static_cast<std::size_t>(b)] *
                         std::sqrt(static_cast<double>(from) * (to + 1));
      const auto r = static_cast<Eigen::Index>(t);
      const auto c = static_cast<Eigen::Index>(i);
      triplets.emplace_back(r, c, amp);
      triplets.emplace_back(c, r, amp);
    }
  }
}

SparseMatrix assemble(std::size_t dim,
                      const std::vector<Eigen::Triplet<double>>& triplets) {
  const auto n = static_cast<Eigen::Index>(dim);
  SparseMatrix h(n, n);
  h.setFromTriplets(triplets.begin(), triplets.end());
  h.makeCompressed();
  return h;
}

}  // namespace

SparseMatrix build_hamiltonian(const FockBasis& basis,
                               const ChainParams& params) {
  if (params.bosons != basis.bosons() || params.sites != basis.sites())
    throw std::invalid_argument("parameters do not match the Fock basis");
  const double u = params.onsite_u();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(basis.size() * static_cast<std::size_t>(2 * basis.sites()));
  for (std::size_t i = 0; i < basis.size(); ++i) {
    double pairs = 0.0;
    for (int n : basis.state(i)) pairs += static_cast<double>(n) * (n - 1);
    if (pairs != 0.0) {
      const auto k = static_cast<Eigen::Index>(i);
      triplets.emplace_back(k, k, 0.5 * u * pairs);
    }
  }
  push_hopping(basis, params.couplings, triplets);
  return assemble(basis.size(), triplets);
}

SparseMatrix build_free_hamiltonian(const FockBasis& basis,
                                    std::span<const double> couplings,
                                    std::span<const double> onsite) {
  if (couplings.size() + 1 != static_cast<std::size_t>(basis.sites()))
    throw std::invalid_argument("couplings length must be L-1");
  if (!onsite.empty() && onsite.size() != static_cast<std::size_t>(basis.sites()))
    throw std::invalid_argument("on-site potential length must be L");
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(basis.size() * static_cast<std::size_t>(2 * basis.sites()));
  if (!onsite.empty()) {
    for (std::size_t i = 0; i < basis.size(); ++i) {
      const auto occ = basis.state(i);
      double e = 0.0;
      for (std::size_t j = 0; j < occ.size(); ++j) e += onsite[j] * occ[j];
      const auto k = static_cast<Eigen::Index>(i);
      triplets.emplace_back(k, k, e);
    }
  }
  push_hopping(basis, couplings, triplets);
  return assemble(basis.size(), triplets);
}

SpectrumBundle diagonalize(const Eigen::MatrixXd& h, const ChainParams& params,
                           bool with_vectors) {
  if (h.rows() != h.cols() || h.rows() < 1)
    throw std::invalid_argument("diagonalize needs a non-empty square matrix");
  const auto n = static_cast<lapack_int>(h.rows());
  Eigen::MatrixXd a = h;
  Eigen::VectorXd w(h.rows());
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR,
                                         with_vectors ? 'V' : 'N', 'U', n,
                                         a.data(), n, w.data());
  if (info < 0)
    throw std::invalid_argument("dsyevd: illegal argument " +
                                std::to_string(-info));
  if (info > 0)
    throw EigensolverError("dsyevd failed to converge", static_cast<int>(info));
  SpectrumBundle out;
  out.eigenvalues = std::move(w);
  if (with_vectors) out.eigenvectors = std::move(a);
  out.params = params;
  return out;
}

SpectrumBundle diagonalize(const SparseMatrix& h, const ChainParams& params,
                           bool with_vectors) {
  return diagonalize(Eigen::MatrixXd(h), params, with_vectors);
}

std::string to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::computational:
      return "computational";
    case BasisKind::free:
      return "free";
    case BasisKind::perturbed_free:
      return "perturbed-free";
  }
  return "unknown";
}

BasisKind basis_kind_from_string(const std::string& name) {
  if (name == "computational") return BasisKind::computational;
  if (name == "free") return BasisKind::free;
  if (name == "perturbed-free") return BasisKind::perturbed_free;
  throw std::invalid_argument("unknown basis kind: " + name);
}

Eigen::MatrixXd BasisSet::dense(std::size_t dim) const {
  const auto n = static_cast<Eigen::Index>(dim);
  if (is_identity()) return Eigen::MatrixXd::Identity(n, n);
  return vectors;
}

std::vector<double> default_perturbation(int sites) {
  if (sites != 3)
    throw std::invalid_argument(
        "perturbed free basis has default potentials only for L=3");
  return {-0.01, 0.02, -0.03};
}

BasisSet make_basis(BasisKind kind, const ChainParams& params,
                    const FockBasis& basis, std::vector<double> perturbation) {
  BasisSet out;
  out.kind = kind;
  switch (kind) {
    case BasisKind::computational:
      break;
    case BasisKind::free: {
      const auto h = build_free_hamiltonian(basis, params.couplings);
      out.vectors = diagonalize(h, params).eigenvectors;
      break;
    }
    case BasisKind::perturbed_free: {
      if (perturbation.empty()) perturbation = default_perturbation(basis.sites());
      const std::vector<double> unit(static_cast<std::size_t>(basis.sites() - 1),
                                     1.0);
      const auto h = build_free_hamiltonian(basis, unit, perturbation);
      out.vectors = diagonalize(h, params).eigenvectors;
      out.perturbation = std::move(perturbation);
      break;
    }
  }
  return out;
}

Eigen::MatrixXd coefficients_in_basis(const SpectrumBundle& bundle,
                                      const BasisSet& basis_set) {
  if (!bundle.has_vectors())
    throw std::invalid_argument("spectrum bundle carries no eigenvectors");
  if (basis_set.is_identity()) return bundle.eigenvectors;
  if (basis_set.vectors.rows() != bundle.eigenvectors.rows())
    throw std::invalid_argument("basis dimension mismatch");
  Eigen::MatrixXd out(bundle.eigenvectors.rows(), bundle.eigenvectors.cols());
  out.noalias() = basis_set.vectors.transpose() * bundle.eigenvectors;
  return out;
}

SparseMatrix hopping_observable(const FockBasis& basis) {
  if (basis.sites() < 2) throw std::invalid_argument("need L >= 2");
  const double inv_n = basis.bosons() > 0 ? 1.0 / basis.bosons() : 0.0;
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<int> moved(static_cast<std::size_t>(basis.sites()));
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const auto occ = basis.state(i);
    if (occ[0] == 0) continue;
    std::copy(occ.begin(), occ.end(), moved.begin());
    --moved[0];
    ++moved[1];
    const double amp = std::sqrt(static_cast<double>(occ[0]) * (occ[1] + 1)) * inv_n;
    triplets.emplace_back(static_cast<Eigen::Index>(basis.index_of(moved)),
                          static_cast<Eigen::Index>(i), amp);
  }
  return assemble(basis.size(), triplets);
}

std::vector<double> eev_hopping(const SpectrumBundle& bundle,
                                const FockBasis& basis) {
  if (!bundle.has_vectors())
    throw std::invalid_argument("spectrum bundle carries no eigenvectors");
  if (static_cast<std::size_t>(bundle.eigenvectors.rows()) != basis.size())
    throw std::invalid_argument("basis dimension mismatch");
  const SparseMatrix a = hopping_observable(basis);
  const SparseMatrix sym = 0.5 * (a + SparseMatrix(a.transpose()));
  const auto& v = bundle.eigenvectors;
  std::vector<double> out(static_cast<std::size_t>(v.cols()));
  Eigen::VectorXd av(v.rows());
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    av.noalias() = sym * v.col(c);
    out[static_cast<std::size_t>(c)] = v.col(c).dot(av);
  }
  return out;
}

}  // namespace bhchaos
