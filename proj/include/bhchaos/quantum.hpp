#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "bhchaos/lattice.hpp"

namespace bhchaos {

// binomial(N + L - 1, L - 1); throws std::overflow_error when the result
// does not fit in size_t.
std::size_t fock_dimension(int bosons, int sites);

// Occupation-number basis at fixed particle number, ordered
// lexicographically descending: (N,0,..) first, (..,0,N) last.
class FockBasis {
 public:
  FockBasis(int bosons, int sites);

  std::size_t size() const { return size_; }
  int bosons() const { return bosons_; }
  int sites() const { return sites_; }

  std::span<const int> state(std::size_t i) const {
    return {occupations_.data() + i * static_cast<std::size_t>(sites_),
            static_cast<std::size_t>(sites_)};
  }

  // Combinatorial rank in O(L) using a precomputed binomial table.
  std::optional<std::size_t> find(std::span<const int> occ) const;
  std::size_t index_of(std::span<const int> occ) const;

 private:
  // compositions(m, k): ways to place m bosons on k sites.
  std::size_t compositions(int m, int k) const;

  int bosons_;
  int sites_;
  std::size_t size_;
  std::vector<int> occupations_;
  std::vector<std::size_t> comp_table_;  // (N + 1) x (L + 1)
};

FockBasis enumerate_fock_basis(int bosons, int sites);

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

// Bose-Hubbard Hamiltonian with U = lambda / N. Transposed entries are
// bit-identical.
SparseMatrix build_hamiltonian(const FockBasis& basis, const ChainParams& params);

// Hopping-only Hamiltonian with an on-site potential sum_j eps_j n_j.
SparseMatrix build_free_hamiltonian(const FockBasis& basis,
                                    std::span<const double> couplings,
                                    std::span<const double> onsite = {});

struct SpectrumBundle {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // columns, Fock basis; empty if not requested
  ChainParams params;

  std::size_t dimension() const {
    return static_cast<std::size_t>(eigenvalues.size());
  }
  bool has_vectors() const { return eigenvectors.size() > 0; }
};

class EigensolverError : public std::runtime_error {
 public:
  EigensolverError(const std::string& what, int index)
      : std::runtime_error(what), index_(index) {}
  int index() const { return index_; }

 private:
  int index_;
};

// Full dense symmetric eigendecomposition (LAPACK dsyevd).
SpectrumBundle diagonalize(const Eigen::MatrixXd& h, const ChainParams& params,
                           bool with_vectors = true);
SpectrumBundle diagonalize(const SparseMatrix& h, const ChainParams& params,
                           bool with_vectors = true);

enum class BasisKind { computational, free, perturbed_free };

std::string to_string(BasisKind kind);
BasisKind basis_kind_from_string(const std::string& name);

struct BasisSet {
  BasisKind kind = BasisKind::computational;
  // Columns are basis vectors in the Fock basis. Left empty for the
  // computational basis, which is the identity.
  Eigen::MatrixXd vectors;
  std::vector<double> perturbation;

  bool is_identity() const { return kind == BasisKind::computational; }
  Eigen::MatrixXd dense(std::size_t dim) const;
};

// On-site potentials for the perturbed free basis: (-0.01, 0.02, -0.03)
// at L = 3. Other chain lengths need explicit values.
std::vector<double> default_perturbation(int sites);

BasisSet make_basis(BasisKind kind, const ChainParams& params,
                    const FockBasis& basis,
                    std::vector<double> perturbation = {});

// B^T V: eigenvector coefficients with respect to `basis_set`.
Eigen::MatrixXd coefficients_in_basis(const SpectrumBundle& bundle,
                                      const BasisSet& basis_set);

// Matrix of a_2^dagger a_1 / N in the Fock basis.
SparseMatrix hopping_observable(const FockBasis& basis);

// <v| (A + A^T)/2 |v> for A = a_2^dagger a_1 / N and every eigenvector.
std::vector<double> eev_hopping(const SpectrumBundle& bundle,
                                const FockBasis& basis);

}  // namespace bhchaos
