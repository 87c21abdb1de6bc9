#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "bhchaos/quantum.hpp"

using namespace bhchaos;

namespace {

Eigen::MatrixXd hopping_matrix(std::span<const double> j, int sites) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(sites, sites);
  for (int k = 0; k + 1 < sites; ++k) m(k, k + 1) = m(k + 1, k) = -0.5 * j[k];
  return m;
}

// Dense Hamiltonian by applying every a_j^dag a_l term to every basis
// vector; states keyed by occupation tuple, independent of FockBasis
// ranking (only the descending enumeration order is shared).
Eigen::MatrixXd brute_force_hamiltonian(const ChainParams& p) {
  std::vector<std::vector<int>> states;
  std::vector<int> occ(p.sites, 0);
  auto rec = [&](auto&& self, int site, int left) -> void {
    if (site == p.sites - 1) {
      occ[site] = left;
      states.push_back(occ);
      return;
    }
    for (int n = left; n >= 0; --n) {
      occ[site] = n;
      self(self, site + 1, left - n);
    }
  };
  rec(rec, 0, p.bosons);
  std::map<std::vector<int>, int> index;
  for (std::size_t i = 0; i < states.size(); ++i) index[states[i]] = static_cast<int>(i);

  const int d = static_cast<int>(states.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
  const double u = p.lambda / p.bosons;
  for (int c = 0; c < d; ++c) {
    const auto& s = states[c];
    for (int j = 0; j < p.sites; ++j) h(c, c) += 0.5 * u * s[j] * (s[j] - 1);
    for (int j = 0; j < p.sites; ++j) {
      for (int l : {j - 1, j + 1}) {
        if (l < 0 || l >= p.sites || s[l] == 0) continue;
        auto t = s;
        const double amp = std::sqrt(static_cast<double>(t[l]));
        --t[l];
        const double amp2 = std::sqrt(static_cast<double>(t[j] + 1));
        ++t[j];
        const double jjl = p.couplings[std::min(j, l)];
        h(index.at(t), c) += -0.5 * jjl * amp * amp2;
      }
    }
  }
  return h;
}

// Free-boson spectrum: sum_k m_k mu_k over all occupations of the modes.
std::vector<double> free_boson_levels(std::span<const double> mu, int n) {
  std::vector<double> out;
  const int modes = static_cast<int>(mu.size());
  std::vector<int> m(modes, 0);
  auto rec = [&](auto&& self, int k, int left) -> void {
    if (k == modes - 1) {
      m[k] = left;
      double e = 0.0;
      for (int q = 0; q < modes; ++q) e += m[q] * mu[q];
      out.push_back(e);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      m[k] = v;
      self(self, k + 1, left - v);
    }
  };
  rec(rec, 0, n);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST(FockBasis, SmallEnumerationOrder) {
  const auto b = enumerate_fock_basis(2, 3);
  const std::vector<std::vector<int>> expected = {
      {2, 0, 0}, {1, 1, 0}, {1, 0, 1}, {0, 2, 0}, {0, 1, 1}, {0, 0, 2}};
  ASSERT_EQ(b.size(), expected.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto s = b.state(i);
    EXPECT_EQ(std::vector<int>(s.begin(), s.end()), expected[i]);
  }
}

TEST(FockBasis, Dimensions) {
  EXPECT_EQ(fock_dimension(150, 3), 11476u);
  EXPECT_EQ(enumerate_fock_basis(150, 3).size(), 11476u);
  EXPECT_EQ(fock_dimension(60, 3), 1891u);
  const auto vacuum = enumerate_fock_basis(0, 3);
  ASSERT_EQ(vacuum.size(), 1u);
  for (int n : vacuum.state(0)) EXPECT_EQ(n, 0);
  EXPECT_THROW(fock_dimension(2000, 40), std::overflow_error);
}

TEST(FockBasis, RankRoundTripAndBinomialSize) {
  for (int sites = 1; sites <= 5; ++sites) {
    for (int n = 0; n <= 9; ++n) {
      const auto b = enumerate_fock_basis(n, sites);
      // binomial(n + sites - 1, sites - 1) by Pascal's rule
      std::vector<std::vector<double>> pascal(n + sites, std::vector<double>(n + sites, 0));
      for (int a = 0; a < n + sites; ++a) {
        pascal[a][0] = 1;
        for (int k = 1; k <= a; ++k) pascal[a][k] = pascal[a - 1][k - 1] + (k < a ? pascal[a - 1][k] : 0);
      }
      EXPECT_EQ(static_cast<double>(b.size()), pascal[n + sites - 1][sites - 1]);
      for (std::size_t i = 0; i < b.size(); ++i) {
        ASSERT_EQ(b.index_of(b.state(i)), i);
        int total = 0;
        for (int v : b.state(i)) total += v;
        ASSERT_EQ(total, n);
        if (i > 0) {
          const auto prev = b.state(i - 1);
          const auto cur = b.state(i);
          ASSERT_TRUE(std::lexicographical_compare(cur.begin(), cur.end(), prev.begin(), prev.end()));
        }
      }
    }
  }
  const auto b = enumerate_fock_basis(4, 3);
  const int bad[] = {2, 2, 1};
  EXPECT_FALSE(b.find(bad).has_value());
  EXPECT_THROW(b.index_of(bad), std::invalid_argument);
}

TEST(Hamiltonian, HandEntries) {
  const auto b = enumerate_fock_basis(2, 3);
  const auto p = make_chain(3, {}, 4.0, 2);
  const Eigen::MatrixXd h(build_hamiltonian(b, p));
  const int s200[] = {2, 0, 0}, s110[] = {1, 1, 0};
  const auto i200 = b.index_of(s200), i110 = b.index_of(s110);
  EXPECT_NEAR(h(i110, i200), -0.75 * std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(h(i110, i200), -1.0606601717798212, 1e-12);
  EXPECT_EQ(h(i200, i200), 2.0);
  EXPECT_EQ(h.trace(), 6.0);
}

TEST(Hamiltonian, MatchesBruteForceOperatorApplication) {
  for (int n = 1; n <= 4; ++n) {
    for (double lambda : {0.0, 1.3, 7.0}) {
      const auto p = make_chain(3, {}, lambda, n);
      const Eigen::MatrixXd h(build_hamiltonian(enumerate_fock_basis(n, 3), p));
      const auto bf = brute_force_hamiltonian(p);
      ASSERT_EQ(h.rows(), bf.rows());
      EXPECT_LT((h - bf).cwiseAbs().maxCoeff(), 1e-14) << n << " " << lambda;
    }
  }
}

TEST(Hamiltonian, ExactlySymmetricAndSparse) {
  const auto b = enumerate_fock_basis(30, 4);
  const auto p = make_chain(4, {0.3, 1.7, 0.9}, 2.48, 30);
  const auto h = build_hamiltonian(b, p);
  const SparseMatrix ht = h.transpose();
  EXPECT_EQ((h - ht).norm(), 0.0);
  for (Eigen::Index c = 0; c < h.outerSize(); ++c) {
    EXPECT_LE(h.outerIndexPtr()[c + 1] - h.outerIndexPtr()[c], 2 * (4 - 1) + 1);
  }
}

TEST(Diagonalize, TwoByTwo) {
  Eigen::MatrixXd m(2, 2);
  m << 3.0, 0.5, 0.5, 3.0;
  const auto s = diagonalize(m, ChainParams{});
  EXPECT_NEAR(s.eigenvalues[0], 2.5, 1e-15);
  EXPECT_NEAR(s.eigenvalues[1], 3.5, 1e-15);
}

TEST(Diagonalize, OrthonormalResidualAndTrace) {
  const auto p = make_chain(3, {}, 2.48, 25);
  const auto b = enumerate_fock_basis(25, 3);
  const auto h = build_hamiltonian(b, p);
  const auto s = diagonalize(h, p);
  const Eigen::MatrixXd dense(h);
  const auto& v = s.eigenvectors;
  const auto d = static_cast<Eigen::Index>(b.size());
  EXPECT_LT((v.transpose() * v - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-10);
  const double hnorm = dense.norm();
  for (Eigen::Index c = 0; c < d; ++c)
    ASSERT_LT((dense * v.col(c) - s.eigenvalues[c] * v.col(c)).norm(), 1e-8 * hnorm);
  for (Eigen::Index c = 1; c < d; ++c) ASSERT_LE(s.eigenvalues[c - 1], s.eigenvalues[c]);
  EXPECT_NEAR(s.eigenvalues.sum(), dense.trace(), 1e-10 * std::abs(dense.trace()));

  const auto values_only = diagonalize(h, p, false);
  EXPECT_FALSE(values_only.has_vectors());
  EXPECT_LT((values_only.eigenvalues - s.eigenvalues).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Diagonalize, FreeBosonSpectrum) {
  const auto couplings = default_couplings(3);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> one(hopping_matrix(couplings, 3));
  const std::vector<double> mu(one.eigenvalues().data(), one.eigenvalues().data() + 3);
  for (int n = 1; n <= 6; ++n) {
    const auto p = make_chain(3, {}, 0.0, n);
    const auto s = diagonalize(build_hamiltonian(enumerate_fock_basis(n, 3), p), p, false);
    const auto expected = free_boson_levels(mu, n);
    ASSERT_EQ(static_cast<std::size_t>(s.eigenvalues.size()), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i)
      EXPECT_NEAR(s.eigenvalues[i], expected[i], 1e-10);
  }
}

TEST(Diagonalize, StrongCouplingApproachesDiagonal) {
  const int n = 20;
  const auto p = make_chain(3, {}, 1e4, n);
  const auto b = enumerate_fock_basis(n, 3);
  const auto s = diagonalize(build_hamiltonian(b, p), p, false);
  std::vector<double> diag;
  for (std::size_t i = 0; i < b.size(); ++i) {
    double e = 0.0;
    for (int v : b.state(i)) e += 0.5 * p.onsite_u() * v * (v - 1);
    diag.push_back(e);
  }
  std::sort(diag.begin(), diag.end());
  // Weyl: the hopping part has operator norm n * max|mu| for free bosons.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> one(hopping_matrix(p.couplings, 3));
  const double hop_norm = n * one.eigenvalues().cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (std::size_t i = 0; i < diag.size(); ++i)
    worst = std::max(worst, std::abs(s.eigenvalues[static_cast<Eigen::Index>(i)] - diag[i]));
  EXPECT_LE(worst, hop_norm);
  EXPECT_LT(worst / p.onsite_u(), 0.05);
}

TEST(Bases, ComputationalIsIdentity) {
  const auto p = make_chain(3, {}, 2.48, 8);
  const auto b = enumerate_fock_basis(8, 3);
  const auto basis = make_basis(BasisKind::computational, p, b);
  EXPECT_TRUE(basis.dense(b.size()).isIdentity());
  const auto s = diagonalize(build_hamiltonian(b, p), p);
  EXPECT_EQ(coefficients_in_basis(s, basis), s.eigenvectors);
}

TEST(Bases, FreeBasisDiagonalizesFreeHamiltonian) {
  const auto p = make_chain(3, {}, 2.48, 12);
  const auto b = enumerate_fock_basis(12, 3);
  const auto basis = make_basis(BasisKind::free, p, b);
  const Eigen::MatrixXd h0(build_free_hamiltonian(b, p.couplings));
  Eigen::MatrixXd rotated = basis.vectors.transpose() * h0 * basis.vectors;
  rotated.diagonal().setZero();
  EXPECT_LT(rotated.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Bases, CoefficientColumnsStayNormalized) {
  const auto p = make_chain(3, {}, 2.48, 15);
  const auto b = enumerate_fock_basis(15, 3);
  const auto s = diagonalize(build_hamiltonian(b, p), p);
  for (auto kind : {BasisKind::computational, BasisKind::free, BasisKind::perturbed_free}) {
    const auto c = coefficients_in_basis(s, make_basis(kind, p, b));
    for (Eigen::Index k = 0; k < c.cols(); ++k)
      ASSERT_NEAR(c.col(k).norm(), 1.0, 1e-10) << to_string(kind);
  }
}

TEST(Bases, FreeSpectrumInFreeBasisStaysInDegenerateSubspace) {
  const auto p = make_chain(3, {}, 0.0, 10);
  const auto b = enumerate_fock_basis(10, 3);
  const auto s = diagonalize(build_hamiltonian(b, p), p);
  const auto basis = make_basis(BasisKind::free, p, b);
  const Eigen::MatrixXd h0(build_free_hamiltonian(b, p.couplings));
  const Eigen::VectorXd basis_energy = (basis.vectors.transpose() * h0 * basis.vectors).diagonal();
  const auto c = coefficients_in_basis(s, basis);
  for (Eigen::Index k = 0; k < c.cols(); ++k) {
    double leak = 0.0;
    for (Eigen::Index r = 0; r < c.rows(); ++r)
      if (std::abs(basis_energy[r] - s.eigenvalues[k]) > 1e-8) leak += c(r, k) * c(r, k);
    ASSERT_LT(leak, 1e-10);
  }
}

TEST(Bases, PerturbedFreeSpectrumIsNonDegenerate) {
  // One-particle levels of the J = 1 chain with on-site (-0.01, 0.02, -0.03).
  const std::vector<double> unit = {1.0, 1.0};
  Eigen::MatrixXd m = hopping_matrix(unit, 3);
  const auto eps = default_perturbation(3);
  for (int k = 0; k < 3; ++k) m(k, k) = eps[k];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> one(m);
  const std::vector<double> nu(one.eigenvalues().data(), one.eigenvalues().data() + 3);
  for (int n : {10, 50, 100, 150, 200}) {
    const auto levels = free_boson_levels(nu, n);
    double gap = INFINITY;
    for (std::size_t i = 1; i < levels.size(); ++i) gap = std::min(gap, levels[i] - levels[i - 1]);
    EXPECT_GT(gap, 1e-9) << n;
  }
  // Cross-check the many-body solver against the composition oracle.
  const auto p = make_chain(3, {}, 0.0, 20);
  const auto b = enumerate_fock_basis(20, 3);
  const auto s = diagonalize(build_free_hamiltonian(b, unit, eps), p, false);
  const auto levels = free_boson_levels(nu, 20);
  for (std::size_t i = 0; i < levels.size(); ++i)
    EXPECT_NEAR(s.eigenvalues[static_cast<Eigen::Index>(i)], levels[i], 1e-10);
  EXPECT_THROW(default_perturbation(4), std::invalid_argument);
}

TEST(Eev, FockStateHasZeroHoppingExpectation) {
  const auto b = enumerate_fock_basis(2, 3);
  SpectrumBundle bundle;
  bundle.eigenvalues = Eigen::VectorXd::Zero(6);
  bundle.eigenvectors = Eigen::MatrixXd::Identity(6, 6);
  for (double e : eev_hopping(bundle, b)) EXPECT_EQ(e, 0.0);
}

TEST(Eev, FreeGroundStateIsCondensate) {
  // All bosons in the lowest one-particle mode c: <a2^dag a1>/N = c1 c2.
  const auto couplings = default_couplings(3);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> one(hopping_matrix(couplings, 3));
  const Eigen::VectorXd c = one.eigenvectors().col(0);
  const double expected = c[0] * c[1];
  EXPECT_NEAR(expected, 0.75 * std::sqrt(0.8125) / 1.625, 1e-12);  // 0.41603...
  for (int n : {5, 20}) {
    const auto p = make_chain(3, {}, 0.0, n);
    const auto b = enumerate_fock_basis(n, 3);
    const auto s = diagonalize(build_hamiltonian(b, p), p);
    EXPECT_NEAR(eev_hopping(s, b)[0], expected, 1e-10);
  }
}

TEST(Eev, BoundedByOne) {
  for (double lambda : {0.0, 0.28, 2.48, 12.33}) {
    const auto p = make_chain(3, {}, lambda, 18);
    const auto b = enumerate_fock_basis(18, 3);
    const auto s = diagonalize(build_hamiltonian(b, p), p);
    for (double e : eev_hopping(s, b)) ASSERT_LE(std::abs(e), 1.0);
  }
}

TEST(Eev, HermitianPartMatchesDirectExpectation) {
  const auto p = make_chain(3, {}, 2.48, 10);
  const auto b = enumerate_fock_basis(10, 3);
  const auto s = diagonalize(build_hamiltonian(b, p), p);
  const Eigen::MatrixXd a(hopping_observable(b));
  const auto eev = eev_hopping(s, b);
  for (Eigen::Index k = 0; k < s.eigenvectors.cols(); ++k)
    EXPECT_NEAR(eev[k], s.eigenvectors.col(k).dot(a * s.eigenvectors.col(k)), 1e-13);
}
