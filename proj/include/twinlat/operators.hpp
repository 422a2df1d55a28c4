#pragma once

#include <vector>

#include <Eigen/Sparse>

#include "twinlat/common.hpp"

namespace twinlat {

// product basis over n two-level atoms: bit j of the basis index is the
// excitation of atom j (bit 0 = first atom, array 1 before array 2).
using SpMat = Eigen::SparseMatrix<cd>;

inline int hilbert_dim(int n_atoms) { return 1 << n_atoms; }

inline int n_atoms_of(Eigen::Index dim) {
  int n = 0;
  while ((Eigen::Index{1} << n) < dim) ++n;
  if ((Eigen::Index{1} << n) != dim) throw solver_error("matrix dimension is not a power of two");
  return n;
}

// lowering operator on atom j: |0><1|_j
inline SpMat sigma_m(int n_atoms, int j) {
  const int dim = hilbert_dim(n_atoms);
  SpMat s(dim, dim);
  std::vector<Eigen::Triplet<cd>> t;
  t.reserve(dim / 2);
  for (int b = 0; b < dim; ++b)
    if (b & (1 << j)) t.emplace_back(b ^ (1 << j), b, cd{1.0, 0.0});
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

inline SpMat sigma_p(int n_atoms, int j) { return SpMat(sigma_m(n_atoms, j).adjoint()); }

// generic spin-exchange hamiltonian on the product basis:
//   H = sum_k diag_k n_k + sum_{j != k} w(j,k) sigma_j^+ sigma_k
//       - sum_k (drive_k sigma_k^+ + conj(drive_k) sigma_k)
// covers H_S (real diag/w, drive on) and the full effective hamiltonian
// (complex diag/w, drive off) alike.
inline SpMat hopping_hamiltonian(const Eigen::VectorXcd& diag,
                                 const Eigen::MatrixXcd& w,
                                 const Eigen::VectorXcd& drive) {
  const int n = static_cast<int>(diag.size());
  const int dim = hilbert_dim(n);
  const bool driven = drive.size() > 0;
  std::vector<Eigen::Triplet<cd>> t;
  t.reserve(static_cast<size_t>(dim) * (1 + n));
  for (int b = 0; b < dim; ++b) {
    cd d{0.0, 0.0};
    for (int k = 0; k < n; ++k)
      if (b & (1 << k)) d += diag(k);
    if (d != cd{0.0, 0.0}) t.emplace_back(b, b, d);
    for (int k = 0; k < n; ++k) {
      if (b & (1 << k)) {
        for (int j = 0; j < n; ++j)
          if (j != k && !(b & (1 << j)))
            t.emplace_back((b ^ (1 << k)) | (1 << j), b, w(j, k));
        if (driven) t.emplace_back(b ^ (1 << k), b, -std::conj(drive(k)));
      } else if (driven) {
        t.emplace_back(b | (1 << k), b, -drive(k));
      }
    }
  }
  SpMat h(dim, dim);
  h.setFromTriplets(t.begin(), t.end());
  return h;
}

// lift a single-excitation amplitude vector into the full product space
inline Eigen::VectorXcd embed_single_excitation(const Eigen::VectorXcd& v) {
  const int n = static_cast<int>(v.size());
  Eigen::VectorXcd full = Eigen::VectorXcd::Zero(hilbert_dim(n));
  for (int j = 0; j < n; ++j) full(1 << j) = v(j);
  return full;
}

}  // namespace twinlat
