#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "mallows_mix/moments.hpp"

namespace mallows_mix {

struct Partition3 {
  std::array<std::vector<int>, 3> parts;  // S_a, S_b, S_c

  const std::vector<int>& sa() const { return parts[0]; }
  const std::vector<int>& sb() const { return parts[1]; }
  const std::vector<int>& sc() const { return parts[2]; }
  int min_size() const;
};

/// Each index goes to one of three parts uniformly; redrawn while a part is empty.
Partition3 random_partition(int n, Rng& rng);

/// t(i, j, k) = P_{a_i b_j c_k} over the cross product of a partition.
class MomentTensor3 {
 public:
  MomentTensor3(std::array<std::vector<int>, 3> index);

  int dim(int mode) const { return static_cast<int>(index_[mode].size()); }
  const std::vector<int>& index(int mode) const { return index_[mode]; }

  double& operator()(int i, int j, int k) { return data_[(static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k]; }
  double operator()(int i, int j, int k) const { return data_[(static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k]; }

  /// Mode-m unfolding: rows indexed by mode m, columns by the other two modes in order.
  Eigen::MatrixXd unfold(int mode) const;
  /// Contraction of the third mode with w: M_w(i, j) = sum_k t(i, j, k) w_k.
  Eigen::MatrixXd contract_c(const Eigen::VectorXd& w) const;
  double frobenius() const;

 private:
  std::array<std::vector<int>, 3> index_;
  std::vector<double> data_;
};

MomentTensor3 build_tensor(const MomentStats& stats, const Partition3& part);

struct Rank2Decomp {
  std::array<Eigen::VectorXd, 3> u, v;  // modes a, b, c
  double residual = 0.0;
  bool degenerate = false;
  double eigen_gap = 0.0;  // relative separation of the two generalized eigenvalues

  /// n_tau x 2 factor matrix (u; v) for one mode.
  Eigen::MatrixXd factor(int mode) const;
};

Rank2Decomp decompose_rank2(const MomentTensor3& t, Rng& rng);

/// Frobenius norm of t - sum of the two rank-1 terms.
double reconstruction_error(const MomentTensor3& t, const Rank2Decomp& d);

/// Second singular value of an m x 2 matrix via the closed-form 2x2 Gram eigenproblem.
template <typename Derived>
double sigma2(const Eigen::MatrixBase<Derived>& m) {
  if (m.cols() != 2) throw DomainError("sigma2 expects two columns");
  if (m.rows() < 2) throw DomainError("sigma2 expects at least two rows");
  const double a = m.col(0).squaredNorm();
  const double c = m.col(1).squaredNorm();
  const double b = m.col(0).dot(m.col(1));
  const double half_tr = 0.5 * (a + c);
  const double big = half_tr + std::sqrt(0.25 * (a - c) * (a - c) + b * b);
  if (big <= 0.0) return 0.0;
  const double small = (a * c - b * b) / big;
  return small > 0.0 ? std::sqrt(small) : 0.0;
}

}  // namespace mallows_mix
