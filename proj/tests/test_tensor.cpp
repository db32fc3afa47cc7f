#include "doctest.h"
#include "mallows_mix/tensor.hpp"

using namespace mallows_mix;

namespace {
Eigen::VectorXd restrict(const Eigen::VectorXd& x, const std::vector<int>& idx) {
  Eigen::VectorXd r(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) r[k] = x[idx[k]];
  return r;
}

double align_error(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  // Scale-free comparison: the decomposition fixes scale only up to the split between modes.
  const double s = got.dot(want) / got.squaredNorm();
  return (s * got - want).norm() / want.norm();
}
}  // namespace

TEST_CASE("random partition covers every index once") {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const Partition3 p = random_partition(10, rng);
    std::vector<int> seen(10, 0);
    for (const auto& part : p.parts) {
      CHECK(!part.empty());
      for (int e : part) ++seen[e];
    }
    for (int c : seen) CHECK(c == 1);
  }
  CHECK_THROWS(random_partition(2, rng));
}

TEST_CASE("sigma2 closed form matches SVD") {
  Rng rng(4);
  std::normal_distribution<double> g;
  for (int t = 0; t < 100; ++t) {
    Eigen::MatrixXd m(3 + t % 5, 2);
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < 2; ++j) m(i, j) = g(rng);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    CHECK(std::abs(sigma2(m) - svd.singularValues()[1]) < 1e-12);
  }
  Eigen::MatrixXd rank1(4, 2);
  rank1 << 1, 2, 2, 4, 3, 6, 4, 8;
  CHECK(sigma2(rank1) < 1e-7);
  CHECK_THROWS_AS(sigma2(Eigen::MatrixXd::Zero(3, 3)), DomainError);
}

TEST_CASE("tensor unfolding and contraction") {
  MomentTensor3 t({std::vector<int>{0, 1}, std::vector<int>{2, 3, 4}, std::vector<int>{5, 6}});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 2; ++k) t(i, j, k) = 100 * i + 10 * j + k;
  const Eigen::MatrixXd a = t.unfold(0), b = t.unfold(1), c = t.unfold(2);
  CHECK(a.rows() == 2);
  CHECK(a.cols() == 6);
  CHECK(b.rows() == 3);
  CHECK(c.rows() == 2);
  CHECK(a.sum() == doctest::Approx(b.sum()));
  CHECK(a.sum() == doctest::Approx(c.sum()));
  Eigen::VectorXd w(2);
  w << 1, 2;
  const Eigen::MatrixXd mw = t.contract_c(w);
  CHECK(mw(1, 2) == doctest::Approx(t(1, 2, 0) + 2 * t(1, 2, 1)));
}

TEST_CASE("exact rank-2 tensors decompose to the component vectors") {
  Rng rng(11);
  std::uniform_real_distribution<double> phi(0.3, 0.8);
  int checked = 0;
  for (int t = 0; t < 20; ++t) {
    const int n = 12;
    const MallowsMixture m(0.3 + 0.02 * t, MallowsModel(phi(rng), random_permutation(n, rng)),
                           MallowsModel(phi(rng), random_permutation(n, rng)));
    const MomentStats st = closed_form(m);
    const Partition3 part = random_partition(n, rng);
    if (part.min_size() < 2) continue;
    const MomentTensor3 ten = build_tensor(st, part);
    const Rank2Decomp d = decompose_rank2(ten, rng);
    CHECK(!d.degenerate);
    CHECK(reconstruction_error(ten, d) < 1e-9 * ten.frobenius());
    const Eigen::VectorXd x = representative_vector(m.m1()), y = representative_vector(m.m2());
    for (int mode = 0; mode < 3; ++mode) {
      const Eigen::VectorXd xs = restrict(x, part.parts[mode]), ys = restrict(y, part.parts[mode]);
      // Component order is arbitrary; match on mode a, then the other modes must follow.
      const bool direct = align_error(d.u[0], restrict(x, part.sa())) < align_error(d.u[0], restrict(y, part.sa()));
      const Eigen::VectorXd& gu = d.u[mode];
      const Eigen::VectorXd& gv = d.v[mode];
      CHECK(align_error(gu, direct ? xs : ys) < 1e-6);
      CHECK(align_error(gv, direct ? ys : xs) < 1e-6);
    }
    ++checked;
  }
  CHECK(checked > 5);
}

TEST_CASE("rank-1 tensors are flagged degenerate") {
  Rng rng(12);
  const MallowsModel a(0.5, random_permutation(9, rng));
  const MomentStats st = closed_form(MallowsMixture(0.4, a, a));
  Partition3 part;
  part.parts = {std::vector<int>{0, 1, 2}, std::vector<int>{3, 4, 5}, std::vector<int>{6, 7, 8}};
  const Rank2Decomp d = decompose_rank2(build_tensor(st, part), rng);
  CHECK(d.degenerate);
}
