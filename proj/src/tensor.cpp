#include "mallows_mix/tensor.hpp"

#include <algorithm>
#include <limits>

#include "mallows_mix/numeric.hpp"

namespace mallows_mix {

namespace {

constexpr double kRankTol = 1e-10;  // singular values below kRankTol * sigma_1 count as zero
constexpr int kContractionDraws = 8;
constexpr double kGoodGap = 0.5;

Eigen::VectorXd random_unit(int d, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd w(d);
  for (int i = 0; i < d; ++i) w[i] = g(rng);
  const double norm = w.norm();
  return norm > 0 ? Eigen::VectorXd(w / norm) : Eigen::VectorXd::Unit(d, 0);
}

// Null vector of the 2x2 matrix m - lambda I, from its better-conditioned row.
Eigen::Vector2d null_vector(const Eigen::Matrix2d& m, double lambda) {
  const double p = m(0, 0) - lambda, q = m(0, 1), r = m(1, 0), s = m(1, 1) - lambda;
  Eigen::Vector2d v = (p * p + q * q >= r * r + s * s) ? Eigen::Vector2d(q, -p) : Eigen::Vector2d(s, -r);
  const double norm = v.norm();
  return norm > 0 ? Eigen::Vector2d(v / norm) : Eigen::Vector2d(1.0, 0.0);
}

struct Eig2 {
  double l1 = 0, l2 = 0;
  double imag = 0;
};

Eig2 eig2(const Eigen::Matrix2d& m) {
  const double half_tr = 0.5 * m.trace();
  const double disc = half_tr * half_tr - m.determinant();
  if (disc >= 0) {
    const double r = std::sqrt(disc);
    return {half_tr + r, half_tr - r, 0.0};
  }
  return {half_tr, half_tr, std::sqrt(-disc)};
}

Eigen::MatrixXd top_left_singular(const Eigen::MatrixXd& m, int k, Eigen::VectorXd* sv) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU);
  if (sv) *sv = svd.singularValues();
  return svd.matrixU().leftCols(std::min<int>(k, static_cast<int>(svd.matrixU().cols())));
}

bool rank_below_two(const Eigen::VectorXd& sv) {
  return sv.size() < 2 || sv[0] <= 0.0 || sv[1] < kRankTol * sv[0];
}

// Equal norms across the three factors of a term, nonnegative sums on modes a and b.
void normalize_term(Eigen::VectorXd& a, Eigen::VectorXd& b, Eigen::VectorXd& c) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    a.setZero();
    b.setZero();
    c.setZero();
    return;
  }
  a /= na;
  b /= nb;
  c *= na * nb;
  if (a.sum() < 0) a = -a, c = -c;
  if (b.sum() < 0) b = -b, c = -c;
  const double nc = c.norm();
  if (nc == 0.0) {
    a.setZero();
    b.setZero();
    return;
  }
  const double s = std::cbrt(nc);
  a *= s;
  b *= s;
  c *= s / nc;
}

Rank2Decomp rank1_fallback(const MomentTensor3& t) {
  Rank2Decomp d;
  d.degenerate = true;
  std::array<Eigen::VectorXd, 3> f;
  for (int m = 0; m < 3; ++m) f[m] = top_left_singular(t.unfold(m), 1, nullptr).col(0);
  double lambda = 0.0;
  for (int i = 0; i < t.dim(0); ++i)
    for (int j = 0; j < t.dim(1); ++j)
      for (int k = 0; k < t.dim(2); ++k) lambda += t(i, j, k) * f[0][i] * f[1][j] * f[2][k];
  f[2] *= lambda;
  normalize_term(f[0], f[1], f[2]);
  d.u = f;
  for (int m = 0; m < 3; ++m) d.v[m] = Eigen::VectorXd::Zero(t.dim(m));
  d.residual = reconstruction_error(t, d);
  return d;
}

}  // namespace

int Partition3::min_size() const {
  return static_cast<int>(std::min({parts[0].size(), parts[1].size(), parts[2].size()}));
}

Partition3 random_partition(int n, Rng& rng) {
  if (n < 3) throw DomainError("random_partition needs n >= 3");
  Partition3 p;
  do {
    for (auto& s : p.parts) s.clear();
    for (int i = 0; i < n; ++i) p.parts[uniform_index(rng, 3)].push_back(i);
  } while (p.min_size() == 0);
  return p;
}

MomentTensor3::MomentTensor3(std::array<std::vector<int>, 3> index)
    : index_(std::move(index)), data_(index_[0].size() * index_[1].size() * index_[2].size(), 0.0) {}

Eigen::MatrixXd MomentTensor3::unfold(int mode) const {
  const int da = dim(0), db = dim(1), dc = dim(2);
  Eigen::MatrixXd m;
  if (mode == 0) {
    m.resize(da, db * dc);
    for (int i = 0; i < da; ++i)
      for (int j = 0; j < db; ++j)
        for (int k = 0; k < dc; ++k) m(i, j * dc + k) = (*this)(i, j, k);
  } else if (mode == 1) {
    m.resize(db, da * dc);
    for (int i = 0; i < da; ++i)
      for (int j = 0; j < db; ++j)
        for (int k = 0; k < dc; ++k) m(j, i * dc + k) = (*this)(i, j, k);
  } else {
    m.resize(dc, da * db);
    for (int i = 0; i < da; ++i)
      for (int j = 0; j < db; ++j)
        for (int k = 0; k < dc; ++k) m(k, i * db + j) = (*this)(i, j, k);
  }
  return m;
}

Eigen::MatrixXd MomentTensor3::contract_c(const Eigen::VectorXd& w) const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim(0), dim(1));
  for (int i = 0; i < dim(0); ++i)
    for (int j = 0; j < dim(1); ++j)
      for (int k = 0; k < dim(2); ++k) m(i, j) += (*this)(i, j, k) * w[k];
  return m;
}

double MomentTensor3::frobenius() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

MomentTensor3 build_tensor(const MomentStats& stats, const Partition3& part) {
  for (const auto& s : part.parts)
    for (int e : s)
      if (e < 0 || e >= stats.n()) throw DomainError("build_tensor: partition index outside the statistics");
  MomentTensor3 t(part.parts);
  for (int i = 0; i < t.dim(0); ++i)
    for (int j = 0; j < t.dim(1); ++j)
      for (int k = 0; k < t.dim(2); ++k) t(i, j, k) = stats.p3(t.index(0)[i], t.index(1)[j], t.index(2)[k]);
  return t;
}

Eigen::MatrixXd Rank2Decomp::factor(int mode) const {
  Eigen::MatrixXd m(u[mode].size(), 2);
  m.col(0) = u[mode];
  m.col(1) = v[mode];
  return m;
}

double reconstruction_error(const MomentTensor3& t, const Rank2Decomp& d) {
  double s = 0.0;
  for (int i = 0; i < t.dim(0); ++i)
    for (int j = 0; j < t.dim(1); ++j)
      for (int k = 0; k < t.dim(2); ++k) {
        const double r = t(i, j, k) - d.u[0][i] * d.u[1][j] * d.u[2][k] - d.v[0][i] * d.v[1][j] * d.v[2][k];
        s += r * r;
      }
  return std::sqrt(s);
}

Rank2Decomp decompose_rank2(const MomentTensor3& t, Rng& rng) {
  if (t.dim(0) < 2 || t.dim(1) < 2) throw DomainError("decompose_rank2: first two modes need size >= 2");
  Eigen::VectorXd sa, sb, sc;
  const Eigen::MatrixXd ua = top_left_singular(t.unfold(0), 2, &sa);
  const Eigen::MatrixXd ub = top_left_singular(t.unfold(1), 2, &sb);
  top_left_singular(t.unfold(2), 2, &sc);
  if (rank_below_two(sa) || rank_below_two(sb) || rank_below_two(sc)) return rank1_fallback(t);

  // Simultaneous diagonalization inside the rank-2 subspaces of modes a and b.
  double best_gap = -1.0;
  Eigen::Matrix2d best_x = Eigen::Matrix2d::Zero(), best_y = Eigen::Matrix2d::Zero();
  for (int draw = 0; draw < kContractionDraws; ++draw) {
    const Eigen::VectorXd w1 = random_unit(t.dim(2), rng);
    const Eigen::VectorXd w2 = random_unit(t.dim(2), rng);
    const Eigen::Matrix2d m1 = ua.transpose() * t.contract_c(w1) * ub;
    const Eigen::Matrix2d m2 = ua.transpose() * t.contract_c(w2) * ub;
    Eigen::JacobiSVD<Eigen::Matrix2d> svd2(m2);
    const auto s2 = svd2.singularValues();
    if (s2[0] <= 0.0 || s2[1] < kRankTol * s2[0]) continue;
    const Eigen::Matrix2d inv2 = m2.inverse();
    const Eigen::Matrix2d x = m1 * inv2;
    const Eig2 e = eig2(x);
    if (e.imag > 0.1 * std::abs(e.l1)) continue;
    const double scale = std::max(std::abs(e.l1), std::abs(e.l2));
    const double gap = (e.imag > 0 || scale == 0.0) ? 0.0 : (e.l1 - e.l2) / scale;
    if (gap > best_gap) {
      best_gap = gap;
      best_x = x;
      best_y = (inv2 * m1).transpose();
    }
    if (best_gap >= kGoodGap) break;
  }
  if (best_gap <= 0.0) return rank1_fallback(t);

  const Eig2 ex = eig2(best_x);
  Eigen::Matrix2d at, bt;
  at.col(0) = null_vector(best_x, ex.l1);
  at.col(1) = null_vector(best_x, ex.l2);
  bt.col(0) = null_vector(best_y, ex.l1);
  bt.col(1) = null_vector(best_y, ex.l2);
  const Eigen::MatrixXd a = ua * at;
  const Eigen::MatrixXd b = ub * bt;

  // Mode c by least squares against the mode-c unfolding.
  const int da = t.dim(0), db = t.dim(1);
  Eigen::MatrixXd kr(da * db, 2);
  for (int i = 0; i < da; ++i)
    for (int j = 0; j < db; ++j) kr.row(i * db + j) << a(i, 0) * b(j, 0), a(i, 1) * b(j, 1);
  const Eigen::MatrixXd c = kr.colPivHouseholderQr().solve(t.unfold(2).transpose()).transpose();

  Rank2Decomp d;
  d.eigen_gap = best_gap;
  std::array<std::array<Eigen::VectorXd, 3>, 2> terms;
  for (int r = 0; r < 2; ++r) {
    terms[r] = {a.col(r), b.col(r), c.col(r)};
    normalize_term(terms[r][0], terms[r][1], terms[r][2]);
  }
  if (terms[1][0].norm() > terms[0][0].norm()) std::swap(terms[0], terms[1]);
  d.u = terms[0];
  d.v = terms[1];
  d.residual = reconstruction_error(t, d);
  return d;
}

}  // namespace mallows_mix
