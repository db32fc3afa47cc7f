#include "mallows_mix/moments.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "mallows_mix/numeric.hpp"

namespace mallows_mix {

double c2(double phi, int n) {
  if (n < 2) throw DomainError("c2 needs n >= 2");
  return z_single(n, phi) / z_single(n - 1, phi) * (1.0 + phi) / phi;
}

double c3(double phi, int n) {
  if (n < 3) throw DomainError("c3 needs n >= 3");
  const double zn = z_single(n, phi);
  const double poly = 1.0 + 2.0 * phi + 2.0 * phi * phi + phi * phi * phi;
  return zn * zn / (z_single(n - 1, phi) * z_single(n - 2, phi)) * poly / (phi * phi * phi);
}

MomentStats::MomentStats(int n) : p1(Eigen::VectorXd::Zero(n)), p2(Eigen::MatrixXd::Zero(n, n)), n_(n) {
  if (dense()) dense_.assign(static_cast<std::size_t>(n) * n * n, 0.0);
}

std::uint64_t MomentStats::key(int i, int j, int k) {
  std::array<int, 3> t{i, j, k};
  std::sort(t.begin(), t.end());
  return (static_cast<std::uint64_t>(t[0]) << 32) | (static_cast<std::uint64_t>(t[1]) << 16) |
         static_cast<std::uint64_t>(t[2]);
}

double MomentStats::p3(int i, int j, int k) const {
  if (i == j || j == k || i == k) return 0.0;
  if (dense()) return dense_[(static_cast<std::size_t>(i) * n_ + j) * n_ + k];
  if (analytic_) {
    const auto& a = *analytic_;
    return a.a1 * a.x[i] * a.x[j] * a.x[k] + a.a2 * a.y[i] * a.y[j] * a.y[k];
  }
  const auto it = sparse_.find(key(i, j, k));
  return it == sparse_.end() ? 0.0 : it->second;
}

void MomentStats::set_p3(int i, int j, int k, double v) {
  if (i == j || j == k || i == k) throw DomainError("p3 is defined only on distinct triples");
  if (dense()) {
    const int idx[3] = {i, j, k};
    std::array<int, 3> t{0, 1, 2};
    do {
      dense_[(static_cast<std::size_t>(idx[t[0]]) * n_ + idx[t[1]]) * n_ + idx[t[2]]] = v;
    } while (std::next_permutation(t.begin(), t.end()));
    return;
  }
  sparse_[key(i, j, k)] = v;
}

MomentCounts::MomentCounts(int n) : n_(n), c1_(n, 0), c2_(static_cast<std::size_t>(n) * n, 0) {
  if (n < 3) throw DomainError("moments need n >= 3");
  if (n <= MomentStats::kDenseLimit) c3_dense_.assign(static_cast<std::size_t>(n) * n * n, 0);
}

void MomentCounts::add(const std::uint8_t* r) {
  int a = r[0], b = r[1], c = r[2];
  ++c1_[a];
  if (a > b) std::swap(a, b);
  ++c2_[static_cast<std::size_t>(a) * n_ + b];
  // sort (a, b, c)
  if (c < a) std::swap(a, c), std::swap(b, c);
  else if (c < b) std::swap(b, c);
  if (!c3_dense_.empty())
    ++c3_dense_[(static_cast<std::size_t>(a) * n_ + b) * n_ + c];
  else
    ++c3_sparse_[(static_cast<std::uint64_t>(a) << 32) | (static_cast<std::uint64_t>(b) << 16) | c];
  ++total_;
}

void MomentCounts::add(const RankingSet& set, std::size_t begin, std::size_t end) {
  for (std::size_t s = begin; s < end; ++s) add(set.row(s));
}

void MomentCounts::merge(const MomentCounts& o) {
  if (o.n_ != n_) throw DomainError("MomentCounts::merge: size mismatch");
  total_ += o.total_;
  for (std::size_t i = 0; i < c1_.size(); ++i) c1_[i] += o.c1_[i];
  for (std::size_t i = 0; i < c2_.size(); ++i) c2_[i] += o.c2_[i];
  for (std::size_t i = 0; i < c3_dense_.size(); ++i) c3_dense_[i] += o.c3_dense_[i];
  for (const auto& [k, v] : o.c3_sparse_) c3_sparse_[k] += v;
}

MomentStats MomentCounts::finish() const {
  if (total_ == 0) throw EstimationError("no samples tallied");
  MomentStats st(n_);
  const double N = static_cast<double>(total_);
  for (int i = 0; i < n_; ++i) st.p1[i] = static_cast<double>(c1_[i]) / N;
  for (int i = 0; i < n_; ++i)
    for (int j = i + 1; j < n_; ++j) st.p2(i, j) = st.p2(j, i) = static_cast<double>(c2_[i * n_ + j]) / N;
  if (!c3_dense_.empty()) {
    for (int i = 0; i < n_; ++i)
      for (int j = i + 1; j < n_; ++j)
        for (int k = j + 1; k < n_; ++k) {
          const std::uint64_t c = c3_dense_[(static_cast<std::size_t>(i) * n_ + j) * n_ + k];
          if (c) st.set_p3(i, j, k, static_cast<double>(c) / N);
        }
  } else {
    for (const auto& [key, c] : c3_sparse_)
      st.set_p3(static_cast<int>(key >> 32), static_cast<int>((key >> 16) & 0xffff), static_cast<int>(key & 0xffff),
                static_cast<double>(c) / N);
  }
  st.sample_count = total_;
  return st;
}

namespace {

MomentStats estimate_weighted(const RankingSet& set) {
  const int n = set.n();
  std::vector<CompensatedSum> a1(n), a2(static_cast<std::size_t>(n) * n);
  std::unordered_map<std::uint64_t, CompensatedSum> a3;
  for (std::size_t s = 0; s < set.size(); ++s) {
    const std::uint8_t* r = set.row(s);
    const double w = set.weight(s);
    std::array<int, 3> t{r[0], r[1], r[2]};
    a1[t[0]].add(w);
    a2[static_cast<std::size_t>(std::min(t[0], t[1])) * n + std::max(t[0], t[1])].add(w);
    std::sort(t.begin(), t.end());
    a3[(static_cast<std::uint64_t>(t[0]) << 32) | (static_cast<std::uint64_t>(t[1]) << 16) | t[2]].add(w);
  }
  const double total = set.total_weight();
  MomentStats st(n);
  for (int i = 0; i < n; ++i) st.p1[i] = a1[i].value() / total;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) st.p2(i, j) = st.p2(j, i) = a2[i * n + j].value() / total;
  for (const auto& [key, acc] : a3)
    st.set_p3(static_cast<int>(key >> 32), static_cast<int>((key >> 16) & 0xffff), static_cast<int>(key & 0xffff),
              acc.value() / total);
  st.sample_count.reset();
  return st;
}

}  // namespace

MomentStats estimate_from_samples(const RankingSet& samples) {
  if (samples.n() < 3) throw DomainError("moments need n >= 3");
  if (samples.empty()) throw DomainError("estimate_from_samples: no samples");
  if (samples.weighted()) return estimate_weighted(samples);
  MomentCounts counts(samples.n());
  counts.add(samples, 0, samples.size());
  return counts.finish();
}

MomentStats estimate_from_samples(const std::vector<Permutation>& samples) {
  if (samples.empty()) throw DomainError("estimate_from_samples: no samples");
  RankingSet set(samples.front().size());
  for (const auto& p : samples) set.push_back(p);
  return estimate_from_samples(set);
}

MomentStats closed_form(const MallowsMixture& mix) {
  const int n = mix.n();
  if (n < 3) throw DomainError("moments need n >= 3");
  const Eigen::VectorXd x = representative_vector(mix.m1());
  const Eigen::VectorXd y = representative_vector(mix.m2());
  const double w1 = mix.w1(), w2 = mix.w2();
  const double b1 = w1 * c2(mix.m1().phi(), n), b2 = w2 * c2(mix.m2().phi(), n);
  const double a1 = w1 * c3(mix.m1().phi(), n), a2 = w2 * c3(mix.m2().phi(), n);
  MomentStats st(n);
  st.p1 = w1 * x + w2 * y;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) st.p2(i, j) = st.p2(j, i) = b1 * x[i] * x[j] + b2 * y[i] * y[j];
  if (st.dense()) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (int k = j + 1; k < n; ++k) st.set_p3(i, j, k, a1 * x[i] * x[j] * x[k] + a2 * y[i] * y[j] * y[k]);
  } else {
    st.analytic_ = MomentStats::Analytic{a1, a2, x, y};
  }
  st.sample_count.reset();
  return st;
}

namespace {

constexpr char kMagic[8] = {'M', 'M', 'I', 'X', 'M', 'O', 'M', 'S'};
constexpr std::uint32_t kCacheVersion = 1;

template <typename T>
void put_le(std::ostream& os, T v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
bool get_le(std::istream& is, T& v) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) return false;
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  std::memcpy(&v, bytes, sizeof(T));
  return true;
}

}  // namespace

void save_moment_cache(const std::string& path, const MomentStats& st, std::uint64_t digest) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DomainError("cannot write moment cache " + path);
  os.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(os, kCacheVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(st.n()));
  put_le<std::uint8_t>(os, st.exact() ? 1 : 0);
  put_le<std::uint64_t>(os, st.sample_count.value_or(0));
  put_le<std::uint64_t>(os, digest);
  for (int i = 0; i < st.n(); ++i) put_le<double>(os, st.p1[i]);
  for (int i = 0; i < st.n(); ++i)
    for (int j = 0; j < st.n(); ++j) put_le<double>(os, st.p2(i, j));
  std::vector<std::pair<std::array<std::uint16_t, 3>, double>> triples;
  st.for_each_p3([&](int i, int j, int k, double v) {
    if (v != 0.0)
      triples.push_back({{static_cast<std::uint16_t>(i), static_cast<std::uint16_t>(j), static_cast<std::uint16_t>(k)}, v});
  });
  std::sort(triples.begin(), triples.end());
  put_le<std::uint64_t>(os, triples.size());
  for (const auto& [t, v] : triples) {
    for (auto idx : t) put_le<std::uint16_t>(os, idx);
    put_le<double>(os, v);
  }
}

std::optional<MomentStats> load_moment_cache(const std::string& path, std::uint64_t digest, bool exact) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return std::nullopt;
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) return std::nullopt;
  std::uint32_t version = 0, n = 0;
  std::uint8_t mode = 0;
  std::uint64_t count = 0, stored_digest = 0, ntriples = 0;
  if (!get_le(is, version) || version != kCacheVersion) return std::nullopt;
  if (!get_le(is, n) || !get_le(is, mode) || !get_le(is, count) || !get_le(is, stored_digest)) return std::nullopt;
  if (stored_digest != digest || (mode == 1) != exact || n < 3 || n > 65535) return std::nullopt;
  MomentStats st(static_cast<int>(n));
  for (std::uint32_t i = 0; i < n; ++i)
    if (!get_le(is, st.p1[i])) return std::nullopt;
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < n; ++j)
      if (!get_le(is, st.p2(i, j))) return std::nullopt;
  if (!get_le(is, ntriples)) return std::nullopt;
  for (std::uint64_t t = 0; t < ntriples; ++t) {
    std::uint16_t i, j, k;
    double v;
    if (!get_le(is, i) || !get_le(is, j) || !get_le(is, k) || !get_le(is, v)) return std::nullopt;
    if (i >= n || j >= n || k >= n) return std::nullopt;
    st.set_p3(i, j, k, v);
  }
  if (exact)
    st.sample_count.reset();
  else
    st.sample_count = count;
  return st;
}

}  // namespace mallows_mix
