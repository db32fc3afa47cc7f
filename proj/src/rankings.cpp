#include "mallows_mix/rankings.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "mallows_mix/numeric.hpp"

namespace mallows_mix {

RankingSet::RankingSet(int n) : n_(n) {
  if (n < 0 || n > kMaxN) throw CapacityError("RankingSet supports at most 255 elements");
}

void RankingSet::make_weighted() {
  if (!weighted_) weights_.assign(size(), 1.0);
  weighted_ = true;
}

void RankingSet::push_back(const Permutation& p) {
  if (p.size() != n_) throw DomainError("RankingSet: ranking has the wrong size");
  for (int e : p.order()) data_.push_back(static_cast<std::uint8_t>(e));
  if (weighted()) weights_.push_back(1.0);
}

void RankingSet::push_back(const Permutation& p, double weight) {
  make_weighted();
  push_back(p);
  weights_.back() = weight;
}

void RankingSet::push_row(const std::uint8_t* row) {
  data_.insert(data_.end(), row, row + n_);
  if (weighted()) weights_.push_back(1.0);
}

void RankingSet::push_row(const std::uint8_t* row, double weight) {
  make_weighted();
  push_row(row);
  weights_.back() = weight;
}

std::uint8_t* RankingSet::append_rows(std::size_t count) {
  const std::size_t old = data_.size();
  data_.resize(old + count * n_);
  if (weighted()) weights_.resize(size(), 1.0);
  return data_.data() + old;
}

double RankingSet::total_weight() const {
  if (!weighted()) return static_cast<double>(size());
  CompensatedSum s;
  for (double w : weights_) s.add(w);
  return s.value();
}

Permutation RankingSet::at(std::size_t s) const {
  const std::uint8_t* r = row(s);
  return Permutation(std::vector<int>(r, r + n_));
}

RankingSet RankingSet::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw DomainError("RankingSet::slice out of range");
  RankingSet out(n_);
  out.data_.assign(data_.begin() + begin * n_, data_.begin() + end * n_);
  if (weighted()) out.weights_.assign(weights_.begin() + begin, weights_.begin() + end);
  out.weighted_ = weighted_;
  return out;
}

RankingSet sample_rankings(const MallowsMixture& mix, std::size_t count, Rng& rng) {
  RankingSet out(mix.n());
  MixtureSampler sampler(mix);
  std::uint8_t* p = out.append_rows(count);
  for (std::size_t s = 0; s < count; ++s, p += mix.n()) sampler.draw(rng, p);
  return out;
}

RankingSet sample_rankings(const MallowsModel& model, std::size_t count, Rng& rng) {
  RankingSet out(model.n());
  MallowsSampler sampler(model);
  std::uint8_t* p = out.append_rows(count);
  for (std::size_t s = 0; s < count; ++s, p += model.n()) sampler.draw(rng, p);
  return out;
}

RankingSet from_distribution(const Distribution& dist) {
  if (dist.empty()) throw DomainError("from_distribution: empty distribution");
  RankingSet out(dist.front().first.size());
  out.reserve(dist.size());
  for (const auto& [p, pr] : dist) out.push_back(p, pr);
  return out;
}

Eigen::MatrixXd position_frequencies(const RankingSet& set) {
  const int n = set.n();
  const std::size_t N = set.size();
  if (N == 0) throw EstimationError("position_frequencies: empty ranking set");
  Eigen::MatrixXd f(n, n);
  if (!set.weighted()) {
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(n) * n, 0);
    for (std::size_t s = 0; s < N; ++s) {
      const std::uint8_t* r = set.row(s);
      for (int p = 0; p < n; ++p) ++counts[static_cast<std::size_t>(r[p]) * n + p];
    }
    for (int e = 0; e < n; ++e)
      for (int p = 0; p < n; ++p) f(e, p) = static_cast<double>(counts[e * n + p]) / static_cast<double>(N);
    return f;
  }
  std::vector<CompensatedSum> acc(static_cast<std::size_t>(n) * n);
  for (std::size_t s = 0; s < N; ++s) {
    const std::uint8_t* r = set.row(s);
    const double w = set.weight(s);
    for (int p = 0; p < n; ++p) acc[static_cast<std::size_t>(r[p]) * n + p].add(w);
  }
  const double total = set.total_weight();
  for (int e = 0; e < n; ++e)
    for (int p = 0; p < n; ++p) f(e, p) = acc[e * n + p].value() / total;
  return f;
}

Eigen::VectorXd first_place_frequencies(const RankingSet& set) {
  const int n = set.n();
  const std::size_t N = set.size();
  if (N == 0) throw EstimationError("first_place_frequencies: empty ranking set");
  Eigen::VectorXd p1(n);
  if (!set.weighted()) {
    std::vector<std::uint64_t> counts(n, 0);
    for (std::size_t s = 0; s < N; ++s) ++counts[set.row(s)[0]];
    for (int e = 0; e < n; ++e) p1[e] = static_cast<double>(counts[e]) / static_cast<double>(N);
    return p1;
  }
  std::vector<CompensatedSum> acc(n);
  for (std::size_t s = 0; s < N; ++s) acc[set.row(s)[0]].add(set.weight(s));
  const double total = set.total_weight();
  for (int e = 0; e < n; ++e) p1[e] = acc[e].value() / total;
  return p1;
}

RankingSet filter_first(const RankingSet& set, int e) {
  RankingSet out(set.n());
  for (std::size_t s = 0; s < set.size(); ++s) {
    if (set.row(s)[0] != e) continue;
    if (set.weighted())
      out.push_row(set.row(s), set.weight(s));
    else
      out.push_row(set.row(s));
  }
  return out;
}

RankingSet project(const RankingSet& set, const std::vector<int>& keep) {
  const int n = set.n();
  std::vector<int> relabel(n, -1);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    if (keep[k] < 0 || keep[k] >= n || relabel[keep[k]] != -1) throw DomainError("project: bad keep list");
    relabel[keep[k]] = static_cast<int>(k);
  }
  const int m = static_cast<int>(keep.size());
  RankingSet out(m);
  const std::size_t N = set.size();
  std::uint8_t* dst = out.append_rows(N);
  for (std::size_t s = 0; s < N; ++s) {
    const std::uint8_t* r = set.row(s);
    for (int p = 0; p < n; ++p)
      if (relabel[r[p]] >= 0) *dst++ = static_cast<std::uint8_t>(relabel[r[p]]);
  }
  if (set.weighted()) {
    RankingSet weighted(m);
    for (std::size_t s = 0; s < N; ++s) weighted.push_row(out.row(s), set.weight(s));
    return weighted;
  }
  return out;
}

RankingSet prepend_artificial(const RankingSet& set, int k, double phi, Rng& rng) {
  if (set.weighted()) throw DomainError("prepend_artificial: weighted sets are not supported");
  const int n = set.n();
  RankingSet out(n + k);
  const std::size_t N = set.size();
  std::uint8_t* dst = out.append_rows(N);
  std::vector<double> z(n + k + 1);
  for (int m = 0; m <= n + k; ++m) z[m] = z_single(m, phi);
  std::vector<std::uint8_t> buf;
  for (std::size_t s = 0; s < N; ++s) {
    buf.assign(set.row(s), set.row(s) + n);
    for (int t = 0; t < k; ++t) {
      const int slots = n + t + 1;
      const double u = uniform01(rng) * z[slots];
      double acc = 0.0, w = 1.0;
      int j = 0;
      for (; j < slots - 1; ++j) {
        acc += w;
        if (u < acc) break;
        w *= phi;
      }
      buf.insert(buf.begin() + j, static_cast<std::uint8_t>(n + t));
    }
    std::memcpy(dst, buf.data(), n + k);
    dst += n + k;
  }
  return out;
}

std::uint64_t digest(const RankingSet& set) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint8_t b) {
    h ^= b;
    h *= 1099511628211ull;
  };
  mix(static_cast<std::uint8_t>(set.n()));
  for (std::size_t s = 0; s < set.size(); ++s) {
    const std::uint8_t* r = set.row(s);
    for (int p = 0; p < set.n(); ++p) mix(r[p]);
    if (set.weighted()) {
      const double w = set.weight(s);
      std::uint8_t bytes[sizeof w];
      std::memcpy(bytes, &w, sizeof w);
      for (std::uint8_t b : bytes) mix(b);
    }
  }
  return h;
}

RankingSet read_rankings(std::istream& is) {
  std::string line;
  std::vector<int> ids;
  RankingSet out;
  bool have_n = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    ids.clear();
    int v;
    while (ls >> v) ids.push_back(v - 1);
    if (!ls.eof()) throw DomainError("rankings line " + std::to_string(lineno) + ": not an integer list");
    if (ids.empty()) continue;
    if (!have_n) {
      out = RankingSet(static_cast<int>(ids.size()));
      have_n = true;
    } else if (static_cast<int>(ids.size()) != out.n()) {
      throw DomainError("rankings line " + std::to_string(lineno) + ": inconsistent length");
    }
    out.push_back(Permutation(ids));
  }
  if (!have_n) throw DomainError("rankings file is empty");
  return out;
}

RankingSet read_rankings_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DomainError("cannot open rankings file " + path);
  return read_rankings(is);
}

void write_rankings(std::ostream& os, const RankingSet& set) {
  std::string line;
  for (std::size_t s = 0; s < set.size(); ++s) {
    line.clear();
    const std::uint8_t* r = set.row(s);
    for (int p = 0; p < set.n(); ++p) {
      if (p) line.push_back(' ');
      line += std::to_string(r[p] + 1);
    }
    line.push_back('\n');
    os << line;
  }
}

void write_rankings_file(const std::string& path, const RankingSet& set) {
  std::ofstream os(path);
  if (!os) throw DomainError("cannot write rankings file " + path);
  write_rankings(os, set);
}

}  // namespace mallows_mix
