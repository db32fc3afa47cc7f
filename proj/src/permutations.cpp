#include "mallows_mix/permutations.hpp"

#include <numeric>
#include <sstream>

#include "mallows_mix/errors.hpp"

namespace mallows_mix {

Permutation::Permutation(std::vector<int> order) : order_(std::move(order)), pos_(order_.size(), -1) {
  const int n = size();
  for (int p = 0; p < n; ++p) {
    const int e = order_[p];
    if (e < 0 || e >= n || pos_[e] != -1) throw DomainError("not a permutation of 0..n-1");
    pos_[e] = p;
  }
}

Permutation Permutation::identity(int n) {
  std::vector<int> o(n);
  std::iota(o.begin(), o.end(), 0);
  return Permutation(std::move(o));
}

Permutation Permutation::reversed(int n) {
  std::vector<int> o(n);
  for (int i = 0; i < n; ++i) o[i] = n - 1 - i;
  return Permutation(std::move(o));
}

std::vector<int> Permutation::without(const std::vector<int>& removed) const {
  std::vector<char> drop(order_.size(), 0);
  for (int e : removed) drop.at(e) = 1;
  std::vector<int> out;
  out.reserve(order_.size());
  for (int e : order_)
    if (!drop[e]) out.push_back(e);
  return out;
}

std::string Permutation::to_string() const {
  std::ostringstream os;
  for (int p = 0; p < size(); ++p) os << (p ? " " : "") << order_[p] + 1;
  return os.str();
}

std::int64_t kendall_tau(const Permutation& a, const Permutation& b) {
  if (a.size() != b.size()) throw DomainError("kendall_tau: permutations over different element sets");
  const int n = a.size();
  // Position in b of the element a places at p; count inversions of that sequence.
  std::vector<int> seq(n);
  for (int p = 0; p < n; ++p) seq[p] = b.pos(a[p]);
  std::int64_t d = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) d += seq[i] > seq[j];
  return d;
}

InversionTable encode_inversion_table(const Permutation& p) {
  const int n = p.size();
  InversionTable t{std::vector<int>(n, 0)};
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) t.code[i] += p.pos(j) < p.pos(i);
  return t;
}

Permutation decode_inversion_table(const InversionTable& t) {
  const int n = static_cast<int>(t.code.size());
  std::vector<int> order;
  order.reserve(n);
  // Insert elements from largest to smallest; code[i] larger elements end up before i.
  for (int i = n - 1; i >= 0; --i) {
    const int c = t.code[i];
    if (c < 0 || c > n - 1 - i) throw DomainError("inversion table entry out of range");
    order.insert(order.begin() + c, i);
  }
  return Permutation(std::move(order));
}

Permutation random_permutation_at_distance(int n, std::int64_t d, Rng& rng) {
  const std::int64_t max_d = static_cast<std::int64_t>(n) * (n - 1) / 2;
  if (n < 1 || d < 0 || d > max_d) throw DomainError("random_permutation_at_distance: distance out of range");
  // ways[i][s]: number of tables for code[i..n-1] summing to s.
  std::vector<std::vector<long double>> ways(n + 1, std::vector<long double>(d + 1, 0.0L));
  ways[n][0] = 1.0L;
  for (int i = n - 1; i >= 0; --i) {
    const int cap = n - 1 - i;
    long double window = 0.0L;  // sum of ways[i+1][s-cap .. s]
    for (std::int64_t s = 0; s <= d; ++s) {
      window += ways[i + 1][s];
      if (s - cap - 1 >= 0) window -= ways[i + 1][s - cap - 1];
      ways[i][s] = window;
    }
  }
  std::uniform_real_distribution<long double> unif(0.0L, 1.0L);
  InversionTable t{std::vector<int>(n, 0)};
  std::int64_t left = d;
  for (int i = 0; i < n; ++i) {
    const int cap = static_cast<int>(std::min<std::int64_t>(n - 1 - i, left));
    const long double total = ways[i][left];
    long double u = unif(rng) * total;
    int c = 0;
    for (; c < cap; ++c) {
      const long double w = ways[i + 1][left - c];
      if (u < w) break;
      u -= w;
    }
    while (ways[i + 1][left - c] == 0.0L) --c;  // rounding guard
    t.code[i] = c;
    left -= c;
  }
  return decode_inversion_table(t);
}

Permutation random_permutation(int n, Rng& rng) {
  std::vector<int> o(n);
  std::iota(o.begin(), o.end(), 0);
  std::shuffle(o.begin(), o.end(), rng);
  return Permutation(std::move(o));
}

}  // namespace mallows_mix
