#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace mallows_mix {

using Rng = std::mt19937_64;

/// Ordering of the elements {0, ..., n-1}; order()[p] is the element at position p.
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<int> order);

  static Permutation identity(int n);
  static Permutation reversed(int n);

  int size() const { return static_cast<int>(order_.size()); }
  int operator[](int p) const { return order_[p]; }
  int pos(int e) const { return pos_[e]; }
  const std::vector<int>& order() const { return order_; }
  const std::vector<int>& positions() const { return pos_; }

  /// Order with the `removed` elements dropped; ids are not relabelled.
  std::vector<int> without(const std::vector<int>& removed) const;

  std::string to_string() const;  // 1-based, space separated

  friend bool operator==(const Permutation& a, const Permutation& b) { return a.order_ == b.order_; }
  friend bool operator<(const Permutation& a, const Permutation& b) { return a.order_ < b.order_; }

 private:
  std::vector<int> order_;
  std::vector<int> pos_;
};

/// Lehmer-style code indexed by element: code[i] counts elements j > i placed before i.
struct InversionTable {
  std::vector<int> code;
};

std::int64_t kendall_tau(const Permutation& a, const Permutation& b);

InversionTable encode_inversion_table(const Permutation& p);
Permutation decode_inversion_table(const InversionTable& t);

/// Uniform over inversion tables whose entries sum to d.
Permutation random_permutation_at_distance(int n, std::int64_t d, Rng& rng);

Permutation random_permutation(int n, Rng& rng);

/// Calls f(perm) for every permutation of n elements in lexicographic order.
template <typename F>
void for_each_permutation(int n, F&& f) {
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  do {
    f(Permutation(order));
  } while (std::next_permutation(order.begin(), order.end()));
}

}  // namespace mallows_mix
