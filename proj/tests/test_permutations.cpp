#include <map>
#include <set>

#include "doctest.h"
#include "mallows_mix/permutations.hpp"
#include "oracles.hpp"

using namespace mallows_mix;

namespace {
Permutation p1(std::vector<int> one_based) {
  for (int& v : one_based) --v;
  return Permutation(one_based);
}
}  // namespace

TEST_CASE("permutation rejects non-bijections") {
  CHECK_THROWS_AS(Permutation({0, 0, 1}), DomainError);
  CHECK_THROWS_AS(Permutation({0, 3, 1}), DomainError);
  const Permutation p({2, 0, 1});
  for (int e = 0; e < 3; ++e) CHECK(p[p.pos(e)] == e);
}

TEST_CASE("kendall_tau examples") {
  CHECK(kendall_tau(p1({1, 2, 3}), p1({1, 2, 3})) == 0);
  CHECK(kendall_tau(p1({1, 2, 3}), p1({3, 2, 1})) == 3);
  CHECK(kendall_tau(p1({1, 2, 3}), p1({2, 3, 1})) == 2);
  CHECK_THROWS_AS(kendall_tau(Permutation::identity(3), Permutation::identity(4)), DomainError);
}

TEST_CASE("kendall_tau is a metric on S_4 and matches the pair-count oracle") {
  std::vector<Permutation> all;
  for_each_permutation(4, [&](const Permutation& p) { all.push_back(p); });
  for (const auto& a : all)
    for (const auto& b : all) {
      const auto dab = kendall_tau(a, b);
      CHECK(dab == oracle::inversions(a.order(), b.order()));
      CHECK(dab == kendall_tau(b, a));
      CHECK((dab == 0) == (a == b));
      for (const auto& c : all) CHECK(kendall_tau(a, c) <= dab + kendall_tau(b, c));
    }
}

TEST_CASE("inversion table decode examples") {
  CHECK(decode_inversion_table({{0, 0, 0}}) == Permutation::identity(3));
  const Permutation p = decode_inversion_table({{2, 0, 0}});
  CHECK(kendall_tau(p, Permutation::identity(3)) == 2);
  CHECK_THROWS_AS(decode_inversion_table({{3, 0, 0}}), DomainError);
  CHECK_THROWS_AS(decode_inversion_table({{0, 0, 1}}), DomainError);
}

TEST_CASE("inversion table round trip is a bijection for n <= 5") {
  for (int n = 1; n <= 5; ++n) {
    std::set<std::vector<int>> seen;
    std::vector<int> code(n, 0);
    // Enumerate all valid codes as a mixed-radix counter.
    while (true) {
      const Permutation p = decode_inversion_table({code});
      CHECK(encode_inversion_table(p).code == code);
      int sum = 0;
      for (int c : code) sum += c;
      CHECK(kendall_tau(p, Permutation::identity(n)) == sum);
      seen.insert(p.order());
      int i = 0;
      while (i < n && code[i] == n - 1 - i) code[i++] = 0;
      if (i >= n) break;
      ++code[i];
    }
    std::size_t fact = 1;
    for (int k = 2; k <= n; ++k) fact *= k;
    CHECK(seen.size() == fact);
  }
}

TEST_CASE("random_permutation_at_distance extremes and range") {
  Rng rng(7);
  CHECK(random_permutation_at_distance(10, 0, rng) == Permutation::identity(10));
  CHECK(random_permutation_at_distance(10, 45, rng) == Permutation::reversed(10));
  CHECK_THROWS_AS(random_permutation_at_distance(10, 46, rng), DomainError);
  CHECK_THROWS_AS(random_permutation_at_distance(10, -1, rng), DomainError);
  for (int d = 0; d <= 45; ++d) CHECK(kendall_tau(random_permutation_at_distance(10, d, rng), Permutation::identity(10)) == d);
}

TEST_CASE("random_permutation_at_distance is uniform over tables (n=5, d=3)") {
  // Tables with sum 3 and code[i] <= 4-i, enumerated directly.
  std::map<std::vector<int>, int> index;
  for (int a = 0; a <= 4; ++a)
    for (int b = 0; b <= 3; ++b)
      for (int c = 0; c <= 2; ++c)
        for (int d = 0; d <= 1; ++d)
          if (a + b + c + d == 3) index[{a, b, c, d, 0}] = static_cast<int>(index.size());
  Rng rng(12345);
  const int draws = 10000;
  std::vector<double> counts(index.size(), 0.0);
  for (int s = 0; s < draws; ++s) {
    const Permutation p = random_permutation_at_distance(5, 3, rng);
    REQUIRE(kendall_tau(p, Permutation::identity(5)) == 3);
    counts[index.at(encode_inversion_table(p).code)] += 1;
  }
  std::vector<double> probs(index.size(), 1.0 / index.size());
  const double stat = oracle::chi_square_stat(counts, probs, draws);
  CHECK(oracle::chi_square_pvalue(stat, static_cast<int>(index.size()) - 1) > 0.001);
}
