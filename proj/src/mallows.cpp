#include "mallows_mix/mallows.hpp"

#include <iomanip>
#include <ostream>

#include "mallows_mix/numeric.hpp"

namespace mallows_mix {

void validate_phi(double phi) {
  if (!(phi >= kPhiMin && phi <= kPhiMax)) throw DomainError("phi outside [1e-6, 1-1e-6]");
}

PositionProbTable position_prob_table(int n, double phi) {
  validate_phi(phi);
  return {n, phi, position_prob_matrix<double>(n, phi)};
}

MallowsModel::MallowsModel(double phi, Permutation central) : phi_(phi), central_(std::move(central)) {
  validate_phi(phi_);
  if (central_.size() < 1) throw DomainError("MallowsModel: empty central ranking");
}

MallowsSampler::MallowsSampler(const MallowsModel& model)
    : n_(model.n()), central_(model.central().order()), cdf_(n_ + 1) {
  const double phi = model.phi();
  for (int m = 1; m <= n_; ++m) {
    const double z = z_single(m, phi);
    auto& c = cdf_[m];
    c.resize(m);
    double acc = 0.0, w = 1.0;
    for (int j = 0; j < m; ++j) {
      acc += w;
      w *= phi;
      c[j] = acc / z;
    }
    c[m - 1] = 1.0;
  }
}

int MallowsSampler::pick(Rng& rng, int m) const {
  const double u = uniform01(rng);
  const auto& c = cdf_[m];
  int j = 0;
  while (u >= c[j]) ++j;
  return j;
}

template <typename T>
void MallowsSampler::draw(Rng& rng, T* out) const {
  // Remaining central elements kept in central order; remove the picked one each step.
  thread_local std::vector<int> rest;
  rest.assign(central_.begin(), central_.end());
  for (int p = 0; p < n_; ++p) {
    const int m = n_ - p;
    const int j = pick(rng, m);
    out[p] = static_cast<T>(rest[j]);
    rest.erase(rest.begin() + j);
  }
}

template void MallowsSampler::draw<int>(Rng&, int*) const;
template void MallowsSampler::draw<std::uint8_t>(Rng&, std::uint8_t*) const;

Permutation MallowsSampler::operator()(Rng& rng) const {
  std::vector<int> out(n_);
  draw(rng, out.data());
  return Permutation(std::move(out));
}

Permutation sample(const MallowsModel& model, Rng& rng) { return MallowsSampler(model)(rng); }

Distribution exact_distribution(const MallowsModel& model) {
  const int n = model.n();
  if (n > kMaxEnumerationN) throw CapacityError("exact_distribution: n > 8");
  const double phi = model.phi();
  std::vector<double> powers(n * (n - 1) / 2 + 1);
  powers[0] = 1.0;
  for (std::size_t d = 1; d < powers.size(); ++d) powers[d] = powers[d - 1] * phi;
  const double z = z_partition(n, phi);
  Distribution dist;
  for_each_permutation(n, [&](const Permutation& p) {
    dist.emplace_back(p, powers[kendall_tau(p, model.central())] / z);
  });
  return dist;
}

void write_distribution_csv(std::ostream& os, const Distribution& dist) {
  os << "permutation,probability\n" << std::setprecision(17);
  for (const auto& [p, pr] : dist) os << p.to_string() << ',' << pr << '\n';
}

Eigen::VectorXd representative_vector(const MallowsModel& model) {
  const int n = model.n();
  const double z = z_single(n, model.phi());
  Eigen::VectorXd x(n);
  double w = 1.0;
  for (int p = 0; p < n; ++p) {
    x[model.central()[p]] = w / z;
    w *= model.phi();
  }
  return x;
}

MallowsModel condition_on_first(const MallowsModel& model, int e) {
  if (e < 0 || e >= model.n()) throw DomainError("condition_on_first: unknown element");
  if (model.n() < 2) throw DomainError("condition_on_first: need at least two elements");
  std::vector<int> rest;
  for (int x : model.central().order())
    if (x != e) rest.push_back(x > e ? x - 1 : x);
  return MallowsModel(model.phi(), Permutation(std::move(rest)));
}

Permutation prepend_elements(const Permutation& sample, int k, double phi, Rng& rng) {
  validate_phi(phi);
  if (k < 1) throw DomainError("prepend_elements: k must be positive");
  std::vector<int> order = sample.order();
  const int n = sample.size();
  for (int t = 0; t < k; ++t) {
    const int slots = static_cast<int>(order.size()) + 1;
    const double u = uniform01(rng) * z_single(slots, phi);
    double acc = 0.0, w = 1.0;
    int j = 0;
    for (; j < slots - 1; ++j) {
      acc += w;
      if (u < acc) break;
      w *= phi;
    }
    order.insert(order.begin() + j, n + t);
  }
  return Permutation(std::move(order));
}

double tv_distance_param_sensitivity(int n, double phi, double phi_hat, double phi_min) {
  validate_phi(phi);
  validate_phi(phi_hat);
  if (!(phi_min > 0.0)) throw DomainError("tv bound: phi_min must be positive");
  return static_cast<double>(n) * n / phi_min * std::abs(phi - phi_hat);
}

double tv_distance_param_sensitivity(int n, double phi, double phi_hat) {
  return tv_distance_param_sensitivity(n, phi, phi_hat, std::min(phi, phi_hat));
}

}  // namespace mallows_mix
