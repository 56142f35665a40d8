#include <algorithm>
#include <cmath>
#include <vector>

#include "lightleak/error.hpp"
#include "lightleak/inference.hpp"

namespace lightleak::inference {
namespace {

// Below this many draws per bin the alternating inclusion-exclusion series
// cancels catastrophically, so the occupancy chain is stepped instead.
constexpr std::uint64_t kChainDrawsPerBin = 20;

// Distribution over the number of distinct bins seen, advanced one draw at a time.
class OccupancyChain {
 public:
  explicit OccupancyChain(int n) : n_(n), p_(static_cast<std::size_t>(n) + 1, 0.0) { p_[0] = 1.0; }

  void step() {
    for (int j = n_; j >= 1; --j) {
      p_[j] = p_[j] * (static_cast<double>(j) / n_) + p_[j - 1] * (static_cast<double>(n_ - j + 1) / n_);
    }
    p_[0] = 0.0;
  }

  double all() const { return p_[n_]; }

 private:
  int n_;
  std::vector<double> p_;
};

double p_all_series(std::uint64_t k, int n) {
  // 1 - sum_{i>=1} (-1)^{i+1} C(n,i) (1 - i/n)^k, terms in log space.
  double miss = 0.0;
  double log_binom = 0.0;
  for (int i = 1; i < n; ++i) {
    log_binom += std::log(static_cast<double>(n - i + 1)) - std::log(static_cast<double>(i));
    const double term = std::exp(log_binom + static_cast<double>(k) * std::log1p(-static_cast<double>(i) / n));
    miss += (i % 2 == 1) ? term : -term;
    if (term < 1e-300) break;
  }
  return std::clamp(1.0 - miss, 0.0, 1.0);
}

double p_all_chain(std::uint64_t k, int n) {
  OccupancyChain chain(n);
  for (std::uint64_t i = 0; i < k; ++i) chain.step();
  return chain.all();
}

}  // namespace

Coverage hue_coverage(std::uint64_t k, int n) {
  if (n < 1) throw Error(Errc::invalid_argument, "need at least one hue bin");
  Coverage c;
  if (k == 0) return c;
  c.p_single = n == 1 ? 1.0 : -std::expm1(static_cast<double>(k) * std::log1p(-1.0 / n));
  if (k < static_cast<std::uint64_t>(n)) {
    c.p_all = 0.0;
  } else if (n == 1) {
    c.p_all = 1.0;
  } else if (k < kChainDrawsPerBin * static_cast<std::uint64_t>(n)) {
    c.p_all = p_all_chain(k, n);
  } else {
    c.p_all = p_all_series(k, n);
  }
  return c;
}

CoverageEstimate coverage_time_estimate(double peaks_per_minute, double target_p_all, int n) {
  if (!(peaks_per_minute > 0)) throw Error(Errc::invalid_argument, "peak rate must be positive");
  if (!(target_p_all > 0 && target_p_all < 1)) {
    throw Error(Errc::invalid_argument, "target probability must lie in (0, 1)");
  }
  if (n < 1) throw Error(Errc::invalid_argument, "need at least one hue bin");

  std::uint64_t k = 0;
  OccupancyChain chain(n);
  const std::uint64_t chain_limit = kChainDrawsPerBin * static_cast<std::uint64_t>(n);
  while (k < chain_limit) {
    chain.step();
    ++k;
    if (chain.all() >= target_p_all) return {k, static_cast<double>(k) / peaks_per_minute};
  }
  // Past the chain range p_all is monotone and smooth: bracket, then bisect.
  std::uint64_t lo = k, hi = 2 * k;
  while (p_all_series(hi, n) < target_p_all) {
    lo = hi;
    hi *= 2;
    if (hi > (1ULL << 50)) throw Error(Errc::invalid_argument, "target probability unreachable");
  }
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    (p_all_series(mid, n) >= target_p_all ? hi : lo) = mid;
  }
  return {hi, static_cast<double>(hi) / peaks_per_minute};
}

}  // namespace lightleak::inference
