#pragma once

// Reference computations used by the tests. They deliberately take the
// slow, obvious route so they stay independent of the library code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "siads/rng.hpp"

namespace oracle {

// counts[j][i] by scanning every consecutive pair for every cell.
inline std::vector<std::vector<std::uint64_t>> pair_counts(const std::vector<std::uint32_t>& bins, std::size_t order) {
  std::vector<std::vector<std::uint64_t>> counts(order, std::vector<std::uint64_t>(order, 0));
  for (std::size_t j = 0; j < order; ++j)
    for (std::size_t i = 0; i < order; ++i)
      for (std::size_t t = 1; t < bins.size(); ++t)
        if (bins[t - 1] == j && bins[t] == i) ++counts[j][i];
  return counts;
}

// -ln(P) / ln(2) with P = count / row sum, or -ln(eps) / ln(2) when unseen.
inline std::vector<std::vector<double>> self_info(const std::vector<std::vector<std::uint64_t>>& counts, double eps) {
  const std::size_t order = counts.size();
  std::vector<std::vector<double>> out(order, std::vector<double>(order));
  for (std::size_t j = 0; j < order; ++j) {
    std::uint64_t row = 0;
    for (auto c : counts[j]) row += c;
    for (std::size_t i = 0; i < order; ++i) {
      const double p = counts[j][i] > 0 ? static_cast<double>(counts[j][i]) / static_cast<double>(row) : eps;
      out[j][i] = -std::log(p) / std::log(2.0);
    }
  }
  return out;
}

inline std::vector<std::uint32_t> random_bins(siads::Rng& rng, std::size_t max_len, std::size_t order) {
  const std::size_t len = 2 + rng.below(max_len - 1);
  std::vector<std::uint32_t> bins(len);
  for (auto& b : bins) b = static_cast<std::uint32_t>(rng.below(order));
  return bins;
}

// Bounded +-1 random walk over [0, order).
inline std::vector<std::uint32_t> walk(siads::Rng& rng, std::size_t len, std::size_t order, std::uint32_t start) {
  std::vector<std::uint32_t> bins{start};
  while (bins.size() < len) {
    const auto step = static_cast<int>(rng.below(3)) - 1;
    const int next = static_cast<int>(bins.back()) + step;
    bins.push_back(static_cast<std::uint32_t>(std::clamp(next, 0, static_cast<int>(order) - 1)));
  }
  return bins;
}

}  // namespace oracle
