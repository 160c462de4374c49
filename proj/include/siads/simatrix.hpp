#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "siads/error.hpp"
#include "siads/quantizer.hpp"

namespace siads {

// Default probability assigned to transitions never seen in training.
inline constexpr double kDefaultEpsilon = 1.0 / 1048576.0;  // 2^-20

// Dense (order x order) count of observed bin transitions. Row j holds the
// successors of bin j: at(j, i) counts "j immediately followed by i".
class TransitionCounts {
 public:
  TransitionCounts() = default;

  explicit TransitionCounts(std::size_t order)
      : order_(order), cells_(order * order, 0), row_totals_(order, 0) {
    if (order == 0) throw UsageError("transition matrix order must be positive");
  }

  std::size_t order() const noexcept { return order_; }
  std::uint64_t at(Bin from, Bin to) const noexcept { return cells_[index(from, to)]; }
  std::uint64_t row_total(Bin from) const noexcept { return row_totals_[from]; }
  std::uint64_t total() const noexcept { return total_; }
  std::span<const std::uint64_t> cells() const noexcept { return cells_; }
  std::span<const std::uint64_t> row(Bin from) const noexcept {
    return std::span<const std::uint64_t>(cells_).subspan(static_cast<std::size_t>(from) * order_, order_);
  }

  void add(Bin from, Bin to, std::uint64_t n = 1) {
    check_bin(from);
    check_bin(to);
    cells_[index(from, to)] += n;
    row_totals_[from] += n;
    total_ += n;
  }

  std::size_t seen_cells() const noexcept {
    return static_cast<std::size_t>(std::count_if(cells_.begin(), cells_.end(), [](auto c) { return c != 0; }));
  }

  std::uint64_t max_row_total() const noexcept {
    return row_totals_.empty() ? 0 : *std::max_element(row_totals_.begin(), row_totals_.end());
  }

  // Rebuilds from raw row-major cells (used by the LUT loader).
  static TransitionCounts from_cells(std::size_t order, std::vector<std::uint64_t> cells) {
    TransitionCounts c(order);
    if (cells.size() != order * order) throw DataError("cell count does not match matrix order");
    c.cells_ = std::move(cells);
    for (std::size_t j = 0; j < order; ++j) {
      std::uint64_t sum = 0;
      for (std::size_t i = 0; i < order; ++i) {
        const auto cell = c.cells_[j * order + i];
        if (sum + cell < sum) throw DataError("transition counts overflow");
        sum += cell;
      }
      c.row_totals_[j] = sum;
      c.total_ += sum;
    }
    return c;
  }

  friend bool operator==(const TransitionCounts&, const TransitionCounts&) = default;

 private:
  std::size_t index(Bin from, Bin to) const noexcept { return static_cast<std::size_t>(from) * order_ + to; }
  void check_bin(Bin b) const {
    if (b >= order_) throw DataError("bin index outside matrix order");
  }

  std::size_t order_{0};
  std::vector<std::uint64_t> cells_;
  std::vector<std::uint64_t> row_totals_;
  std::uint64_t total_{0};
};

// Single-pass accumulator: feed bins one at a time.
class Trainer {
 public:
  explicit Trainer(std::size_t order) : counts_(order) {}

  void push(Bin bin) {
    if (bin >= counts_.order()) throw DataError("bin index outside matrix order");
    if (prev_) counts_.add(*prev_, bin);
    prev_ = bin;
    ++samples_;
  }

  std::size_t samples() const noexcept { return samples_; }
  const TransitionCounts& counts() const noexcept { return counts_; }
  TransitionCounts take() && { return std::move(counts_); }

 private:
  TransitionCounts counts_;
  std::optional<Bin> prev_;
  std::size_t samples_{0};
};

inline TransitionCounts train(std::span<const Bin> bins, std::size_t order) {
  if (bins.size() < 2) throw DataError("training needs at least 2 samples, got fewer than 2 samples");
  Trainer trainer(order);
  for (Bin b : bins) trainer.push(b);
  return std::move(trainer).take();
}

inline TransitionCounts merge_counts(const TransitionCounts& a, const TransitionCounts& b) {
  if (a.order() != b.order()) throw DataError("cannot merge transition counts of different order");
  std::vector<std::uint64_t> cells(a.cells().begin(), a.cells().end());
  const auto rhs = b.cells();
  for (std::size_t k = 0; k < cells.size(); ++k) cells[k] += rhs[k];
  return TransitionCounts::from_cells(a.order(), std::move(cells));
}

// log2(1/P) with P = count / total.
inline double self_information_bits(double count, double total) noexcept { return std::log2(total / count); }

// Reference LUT of conditional self-information E(j -> i) = log2(1 / P(i | j)).
// Transitions with no training count get log2(1 / epsilon).
class SelfInfoMatrix {
 public:
  SelfInfoMatrix() = default;

  SelfInfoMatrix(std::size_t order, double epsilon) : order_(order), epsilon_(epsilon) {
    check_epsilon(epsilon);
    e_max_ = std::log2(1.0 / epsilon);
    values_.assign(order * order, e_max_);
  }

  std::size_t order() const noexcept { return order_; }
  double epsilon() const noexcept { return epsilon_; }
  double e_max() const noexcept { return e_max_; }

  double operator()(Bin from, Bin to) const noexcept { return values_[static_cast<std::size_t>(from) * order_ + to]; }
  std::span<const double> values() const noexcept { return values_; }
  const double* data() const noexcept { return values_.data(); }

  // Re-derives one row from its (possibly fractional) successor weights.
  template <typename Weight>
  void set_row(Bin from, std::span<const Weight> weights, double total) {
    double* row = values_.data() + static_cast<std::size_t>(from) * order_;
    for (std::size_t i = 0; i < order_; ++i) {
      row[i] = weights[i] > 0 && total > 0 ? self_information_bits(static_cast<double>(weights[i]), total) : e_max_;
    }
  }

  static void check_epsilon(double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw UsageError("epsilon must lie in (0, 1)");
  }

  friend bool operator==(const SelfInfoMatrix&, const SelfInfoMatrix&) = default;

 private:
  std::size_t order_{0};
  double epsilon_{kDefaultEpsilon};
  double e_max_{20.0};
  std::vector<double> values_;
};

inline SelfInfoMatrix derive_self_info(const TransitionCounts& counts, double epsilon = kDefaultEpsilon) {
  SelfInfoMatrix m(counts.order(), epsilon);
  for (Bin j = 0; j < counts.order(); ++j) {
    if (counts.row_total(j) == 0) continue;
    m.set_row(j, counts.row(j), static_cast<double>(counts.row_total(j)));
  }
  return m;
}

// Largest self-information among transitions seen in training.
inline double max_seen_bits(const SelfInfoMatrix& ref, const TransitionCounts& counts) {
  double best = 0.0;
  for (Bin j = 0; j < counts.order(); ++j)
    for (Bin i = 0; i < counts.order(); ++i)
      if (counts.at(j, i) > 0) best = std::max(best, ref(j, i));
  return best;
}

}  // namespace siads
