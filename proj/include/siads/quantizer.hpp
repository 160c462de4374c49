#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "siads/error.hpp"
#include "siads/ingest.hpp"

namespace siads {

using Bin = std::uint32_t;

struct QuantizedValue {
  Bin bin{0};
  bool out_of_range{false};
};

// Uniform bins of `bin_width` starting at `min_value`. The bin holding
// `max_value` is the last one, so order = floor((max - min) / width) + 1.
class Quantizer {
 public:
  Quantizer() : Quantizer(0.0, 250.0, 1.0) {}

  Quantizer(double min_value, double max_value, double bin_width)
      : min_(min_value), max_(max_value), width_(bin_width) {
    if (!std::isfinite(min_value) || !std::isfinite(max_value) || !std::isfinite(bin_width))
      throw UsageError("quantizer bounds must be finite");
    if (!(bin_width > 0.0)) throw UsageError("quantizer bin_width must be positive");
    if (!(max_value > min_value)) throw UsageError("quantizer max_value must exceed min_value");
    const double span = std::floor((max_value - min_value) / bin_width + 1e-9);
    if (span >= 1 << 20) throw UsageError("quantizer order exceeds 2^20 bins");
    order_ = static_cast<std::size_t>(span) + 1;
  }

  double min_value() const noexcept { return min_; }
  double max_value() const noexcept { return max_; }
  double bin_width() const noexcept { return width_; }
  std::size_t order() const noexcept { return order_; }

  QuantizedValue operator()(double value) const noexcept {
    QuantizedValue q;
    q.out_of_range = !(value >= min_ && value <= max_);
    if (!(value > min_)) return q;  // also catches NaN
    const double pos = std::floor((value - min_) / width_);
    q.bin = pos >= static_cast<double>(order_ - 1) ? static_cast<Bin>(order_ - 1) : static_cast<Bin>(pos);
    return q;
  }

  // Lower edge of a bin in physical units.
  double bin_floor(Bin bin) const noexcept { return min_ + width_ * static_cast<double>(bin); }

  friend bool operator==(const Quantizer&, const Quantizer&) = default;

 private:
  double min_;
  double max_;
  double width_;
  std::size_t order_{0};
};

inline QuantizedValue quantize(double value, const Quantizer& q) noexcept { return q(value); }

struct QuantizedSeries {
  std::vector<Bin> bins;
  std::vector<double> timestamps;
  std::size_t out_of_range{0};
};

inline QuantizedSeries quantize_series(std::span<const Sample> samples, const Quantizer& q) {
  QuantizedSeries out;
  out.bins.reserve(samples.size());
  out.timestamps.reserve(samples.size());
  for (const auto& s : samples) {
    const auto v = q(s.value);
    out.bins.push_back(v.bin);
    out.timestamps.push_back(s.timestamp);
    if (v.out_of_range) ++out.out_of_range;
  }
  return out;
}

}  // namespace siads
