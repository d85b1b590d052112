#pragma once

#include <cstdint>
#include <vector>

#include "evdeblur/errors.hpp"

namespace evdeblur {

struct Event {
  double t = 0.0;  // normalized exposure time
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t p = 1;

  bool operator==(const Event&) const = default;
};

struct EventStream {
  int width = 0;
  int height = 0;
  double contrast = 0.2;  // C used at generation, informational
  std::vector<Event> events;

  /// Throws ValidationError on unsorted times, out-of-range pixels or
  /// polarities other than ±1.
  void validate() const;
};

/// Half-open event window (t_start, t_end) in normalized exposure time.
struct EventWindow {
  double t_start = 0.0;
  double t_end = 1.0;

  double alpha() const { return t_end - t_start; }
  void validate() const;
};

/// Per-pixel sorted timestamps with running polarity sums, for repeated
/// window queries during training.
class EventIndex {
 public:
  explicit EventIndex(const EventStream& stream);

  /// Σ p over events at (x, y) with t_start < t < t_end.
  int polarity_sum(int x, int y, const EventWindow& window) const;

  int width() const { return width_; }
  int height() const { return height_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::size_t> offsets_;  // pixel → first entry, size width*height + 1
  std::vector<double> times_;
  std::vector<int> prefix_;  // prefix_[i] = Σ p of entries before i within the pixel
};

}  // namespace evdeblur
