#include "evdeblur/events.hpp"

#include <algorithm>
#include <string>

namespace evdeblur {

void EventStream::validate() const {
  if (width <= 0 || height <= 0) throw ValidationError("event stream needs a positive sensor size");
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    if (i > 0 && e.t < events[i - 1].t) {
      throw ValidationError("event " + std::to_string(i) + " is out of time order");
    }
    if (e.x >= width || e.y >= height) throw ValidationError("event " + std::to_string(i) + " outside sensor");
    if (e.p != 1 && e.p != -1) throw ValidationError("event " + std::to_string(i) + " has polarity other than +-1");
  }
}

void EventWindow::validate() const {
  if (!(t_start >= 0.0 && t_start < t_end && t_end <= 1.0)) {
    throw ValidationError("event window (" + std::to_string(t_start) + ", " + std::to_string(t_end) +
                          ") must satisfy 0 <= start < end <= 1");
  }
}

EventIndex::EventIndex(const EventStream& stream) : width_(stream.width), height_(stream.height) {
  const std::size_t n_pix = static_cast<std::size_t>(width_) * height_;
  std::vector<std::size_t> counts(n_pix, 0);
  for (const Event& e : stream.events) ++counts[static_cast<std::size_t>(e.y) * width_ + e.x];
  offsets_.assign(n_pix + 1, 0);
  for (std::size_t i = 0; i < n_pix; ++i) offsets_[i + 1] = offsets_[i] + counts[i];
  times_.resize(stream.events.size());
  prefix_.resize(stream.events.size() + n_pix);
  std::vector<int> pol(stream.events.size());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const Event& e : stream.events) {
    const std::size_t slot = cursor[static_cast<std::size_t>(e.y) * width_ + e.x]++;
    times_[slot] = e.t;
    pol[slot] = e.p;
  }
  // prefix for pixel i occupies [offsets_[i] + i, offsets_[i+1] + i]
  for (std::size_t i = 0; i < n_pix; ++i) {
    int run = 0;
    std::size_t base = offsets_[i] + i;
    prefix_[base] = 0;
    for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
      run += pol[k];
      prefix_[base + (k - offsets_[i]) + 1] = run;
    }
  }
}

int EventIndex::polarity_sum(int x, int y, const EventWindow& window) const {
  const std::size_t pix = static_cast<std::size_t>(y) * width_ + x;
  const auto begin = times_.begin() + static_cast<std::ptrdiff_t>(offsets_[pix]);
  const auto end = times_.begin() + static_cast<std::ptrdiff_t>(offsets_[pix + 1]);
  const auto lo = std::upper_bound(begin, end, window.t_start);  // first t > t_start
  const auto hi = std::lower_bound(lo, end, window.t_end);       // first t >= t_end
  const std::size_t base = offsets_[pix] + pix;
  return prefix_[base + (hi - begin)] - prefix_[base + (lo - begin)];
}

}  // namespace evdeblur
