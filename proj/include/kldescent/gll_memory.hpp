#pragma once

#include "kldescent/core.hpp"

#include <cmath>
#include <cstdint>
#include <deque>
#include <utility>

namespace kldescent {

/// Sliding window over the last m+1 merit values of a GLL-type method.
class MemoryWindow {
 public:
  struct Entry {
    std::int64_t index;
    double value;
  };

  struct Max {
    double value;
    std::int64_t ell;  // largest stored index attaining the max
  };

  explicit MemoryWindow(int m) : m_(m) {
    if (m < 0) throw InvalidInput("MemoryWindow: m must be nonnegative");
  }

  int memory() const { return m_; }
  std::size_t capacity() const { return static_cast<std::size_t>(m_) + 1; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::deque<Entry>& entries() const { return entries_; }

  /// Index of the most recent entry; -1 when empty.
  std::int64_t top_index() const { return entries_.empty() ? -1 : entries_.back().index; }

  void push(std::int64_t k, double value) {
    const std::int64_t expected = top_index() + 1;
    if (k != expected)
      throw LogicError("MemoryWindow::push: expected index " + std::to_string(expected) + ", got " +
                       std::to_string(k));
    if (std::isnan(value)) throw InvalidInput("MemoryWindow::push: NaN merit value");
    entries_.push_back({k, value});
    if (entries_.size() > capacity()) entries_.pop_front();
  }

  Max max() const {
    if (entries_.empty()) throw LogicError("MemoryWindow::max: empty window");
    Max best{entries_.front().value, entries_.front().index};
    for (const auto& e : entries_) {
      // >= so later indices win ties
      if (e.value >= best.value) best = {e.value, e.index};
    }
    return best;
  }

  /// candidate <= max - decrement, compared in plain floating point.
  bool accept(double candidate, double decrement) const {
    if (std::isnan(candidate)) throw InvalidInput("MemoryWindow::accept: NaN candidate");
    if (!(decrement >= 0.0)) throw InvalidInput("MemoryWindow::accept: decrement must be nonnegative");
    return candidate <= max().value - decrement;
  }

 private:
  int m_;
  std::deque<Entry> entries_;
};

}  // namespace kldescent
