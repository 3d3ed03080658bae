#pragma once

// Sliding-window entropy statistics, the least-squares entropy gradient, and
// the consecutive-high-entropy counter.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace spreg {

struct WindowStats {
  double mean;
  double stddev;  // population
};

/**
 * Ring buffer over the most recent entropies.
 *
 * Mean and M2 are maintained incrementally (Welford add/remove) and rebuilt
 * exactly from the buffer every `capacity` evictions, or sooner when a
 * removal cancels most of M2 or evicts an outlier. A separate tail of `tail_length` values feeds the gradient;
 * it is independent of `capacity` so W < n configurations still work.
 */
class EntropyWindow {
 public:
  explicit EntropyWindow(std::size_t capacity = 10, std::size_t tail_length = 5);

  /// Throws InvalidInput for a negative or non-finite entropy.
  void push(double entropy);

  /// Throws NotReady on an empty window.
  WindowStats stats() const;
  std::optional<WindowStats> try_stats() const;

  bool empty() const noexcept { return count_ == 0; }
  std::size_t size() const noexcept { return count_; }
  std::size_t capacity() const noexcept { return ring_.size(); }

  /// Retained entries, oldest first.
  std::vector<double> entries() const;
  /// Last `tail_length` pushes (fewer early on), oldest first.
  std::vector<double> tail() const;

  /// Gradient over the last tail_length - 1 pushes followed by `current`;
  /// nullopt until enough history exists.
  std::optional<double> gradient_with(double current) const;

 private:
  void rebuild();

  std::vector<double> ring_;
  std::size_t head_ = 0;  // next write slot
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double m2_peak_ = 0.0;  // largest M2 since the last rebuild
  std::size_t evictions_since_rebuild_ = 0;

  std::vector<double> tail_ring_;
  std::size_t tail_head_ = 0;
  std::size_t tail_count_ = 0;
};

/// Least-squares slope of the last n values against x = 0..n-1.
/// Throws NotReady when fewer than n values are given.
double entropy_gradient(std::span<const double> tail, std::size_t n = 5);

/// Consecutive steps with H > mu.
struct HighEntropyCounter {
  int count = 0;
  int threshold = 50;

  bool triggered() const noexcept { return count >= threshold; }
};

/// Increments when H > mu, resets otherwise. A missing mu (empty window)
/// resets as well.
HighEntropyCounter update_counter(HighEntropyCounter c, double entropy, std::optional<double> mu);

}  // namespace spreg
