#include "spreg/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spreg/errors.hpp"

namespace spreg {

EntropyWindow::EntropyWindow(std::size_t capacity, std::size_t tail_length)
    : ring_(capacity), tail_ring_(tail_length) {
  if (capacity == 0) throw InvalidInput("entropy window capacity must be positive");
  if (tail_length < 2) throw InvalidInput("gradient tail needs at least 2 values");
}

void EntropyWindow::push(double entropy) {
  if (!std::isfinite(entropy) || entropy < 0.0) {
    throw InvalidInput("entropy must be finite and non-negative, got " + std::to_string(entropy));
  }

  if (count_ == ring_.size()) {
    const double old = ring_[head_];
    ring_[head_] = entropy;
    head_ = (head_ + 1) % ring_.size();
    bool ill_conditioned = false;
    if (count_ == 1) {
      mean_ = entropy;
      m2_ = 0.0;
    } else {
      ill_conditioned = std::abs(old - mean_) > 16.0 * std::max(1.0, std::abs(mean_));
      // Remove `old`, then add `entropy`; count is unchanged overall.
      const double n = static_cast<double>(count_);
      const double mean_without = (n * mean_ - old) / (n - 1.0);
      m2_ -= (old - mean_) * (old - mean_without);
      const double delta = entropy - mean_without;
      mean_ = mean_without + delta / n;
      m2_ += delta * (entropy - mean_);
      // Removal cancels against M2; once most of it is gone the rounding
      // left behind dominates, so recompute.
      ill_conditioned = ill_conditioned || m2_ < 0.5 * m2_peak_;
    }
    if (++evictions_since_rebuild_ >= ring_.size() || ill_conditioned) rebuild();
  } else {
    ring_[head_] = entropy;
    head_ = (head_ + 1) % ring_.size();
    ++count_;
    const double delta = entropy - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (entropy - mean_);
  }
  m2_ = std::max(m2_, 0.0);
  m2_peak_ = std::max(m2_peak_, m2_);

  tail_ring_[tail_head_] = entropy;
  tail_head_ = (tail_head_ + 1) % tail_ring_.size();
  tail_count_ = std::min(tail_count_ + 1, tail_ring_.size());
}

void EntropyWindow::rebuild() {
  evictions_since_rebuild_ = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < count_; ++i) sum += ring_[i];
  mean_ = sum / static_cast<double>(count_);
  double ss = 0.0;
  for (std::size_t i = 0; i < count_; ++i) ss += (ring_[i] - mean_) * (ring_[i] - mean_);
  m2_ = ss;
  m2_peak_ = ss;
}

WindowStats EntropyWindow::stats() const {
  if (count_ == 0) throw NotReady("entropy window is empty");
  return {mean_, std::sqrt(m2_ / static_cast<double>(count_))};
}

std::optional<WindowStats> EntropyWindow::try_stats() const {
  if (count_ == 0) return std::nullopt;
  return stats();
}

std::vector<double> EntropyWindow::entries() const {
  std::vector<double> out;
  out.reserve(count_);
  const std::size_t start = (head_ + ring_.size() - count_) % ring_.size();
  for (std::size_t i = 0; i < count_; ++i) out.push_back(ring_[(start + i) % ring_.size()]);
  return out;
}

std::vector<double> EntropyWindow::tail() const {
  std::vector<double> out;
  out.reserve(tail_count_);
  const std::size_t cap = tail_ring_.size();
  const std::size_t start = (tail_head_ + cap - tail_count_) % cap;
  for (std::size_t i = 0; i < tail_count_; ++i) out.push_back(tail_ring_[(start + i) % cap]);
  return out;
}

std::optional<double> EntropyWindow::gradient_with(double current) const {
  const std::size_t n = tail_ring_.size();
  if (tail_count_ + 1 < n) return std::nullopt;
  std::vector<double> series = tail();
  series.push_back(current);
  return entropy_gradient(series, n);
}

double entropy_gradient(std::span<const double> tail, std::size_t n) {
  if (n < 2) throw InvalidInput("gradient needs n >= 2");
  if (tail.size() < n) {
    throw NotReady("gradient needs " + std::to_string(n) + " values, have " + std::to_string(tail.size()));
  }
  const auto last = tail.subspan(tail.size() - n);
  const double x_bar = static_cast<double>(n - 1) / 2.0;
  double h_bar = 0.0;
  for (double h : last) h_bar += h;
  h_bar /= static_cast<double>(n);

  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - x_bar;
    num += dx * (last[i] - h_bar);
    den += dx * dx;
  }
  return num / den;
}

HighEntropyCounter update_counter(HighEntropyCounter c, double entropy, std::optional<double> mu) {
  if (mu && entropy > *mu) {
    ++c.count;
  } else {
    c.count = 0;
  }
  return c;
}

}  // namespace spreg
