#pragma once

#include <deque>
#include <vector>

#include "adloop/error.hpp"
#include "adloop/signal/types.hpp"

namespace adloop::signal {

/// Weights applied newest-first: y0[n] = sum_i w_i y[n-i] / sum_i w_i.
inline std::vector<double> default_wma_weights() { return {6.0, 5.0, 4.0, 3.0}; }

/// Causal weighted moving average. Until the history fills, the output is
/// normalised by the weights actually in use, so early values are unbiased.
class WeightedMovingAverage {
 public:
  explicit WeightedMovingAverage(std::vector<double> weights = default_wma_weights())
      : weights_(std::move(weights)) {
    if (weights_.empty()) throw SignalError("moving average needs at least one weight");
    for (double w : weights_) {
      if (!(w >= 0.0)) throw SignalError("moving average weights must be non-negative");
      full_sum_ += w;
    }
    if (!(full_sum_ > 0.0)) throw SignalError("moving average weights must not all be zero");
  }

  double push(double y) {
    history_.push_front(y);
    if (history_.size() > weights_.size()) history_.pop_back();
    double acc = 0.0;
    double wsum = 0.0;
    for (std::size_t i = 0; i < history_.size(); ++i) {
      acc += weights_[i] * history_[i];
      wsum += weights_[i];
    }
    const double norm = history_.size() == weights_.size() ? full_sum_ : wsum;
    return norm > 0.0 ? acc / norm : history_.front();
  }

  [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }

 private:
  std::vector<double> weights_;
  double full_sum_ = 0.0;
  std::deque<double> history_;
};

/// Recomputes `smoothed` from `raw` with the given weights.
inline FeedbackSeries weighted_moving_average(const FeedbackSeries& raw,
                                              const std::vector<double>& weights) {
  WeightedMovingAverage wma(weights);
  FeedbackSeries out = raw;
  out.smoothed.clear();
  out.smoothed.reserve(raw.raw.size());
  for (double y : raw.raw) out.smoothed.push_back(wma.push(y));
  return out;
}

}  // namespace adloop::signal
