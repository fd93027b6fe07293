#pragma once

#include "styland/core/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace styland {

/// Rejected depth edit; `first` and `second` name the pair whose order flipped.
class OrderViolation : public Error {
 public:
  OrderViolation(const std::string& message, std::string first, std::string second)
      : Error(ErrorKind::order_violation, message), first_(std::move(first)), second_(std::move(second)) {}
  [[nodiscard]] const std::string& first() const { return first_; }
  [[nodiscard]] const std::string& second() const { return second_; }

 private:
  std::string first_;
  std::string second_;
};

/// Mean depth of every label present in `seg`, keyed by label id.
template <typename Scalar>
std::map<int, double> segment_mean_depth(const DepthMap<Scalar>& depth, const SegmentationMap& seg);

/// Labels ordered near to far by segment mean depth; equal means are ordered
/// by label id.
std::vector<int> depth_order(const std::map<int, double>& means);

template <typename Scalar>
std::vector<int> depth_order(const DepthMap<Scalar>& depth, const SegmentationMap& seg);

/// Adds `delta` to the label's pixels, clamps to [0,1], and rejects the edit
/// with Error(order_violation) naming the flipped pair if the near-to-far
/// ranking changes.
template <typename Scalar>
DepthMap<Scalar> shift_segment_depth(const DepthMap<Scalar>& depth, const SegmentationMap& seg, int label, double delta);

/// Same, with the label given by name.
template <typename Scalar>
DepthMap<Scalar> shift_segment_depth(const DepthMap<Scalar>& depth, const SegmentationMap& seg, const std::string& label,
                                     double delta);

struct Histogram {
  double lo = 0;
  double hi = 1;
  std::vector<long> counts;

  [[nodiscard]] long total() const;
  [[nodiscard]] double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
  [[nodiscard]] double bin_center(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * bin_width(); }
  /// Value at which the cumulative count first reaches half the total.
  [[nodiscard]] double median() const;
};

/// Per-label histograms over images of segment mean depth on [0,1].
struct DepthDistribution {
  std::vector<std::string> label_set;
  std::vector<Histogram> histograms;  // index-aligned with label_set
  /// Raw per-image means per label, in dataset order.
  std::vector<std::vector<double>> samples;
};

template <typename Scalar>
DepthDistribution depth_distribution(const std::vector<std::pair<SegmentationMap, DepthMap<Scalar>>>& data,
                                     const std::vector<std::string>& label_set, int bins);

/// Wasserstein-1 distance between two histograms over the same bins,
/// normalized to unit mass: bin_width * sum |CDF_a - CDF_b|.
double wasserstein1(const Histogram& a, const Histogram& b);

/// Wasserstein-1 distance between empirical distributions of samples.
double wasserstein1(std::vector<double> a, std::vector<double> b);

/// CSV with header `label,bin_lo,bin_hi,count`.
void write_distribution_csv(std::ostream& out, const DepthDistribution& dist);

/// RGB8 bar plot: one horizontal panel per label, `width` x (panel_height *
/// labels) pixels.
std::vector<std::uint8_t> render_distribution_plot(const DepthDistribution& dist, int width, int panel_height);

}  // namespace styland
