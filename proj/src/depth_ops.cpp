#include "styland/depth_ops.hpp"

#include "styland/core/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace styland {

namespace {

// Pairs of any size are accepted here; only agreement and value ranges matter.
template <typename Scalar>
void check_pair(const SegmentationMap& seg, const DepthMap<Scalar>& depth) {
  if (seg.height() != depth.height() || seg.width() != depth.width() || seg.height() == 0 || seg.width() == 0) {
    throw Error(ErrorKind::shape_mismatch, "segmentation " + std::to_string(seg.height()) + "x" + std::to_string(seg.width()) +
                                               " vs depth " + std::to_string(depth.height()) + "x" + std::to_string(depth.width()));
  }
  if (seg.labels().maxCoeff() >= seg.label_count()) throw Error(ErrorKind::not_one_hot, "label id outside the label set");
  const auto& v = depth.values();
  if (!v.allFinite()) throw Error(ErrorKind::out_of_range, "depth has non-finite values");
  if (v.minCoeff() < Scalar(0) || v.maxCoeff() > Scalar(1)) throw Error(ErrorKind::out_of_range, "depth values must lie in [0,1]");
}

}  // namespace

template <typename Scalar>
std::map<int, double> segment_mean_depth(const DepthMap<Scalar>& depth, const SegmentationMap& seg) {
  check_pair(seg, depth);
  std::vector<double> sum(static_cast<std::size_t>(seg.label_count()), 0.0);
  std::vector<long> count(sum.size(), 0);
  const auto& labels = seg.labels();
  const auto& values = depth.values();
  for (int y = 0; y < seg.height(); ++y) {
    for (int x = 0; x < seg.width(); ++x) {
      const auto l = static_cast<std::size_t>(labels(y, x));
      sum[l] += static_cast<double>(values(y, x));
      ++count[l];
    }
  }
  std::map<int, double> out;
  for (std::size_t l = 0; l < sum.size(); ++l) {
    if (count[l] > 0) out[static_cast<int>(l)] = sum[l] / static_cast<double>(count[l]);
  }
  return out;
}

std::vector<int> depth_order(const std::map<int, double>& means) {
  std::vector<std::pair<double, int>> items;
  for (const auto& [label, mean] : means) items.emplace_back(mean, label);
  std::sort(items.begin(), items.end());
  std::vector<int> out;
  for (const auto& it : items) out.push_back(it.second);
  return out;
}

template <typename Scalar>
std::vector<int> depth_order(const DepthMap<Scalar>& depth, const SegmentationMap& seg) {
  return depth_order(segment_mean_depth(depth, seg));
}

template <typename Scalar>
DepthMap<Scalar> shift_segment_depth(const DepthMap<Scalar>& depth, const SegmentationMap& seg, int label, double delta) {
  check_pair(seg, depth);
  if (!std::isfinite(delta)) throw Error(ErrorKind::invalid_argument, "depth shift must be finite");
  const auto before = segment_mean_depth(depth, seg);
  if (label < 0 || !before.count(label)) {
    throw Error(ErrorKind::invalid_argument, "label " + std::to_string(label) + " is not present in the segmentation");
  }
  DepthMap<Scalar> out = depth;
  const auto& labels = seg.labels();
  auto& values = out.values();
  const auto d = static_cast<Scalar>(delta);
  for (int y = 0; y < seg.height(); ++y) {
    for (int x = 0; x < seg.width(); ++x) {
      if (labels(y, x) == label) values(y, x) = std::clamp(values(y, x) + d, Scalar(0), Scalar(1));
    }
  }
  const auto order_before = depth_order(before);
  const auto after = segment_mean_depth(out, seg);
  const auto order_after = depth_order(after);
  if (order_after != order_before) {
    // report the first pair of the original ranking whose order is reversed
    std::map<int, std::size_t> rank;
    for (std::size_t i = 0; i < order_after.size(); ++i) rank[order_after[i]] = i;
    for (std::size_t i = 0; i < order_before.size(); ++i) {
      for (std::size_t j = i + 1; j < order_before.size(); ++j) {
        const int a = order_before[i];
        const int b = order_before[j];
        if (rank[a] > rank[b]) {
          const auto& names = seg.label_set();
          char buf[256];
          std::snprintf(buf, sizeof buf, "shifting '%s' by %+g flips the depth order of '%s' (%.4f) and '%s' (%.4f)",
                        names[static_cast<std::size_t>(label)].c_str(), delta, names[static_cast<std::size_t>(a)].c_str(),
                        after.at(a), names[static_cast<std::size_t>(b)].c_str(), after.at(b));
          throw OrderViolation(buf, names[static_cast<std::size_t>(a)], names[static_cast<std::size_t>(b)]);
        }
      }
    }
  }
  return out;
}

template <typename Scalar>
DepthMap<Scalar> shift_segment_depth(const DepthMap<Scalar>& depth, const SegmentationMap& seg, const std::string& label,
                                     double delta) {
  const auto id = seg.label_id(label);
  if (!id) throw Error(ErrorKind::invalid_argument, "unknown label '" + label + "'");
  return shift_segment_depth(depth, seg, *id, delta);
}

long Histogram::total() const {
  long t = 0;
  for (long c : counts) t += c;
  return t;
}

double Histogram::median() const {
  const long t = total();
  if (t == 0) return std::nan("");
  long acc = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    acc += counts[i];
    if (2 * acc >= t) return bin_center(i);
  }
  return hi;
}

template <typename Scalar>
DepthDistribution depth_distribution(const std::vector<std::pair<SegmentationMap, DepthMap<Scalar>>>& data,
                                     const std::vector<std::string>& label_set, int bins) {
  if (data.empty()) throw Error(ErrorKind::invalid_argument, "depth distribution of an empty dataset");
  if (bins < 1) throw Error(ErrorKind::invalid_argument, "bins must be >= 1");
  DepthDistribution dist;
  dist.label_set = label_set;
  dist.histograms.assign(label_set.size(), Histogram{0, 1, std::vector<long>(static_cast<std::size_t>(bins), 0)});
  dist.samples.resize(label_set.size());
  for (const auto& [seg, depth] : data) {
    if (seg.label_set() != label_set) throw Error(ErrorKind::invalid_argument, "segmentation uses a different label set");
    for (const auto& [label, mean] : segment_mean_depth(depth, seg)) {
      const auto l = static_cast<std::size_t>(label);
      const auto bin = std::min(bins - 1, static_cast<int>(mean * bins));
      ++dist.histograms[l].counts[static_cast<std::size_t>(std::max(0, bin))];
      dist.samples[l].push_back(mean);
    }
  }
  return dist;
}

double wasserstein1(const Histogram& a, const Histogram& b) {
  if (a.counts.size() != b.counts.size() || a.lo != b.lo || a.hi != b.hi) {
    throw Error(ErrorKind::invalid_argument, "wasserstein1: histograms use different bins");
  }
  const double ta = static_cast<double>(a.total());
  const double tb = static_cast<double>(b.total());
  if (ta == 0 || tb == 0) throw Error(ErrorKind::invalid_argument, "wasserstein1: empty histogram");
  double ca = 0;
  double cb = 0;
  double w = 0;
  for (std::size_t i = 0; i < a.counts.size(); ++i) {
    ca += static_cast<double>(a.counts[i]) / ta;
    cb += static_cast<double>(b.counts[i]) / tb;
    w += std::abs(ca - cb);
  }
  return w * a.bin_width();
}

double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::invalid_argument, "wasserstein1: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  // integrate |F_a - F_b| over the merged breakpoints
  std::vector<double> points(a);
  points.insert(points.end(), b.begin(), b.end());
  std::sort(points.begin(), points.end());
  double w = 0;
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t k = 0; k + 1 < points.size(); ++k) {
    while (ia < a.size() && a[ia] <= points[k]) ++ia;
    while (ib < b.size() && b[ib] <= points[k]) ++ib;
    const double fa = static_cast<double>(ia) / static_cast<double>(a.size());
    const double fb = static_cast<double>(ib) / static_cast<double>(b.size());
    w += std::abs(fa - fb) * (points[k + 1] - points[k]);
  }
  return w;
}

void write_distribution_csv(std::ostream& out, const DepthDistribution& dist) {
  out << "label,bin_lo,bin_hi,count\n";
  char buf[256];
  for (std::size_t l = 0; l < dist.label_set.size(); ++l) {
    const auto& h = dist.histograms[l];
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%ld\n", dist.label_set[l].c_str(), h.lo + static_cast<double>(i) * h.bin_width(),
                    h.lo + static_cast<double>(i + 1) * h.bin_width(), h.counts[i]);
      out << buf;
    }
  }
}

std::vector<std::uint8_t> render_distribution_plot(const DepthDistribution& dist, int width, int panel_height) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 8> kColors{{{70, 130, 220},
                                                                       {130, 100, 80},
                                                                       {30, 120, 40},
                                                                       {120, 200, 80},
                                                                       {160, 120, 60},
                                                                       {40, 90, 180},
                                                                       {120, 120, 120},
                                                                       {200, 80, 80}}};
  const auto labels = static_cast<int>(dist.label_set.size());
  const int height = panel_height * labels;
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(width) * height * 3, 255);
  for (int l = 0; l < labels; ++l) {
    const auto& h = dist.histograms[static_cast<std::size_t>(l)];
    const long peak = h.counts.empty() ? 0 : *std::max_element(h.counts.begin(), h.counts.end());
    const auto color = kColors[static_cast<std::size_t>(l) % kColors.size()];
    const int top = l * panel_height;
    for (int x = 0; x < width; ++x) {
      const auto bin = std::min(h.counts.size() - 1, static_cast<std::size_t>(x) * h.counts.size() / static_cast<std::size_t>(width));
      const int bar = peak == 0 ? 0 : static_cast<int>(std::lround(static_cast<double>(h.counts[bin]) / static_cast<double>(peak) * (panel_height - 2)));
      for (int y = 0; y < panel_height; ++y) {
        auto* px = &rgb[(static_cast<std::size_t>(top + y) * width + x) * 3];
        if (y == panel_height - 1) {
          px[0] = px[1] = px[2] = 0;
        } else if (panel_height - 1 - y <= bar) {
          px[0] = color[0];
          px[1] = color[1];
          px[2] = color[2];
        }
      }
    }
  }
  return rgb;
}

#define STYLAND_INSTANTIATE_DEPTH_OPS(S)                                                                              \
  template std::map<int, double> segment_mean_depth(const DepthMap<S>&, const SegmentationMap&);                     \
  template std::vector<int> depth_order(const DepthMap<S>&, const SegmentationMap&);                                 \
  template DepthMap<S> shift_segment_depth(const DepthMap<S>&, const SegmentationMap&, int, double);                 \
  template DepthMap<S> shift_segment_depth(const DepthMap<S>&, const SegmentationMap&, const std::string&, double);  \
  template DepthDistribution depth_distribution(const std::vector<std::pair<SegmentationMap, DepthMap<S>>>&,         \
                                                const std::vector<std::string>&, int);

STYLAND_INSTANTIATE_DEPTH_OPS(float)
STYLAND_INSTANTIATE_DEPTH_OPS(double)

}  // namespace styland
