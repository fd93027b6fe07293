#include "styland/core/types.hpp"

#include <cmath>

namespace styland {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::shape_mismatch: return "shape-mismatch";
    case ErrorKind::out_of_range: return "out-of-range";
    case ErrorKind::not_one_hot: return "non-one-hot";
    case ErrorKind::invalid_resolution: return "invalid-resolution";
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::order_violation: return "order-violation";
    case ErrorKind::non_finite: return "non-finite";
    case ErrorKind::io: return "io";
    case ErrorKind::format: return "format";
  }
  return "unknown";
}

const std::vector<std::string>& default_label_set() {
  static const std::vector<std::string> labels{"sky", "mountain", "tree", "grass", "earth", "water", "rock"};
  return labels;
}

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

namespace {

std::string dims(int h, int w) { return std::to_string(h) + "x" + std::to_string(w); }

void check_resolution(int h, int w, const char* what) {
  if (h != w || !is_power_of_two(h) || h < 8) {
    throw Error(ErrorKind::invalid_resolution,
                std::string(what) + " must be square, a power of two and at least 8, got " + dims(h, w));
  }
}

}  // namespace

// --- SegmentationMap --------------------------------------------------------

std::optional<int> SegmentationMap::label_id(const std::string& name) const {
  for (std::size_t i = 0; i < label_set_.size(); ++i) {
    if (label_set_[i] == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

template <typename Scalar>
SegmentationMap SegmentationMap::from_one_hot(const nn::Tensor<Scalar>& one_hot, std::vector<std::string> label_set) {
  const auto& s = one_hot.shape();
  if (s.n != 1 || s.c != static_cast<int>(label_set.size())) {
    throw Error(ErrorKind::shape_mismatch,
                "one-hot tensor " + nn::to_string(s) + " for " + std::to_string(label_set.size()) + " labels");
  }
  LabelGrid labels(s.h, s.w);
  for (int y = 0; y < s.h; ++y) {
    for (int x = 0; x < s.w; ++x) {
      int hot = -1;
      for (int c = 0; c < s.c; ++c) {
        const Scalar v = one_hot.at(0, c, y, x);
        if (v == Scalar(1)) {
          if (hot >= 0) throw Error(ErrorKind::not_one_hot, "pixel (" + dims(y, x) + ") has several hot channels");
          hot = c;
        } else if (v != Scalar(0)) {
          throw Error(ErrorKind::not_one_hot, "pixel (" + dims(y, x) + ") holds a non-binary value");
        }
      }
      if (hot < 0) throw Error(ErrorKind::not_one_hot, "pixel (" + dims(y, x) + ") has no hot channel");
      labels(y, x) = static_cast<std::uint8_t>(hot);
    }
  }
  return {std::move(labels), std::move(label_set)};
}

template <typename Scalar>
nn::Tensor<Scalar> SegmentationMap::one_hot() const {
  nn::Tensor<Scalar> t(nn::Shape{1, label_count(), height(), width()});
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x) {
      const int l = labels_(y, x);
      if (l < label_count()) t.at(0, l, y, x) = Scalar(1);
    }
  }
  return t;
}

void SegmentationMap::validate() const {
  if (label_count() < 2) throw Error(ErrorKind::invalid_argument, "label set needs at least 2 labels");
  check_resolution(height(), width(), "segmentation map");
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x) {
      if (labels_(y, x) >= label_count()) {
        throw Error(ErrorKind::not_one_hot, "label id " + std::to_string(labels_(y, x)) + " at (" + dims(y, x) +
                                                ") is outside the " + std::to_string(label_count()) + "-label set");
      }
    }
  }
}

// --- DepthMap / ImageTensor -------------------------------------------------

template <typename Scalar>
DepthMap<Scalar> DepthMap<Scalar>::from_tensor(const nn::Tensor<Scalar>& t, int sample) {
  if (t.c() != 1) throw Error(ErrorKind::shape_mismatch, "depth tensor must have one channel, got " + nn::to_string(t.shape()));
  Grid<Scalar> v(t.h(), t.w());
  std::copy_n(t.ptr() + sample * t.shape().sample(), t.shape().sample(), v.data());
  return DepthMap(std::move(v));
}

template <typename Scalar>
nn::Tensor<Scalar> DepthMap<Scalar>::tensor() const {
  nn::Tensor<Scalar> t(nn::Shape{1, 1, height(), width()});
  std::copy_n(values_.data(), values_.size(), t.ptr());
  return t;
}

template <typename Scalar>
void DepthMap<Scalar>::validate() const {
  if (!values_.isFinite().all()) throw Error(ErrorKind::out_of_range, "depth map contains non-finite values");
  if (values_.size() > 0 && (values_.minCoeff() < Scalar(0) || values_.maxCoeff() > Scalar(1))) {
    throw Error(ErrorKind::out_of_range, "depth values must lie in [0,1], found range [" +
                                             std::to_string(values_.minCoeff()) + ", " +
                                             std::to_string(values_.maxCoeff()) + "]");
  }
}

template <typename Scalar>
void ImageTensor<Scalar>::validate() const {
  if (values_.n() != 1 || values_.c() != 3) {
    throw Error(ErrorKind::shape_mismatch, "image must be (1,3,H,W), got " + nn::to_string(values_.shape()));
  }
  if (!values_.all_finite()) throw Error(ErrorKind::out_of_range, "image contains non-finite values");
  if (values_.data().minCoeff() < Scalar(-1) || values_.data().maxCoeff() > Scalar(1)) {
    throw Error(ErrorKind::out_of_range, "image values must lie in [-1,1]");
  }
}

// --- Mode / ModelConfig -----------------------------------------------------

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::s2d: return "s2d";
    case Mode::sd2i: return "sd2i";
    case Mode::s2i: return "s2i";
  }
  return "?";
}

Mode parse_mode(const std::string& text) {
  if (text == "s2d") return Mode::s2d;
  if (text == "sd2i") return Mode::sd2i;
  if (text == "s2i") return Mode::s2i;
  throw Error(ErrorKind::invalid_argument, "unknown mode '" + text + "' (expected s2d, sd2i or s2i)");
}

ModelConfig ModelConfig::desk(Mode mode) {
  ModelConfig c;
  c.mode = mode;
  return c;
}

ModelConfig ModelConfig::full(Mode mode) {
  ModelConfig c;
  c.mode = mode;
  c.output_resolution = 256;
  c.channels = {64, 64, 64, 64, 32, 16};
  c.critic_channels = {64, 64, 64, 64, 32, 16};
  return c;
}

ModelConfig ModelConfig::for_resolution(Mode mode, int resolution) {
  if (resolution == 64) return desk(mode);
  if (resolution == 256) return full(mode);
  ModelConfig c;
  c.mode = mode;
  c.output_resolution = resolution;
  if (!is_power_of_two(resolution) || resolution < c.base_resolution) return c;  // left to validate()
  int layers = 1;
  while ((c.base_resolution << (layers - 1)) < resolution) ++layers;
  c.channels.assign(static_cast<std::size_t>(layers), 64);
  if (layers > 1) c.channels.back() = 32;
  c.critic_channels = c.channels;
  return c;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::invalid_argument, "model config: " + m); };
  if (!is_power_of_two(base_resolution) || base_resolution < 8) fail("base_resolution must be a power of two >= 8");
  if (!is_power_of_two(output_resolution) || output_resolution < base_resolution) {
    fail("output_resolution must be a power of two >= base_resolution");
  }
  if (channels.empty()) fail("channels must not be empty");
  if (layer_resolution(layer_count() - 1) != output_resolution) {
    fail("layer count " + std::to_string(layer_count()) + " does not reach output resolution " +
         std::to_string(output_resolution) + " from " + std::to_string(base_resolution));
  }
  if (critic_channels.size() != channels.size()) fail("critic_channels must have one entry per layer");
  for (int c : channels) {
    if (c < 1) fail("channel widths must be positive");
  }
  for (int c : critic_channels) {
    if (c < 1) fail("critic channel widths must be positive");
  }
  if (z_dim < 1 || mapping_layers < 0 || mapping_width < 1) fail("invalid mapping network size");
  if (label_count() < 2) fail("label_set needs at least 2 labels");
  if (label_count() > 255) fail("label_set is limited to 255 labels");
  if (optimizer.batch < 1) fail("batch must be >= 1");
  if (!(optimizer.lr > 0)) fail("lr must be positive");
  if (loss.r1_interval < 1) fail("r1_interval must be >= 1");
}

// --- pair validation and resizing ------------------------------------------

template <typename Scalar>
void validate_pair(const SegmentationMap& seg, const DepthMap<Scalar>& depth) {
  if (seg.height() != depth.height() || seg.width() != depth.width()) {
    throw Error(ErrorKind::shape_mismatch, "segmentation " + dims(seg.height(), seg.width()) + " vs depth " +
                                               dims(depth.height(), depth.width()));
  }
  seg.validate();
  depth.validate();
}

SegmentationMap resize_segmentation(const SegmentationMap& seg, int target) {
  check_resolution(target, target, "target resolution");
  if (target > seg.height() || seg.height() % target != 0) {
    throw Error(ErrorKind::invalid_resolution,
                "cannot resize " + dims(seg.height(), seg.width()) + " to " + std::to_string(target));
  }
  const int f = seg.height() / target;
  LabelGrid out(target, target);
  for (int y = 0; y < target; ++y) {
    for (int x = 0; x < target; ++x) out(y, x) = seg.labels()(y * f, x * f);
  }
  return {std::move(out), seg.label_set()};
}

template <typename Scalar>
DepthMap<Scalar> resize_depth(const DepthMap<Scalar>& depth, int target) {
  check_resolution(target, target, "target resolution");
  if (target > depth.height() || depth.height() % target != 0 || depth.height() != depth.width()) {
    throw Error(ErrorKind::invalid_resolution,
                "cannot resize " + dims(depth.height(), depth.width()) + " to " + std::to_string(target));
  }
  const int f = depth.height() / target;
  if (f == 1) return depth;
  Grid<Scalar> out(target, target);
  for (int y = 0; y < target; ++y) {
    for (int x = 0; x < target; ++x) out(y, x) = depth.values().block(y * f, x * f, f, f).mean();
  }
  return DepthMap<Scalar>(std::move(out));
}

template <typename Scalar>
std::pair<SegmentationMap, DepthMap<Scalar>> resize_condition(const SegmentationMap& seg,
                                                              const DepthMap<Scalar>& depth, int target) {
  if (seg.height() != depth.height() || seg.width() != depth.width()) {
    throw Error(ErrorKind::shape_mismatch, "segmentation and depth sizes differ");
  }
  return {resize_segmentation(seg, target), resize_depth(depth, target)};
}

template <typename Scalar>
nn::Tensor<Scalar> condition_tensor(const std::vector<SegmentationMap>& segs,
                                    const std::vector<DepthMap<Scalar>>* depths) {
  if (segs.empty()) throw Error(ErrorKind::invalid_argument, "no segmentation maps");
  const int L = segs.front().label_count();
  const int h = segs.front().height();
  const int w = segs.front().width();
  if (depths != nullptr && depths->size() != segs.size()) {
    throw Error(ErrorKind::shape_mismatch, "segmentation and depth batch sizes differ");
  }
  const int channels = L + (depths != nullptr ? 1 : 0);
  nn::Tensor<Scalar> out(nn::Shape{static_cast<int>(segs.size()), channels, h, w});
  const auto plane = static_cast<std::ptrdiff_t>(h) * w;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto& s = segs[i];
    if (s.height() != h || s.width() != w || s.label_count() != L) {
      throw Error(ErrorKind::shape_mismatch, "segmentation maps in a batch must share size and label set");
    }
    Scalar* base = out.ptr() + static_cast<std::ptrdiff_t>(i) * out.shape().sample();
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int l = s.labels()(y, x);
        if (l < L) base[l * plane + static_cast<std::ptrdiff_t>(y) * w + x] = Scalar(1);
      }
    }
    if (depths != nullptr) {
      const auto& d = (*depths)[i];
      if (d.height() != h || d.width() != w) throw Error(ErrorKind::shape_mismatch, "depth map size differs");
      std::copy_n(d.values().data(), plane, base + static_cast<std::ptrdiff_t>(L) * plane);
    }
  }
  return out;
}

#define STYLAND_INSTANTIATE_TYPES(S)                                                                       \
  template SegmentationMap SegmentationMap::from_one_hot<S>(const nn::Tensor<S>&, std::vector<std::string>); \
  template nn::Tensor<S> SegmentationMap::one_hot<S>() const;                                              \
  template class DepthMap<S>;                                                                              \
  template class ImageTensor<S>;                                                                           \
  template void validate_pair<S>(const SegmentationMap&, const DepthMap<S>&);                              \
  template DepthMap<S> resize_depth<S>(const DepthMap<S>&, int);                                           \
  template std::pair<SegmentationMap, DepthMap<S>> resize_condition<S>(const SegmentationMap&,             \
                                                                       const DepthMap<S>&, int);           \
  template nn::Tensor<S> condition_tensor<S>(const std::vector<SegmentationMap>&,                          \
                                             const std::vector<DepthMap<S>>*);

STYLAND_INSTANTIATE_TYPES(float)
STYLAND_INSTANTIATE_TYPES(double)

}  // namespace styland
