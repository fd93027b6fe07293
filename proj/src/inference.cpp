#include "styland/inference.hpp"

#include "styland/depth_ops.hpp"
#include "styland/nn/rng.hpp"

namespace styland::inference {

SampleSeeds sample_seeds(std::uint64_t seed, int index) {
  const auto i = static_cast<std::uint64_t>(index);
  return {nn::mix_seed(seed, 2 * i), nn::mix_seed(seed, 2 * i + 1)};
}

namespace {

void require_count(int n, const char* what) {
  if (n < 1) throw Error(ErrorKind::invalid_argument, std::string(what) + " must be >= 1");
}

}  // namespace

std::vector<DepthMap<float>> phase1_sample_depths(const GeneratorWeights<float>& s2d, const SegmentationMap& seg, int n,
                                                  std::uint64_t seed) {
  require_count(n, "depth count");
  if (s2d.config.mode != Mode::s2d) throw Error(ErrorKind::invalid_argument, "phase 1 needs S2D weights");
  std::vector<DepthMap<float>> out;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_seeds(seed, i);
    out.push_back(generate_depth(s2d, seg, sample_z<float>(s2d.config, 1, s.z), s.noise));
  }
  return out;
}

std::vector<ImageTensor<float>> phase2_sample_images(const GeneratorWeights<float>& image_weights,
                                                     const SegmentationMap& seg, const DepthMap<float>* depth, int n,
                                                     std::uint64_t seed) {
  require_count(n, "image count");
  std::vector<ImageTensor<float>> out;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_seeds(seed, i);
    out.push_back(generate_image(image_weights, seg, depth, sample_z<float>(image_weights.config, 1, s.z), s.noise));
  }
  return out;
}

DepthEdit parse_edit(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
    throw Error(ErrorKind::invalid_argument, "edit '" + text + "' is not label:delta");
  }
  DepthEdit e;
  e.label = text.substr(0, colon);
  const auto num = text.substr(colon + 1);
  std::size_t used = 0;
  try {
    e.delta = std::stod(num, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != num.size()) throw Error(ErrorKind::invalid_argument, "edit '" + text + "' has a malformed delta");
  return e;
}

DepthMap<float> apply_edits(const DepthMap<float>& depth, const SegmentationMap& seg, const std::vector<DepthEdit>& edits) {
  DepthMap<float> d = depth;
  for (std::size_t i = 0; i < edits.size(); ++i) {
    try {
      d = shift_segment_depth(d, seg, edits[i].label, edits[i].delta);
    } catch (const Error& e) {
      throw EditRejected(static_cast<int>(i), e);
    }
  }
  return d;
}

TwoPhaseResult two_phase(const GeneratorWeights<float>& s2d, const GeneratorWeights<float>& sd2i,
                         const SegmentationMap& seg, int n_depths, int choice, const std::vector<DepthEdit>& edits,
                         int n_images, std::uint64_t seed) {
  if (choice < 0 || choice >= n_depths) {
    throw Error(ErrorKind::out_of_range, "depth choice " + std::to_string(choice) + " outside [0, " +
                                             std::to_string(n_depths) + ")");
  }
  TwoPhaseResult r;
  r.candidates = phase1_sample_depths(s2d, seg, n_depths, seed);
  r.depth = apply_edits(r.candidates[static_cast<std::size_t>(choice)], seg, edits);
  r.images = phase2_sample_images(sd2i, seg, &r.depth, n_images, seed);
  return r;
}

}  // namespace styland::inference
