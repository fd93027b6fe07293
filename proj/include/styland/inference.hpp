#pragma once

#include "styland/core/types.hpp"
#include "styland/depth_ops.hpp"
#include "styland/generator.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace styland::inference {

/// Sample i of a seeded request draws z from mix_seed(seed, 2i) and its noise
/// grids from mix_seed(seed, 2i + 1).
struct SampleSeeds {
  std::uint64_t z = 0;
  std::uint64_t noise = 0;
};
SampleSeeds sample_seeds(std::uint64_t seed, int index);

std::vector<DepthMap<float>> phase1_sample_depths(const GeneratorWeights<float>& s2d, const SegmentationMap& seg, int n,
                                                  std::uint64_t seed);

/// `depth` is required for SD2I weights and ignored for S2I.
std::vector<ImageTensor<float>> phase2_sample_images(const GeneratorWeights<float>& image_weights,
                                                     const SegmentationMap& seg, const DepthMap<float>* depth, int n,
                                                     std::uint64_t seed);

struct DepthEdit {
  std::string label;
  double delta = 0;
};

/// "label:delta", e.g. "sky:+0.05".
DepthEdit parse_edit(const std::string& text);

/// Thrown when an edit of a two-phase request is rejected.
class EditRejected : public Error {
 public:
  EditRejected(int index, const Error& cause)
      : Error(cause.kind(), "edit #" + std::to_string(index) + " rejected: " + cause.message()), index_(index) {
    if (const auto* o = dynamic_cast<const OrderViolation*>(&cause)) pair_ = {o->first(), o->second()};
  }
  [[nodiscard]] int edit_index() const { return index_; }
  /// Flipped label pair when the cause was an order violation.
  [[nodiscard]] const std::pair<std::string, std::string>& flipped() const { return pair_; }

 private:
  int index_;
  std::pair<std::string, std::string> pair_;
};

/// Applies edits in order; each must pass the depth-order check on its own.
DepthMap<float> apply_edits(const DepthMap<float>& depth, const SegmentationMap& seg, const std::vector<DepthEdit>& edits);

struct TwoPhaseResult {
  std::vector<DepthMap<float>> candidates;
  DepthMap<float> depth;  // chosen candidate after edits
  std::vector<ImageTensor<float>> images;
};

/// Phase 1 and phase 2 both use `seed`.
TwoPhaseResult two_phase(const GeneratorWeights<float>& s2d, const GeneratorWeights<float>& sd2i,
                         const SegmentationMap& seg, int n_depths, int choice, const std::vector<DepthEdit>& edits,
                         int n_images, std::uint64_t seed);

}  // namespace styland::inference
