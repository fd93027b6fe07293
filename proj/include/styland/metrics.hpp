#pragma once

#include "styland/core/types.hpp"
#include "styland/data/dataset.hpp"
#include "styland/features.hpp"
#include "styland/generator.hpp"

#include <Eigen/Dense>

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace styland::metrics {

/// ‖μ1−μ2‖² + Tr(Σ1 + Σ2 − 2(Σ1Σ2)^{1/2}). Eigenvalues below −1e-8 (scaled by
/// the largest magnitude) raise Error(invalid_argument); smaller negatives are
/// clipped to zero.
double frechet_distance(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1, const Eigen::VectorXd& mu2,
                        const Eigen::MatrixXd& cov2);

struct Gaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double shrinkage = 0;  // weight on the scaled identity target
};

/// Sample moments of the rows of `features`. With n <= d the covariance is
/// rank deficient and is shrunk toward (tr Σ / d)·I with weight d / (n + d).
Gaussian feature_gaussian(const nn::RowMatrix<double>& features);

/// Stacks equal-sized tensors along the batch axis.
nn::Tensor<float> stack(const std::vector<nn::Tensor<float>>& items);

/// (N, C, H, W) sets; extractor features are computed in chunks.
nn::RowMatrix<double> extract(const FeatureExtractor<float>& extractor, const nn::Tensor<float>& x);
double fid(const nn::Tensor<float>& real, const nn::Tensor<float>& fake, const FeatureExtractor<float>& extractor);

/// Mean perceptual distance over all unordered pairs.
double mean_pairwise_distance(const std::vector<nn::Tensor<float>>& samples, const FeatureExtractor<float>& extractor);

/// k samples for one condition pair, drawn as in the inference pipeline.
/// S2D samples are compared as depth maps mapped to [-1,1].
double diversity_lpips(const GeneratorWeights<float>& weights, const SegmentationMap& seg, const DepthMap<float>* depth,
                       int k, std::uint64_t seed, const FeatureExtractor<float>& extractor);

/// RMS difference on the 0–255 scale.
double depth_rmse(const DepthMap<float>& ref, const DepthMap<float>& est);

/// Per-pixel linear depth probe on local color statistics, fitted by ridge
/// least squares on real (image, depth) pairs. Stands in for a monocular
/// depth estimator when scoring synthesized images.
class DepthReadout {
 public:
  static constexpr int kFeatures = 16;

  static DepthReadout fit(const std::vector<data::Triplet>& items, double ridge = 1e-3);
  [[nodiscard]] DepthMap<float> predict(const ImageTensor<float>& image) const;
  [[nodiscard]] const Eigen::VectorXd& coefficients() const { return coef_; }

  /// (H*W, kFeatures) design matrix of one image.
  static Eigen::MatrixXd pixel_features(const ImageTensor<float>& image);

 private:
  Eigen::VectorXd coef_;
};

/// Generated counterpart of a test set, index aligned with it.
struct ModelSamples {
  std::vector<ImageTensor<float>> images;  // empty for S2D
  std::vector<DepthMap<float>> depths;     // generated (S2D) or read out
};

struct EvalSettings {
  std::uint64_t seed = 0;
  int diversity_k = 10;
  int diversity_maps = 4;
};

struct EvalReport {
  std::string model;
  std::string mode;
  int test_items = 0;
  double fid = 0;
  double diversity = 0;
  double depth_rmse = 0;
  double order_agreement = 0;  // share of items whose label ranking matches ground truth
  std::string extractor_id;
  std::uint64_t seed = 0;
  int diversity_k = 0;
};

/// FID against the real test images (or depth maps for S2D), mean depth RMSE
/// and order agreement. Diversity is left at 0.
EvalReport evaluate_samples(const std::vector<data::Triplet>& test, const ModelSamples& samples,
                            const FeatureExtractor<float>& extractor, Mode mode);

/// Test item i is generated from seed mix_seed(settings.seed, i). Image models
/// need `readout` to score depth.
EvalReport evaluate_model(const GeneratorWeights<float>& weights, const std::vector<data::Triplet>& test,
                          const FeatureExtractor<float>& extractor, const EvalSettings& settings,
                          const DepthReadout* readout, const std::string& name = "model");

ModelSamples sample_model(const GeneratorWeights<float>& weights, const std::vector<data::Triplet>& test,
                          std::uint64_t seed, const DepthReadout* readout);

void write_report_csv(std::ostream& out, const std::vector<EvalReport>& reports);

}  // namespace styland::metrics
