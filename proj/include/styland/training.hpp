#pragma once

#include "styland/adversary.hpp"
#include "styland/features.hpp"
#include "styland/generator.hpp"
#include "styland/nn/adam.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>

namespace styland {

/// One training batch: target samples (images in [-1,1], or depth in [0,1]
/// for S2D) and the matching condition tensor.
template <typename Scalar>
struct TrainingBatch {
  nn::Tensor<Scalar> real;       // (N, out, H, W)
  nn::Tensor<Scalar> condition;  // (N, L[+1], H, W)

  void validate(const ModelConfig& config) const;
  [[nodiscard]] int size() const { return real.n(); }
};

struct LossReport {
  long step = 0;
  double adv_g = 0;
  double adv_d = 0;
  double r1 = 0;  // most recent penalty value, unscaled by the lazy interval
  double perceptual = 0;
  double domain_guided = 0;
  double reconstruction = 0;     // L1 + perceptual
  double reconstruction_l1 = 0;
  double total_g = 0;
  double total_d = 0;
  bool r1_applied = false;

  [[nodiscard]] bool all_finite() const;
  /// Name of the first non-finite field, empty if none.
  [[nodiscard]] std::string first_non_finite() const;
};

template <typename Scalar>
struct TrainState {
  ModelConfig config;
  GeneratorWeights<Scalar> generator;
  DiscriminatorWeights<Scalar> discriminator;
  EncoderWeights<Scalar> encoder;
  nn::Adam<Scalar> generator_opt;
  nn::Adam<Scalar> encoder_opt;
  nn::Adam<Scalar> discriminator_opt;
  FeatureExtractor<Scalar> extractor;
  std::uint64_t seed = 0;
  long step = 0;
  double last_r1 = 0;

  /// Fresh weights drawn from `seed`; config.init_seed is ignored.
  static TrainState create(const ModelConfig& config, std::uint64_t seed);
};

// --- losses -----------------------------------------------------------------

/// Non-saturating logistic losses for scalar logits: (softplus(-fake),
/// softplus(-real) + softplus(fake)).
std::pair<double, double> adversarial_losses(double real_logit, double fake_logit);

/// mean softplus(-fake)
template <typename Scalar>
nn::Var<Scalar> generator_adversarial_loss(nn::Var<Scalar> fake_logits);

/// mean softplus(-real) + mean softplus(fake)
template <typename Scalar>
nn::Var<Scalar> discriminator_adversarial_loss(nn::Var<Scalar> real_logits, nn::Var<Scalar> fake_logits);

template <typename Scalar>
using DiscriminateFn = std::function<nn::Var<Scalar>(nn::Graph<Scalar>&, nn::Var<Scalar>)>;

/// (gamma/2) * mean over the batch of |grad_x D(x)|^2. `fn` must treat
/// samples independently.
template <typename Scalar>
Scalar r1_penalty(const DiscriminateFn<Scalar>& fn, const nn::Tensor<Scalar>& real, double gamma);

template <typename Scalar>
struct R1Result {
  Scalar value = 0;
  nn::Gradients<Scalar> weight_grads;  // empty unless requested
};

/// Penalty for the conditional discriminator. With `weight_grads` the
/// gradient of the penalty w.r.t. the discriminator parameters is obtained
/// as a central-difference Hessian-vector product along grad_x D.
template <typename Scalar>
R1Result<Scalar> r1_penalty(const DiscriminatorWeights<Scalar>& d, const nn::Tensor<Scalar>& real,
                            const nn::Tensor<Scalar>& condition, double gamma, bool weight_grads);

/// mean softplus(-D(x_rec, condition))
template <typename Scalar>
nn::Var<Scalar> domain_guided_loss(nn::Graph<Scalar>& g, const DiscriminatorWeights<Scalar>& d, nn::Var<Scalar> x_rec,
                                   nn::Var<Scalar> condition);

template <typename Scalar>
struct ReconstructionTerms {
  nn::Var<Scalar> total;
  nn::Var<Scalar> l1;
  nn::Var<Scalar> perceptual;
};

/// mean|x - x_rec| + perceptual(x, x_rec)
template <typename Scalar>
ReconstructionTerms<Scalar> reconstruction_loss(nn::Graph<Scalar>& g, const FeatureExtractor<Scalar>& extractor,
                                                nn::Var<Scalar> x, nn::Var<Scalar> x_rec);

/// synthesize(E(x)) with the generator's synthesis weights.
template <typename Scalar>
nn::Var<Scalar> reconstruct(nn::Graph<Scalar>& g, const GeneratorWeights<Scalar>& gen, const EncoderWeights<Scalar>& enc,
                            nn::Var<Scalar> x, const NoiseSpec<Scalar>& noise);

template <typename Scalar>
nn::Tensor<Scalar> reconstruct(const GeneratorWeights<Scalar>& gen, const EncoderWeights<Scalar>& enc,
                               const nn::Tensor<Scalar>& x);

// --- steps ------------------------------------------------------------------

/// Discriminator update; fills adv_d, r1, total_d and r1_applied.
template <typename Scalar>
void discriminator_step(TrainState<Scalar>& state, const TrainingBatch<Scalar>& batch, LossReport& report);

/// Generator + encoder update with the discriminator frozen; fills the
/// remaining fields.
template <typename Scalar>
void generator_step(TrainState<Scalar>& state, const TrainingBatch<Scalar>& batch, LossReport& report);

/// One alternating update. Throws Error(non_finite) naming the offending
/// term, leaving the weights of the failing phase untouched.
template <typename Scalar>
LossReport train_step(TrainState<Scalar>& state, const TrainingBatch<Scalar>& batch);

// --- loop and logging ---------------------------------------------------------

class LossLog {
 public:
  LossLog(std::ostream& out, bool wall_time);
  void append(const LossReport& r, double seconds = 0);
  static std::string header(bool wall_time);

 private:
  std::ostream& out_;
  bool wall_time_;
};

template <typename Scalar>
struct TrainLoopHooks {
  std::function<TrainingBatch<Scalar>(long step)> next_batch;
  std::function<void(const LossReport&, double seconds)> on_report;
  std::function<void(const TrainState<Scalar>&)> on_checkpoint;
  long checkpoint_every = 0;
};

/// Runs `steps` train_steps from the current state.
template <typename Scalar>
void train(TrainState<Scalar>& state, long steps, const TrainLoopHooks<Scalar>& hooks);

}  // namespace styland
