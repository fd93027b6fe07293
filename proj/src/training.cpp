#include "styland/training.hpp"

#include "styland/core/error.hpp"
#include "styland/nn/ops.hpp"
#include "styland/nn/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace styland {

using nn::Graph;
using nn::Shape;
using nn::Tensor;
using nn::Var;

namespace {

enum Stream : std::uint64_t { kDFakeZ = 0, kDFakeNoise, kGFakeZ, kGFakeNoise, kRecNoise, kStreams };

std::uint64_t step_seed(std::uint64_t seed, long step, Stream s) {
  return nn::mix_seed(seed, static_cast<std::uint64_t>(step) * kStreams + s);
}

double softplus(double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

void require_finite(double v, const char* term, long step) {
  if (!std::isfinite(v)) {
    throw Error(ErrorKind::non_finite, std::string("non-finite ") + term + " at step " + std::to_string(step));
  }
}

template <typename Scalar>
void require_finite(const nn::Gradients<Scalar>& grads, const char* term, long step) {
  for (const auto& g : grads) {
    if (!g.all_finite()) {
      throw Error(ErrorKind::non_finite, std::string("non-finite gradient of ") + term + " at step " + std::to_string(step));
    }
  }
}

template <typename Scalar>
nn::Gradients<Scalar> discriminator_param_grads(const DiscriminatorWeights<Scalar>& d, const Tensor<Scalar>& x,
                                                const Tensor<Scalar>& cond) {
  Graph<Scalar> g;
  g.backward(nn::sum(discriminate(g, d, g.constant(x), g.constant(cond))));
  return g.param_grads(d.params);
}

nn::AdamSettings adam_settings(const OptimizerSettings& o) { return {o.lr, o.beta1, o.beta2, o.eps}; }

}  // namespace

template <typename Scalar>
void TrainingBatch<Scalar>::validate(const ModelConfig& config) const {
  const int r = config.output_resolution;
  if (real.c() != config.output_channels() || real.h() != r || real.w() != r || real.n() < 1) {
    throw Error(ErrorKind::shape_mismatch, "training samples " + nn::to_string(real.shape()) + " do not match config");
  }
  if (condition.shape() != Shape{real.n(), config.condition_channels(), r, r}) {
    throw Error(ErrorKind::shape_mismatch, "training condition " + nn::to_string(condition.shape()) +
                                               " does not match samples " + nn::to_string(real.shape()));
  }
  if (!real.all_finite() || !condition.all_finite()) throw Error(ErrorKind::non_finite, "training batch has non-finite values");
  const Scalar lo = config.mode == Mode::s2d ? Scalar(0) : Scalar(-1);
  if (real.data().minCoeff() < lo || real.data().maxCoeff() > Scalar(1)) {
    throw Error(ErrorKind::out_of_range, "training samples outside [" + std::to_string(static_cast<int>(lo)) + ",1]");
  }
}

bool LossReport::all_finite() const { return first_non_finite().empty(); }

std::string LossReport::first_non_finite() const {
  const std::pair<const char*, double> fields[] = {{"adv_g", adv_g},
                                                   {"adv_d", adv_d},
                                                   {"r1", r1},
                                                   {"perceptual", perceptual},
                                                   {"domain_guided", domain_guided},
                                                   {"reconstruction", reconstruction},
                                                   {"reconstruction_l1", reconstruction_l1},
                                                   {"total_g", total_g},
                                                   {"total_d", total_d}};
  for (const auto& [name, v] : fields) {
    if (!std::isfinite(v)) return name;
  }
  return {};
}

template <typename Scalar>
TrainState<Scalar> TrainState<Scalar>::create(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  TrainState s;
  s.config = config;
  s.config.init_seed = seed;
  s.seed = seed;
  s.generator = GeneratorWeights<Scalar>::init(config, nn::mix_seed(seed, 101));
  s.discriminator = DiscriminatorWeights<Scalar>::init(config, nn::mix_seed(seed, 102));
  s.encoder = EncoderWeights<Scalar>::init(config, nn::mix_seed(seed, 103));
  const auto opt = adam_settings(config.optimizer);
  s.generator_opt = nn::Adam<Scalar>(s.generator.params, opt);
  s.encoder_opt = nn::Adam<Scalar>(s.encoder.params, opt);
  s.discriminator_opt = nn::Adam<Scalar>(s.discriminator.params, opt);
  s.extractor = FeatureExtractor<Scalar>::random();
  return s;
}

// --- losses -----------------------------------------------------------------

std::pair<double, double> adversarial_losses(double real_logit, double fake_logit) {
  if (!std::isfinite(real_logit) || !std::isfinite(fake_logit)) {
    throw Error(ErrorKind::non_finite, "adversarial_losses: non-finite logit");
  }
  return {softplus(-fake_logit), softplus(-real_logit) + softplus(fake_logit)};
}

template <typename Scalar>
Var<Scalar> generator_adversarial_loss(Var<Scalar> fake_logits) {
  return nn::mean(nn::softplus(nn::scale(fake_logits, Scalar(-1))));
}

template <typename Scalar>
Var<Scalar> discriminator_adversarial_loss(Var<Scalar> real_logits, Var<Scalar> fake_logits) {
  return nn::add(nn::mean(nn::softplus(nn::scale(real_logits, Scalar(-1)))), nn::mean(nn::softplus(fake_logits)));
}

template <typename Scalar>
Scalar r1_penalty(const DiscriminateFn<Scalar>& fn, const Tensor<Scalar>& real, double gamma) {
  Graph<Scalar> g;
  const auto x = g.variable(real);
  g.backward(nn::sum(fn(g, x)));
  const auto grad = g.grad(x);
  return static_cast<Scalar>(gamma / 2 * static_cast<double>(grad.data().square().sum()) / real.n());
}

template <typename Scalar>
R1Result<Scalar> r1_penalty(const DiscriminatorWeights<Scalar>& d, const Tensor<Scalar>& real,
                            const Tensor<Scalar>& condition, double gamma, bool weight_grads) {
  Graph<Scalar> g;
  g.freeze(d.params);
  const auto x = g.variable(real);
  g.backward(nn::sum(discriminate(g, d, x, g.constant(condition))));
  const Tensor<Scalar> grad = g.grad(x);
  const int batch = real.n();
  R1Result<Scalar> out;
  out.value = static_cast<Scalar>(gamma / 2 * static_cast<double>(grad.data().square().sum()) / batch);
  if (!weight_grads) return out;

  const Scalar peak = grad.data().abs().maxCoeff();
  if (!(peak > 0)) {
    for (const auto& p : d.params) out.weight_grads.emplace_back(p.value.shape());
    return out;
  }
  const Scalar h = std::cbrt(std::numeric_limits<Scalar>::epsilon()) * std::max(Scalar(1), real.data().abs().maxCoeff());
  const Scalar eps = h / peak;
  Tensor<Scalar> plus = real;
  Tensor<Scalar> minus = real;
  plus.data() += eps * grad.data();
  minus.data() -= eps * grad.data();
  const auto gp = discriminator_param_grads(d, plus, condition);
  const auto gm = discriminator_param_grads(d, minus, condition);
  const auto factor = static_cast<Scalar>(gamma / batch) / (2 * eps);
  for (std::size_t i = 0; i < gp.size(); ++i) {
    Tensor<Scalar> t(gp[i].shape());
    t.data() = (gp[i].data() - gm[i].data()) * factor;
    out.weight_grads.push_back(std::move(t));
  }
  return out;
}

template <typename Scalar>
Var<Scalar> domain_guided_loss(Graph<Scalar>& g, const DiscriminatorWeights<Scalar>& d, Var<Scalar> x_rec,
                               Var<Scalar> condition) {
  return generator_adversarial_loss(discriminate(g, d, x_rec, condition));
}

template <typename Scalar>
ReconstructionTerms<Scalar> reconstruction_loss(Graph<Scalar>& g, const FeatureExtractor<Scalar>& extractor, Var<Scalar> x,
                                                Var<Scalar> x_rec) {
  if (x.shape() != x_rec.shape()) {
    throw Error(ErrorKind::shape_mismatch,
                "reconstruction " + nn::to_string(x_rec.shape()) + " vs target " + nn::to_string(x.shape()));
  }
  ReconstructionTerms<Scalar> t;
  t.l1 = nn::mean_abs_diff(x, x_rec);
  t.perceptual = perceptual_loss(g, extractor, x, x_rec);
  t.total = nn::add(t.l1, t.perceptual);
  return t;
}

template <typename Scalar>
Var<Scalar> reconstruct(Graph<Scalar>& g, const GeneratorWeights<Scalar>& gen, const EncoderWeights<Scalar>& enc,
                        Var<Scalar> x, const NoiseSpec<Scalar>& noise) {
  return synthesize(g, gen, encode(g, enc, x), noise);
}

template <typename Scalar>
Tensor<Scalar> reconstruct(const GeneratorWeights<Scalar>& gen, const EncoderWeights<Scalar>& enc, const Tensor<Scalar>& x) {
  Graph<Scalar> g(false);
  return reconstruct(g, gen, enc, g.constant(x), NoiseSpec<Scalar>::zeros(gen.config, x.n())).value();
}

// --- steps ------------------------------------------------------------------

template <typename Scalar>
void discriminator_step(TrainState<Scalar>& state, const TrainingBatch<Scalar>& batch, LossReport& report) {
  const auto& cfg = state.config;
  const int n = batch.size();
  const long step = state.step;

  Tensor<Scalar> fake;
  {
    Graph<Scalar> g(false);
    fake = generate(g, state.generator, g.constant(batch.condition),
                    g.constant(sample_z<Scalar>(cfg, n, step_seed(state.seed, step, kDFakeZ))),
                    NoiseSpec<Scalar>::from_seed(cfg, n, step_seed(state.seed, step, kDFakeNoise)))
               .value();
  }
  Graph<Scalar> g;
  const auto cond = g.constant(batch.condition);
  const auto loss = discriminator_adversarial_loss(discriminate(g, state.discriminator, g.constant(batch.real), cond),
                                                   discriminate(g, state.discriminator, g.constant(fake), cond));
  report.adv_d = static_cast<double>(loss.value().item());
  require_finite(report.adv_d, "adv_d", step);
  g.backward(loss);
  auto grads = g.param_grads(state.discriminator.params);
  report.total_d = report.adv_d;

  const int interval = cfg.loss.r1_interval;
  report.r1_applied = cfg.loss.r1_gamma > 0 && step % interval == 0;
  if (report.r1_applied) {
    const auto r1 = r1_penalty(state.discriminator, batch.real, batch.condition, cfg.loss.r1_gamma, true);
    state.last_r1 = static_cast<double>(r1.value);
    require_finite(state.last_r1, "r1", step);
    for (std::size_t i = 0; i < grads.size(); ++i) grads[i].data() += static_cast<Scalar>(interval) * r1.weight_grads[i].data();
    report.total_d += interval * state.last_r1;
  }
  report.r1 = state.last_r1;
  require_finite(report.total_d, "total_d", step);
  require_finite(grads, "total_d", step);
  state.discriminator_opt.step(state.discriminator.params, grads);
}

template <typename Scalar>
void generator_step(TrainState<Scalar>& state, const TrainingBatch<Scalar>& batch, LossReport& report) {
  const auto& cfg = state.config;
  const auto& w = cfg.loss;
  const int n = batch.size();
  const long step = state.step;

  Graph<Scalar> g;
  g.freeze(state.discriminator.params);
  const auto cond = g.constant(batch.condition);
  const auto real = g.constant(batch.real);

  const auto fake = generate(g, state.generator, cond, g.constant(sample_z<Scalar>(cfg, n, step_seed(state.seed, step, kGFakeZ))),
                             NoiseSpec<Scalar>::from_seed(cfg, n, step_seed(state.seed, step, kGFakeNoise)));
  const auto adv = generator_adversarial_loss(discriminate(g, state.discriminator, fake, cond));
  const auto x_rec = reconstruct(g, state.generator, state.encoder, real,
                                 NoiseSpec<Scalar>::from_seed(cfg, n, step_seed(state.seed, step, kRecNoise)));
  const auto rec = reconstruction_loss(g, state.extractor, real, x_rec);
  const auto domain = domain_guided_loss(g, state.discriminator, x_rec, cond);

  report.adv_g = static_cast<double>(adv.value().item());
  report.reconstruction_l1 = static_cast<double>(rec.l1.value().item());
  report.perceptual = static_cast<double>(rec.perceptual.value().item());
  report.reconstruction = static_cast<double>(rec.total.value().item());
  report.domain_guided = static_cast<double>(domain.value().item());
  require_finite(report.adv_g, "adv_g", step);
  require_finite(report.perceptual, "perceptual", step);
  require_finite(report.reconstruction, "reconstruction", step);
  require_finite(report.domain_guided, "domain_guided", step);

  const auto total = nn::add(nn::add(nn::scale(adv, static_cast<Scalar>(w.adversarial)),
                                     nn::scale(rec.perceptual, static_cast<Scalar>(w.perceptual))),
                             nn::add(nn::scale(domain, static_cast<Scalar>(w.domain_guided)),
                                     nn::scale(rec.total, static_cast<Scalar>(w.reconstruction))));
  report.total_g = static_cast<double>(total.value().item());
  require_finite(report.total_g, "total_g", step);
  g.backward(total);
  const auto g_grads = g.param_grads(state.generator.params);
  const auto e_grads = g.param_grads(state.encoder.params);
  require_finite(g_grads, "total_g (generator)", step);
  require_finite(e_grads, "total_g (encoder)", step);
  state.generator_opt.step(state.generator.params, g_grads);
  state.encoder_opt.step(state.encoder.params, e_grads);
}

template <typename Scalar>
LossReport train_step(TrainState<Scalar>& state, const TrainingBatch<Scalar>& batch) {
  batch.validate(state.config);
  LossReport report;
  report.step = state.step;
  discriminator_step(state, batch, report);
  generator_step(state, batch, report);
  ++state.step;
  return report;
}

// --- loop and logging ---------------------------------------------------------

LossLog::LossLog(std::ostream& out, bool wall_time) : out_(out), wall_time_(wall_time) { out_ << header(wall_time) << '\n'; }

std::string LossLog::header(bool wall_time) {
  std::string h = "step,adv_g,adv_d,r1,perceptual,domain_guided,reconstruction,reconstruction_l1,total_g,total_d";
  if (wall_time) h += ",wall_time";
  return h;
}

void LossLog::append(const LossReport& r, double seconds) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%ld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", r.step, r.adv_g, r.adv_d, r.r1,
                r.perceptual, r.domain_guided, r.reconstruction, r.reconstruction_l1, r.total_g, r.total_d);
  out_ << buf;
  if (wall_time_) {
    std::snprintf(buf, sizeof buf, ",%.3f", seconds);
    out_ << buf;
  }
  out_ << '\n';
  out_.flush();
}

template <typename Scalar>
void train(TrainState<Scalar>& state, long steps, const TrainLoopHooks<Scalar>& hooks) {
  if (!hooks.next_batch) throw Error(ErrorKind::invalid_argument, "train: no batch source");
  const auto start = std::chrono::steady_clock::now();
  for (long i = 0; i < steps; ++i) {
    const auto report = train_step(state, hooks.next_batch(state.step));
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (hooks.on_report) hooks.on_report(report, seconds);
    if (hooks.on_checkpoint && hooks.checkpoint_every > 0 && state.step % hooks.checkpoint_every == 0) hooks.on_checkpoint(state);
  }
}

#define STYLAND_INSTANTIATE_TRAINING(S)                                                                                \
  template struct TrainingBatch<S>;                                                                                    \
  template struct TrainState<S>;                                                                                       \
  template Var<S> generator_adversarial_loss(Var<S>);                                                                  \
  template Var<S> discriminator_adversarial_loss(Var<S>, Var<S>);                                                      \
  template S r1_penalty(const DiscriminateFn<S>&, const Tensor<S>&, double);                                           \
  template R1Result<S> r1_penalty(const DiscriminatorWeights<S>&, const Tensor<S>&, const Tensor<S>&, double, bool);   \
  template Var<S> domain_guided_loss(Graph<S>&, const DiscriminatorWeights<S>&, Var<S>, Var<S>);                       \
  template ReconstructionTerms<S> reconstruction_loss(Graph<S>&, const FeatureExtractor<S>&, Var<S>, Var<S>);          \
  template Var<S> reconstruct(Graph<S>&, const GeneratorWeights<S>&, const EncoderWeights<S>&, Var<S>,                 \
                              const NoiseSpec<S>&);                                                                    \
  template Tensor<S> reconstruct(const GeneratorWeights<S>&, const EncoderWeights<S>&, const Tensor<S>&);              \
  template void discriminator_step(TrainState<S>&, const TrainingBatch<S>&, LossReport&);                              \
  template void generator_step(TrainState<S>&, const TrainingBatch<S>&, LossReport&);                                  \
  template LossReport train_step(TrainState<S>&, const TrainingBatch<S>&);                                             \
  template void train(TrainState<S>&, long, const TrainLoopHooks<S>&);

STYLAND_INSTANTIATE_TRAINING(float)
STYLAND_INSTANTIATE_TRAINING(double)

}  // namespace styland
