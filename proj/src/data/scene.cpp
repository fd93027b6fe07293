#include "styland/core/error.hpp"
#include "styland/data/dataset.hpp"
#include "styland/nn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace styland::data {

namespace {

enum Label : std::uint8_t { sky = 0, mountain = 1, tree = 2, grass = 3, earth = 4, water = 5 };

template <std::size_t K>
void sample_noise(nn::Rng& rng, std::array<double, K>& freq, std::array<double, K>& phase, double f0) {
  for (std::size_t k = 0; k < K; ++k) {
    freq[k] = f0 * std::pow(2.0, static_cast<double>(k)) * rng.uniform(0.8, 1.25);
    phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
}

// Octave sum of sinusoids normalized to [0,1].
template <std::size_t K>
double ridge_noise(double u, const std::array<double, K>& freq, const std::array<double, K>& phase) {
  double sum = 0;
  double norm = 0;
  double a = 1;
  for (std::size_t k = 0; k < K; ++k) {
    sum += a * std::sin(2.0 * std::numbers::pi * freq[k] * u + phase[k]);
    norm += a;
    a *= 0.5;
  }
  return 0.5 + 0.5 * sum / norm;
}

std::array<double, 3> color(nn::Rng& rng, std::array<double, 3> lo, std::array<double, 3> hi) {
  return {rng.uniform(lo[0], hi[0]), rng.uniform(lo[1], hi[1]), rng.uniform(lo[2], hi[2])};
}

std::array<double, 3> mix(const std::array<double, 3>& a, const std::array<double, 3>& b, double t) {
  return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

std::array<double, 3> scale(const std::array<double, 3>& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }

void in_range(double v, double lo, double hi, const char* name) {
  if (!(v >= lo && v <= hi)) {
    throw Error(ErrorKind::invalid_argument,
                std::string("scene parameter ") + name + " = " + std::to_string(v) + " outside [" + std::to_string(lo) +
                    ", " + std::to_string(hi) + "]");
  }
}

void in_range(const std::array<double, 3>& c, const char* name) {
  for (double v : c) in_range(v, 0.0, 1.0, name);
}

struct Texture {
  std::array<double, 3> fu{};
  std::array<double, 3> fv{};
  std::array<double, 3> ph{};

  explicit Texture(std::uint64_t seed) {
    nn::Rng rng(seed);
    for (int k = 0; k < 3; ++k) {
      fu[k] = rng.uniform(6.0, 24.0);
      fv[k] = rng.uniform(6.0, 24.0);
      ph[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
  }

  // Smooth pattern in [-1,1].
  [[nodiscard]] double at(double u, double v, int layer) const {
    const auto k = static_cast<std::size_t>(layer % 3);
    return std::sin(2.0 * std::numbers::pi * fu[k] * u + ph[k]) * std::sin(2.0 * std::numbers::pi * fv[k] * v + ph[k] * 0.5);
  }
};

}  // namespace

SceneParams SceneParams::sample(std::uint64_t seed, std::uint64_t index) {
  nn::Rng rng(nn::mix_seed(seed, index));
  SceneParams p;
  p.far_base = rng.uniform(0.38, 0.52);
  p.far_amplitude = rng.uniform(0.08, 0.22);
  p.far_depth = rng.uniform(0.72, 0.88);
  p.near_base = p.far_base + rng.uniform(0.10, 0.18);
  p.near_amplitude = rng.uniform(0.05, 0.14);
  p.near_depth = rng.uniform(0.45, 0.62);
  p.near_is_forest = rng.uniform() < 0.5;
  p.ground_base = p.near_base + rng.uniform(0.08, 0.15);
  p.ground_amplitude = rng.uniform(0.0, 0.05);
  p.ground_depth = rng.uniform(0.28, 0.38);
  p.ground_is_earth = rng.uniform() < 0.4;
  p.water = rng.uniform() < 0.35;
  p.shore = p.ground_base + rng.uniform(0.06, 0.12);
  sample_noise(rng, p.far_freq, p.far_phase, rng.uniform(0.8, 1.6));
  sample_noise(rng, p.near_freq, p.near_phase, rng.uniform(1.2, 2.4));
  sample_noise(rng, p.ground_freq, p.ground_phase, rng.uniform(0.5, 1.5));
  p.sky_top = color(rng, {0.2, 0.4, 0.75}, {0.45, 0.65, 0.95});
  p.sky_bottom = color(rng, {0.7, 0.75, 0.85}, {0.9, 0.92, 1.0});
  p.far_color = color(rng, {0.35, 0.4, 0.5}, {0.5, 0.55, 0.65});
  p.near_color = p.near_is_forest ? color(rng, {0.1, 0.3, 0.1}, {0.25, 0.45, 0.2})
                                  : color(rng, {0.35, 0.3, 0.25}, {0.5, 0.4, 0.35});
  p.ground_color = p.ground_is_earth ? color(rng, {0.5, 0.4, 0.25}, {0.65, 0.5, 0.35})
                                     : color(rng, {0.25, 0.5, 0.15}, {0.45, 0.7, 0.3});
  p.water_color = color(rng, {0.15, 0.3, 0.55}, {0.3, 0.45, 0.7});
  p.haze = rng.uniform(0.3, 0.8);
  p.texture_seed = rng.next_u64();
  return p;
}

void SceneParams::validate() const {
  in_range(far_base, 0.38, 0.52, "far_base");
  in_range(far_amplitude, 0.08, 0.22, "far_amplitude");
  in_range(far_depth, 0.72, 0.88, "far_depth");
  in_range(near_base - far_base, 0.1 - 1e-12, 0.18 + 1e-12, "near_base - far_base");
  in_range(near_amplitude, 0.05, 0.14, "near_amplitude");
  in_range(near_depth, 0.45, 0.62, "near_depth");
  in_range(ground_base - near_base, 0.08 - 1e-12, 0.15 + 1e-12, "ground_base - near_base");
  in_range(ground_amplitude, 0.0, 0.05, "ground_amplitude");
  in_range(ground_depth, 0.28, 0.38, "ground_depth");
  in_range(shore - ground_base, 0.06 - 1e-12, 0.12 + 1e-12, "shore - ground_base");
  in_range(haze, 0.3, 0.8, "haze");
  for (const auto& c : {sky_top, sky_bottom, far_color, near_color, ground_color, water_color}) in_range(c, "color");
}

Triplet generate_scene(const SceneParams& p, int resolution, const std::string& id) {
  p.validate();
  if (!is_power_of_two(resolution) || resolution < 8) {
    throw Error(ErrorKind::invalid_resolution, "scene resolution must be a power of two >= 8");
  }
  const int R = resolution;
  const Texture tex(p.texture_seed);
  LabelGrid labels(R, R);
  Grid<float> depth(R, R);
  nn::Tensor<float> image(nn::Shape{1, 3, R, R});
  for (int x = 0; x < R; ++x) {
    const double u = (x + 0.5) / R;
    const double far_top = p.far_base - p.far_amplitude * ridge_noise(u, p.far_freq, p.far_phase);
    const double near_top = p.near_base - p.near_amplitude * ridge_noise(u, p.near_freq, p.near_phase);
    const double ground_top = p.ground_base - p.ground_amplitude * ridge_noise(u, p.ground_freq, p.ground_phase);
    for (int y = 0; y < R; ++y) {
      const double v = (y + 0.5) / R;
      Label label;
      double d;
      std::array<double, 3> c;
      if (v >= ground_top) {
        const double t = (v - ground_top) / (1.0 - ground_top);
        d = 0.03 + (p.ground_depth - 0.03) * (1.0 - t) * (1.0 - t);
        if (p.water && v < p.shore) {
          label = water;
          c = mix(p.water_color, p.sky_bottom, 0.3 + 0.1 * tex.at(u * 0.5, v * 4.0, 3));
        } else {
          label = p.ground_is_earth ? earth : grass;
          c = scale(p.ground_color, 0.9 + 0.1 * tex.at(u, v, 2) + 0.15 * t);
        }
      } else if (v >= near_top) {
        label = p.near_is_forest ? tree : mountain;
        const double t = std::min(1.0, (v - near_top) / 0.3);
        d = p.near_depth - 0.05 * t;
        c = scale(p.near_color, 0.85 + 0.12 * tex.at(u, v, 1) + 0.1 * t);
      } else if (v >= far_top) {
        label = mountain;
        const double t = std::min(1.0, (v - far_top) / 0.3);
        d = p.far_depth - 0.05 * t;
        c = scale(p.far_color, 0.9 + 0.08 * tex.at(u, v, 0) - 0.1 * t);
      } else {
        label = sky;
        d = 1.0;
        c = mix(p.sky_top, p.sky_bottom, std::min(1.0, v / p.far_base));
      }
      if (label != sky) c = mix(c, p.sky_bottom, p.haze * d);
      labels(y, x) = label;
      depth(y, x) = static_cast<float>(d);
      for (int ch = 0; ch < 3; ++ch) {
        image.at(0, ch, y, x) = static_cast<float>(2.0 * std::clamp(c[static_cast<std::size_t>(ch)], 0.0, 1.0) - 1.0);
      }
    }
  }
  return Triplet{ImageTensor<float>(std::move(image)), SegmentationMap(std::move(labels), default_label_set()),
                 DepthMap<float>(std::move(depth)), id};
}

}  // namespace styland::data
