#include "styland/core/config_io.hpp"
#include "styland/core/types.hpp"
#include "styland/nn/rng.hpp"

#include <doctest.h>

using namespace styland;

namespace {

SegmentationMap random_seg(int size, int labels, std::uint64_t seed) {
  nn::Rng rng(seed);
  LabelGrid g(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) g(y, x) = static_cast<std::uint8_t>(rng.below(static_cast<std::uint64_t>(labels)));
  }
  std::vector<std::string> names;
  for (int i = 0; i < labels; ++i) names.push_back("l" + std::to_string(i));
  return {g, names};
}

DepthMap<double> random_depth(int size, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  nn::Rng rng(seed);
  Grid<double> v(size, size);
  for (int i = 0; i < v.size(); ++i) v.data()[i] = rng.uniform(lo, hi);
  return DepthMap<double>(v);
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::io;
}

}  // namespace

TEST_CASE("validate_pair accepts a well-formed pair") {
  const auto seg = random_seg(64, 7, 1);
  const auto depth = random_depth(64, 2);
  CHECK_NOTHROW(validate_pair(seg, depth));
}

TEST_CASE("validate_pair rejects malformed pairs") {
  const auto seg = random_seg(64, 7, 1);
  CHECK(kind_of([&] { validate_pair(seg, random_depth(32, 2)); }) == ErrorKind::shape_mismatch);

  auto depth = random_depth(64, 3);
  depth.values()(5, 9) = 1.5;
  CHECK(kind_of([&] { validate_pair(seg, depth); }) == ErrorKind::out_of_range);

  auto nan_depth = random_depth(64, 3);
  nan_depth.values()(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK(kind_of([&] { validate_pair(seg, nan_depth); }) == ErrorKind::out_of_range);

  LabelGrid bad = seg.labels();
  bad(3, 3) = 7;
  CHECK(kind_of([&] { validate_pair(SegmentationMap(bad, seg.label_set()), random_depth(64, 4)); }) ==
        ErrorKind::not_one_hot);

  CHECK(kind_of([&] { validate_pair(random_seg(12, 3, 5), random_depth(12, 5)); }) == ErrorKind::invalid_resolution);
  CHECK(kind_of([&] { validate_pair(random_seg(16, 1, 5), random_depth(16, 5)); }) == ErrorKind::invalid_argument);
}

TEST_CASE("one-hot round trip and rejection of non-one-hot tensors") {
  const auto seg = random_seg(16, 4, 9);
  const auto oh = seg.one_hot<float>();
  CHECK(oh.shape() == nn::Shape{1, 4, 16, 16});
  CHECK(SegmentationMap::from_one_hot(oh, seg.label_set()) == seg);
  auto two_hot = oh;
  two_hot.at(0, (seg.label_at(2, 2) + 1) % 4, 2, 2) = 1.0F;
  CHECK(kind_of([&] { SegmentationMap::from_one_hot(two_hot, seg.label_set()); }) == ErrorKind::not_one_hot);
  auto soft = oh;
  soft.at(0, seg.label_at(0, 0), 0, 0) = 0.5F;
  CHECK(kind_of([&] { SegmentationMap::from_one_hot(soft, seg.label_set()); }) == ErrorKind::not_one_hot);
}

TEST_CASE("resize_condition examples") {
  SUBCASE("source resolution is the identity") {
    const auto seg = random_seg(32, 5, 11);
    const auto depth = random_depth(32, 12);
    const auto [s, d] = resize_condition(seg, depth, 32);
    CHECK(s == seg);
    CHECK(d == depth);
  }
  SUBCASE("constant depth stays constant") {
    const DepthMap<double> depth(64, 64, 0.5);
    const auto d = resize_depth(depth, 8);
    CHECK(d.height() == 8);
    CHECK((d.values() == 0.5).all());
  }
  SUBCASE("checkerboard labels match direct subsampling") {
    LabelGrid g(16, 16);
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) g(y, x) = static_cast<std::uint8_t>((x + y) % 2);
    }
    const SegmentationMap seg(g, {"a", "b"});
    const auto r = resize_segmentation(seg, 8);
    CHECK_NOTHROW(r.validate());
    const auto oh = r.one_hot<double>();
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        CHECK(r.label_at(y, x) == g(2 * y, 2 * x));  // direct pixel-subsampling oracle
        CHECK(oh.at(0, 0, y, x) + oh.at(0, 1, y, x) == 1.0);
      }
    }
  }
  SUBCASE("invalid targets") {
    const auto seg = random_seg(32, 3, 1);
    const auto depth = random_depth(32, 1);
    CHECK(kind_of([&] { resize_condition(seg, depth, 12); }) == ErrorKind::invalid_resolution);
    CHECK(kind_of([&] { resize_condition(seg, depth, 4); }) == ErrorKind::invalid_resolution);
    CHECK(kind_of([&] { resize_condition(seg, depth, 64); }) == ErrorKind::invalid_resolution);
  }
}

TEST_CASE("resize properties over random inputs") {
  for (std::uint64_t trial = 0; trial < 40; ++trial) {
    const int size = 8 << (trial % 4);
    const auto seg = random_seg(size, 2 + static_cast<int>(trial % 6), trial);
    const auto depth = random_depth(size, trial + 1000, 0.2, 0.7);
    for (int target = 8; target <= size; target *= 2) {
      const auto [s, d] = resize_condition(seg, depth, target);
      CHECK_NOTHROW(s.validate());  // stays one-hot
      const auto oh = s.one_hot<double>();
      CHECK((oh.data().matrix().sum()) == doctest::Approx(target * target));
      CHECK(d.values().minCoeff() >= depth.values().minCoeff());
      CHECK(d.values().maxCoeff() <= depth.values().maxCoeff());
      const auto [s2, d2] = resize_condition(s, d, target);
      CHECK(s2 == s);
      CHECK(d2 == d);
    }
  }
}

TEST_CASE("model config defaults and shape chain") {
  const auto c = ModelConfig::desk(Mode::sd2i);
  CHECK_NOTHROW(c.validate());
  CHECK(c.base_latent_shape() == nn::Shape{1, 64, 8, 8});
  CHECK(c.optimizer.lr == 0.002);
  CHECK(c.optimizer.beta1 == 0.0);
  CHECK(c.optimizer.beta2 == 0.99);
  CHECK(c.optimizer.batch == 8);
  CHECK(c.layer_resolution(c.layer_count() - 1) == c.output_resolution);
  CHECK(c.condition_channels() == 8);
  CHECK(ModelConfig::desk(Mode::s2d).condition_channels() == 7);
  CHECK(ModelConfig::desk(Mode::s2d).output_channels() == 1);
  const auto f = ModelConfig::full(Mode::sd2i);
  CHECK_NOTHROW(f.validate());
  CHECK(f.layer_count() == 6);

  auto bad = c;
  bad.channels.pop_back();
  bad.critic_channels.pop_back();
  CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::invalid_argument);
}

TEST_CASE("model config JSON round trip") {
  auto c = ModelConfig::desk(Mode::s2d);
  c.loss.r1_gamma = 3.5;
  c.optimizer.batch = 4;
  const auto back = model_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(kind_of([] { model_config_from_json({{"bogus", 1}}); }) == ErrorKind::format);
}

TEST_CASE("config for a given resolution") {
  CHECK(to_json(ModelConfig::for_resolution(Mode::s2d, 64)) == to_json(ModelConfig::desk(Mode::s2d)));
  CHECK(to_json(ModelConfig::for_resolution(Mode::sd2i, 256)) == to_json(ModelConfig::full(Mode::sd2i)));
  for (int r : {8, 16, 32, 128}) {
    const auto c = ModelConfig::for_resolution(Mode::s2i, r);
    CAPTURE(r);
    CHECK_NOTHROW(c.validate());
    CHECK(c.layer_resolution(c.layer_count() - 1) == r);
  }
  CHECK(kind_of([] { ModelConfig::for_resolution(Mode::s2d, 48).validate(); }) != ErrorKind::io);
  const auto j = model_config_from_json({{"mode", "s2d"}, {"output_resolution", 32}});
  CHECK(j.output_resolution == 32);
  CHECK(j.channels.size() == 3);
}
