#include "doctest.h"

#include "styland/core/error.hpp"
#include "styland/depth_ops.hpp"
#include "styland/nn/rng.hpp"

#include <sstream>

using namespace styland;

namespace {

const std::vector<std::string> kTwo{"sky", "grass"};

SegmentationMap two_by_two() {
  LabelGrid g(2, 2);
  g << 0, 0, 1, 1;
  return SegmentationMap(g, kTwo);
}

DepthMap<double> hand_depth() {
  Grid<double> v(2, 2);
  v << 0.2, 0.4, 0.6, 0.8;
  return DepthMap<double>(v);
}

}  // namespace

TEST_CASE("segment mean depth hand example") {
  const auto means = segment_mean_depth(hand_depth(), two_by_two());
  REQUIRE(means.size() == 2);
  CHECK(means.at(0) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(means.at(1) == doctest::Approx(0.7).epsilon(1e-15));
  const auto flat = segment_mean_depth(DepthMap<double>(2, 2, 0.5), two_by_two());
  CHECK(flat.at(0) == 0.5);
  CHECK(flat.at(1) == 0.5);
  const SegmentationMap one_label(LabelGrid::Zero(2, 2), {"sky", "grass", "rock"});
  const auto only = segment_mean_depth(DepthMap<double>(2, 2, 0.5), one_label);
  CHECK(only.size() == 1);
  CHECK(only.count(1) == 0);
}

TEST_CASE("depth order") {
  CHECK(depth_order(hand_depth(), two_by_two()) == std::vector<int>{0, 1});
  const SegmentationMap single(LabelGrid::Zero(2, 2), kTwo);
  CHECK(depth_order(hand_depth(), single) == std::vector<int>{0});
  CHECK(depth_order(std::map<int, double>{{3, 0.5}, {1, 0.5}}) == std::vector<int>{1, 3});
  CHECK(depth_order(std::map<int, double>{{0, 0.9}, {2, 0.1}, {1, 0.5}}) == std::vector<int>{2, 1, 0});
}

TEST_CASE("shift hand examples") {
  const auto seg = two_by_two();
  const auto depth = hand_depth();
  SUBCASE("identity") { CHECK(shift_segment_depth(depth, seg, 0, 0.0) == depth); }
  SUBCASE("accepted") {
    const auto out = shift_segment_depth(depth, seg, 0, 0.1);
    const auto means = segment_mean_depth(out, seg);
    CHECK(means.at(0) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(means.at(1) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(out(1, 0) == depth(1, 0));
    CHECK(depth_order(out, seg) == std::vector<int>{0, 1});
  }
  SUBCASE("order violation") {
    try {
      (void)shift_segment_depth(depth, seg, 0, 0.5);
      FAIL("expected an order violation");
    } catch (const OrderViolation& e) {
      CHECK(e.kind() == ErrorKind::order_violation);
      CHECK(e.first() == "sky");
      CHECK(e.second() == "grass");
      const std::string msg = e.what();
      CHECK(msg.find("'sky'") != std::string::npos);
      CHECK(msg.find("'grass'") != std::string::npos);
    }
    CHECK(depth == hand_depth());
  }
  SUBCASE("by name") { CHECK(shift_segment_depth(depth, seg, "sky", 0.1) == shift_segment_depth(depth, seg, 0, 0.1)); }
  SUBCASE("invalid label") {
    CHECK_THROWS_AS(shift_segment_depth(depth, seg, "rock", 0.1), Error);
    const SegmentationMap single(LabelGrid::Zero(2, 2), kTwo);
    CHECK_THROWS_AS(shift_segment_depth(depth, single, 1, 0.1), Error);
    CHECK_THROWS_AS(shift_segment_depth(depth, seg, 0, NAN), Error);
  }
}

TEST_CASE("shifts clamp before the order check") {
  const auto seg = two_by_two();
  // grass pushed beyond 1 clamps to 1, still farther than sky
  const auto out = shift_segment_depth(hand_depth(), seg, 1, 0.5);
  CHECK(out(1, 0) == 1.0);
  CHECK(out(1, 1) == 1.0);
  // sky pulled below 0 clamps to 0
  const auto near = shift_segment_depth(hand_depth(), seg, 0, -0.3);
  CHECK(near(0, 0) == 0.0);
  CHECK(near(0, 1) == doctest::Approx(0.1));
}

TEST_CASE("random shifts stay in range, keep accepted orders and revert bitwise") {
  nn::Rng rng(2024);
  const std::vector<std::string> labels{"a", "b", "c", "d"};
  int accepted = 0;
  int reverted = 0;
  int trial = 0;
  for (; reverted < 1000 && trial < 20000; ++trial) {
    LabelGrid g(8, 8);
    Grid<float> v(8, 8);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        g(y, x) = static_cast<std::uint8_t>(std::min<std::uint64_t>(3, (static_cast<std::uint64_t>(y) * 4 + rng.below(3)) / 8));
        // values and deltas on a 2^-16 grid, where float addition is exact
        v(y, x) = static_cast<float>(rng.below(65537)) / 65536.0f;
      }
    }
    const SegmentationMap seg(g, labels);
    const DepthMap<float> depth(v);
    const auto present = depth_order(depth, seg);
    const int label = present[rng.below(present.size())];
    const double delta = (static_cast<double>(rng.below(2 * 8192 + 1)) - 8192.0) / 65536.0;
    DepthMap<float> shifted;
    try {
      shifted = shift_segment_depth(depth, seg, label, delta);
    } catch (const Error& e) {
      REQUIRE(e.kind() == ErrorKind::order_violation);
      continue;
    }
    ++accepted;
    CHECK(shifted.values().minCoeff() >= 0.0f);
    CHECK(shifted.values().maxCoeff() <= 1.0f);
    CHECK(depth_order(shifted, seg) == present);
    bool clamped = false;
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        if (g(y, x) == label) clamped |= v(y, x) + delta < 0 || v(y, x) + delta > 1;
      }
    }
    if (clamped) continue;
    const auto back = shift_segment_depth(shifted, seg, label, -delta);
    CHECK((back.values().array() == depth.values().array()).all());
    ++reverted;
  }
  CHECK(reverted == 1000);
  CHECK(accepted < trial);
}

TEST_CASE("depth distribution histograms") {
  std::vector<std::pair<SegmentationMap, DepthMap<double>>> data{{two_by_two(), hand_depth()}};
  const auto one = depth_distribution(data, kTwo, 10);
  REQUIRE(one.histograms.size() == 2);
  CHECK(one.histograms[0].total() == 1);
  CHECK(one.histograms[1].total() == 1);
  CHECK(one.histograms[0].counts[3] == 1);
  CHECK(one.histograms[1].counts[7] == 1);

  data.emplace_back(SegmentationMap(LabelGrid::Zero(2, 2), kTwo), DepthMap<double>(2, 2, 1.0));
  const auto two = depth_distribution(data, kTwo, 10);
  CHECK(two.histograms[0].total() == 2);
  CHECK(two.histograms[0].counts[9] == 1);
  CHECK(two.histograms[1].total() == 1);
  CHECK(two.samples[0] == std::vector<double>{segment_mean_depth(hand_depth(), two_by_two()).at(0), 1.0});

  CHECK_THROWS_AS(depth_distribution(std::vector<std::pair<SegmentationMap, DepthMap<double>>>{}, kTwo, 10), Error);

  std::ostringstream csv;
  write_distribution_csv(csv, one);
  const std::string s = csv.str();
  CHECK(s.rfind("label,bin_lo,bin_hi,count\n", 0) == 0);
  CHECK(s.find("sky,0.300000,0.400000,1\n") != std::string::npos);
  CHECK(std::count(s.begin(), s.end(), '\n') == 1 + 2 * 10);
  const auto plot = render_distribution_plot(one, 100, 20);
  CHECK(plot.size() == 100u * 40u * 3u);
}

TEST_CASE("wasserstein-1 distances") {
  Histogram a{0, 1, {1, 0, 0, 0}};
  Histogram b{0, 1, {0, 0, 0, 1}};
  CHECK(wasserstein1(a, a) == 0.0);
  CHECK(wasserstein1(a, b) == doctest::Approx(0.75));
  CHECK(wasserstein1(a, b) == doctest::Approx(wasserstein1(b, a)));
  CHECK(wasserstein1(std::vector<double>{0.1, 0.2}, std::vector<double>{0.1, 0.2}) == 0.0);
  CHECK(wasserstein1(std::vector<double>{0.0}, std::vector<double>{0.3}) == doctest::Approx(0.3));
  CHECK(wasserstein1(std::vector<double>{0.0, 1.0}, std::vector<double>{0.5}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(wasserstein1(a, Histogram{0, 1, {1, 1}}), Error);
}
