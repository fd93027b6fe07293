#include "doctest.h"

#include "styland/core/error.hpp"
#include "styland/data/dataset.hpp"
#include "styland/depth_ops.hpp"
#include "styland/io/png.hpp"

#include <chrono>
#include <filesystem>

using namespace styland;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "styland_test_data" / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("scenes are deterministic and ordered by depth") {
  const auto p = data::SceneParams::sample(7, 3);
  const auto a = data::generate_scene(p, 64);
  const auto b = data::generate_scene(data::SceneParams::sample(7, 3), 64);
  CHECK(a.seg == b.seg);
  CHECK(a.depth == b.depth);
  CHECK((a.image.tensor().data() == b.image.tensor().data()).all());
  CHECK_FALSE(data::generate_scene(data::SceneParams::sample(7, 4), 64).depth == a.depth);

  for (int i = 0; i < 40; ++i) {
    const auto t = data::generate_scene(data::SceneParams::sample(11, static_cast<std::uint64_t>(i)), 64);
    validate_pair(t.seg, t.depth);
    t.image.validate();
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        if (t.seg.label_at(y, x) == 0) REQUIRE(t.depth(y, x) == 1.0f);
      }
    }
    const auto means = segment_mean_depth(t.depth, t.seg);
    REQUIRE(means.count(0));
    REQUIRE(means.count(1));
    const double fg = means.count(3) ? means.at(3) : means.at(4);
    CHECK(means.at(0) > means.at(1));
    CHECK(means.at(1) > fg);
    if (means.count(2)) CHECK(means.at(2) < means.at(1) + 1e-9);
  }
}

TEST_CASE("far ridge lies behind near ridge at every column") {
  auto p = data::SceneParams::sample(5, 0);
  p.near_is_forest = true;
  p.water = false;
  const auto t = data::generate_scene(p, 32);
  for (int x = 0; x < 32; ++x) {
    double far = -1;
    double near = 2;
    for (int y = 0; y < 32; ++y) {
      if (t.seg.label_at(y, x) == 1) far = std::max(far, static_cast<double>(t.depth(y, x)));
      if (t.seg.label_at(y, x) == 2) near = std::min(near, static_cast<double>(t.depth(y, x)));
    }
    if (far >= 0 && near <= 1) CHECK(near < far);
  }
}

TEST_CASE("scene parameters are range checked") {
  auto p = data::SceneParams::sample(1, 1);
  p.haze = 2.0;
  CHECK_THROWS_AS(data::generate_scene(p, 32), Error);
  CHECK_THROWS_AS(data::generate_scene(data::SceneParams::sample(1, 1), 48), Error);
}

TEST_CASE("dataset build writes the layout and is idempotent") {
  const auto dir = fresh_dir("build");
  const auto m = data::build_dataset(3, 8, 32, dir);
  CHECK(m.ids.size() == 8);
  CHECK(m.label_set == default_label_set());
  int pngs = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) pngs += e.path().extension() == ".png";
  CHECK(pngs == 24);

  std::vector<io::Bytes> before;
  std::vector<fs::file_time_type> stamps;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    before.push_back(io::read_file(e.path()));
    stamps.push_back(fs::last_write_time(e.path()));
  }
  data::build_dataset(3, 8, 32, dir);
  std::size_t k = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    CHECK(io::read_file(e.path()) == before[k]);
    CHECK(fs::last_write_time(e.path()) == stamps[k]);
    ++k;
  }
  CHECK(k == before.size());
  CHECK(data::read_manifest(dir).label_set == default_label_set());
}

TEST_CASE("load round trip stays within png quantization") {
  const auto dir = fresh_dir("roundtrip");
  data::build_dataset(21, 4, 32, dir);
  const auto loaded = data::load_dataset(dir);
  REQUIRE(loaded.size() == 4);
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    const auto ref = data::generate_scene(data::SceneParams::sample(21, i), 32, data::scene_id(i));
    CHECK(loaded[i].id == ref.id);
    CHECK(loaded[i].seg == ref.seg);
    CHECK((loaded[i].depth.values() - ref.depth.values()).abs().maxCoeff() <= 1.0f / 65535.0f);
    CHECK((loaded[i].image.tensor().data() - ref.image.tensor().data()).abs().maxCoeff() <= 1.0f / 255.0f + 1e-6f);
  }
}

TEST_CASE("load errors name the missing piece") {
  const auto empty = fresh_dir("empty");
  fs::create_directories(empty);
  try {
    (void)data::load_dataset(empty);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("missing manifest") != std::string::npos);
  }
  const auto dir = fresh_dir("broken");
  data::build_dataset(2, 2, 16, dir);
  fs::remove(dir / "depth" / "scene_00001.png");
  try {
    (void)data::load_dataset(dir);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("scene_00001.png") != std::string::npos);
  }
  io::write_file(dir / "depth" / "scene_00001.png", io::Bytes{0, 1, 2});
  CHECK_THROWS_AS(data::load_dataset(dir), Error);
}

TEST_CASE("shuffling and batching are seeded") {
  CHECK(data::shuffled_order(10, 4, 0) == data::shuffled_order(10, 4, 0));
  CHECK(data::shuffled_order(10, 4, 0) != data::shuffled_order(10, 4, 1));
  auto sorted = data::shuffled_order(10, 4, 2);
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 10; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);

  std::vector<data::Triplet> items;
  for (int i = 0; i < 5; ++i) items.push_back(data::generate_scene(data::SceneParams::sample(1, static_cast<std::uint64_t>(i)), 16));
  const data::BatchSampler sampler(items, 2, Mode::sd2i, 9);
  // step 2 straddles epochs 0 and 1
  const auto e0 = data::shuffled_order(5, 9, 0);
  const auto e1 = data::shuffled_order(5, 9, 1);
  CHECK(sampler.indices(2) == std::vector<int>{e0[4], e1[0]});

  const auto b = sampler.batch(0);
  CHECK(b.real.shape() == nn::Shape{2, 3, 16, 16});
  CHECK(b.condition.shape() == nn::Shape{2, 8, 16, 16});
  const auto d = data::make_batch(items, {3}, Mode::s2d);
  CHECK(d.real.shape() == nn::Shape{1, 1, 16, 16});
  CHECK(d.real.at(0, 0, 0, 0) == items[3].depth(0, 0));
  CHECK(d.condition.shape().c == 7);

  data::Prefetcher pre(sampler);
  for (long s = 0; s < 4; ++s) {
    const auto got = pre.next(s);
    CHECK((got.real.data() == sampler.batch(s).real.data()).all());
  }
  CHECK((pre.next(9).real.data() == sampler.batch(9).real.data()).all());
}

TEST_CASE("48-scene desk dataset builds quickly") {
  const auto dir = fresh_dir("desk");
  const auto t0 = std::chrono::steady_clock::now();
  data::build_dataset(1, 48, 64, dir);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  MESSAGE("48 scenes at 64x64 in " << secs << " s");
  CHECK(secs < 60.0);
}
