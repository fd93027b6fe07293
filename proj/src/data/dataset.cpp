#include "styland/core/error.hpp"
#include "styland/data/dataset.hpp"
#include "styland/io/png.hpp"
#include "styland/nn/rng.hpp"

#include "json.hpp"

#include <cstdio>
#include <numeric>

namespace styland::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_if_changed(const fs::path& path, const io::Bytes& bytes) {
  std::error_code ec;
  if (fs::exists(path, ec) && fs::file_size(path, ec) == bytes.size() && io::read_file(path) == bytes) return;
  io::write_file(path, bytes);
}

io::Bytes to_bytes(const std::string& text) { return io::Bytes(text.begin(), text.end()); }

}  // namespace

std::string scene_id(std::uint64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%05llu", static_cast<unsigned long long>(index));
  return buf;
}

Manifest build_dataset(std::uint64_t seed, int count, int resolution, const fs::path& out_dir) {
  if (count < 1) throw Error(ErrorKind::invalid_argument, "dataset count must be >= 1");
  std::error_code ec;
  for (const char* sub : {"images", "seg", "depth"}) {
    fs::create_directories(out_dir / sub, ec);
    if (ec) throw Error(ErrorKind::io, "cannot create " + (out_dir / sub).string() + ": " + ec.message());
  }
  Manifest m;
  m.seed = seed;
  m.resolution = resolution;
  m.label_set = default_label_set();
  for (int i = 0; i < count; ++i) {
    const auto id = scene_id(static_cast<std::uint64_t>(i));
    const auto t = generate_scene(SceneParams::sample(seed, static_cast<std::uint64_t>(i)), resolution, id);
    write_if_changed(out_dir / "images" / (id + ".png"), io::encode_image(t.image));
    write_if_changed(out_dir / "seg" / (id + ".png"), io::encode_segmentation(t.seg));
    write_if_changed(out_dir / "depth" / (id + ".png"), io::encode_depth(t.depth));
    m.ids.push_back(id);
  }
  const json j = {{"format", "styland-dataset-v1"},
                  {"seed", m.seed},
                  {"resolution", m.resolution},
                  {"label_set", m.label_set},
                  {"ids", m.ids}};
  write_if_changed(out_dir / "manifest.json", to_bytes(j.dump(2) + "\n"));
  return m;
}

Manifest read_manifest(const fs::path& dir) {
  const auto path = dir / "manifest.json";
  if (!fs::exists(path)) throw Error(ErrorKind::io, "missing manifest: " + path.string());
  const auto bytes = io::read_file(path);
  try {
    const auto j = json::parse(bytes.begin(), bytes.end());
    Manifest m;
    m.seed = j.value("seed", std::uint64_t{0});
    m.resolution = j.value("resolution", 0);
    m.label_set = j.value("label_set", default_label_set());
    m.ids = j.at("ids").get<std::vector<std::string>>();
    if (m.ids.empty()) throw Error(ErrorKind::format, path.string() + ": no ids");
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, path.string() + ": " + e.what());
  }
}

Triplet load_triplet(const fs::path& dir, const std::string& id, const std::vector<std::string>& label_set) {
  Triplet t;
  t.id = id;
  auto load = [&](const char* sub, auto&& decode) {
    const auto path = dir / sub / (id + ".png");
    if (!fs::exists(path)) throw Error(ErrorKind::io, "missing file: " + path.string());
    try {
      decode(io::read_file(path));
    } catch (const Error& e) {
      throw Error(e.kind(), path.string() + ": " + e.what());
    }
  };
  load("images", [&](const io::Bytes& b) { t.image = io::decode_image<float>(b); });
  load("seg", [&](const io::Bytes& b) { t.seg = io::decode_segmentation(b, label_set); });
  load("depth", [&](const io::Bytes& b) { t.depth = io::decode_depth<float>(b); });
  try {
    validate_pair(t.seg, t.depth);
    t.image.validate();
    if (t.image.height() != t.seg.height() || t.image.width() != t.seg.width()) {
      throw Error(ErrorKind::shape_mismatch, "image and segmentation sizes differ");
    }
  } catch (const Error& e) {
    throw Error(e.kind(), "triplet '" + id + "': " + e.what());
  }
  return t;
}

std::vector<Triplet> load_dataset(const fs::path& dir) {
  const auto m = read_manifest(dir);
  std::vector<Triplet> out;
  out.reserve(m.ids.size());
  for (const auto& id : m.ids) out.push_back(load_triplet(dir, id, m.label_set));
  return out;
}

std::vector<int> shuffled_order(int n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  nn::Rng rng(nn::mix_seed(seed, epoch));
  for (int i = n - 1; i > 0; --i) {
    std::swap(order[static_cast<std::size_t>(i)], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);
  }
  return order;
}

TrainingBatch<float> make_batch(const std::vector<Triplet>& items, const std::vector<int>& indices, Mode mode) {
  if (indices.empty()) throw Error(ErrorKind::invalid_argument, "empty batch");
  std::vector<SegmentationMap> segs;
  std::vector<DepthMap<float>> depths;
  for (int i : indices) {
    segs.push_back(items.at(static_cast<std::size_t>(i)).seg);
    depths.push_back(items.at(static_cast<std::size_t>(i)).depth);
  }
  TrainingBatch<float> b;
  b.condition = condition_tensor<float>(segs, mode == Mode::sd2i ? &depths : nullptr);
  const auto& first = items.at(static_cast<std::size_t>(indices.front()));
  const int channels = mode == Mode::s2d ? 1 : 3;
  b.real = nn::Tensor<float>(nn::Shape{static_cast<int>(indices.size()), channels, first.seg.height(), first.seg.width()});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& t = items[static_cast<std::size_t>(indices[k])];
    auto dst = b.real.data().segment(static_cast<Eigen::Index>(k) * b.real.shape().sample(), b.real.shape().sample());
    if (mode == Mode::s2d) {
      dst = Eigen::Map<const Eigen::ArrayXf>(t.depth.values().data(), t.depth.values().size());
    } else {
      if (t.image.tensor().size() != dst.size()) throw Error(ErrorKind::shape_mismatch, "triplet sizes differ in batch");
      dst = t.image.tensor().data();
    }
  }
  return b;
}

BatchSampler::BatchSampler(const std::vector<Triplet>& items, int batch, Mode mode, std::uint64_t seed)
    : items_(items), batch_(batch), mode_(mode), seed_(seed) {
  if (items.empty()) throw Error(ErrorKind::invalid_argument, "empty dataset");
  if (batch < 1) throw Error(ErrorKind::invalid_argument, "batch must be >= 1");
}

std::vector<int> BatchSampler::indices(long step) const {
  const auto n = static_cast<long>(items_.size());
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(batch_));
  long pos = step * batch_;
  std::uint64_t epoch = static_cast<std::uint64_t>(pos / n);
  auto order = shuffled_order(static_cast<int>(n), seed_, epoch);
  for (int k = 0; k < batch_; ++k, ++pos) {
    const auto e = static_cast<std::uint64_t>(pos / n);
    if (e != epoch) {
      epoch = e;
      order = shuffled_order(static_cast<int>(n), seed_, epoch);
    }
    out.push_back(order[static_cast<std::size_t>(pos % n)]);
  }
  return out;
}

TrainingBatch<float> Prefetcher::next(long step) {
  TrainingBatch<float> b;
  if (pending_.valid() && pending_step_ == step) {
    b = pending_.get();
  } else {
    if (pending_.valid()) pending_.wait();
    b = sampler_.batch(step);
  }
  pending_step_ = step + 1;
  pending_ = std::async(std::launch::async, [this, s = step + 1] { return sampler_.batch(s); });
  return b;
}

}  // namespace styland::data
