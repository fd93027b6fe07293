#include "styland/service/service.hpp"

#include "styland/depth_ops.hpp"
#include "styland/nn/rng.hpp"

#include <chrono>
#include <fstream>

namespace styland::service {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeedMask = (std::uint64_t{1} << 53) - 1;

std::int64_t now_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

struct SemaphoreGuard {
  std::counting_semaphore<1024>& s;
  explicit SemaphoreGuard(std::counting_semaphore<1024>& sem) : s(sem) { s.acquire(); }
  ~SemaphoreGuard() { s.release(); }
};

json edits_json(const std::vector<inference::DepthEdit>& edits) {
  json out = json::array();
  for (const auto& e : edits) out.push_back({{"label", e.label}, {"delta", e.delta}});
  return out;
}

json candidate_json(const DepthCandidate& c) {
  return {{"id", c.id},
          {"asset", c.id},
          {"kind", "depth"},
          {"seed", c.seed},
          {"index", c.index},
          {"parent", c.parent.empty() ? json(nullptr) : json(c.parent)},
          {"edits", edits_json(c.edits)}};
}

json image_json(const ImageRecord& r) {
  return {{"id", r.id}, {"asset", r.id}, {"kind", "image"}, {"candidate", r.candidate}, {"seed", r.seed}, {"index", r.index}};
}

std::string prefixed(char prefix, std::uint64_t n) { return std::string(1, prefix) + std::to_string(n); }

DepthMap<float> on_png_grid(const DepthMap<float>& d, io::Bytes& png) {
  png = io::encode_depth(d);
  return io::decode_depth<float>(png);
}

const DepthCandidate& candidate(const Session& s, const std::string& cid) {
  for (const auto& c : s.candidates) {
    if (c.id == cid) return c;
  }
  throw ServiceError(404, "not_found", "unknown depth candidate '" + cid + "' in session " + s.id);
}

}  // namespace

json ServiceError::body() const {
  json e = {{"status", status_}, {"kind", kind_}, {"message", what()}};
  for (const auto& [k, v] : detail_.items()) e[k] = v;
  return {{"error", e}};
}

Service::Service(GeneratorWeights<float> s2d, GeneratorWeights<float> sd2i, ServiceOptions options)
    : s2d_(std::move(s2d)), sd2i_(std::move(sd2i)), options_(std::move(options)), workers_(std::max(1, options_.workers)) {
  if (s2d_.config.mode != Mode::s2d) throw Error(ErrorKind::invalid_argument, "first model must be S2D");
  if (sd2i_.config.mode != Mode::sd2i) throw Error(ErrorKind::invalid_argument, "second model must be SD2I");
  if (s2d_.config.label_set != sd2i_.config.label_set || s2d_.config.output_resolution != sd2i_.config.output_resolution) {
    throw Error(ErrorKind::invalid_argument, "S2D and SD2I models disagree on label set or resolution");
  }
}

json Service::model_info() const {
  json palette = json::array();
  for (const auto& c : io::label_palette(s2d_.config.label_count())) palette.push_back({c[0], c[1], c[2]});
  return {{"resolution", s2d_.config.output_resolution}, {"label_set", s2d_.config.label_set}, {"palette", palette},
          {"max_samples", options_.max_samples}};
}

std::shared_ptr<Session> Service::find(const std::string& sid) {
  std::lock_guard lock(store_mutex_);
  const auto it = sessions_.find(sid);
  if (it == sessions_.end()) throw ServiceError(404, "not_found", "unknown session '" + sid + "'");
  return it->second;
}

void Service::check_count(int n) const {
  if (n < 1 || n > options_.max_samples) {
    throw ServiceError(422, "invalid_argument", "n must be in [1, " + std::to_string(options_.max_samples) + "]");
  }
}

std::uint64_t Service::next_seed(Session& s) {
  return nn::mix_seed(std::hash<std::string>{}(s.id), s.counter++) & kSeedMask;
}

json Service::create_session() {
  auto s = std::make_shared<Session>();
  {
    std::lock_guard lock(store_mutex_);
    do {
      s->id = prefixed('s', ++session_counter_);
    } while (sessions_.count(s->id));
    s->created = s->updated = now_seconds();
    sessions_[s->id] = s;
  }
  persist(*s);
  return {{"session_id", s->id}};
}

json Service::session_info(const std::string& sid) {
  auto s = find(sid);
  std::lock_guard lock(s->mutex);
  json c = json::array();
  for (const auto& x : s->candidates) c.push_back(candidate_json(x));
  json im = json::array();
  for (const auto& x : s->images) im.push_back(image_json(x));
  return {{"session_id", s->id}, {"has_segmentation", s->segmentation.has_value()}, {"candidates", c}, {"images", im},
          {"created", s->created}, {"updated", s->updated}};
}

json Service::upload_segmentation(const std::string& sid, const io::Bytes& png) {
  auto s = find(sid);
  std::lock_guard lock(s->mutex);
  if (!s->candidates.empty()) {
    throw ServiceError(409, "conflict", "session " + sid + " already has depth candidates; start a new session");
  }
  SegmentationMap seg;
  try {
    seg = io::decode_segmentation(png, s2d_.config.label_set);
    seg.validate();
    const int r = s2d_.config.output_resolution;
    if (seg.height() != r || seg.width() != r) {
      throw Error(ErrorKind::shape_mismatch, "segmentation is " + std::to_string(seg.height()) + "x" +
                                                 std::to_string(seg.width()) + ", the model expects " + std::to_string(r) +
                                                 "x" + std::to_string(r));
    }
  } catch (const Error& e) {
    throw ServiceError(422, to_string(e.kind()), std::string("invalid segmentation: ") + e.what());
  }
  s->segmentation = seg;
  s->assets["segmentation"] = io::encode_segmentation(seg);
  s->updated = now_seconds();
  persist(*s);
  json present = json::array();
  for (const auto& [label, mean] : segment_mean_depth(DepthMap<float>(seg.height(), seg.width(), 0.0f), seg)) {
    (void)mean;
    present.push_back(seg.label_set()[static_cast<std::size_t>(label)]);
  }
  return {{"ok", true}, {"asset", "segmentation"}, {"width", seg.width()}, {"height", seg.height()}, {"labels_present", present}};
}

json Service::request_depths(const std::string& sid, int n, std::optional<std::uint64_t> seed) {
  check_count(n);
  auto s = find(sid);
  std::lock_guard lock(s->mutex);
  if (!s->segmentation) throw ServiceError(409, "conflict", "upload a segmentation before requesting depths");
  const auto used = seed ? *seed : next_seed(*s);
  std::vector<DepthMap<float>> maps;
  {
    SemaphoreGuard worker(workers_);
    maps = inference::phase1_sample_depths(s2d_, *s->segmentation, n, used);
  }
  json out = json::array();
  for (int i = 0; i < n; ++i) {
    DepthCandidate c;
    c.id = prefixed('d', ++s->counter);
    io::Bytes png;
    c.depth = on_png_grid(maps[static_cast<std::size_t>(i)], png);
    c.seed = used;
    c.index = i;
    s->assets[c.id] = std::move(png);
    out.push_back(candidate_json(c));
    s->candidates.push_back(std::move(c));
  }
  s->updated = now_seconds();
  persist(*s);
  return {{"seed", used}, {"candidates", out}};
}

json Service::shift_depth(const std::string& sid, const std::string& cid, const std::string& label, double delta) {
  auto s = find(sid);
  std::lock_guard lock(s->mutex);
  const auto& base = candidate(*s, cid);
  DepthMap<float> shifted;
  try {
    shifted = shift_segment_depth(base.depth, *s->segmentation, label, delta);
  } catch (const OrderViolation& e) {
    throw ServiceError(422, "order_violation", e.what(), {{"labels", {e.first(), e.second()}}});
  } catch (const Error& e) {
    throw ServiceError(422, to_string(e.kind()), e.what());
  }
  DepthCandidate c;
  c.id = prefixed('d', ++s->counter);
  io::Bytes png;
  c.depth = on_png_grid(shifted, png);
  c.seed = base.seed;
  c.index = base.index;
  c.parent = base.id;
  c.edits = base.edits;
  c.edits.push_back({label, delta});
  s->assets[c.id] = std::move(png);
  auto desc = candidate_json(c);
  s->candidates.push_back(std::move(c));
  s->updated = now_seconds();
  persist(*s);
  return desc;
}

json Service::request_images(const std::string& sid, const std::string& cid, int n, std::optional<std::uint64_t> seed) {
  check_count(n);
  auto s = find(sid);
  std::lock_guard lock(s->mutex);
  const auto& c = candidate(*s, cid);
  const auto used = seed ? *seed : next_seed(*s);
  std::vector<ImageTensor<float>> images;
  {
    SemaphoreGuard worker(workers_);
    images = inference::phase2_sample_images(sd2i_, *s->segmentation, &c.depth, n, used);
  }
  json out = json::array();
  for (int i = 0; i < n; ++i) {
    ImageRecord r{prefixed('i', ++s->counter), cid, used, i};
    s->assets[r.id] = io::encode_image(images[static_cast<std::size_t>(i)]);
    out.push_back(image_json(r));
    s->images.push_back(std::move(r));
  }
  s->updated = now_seconds();
  persist(*s);
  return {{"seed", used}, {"candidate", cid}, {"images", out}};
}

io::Bytes Service::fetch_asset(const std::string& sid, const std::string& aid) {
  auto s = find(sid);
  std::lock_guard lock(s->mutex);
  const auto it = s->assets.find(aid);
  if (it == s->assets.end()) throw ServiceError(404, "not_found", "unknown asset '" + aid + "' in session " + sid);
  return it->second;
}

void Service::persist(const Session& s) const {
  if (options_.persist_dir.empty()) return;
  const auto dir = options_.persist_dir / s.id;
  fs::create_directories(dir);
  json c = json::array();
  for (const auto& x : s.candidates) c.push_back(candidate_json(x));
  json im = json::array();
  for (const auto& x : s.images) im.push_back(image_json(x));
  json assets = json::array();
  for (const auto& [id, bytes] : s.assets) {
    assets.push_back(id);
    const auto path = dir / (id + ".png");
    if (!fs::exists(path)) io::write_file(path, bytes);
  }
  const json j = {{"session_id", s.id}, {"created", s.created}, {"updated", s.updated}, {"counter", s.counter},
                  {"candidates", c},    {"images", im},         {"assets", assets}};
  const auto text = j.dump(2);
  io::write_file(dir / "session.json", io::Bytes(text.begin(), text.end()));
}

int Service::restore() {
  if (options_.persist_dir.empty() || !fs::exists(options_.persist_dir)) return 0;
  int restored = 0;
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(options_.persist_dir)) {
    if (e.is_directory() && fs::exists(e.path() / "session.json")) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    const auto bytes = io::read_file(dir / "session.json");
    json j;
    try {
      j = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
      throw Error(ErrorKind::format, (dir / "session.json").string() + ": " + e.what());
    }
    auto s = std::make_shared<Session>();
    s->id = j.at("session_id").get<std::string>();
    s->created = j.at("created").get<std::int64_t>();
    s->updated = j.at("updated").get<std::int64_t>();
    s->counter = j.at("counter").get<std::uint64_t>();
    for (const auto& id : j.at("assets")) {
      const auto name = id.get<std::string>();
      s->assets[name] = io::read_file(dir / (name + ".png"));
    }
    if (s->assets.count("segmentation")) {
      s->segmentation = io::decode_segmentation(s->assets.at("segmentation"), s2d_.config.label_set);
    }
    for (const auto& c : j.at("candidates")) {
      DepthCandidate d;
      d.id = c.at("id").get<std::string>();
      d.depth = io::decode_depth<float>(s->assets.at(d.id));
      d.seed = c.at("seed").get<std::uint64_t>();
      d.index = c.at("index").get<int>();
      d.parent = c.at("parent").is_null() ? "" : c.at("parent").get<std::string>();
      for (const auto& e : c.at("edits")) d.edits.push_back({e.at("label").get<std::string>(), e.at("delta").get<double>()});
      s->candidates.push_back(std::move(d));
    }
    for (const auto& r : j.at("images")) {
      s->images.push_back({r.at("id").get<std::string>(), r.at("candidate").get<std::string>(),
                           r.at("seed").get<std::uint64_t>(), r.at("index").get<int>()});
    }
    std::lock_guard lock(store_mutex_);
    const auto num = s->id.size() > 1 ? std::stoull(s->id.substr(1)) : 0;
    session_counter_ = std::max<std::uint64_t>(session_counter_, num);
    sessions_[s->id] = s;
    ++restored;
  }
  return restored;
}

}  // namespace styland::service
