#pragma once

#include "styland/generator.hpp"
#include "styland/inference.hpp"
#include "styland/io/png.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <vector>

namespace styland::service {

/// Carries the HTTP status a failure maps to. `detail` is merged into the
/// error body.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, std::string kind, const std::string& message, nlohmann::json detail = nlohmann::json::object())
      : std::runtime_error(message), status_(status), kind_(std::move(kind)), detail_(std::move(detail)) {}
  [[nodiscard]] int status() const { return status_; }
  [[nodiscard]] const std::string& kind() const { return kind_; }
  [[nodiscard]] const nlohmann::json& detail() const { return detail_; }
  [[nodiscard]] nlohmann::json body() const;

 private:
  int status_;
  std::string kind_;
  nlohmann::json detail_;
};

struct ServiceOptions {
  int workers = 2;
  int max_samples = 16;
  /// Empty: memory only. Otherwise sessions are mirrored to
  /// <dir>/<session>/session.json and <dir>/<session>/<asset>.png.
  std::filesystem::path persist_dir;
};

struct DepthCandidate {
  std::string id;
  DepthMap<float> depth;  // held on the 16-bit PNG grid
  std::uint64_t seed = 0;
  int index = 0;
  std::string parent;
  std::vector<inference::DepthEdit> edits;
};

struct ImageRecord {
  std::string id;
  std::string candidate;
  std::uint64_t seed = 0;
  int index = 0;
};

struct Session {
  std::string id;
  std::optional<SegmentationMap> segmentation;
  std::vector<DepthCandidate> candidates;
  std::vector<ImageRecord> images;
  std::map<std::string, io::Bytes> assets;
  std::int64_t created = 0;
  std::int64_t updated = 0;
  std::uint64_t counter = 0;
  std::mutex mutex;
};

/// Session workflow independent of the transport. All methods are thread
/// safe; calls on one session are serialized and inference is bounded by the
/// worker count.
class Service {
 public:
  Service(GeneratorWeights<float> s2d, GeneratorWeights<float> sd2i, ServiceOptions options = {});

  [[nodiscard]] nlohmann::json model_info() const;
  nlohmann::json create_session();
  nlohmann::json session_info(const std::string& sid);
  nlohmann::json upload_segmentation(const std::string& sid, const io::Bytes& png);
  nlohmann::json request_depths(const std::string& sid, int n, std::optional<std::uint64_t> seed);
  nlohmann::json shift_depth(const std::string& sid, const std::string& cid, const std::string& label, double delta);
  nlohmann::json request_images(const std::string& sid, const std::string& cid, int n, std::optional<std::uint64_t> seed);
  io::Bytes fetch_asset(const std::string& sid, const std::string& aid);

  /// Loads sessions mirrored by an earlier run; returns how many were found.
  int restore();

 private:
  std::shared_ptr<Session> find(const std::string& sid);
  void check_count(int n) const;
  std::uint64_t next_seed(Session& s);
  void persist(const Session& s) const;

  GeneratorWeights<float> s2d_;
  GeneratorWeights<float> sd2i_;
  ServiceOptions options_;
  std::mutex store_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t session_counter_ = 0;
  std::counting_semaphore<1024> workers_;
};

}  // namespace styland::service
