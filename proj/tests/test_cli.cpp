#include "cli.hpp"

#include "styland/io/checkpoint.hpp"
#include "styland/nn/rng.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = styland::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const char* name) {
  auto p = fs::temp_directory_path() / ("styland_cli_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Runs the whole pipeline into `dir` and returns every produced file keyed by relative path.
std::map<std::string, std::string> pipeline(const fs::path& dir) {
  const auto d = dir.string();
  REQUIRE(cli({"dataset", "build", "--out", d + "/ds", "--count", "6", "--resolution", "16", "--seed", "9"}).code == 0);
  for (const char* mode : {"s2d", "sd2i"}) {
    const auto r = cli({"train", "--mode", mode, "--data", d + "/ds", "--steps", "3", "--seed", "2", "--out",
                        d + "/" + mode, "--checkpoint-every", "2", "--log-every", "0"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
  }
  const auto inf = cli({"infer", "--s2d", d + "/s2d/final.ckpt", "--sd2i", d + "/sd2i/final.ckpt", "--seg",
                        d + "/ds/seg/scene_00001.png", "--n-depths", "3", "--pick", "1", "--n-images", "2", "--seed", "4",
                        "--out", d + "/inf"});
  REQUIRE_MESSAGE(inf.code == 0, inf.err);
  REQUIRE(cli({"eval", "--model", "a=" + d + "/sd2i/final.ckpt", "--data", d + "/ds", "--out", d + "/eval.csv", "--k", "3",
               "--maps", "2"})
              .code == 0);
  REQUIRE(cli({"analyze-depth", "--data", d + "/ds", "--s2d", d + "/s2d/final.ckpt", "--bins", "10", "--out", d + "/an"})
              .code == 0);
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return files;
}

}  // namespace

TEST_CASE("cli reruns are bitwise identical") {
  const auto a = scratch("a");
  const auto b = scratch("b");
  const auto first = pipeline(a);
  // Manifests record the argv, which names the output directory; compare them after rewriting it.
  auto second = pipeline(b);
  REQUIRE(first.size() == second.size());
  int pngs = 0;
  int csvs = 0;
  for (const auto& [name, bytes] : first) {
    CAPTURE(name);
    REQUIRE(second.count(name) == 1);
    std::string other = second.at(name);
    if (name.find("manifest") != std::string::npos) {
      std::string from = b.string(), to = a.string();
      for (std::size_t at = other.find(from); at != std::string::npos; at = other.find(from, at + to.size())) {
        other.replace(at, from.size(), to);
      }
    }
    CHECK(bytes == other);
    pngs += name.ends_with(".png");
    csvs += name.ends_with(".csv");
  }
  CHECK(pngs >= 6 * 3 + 3 + 1 + 2);
  CHECK(csvs >= 4);
  CHECK(first.count("s2d/checkpoint_000002.ckpt") == 1);

  const auto manifest = nlohmann::json::parse(first.at("inf/run_manifest.json"));
  CHECK(manifest.at("command") == "infer");
  CHECK(manifest.at("seeds").at("inference") == 4);
  CHECK(manifest.at("config_hash").get<std::string>().size() == 16);
  CHECK(manifest.contains("git_revision"));
  CHECK(first.at("eval.csv").rfind("model,mode,test_items,fid,lpips_diversity,depth_rmse", 0) == 0);

  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("cli resume continues the same trajectory") {
  const auto dir = scratch("resume");
  const auto d = dir.string();
  REQUIRE(cli({"dataset", "build", "--out", d + "/ds", "--count", "4", "--resolution", "16", "--seed", "1"}).code == 0);
  REQUIRE(cli({"train", "--mode", "s2i", "--data", d + "/ds", "--steps", "4", "--seed", "3", "--out", d + "/full",
               "--log-every", "0"})
              .code == 0);
  REQUIRE(cli({"train", "--mode", "s2i", "--data", d + "/ds", "--steps", "2", "--seed", "3", "--out", d + "/half",
               "--log-every", "0"})
              .code == 0);
  REQUIRE(cli({"train", "--mode", "s2i", "--data", d + "/ds", "--steps", "2", "--resume", d + "/half/final.ckpt", "--out",
               d + "/rest", "--log-every", "0"})
              .code == 0);
  CHECK(slurp(dir / "full/final.ckpt") == slurp(dir / "rest/final.ckpt"));
  fs::remove_all(dir);
}

TEST_CASE("cli failures exit 1 with one diagnostic line") {
  const auto dir = scratch("fail");
  const auto d = dir.string();
  auto r = cli({"train", "--mode", "s2d", "--data", d + "/nothing", "--out", d + "/o", "--steps", "1"});
  CHECK(r.code == 1);
  CHECK(r.err.find("missing manifest") != std::string::npos);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

  REQUIRE(cli({"dataset", "build", "--out", d + "/ds", "--count", "2", "--resolution", "16"}).code == 0);
  REQUIRE(cli({"train", "--mode", "s2d", "--data", d + "/ds", "--steps", "1", "--out", d + "/s2d", "--log-every", "0"}).code ==
          0);
  r = cli({"infer", "--s2d", d + "/s2d/final.ckpt", "--sd2i", d + "/s2d/final.ckpt", "--seg", d + "/ds/seg/scene_00000.png",
           "--out", d + "/inf"});
  CHECK(r.code == 1);
  CHECK(r.err.find("expected sd2i") != std::string::npos);

  r = cli({"train", "--mode", "bogus", "--data", d + "/ds", "--out", d + "/x"});
  CHECK(r.code == 1);
  CHECK(cli({"frobnicate"}).code != 0);
  CHECK(cli({"infer"}).code != 0);
  fs::remove_all(dir);
}
