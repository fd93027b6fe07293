#include "styland/core/config_io.hpp"

#include <fstream>
#include <set>

namespace styland {

nlohmann::json to_json(const ModelConfig& c) {
  return {
      {"mode", to_string(c.mode)},
      {"output_resolution", c.output_resolution},
      {"base_resolution", c.base_resolution},
      {"z_dim", c.z_dim},
      {"mapping_layers", c.mapping_layers},
      {"mapping_width", c.mapping_width},
      {"channels", c.channels},
      {"critic_channels", c.critic_channels},
      {"label_set", c.label_set},
      {"init_seed", c.init_seed},
      {"loss",
       {{"adversarial", c.loss.adversarial},
        {"r1_gamma", c.loss.r1_gamma},
        {"r1_interval", c.loss.r1_interval},
        {"perceptual", c.loss.perceptual},
        {"domain_guided", c.loss.domain_guided},
        {"reconstruction", c.loss.reconstruction}}},
      {"optimizer",
       {{"lr", c.optimizer.lr},
        {"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"eps", c.optimizer.eps},
        {"batch", c.optimizer.batch}}},
  };
}

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorKind::format, "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    reject_unknown(j,
                   {"mode", "output_resolution", "base_resolution", "z_dim", "mapping_layers", "mapping_width",
                    "channels", "critic_channels", "label_set", "init_seed", "loss", "optimizer"},
                   "model config");
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    if (j.contains("output_resolution") && !j.contains("channels")) {
      const auto sized = ModelConfig::for_resolution(c.mode, j.at("output_resolution").get<int>());
      c.channels = sized.channels;
      c.critic_channels = sized.critic_channels;
    }
    read(j, "output_resolution", c.output_resolution);
    read(j, "base_resolution", c.base_resolution);
    read(j, "z_dim", c.z_dim);
    read(j, "mapping_layers", c.mapping_layers);
    read(j, "mapping_width", c.mapping_width);
    read(j, "channels", c.channels);
    if (j.contains("channels") && !j.contains("critic_channels")) c.critic_channels = c.channels;
    read(j, "critic_channels", c.critic_channels);
    read(j, "label_set", c.label_set);
    read(j, "init_seed", c.init_seed);
    if (j.contains("loss")) {
      const auto& l = j.at("loss");
      reject_unknown(l, {"adversarial", "r1_gamma", "r1_interval", "perceptual", "domain_guided", "reconstruction"},
                     "loss");
      read(l, "adversarial", c.loss.adversarial);
      read(l, "r1_gamma", c.loss.r1_gamma);
      read(l, "r1_interval", c.loss.r1_interval);
      read(l, "perceptual", c.loss.perceptual);
      read(l, "domain_guided", c.loss.domain_guided);
      read(l, "reconstruction", c.loss.reconstruction);
    }
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      reject_unknown(o, {"lr", "beta1", "beta2", "eps", "batch"}, "optimizer");
      read(o, "lr", c.optimizer.lr);
      read(o, "beta1", c.optimizer.beta1);
      read(o, "beta2", c.optimizer.beta2);
      read(o, "eps", c.optimizer.eps);
      read(o, "batch", c.optimizer.batch);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::io, "failed writing " + path);
}

}  // namespace styland
