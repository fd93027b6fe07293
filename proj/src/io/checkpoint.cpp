#include "styland/io/checkpoint.hpp"

#include "styland/core/config_io.hpp"
#include "styland/core/error.hpp"

#include <cstring>
#include <map>

namespace styland::io {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'S', 'T', 'Y', 'L', 'C', 'K', 'P', 'T'};

template <typename T>
void put(Bytes& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

template <typename T>
T get(const Bytes& in, std::size_t pos) {
  if (pos + sizeof(T) > in.size()) throw Error(ErrorKind::format, "checkpoint truncated");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
  return static_cast<T>(v);
}

void put_floats(Bytes& out, const nn::Tensor<float>& t) {
  for (std::ptrdiff_t i = 0; i < t.size(); ++i) {
    std::uint32_t bits;
    const float f = t.data()[i];
    std::memcpy(&bits, &f, 4);
    put(out, bits);
  }
}

struct Writer {
  json index = json::array();
  Bytes blob;

  void add(const std::string& name, const nn::Tensor<float>& t, double gain) {
    const auto& s = t.shape();
    index.push_back({{"name", name}, {"shape", {s.n, s.c, s.h, s.w}}, {"gain", gain}, {"offset", blob.size()}});
    put_floats(blob, t);
  }

  void add_store(const std::string& prefix, const nn::ParameterStore<float>& store) {
    for (const auto& p : store) add(prefix + p.name, p.value, p.gain);
  }

  void add_adam(const std::string& prefix, const nn::ParameterStore<float>& store, const nn::Adam<float>& opt) {
    for (int i = 0; i < store.size(); ++i) {
      add(prefix + "m/" + store[i].name, opt.first_moments()[static_cast<std::size_t>(i)], 1.0);
      add(prefix + "v/" + store[i].name, opt.second_moments()[static_cast<std::size_t>(i)], 1.0);
    }
  }
};

struct Parsed {
  json header;
  std::size_t blob_start = 0;
  std::map<std::string, json> entries;
};

Parsed parse(const Bytes& data) {
  if (data.size() < 24 || std::memcmp(data.data(), kMagic, 8) != 0) throw Error(ErrorKind::format, "not a checkpoint file");
  const auto major = get<std::uint32_t>(data, 8);
  if (major != kCheckpointMajor) {
    throw Error(ErrorKind::format, "unsupported checkpoint format version " + std::to_string(major));
  }
  const auto len = get<std::uint64_t>(data, 16);
  if (24 + len > data.size()) throw Error(ErrorKind::format, "checkpoint header truncated");
  Parsed p;
  try {
    p.header = json::parse(data.begin() + 24, data.begin() + 24 + static_cast<std::ptrdiff_t>(len));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string("checkpoint header: ") + e.what());
  }
  p.blob_start = 24 + len;
  for (const auto& e : p.header.at("tensors")) p.entries[e.at("name").get<std::string>()] = e;
  return p;
}

nn::Tensor<float> read_tensor(const Bytes& data, const Parsed& p, const std::string& name, const nn::Shape& expect,
                              double* gain = nullptr) {
  const auto it = p.entries.find(name);
  if (it == p.entries.end()) throw Error(ErrorKind::format, "checkpoint lacks tensor '" + name + "'");
  const auto& e = it->second;
  const auto dims = e.at("shape").get<std::vector<int>>();
  const nn::Shape s{dims.at(0), dims.at(1), dims.at(2), dims.at(3)};
  if (s != expect) {
    throw Error(ErrorKind::format, "tensor '" + name + "' has shape " + nn::to_string(s) + ", expected " + nn::to_string(expect));
  }
  if (gain) *gain = e.at("gain").get<double>();
  nn::Tensor<float> t(s);
  std::size_t pos = p.blob_start + e.at("offset").get<std::size_t>();
  if (pos + static_cast<std::size_t>(t.size()) * 4 > data.size()) throw Error(ErrorKind::format, "tensor '" + name + "' truncated");
  for (std::ptrdiff_t i = 0; i < t.size(); ++i, pos += 4) {
    const auto bits = get<std::uint32_t>(data, pos);
    std::memcpy(&t.data()[i], &bits, 4);
  }
  return t;
}

void read_store(const Bytes& data, const Parsed& p, const std::string& prefix, nn::ParameterStore<float>& store) {
  for (int i = 0; i < store.size(); ++i) {
    double gain = 0;
    auto t = read_tensor(data, p, prefix + store[i].name, store[i].value.shape(), &gain);
    if (static_cast<float>(gain) != store[i].gain) {
      throw Error(ErrorKind::format, "tensor '" + prefix + store[i].name + "' was saved with a different gain");
    }
    store[i].value = std::move(t);
  }
}

void read_adam(const Bytes& data, const Parsed& p, const std::string& prefix, const nn::ParameterStore<float>& store,
               nn::Adam<float>& opt, long steps) {
  std::vector<nn::Tensor<float>> m;
  std::vector<nn::Tensor<float>> v;
  for (const auto& param : store) {
    m.push_back(read_tensor(data, p, prefix + "m/" + param.name, param.value.shape()));
    v.push_back(read_tensor(data, p, prefix + "v/" + param.name, param.value.shape()));
  }
  opt.restore(steps, std::move(m), std::move(v));
}

CheckpointInfo info_from(const json& h) {
  CheckpointInfo info;
  info.config = model_config_from_json(h.at("config"));
  info.step = h.at("step").get<long>();
  info.seed = h.at("seed").get<std::uint64_t>();
  info.extractor_id = h.at("extractor").at("id").get<std::string>();
  info.has_optimizer = h.at("optimizer").get<bool>();
  return info;
}

}  // namespace

Bytes serialize_checkpoint(const TrainState<float>& state, bool include_optimizer) {
  Writer w;
  w.add_store("generator/", state.generator.params);
  w.add_store("discriminator/", state.discriminator.params);
  w.add_store("encoder/", state.encoder.params);
  if (include_optimizer) {
    w.add_adam("adam.generator/", state.generator.params, state.generator_opt);
    w.add_adam("adam.encoder/", state.encoder.params, state.encoder_opt);
    w.add_adam("adam.discriminator/", state.discriminator.params, state.discriminator_opt);
  }
  json header = {{"config", to_json(state.config)},
                 {"step", state.step},
                 {"seed", state.seed},
                 {"last_r1", state.last_r1},
                 {"extractor", {{"id", state.extractor.id()}, {"seed", state.extractor.seed()}}},
                 {"optimizer", include_optimizer},
                 {"adam_steps",
                  {state.generator_opt.steps(), state.encoder_opt.steps(), state.discriminator_opt.steps()}},
                 {"tensors", w.index}};
  const std::string text = header.dump();
  Bytes out(kMagic, kMagic + 8);
  put(out, kCheckpointMajor);
  put(out, kCheckpointMinor);
  put(out, static_cast<std::uint64_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), w.blob.begin(), w.blob.end());
  return out;
}

CheckpointInfo checkpoint_info(const Bytes& data) { return info_from(parse(data).header); }

TrainState<float> deserialize_checkpoint(const Bytes& data) {
  const auto p = parse(data);
  try {
    const auto info = info_from(p.header);
    auto state = TrainState<float>::create(info.config, info.seed);
    state.step = info.step;
    state.last_r1 = p.header.value("last_r1", 0.0);
    state.extractor = FeatureExtractor<float>::random(p.header.at("extractor").at("seed").get<std::uint64_t>());
    if (state.extractor.id() != info.extractor_id) {
      throw Error(ErrorKind::format, "unknown feature extractor '" + info.extractor_id + "'");
    }
    read_store(data, p, "generator/", state.generator.params);
    read_store(data, p, "discriminator/", state.discriminator.params);
    read_store(data, p, "encoder/", state.encoder.params);
    if (info.has_optimizer) {
      const auto steps = p.header.at("adam_steps").get<std::vector<long>>();
      read_adam(data, p, "adam.generator/", state.generator.params, state.generator_opt, steps.at(0));
      read_adam(data, p, "adam.encoder/", state.encoder.params, state.encoder_opt, steps.at(1));
      read_adam(data, p, "adam.discriminator/", state.discriminator.params, state.discriminator_opt, steps.at(2));
    }
    return state;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string("checkpoint header: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const TrainState<float>& state, bool include_optimizer) {
  write_file(path, serialize_checkpoint(state, include_optimizer));
}

TrainState<float> load_checkpoint(const std::filesystem::path& path) {
  try {
    return deserialize_checkpoint(read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::io) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace styland::io
