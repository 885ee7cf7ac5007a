#pragma once

// Checkpoint archive layout (all integers little-endian):
//
//   magic      8 bytes  "PGANCKPT"
//   version    u32      (1)
//   header_len u64
//   header     JSON text {version, model_config, step, seeds, spectral, extra}
//   count      u32      number of tensors
//   per tensor:
//     name_len u32, name bytes (UTF-8)
//     dtype    u8       (0 = float32)
//     rank     u32, dims i64[rank]
//     data     float32[numel]
//
// Spectral-norm vectors are stored as "<param>#sn_u" tensors of rank 1.
// Tensors are written in (network, name) order so archives are reproducible.

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "pathgan/core/digest.hpp"
#include "pathgan/model/gan.hpp"

namespace pathgan::model {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'P', 'G', 'A', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
  std::int64_t step = 0;
  nlohmann::json seeds = nlohmann::json::object();
  nlohmann::json extra = nlohmann::json::object();
};

namespace detail {

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
public:
  explicit Reader(const std::string& bytes) : b_(bytes) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void read_floats(float* dst, std::size_t n) {
    need(n * sizeof(float));
    std::memcpy(dst, b_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == b_.size(); }

private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw IntegrityError("checkpoint truncated");
  }
  const std::string& b_;
  std::size_t pos_ = 0;
};

inline void put_tensor(std::string& out, const std::string& name, const Shape& shape, const float* data) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put<std::uint8_t>(out, 0);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) put<std::int64_t>(out, d);
  out.append(reinterpret_cast<const char*>(data), static_cast<std::size_t>(shape_numel(shape)) * sizeof(float));
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace detail

/// Serialized tensor section; its FNV-1a digest identifies the weights.
inline std::string encode_tensors(const Gan& gan) {
  std::string body;
  std::uint32_t count = 0;
  gan.for_each_store([&](const char*, const ParamStore& ps) {
    for (const auto& [name, p] : ps.entries()) {
      detail::put_tensor(body, name, p.var->value.shape(), p.var->value.data());
      ++count;
      if (p.spectral) {
        detail::put_tensor(body, name + "#sn_u", Shape{static_cast<std::int64_t>(p.sn.u.size())}, p.sn.u.data());
        ++count;
      }
    }
  });
  std::string out;
  detail::put<std::uint32_t>(out, count);
  return out + body;
}

inline std::string weights_digest(const Gan& gan) { return digest_hex(encode_tensors(gan)); }

inline std::string encode_checkpoint(const Gan& gan, const CheckpointInfo& info) {
  nlohmann::json spectral = nlohmann::json::object();
  gan.for_each_store([&](const char*, const ParamStore& ps) {
    for (const auto& [name, p] : ps.entries())
      if (p.spectral) spectral[name] = p.sn.iterations;
  });
  const std::string tensors = encode_tensors(gan);
  nlohmann::json header = {{"version", kCheckpointVersion},
                           {"model_config", gan.config},
                           {"step", info.step},
                           {"seeds", info.seeds},
                           {"spectral", spectral},
                           {"weights_digest", digest_hex(tensors)},
                           {"extra", info.extra}};
  const std::string h = header.dump();
  std::string out(kCheckpointMagic, 8);
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::uint64_t>(out, h.size());
  out += h;
  out += tensors;
  return out;
}

inline void save_checkpoint(const std::string& path, const Gan& gan, const CheckpointInfo& info = {}) {
  const std::string bytes = encode_checkpoint(gan, info);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IntegrityError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IntegrityError("cannot finalize " + path);
}

struct LoadedCheckpoint {
  Gan gan;
  CheckpointInfo info;
  nlohmann::json header;
  std::string digest;
};

inline LoadedCheckpoint decode_checkpoint(const std::string& bytes) {
  detail::Reader r(bytes);
  if (r.bytes(8) != std::string(kCheckpointMagic, 8)) throw IntegrityError("not a checkpoint (bad magic)");
  if (r.get<std::uint32_t>() != kCheckpointVersion) throw IntegrityError("unsupported checkpoint version");
  const auto hlen = r.get<std::uint64_t>();
  LoadedCheckpoint out;
  try {
    out.header = nlohmann::json::parse(r.bytes(hlen));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("checkpoint header: ") + e.what());
  }
  const std::size_t tensor_start = r.pos();
  const auto cfg = out.header.at("model_config").get<ModelConfig>();
  // Structure comes from the config; values are then overwritten from disk.
  out.gan = Gan::create(cfg, 0);
  std::map<std::string, std::pair<Param*, bool>> slots;
  out.gan.for_each_store([&](const char*, ParamStore& ps) {
    for (auto& [name, p] : ps.entries()) {
      slots[name] = {&p, false};
      if (p.spectral) slots[name + "#sn_u"] = {&p, true};
    }
  });
  const auto count = r.get<std::uint32_t>();
  if (count != slots.size())
    throw IntegrityError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                         std::to_string(slots.size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.bytes(r.get<std::uint32_t>());
    if (r.get<std::uint8_t>() != 0) throw IntegrityError("unsupported dtype for " + name);
    Shape shape(r.get<std::uint32_t>());
    for (auto& d : shape) d = r.get<std::int64_t>();
    auto it = slots.find(name);
    if (it == slots.end()) throw IntegrityError("unexpected tensor " + name);
    auto [param, is_sn] = it->second;
    if (is_sn) {
      if (shape != Shape{static_cast<std::int64_t>(param->sn.u.size())})
        throw IntegrityError("shape mismatch for " + name);
      r.read_floats(param->sn.u.data(), param->sn.u.size());
    } else {
      if (shape != param->var->value.shape()) throw IntegrityError("shape mismatch for " + name);
      r.read_floats(param->var->value.data(), static_cast<std::size_t>(param->var->value.numel()));
    }
    slots.erase(it);
  }
  if (!r.done()) throw IntegrityError("trailing bytes after tensors");
  out.digest = digest_hex(bytes.data() + tensor_start, bytes.size() - tensor_start);
  if (out.header.contains("weights_digest") && out.header["weights_digest"] != out.digest)
    throw IntegrityError("checkpoint weights digest mismatch");
  const auto& spectral = out.header.value("spectral", nlohmann::json::object());
  out.gan.for_each_store([&](const char*, ParamStore& ps) {
    for (auto& [name, p] : ps.entries())
      if (p.spectral && spectral.contains(name)) p.sn.iterations = spectral[name].get<std::int64_t>();
  });
  out.info.step = out.header.value("step", std::int64_t{0});
  out.info.seeds = out.header.value("seeds", nlohmann::json::object());
  out.info.extra = out.header.value("extra", nlohmann::json::object());
  return out;
}

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(detail::read_file(path));
}

} // namespace pathgan::model
