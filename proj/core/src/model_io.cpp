#include "regram/model_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace regram {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'R', 'G', 'R', 'M'};

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<uint64_t>(v)); }

class ByteReader {
 public:
  ByteReader(const std::string& buf, std::string what) : buf_(buf), what_(std::move(what)) {}

  uint16_t u16() { return static_cast<uint16_t>(u_bytes(2)); }
  uint32_t u32() { return static_cast<uint32_t>(u_bytes(4)); }
  uint64_t u64() { return u_bytes(8); }
  double f64() { return std::bit_cast<double>(u_bytes(8)); }

  std::string bytes(size_t n) {
    need(n);
    std::string out = buf_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  size_t remaining() const { return buf_.size() - pos_; }
  size_t pos() const { return pos_; }

 private:
  uint64_t u_bytes(size_t n) {
    need(n);
    uint64_t v = 0;
    for (size_t i = 0; i < n; ++i) {
      v |= static_cast<uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    }
    pos_ += n;
    return v;
  }

  void need(size_t n) {
    if (buf_.size() - pos_ < n) {
      throw std::runtime_error("model file truncated (" + what_ + ")");
    }
  }

  const std::string& buf_;
  std::string what_;
  size_t pos_ = 0;
};

uint32_t payload_crc(const std::string& payload) {
  uLong crc = crc32_z(0L, Z_NULL, 0);
  crc = crc32_z(crc, reinterpret_cast<const Bytef*>(payload.data()), payload.size());
  return static_cast<uint32_t>(crc);
}

}  // namespace

void save_model(const std::string& path, const TrainConfig& config,
                const std::vector<TrainedCity>& cities) {
  json manifest;
  manifest["format"] = "regram-model";
  manifest["version"] = kModelFileVersion;
  manifest["config"] = json::parse(train_config_to_json_string(config));

  std::string payload;
  json city_entries = json::array();
  uint64_t offset_elems = 0;
  for (const TrainedCity& tc : cities) {
    json entry;
    entry["city"] = tc.city;
    entry["d_e"] = tc.model.config().d_e;
    entry["d_o"] = tc.model.config().d_o;
    entry["normalizer"] = json::parse(tc.normalizer.to_json_string());
    json tensors = json::array();
    for (const Param& p : tc.model.params().all()) {
      json t;
      t["name"] = p.name;
      t["rows"] = p.tensor.rows;
      t["cols"] = p.tensor.cols;
      t["offset"] = offset_elems;
      tensors.push_back(std::move(t));
      for (double v : p.tensor.data) put_f64(payload, v);
      offset_elems += p.tensor.data.size();
    }
    entry["tensors"] = std::move(tensors);
    city_entries.push_back(std::move(entry));
  }
  manifest["cities"] = std::move(city_entries);

  const std::string manifest_text = manifest.dump();

  std::string out;
  out.append(kMagic, 4);
  put_u16(out, kModelFileVersion);
  put_u64(out, manifest_text.size());
  out += manifest_text;
  out += payload;
  put_u32(out, payload_crc(payload));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw std::runtime_error("cannot write model file '" + path + "'");
  }
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  f.flush();
  if (!f) {
    throw std::runtime_error("write failed for model file '" + path + "'");
  }
}

ModelFile load_model(const std::string& path, const std::optional<ModelConfig>& expect) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("cannot open model file '" + path + "'");
  }
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  ByteReader header(buf, "header");
  if (header.bytes(4) != std::string(kMagic, 4)) {
    throw std::runtime_error("bad magic in model file '" + path + "'");
  }
  const uint16_t version = header.u16();
  if (version != kModelFileVersion) {
    throw std::runtime_error("unsupported model file version " + std::to_string(version));
  }
  const uint64_t manifest_len = header.u64();
  ByteReader rest(buf, "manifest");
  rest.bytes(header.pos());  // skip header
  const std::string manifest_text = rest.bytes(manifest_len);

  json manifest;
  try {
    manifest = json::parse(manifest_text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("model file manifest is not valid JSON: ") + e.what());
  }
  if (manifest.value("format", "") != "regram-model") {
    throw std::runtime_error("model file manifest has unexpected format tag");
  }

  if (rest.remaining() < 4) {
    throw std::runtime_error("model file truncated (payload)");
  }
  const size_t payload_bytes = rest.remaining() - 4;
  if (payload_bytes % 8 != 0) {
    throw std::runtime_error("model file payload is not a whole number of float64 values");
  }
  ByteReader body(buf, "payload");
  body.bytes(header.pos() + manifest_len);
  const std::string payload = body.bytes(payload_bytes);
  const uint32_t stored_crc = body.u32();
  if (stored_crc != payload_crc(payload)) {
    throw std::runtime_error("model file checksum mismatch (corrupt payload)");
  }
  const size_t payload_elems = payload.size() / 8;

  ModelFile out{train_config_from_json_string(manifest.at("config").dump()), {}};

  for (const json& entry : manifest.at("cities")) {
    ModelConfig mc = expect ? *expect : out.config.model;
    mc.d_e = entry.at("d_e").get<int>();
    mc.d_o = entry.at("d_o").get<int>();
    Model model(mc, /*seed=*/0);

    size_t loaded = 0;
    std::vector<bool> seen(model.params().size(), false);
    for (const json& t : entry.at("tensors")) {
      const std::string name = t.at("name").get<std::string>();
      const size_t rows = t.at("rows").get<size_t>();
      const size_t cols = t.at("cols").get<size_t>();
      const uint64_t offset = t.at("offset").get<uint64_t>();
      if (!model.params().contains(name)) {
        throw std::runtime_error("unknown tensor '" + name + "' in model file");
      }
      Tensor& dst = model.params().at(name);
      if (dst.rows != rows || dst.cols != cols) {
        throw std::runtime_error("tensor '" + name + "' shape mismatch: file has " +
                                 std::to_string(rows) + "x" + std::to_string(cols) +
                                 ", model expects " + std::to_string(dst.rows) + "x" +
                                 std::to_string(dst.cols));
      }
      const size_t count = rows * cols;
      if (offset + count > payload_elems) {
        throw std::runtime_error("tensor '" + name + "' payload span out of range");
      }
      for (size_t i = 0; i < count; ++i) {
        uint64_t bits = 0;
        std::memcpy(&bits, payload.data() + (offset + i) * 8, 8);
        dst.data[i] = std::bit_cast<double>(bits);
      }
      // Mark the tensor as loaded exactly once.
      for (size_t pi = 0; pi < model.params().size(); ++pi) {
        if (model.params().all()[pi].name == name) {
          if (seen[pi]) {
            throw std::runtime_error("duplicate tensor '" + name + "' in model file");
          }
          seen[pi] = true;
          break;
        }
      }
      ++loaded;
    }
    if (loaded != model.params().size()) {
      for (size_t pi = 0; pi < model.params().size(); ++pi) {
        if (!seen[pi]) {
          throw std::runtime_error("model file missing tensor '" +
                                   model.params().all()[pi].name + "'");
        }
      }
    }

    Normalizer norm = Normalizer::from_json_string(entry.at("normalizer").dump());
    out.cities.push_back(CityModel{entry.at("city").get<std::string>(), std::move(norm),
                                   std::move(model)});
  }
  return out;
}

}  // namespace regram
