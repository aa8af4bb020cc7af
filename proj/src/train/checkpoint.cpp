#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "qdf/errors.hpp"
#include "qdf/train/train.hpp"

namespace qdf {

namespace {

constexpr char kMagic[4] = {'Q', 'D', 'F', '1'};
constexpr std::size_t kPrefix = 8;  // magic + header length

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

template <class U>
void put_le(std::string& out, U bits) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

template <class U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

void append_tensor(std::string& payload, const Tensor& t) {
  if (t.dtype() == DType::f64) {
    for (double v : t.data<double>()) put_le(payload, std::bit_cast<std::uint64_t>(v));
  } else {
    for (float v : t.data<float>()) put_le(payload, std::bit_cast<std::uint32_t>(v));
  }
}

Tensor read_tensor(const unsigned char* p, const Shape& shape, DType dtype) {
  std::vector<double> values(shape_numel(shape));
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = dtype == DType::f64 ? std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i))
                                    : static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * i)));
  }
  return Tensor::from_values(shape, values, dtype);
}

std::uint32_t crc_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks to stay portable for large payloads.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  std::string payload;
  nlohmann::json directory = nlohmann::json::array();
  auto add = [&](const std::string& name, const Tensor& t, const char* kind) {
    const std::size_t offset = payload.size();
    append_tensor(payload, t);
    directory.push_back({{"name", name},
                         {"kind", kind},
                         {"dtype", dtype_name(t.dtype())},
                         {"shape", t.shape()},
                         {"offset", offset},
                         {"length", payload.size() - offset}});
  };
  for (const auto& [name, t] : c.params.tensors) add(name, t, "param");
  for (const auto& [name, t] : c.params.buffers) add(name, t, "buffer");

  const nlohmann::json header = {{"version", Checkpoint::kFormatVersion},
                                 {"model", to_json(c.model)},
                                 {"train", to_json(c.train)},
                                 {"epoch", c.epoch},
                                 {"rng_state", c.rng_state},
                                 {"payload_bytes", payload.size()},
                                 {"payload_crc32", crc_of(payload)},
                                 {"tensors", directory}};
  const std::string text = header.dump();
  std::string out(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out += payload;
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError(0, "not a checkpoint (bad magic)");
  if (bytes.size() < kPrefix) throw FormatError(4, "truncated header length");
  const std::size_t header_len = get_u32(bytes, 4);
  if (bytes.size() - kPrefix < header_len) throw FormatError(kPrefix, "truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(kPrefix, header_len));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(kPrefix + std::min<std::size_t>(e.byte, header_len), "malformed header");
  }
  const std::size_t payload_at = kPrefix + header_len;
  Checkpoint c;
  try {
    const int version = header.at("version").get<int>();
    if (version != Checkpoint::kFormatVersion) {
      throw VersionError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                         std::to_string(Checkpoint::kFormatVersion) + ")");
    }
    const std::size_t payload_bytes = header.at("payload_bytes").get<std::size_t>();
    if (bytes.size() - payload_at != payload_bytes) {
      throw FormatError(std::min(bytes.size(), payload_at + payload_bytes),
                        "payload is " + std::to_string(bytes.size() - payload_at) + " bytes, header says " +
                            std::to_string(payload_bytes));
    }
    const std::string_view payload = bytes.substr(payload_at);
    if (crc_of(payload) != header.at("payload_crc32").get<std::uint32_t>())
      throw FormatError(payload_at, "payload checksum mismatch");

    c.model = model_config_from_json(header.at("model"));
    c.train = train_config_from_json(header.at("train"));
    c.epoch = header.at("epoch").get<std::size_t>();
    c.rng_state = header.at("rng_state").get<std::string>();
    const auto* base = reinterpret_cast<const unsigned char*>(payload.data());
    for (const auto& entry : header.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto kind = entry.at("kind").get<std::string>();
      const DType dtype = parse_dtype(entry.at("dtype").get<std::string>());
      const Shape shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto length = entry.at("length").get<std::size_t>();
      if (length != shape_numel(shape) * dtype_size(dtype) || offset > payload.size() ||
          payload.size() - offset < length)
        throw FormatError(payload_at + offset, "tensor '" + name + "' does not fit the payload");
      Tensor t = read_tensor(base + offset, shape, dtype);
      if (kind == "param") {
        t.set_requires_grad(true);
        c.params.tensors.emplace(name, t);
      } else if (kind == "buffer") {
        c.params.buffers.emplace(name, t);
      } else {
        throw FormatError(kPrefix, "tensor '" + name + "' has unknown kind '" + kind + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(kPrefix, std::string("header: ") + e.what());
  }
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write checkpoint '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValidationError("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace qdf
