#include "dimsweep/binary_io.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

namespace dimsweep {

void BinaryWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void BinaryWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void BinaryWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

std::string_view BinaryReader::take(std::size_t n) {
  if (remaining() < n) throw Error("unexpected end of binary data");
  auto out = in_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t BinaryReader::u8() { return static_cast<std::uint8_t>(take(1)[0]); }

std::uint32_t BinaryReader::u32() {
  auto b = take(4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(b[static_cast<std::size_t>(i)]);
  return v;
}

std::uint64_t BinaryReader::u64() {
  auto b = take(8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(b[static_cast<std::size_t>(i)]);
  return v;
}

float BinaryReader::f32() { return std::bit_cast<float>(u32()); }

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string_view BinaryReader::bytes(std::size_t n) { return take(n); }

namespace {

std::string sha256_raw(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 digest failed");
  }
  return std::string(reinterpret_cast<const char*>(digest), len);
}

constexpr std::string_view kEnvelopeMagic = "DSWM";

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned char c : sha256_raw(bytes)) {
    out.push_back(hex[c >> 4]);
    out.push_back(hex[c & 0xf]);
  }
  return out;
}

std::string wrap_envelope(ModelKind kind, std::string_view payload) {
  std::string out;
  BinaryWriter w(out);
  w.bytes(kEnvelopeMagic);
  w.u32(kEnvelopeVersion);
  w.u32(static_cast<std::uint32_t>(kind));
  w.u64(payload.size());
  w.bytes(payload);
  w.bytes(sha256_raw(payload));
  return out;
}

std::string unwrap_envelope(std::string_view blob, ModelKind expected) {
  BinaryReader r(blob);
  if (r.remaining() < 4 || r.bytes(4) != kEnvelopeMagic) throw Error("model blob: bad magic");
  const auto version = r.u32();
  if (version != kEnvelopeVersion) throw Error("model blob: unsupported version " + std::to_string(version));
  const auto kind = r.u32();
  if (kind != static_cast<std::uint32_t>(expected)) {
    throw Error("model blob: kind " + std::to_string(kind) + ", expected " +
                std::to_string(static_cast<std::uint32_t>(expected)));
  }
  const auto size = r.u64();
  if (r.remaining() != size + 32) throw Error("model blob: payload length mismatch");
  std::string payload(r.bytes(size));
  if (r.bytes(32) != sha256_raw(payload)) throw Error("model blob: checksum mismatch");
  return payload;
}

void write_layers(BinaryWriter& w, const Network& net) {
  w.u32(static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& layer : net.layers()) {
    w.u32(static_cast<std::uint32_t>(layer.inputs()));
    w.u32(static_cast<std::uint32_t>(layer.outputs()));
    w.u8(static_cast<std::uint8_t>(layer.activation));
    for (Index r = 0; r < layer.outputs(); ++r) {
      for (Index c = 0; c < layer.inputs(); ++c) w.f32(static_cast<float>(layer.weight(r, c)));
    }
    for (Index r = 0; r < layer.outputs(); ++r) w.f32(static_cast<float>(layer.bias[r]));
  }
}

Network read_layers(BinaryReader& r) {
  const auto count = r.u32();
  std::vector<DenseLayer> layers;
  for (std::uint32_t l = 0; l < count; ++l) {
    const auto in = static_cast<Index>(r.u32());
    const auto out = static_cast<Index>(r.u32());
    const auto act = r.u8();
    if (act > 1) throw Error("model blob: unknown activation " + std::to_string(act));
    if (in == 0 || out == 0) throw Error("model blob: empty layer");
    if (!layers.empty() && layers.back().outputs() != in) throw Error("model blob: layer shapes do not chain");
    DenseLayer layer{Matrix(out, in), Vector(out), static_cast<Activation>(act)};
    for (Index i = 0; i < out; ++i) {
      for (Index j = 0; j < in; ++j) layer.weight(i, j) = r.f32();
    }
    for (Index i = 0; i < out; ++i) layer.bias[i] = r.f32();
    layers.push_back(std::move(layer));
  }
  return Network(std::move(layers));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace dimsweep
