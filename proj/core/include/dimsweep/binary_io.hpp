#pragma once

// Little-endian binary encoding helpers and the versioned model envelope used
// for autoencoder, forest and MLP blobs.
//
// Envelope layout:
//   "DSWM" | u32 version | u32 kind | u64 payload_size | payload | sha256(payload)

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "dimsweep/nn.hpp"

namespace dimsweep {

class BinaryWriter {
 public:
  explicit BinaryWriter(std::string& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v);
  void f64(double v);
  void bytes(std::string_view b) { out_.append(b); }

 private:
  std::string& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::string_view in) : in_(in) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32();
  double f64();
  std::string_view bytes(std::size_t n);

  [[nodiscard]] std::size_t remaining() const { return in_.size() - pos_; }
  [[nodiscard]] bool done() const { return pos_ == in_.size(); }

 private:
  std::string_view take(std::size_t n);
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::string sha256_hex(std::string_view bytes);

enum class ModelKind : std::uint32_t { Autoencoder = 1, Forest = 2, Mlp = 3, AeCheckpoint = 4 };

inline constexpr std::uint32_t kEnvelopeVersion = 1;

std::string wrap_envelope(ModelKind kind, std::string_view payload);
/// Returns the payload; throws Error on bad magic, version, kind, length or
/// checksum.
std::string unwrap_envelope(std::string_view blob, ModelKind expected);

void write_layers(BinaryWriter& w, const Network& net);
Network read_layers(BinaryReader& r);

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace dimsweep
