#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace seedlab {

// On-disk layout of a tensor file (all integers little-endian):
//
//   offset 0   8 bytes   magic "SDLB0001"
//   offset 8   4 bytes   u32 header length L
//   offset 12  L bytes   UTF-8 JSON {"dtype":"f32","shape":[d0,d1,...]}
//   offset 12+L          row-major f32 payload, 4 * prod(shape) bytes
//
// The header is written with sorted keys and no whitespace, so identical
// blobs always produce identical files.
inline constexpr char kTensorMagic[8] = {'S', 'D', 'L', 'B', '0', '0', '0', '1'};

enum class DType { kF32 };

struct TensorBlob {
  DType dtype = DType::kF32;
  std::vector<std::size_t> shape;
  std::vector<float> data;

  TensorBlob() = default;
  TensorBlob(std::vector<std::size_t> shape_, std::vector<float> data_)
      : shape(std::move(shape_)), data(std::move(data_)) {}

  std::size_t rank() const noexcept { return shape.size(); }
  std::span<const float> values() const noexcept { return data; }
};

// Shapes compare by value; payloads compare by bit pattern so NaNs with equal
// payloads are equal and +0/-0 are distinct.
bool bit_equal(const TensorBlob& a, const TensorBlob& b) noexcept;

// Throws ValidationError when the shape has a zero or missing dimension or the
// payload length disagrees with the shape.
void validate_blob(const TensorBlob& blob);

std::vector<std::uint8_t> encode_tensor(const TensorBlob& blob);
TensorBlob decode_tensor(std::span<const std::uint8_t> bytes);

TensorBlob read_tensor(const std::filesystem::path& path);
void write_tensor(const TensorBlob& blob, const std::filesystem::path& path);

}  // namespace seedlab
