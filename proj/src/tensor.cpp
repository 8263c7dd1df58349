#include "seedlab/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "json.hpp"
#include "seedlab/error.hpp"

namespace seedlab {
namespace {

constexpr std::size_t kPrefixBytes = sizeof(kTensorMagic) + 4;
constexpr std::uint32_t kMaxHeaderBytes = 1U << 20;

std::uint32_t to_little(std::uint32_t v) noexcept {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xFFU) << 24) | ((v & 0xFF00U) << 8) | ((v >> 8) & 0xFF00U) | (v >> 24);
  }
  return v;
}

std::size_t checked_count(const std::vector<std::size_t>& shape, ErrorCode code) {
  if (shape.empty()) {
    throw Error(code, "tensor shape must have at least one dimension");
  }
  std::size_t count = 1;
  for (std::size_t dim : shape) {
    if (dim == 0) {
      throw Error(code, "tensor dimensions must be positive");
    }
    if (count > std::numeric_limits<std::size_t>::max() / 4 / dim) {
      throw Error(code, "tensor shape overflows addressable size");
    }
    count *= dim;
  }
  return count;
}

}  // namespace

bool bit_equal(const TensorBlob& a, const TensorBlob& b) noexcept {
  return a.dtype == b.dtype && a.shape == b.shape && a.data.size() == b.data.size() &&
         (a.data.empty() || std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0);
}

void validate_blob(const TensorBlob& blob) {
  const std::size_t count = checked_count(blob.shape, ErrorCode::kValidation);
  if (blob.data.size() != count) {
    throw Error(ErrorCode::kValidation, "tensor payload has " + std::to_string(blob.data.size()) +
                                            " elements but shape implies " + std::to_string(count));
  }
}

std::vector<std::uint8_t> encode_tensor(const TensorBlob& blob) {
  validate_blob(blob);
  const std::string header = nlohmann::json{{"dtype", "f32"}, {"shape", blob.shape}}.dump();
  const std::uint32_t header_len = to_little(static_cast<std::uint32_t>(header.size()));

  std::vector<std::uint8_t> out(kPrefixBytes + header.size() + 4 * blob.data.size());
  std::memcpy(out.data(), kTensorMagic, sizeof(kTensorMagic));
  std::memcpy(out.data() + sizeof(kTensorMagic), &header_len, 4);
  std::memcpy(out.data() + kPrefixBytes, header.data(), header.size());
  std::uint8_t* payload = out.data() + kPrefixBytes + header.size();
  for (std::size_t i = 0; i < blob.data.size(); ++i) {
    const std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(blob.data[i]));
    std::memcpy(payload + 4 * i, &bits, 4);
  }
  return out;
}

TensorBlob decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPrefixBytes || std::memcmp(bytes.data(), kTensorMagic, sizeof(kTensorMagic)) != 0) {
    throw Error(ErrorCode::kParse, "missing SDLB0001 magic");
  }
  std::uint32_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + sizeof(kTensorMagic), 4);
  header_len = to_little(header_len);
  if (header_len > kMaxHeaderBytes) {
    throw Error(ErrorCode::kParse, "tensor header length " + std::to_string(header_len) + " is implausible");
  }
  if (bytes.size() - kPrefixBytes < header_len) {
    throw Error(ErrorCode::kTruncation, "file ends inside the tensor header");
  }

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + kPrefixBytes, bytes.begin() + kPrefixBytes + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed tensor header: ") + e.what());
  }
  if (!header.is_object() || !header.contains("dtype") || !header.contains("shape") ||
      !header["shape"].is_array()) {
    throw Error(ErrorCode::kParse, "tensor header needs dtype and shape");
  }
  if (header["dtype"] != "f32") {
    throw Error(ErrorCode::kParse, "unsupported dtype " + header["dtype"].dump());
  }

  TensorBlob blob;
  for (const auto& dim : header["shape"]) {
    if (!dim.is_number_unsigned()) {
      throw Error(ErrorCode::kParse, "tensor dimensions must be non-negative integers");
    }
    blob.shape.push_back(dim.get<std::size_t>());
  }
  const std::size_t count = checked_count(blob.shape, ErrorCode::kParse);

  const std::size_t available = bytes.size() - kPrefixBytes - header_len;
  if (available < 4 * count) {
    throw Error(ErrorCode::kTruncation, "payload has " + std::to_string(available) + " bytes, shape requires " +
                                            std::to_string(4 * count));
  }
  if (available > 4 * count) {
    throw Error(ErrorCode::kParse, "trailing bytes after tensor payload");
  }

  blob.data.resize(count);
  const std::uint8_t* payload = bytes.data() + kPrefixBytes + header_len;
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, payload + 4 * i, 4);
    blob.data[i] = std::bit_cast<float>(to_little(bits));
  }
  return blob;
}

TensorBlob read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open tensor file " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw Error(ErrorCode::kIo, "read failed for " + path.string());
  }
  return decode_tensor(bytes);
}

void write_tensor(const TensorBlob& blob, const std::filesystem::path& path) {
  const auto bytes = encode_tensor(blob);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorCode::kIo, "write failed for " + path.string());
  }
}

}  // namespace seedlab
