#include <bit>
#include <cstring>

#include "doctest.h"
#include "seedlab/error.hpp"
#include "seedlab/random.hpp"
#include "seedlab/tensor.hpp"
#include "support/fixtures.hpp"
#include "support/generators.hpp"

using namespace seedlab;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::kUsage;
}

}  // namespace

TEST_CASE("shape [1] value 1.0 ends in 00 00 80 3F") {
  const auto bytes = encode_tensor(TensorBlob({1}, {1.0f}));
  REQUIRE(bytes.size() > 12);
  CHECK(std::memcmp(bytes.data(), "SDLB0001", 8) == 0);
  const std::size_t n = bytes.size();
  CHECK(bytes[n - 4] == 0x00);
  CHECK(bytes[n - 3] == 0x00);
  CHECK(bytes[n - 2] == 0x80);
  CHECK(bytes[n - 1] == 0x3F);
  std::uint32_t header_len = bytes[8] | bytes[9] << 8 | bytes[10] << 16 | std::uint32_t(bytes[11]) << 24;
  CHECK(std::string(bytes.begin() + 12, bytes.begin() + 12 + header_len) == R"({"dtype":"f32","shape":[1]})");
  CHECK(12 + header_len + 4 == n);
}

TEST_CASE("2x3 zeros round-trip to identical bytes") {
  fixtures::TempDir dir;
  const TensorBlob blob({2, 3}, std::vector<float>(6, 0.0f));
  write_tensor(blob, dir / "a.sdlb");
  const TensorBlob back = read_tensor(dir / "a.sdlb");
  CHECK(bit_equal(blob, back));
  write_tensor(back, dir / "b.sdlb");
  CHECK(fixtures::read_bytes(dir / "a.sdlb") == fixtures::read_bytes(dir / "b.sdlb"));
}

TEST_CASE("identity matrix round-trips") {
  const TensorBlob eye({2, 2}, {1, 0, 0, 1});
  CHECK(bit_equal(decode_tensor(encode_tensor(eye)), eye));
}

TEST_CASE("randomized round-trips are bit exact") {
  CounterRng rng(2024, StreamId::kFixture);
  for (int i = 0; i < 100; ++i) {
    const TensorBlob b = generators::random_blob(rng);
    const auto bytes = encode_tensor(b);
    const TensorBlob back = decode_tensor(bytes);
    REQUIRE(bit_equal(b, back));
    REQUIRE(encode_tensor(back) == bytes);
  }
}

TEST_CASE("bit_equal distinguishes signed zeros") {
  CHECK_FALSE(bit_equal(TensorBlob({1}, {0.0f}), TensorBlob({1}, {-0.0f})));
  CHECK_FALSE(bit_equal(TensorBlob({1, 2}, {0, 0}), TensorBlob({2}, {0, 0})));
}

TEST_CASE("invalid shapes are rejected on write") {
  CHECK(code_of([] { encode_tensor(TensorBlob({0}, {})); }) == ErrorCode::kValidation);
  CHECK(code_of([] { encode_tensor(TensorBlob({}, {})); }) == ErrorCode::kValidation);
  CHECK(code_of([] { encode_tensor(TensorBlob({3}, {1, 2})); }) == ErrorCode::kValidation);
}

TEST_CASE("corrupt files") {
  auto bytes = encode_tensor(TensorBlob({4}, {1, 2, 3, 4}));

  SUBCASE("bad magic") {
    auto b = bytes;
    b[0] = 'X';
    CHECK(code_of([&] { decode_tensor(b); }) == ErrorCode::kParse);
  }
  SUBCASE("shape [4] with an 8-byte payload") {
    auto b = bytes;
    b.resize(b.size() - 8);
    CHECK(code_of([&] { decode_tensor(b); }) == ErrorCode::kTruncation);
  }
  SUBCASE("trailing bytes") {
    auto b = bytes;
    b.push_back(0);
    CHECK(code_of([&] { decode_tensor(b); }) == ErrorCode::kParse);
  }
  SUBCASE("header cut short") {
    std::vector<std::uint8_t> b(bytes.begin(), bytes.begin() + 14);
    CHECK(code_of([&] { decode_tensor(b); }) == ErrorCode::kTruncation);
  }
  SUBCASE("header is not json") {
    auto b = bytes;
    b[12] = '[';
    CHECK(code_of([&] { decode_tensor(b); }) == ErrorCode::kParse);
  }
  SUBCASE("zero dimension in header") {
    std::string h = R"({"dtype":"f32","shape":[0]})";
    std::vector<std::uint8_t> b(bytes.begin(), bytes.begin() + 8);
    b.push_back(static_cast<std::uint8_t>(h.size()));
    b.insert(b.end(), {0, 0, 0});
    b.insert(b.end(), h.begin(), h.end());
    CHECK(code_of([&] { decode_tensor(b); }) == ErrorCode::kParse);
  }
  SUBCASE("unsupported dtype") {
    std::string h = R"({"dtype":"f64","shape":[1]})";
    std::vector<std::uint8_t> b(bytes.begin(), bytes.begin() + 8);
    b.push_back(static_cast<std::uint8_t>(h.size()));
    b.insert(b.end(), {0, 0, 0});
    b.insert(b.end(), h.begin(), h.end());
    b.insert(b.end(), 8, 0);
    CHECK(code_of([&] { decode_tensor(b); }) == ErrorCode::kParse);
  }
}

TEST_CASE("missing file is an io error") {
  fixtures::TempDir dir;
  CHECK(code_of([&] { read_tensor(dir / "nope.sdlb"); }) == ErrorCode::kIo);
}
