#pragma once

#include <array>
#include <cstdint>

namespace seedlab {

// Philox4x64-10 counter-based generator (Salmon et al., Random123).
// Every output is a pure function of (key, counter), so any draw can be
// addressed directly without replaying the stream.
using PhiloxCounter = std::array<std::uint64_t, 4>;
using PhiloxKey = std::array<std::uint64_t, 2>;

PhiloxCounter philox4x64_10(PhiloxCounter counter, PhiloxKey key) noexcept;

// Independent consumers of the same seed use distinct stream ids so that, for
// example, t-SNE initialisation never shares draws with seed selection.
enum class StreamId : std::uint64_t {
  kDiffusionNoise = 0,
  kEmbeddingInit = 1,
  kSeedSelection = 2,
  kFixture = 3,
  kPromptSplit = 4,
};

// Addressing scheme, key = {seed, stream}:
//   raw word i     -> counter {i / 4, 0, 0, 0}, lane i % 4
//   normal draw k  -> counter {k / 4, 1, 0, 0}; lanes (0,1) feed draws 4b, 4b+1
//                     and lanes (2,3) feed 4b+2, 4b+3 through Box-Muller
//                     (cosine branch for even k, sine branch for odd k).
// The two counter spaces are disjoint, so word and normal cursors never alias.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, StreamId stream = StreamId::kFixture) noexcept
      : key_{seed, static_cast<std::uint64_t>(stream)} {}

  std::uint64_t word_at(std::uint64_t index) const noexcept;
  double normal_at(std::uint64_t index) const noexcept;

  std::uint64_t next_u64() noexcept { return word_at(word_cursor_++); }
  // Uniform on [0, 1) with 53 random bits.
  double next_uniform() noexcept;
  double next_normal() noexcept { return normal_at(normal_cursor_++); }
  // Uniform integer in [0, n); n must be positive. Unbiased (Lemire rejection).
  std::uint64_t next_index(std::uint64_t n) noexcept;

  std::uint64_t seed() const noexcept { return key_[0]; }
  std::uint64_t words_consumed() const noexcept { return word_cursor_; }
  std::uint64_t normals_consumed() const noexcept { return normal_cursor_; }
  void seek_normal(std::uint64_t index) noexcept { normal_cursor_ = index; }

 private:
  PhiloxKey key_;
  std::uint64_t word_cursor_ = 0;
  std::uint64_t normal_cursor_ = 0;
};

}  // namespace seedlab
