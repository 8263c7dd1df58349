#include "seedlab/random.hpp"

#include <cmath>
#include <numbers>

namespace seedlab {
namespace {

constexpr std::uint64_t kPhiloxM0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kPhiloxM1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) noexcept {
  __extension__ using u128 = unsigned __int128;
  const u128 product = static_cast<u128>(a) * b;
  hi = static_cast<std::uint64_t>(product >> 64);
  lo = static_cast<std::uint64_t>(product);
}

constexpr double kTwoPow53Inv = 1.0 / 9007199254740992.0;

// (0, 1]; safe as a logarithm argument.
inline double open_unit(std::uint64_t w) noexcept {
  return static_cast<double>((w >> 11) + 1) * kTwoPow53Inv;
}

inline double half_open_unit(std::uint64_t w) noexcept {
  return static_cast<double>(w >> 11) * kTwoPow53Inv;
}

}  // namespace

PhiloxCounter philox4x64_10(PhiloxCounter ctr, PhiloxKey key) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint64_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::uint64_t CounterRng::word_at(std::uint64_t index) const noexcept {
  const auto block = philox4x64_10({index / 4, 0, 0, 0}, key_);
  return block[index % 4];
}

double CounterRng::normal_at(std::uint64_t index) const noexcept {
  const auto block = philox4x64_10({index / 4, 1, 0, 0}, key_);
  const std::size_t lane = (index % 4) / 2 * 2;
  const double radius = std::sqrt(-2.0 * std::log(open_unit(block[lane])));
  const double angle = 2.0 * std::numbers::pi * half_open_unit(block[lane + 1]);
  return (index % 2 == 0) ? radius * std::cos(angle) : radius * std::sin(angle);
}

double CounterRng::next_uniform() noexcept { return half_open_unit(next_u64()); }

std::uint64_t CounterRng::next_index(std::uint64_t n) noexcept {
  std::uint64_t hi, lo;
  mulhilo(next_u64(), n, hi, lo);
  if (lo < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (lo < threshold) {
      mulhilo(next_u64(), n, hi, lo);
    }
  }
  return hi;
}

}  // namespace seedlab
