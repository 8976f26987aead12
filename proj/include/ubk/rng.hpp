#pragma once

#include <cstdint>
#include <limits>

namespace ubk {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t z)
{
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace detail

//! Counter-based generator: the i-th output of a stream is a pure function
//! of (key, i), where the key hashes (master seed, replicate, draw). Streams
//! have no sequential dependence on each other, so any schedule of workers
//! reproduces the same numbers.
//!
//! Satisfies the UniformRandomBitGenerator requirements.
class CounterRng
{
public:
  using result_type = std::uint64_t;

  constexpr CounterRng(std::uint64_t master_seed,
                       std::uint64_t replicate = 0,
                       std::uint64_t draw = 0)
    : key_(detail::splitmix64(detail::splitmix64(detail::splitmix64(master_seed) ^
                                                 (replicate * 0xd1b54a32d192ed03ULL)) ^
                              (draw * 0xabc98388fb8fac03ULL)))
  {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()()
  {
    return detail::splitmix64(key_ + 0x632be59bd9b4e019ULL * counter_++);
  }

  //! Uniform on [0, 1) with 53 random bits.
  constexpr double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  //! Uniform on (0, 1).
  constexpr double uniform_open()
  {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  constexpr std::uint64_t counter() const { return counter_; }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

//! Stream tags keep independent consumers of one master seed apart.
enum class StreamTag : std::uint64_t
{
  sample = 0,
  rademacher = 1ULL << 40,
  atoms = 2ULL << 40,
};

inline constexpr std::uint64_t tagged(StreamTag tag, std::uint64_t replicate)
{
  return static_cast<std::uint64_t>(tag) ^ replicate;
}

} // namespace ubk
