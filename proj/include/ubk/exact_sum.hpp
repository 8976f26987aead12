#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace ubk {

//! Exact accumulator for sums of doubles.
//!
//! Every finite double is an integer multiple of 2^-1074, so the running sum
//! is held as a wide fixed-point integer split over 32-bit limbs (stored in
//! signed 64-bit slots so carries can be deferred). Addition is exact and
//! order independent; `value()` returns the correctly rounded double.
class ExactSum
{
public:
  ExactSum() = default;
  explicit ExactSum(double v) { add(v); }

  void add(double v)
  {
    if (v == 0.0)
      return;
    if (!std::isfinite(v)) {
      special_ += v;
      return;
    }
    int exp = 0;
    const double frac = std::frexp(v, &exp);
    auto mant = static_cast<std::int64_t>(std::ldexp(frac, 53));
    int pos = exp - 53 + kBias;
    if (pos < 0) {
      mant >>= -pos; // subnormal: the dropped bits are zero
      pos = 0;
    }
    const bool negative = mant < 0;
    const auto mag = static_cast<unsigned __int128>(negative ? -mant : mant)
                     << (pos % kLimbBits);
    const int idx = pos / kLimbBits;
    for (int part = 0; part < 3; ++part) {
      const auto chunk =
        static_cast<std::int64_t>((mag >> (part * kLimbBits)) & kLimbMask);
      limbs_[idx + part] += negative ? -chunk : chunk;
    }
    if (++pending_ >= kNormalizeEvery)
      normalize();
  }

  ExactSum& operator+=(double v)
  {
    add(v);
    return *this;
  }

  ExactSum& operator+=(const ExactSum& other)
  {
    ExactSum rhs = other;
    rhs.normalize();
    normalize();
    for (int i = 0; i < kLimbs; ++i)
      limbs_[i] += rhs.limbs_[i];
    special_ += rhs.special_;
    normalize();
    return *this;
  }

  friend ExactSum operator+(ExactSum lhs, const ExactSum& rhs)
  {
    lhs += rhs;
    return lhs;
  }

  friend bool operator==(const ExactSum& a, const ExactSum& b)
  {
    ExactSum x = a, y = b;
    x.normalize();
    y.normalize();
    if (std::isnan(x.special_) || std::isnan(y.special_))
      return false;
    return x.special_ == y.special_ && x.limbs_ == y.limbs_;
  }

  bool is_zero() const { return *this == ExactSum{}; }

  //! Correctly rounded (to nearest, ties to even) value of the exact sum.
  double value() const
  {
    if (special_ != 0.0 || std::isnan(special_))
      return special_;
    ExactSum m = *this;
    m.normalize();
    bool negative = m.limbs_[kLimbs - 1] < 0;
    if (negative) {
      for (auto& l : m.limbs_)
        l = -l;
      m.normalize();
    }
    int top = kLimbs - 1;
    while (top >= 0 && m.limbs_[top] == 0)
      --top;
    if (top < 0)
      return 0.0;
    const int bit_len = top * kLimbBits + bit_width(m.limbs_[top]);
    double out;
    if (bit_len <= 53) {
      std::uint64_t v = 0;
      for (int i = top; i >= 0; --i)
        v = (v << kLimbBits) | static_cast<std::uint64_t>(m.limbs_[i]);
      out = std::ldexp(static_cast<double>(v), -kBias);
    } else {
      // keep 53 bits plus a round bit, fold the rest into a sticky bit
      const int shift = bit_len - 54;
      std::uint64_t q = 0;
      for (int b = bit_len - 1; b >= shift; --b)
        q = (q << 1) | m.bit(b);
      bool sticky = false;
      for (int b = shift - 1; b >= 0 && !sticky; --b)
        sticky = m.bit(b) != 0;
      const bool round_bit = (q & 1U) != 0;
      q >>= 1;
      if (round_bit && (sticky || (q & 1U) != 0))
        ++q;
      out = std::ldexp(static_cast<double>(q), shift + 1 - kBias);
    }
    return negative ? -out : out;
  }

private:
  static constexpr int kLimbBits = 32;
  static constexpr int kBias = 1074;
  static constexpr int kLimbs = 72;
  static constexpr std::int64_t kLimbMask = (std::int64_t{ 1 } << kLimbBits) - 1;
  static constexpr int kNormalizeEvery = 1 << 29;

  static int bit_width(std::int64_t v)
  {
    int w = 0;
    for (auto u = static_cast<std::uint64_t>(v); u != 0; u >>= 1)
      ++w;
    return w;
  }

  std::uint64_t bit(int b) const
  {
    return (static_cast<std::uint64_t>(limbs_[b / kLimbBits]) >> (b % kLimbBits)) & 1U;
  }

  // Brings every limb except the top one into [0, 2^32). The resulting
  // representation is unique for a given value.
  void normalize()
  {
    for (int i = 0; i + 1 < kLimbs; ++i) {
      const std::int64_t carry = limbs_[i] >> kLimbBits;
      limbs_[i] -= carry * (std::int64_t{ 1 } << kLimbBits);
      limbs_[i + 1] += carry;
    }
    pending_ = 0;
  }

  std::array<std::int64_t, kLimbs> limbs_{};
  double special_ = 0.0;
  int pending_ = 0;
};

} // namespace ubk
