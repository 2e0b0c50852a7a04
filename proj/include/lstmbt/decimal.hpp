#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lstmbt {

// Fixed-point decimal with 8 fractional digits. All ledger and report
// arithmetic goes through this type so that sums are exact.
class Decimal {
 public:
  static constexpr int kScaleDigits = 8;
  static constexpr std::int64_t kScale = 100'000'000;

  constexpr Decimal() = default;

  static constexpr Decimal from_units(std::int64_t units) {
    Decimal d;
    d.units_ = units;
    return d;
  }

  static constexpr Decimal from_int(std::int64_t whole) { return from_units(whole * kScale); }

  // Parses "[-+]digits[.digits]". Digits beyond the 8th decimal are rounded
  // half away from zero. Returns nullopt on malformed input or overflow.
  static std::optional<Decimal> parse(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
      text.remove_suffix(1);
    if (text.empty()) return std::nullopt;

    bool negative = false;
    if (text.front() == '+' || text.front() == '-') {
      negative = text.front() == '-';
      text.remove_prefix(1);
    }
    if (text.empty()) return std::nullopt;

    constexpr std::int64_t kLimit = std::numeric_limits<std::int64_t>::max() / 10;
    std::int64_t whole = 0;
    std::size_t pos = 0;
    std::size_t int_digits = 0;
    for (; pos < text.size() && text[pos] != '.'; ++pos) {
      char ch = text[pos];
      if (ch < '0' || ch > '9') return std::nullopt;
      if (whole > kLimit / kScale) return std::nullopt;
      whole = whole * 10 + (ch - '0');
      ++int_digits;
    }

    std::int64_t frac = 0;
    int frac_digits = 0;
    bool round_up = false;
    if (pos < text.size()) {
      ++pos;  // '.'
      if (pos == text.size() && int_digits == 0) return std::nullopt;
      for (; pos < text.size(); ++pos) {
        char ch = text[pos];
        if (ch < '0' || ch > '9') return std::nullopt;
        if (frac_digits < kScaleDigits) {
          frac = frac * 10 + (ch - '0');
          ++frac_digits;
        } else if (frac_digits == kScaleDigits) {
          round_up = ch >= '5';
          ++frac_digits;
        }
      }
    } else if (int_digits == 0) {
      return std::nullopt;
    }
    for (int k = std::min(frac_digits, kScaleDigits); k < kScaleDigits; ++k) frac *= 10;

    std::int64_t units = whole * kScale + frac + (round_up ? 1 : 0);
    return from_units(negative ? -units : units);
  }

  // Nearest representable decimal to a double (used only for synthetic data).
  static Decimal from_double(double value) {
    if (!std::isfinite(value) || std::fabs(value) > 9.0e10)
      throw std::out_of_range("decimal: value out of range");
    return from_units(static_cast<std::int64_t>(std::llround(value * static_cast<double>(kScale))));
  }

  constexpr std::int64_t units() const { return units_; }
  double to_double() const { return static_cast<double>(units_) / static_cast<double>(kScale); }

  // Shortest exact rendering with at least `min_decimals` fractional digits.
  std::string to_string(int min_decimals = 2) const {
    std::uint64_t mag = units_ < 0 ? static_cast<std::uint64_t>(-(units_ + 1)) + 1
                                   : static_cast<std::uint64_t>(units_);
    std::string frac = std::to_string(mag % static_cast<std::uint64_t>(kScale));
    frac.insert(0, static_cast<std::size_t>(kScaleDigits) - frac.size(), '0');
    while (frac.size() > static_cast<std::size_t>(min_decimals) && frac.back() == '0') frac.pop_back();
    std::string out = units_ < 0 ? "-" : "";
    out += std::to_string(mag / static_cast<std::uint64_t>(kScale));
    if (!frac.empty()) out += "." + frac;
    return out;
  }

  // Fixed rendering rounded half away from zero to `decimals` places.
  std::string to_fixed(int decimals) const {
    if (decimals >= kScaleDigits) return to_string(decimals);
    std::int64_t step = 1;
    for (int k = decimals; k < kScaleDigits; ++k) step *= 10;
    std::int64_t mag = units_ < 0 ? -units_ : units_;
    std::int64_t rounded = (mag + step / 2) / step * step;
    Decimal r = from_units(units_ < 0 ? -rounded : rounded);
    std::string s = r.to_string(decimals);
    if (s == "-0" || s.rfind("-0.", 0) == 0) {
      if (r.units_ == 0) s.erase(0, 1);
    }
    return s;
  }

  constexpr Decimal operator-() const { return from_units(-units_); }
  constexpr Decimal& operator+=(Decimal rhs) {
    units_ += rhs.units_;
    return *this;
  }
  constexpr Decimal& operator-=(Decimal rhs) {
    units_ -= rhs.units_;
    return *this;
  }
  friend constexpr Decimal operator+(Decimal a, Decimal b) { return a += b; }
  friend constexpr Decimal operator-(Decimal a, Decimal b) { return a -= b; }
  friend constexpr auto operator<=>(Decimal, Decimal) = default;

  friend std::ostream& operator<<(std::ostream& os, Decimal d) { return os << d.to_string(); }

 private:
  std::int64_t units_ = 0;
};

}  // namespace lstmbt
