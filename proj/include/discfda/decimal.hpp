/**
 * @file decimal.hpp
 * @brief Exact decimal amounts for euro values entered by respondents
 */

#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "error.hpp"

namespace discfda {

/// Fixed-point decimal: value = units / 10^scale.
///
/// Amounts arrive as decimal strings ("112.50"). Ratios of two amounts are
/// computed from the integer representations so that, e.g., 100/110 is the
/// correctly rounded double rather than the quotient of two rounded doubles.
class Decimal {
public:
    static constexpr int kMaxScale = 9;

    Decimal() = default;

    static Decimal from_integer(std::int64_t v) {
        Decimal d;
        d.units_ = v;
        return d;
    }

    /// Parses [+-]digits[.digits]. Throws ParseError on anything else.
    static Decimal parse(std::string_view text) {
        Decimal d;
        std::size_t i = 0;
        bool negative = false;
        if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
            negative = text[i] == '-';
            ++i;
        }
        bool any_digit = false;
        bool seen_point = false;
        __int128 units = 0;
        int scale = 0;
        for (; i < text.size(); ++i) {
            char c = text[i];
            if (c == '.') {
                if (seen_point) throw Error(ErrorCode::ParseError, "malformed decimal '" + std::string(text) + "'");
                seen_point = true;
                continue;
            }
            if (c < '0' || c > '9') throw Error(ErrorCode::ParseError, "malformed decimal '" + std::string(text) + "'");
            any_digit = true;
            if (seen_point) {
                if (scale == kMaxScale) {
                    if (c != '0') throw Error(ErrorCode::ParseError, "too many decimal places in '" + std::string(text) + "'");
                    continue;
                }
                ++scale;
            }
            units = units * 10 + (c - '0');
            if (units > static_cast<__int128>(INT64_MAX))
                throw Error(ErrorCode::ParseError, "decimal out of range '" + std::string(text) + "'");
        }
        if (!any_digit) throw Error(ErrorCode::ParseError, "malformed decimal '" + std::string(text) + "'");
        d.units_ = static_cast<std::int64_t>(negative ? -units : units);
        d.scale_ = scale;
        d.normalize();
        return d;
    }

    /// Shortest decimal rendering of a double, used when amounts arrive as JSON numbers.
    static Decimal from_double(double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*f", kMaxScale, v);
        return parse(buf);
    }

    std::int64_t units() const noexcept { return units_; }
    int scale() const noexcept { return scale_; }

    double to_double() const noexcept {
        return static_cast<double>(static_cast<long double>(units_) / pow10(scale_));
    }

    bool is_positive() const noexcept { return units_ > 0; }

    /// this / other, evaluated on the common integer scale.
    double ratio(const Decimal& other) const {
        if (other.units_ == 0) throw Error(ErrorCode::InvalidArgument, "division by zero amount");
        int s = scale_ > other.scale_ ? scale_ : other.scale_;
        __int128 a = static_cast<__int128>(units_) * pow10_int(s - scale_);
        __int128 b = static_cast<__int128>(other.units_) * pow10_int(s - other.scale_);
        return static_cast<double>(static_cast<long double>(a) / static_cast<long double>(b));
    }

    std::string to_string() const {
        std::int64_t mag = units_ < 0 ? -units_ : units_;
        std::string digits = std::to_string(mag);
        if (scale_ > 0) {
            if (static_cast<int>(digits.size()) <= scale_)
                digits.insert(0, static_cast<std::size_t>(scale_ + 1 - static_cast<int>(digits.size())), '0');
            digits.insert(digits.size() - static_cast<std::size_t>(scale_), ".");
        }
        return units_ < 0 ? "-" + digits : digits;
    }

    friend bool operator==(const Decimal& a, const Decimal& b) = default;

private:
    void normalize() {
        while (scale_ > 0 && units_ % 10 == 0) {
            units_ /= 10;
            --scale_;
        }
    }

    static long double pow10(int n) {
        long double r = 1;
        while (n-- > 0) r *= 10;
        return r;
    }

    static __int128 pow10_int(int n) {
        __int128 r = 1;
        while (n-- > 0) r *= 10;
        return r;
    }

    std::int64_t units_ = 0;
    int scale_ = 0;
};

}  // namespace discfda
