#include "relunet/scalar.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

namespace relunet {

namespace {

std::string trimmed(const std::string& text) {
    std::size_t lo = 0, hi = text.size();
    while (lo < hi && std::isspace(static_cast<unsigned char>(text[lo]))) ++lo;
    while (hi > lo && std::isspace(static_cast<unsigned char>(text[hi - 1]))) --hi;
    return text.substr(lo, hi - lo);
}

// Decimal literal such as "-1.25e-3" converted without rounding.
Rational parse_decimal(const std::string& s) {
    std::size_t pos = 0;
    bool negative = false;
    if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) negative = s[pos++] == '-';
    std::string digits;
    long exponent = 0;
    bool any = false;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
        digits += s[pos++];
        any = true;
    }
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
            digits += s[pos++];
            --exponent;
            any = true;
        }
    }
    if (!any) throw InvalidInput("not a number: '" + s + "'");
    if (pos < s.size() && (s[pos] == 'e' || s[pos] == 'E')) {
        ++pos;
        std::size_t used = 0;
        long e = 0;
        try {
            e = std::stol(s.substr(pos), &used);
        } catch (const std::exception&) {
            throw InvalidInput("bad exponent in '" + s + "'");
        }
        pos += used;
        exponent += e;
    }
    if (pos != s.size()) throw InvalidInput("trailing characters in '" + s + "'");
    if (std::labs(exponent) > 4000) throw InvalidInput("exponent out of range in '" + s + "'");
    boost::multiprecision::mpz_int mantissa(digits);
    boost::multiprecision::mpz_int scale = boost::multiprecision::pow(boost::multiprecision::mpz_int(10),
                                                                      static_cast<unsigned>(std::labs(exponent)));
    Rational value = exponent >= 0 ? Rational(mantissa * scale) : Rational(mantissa, scale);
    return negative ? Rational(-value) : value;
}

}  // namespace

template <>
Rational parse_scalar<Rational>(const std::string& text) {
    std::string s = trimmed(text);
    auto slash = s.find('/');
    if (slash == std::string::npos) return parse_decimal(s);
    Rational num = parse_decimal(s.substr(0, slash));
    Rational den = parse_decimal(s.substr(slash + 1));
    if (den == 0) throw InvalidInput("zero denominator in '" + s + "'");
    return num / den;
}

template <>
double parse_scalar<double>(const std::string& text) {
    std::string s = trimmed(text);
    if (s.find('/') != std::string::npos) return to_double(parse_scalar<Rational>(s));
    double value = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw InvalidInput("not a number: '" + s + "'");
    return value;
}

std::string format_scalar(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::string format_scalar(const Rational& x) { return x.str(); }

}  // namespace relunet
