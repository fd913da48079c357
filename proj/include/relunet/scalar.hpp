#pragma once

#include <boost/multiprecision/gmp.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace relunet {

using Rational = boost::multiprecision::number<boost::multiprecision::gmp_rational,
                                               boost::multiprecision::et_off>;

enum class ScalarMode { Float, Rational };

template <class S>
struct ScalarTraits;

template <>
struct ScalarTraits<double> {
    static constexpr bool exact = false;
    static constexpr const char* name = "float";
};

template <>
struct ScalarTraits<Rational> {
    static constexpr bool exact = true;
    static constexpr const char* name = "rational";
};

template <class S>
inline constexpr bool is_exact_v = ScalarTraits<S>::exact;

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline double to_double(double x) { return x; }
inline double to_double(const Rational& x) { return x.convert_to<double>(); }

template <class S>
S from_double(double x) {
    return S(x);
}

inline double abs_value(double x) { return std::fabs(x); }
inline Rational abs_value(const Rational& x) { return x < 0 ? Rational(-x) : x; }

template <class S>
int sign_of(const S& x) {
    return x > 0 ? 1 : (x < 0 ? -1 : 0);
}

// Exact zero test for rationals; relative tolerance for doubles.
inline bool near_zero(double x, double scale, double rel = 1e-12) {
    return std::fabs(x) <= rel * (1.0 + std::fabs(scale));
}
inline bool near_zero(const Rational& x, double, double = 0.0) { return x == 0; }

template <class S>
bool near_equal(const S& x, const S& y, double scale, double rel = 1e-12) {
    return near_zero(S(x - y), scale, rel);
}

template <class S>
S parse_scalar(const std::string& text);

template <>
double parse_scalar<double>(const std::string& text);
template <>
Rational parse_scalar<Rational>(const std::string& text);

std::string format_scalar(double x);
std::string format_scalar(const Rational& x);

}  // namespace relunet
