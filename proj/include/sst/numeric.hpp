#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace sst {

// Arbitrary-precision rational, the scalar of the exact mode. Expression
// templates are off so values behave like ordinary scalars in std
// algorithms. The float mode uses plain double with a 1e-9 relative
// tolerance on structural checks.
using Rat = boost::multiprecision::number<
    boost::multiprecision::backends::rational_adaptor<boost::multiprecision::backends::cpp_int_backend<>>,
    boost::multiprecision::et_off>;
using BigInt = boost::multiprecision::cpp_int;

// Error taxonomy, mapped to CLI exit codes (validation 2, precondition 3,
// cap 4).
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct precondition_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct cap_exceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <class S>
struct num;

template <>
struct num<double> {
    static constexpr bool exact = false;
    static constexpr double tol = 1e-9;

    static bool eq(double a, double b) {
        return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
    }
    // a >= b up to tolerance
    static bool ge(double a, double b) { return a >= b || eq(a, b); }
    static bool is_zero(double a) { return eq(a, 0.0); }
    static double from_int(long long n) { return static_cast<double>(n); }
    static double ratio(long long p, long long q) {
        return static_cast<double>(p) / static_cast<double>(q);
    }
};

template <>
struct num<Rat> {
    static constexpr bool exact = true;

    static bool eq(const Rat& a, const Rat& b) { return a == b; }
    static bool ge(const Rat& a, const Rat& b) { return a >= b; }
    static bool is_zero(const Rat& a) { return a == 0; }
    static Rat from_int(long long n) { return Rat(n); }
    static Rat ratio(long long p, long long q) { return Rat(p, q); }
};

inline double to_double(double x) { return x; }
inline double to_double(const Rat& x) { return x.template convert_to<double>(); }

inline double log_nats(double x) { return std::log(x); }
inline double log_nats(const Rat& x) {
    // log of a big rational without overflowing double: log(num) - log(den)
    // via msb-scaled doubles.
    const BigInt n = numerator(x), d = denominator(x);
    if (n <= 0) {
        if (n == 0) return -std::numeric_limits<double>::infinity();
        throw precondition_error("log of negative rational");
    }
    auto big_log = [](const BigInt& v) {
        const unsigned bits = msb(v);
        if (bits < 900) return std::log(v.template convert_to<double>());
        const BigInt shifted = v >> (bits - 64);
        return std::log(shifted.template convert_to<double>()) +
               static_cast<double>(bits - 64) * std::log(2.0);
    };
    return big_log(n) - big_log(d);
}
inline double log2_bits(double x) { return std::log2(x); }
inline double log2_bits(const Rat& x) { return log_nats(x) / std::log(2.0); }

// Parses "p/q", integers and plain decimals ("0.25") into a scalar.
inline Rat parse_rational(const std::string& text) {
    const auto slash = text.find('/');
    try {
        if (slash != std::string::npos) {
            const BigInt p(text.substr(0, slash));
            const BigInt q(text.substr(slash + 1));
            if (q == 0) throw validation_error("zero denominator: " + text);
            return Rat(p, q);
        }
        const auto dot = text.find('.');
        if (dot != std::string::npos) {
            const std::string whole = text.substr(0, dot);
            const std::string frac = text.substr(dot + 1);
            if (frac.find_first_not_of("0123456789") != std::string::npos)
                throw validation_error("bad number: " + text);
            BigInt den = 1;
            for (size_t i = 0; i < frac.size(); ++i) den *= 10;
            const bool neg = !whole.empty() && whole[0] == '-';
            BigInt w(whole.empty() || whole == "-" ? "0" : whole);
            BigInt f(frac.empty() ? "0" : frac);
            Rat r = Rat(abs(w)) + Rat(f, den);
            return neg ? -r : r;
        }
        return Rat(BigInt(text));
    } catch (const std::exception& e) {
        throw validation_error("cannot parse rational '" + text + "': " + e.what());
    }
}

template <class S>
S parse_number(const std::string& text);

template <>
inline Rat parse_number<Rat>(const std::string& text) {
    return parse_rational(text);
}
template <>
inline double parse_number<double>(const std::string& text) {
    try {
        size_t pos = 0;
        const auto slash = text.find('/');
        if (slash != std::string::npos)
            return std::stod(text.substr(0, slash)) / std::stod(text.substr(slash + 1));
        const double v = std::stod(text, &pos);
        if (pos != text.size()) throw validation_error("trailing junk in number: " + text);
        return v;
    } catch (const validation_error&) {
        throw;
    } catch (const std::exception&) {
        throw validation_error("cannot parse number '" + text + "'");
    }
}

inline std::string format_number(const Rat& x) {
    std::ostringstream os;
    os << numerator(x);
    if (denominator(x) != 1) os << "/" << denominator(x);
    return os.str();
}
inline std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace sst
