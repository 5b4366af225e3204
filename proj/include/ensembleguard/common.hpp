#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace ensembleguard {

inline constexpr std::string_view kVersion = "1.0.0";

/// Row-major dense matrix; one record per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Probability vector over the classes of one taxonomy.
using ClassDistribution = std::vector<double>;

// Errors caused by bad input (files, config, arguments). The CLI maps these
// to exit status 2; everything else is an internal failure.
class UserError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public UserError {
public:
    using UserError::UserError;
};

class SchemaError : public UserError {
public:
    using UserError::UserError;
};

class ConfigError : public UserError {
public:
    using UserError::UserError;
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace text {

inline std::string_view trim(std::string_view s) {
    const auto* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

/// Like split, but the pieces own their text.
inline std::vector<std::string> tokens(std::string_view s, char sep) {
    std::vector<std::string> out;
    for (auto part : split(s, sep)) out.emplace_back(part);
    return out;
}

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) {
        if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    }
    return out;
}

/// Shortest representation that parses back to the same double.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string fixed(double v, int decimals) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, decimals);
    return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s == "inf" || s == "Infinity" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf" || s == "-Infinity") return -std::numeric_limits<double>::infinity();
    if (s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline double require_double(std::string_view s, std::string_view what) {
    auto v = parse_double(s);
    if (!v) throw ParseError("expected a number for " + std::string(what) + ", got '" + std::string(s) + "'");
    return *v;
}

inline long long require_int(std::string_view s, std::string_view what) {
    s = trim(s);
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) {
        throw ParseError("expected an integer for " + std::string(what) + ", got '" + std::string(s) + "'");
    }
    return v;
}

inline std::uint64_t require_uint(std::string_view s, std::string_view what) {
    s = trim(s);
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) {
        throw ParseError("expected a non-negative integer for " + std::string(what) + ", got '" + std::string(s) + "'");
    }
    return v;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace text

inline std::size_t argmax(const double* v, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

inline std::size_t argmax(const ClassDistribution& v) { return argmax(v.data(), v.size()); }

/// In-place numerically stable softmax. -inf entries get probability 0.
inline void softmax_inplace(double* v, std::size_t n) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = std::exp(v[i] - m);
        sum += v[i];
    }
    for (std::size_t i = 0; i < n; ++i) v[i] /= sum;
}

inline ClassDistribution softmax(ClassDistribution v) {
    softmax_inplace(v.data(), v.size());
    return v;
}

}  // namespace ensembleguard
