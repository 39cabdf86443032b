#pragma once

// Minimal line-oriented CSV helpers shared by the parsers. Fields are plain
// comma-separated tokens; quoting is not part of any gazelab format.

#include <charconv>
#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "gazelab/error.hpp"

namespace gazelab::csv {

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

/// Iterates non-blank lines, tracking the 1-based physical line number.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    bool next(std::string& line) {
        while (std::getline(in_, line)) {
            ++line_no_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (trim(line).empty()) continue;
            return true;
        }
        return false;
    }

    std::size_t line_no() const noexcept { return line_no_; }

private:
    std::istream& in_;
    std::size_t line_no_ = 0;
};

inline double to_double(std::string_view field, std::size_t line, std::string_view name) {
    field = trim(field);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty())
        throw ParseError(line, "field '" + std::string(name) + "': not a number: '" + std::string(field) + "'");
    return v;
}

inline std::int64_t to_int(std::string_view field, std::size_t line, std::string_view name) {
    field = trim(field);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty())
        throw ParseError(line, "field '" + std::string(name) + "': not an integer: '" + std::string(field) + "'");
    return v;
}

inline void expect_header(std::string_view got, std::string_view want, std::size_t line) {
    if (trim(got) != want)
        throw ParseError(line, "unknown header '" + std::string(trim(got)) + "' (expected '" + std::string(want) + "')");
}

}  // namespace gazelab::csv
