#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ranger/error.hpp"

namespace ranger {

/// Calendar date at day resolution, stored as days since 1970-01-01.
class Date {
public:
    Date() = default;
    explicit Date(int32_t days) : days_(days) {}

    static Date from_ymd(int year, int month, int day) {
        // Howard Hinnant's days-from-civil.
        year -= month <= 2;
        const int era = (year >= 0 ? year : year - 399) / 400;
        const unsigned yoe = static_cast<unsigned>(year - era * 400);
        const unsigned doy = (153u * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1;
        const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        return Date(era * 146097 + static_cast<int>(doe) - 719468);
    }

    /// Parses "YYYY-MM-DD"; longer strings (RFC3339 timestamps) are accepted
    /// and truncated to their date part.
    static std::optional<Date> parse(std::string_view text) {
        if (text.size() < 10) return std::nullopt;
        auto digit = [&](size_t i) { return text[i] >= '0' && text[i] <= '9'; };
        for (size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
            if (!digit(i)) return std::nullopt;
        if (text[4] != '-' || text[7] != '-') return std::nullopt;
        int y = (text[0] - '0') * 1000 + (text[1] - '0') * 100 + (text[2] - '0') * 10 + (text[3] - '0');
        int m = (text[5] - '0') * 10 + (text[6] - '0');
        int d = (text[8] - '0') * 10 + (text[9] - '0');
        if (m < 1 || m > 12 || d < 1 || d > 31) return std::nullopt;
        return from_ymd(y, m, d);
    }

    std::string to_string() const {
        // civil-from-days
        int z = days_ + 719468;
        const int era = (z >= 0 ? z : z - 146096) / 146097;
        const unsigned doe = static_cast<unsigned>(z - era * 146097);
        const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
        const int y = static_cast<int>(yoe) + era * 400;
        const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        const unsigned mp = (5 * doy + 2) / 153;
        const unsigned d = doy - (153 * mp + 2) / 5 + 1;
        const unsigned m = mp + (mp < 10 ? 3 : -9);
        const int year = y + (m <= 2);
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", year, m, d);
        return buf;
    }

    int32_t days() const noexcept { return days_; }
    Date add_days(int32_t n) const { return Date(days_ + n); }

    /// First day of this date's month.
    Date month_floor() const {
        auto [y, m, d] = ymd();
        (void)d;
        return from_ymd(y, m, 1);
    }

    /// First day of the following month.
    Date next_month() const {
        auto [y, m, d] = ymd();
        (void)d;
        if (m == 12) return from_ymd(y + 1, 1, 1);
        return from_ymd(y, m + 1, 1);
    }

    auto operator<=>(const Date&) const = default;

private:
    std::tuple<int, int, int> ymd() const {
        int z = days_ + 719468;
        const int era = (z >= 0 ? z : z - 146096) / 146097;
        const unsigned doe = static_cast<unsigned>(z - era * 146097);
        const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
        const int y = static_cast<int>(yoe) + era * 400;
        const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        const unsigned mp = (5 * doy + 2) / 153;
        const unsigned d = doy - (153 * mp + 2) / 5 + 1;
        const unsigned m = mp + (mp < 10 ? 3 : -9);
        return {y + (m <= 2), static_cast<int>(m), static_cast<int>(d)};
    }

    int32_t days_ = 0;
};

/// Maven library coordinate (groupId, artifactId); identity is case-sensitive.
struct LibraryId {
    std::string group;
    std::string artifact;

    auto operator<=>(const LibraryId&) const = default;

    std::string str() const { return group + ":" + artifact; }

    /// Parses "group:artifact".
    static LibraryId parse(std::string_view text) {
        auto pos = text.find(':');
        if (pos == std::string_view::npos || pos == 0 || pos + 1 == text.size())
            throw Error(ErrorCode::InvalidArgument, "expected group:artifact, got '" + std::string(text) + "'");
        return {std::string(text.substr(0, pos)), std::string(text.substr(pos + 1))};
    }
};

enum class Scope : uint8_t { Compile, Provided, Runtime, Test, System, Import };

inline std::string_view scope_name(Scope s) {
    switch (s) {
        case Scope::Compile: return "compile";
        case Scope::Provided: return "provided";
        case Scope::Runtime: return "runtime";
        case Scope::Test: return "test";
        case Scope::System: return "system";
        case Scope::Import: return "import";
    }
    return "compile";
}

inline std::optional<Scope> scope_from_name(std::string_view name) {
    if (name == "compile") return Scope::Compile;
    if (name == "provided") return Scope::Provided;
    if (name == "runtime") return Scope::Runtime;
    if (name == "test") return Scope::Test;
    if (name == "system") return Scope::System;
    if (name == "import") return Scope::Import;
    return std::nullopt;
}

/// Scopes that propagate through transitive resolution.
inline bool scope_transitive(Scope s) { return s == Scope::Compile || s == Scope::Runtime; }

struct Diagnostic {
    enum class Severity : uint8_t { Warning, Error };
    Severity severity = Severity::Warning;
    std::string code;
    std::string message;
};

using Diagnostics = std::vector<Diagnostic>;

inline void warn(Diagnostics& diags, std::string code, std::string message) {
    diags.push_back({Diagnostic::Severity::Warning, std::move(code), std::move(message)});
}

} // namespace ranger
