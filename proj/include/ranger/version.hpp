#pragma once

/// Maven version numbers, soft constraints, and version range sets.
///
/// Ordering follows the Maven version-order rules: versions are tokenized on
/// '.', '-' and digit/letter transitions, hyphens (and transitions) open
/// nested sublists, known qualifiers sort alpha < beta < milestone < rc <
/// snapshot < "" (release) < sp, and unknown qualifiers sort lexically after
/// the known ones. Trailing null tokens ("0", "", empty sublists) are trimmed
/// so that "1", "1.0" and "1-0" compare equal.

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ranger/error.hpp"

namespace ranger {

namespace detail {

struct VersionItem {
    enum class Type : uint8_t { Number, Qualifier, Sublist };

    Type type = Type::Number;
    std::string digits;            // Number: leading zeros stripped, "0" for zero
    std::string qualifier;         // Qualifier: lowercased, aliases resolved
    std::vector<VersionItem> sub;  // Sublist

    static VersionItem number(std::string d) {
        VersionItem it;
        it.type = Type::Number;
        size_t i = 0;
        while (i + 1 < d.size() && d[i] == '0') ++i;
        it.digits = d.empty() ? "0" : d.substr(i);
        return it;
    }

    static VersionItem word(std::string q) {
        VersionItem it;
        it.type = Type::Qualifier;
        it.qualifier = std::move(q);
        return it;
    }

    bool is_null() const {
        switch (type) {
            case Type::Number: return digits == "0";
            case Type::Qualifier: return qualifier.empty();
            case Type::Sublist: return sub.empty();
        }
        return false;
    }
};

// alpha < beta < milestone < rc < snapshot < "" < sp < everything else
inline int qualifier_rank(const std::string& q) {
    static const std::string_view known[] = {"alpha", "beta", "milestone", "rc", "snapshot", "", "sp"};
    for (int i = 0; i < 7; ++i)
        if (q == known[i]) return i;
    return 7;
}

inline int compare_qualifiers(const std::string& a, const std::string& b) {
    int ra = qualifier_rank(a), rb = qualifier_rank(b);
    if (ra != rb) return ra < rb ? -1 : 1;
    if (ra == 7) return a.compare(b) < 0 ? -1 : (a == b ? 0 : 1);
    return 0;
}

// Nonnegative big-integer comparison over normalized digit strings.
inline int compare_digits(const std::string& a, const std::string& b) {
    if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
    int c = a.compare(b);
    return c < 0 ? -1 : (c == 0 ? 0 : 1);
}

int compare_items(const VersionItem& a, const VersionItem& b);

inline int compare_atoms(const VersionItem& a, const VersionItem& b) {
    bool an = a.type == VersionItem::Type::Number;
    bool bn = b.type == VersionItem::Type::Number;
    if (an && bn) return compare_digits(a.digits, b.digits);
    if (an) {
        // zero sits exactly at the release qualifier so that padding with
        // missing tokens stays consistent; positive numbers beat everything
        if (a.digits == "0") return -compare_qualifiers(b.qualifier, "");
        return 1;
    }
    if (bn) return -compare_atoms(b, a);
    return compare_qualifiers(a.qualifier, b.qualifier);
}

inline int compare_item_to_null(const VersionItem& a) {
    switch (a.type) {
        case VersionItem::Type::Number:
            return a.digits == "0" ? 0 : 1;
        case VersionItem::Type::Qualifier:
            return compare_qualifiers(a.qualifier, "");
        case VersionItem::Type::Sublist:
            for (const auto& it : a.sub) {
                int c = compare_item_to_null(it);
                if (c != 0) return c;
            }
            return 0;
    }
    return 0;
}

inline int compare_lists(const VersionItem* a, size_t na, const VersionItem* b, size_t nb) {
    size_t n = std::max(na, nb);
    for (size_t i = 0; i < n; ++i) {
        if (i < na && i < nb) {
            int c = compare_items(a[i], b[i]);
            if (c != 0) return c;
        } else if (i < na) {
            int c = compare_item_to_null(a[i]);
            if (c != 0) return c;
        } else {
            int c = compare_item_to_null(b[i]);
            if (c != 0) return -c;
        }
    }
    return 0;
}

inline int compare_lists(const std::vector<VersionItem>& a, const std::vector<VersionItem>& b) {
    return compare_lists(a.data(), a.size(), b.data(), b.size());
}

// Kind tiebreak for content-equal items: 1.foo < 1-foo < 1-1 < 1.1, so a bare
// qualifier sorts below a sublist with the same content, which sorts below a
// bare number.
inline int kind_rank(const VersionItem& a) {
    switch (a.type) {
        case VersionItem::Type::Qualifier: return 0;
        case VersionItem::Type::Sublist: return 1;
        case VersionItem::Type::Number: return 2;
    }
    return 1;
}

// Items compare by content first (a sublist by its items, an atom as a
// one-item sequence), then by kind. Content-first keeps the order transitive
// where the raw pairwise kind rules are not, while every example in the
// published ordering table still holds.
inline int compare_items(const VersionItem& a, const VersionItem& b) {
    using T = VersionItem::Type;
    if (a.type != T::Sublist && b.type != T::Sublist) return compare_atoms(a, b);
    const VersionItem* ca = a.type == T::Sublist ? a.sub.data() : &a;
    size_t na = a.type == T::Sublist ? a.sub.size() : 1;
    const VersionItem* cb = b.type == T::Sublist ? b.sub.data() : &b;
    size_t nb = b.type == T::Sublist ? b.sub.size() : 1;
    int c = compare_lists(ca, na, cb, nb);
    if (c != 0) return c;
    int ra = kind_rank(a), rb = kind_rank(b);
    return ra < rb ? -1 : (ra == rb ? 0 : 1);
}

// Drops trailing null items (stopping at the first non-null plain item but
// scanning past non-null sublists), then splices a leading sublist into its
// parent so that 1-ga-1 collapses to 1-1.
inline void normalize_list(std::vector<VersionItem>& list) {
    for (size_t i = list.size(); i-- > 0;) {
        if (list[i].is_null())
            list.erase(list.begin() + static_cast<long>(i));
        else if (list[i].type != VersionItem::Type::Sublist)
            break;
    }
    while (!list.empty() && list.front().type == VersionItem::Type::Sublist) {
        std::vector<VersionItem> inner = std::move(list.front().sub);
        list.erase(list.begin());
        list.insert(list.begin(), std::make_move_iterator(inner.begin()),
                    std::make_move_iterator(inner.end()));
    }
}

inline std::string resolve_qualifier(std::string q, bool followed_by_digit) {
    if (followed_by_digit && q.size() == 1) {
        if (q[0] == 'a') q = "alpha";
        else if (q[0] == 'b') q = "beta";
        else if (q[0] == 'm') q = "milestone";
    }
    if (q == "ga" || q == "final" || q == "release") return "";
    if (q == "cr") return "rc";
    return q;
}

inline std::vector<VersionItem> parse_version_items(std::string_view text) {
    std::string version(text);
    for (auto& ch : version) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));

    std::vector<VersionItem> root;
    std::vector<size_t> path; // index chain of open sublists; parsing only ever descends

    auto current = [&]() -> std::vector<VersionItem>& {
        std::vector<VersionItem>* list = &root;
        for (size_t idx : path) list = &(*list)[idx].sub;
        return *list;
    };
    auto push_sublist = [&]() {
        auto& cur = current();
        VersionItem sub;
        sub.type = VersionItem::Type::Sublist;
        cur.push_back(std::move(sub));
        path.push_back(cur.size() - 1);
    };
    auto add_item = [&](bool is_digit, std::string buf, bool followed_by_digit) {
        if (is_digit)
            current().push_back(VersionItem::number(std::move(buf)));
        else
            current().push_back(VersionItem::word(resolve_qualifier(std::move(buf), followed_by_digit)));
    };

    bool is_digit = false;
    size_t start = 0;
    for (size_t i = 0; i < version.size(); ++i) {
        char c = version[i];
        if (c == '.') {
            if (i == start)
                current().push_back(VersionItem::number("0"));
            else
                add_item(is_digit, version.substr(start, i - start), false);
            start = i + 1;
        } else if (c == '-') {
            if (i == start)
                current().push_back(VersionItem::number("0"));
            else
                add_item(is_digit, version.substr(start, i - start), false);
            start = i + 1;
            push_sublist();
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            if (!is_digit && i > start) {
                // letter -> digit transition acts like a hyphen
                add_item(false, version.substr(start, i - start), true);
                start = i;
                push_sublist();
            }
            is_digit = true;
        } else {
            if (is_digit && i > start) {
                add_item(true, version.substr(start, i - start), false);
                start = i;
                push_sublist();
            }
            is_digit = false;
        }
    }
    if (version.size() > start)
        add_item(is_digit, version.substr(start), false);

    // normalize deepest-first, then the root
    while (!path.empty()) {
        normalize_list(current());
        path.pop_back();
    }
    normalize_list(root);
    return root;
}

inline void render_items(const std::vector<VersionItem>& list, std::string& out) {
    bool first = true;
    for (const auto& it : list) {
        if (!first) out += it.type == VersionItem::Type::Sublist ? '-' : '.';
        first = false;
        switch (it.type) {
            case VersionItem::Type::Number: out += it.digits; break;
            // the empty (release) qualifier re-parses via its "ga" alias
            case VersionItem::Type::Qualifier: out += it.qualifier.empty() ? "ga" : it.qualifier; break;
            case VersionItem::Type::Sublist: render_items(it.sub, out); break;
        }
    }
}

} // namespace detail

class VersionNumber {
public:
    VersionNumber() = default;

    /// Permissive Maven-style parse; only blank input is rejected.
    static VersionNumber parse(std::string_view text) {
        size_t b = 0, e = text.size();
        while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
        if (b == e) throw Error(ErrorCode::EmptyVersion, "blank version string");
        VersionNumber v;
        v.raw_.assign(text.substr(b, e - b));
        v.items_ = detail::parse_version_items(v.raw_);
        return v;
    }

    const std::string& raw() const noexcept { return raw_; }

    /// Normalized token rendering; parsing it back yields an equal version.
    std::string canonical() const {
        std::string out;
        detail::render_items(items_, out);
        if (out.empty()) out = "0";
        return out;
    }

    friend int compare_versions(const VersionNumber& a, const VersionNumber& b) {
        return detail::compare_lists(a.items_, b.items_);
    }

    bool operator==(const VersionNumber& o) const { return compare_versions(*this, o) == 0; }
    std::strong_ordering operator<=>(const VersionNumber& o) const {
        int c = compare_versions(*this, o);
        return c < 0 ? std::strong_ordering::less
                     : (c == 0 ? std::strong_ordering::equal : std::strong_ordering::greater);
    }

private:
    std::string raw_;
    std::vector<detail::VersionItem> items_;
};

inline VersionNumber parse_version(std::string_view text) { return VersionNumber::parse(text); }

/// One interval of a range set. Either bound may be absent (unbounded side).
struct Interval {
    std::optional<VersionNumber> lower;
    std::optional<VersionNumber> upper;
    bool lower_closed = false;
    bool upper_closed = false;

    bool contains(const VersionNumber& v) const {
        if (lower) {
            int c = compare_versions(v, *lower);
            if (c < 0 || (c == 0 && !lower_closed)) return false;
        }
        if (upper) {
            int c = compare_versions(v, *upper);
            if (c > 0 || (c == 0 && !upper_closed)) return false;
        }
        return true;
    }

    std::string to_string() const {
        std::string out;
        out += lower_closed ? '[' : '(';
        if (lower) out += lower->raw();
        out += ',';
        if (upper) out += upper->raw();
        out += upper_closed ? ']' : ')';
        return out;
    }
};

namespace detail {

inline Interval make_interval(std::optional<VersionNumber> lo, bool lo_closed,
                              std::optional<VersionNumber> hi, bool hi_closed) {
    if (!lo) lo_closed = false;
    if (!hi) hi_closed = false;
    if (lo && hi) {
        int c = compare_versions(*lo, *hi);
        if (c > 0)
            throw Error(ErrorCode::MalformedRange,
                        "inverted bounds [" + lo->raw() + "," + hi->raw() + "]");
        if (c == 0 && !(lo_closed && hi_closed))
            throw Error(ErrorCode::MalformedRange, "empty interval at " + lo->raw());
    }
    return Interval{std::move(lo), std::move(hi), lo_closed, hi_closed};
}

// Sorts intervals and merges overlapping or touching ones so the set is
// disjoint and ascending. Membership is unchanged.
inline std::vector<Interval> normalize_intervals(std::vector<Interval> ivs) {
    auto lower_before = [](const Interval& a, const Interval& b) {
        if (!a.lower && !b.lower) return false;
        if (!a.lower) return true;
        if (!b.lower) return false;
        int c = compare_versions(*a.lower, *b.lower);
        if (c != 0) return c < 0;
        return a.lower_closed && !b.lower_closed;
    };
    std::sort(ivs.begin(), ivs.end(), lower_before);

    std::vector<Interval> out;
    for (auto& iv : ivs) {
        if (out.empty()) {
            out.push_back(std::move(iv));
            continue;
        }
        Interval& prev = out.back();
        bool joined = false;
        if (!prev.upper) {
            joined = true; // unbounded top swallows the rest
        } else if (iv.lower) {
            int c = compare_versions(*iv.lower, *prev.upper);
            if (c < 0 || (c == 0 && (prev.upper_closed || iv.lower_closed))) joined = true;
        } else {
            joined = true;
        }
        if (!joined) {
            out.push_back(std::move(iv));
            continue;
        }
        if (prev.upper) {
            if (!iv.upper) {
                prev.upper.reset();
                prev.upper_closed = false;
            } else {
                int c = compare_versions(*iv.upper, *prev.upper);
                if (c > 0 || (c == 0 && iv.upper_closed && !prev.upper_closed)) {
                    prev.upper = std::move(iv.upper);
                    prev.upper_closed = iv.upper_closed;
                }
            }
        }
    }
    return out;
}

} // namespace detail

/// A dependency version constraint: either a soft preferred version or a set
/// of disjoint intervals.
class VersionSpec {
public:
    enum class Kind : uint8_t { Soft, RangeSet };

    static VersionSpec soft(VersionNumber preferred) {
        VersionSpec s;
        s.kind_ = Kind::Soft;
        s.text_ = preferred.raw();
        s.preferred_ = std::move(preferred);
        return s;
    }

    static VersionSpec range_set(std::vector<Interval> intervals) {
        if (intervals.empty()) throw Error(ErrorCode::MalformedRange, "empty range set");
        VersionSpec s;
        s.kind_ = Kind::RangeSet;
        s.intervals_ = detail::normalize_intervals(std::move(intervals));
        std::string text;
        for (const auto& iv : s.intervals_) {
            if (!text.empty()) text += ',';
            text += iv.to_string();
        }
        s.text_ = std::move(text);
        return s;
    }

    Kind kind() const noexcept { return kind_; }
    bool is_soft() const noexcept { return kind_ == Kind::Soft; }
    const VersionNumber& preferred() const { return preferred_; }
    const std::vector<Interval>& intervals() const { return intervals_; }

    bool contains(const VersionNumber& v) const {
        if (kind_ == Kind::Soft) return compare_versions(preferred_, v) == 0;
        for (const auto& iv : intervals_)
            if (iv.contains(v)) return true;
        return false;
    }

    /// True when the final interval has no upper bound.
    bool open_upper() const {
        return kind_ == Kind::RangeSet && !intervals_.empty() && !intervals_.back().upper;
    }

    const std::string& text() const noexcept { return text_; }

private:
    friend VersionSpec parse_version_spec(std::string_view);

    Kind kind_ = Kind::Soft;
    VersionNumber preferred_;
    std::vector<Interval> intervals_;
    std::string text_;
};

inline bool spec_contains(const VersionSpec& spec, const VersionNumber& v) {
    return spec.contains(v);
}

inline VersionSpec parse_version_spec(std::string_view text) {
    size_t b = 0, e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    std::string_view s = text.substr(b, e - b);
    if (s.empty()) throw Error(ErrorCode::MalformedRange, "blank version spec");

    if (s.find('[') == std::string_view::npos && s.find('(') == std::string_view::npos) {
        if (s.find(',') != std::string_view::npos || s.find(']') != std::string_view::npos ||
            s.find(')') != std::string_view::npos)
            throw Error(ErrorCode::MalformedRange, "unbalanced brackets in '" + std::string(s) + "'");
        return VersionSpec::soft(VersionNumber::parse(s));
    }

    auto trimmed = [](std::string_view v) {
        size_t tb = 0, te = v.size();
        while (tb < te && std::isspace(static_cast<unsigned char>(v[tb]))) ++tb;
        while (te > tb && std::isspace(static_cast<unsigned char>(v[te - 1]))) --te;
        return v.substr(tb, te - tb);
    };

    std::vector<Interval> intervals;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i >= s.size()) break;
        if (s[i] != '[' && s[i] != '(')
            throw Error(ErrorCode::MalformedRange, "expected '[' or '(' in '" + std::string(s) + "'");
        bool lo_closed = s[i] == '[';
        size_t close = s.find_first_of("])", i + 1);
        if (close == std::string_view::npos)
            throw Error(ErrorCode::MalformedRange, "unbalanced brackets in '" + std::string(s) + "'");
        bool hi_closed = s[close] == ']';
        std::string_view inner = s.substr(i + 1, close - i - 1);

        auto comma = inner.find(',');
        std::optional<VersionNumber> lo, hi;
        if (comma == std::string_view::npos) {
            auto v = trimmed(inner);
            if (v.empty())
                throw Error(ErrorCode::MalformedRange, "empty interval in '" + std::string(s) + "'");
            if (!lo_closed || !hi_closed)
                throw Error(ErrorCode::MalformedRange,
                            "exact pin must use closed brackets in '" + std::string(s) + "'");
            lo = hi = VersionNumber::parse(v);
        } else {
            if (inner.find(',', comma + 1) != std::string_view::npos)
                throw Error(ErrorCode::MalformedRange, "too many commas in '" + std::string(s) + "'");
            auto lo_text = trimmed(inner.substr(0, comma));
            auto hi_text = trimmed(inner.substr(comma + 1));
            if (lo_text.empty() && hi_text.empty())
                throw Error(ErrorCode::MalformedRange, "empty interval in '" + std::string(s) + "'");
            if (!lo_text.empty()) lo = VersionNumber::parse(lo_text);
            if (!hi_text.empty()) hi = VersionNumber::parse(hi_text);
        }
        intervals.push_back(detail::make_interval(std::move(lo), lo_closed, std::move(hi), hi_closed));

        i = close + 1;
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i < s.size()) {
            if (s[i] != ',')
                throw Error(ErrorCode::MalformedRange, "trailing garbage in '" + std::string(s) + "'");
            ++i;
            while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
            if (i >= s.size())
                throw Error(ErrorCode::MalformedRange, "dangling comma in '" + std::string(s) + "'");
        }
    }
    if (intervals.empty()) throw Error(ErrorCode::MalformedRange, "no intervals in '" + std::string(s) + "'");
    return VersionSpec::range_set(std::move(intervals));
}

/// Emits the minimal comma-joined union of closed intervals whose membership,
/// intersected with `universe`, equals `selected` exactly. With `open_upper`
/// set and the maximum of the universe selected, the last interval's upper
/// bound is omitted.
inline std::string synthesize_range(std::vector<VersionNumber> selected,
                                    std::vector<VersionNumber> universe,
                                    bool open_upper = false) {
    if (selected.empty()) throw Error(ErrorCode::EmptySelection, "no versions selected");
    auto by_order = [](const VersionNumber& a, const VersionNumber& b) {
        int c = compare_versions(a, b);
        if (c != 0) return c < 0;
        return a.raw() < b.raw();
    };
    auto equal = [](const VersionNumber& a, const VersionNumber& b) {
        return compare_versions(a, b) == 0;
    };
    std::sort(universe.begin(), universe.end(), by_order);
    universe.erase(std::unique(universe.begin(), universe.end(), equal), universe.end());
    std::sort(selected.begin(), selected.end(), by_order);
    selected.erase(std::unique(selected.begin(), selected.end(), equal), selected.end());

    std::vector<bool> chosen(universe.size(), false);
    for (const auto& v : selected) {
        auto it = std::find_if(universe.begin(), universe.end(),
                               [&](const VersionNumber& u) { return equal(u, v); });
        if (it == universe.end())
            throw Error(ErrorCode::InvalidSelection, "selected version " + v.raw() + " not in universe");
        chosen[static_cast<size_t>(it - universe.begin())] = true;
    }

    std::string out;
    size_t i = 0;
    while (i < universe.size()) {
        if (!chosen[i]) {
            ++i;
            continue;
        }
        size_t j = i;
        while (j + 1 < universe.size() && chosen[j + 1]) ++j;
        if (!out.empty()) out += ',';
        out += '[';
        out += universe[i].raw();
        out += ',';
        if (open_upper && j == universe.size() - 1) {
            out += ')';
        } else {
            out += universe[j].raw();
            out += ']';
        }
        i = j + 1;
    }
    return out;
}

} // namespace ranger
