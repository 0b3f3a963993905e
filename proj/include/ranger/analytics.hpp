#pragma once

/// Persistence metrics over ALSearch output: library status partitions,
/// P_vul/P_patch time series with per-depth breakdowns, half-life, new
/// release span, full-life, bottom-up cause classification, and the
/// countermeasure usage statistics (range usage, dependencyManagement).

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ranger/alsearch.hpp"

namespace ranger {

enum class LibraryStatus : uint8_t { Affected, Patched, Removed };

inline std::string_view library_status_name(LibraryStatus s) {
    switch (s) {
        case LibraryStatus::Affected: return "Affected";
        case LibraryStatus::Patched: return "Patched";
        case LibraryStatus::Removed: return "Removed";
    }
    return "Affected";
}

enum class Bucket : uint8_t { Day, Month };

struct PvulPoint {
    Date date;
    double p_vul = 0.0;
    double p_patch = 0.0;
    int new_affected_releases = 0;
    int denominator = 0;
};

struct PvulSeries {
    std::string vuln_id;
    Bucket bucket = Bucket::Day;
    Date published_at;
    std::vector<PvulPoint> points;
    std::map<int, std::vector<PvulPoint>> by_depth;
    int undated_records = 0; // excluded from the series
};

enum class Cause : uint8_t { C1 = 1, C2, C3, C4, C5, C6 };

enum class BlamedRole : uint8_t { VulnerableLibrary, FirstDept, MediumDept, EndUser };

inline BlamedRole role_of_cause(Cause c) {
    switch (c) {
        case Cause::C1: return BlamedRole::VulnerableLibrary;
        case Cause::C2:
        case Cause::C3: return BlamedRole::FirstDept;
        case Cause::C4:
        case Cause::C5: return BlamedRole::MediumDept;
        case Cause::C6: return BlamedRole::EndUser;
    }
    return BlamedRole::EndUser;
}

struct CauseLabel {
    Cause cause = Cause::C1;
    BlamedRole blamed_role = BlamedRole::VulnerableLibrary;
    std::vector<uint32_t> path;
    std::string detail;
};

struct EndUserOverride {
    LibraryId library;
    VersionNumber pinned;
};
using EndUserOverrides = std::vector<EndUserOverride>;

// ---------------------------------------------------------------------------
// library status

namespace detail {

struct StatusIndex {
    std::set<uint32_t> affected_releases; // record releases + the library's own affected versions
    std::map<uint32_t, std::vector<uint32_t>> dated_releases_by_library; // sorted by (date, version)
    std::map<uint32_t, Date> first_record_date_by_library;
    std::map<uint32_t, int> min_depth_by_library;

    StatusIndex(const DependencyGraph& g, const DependencyGraph::VulnEntry& entry,
                const std::vector<AffectedRecord>& records) {
        for (uint32_t rh : entry.affected) affected_releases.insert(rh);
        for (const auto& rec : records) {
            affected_releases.insert(rec.release);
            uint32_t lib = g.release(rec.release).library;
            auto it = min_depth_by_library.find(lib);
            if (it == min_depth_by_library.end() || rec.depth < it->second)
                min_depth_by_library[lib] = rec.depth;
            if (rec.released_at) {
                auto fit = first_record_date_by_library.find(lib);
                if (fit == first_record_date_by_library.end() || *rec.released_at < fit->second)
                    first_record_date_by_library[lib] = *rec.released_at;
            }
        }
        for (uint32_t lib = 0; lib < g.library_count(); ++lib) {
            if (!min_depth_by_library.count(lib)) continue;
            auto& list = dated_releases_by_library[lib];
            for (uint32_t rh : g.releases_of(lib))
                if (g.release(rh).released_at) list.push_back(rh);
            std::sort(list.begin(), list.end(), [&](uint32_t a, uint32_t b) {
                const auto& ra = g.release(a);
                const auto& rb = g.release(b);
                if (*ra.released_at != *rb.released_at) return *ra.released_at < *rb.released_at;
                int c = compare_versions(ra.version, rb.version);
                if (c != 0) return c < 0;
                return ra.version.raw() < rb.version.raw();
            });
        }
    }

    /// Latest dated release of the library at or before `as_of`.
    std::optional<uint32_t> latest_at(const DependencyGraph& g, uint32_t lib, Date as_of) const {
        auto it = dated_releases_by_library.find(lib);
        std::optional<uint32_t> best;
        const std::vector<uint32_t>* list = nullptr;
        std::vector<uint32_t> scratch;
        if (it != dated_releases_by_library.end()) {
            list = &it->second;
        } else {
            for (uint32_t rh : g.releases_of(lib))
                if (g.release(rh).released_at) scratch.push_back(rh);
            std::sort(scratch.begin(), scratch.end(), [&](uint32_t a, uint32_t b) {
                const auto& ra = g.release(a);
                const auto& rb = g.release(b);
                if (*ra.released_at != *rb.released_at) return *ra.released_at < *rb.released_at;
                int c = compare_versions(ra.version, rb.version);
                if (c != 0) return c < 0;
                return ra.version.raw() < rb.version.raw();
            });
            list = &scratch;
        }
        for (uint32_t rh : *list) {
            if (*g.release(rh).released_at > as_of) break;
            best = rh;
        }
        return best;
    }
};

/// Whether the release's resolved tree still contains the library at all.
inline bool tree_contains_library(const DependencyGraph& g, uint32_t release, uint32_t lib,
                                  std::map<uint32_t, bool>& memo) {
    auto it = memo.find(release);
    if (it != memo.end()) return it->second;
    auto tree = resolve_tree(g, release);
    bool found = tree.node_of(lib) != nullptr;
    memo.emplace(release, found);
    return found;
}

} // namespace detail

/// Status of one downstream library at a date, derived solely from the
/// library's latest dated release.
inline LibraryStatus classify_library_status(const DependencyGraph& g,
                                             const DependencyGraph::VulnEntry& entry,
                                             const std::vector<AffectedRecord>& records,
                                             uint32_t library, Date as_of) {
    detail::StatusIndex index(g, entry, records);
    auto latest = index.latest_at(g, library, as_of);
    if (!latest)
        throw Error(ErrorCode::NoReleaseBefore,
                    g.library(library).str() + " has no release at or before " + as_of.to_string());
    if (index.affected_releases.count(*latest)) return LibraryStatus::Affected;

    bool earlier_affected = false;
    for (uint32_t rh : g.releases_of(library)) {
        const auto& rel = g.release(rh);
        if (!rel.released_at || *rel.released_at > as_of) continue;
        if (index.affected_releases.count(rh)) earlier_affected = true;
    }
    if (!earlier_affected)
        throw Error(ErrorCode::NeverAffected,
                    g.library(library).str() + " was never affected by " + entry.vuln.id);

    auto vuln_lib = g.find_library(entry.vuln.library);
    std::map<uint32_t, bool> memo;
    if (vuln_lib && detail::tree_contains_library(g, *latest, *vuln_lib, memo))
        return LibraryStatus::Patched;
    return LibraryStatus::Removed;
}

// ---------------------------------------------------------------------------
// P_vul series

/// Recomputes the status partition per bucket. The denominator at each point
/// is the set of downstream libraries discovered (first affected release
/// published) by that date.
inline PvulSeries pvul_series(const DependencyGraph& g, const DependencyGraph::VulnEntry& entry,
                              const std::vector<AffectedRecord>& records, Bucket bucket,
                              Date horizon_end,
                              std::optional<Date> series_start = std::nullopt) {
    PvulSeries series;
    series.vuln_id = entry.vuln.id;
    series.bucket = bucket;
    series.published_at = entry.vuln.published_at;

    Date start = series_start.value_or(entry.vuln.published_at);
    if (horizon_end < start) horizon_end = start;

    std::vector<Date> dates{start};
    for (;;) {
        Date next = bucket == Bucket::Day ? dates.back().add_days(1)
                                          : dates.back().month_floor().next_month();
        if (next > horizon_end) break;
        dates.push_back(next);
    }
    if (dates.back() < horizon_end) dates.push_back(horizon_end);

    detail::StatusIndex index(g, entry, records);
    for (const auto& rec : records)
        if (!rec.released_at) ++series.undated_records;

    auto vuln_lib = g.find_library(entry.vuln.library);
    std::map<uint32_t, bool> contains_memo;

    struct LibState {
        uint32_t lib;
        Date discovered;
        int depth;
    };
    std::vector<LibState> libs;
    for (const auto& [lib, discovered] : index.first_record_date_by_library)
        libs.push_back({lib, discovered, index.min_depth_by_library.at(lib)});

    std::vector<Date> record_dates;
    for (const auto& rec : records)
        if (rec.released_at) record_dates.push_back(*rec.released_at);
    std::sort(record_dates.begin(), record_dates.end());

    std::map<int, std::vector<PvulPoint>> by_depth;
    std::optional<Date> prev;
    for (Date d : dates) {
        PvulPoint point;
        point.date = d;
        std::map<int, std::pair<int, int>> depth_counts; // depth -> (affected, denominator)
        int affected = 0, patched = 0, denominator = 0;
        for (const auto& ls : libs) {
            if (ls.discovered > d) continue;
            auto latest = index.latest_at(g, ls.lib, d);
            if (!latest) continue;
            ++denominator;
            auto& dc = depth_counts[ls.depth];
            ++dc.second;
            if (index.affected_releases.count(*latest)) {
                ++affected;
                ++dc.first;
            } else if (vuln_lib &&
                       detail::tree_contains_library(g, *latest, *vuln_lib, contains_memo)) {
                ++patched;
            }
        }
        point.denominator = denominator;
        if (denominator > 0) {
            point.p_vul = static_cast<double>(affected) / denominator;
            point.p_patch = static_cast<double>(patched) / denominator;
        }
        for (Date rd : record_dates)
            if ((!prev || rd > *prev) && rd <= d) ++point.new_affected_releases;

        for (auto& [depth, counts] : depth_counts) {
            PvulPoint dp;
            dp.date = d;
            dp.denominator = counts.second;
            dp.p_vul = counts.second > 0 ? static_cast<double>(counts.first) / counts.second : 0.0;
            by_depth[depth].push_back(dp);
        }
        series.points.push_back(point);
        prev = d;
    }
    series.by_depth = std::move(by_depth);
    return series;
}

// ---------------------------------------------------------------------------
// scalar metrics

enum class HalfLifeMode : uint8_t { Absolute, Relative };

struct HalfLifeResult {
    std::optional<int> days; // empty: not reached
    double normalized = 1.0;
};

inline HalfLifeResult half_life(const PvulSeries& series, HalfLifeMode mode = HalfLifeMode::Absolute) {
    if (series.points.empty()) throw Error(ErrorCode::EmptySeries, "empty P_vul series");
    // buckets before any downstream library is discovered have no population
    // and cannot count as a crossing
    const PvulPoint* first_populated = nullptr;
    for (const auto& p : series.points)
        if (p.denominator > 0) {
            first_populated = &p;
            break;
        }
    HalfLifeResult out;
    if (!first_populated) {
        out.normalized = 1.0;
        return out;
    }
    double threshold = mode == HalfLifeMode::Absolute ? 0.5 : 0.5 * first_populated->p_vul;
    int exposure = series.points.back().date.days() - series.published_at.days();
    for (const auto& p : series.points) {
        if (p.denominator == 0) continue;
        if (p.p_vul <= threshold) {
            out.days = p.date.days() - series.published_at.days();
            out.normalized =
                exposure > 0 ? static_cast<double>(*out.days) / exposure : (*out.days <= 0 ? 0.0 : 1.0);
            return out;
        }
    }
    out.days.reset();
    out.normalized = 1.0;
    return out;
}

struct NewReleaseSpanResult {
    int days = 0;
    double normalized = 0.0;
};

inline NewReleaseSpanResult new_release_span(const DependencyGraph& g,
                                             const DependencyGraph::VulnEntry& entry,
                                             const std::vector<AffectedRecord>& records,
                                             Date collection) {
    (void)g;
    bool any = false;
    int last = entry.vuln.published_at.days();
    for (const auto& rec : records) {
        if (!rec.released_at) continue;
        any = true;
        last = std::max(last, rec.released_at->days());
    }
    if (!any) throw Error(ErrorCode::EmptySeries, "no dated affected releases for " + entry.vuln.id);
    NewReleaseSpanResult out;
    out.days = std::max(0, last - entry.vuln.published_at.days());
    int exposure = collection.days() - entry.vuln.published_at.days();
    out.normalized = exposure > 0
                         ? std::min(1.0, static_cast<double>(out.days) / exposure)
                         : 0.0;
    return out;
}

struct FullLifeResult {
    std::optional<int> days; // empty: not reached within the horizon
};

inline FullLifeResult full_life(const PvulSeries& series) {
    if (series.points.empty()) throw Error(ErrorCode::EmptySeries, "empty P_vul series");
    // first bucket where p_vul hits zero and stays zero through the horizon
    size_t i = series.points.size();
    while (i > 0 && series.points[i - 1].p_vul == 0.0) --i;
    FullLifeResult out;
    if (i < series.points.size())
        out.days = series.points[i].date.days() - series.published_at.days();
    return out;
}

// ---------------------------------------------------------------------------
// causes

namespace detail {

/// Earliest dated release of the vulnerable library that is outside the
/// affected set and newer than the oldest affected corpus version.
inline std::optional<Date> patch_available_date(const DependencyGraph& g,
                                                const DependencyGraph::VulnEntry& entry,
                                                Date as_of) {
    auto lib = g.find_library(entry.vuln.library);
    if (!lib || entry.affected.empty()) return std::nullopt;
    const VersionNumber& oldest_affected = g.release(entry.affected.front()).version;
    std::optional<Date> best;
    for (uint32_t rh : g.releases_of(*lib)) {
        const auto& rel = g.release(rh);
        if (g.is_affected(rh, entry)) continue;
        if (compare_versions(rel.version, oldest_affected) <= 0) continue;
        if (!rel.released_at || *rel.released_at > as_of) continue;
        if (!best || *rel.released_at < *best) best = rel.released_at;
    }
    return best;
}

/// Earliest release of `lib` at or after `since` (and at or before `as_of`)
/// that is not in the affected-release set.
inline std::optional<Date> remediated_date(const DependencyGraph& g, uint32_t lib, Date since,
                                           Date as_of, const std::set<uint32_t>& affected_set) {
    std::optional<Date> best;
    bool any_release_since = false;
    for (uint32_t rh : g.releases_of(lib)) {
        const auto& rel = g.release(rh);
        if (!rel.released_at || *rel.released_at < since || *rel.released_at > as_of) continue;
        any_release_since = true;
        if (affected_set.count(rh)) continue;
        if (!best || *rel.released_at < *best) best = rel.released_at;
    }
    if (!best && !any_release_since) return std::nullopt;
    return best; // may be empty even though releases exist (all affected)
}

inline bool any_release_in(const DependencyGraph& g, uint32_t lib, Date since, Date as_of) {
    for (uint32_t rh : g.releases_of(lib)) {
        const auto& rel = g.release(rh);
        if (rel.released_at && *rel.released_at >= since && *rel.released_at <= as_of) return true;
    }
    return false;
}

} // namespace detail

/// Bottom-up blame assignment along the witness path: the first role that
/// misbehaved after a fix below it became available gets the label.
inline CauseLabel classify_cause(const DependencyGraph& g, const DependencyGraph::VulnEntry& entry,
                                 const std::vector<AffectedRecord>& records,
                                 const AffectedRecord& record, Date as_of,
                                 const EndUserOverrides* overrides = nullptr) {
    CauseLabel label;
    label.path = record.witness_path;

    auto patch_date = detail::patch_available_date(g, entry, as_of);
    if (!patch_date) {
        label.cause = Cause::C1;
        label.blamed_role = BlamedRole::VulnerableLibrary;
        label.detail = "no patched version of " + entry.vuln.library.str() + " released by " +
                       as_of.to_string();
        return label;
    }

    std::set<uint32_t> affected_set(entry.affected.begin(), entry.affected.end());
    for (const auto& rec : records) affected_set.insert(rec.release);

    const auto& path = record.witness_path; // [r_d, ..., r_1, r_0]
    int d = record.depth;
    Date fix_date = *patch_date;
    for (int i = 1; i <= d; ++i) {
        uint32_t rh = path[static_cast<size_t>(d - i)];
        const auto& rel = g.release(rh);
        if (!rel.released_at)
            throw Error(ErrorCode::MissingReleaseDates,
                        "release " + g.release_id(rh).gav() + " has no date");
        bool first_dept = i == 1;
        if (*rel.released_at >= fix_date) {
            label.cause = first_dept ? Cause::C2 : Cause::C4;
            label.blamed_role = first_dept ? BlamedRole::FirstDept : BlamedRole::MediumDept;
            label.detail = g.release_id(rh).gav() + " released on " + rel.released_at->to_string() +
                           " after a fix was available on " + fix_date.to_string();
            return label;
        }
        auto remediated = detail::remediated_date(g, rel.library, fix_date, as_of, affected_set);
        if (remediated) {
            fix_date = *remediated;
            continue;
        }
        if (detail::any_release_in(g, rel.library, fix_date, as_of)) {
            label.cause = first_dept ? Cause::C2 : Cause::C4;
            label.blamed_role = first_dept ? BlamedRole::FirstDept : BlamedRole::MediumDept;
            label.detail = g.library(rel.library).str() +
                           " kept releasing but every release since " + fix_date.to_string() +
                           " is still affected";
        } else {
            label.cause = first_dept ? Cause::C3 : Cause::C5;
            label.blamed_role = first_dept ? BlamedRole::FirstDept : BlamedRole::MediumDept;
            label.detail = g.library(rel.library).str() + " has released nothing since " +
                           fix_date.to_string();
        }
        return label;
    }

    label.cause = Cause::C6;
    label.blamed_role = BlamedRole::EndUser;
    label.detail = "every library on the path published a remediated release";
    if (overrides) {
        for (const auto& ov : *overrides) {
            if (ov.library == entry.vuln.library && entry.vuln.affected.contains(ov.pinned)) {
                label.detail = "end-user override pins vulnerable " + ov.library.str() + ":" +
                               ov.pinned.raw();
                break;
            }
        }
    }
    return label;
}

struct CauseProportions {
    std::map<Cause, int> counts;       // all labels, including C1
    int blocked_paths = 0;             // denominator: labeled paths excluding C1
    std::map<Cause, double> fractions; // over blocked_paths, C1 excluded
    std::map<BlamedRole, double> role_fractions;
};

/// Classifies every blocked witness path once: a path is blocked while its
/// downstream library's latest release is still affected at `as_of`.
inline CauseProportions cause_proportions(const DependencyGraph& g,
                                          const DependencyGraph::VulnEntry& entry,
                                          const std::vector<AffectedRecord>& records, Date as_of,
                                          const EndUserOverrides* overrides = nullptr) {
    CauseProportions out;
    detail::StatusIndex index(g, entry, records);
    for (const auto& rec : records) {
        uint32_t lib = g.release(rec.release).library;
        auto latest = index.latest_at(g, lib, as_of);
        if (!latest || !index.affected_releases.count(*latest)) continue; // path unblocked
        auto label = classify_cause(g, entry, records, rec, as_of, overrides);
        ++out.counts[label.cause];
        if (label.cause != Cause::C1) ++out.blocked_paths;
    }
    for (const auto& [cause, count] : out.counts) {
        if (cause == Cause::C1 || out.blocked_paths == 0) continue;
        out.fractions[cause] = static_cast<double>(count) / out.blocked_paths;
        out.role_fractions[role_of_cause(cause)] += static_cast<double>(count) / out.blocked_paths;
    }
    return out;
}

// ---------------------------------------------------------------------------
// countermeasure usage (ranges, dependencyManagement)

struct RangeUsageStats {
    size_t edges_total = 0;
    size_t edges_with_ranges = 0;
    size_t vuln_targeted_ranges = 0;
    size_t range_member_versions = 0;
    size_t range_member_vulnerable = 0;
    size_t latest_vulnerable = 0;
    size_t latest_non_vulnerable = 0;
    size_t open_upper_bypassing = 0;
    double pct_all_versions_vulnerable = 0.0;
    double pct_latest_vulnerable = 0.0;
    double pct_open_upper = 0.0; // among ranges whose latest member is clean
};

inline RangeUsageStats range_usage_stats(const DependencyGraph& g) {
    RangeUsageStats s;
    auto vulnerable = [&](uint32_t release) { return g.direct_vulnerabilities(release) > 0; };
    for (uint32_t r = 0; r < g.release_count(); ++r) {
        for (const auto& decl : g.decls_of(r)) {
            ++s.edges_total;
            if (!decl.spec || decl.spec->is_soft()) continue;
            ++s.edges_with_ranges;
            if (g.vuln_handles_of(decl.target).empty()) continue;
            ++s.vuln_targeted_ranges;
            std::optional<uint32_t> latest;
            for (uint32_t rh : g.releases_of(decl.target)) {
                if (!decl.spec->contains(g.release(rh).version)) continue;
                ++s.range_member_versions;
                if (vulnerable(rh)) ++s.range_member_vulnerable;
                latest = rh; // releases_of is ascending
            }
            if (!latest) continue;
            if (vulnerable(*latest)) {
                ++s.latest_vulnerable;
            } else {
                ++s.latest_non_vulnerable;
                if (decl.spec->open_upper()) ++s.open_upper_bypassing;
            }
        }
    }
    if (s.range_member_versions > 0)
        s.pct_all_versions_vulnerable =
            static_cast<double>(s.range_member_vulnerable) / s.range_member_versions;
    if (s.latest_vulnerable + s.latest_non_vulnerable > 0)
        s.pct_latest_vulnerable = static_cast<double>(s.latest_vulnerable) /
                                  (s.latest_vulnerable + s.latest_non_vulnerable);
    if (s.latest_non_vulnerable > 0)
        s.pct_open_upper = static_cast<double>(s.open_upper_bypassing) / s.latest_non_vulnerable;
    return s;
}

struct DependencyManagementStats {
    size_t poms_with_dm = 0;
    size_t poms_with_vuln_overrides = 0;
    size_t affected = 0;    // any override still vulnerable
    size_t bypass = 0;      // default vulnerable, override clean
    size_t overlapping = 0; // both in one POM
};

inline DependencyManagementStats dependency_management_stats(const DependencyGraph& g) {
    DependencyManagementStats s;
    for (uint32_t r = 0; r < g.release_count(); ++r) {
        auto dm = g.dm_of(r);
        if (dm.empty()) continue;
        ++s.poms_with_dm;
        bool has_vuln_override = false, any_affected = false, any_bypass = false;

        for (const auto& decl : dm) {
            if (decl.scope == Scope::Import || !decl.spec) continue;
            if (g.vuln_handles_of(decl.target).empty()) continue;
            has_vuln_override = true;

            auto vulnerable_version = [&](const VersionNumber& v) {
                for (uint32_t vh : g.vuln_handles_of(decl.target))
                    if (g.vuln_entry(vh).vuln.affected.contains(v)) return true;
                return false;
            };

            std::optional<VersionNumber> overridden;
            if (decl.spec->is_soft()) {
                overridden = decl.spec->preferred();
            } else if (auto rh = detail::highest_member(g, decl.target, *decl.spec)) {
                overridden = g.release(*rh).version;
            }
            if (!overridden) continue;
            bool override_vulnerable = vulnerable_version(*overridden);
            if (override_vulnerable) any_affected = true;

            ResolveOptions no_dm;
            no_dm.use_root_dm = false;
            auto fallback = resolved_version_of(g, r, decl.target, no_dm);
            if (fallback && vulnerable_version(*fallback) && !override_vulnerable)
                any_bypass = true;
        }
        if (has_vuln_override) ++s.poms_with_vuln_overrides;
        if (any_affected) ++s.affected;
        if (any_bypass) ++s.bypass;
        if (any_affected && any_bypass) ++s.overlapping;
    }
    return s;
}

} // namespace ranger
