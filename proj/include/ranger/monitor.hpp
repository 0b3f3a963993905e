#pragma once

/// Ecosystem monitoring campaign: find the releases blocking a
/// vulnerability's patches depth by depth, restore their version ranges,
/// apply the ranges to new graph epochs, re-run the affected search on the
/// updated graph, and track the remaining vulnerable lib-vers over time.

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ranger/alsearch.hpp"
#include "ranger/analytics.hpp"
#include "ranger/restore.hpp"

namespace ranger {

struct FailureCategory {
    RestoreOutcome category = RestoreOutcome::InternalError;
    std::string detail;
    std::string suggestion;
};

struct DepthReport {
    int depth = 0;
    int dependents = 0;
    int restored = 0;
    std::map<std::string, int> failures; // category name -> count
    std::vector<std::pair<std::string, FailureCategory>> failure_details; // gav -> info
    long remaining_after = 0;
    std::vector<std::pair<Date, long>> series_after;
};

struct CampaignReport {
    std::string vuln_id;
    long initial_remaining = 0;
    std::vector<std::pair<Date, long>> initial_series;
    std::vector<DepthReport> per_depth;
    std::vector<std::pair<Date, long>> remaining_libvers; // final state
    long iterations = 0;
    uint64_t final_epoch = 0;
};

struct CampaignConfig {
    int max_depth = 10;
    RestoreOptions restore;
    const SurfaceProvider* surfaces = nullptr;
    TestValidator validator;
    UsageManifest default_usage; // empty = conservative all-reachable
    std::function<UsageManifest(const DependencyGraph&, uint32_t dependent, uint32_t target)>
        usage_provider;
    Bucket bucket = Bucket::Month;
    bool eager = false; // apply each restored range immediately
    CountScopes count_scopes;
};

struct CampaignResult {
    CampaignReport report;
    DependencyGraph graph; // final epoch
};

namespace detail {

/// Cumulative affected lib-vers by release date bucket.
inline std::vector<std::pair<Date, long>> remaining_series(
    const std::vector<AffectedRecord>& records, Date published, Bucket bucket) {
    std::vector<Date> dates;
    for (const auto& rec : records)
        if (rec.released_at) dates.push_back(*rec.released_at);
    std::sort(dates.begin(), dates.end());

    Date horizon = dates.empty() ? published : std::max(published, dates.back());
    std::vector<Date> buckets{published};
    for (;;) {
        Date next = bucket == Bucket::Day ? buckets.back().add_days(1)
                                          : buckets.back().month_floor().next_month();
        if (next > horizon) break;
        buckets.push_back(next);
    }
    if (buckets.back() < horizon) buckets.push_back(horizon);

    std::vector<std::pair<Date, long>> out;
    for (Date d : buckets) {
        long count = 0;
        for (Date rd : dates)
            if (rd <= d) ++count;
        out.emplace_back(d, count);
    }
    return out;
}

/// Is there any corpus release of the library outside the currently affected
/// release set (a secure alternative a range could reach)?
inline bool secure_alternative_exists(const DependencyGraph& g, uint32_t lib,
                                      const std::set<uint32_t>& affected_set) {
    for (uint32_t rh : g.releases_of(lib))
        if (!affected_set.count(rh)) return true;
    return false;
}

} // namespace detail

/// Affected releases at exactly the given minimal depth whose pin on the next
/// hop blocks a patched resolution, i.e. a secure alternative exists in the
/// corpus but is not selected.
inline std::vector<uint32_t> find_blocking_dependents(const DependencyGraph& g,
                                                      const DependencyGraph::VulnEntry& entry,
                                                      int depth,
                                                      const std::vector<AffectedRecord>* records_in =
                                                          nullptr) {
    std::vector<AffectedRecord> local;
    const std::vector<AffectedRecord>* records = records_in;
    if (!records) {
        local = find_affected(g, entry, std::max(depth, 10));
        records = &local;
    }
    std::set<uint32_t> affected_set(entry.affected.begin(), entry.affected.end());
    for (const auto& rec : *records) affected_set.insert(rec.release);

    std::vector<uint32_t> out;
    for (const auto& rec : *records) {
        if (rec.depth != depth || rec.witness_path.size() < 2) continue;
        uint32_t next_hop_lib = g.release(rec.witness_path[1]).library;
        if (detail::secure_alternative_exists(g, next_hop_lib, affected_set))
            out.push_back(rec.release);
    }
    return out;
}

/// Maps a failed restoration to its category, detail, and remediation
/// suggestion.
inline FailureCategory categorize_failure(const DependencyGraph& g,
                                          const DependencyGraph::VulnEntry& entry,
                                          const RestoredRange& result,
                                          const AffectedRecord& record,
                                          const UsageManifest& usage) {
    FailureCategory out;
    out.category = result.outcome;
    out.detail = result.detail;
    switch (result.outcome) {
        case RestoreOutcome::NoCompatiblePatch: {
            std::string apis;
            for (const auto& [version, a] : result.per_version) {
                if (a.reachable_breaks.empty()) continue;
                if (!apis.empty()) apis += "; ";
                apis += version + ": ";
                for (size_t i = 0; i < a.reachable_breaks.size(); ++i) {
                    if (i) apis += ",";
                    apis += a.reachable_breaks[i];
                }
            }
            std::string chain;
            for (size_t i = 0; i < record.witness_path.size(); ++i) {
                if (i) chain += " -> ";
                chain += g.release_id(record.witness_path[i]).gav();
            }
            out.suggestion = "manual upgrade needed; breaking APIs [" + apis + "] on call chain " +
                             chain;
            break;
        }
        case RestoreOutcome::NoSecureVersion: {
            bool reachable = usage.all_reachable() ||
                             (usage.dependency && *usage.dependency == entry.vuln.library &&
                              !usage.used_apis.empty());
            if (reachable)
                out.suggestion = "find a substitution for " + entry.vuln.library.str() +
                                 "; monitoring continues for patched versions";
            else
                out.suggestion = "exclude " + entry.vuln.library.str() +
                                 " from the dependency tree; monitoring continues";
            break;
        }
        case RestoreOutcome::InternalError:
            out.suggestion = "investigate tooling fault: " + result.detail;
            break;
        case RestoreOutcome::Restored:
            out.suggestion = "";
            break;
    }
    return out;
}

/// Depth-by-depth campaign. Per depth, every currently-affected release at
/// that minimal depth gets a restoration attempt against its direct
/// dependency on the witness path; successful ranges are applied in a batch
/// (or eagerly) and the affected search reruns on the new epoch.
inline CampaignResult run_campaign(const DependencyGraph& initial, uint32_t vuln_handle,
                                   const CampaignConfig& config) {
    if (!config.surfaces)
        throw Error(ErrorCode::InvalidArgument, "campaign needs a surface provider");

    CampaignResult result{CampaignReport{}, initial};
    DependencyGraph& cur = result.graph;
    const auto entry = cur.vuln_entry(vuln_handle); // copy: cur is reassigned per epoch
    CampaignReport& report = result.report;
    report.vuln_id = entry.vuln.id;

    auto records = find_affected(cur, entry, config.max_depth, config.count_scopes);
    report.initial_remaining = static_cast<long>(records.size());
    report.initial_series =
        detail::remaining_series(records, entry.vuln.published_at, config.bucket);
    report.remaining_libvers = report.initial_series;

    for (int depth = 1; depth <= config.max_depth; ++depth) {
        if (records.empty()) break;

        std::vector<const AffectedRecord*> deps;
        for (const auto& rec : records)
            if (rec.depth == depth) deps.push_back(&rec);
        if (deps.empty()) continue;
        std::sort(deps.begin(), deps.end(), [&](const AffectedRecord* a, const AffectedRecord* b) {
            return cur.release_id(a->release).gav() < cur.release_id(b->release).gav();
        });

        DepthReport row;
        row.depth = depth;
        row.dependents = static_cast<int>(deps.size());

        std::vector<std::tuple<uint32_t, uint32_t, VersionSpec>> updates;
        for (const AffectedRecord* rec : deps) {
            uint32_t target_lib = cur.release(rec->witness_path[1]).library;
            UsageManifest usage = config.usage_provider
                                      ? config.usage_provider(cur, rec->release, target_lib)
                                      : config.default_usage;
            auto restored = restore_range_for_dependent(cur, rec->release, target_lib, usage,
                                                        *config.surfaces, config.validator,
                                                        config.restore);
            ++report.iterations;
            if (restored.outcome == RestoreOutcome::Restored) {
                ++row.restored;
                auto spec = parse_version_spec(restored.range_text);
                if (config.eager)
                    cur = cur.apply_range_update(rec->release, target_lib, std::move(spec));
                else
                    updates.emplace_back(rec->release, target_lib, std::move(spec));
            } else {
                auto failure = categorize_failure(cur, entry, restored, *rec, usage);
                ++row.failures[std::string(restore_outcome_name(failure.category))];
                row.failure_details.emplace_back(cur.release_id(rec->release).gav(),
                                                 std::move(failure));
            }
        }
        for (auto& [release, target, spec] : updates)
            cur = cur.apply_range_update(release, target, std::move(spec));

        records = find_affected(cur, entry, config.max_depth, config.count_scopes);
        row.remaining_after = static_cast<long>(records.size());
        row.series_after = detail::remaining_series(records, entry.vuln.published_at, config.bucket);
        report.remaining_libvers = row.series_after;
        report.per_depth.push_back(std::move(row));
    }

    report.final_epoch = cur.epoch();
    return result;
}

// ---------------------------------------------------------------------------
// report rendering

inline nlohmann::ordered_json campaign_report_json(const CampaignReport& report) {
    nlohmann::ordered_json j;
    j["vuln_id"] = report.vuln_id;
    j["iterations"] = report.iterations;
    j["final_epoch"] = report.final_epoch;
    j["initial_remaining"] = report.initial_remaining;
    auto series_json = [](const std::vector<std::pair<Date, long>>& series) {
        nlohmann::ordered_json out = nlohmann::ordered_json::array();
        for (const auto& [date, count] : series)
            out.push_back({{"date", date.to_string()}, {"count", count}});
        return out;
    };
    j["initial_series"] = series_json(report.initial_series);
    j["per_depth"] = nlohmann::ordered_json::array();
    for (const auto& row : report.per_depth) {
        nlohmann::ordered_json r;
        r["depth"] = row.depth;
        r["dependents"] = row.dependents;
        r["restored"] = row.restored;
        r["failures"] = nlohmann::ordered_json::object();
        for (const auto& [name, count] : row.failures) r["failures"][name] = count;
        r["failure_details"] = nlohmann::ordered_json::array();
        for (const auto& [gav, info] : row.failure_details)
            r["failure_details"].push_back({{"release", gav},
                                            {"category", restore_outcome_name(info.category)},
                                            {"detail", info.detail},
                                            {"suggestion", info.suggestion}});
        r["remaining_after"] = row.remaining_after;
        r["series_after"] = series_json(row.series_after);
        j["per_depth"].push_back(std::move(r));
    }
    j["remaining"] = series_json(report.remaining_libvers);
    return j;
}

inline std::string campaign_report_markdown(const CampaignReport& report) {
    std::string md;
    md += "# Monitoring campaign for " + report.vuln_id + "\n\n";
    md += "- iterations: " + std::to_string(report.iterations) + "\n";
    md += "- final epoch: " + std::to_string(report.final_epoch) + "\n";
    md += "- initially affected lib-vers: " + std::to_string(report.initial_remaining) + "\n";
    long final_remaining = report.remaining_libvers.empty()
                               ? report.initial_remaining
                               : report.remaining_libvers.back().second;
    md += "- remaining lib-vers: " + std::to_string(final_remaining) + "\n\n";
    md += "## Per-depth results\n\n";
    md += "| depth | dependents | restored | failures | remaining |\n";
    md += "|------:|-----------:|---------:|----------|----------:|\n";
    for (const auto& row : report.per_depth) {
        std::string failures;
        for (const auto& [name, count] : row.failures) {
            if (!failures.empty()) failures += ", ";
            failures += name + " x" + std::to_string(count);
        }
        if (failures.empty()) failures = "-";
        md += "| " + std::to_string(row.depth) + " | " + std::to_string(row.dependents) + " | " +
              std::to_string(row.restored) + " | " + failures + " | " +
              std::to_string(row.remaining_after) + " |\n";
    }
    md += "\n## Suggestions\n\n";
    bool any = false;
    for (const auto& row : report.per_depth)
        for (const auto& [gav, info] : row.failure_details) {
            md += "- `" + gav + "` (" + std::string(restore_outcome_name(info.category)) +
                  "): " + info.suggestion + "\n";
            any = true;
        }
    if (!any) md += "none\n";
    return md;
}

enum class ReportFormat : uint8_t { Json, Markdown };

inline void emit_report(const CampaignReport& report, const std::filesystem::path& path,
                        ReportFormat format) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write report " + path.string());
    if (format == ReportFormat::Json)
        out << campaign_report_json(report).dump(2) << "\n";
    else
        out << campaign_report_markdown(report);
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

inline void emit_remaining_csv(const CampaignReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write csv " + path.string());
    out << "date,count,epoch\n";
    for (const auto& [date, count] : report.remaining_libvers)
        out << date.to_string() << "," << count << "," << report.final_epoch << "\n";
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

} // namespace ranger
