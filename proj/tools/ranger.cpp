// ranger: dependency-vulnerability persistence analysis and version range
// restoration for Maven-style ecosystems.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ranger/analytics.hpp"
#include "ranger/config.hpp"
#include "ranger/monitor.hpp"

using namespace ranger;
using ordered_json = nlohmann::ordered_json;

namespace {

void print_diagnostics(const Diagnostics& diags) {
    for (const auto& d : diags)
        std::cerr << (d.severity == Diagnostic::Severity::Error ? "error" : "warning") << ": "
                  << d.code << ": " << d.message << "\n";
}

DependencyGraph load_snapshot_or_fail(const std::string& path) {
    if (path.empty())
        throw Error(ErrorCode::InvalidArgument, "a --snapshot file is required");
    return DependencyGraph::load(path);
}

uint32_t release_handle(const DependencyGraph& g, const std::string& gav) {
    auto first = gav.find(':');
    auto last = gav.rfind(':');
    if (first == std::string::npos || last == first)
        throw Error(ErrorCode::InvalidArgument, "expected group:artifact:version, got " + gav);
    auto rel = g.find_release(LibraryId::parse(gav.substr(0, last)),
                              VersionNumber::parse(gav.substr(last + 1)));
    if (!rel) throw Error(ErrorCode::NoSuchRelease, gav + " is not in the snapshot");
    return *rel;
}

uint32_t vuln_handle(const DependencyGraph& g, const std::string& id) {
    auto vh = g.find_vuln(id);
    if (!vh) throw Error(ErrorCode::InvalidArgument, "unknown vulnerability id " + id);
    return *vh;
}

CountScopes parse_count_scopes(const std::string& text) {
    CountScopes scopes;
    std::stringstream in(text);
    std::string token;
    while (std::getline(in, token, ',')) {
        if (token.empty()) continue;
        if (token == "provided") scopes.provided = true;
        else if (token == "test") scopes.test = true;
        else if (token == "system") scopes.system = true;
        else if (token != "compile" && token != "runtime")
            throw Error(ErrorCode::InvalidArgument, "unknown scope '" + token + "'");
    }
    return scopes;
}

Date as_of_or_collection(const DependencyGraph& g, const std::string& as_of_text) {
    if (!as_of_text.empty()) {
        auto d = Date::parse(as_of_text);
        if (!d) throw Error(ErrorCode::InvalidArgument, "bad date: " + as_of_text);
        return *d;
    }
    Date latest(0);
    bool any = false;
    for (uint32_t r = 0; r < g.release_count(); ++r)
        if (auto d = g.release(r).released_at) {
            latest = std::max(latest, *d);
            any = true;
        }
    return any ? latest : Date(0);
}

std::string node_gav(const DependencyGraph& g, const ResolvedNode& n) {
    std::string out = g.library(n.library).str() + ":";
    out += n.version ? n.version->raw() : "?";
    return out;
}

ordered_json stats_json(const DependencyGraph& g) {
    return ordered_json{{"libraries", g.library_count()},
                        {"releases", g.release_count()},
                        {"edges", g.edge_count()},
                        {"vulns", g.vuln_count()},
                        {"epoch", g.epoch()}};
}

ordered_json series_points_json(const std::vector<PvulPoint>& points) {
    auto arr = ordered_json::array();
    for (const auto& p : points)
        arr.push_back({{"date", p.date.to_string()},
                       {"p_vul", p.p_vul},
                       {"p_patch", p.p_patch},
                       {"new_affected_releases", p.new_affected_releases},
                       {"denominator", p.denominator}});
    return arr;
}

struct MetricsBundle {
    std::vector<AffectedRecord> records;
    PvulSeries series;
    HalfLifeResult hl;
    std::optional<NewReleaseSpanResult> nrs;
    FullLifeResult fl;
    std::set<std::string> libraries;
};

MetricsBundle compute_metrics(const DependencyGraph& g, uint32_t vh, const Config& cfg,
                              Bucket bucket, Date as_of, std::optional<Date> series_start,
                              const CountScopes& scopes) {
    const auto& entry = g.vuln_entry(vh);
    MetricsBundle b{find_affected(g, entry, cfg.max_depth, scopes), {}, {}, {}, {}, {}};
    b.series = pvul_series(g, entry, b.records, bucket, as_of, series_start);
    b.hl = half_life(b.series, cfg.halflife());
    try {
        b.nrs = new_release_span(g, entry, b.records, as_of);
    } catch (const Error&) {
        b.nrs.reset();
    }
    b.fl = full_life(b.series);
    for (const auto& rec : b.records) b.libraries.insert(g.library(g.release(rec.release).library).str());
    return b;
}

ordered_json metrics_json(const DependencyGraph& g, uint32_t vh, const MetricsBundle& b) {
    const auto& entry = g.vuln_entry(vh);
    ordered_json j;
    j["vuln_id"] = entry.vuln.id;
    j["library"] = entry.vuln.library.str();
    j["published_at"] = entry.vuln.published_at.to_string();
    j["affected_releases"] = b.records.size();
    j["affected_libraries"] = b.libraries.size();
    j["half_life"] = ordered_json{{"reached", b.hl.days.has_value()},
                                  {"days", b.hl.days ? ordered_json(*b.hl.days) : ordered_json()},
                                  {"normalized", b.hl.normalized}};
    if (b.nrs)
        j["new_release_span"] = ordered_json{{"days", b.nrs->days}, {"normalized", b.nrs->normalized}};
    else
        j["new_release_span"] = ordered_json();
    j["full_life"] = ordered_json{{"reached", b.fl.days.has_value()},
                                  {"days", b.fl.days ? ordered_json(*b.fl.days) : ordered_json()}};
    j["undated_records"] = b.series.undated_records;
    return j;
}

void write_series_csv(const PvulSeries& series, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << "date,p_vul,p_patch,new_affected_releases,denominator\n";
    for (const auto& p : series.points)
        out << p.date.to_string() << "," << p.p_vul << "," << p.p_patch << ","
            << p.new_affected_releases << "," << p.denominator << "\n";
}

void write_heatmap_csv(const PvulSeries& series, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << "depth";
    for (const auto& p : series.points) out << "," << p.date.to_string();
    out << "\n";
    for (const auto& [depth, points] : series.by_depth) {
        out << depth;
        size_t k = 0;
        for (const auto& p : series.points) {
            // depth rows align on the shared bucket dates
            while (k < points.size() && points[k].date < p.date) ++k;
            if (k < points.size() && points[k].date == p.date)
                out << "," << points[k].p_vul;
            else
                out << ",";
        }
        out << "\n";
    }
}

int run(int argc, char** argv) {
    CLI::App app{"dependency vulnerability persistence analysis and range restoration"};
    app.require_subcommand(1);
    app.set_config("--config", "ranger.toml", "key=value configuration file");
    bool json_errors = false;
    app.add_flag("--json-errors", json_errors, "report errors as JSON on stderr");

    Config cfg;

    // ingest ----------------------------------------------------------------
    auto* ingest = app.add_subcommand("ingest", "build a snapshot from a local corpus");
    std::string index_path, poms_dir, vulns_path, out_path;
    ingest->add_option("--index", index_path, "index.jsonl file")->required();
    ingest->add_option("--poms", poms_dir, "directory of POM files")->required();
    ingest->add_option("--vulns", vulns_path, "merged vulnerability JSON file")->required();
    ingest->add_option("--out", out_path, "snapshot output path")->required();

    // graph -----------------------------------------------------------------
    auto* graph_cmd = app.add_subcommand("graph", "snapshot inspection");
    auto* graph_stats = graph_cmd->add_subcommand("stats", "print snapshot statistics as JSON");
    graph_stats->add_option("--snapshot", cfg.snapshot, "snapshot file")
        ->envname("RANGER_SNAPSHOT");

    // resolve ----------------------------------------------------------------
    auto* resolve_cmd = app.add_subcommand("resolve", "forward dependency resolution");
    std::string root_gav;
    bool resolve_json = false;
    resolve_cmd->add_option("--root", root_gav, "root release as group:artifact:version")
        ->required();
    resolve_cmd->add_option("--snapshot", cfg.snapshot, "snapshot file")
        ->envname("RANGER_SNAPSHOT");
    resolve_cmd->add_option("--max-depth", cfg.max_depth, "resolution depth cap")
        ->envname("RANGER_MAX_DEPTH");
    resolve_cmd->add_flag("--json", resolve_json, "structured output");

    std::string count_scopes_text;

    // alsearch ----------------------------------------------------------------
    auto* alsearch_cmd = app.add_subcommand("alsearch", "backward affected-library search");
    std::string vuln_id;
    bool alsearch_json = false;
    alsearch_cmd->add_option("--vuln", vuln_id, "vulnerability id")->required();
    alsearch_cmd->add_option("--snapshot", cfg.snapshot, "snapshot file")
        ->envname("RANGER_SNAPSHOT");
    alsearch_cmd->add_option("--max-depth", cfg.max_depth, "search depth cap")
        ->envname("RANGER_MAX_DEPTH");
    alsearch_cmd->add_option("--count-scopes", count_scopes_text,
                             "extra scopes to count (comma list of provided,test,system)");
    alsearch_cmd->add_flag("--json", alsearch_json, "structured output");

    // metrics ----------------------------------------------------------------
    auto* metrics_cmd = app.add_subcommand("metrics", "persistence metrics");
    std::string metrics_vuln, bucket_name = "day", as_of_text, series_start_text;
    std::string csv_path, heatmap_path;
    bool metrics_json_flag = false;
    metrics_cmd->add_option("--vuln", metrics_vuln, "vulnerability id (default: all)");
    metrics_cmd->add_option("--snapshot", cfg.snapshot, "snapshot file")
        ->envname("RANGER_SNAPSHOT");
    metrics_cmd->add_option("--bucket", bucket_name, "day or month")
        ->check(CLI::IsMember({"day", "month"}));
    metrics_cmd->add_option("--halflife-mode", cfg.halflife_mode, "absolute or relative")
        ->check(CLI::IsMember({"absolute", "relative"}))
        ->envname("RANGER_HALFLIFE_MODE");
    metrics_cmd->add_option("--min-affected", cfg.min_affected,
                            "skip vulnerabilities with fewer affected releases")
        ->envname("RANGER_MIN_AFFECTED");
    metrics_cmd->add_option("--max-depth", cfg.max_depth, "search depth cap")
        ->envname("RANGER_MAX_DEPTH");
    metrics_cmd->add_option("--as-of", as_of_text, "collection date (default: newest release)");
    metrics_cmd->add_option("--series-start", series_start_text,
                            "series start date (default: publication)");
    metrics_cmd->add_option("--csv", csv_path, "write the series as CSV");
    metrics_cmd->add_option("--heatmap", heatmap_path, "write the depth x bucket matrix as CSV");
    metrics_cmd->add_option("--count-scopes", count_scopes_text,
                            "extra scopes to count (comma list of provided,test,system)");
    metrics_cmd->add_flag("--json", metrics_json_flag, "structured output");

    // causes ----------------------------------------------------------------
    auto* causes_cmd = app.add_subcommand("causes", "blame classification for blocked paths");
    std::string causes_vuln, overrides_path, causes_csv_path;
    causes_cmd->add_option("--vuln", causes_vuln, "vulnerability id")->required();
    causes_cmd->add_option("--snapshot", cfg.snapshot, "snapshot file")
        ->envname("RANGER_SNAPSHOT");
    causes_cmd->add_option("--as-of", as_of_text, "evaluation date (default: newest release)");
    causes_cmd->add_option("--overrides", overrides_path, "end-user override pins (JSON)");
    causes_cmd->add_option("--max-depth", cfg.max_depth, "search depth cap")
        ->envname("RANGER_MAX_DEPTH");
    causes_cmd->add_option("--csv", causes_csv_path, "write cause counts as CSV");

    // usage -------------------------------------------------------------------
    auto* usage_cmd = app.add_subcommand("usage", "range and dependencyManagement usage stats");
    std::string usage_csv_path;
    usage_cmd->add_option("--snapshot", cfg.snapshot, "snapshot file")
        ->envname("RANGER_SNAPSHOT");
    usage_cmd->add_option("--csv", usage_csv_path, "write the statistics as CSV");

    // restore -----------------------------------------------------------------
    auto* restore_cmd = app.add_subcommand("restore", "restore a version range for a soft pin");
    std::string pom_path, dep_ga, usage_path, surfaces_dir, rewrite_out;
    bool restore_json = false;
    restore_cmd->add_option("--pom", pom_path, "POM file of the dependent")->required();
    restore_cmd->add_option("--dep", dep_ga, "dependency as group:artifact")->required();
    restore_cmd->add_option("--snapshot", cfg.snapshot, "snapshot file")
        ->envname("RANGER_SNAPSHOT");
    restore_cmd->add_option("--usage", usage_path, "API usage manifest (JSON)")
        ->envname("RANGER_USAGE");
    restore_cmd->add_option("--surfaces", surfaces_dir, "directory of API surface files")
        ->envname("RANGER_SURFACES");
    restore_cmd->add_option("--validate-cmd", cfg.validate_cmd,
                            "validation command template with {version}")
        ->envname("RANGER_VALIDATE_CMD");
    restore_cmd->add_option("--validate-timeout", cfg.validate_timeout_ms,
                            "validation timeout in milliseconds")
        ->envname("RANGER_VALIDATE_TIMEOUT");
    restore_cmd->add_option("--parallelism", cfg.parallelism, "candidate evaluation parallelism")
        ->envname("RANGER_PARALLELISM");
    restore_cmd->add_flag("--open-upper", cfg.open_upper, "omit the final upper bound")
        ->envname("RANGER_OPEN_UPPER");
    restore_cmd->add_flag("--allow-holes", cfg.allow_holes,
                          "scan past incompatible versions instead of stopping");
    restore_cmd->add_option("--rewrite", rewrite_out,
                            "write the POM with the version element replaced ('-' for stdout)");
    restore_cmd->add_option("--max-depth", cfg.max_depth, "resolution depth cap")
        ->envname("RANGER_MAX_DEPTH");
    restore_cmd->add_option("--count-scopes", count_scopes_text,
                            "extra scopes to count (comma list of provided,test,system)");
    restore_cmd->add_flag("--json", restore_json, "structured output");

    // monitor -----------------------------------------------------------------
    auto* monitor_cmd = app.add_subcommand("monitor", "run the depth-by-depth campaign");
    std::string monitor_vuln, report_json_path, report_md_path, remaining_csv_path;
    std::string monitor_bucket = "month";
    bool eager = false;
    monitor_cmd->add_option("--vuln", monitor_vuln, "vulnerability id")->required();
    monitor_cmd->add_option("--snapshot", cfg.snapshot, "snapshot file")
        ->envname("RANGER_SNAPSHOT");
    monitor_cmd->add_option("--max-depth", cfg.max_depth, "campaign depth cap")
        ->envname("RANGER_MAX_DEPTH");
    monitor_cmd->add_option("--surfaces", surfaces_dir, "directory of API surface files")
        ->envname("RANGER_SURFACES");
    monitor_cmd->add_option("--usage", usage_path, "default API usage manifest (JSON)");
    monitor_cmd->add_option("--validate-cmd", cfg.validate_cmd,
                            "validation command template with {version}")
        ->envname("RANGER_VALIDATE_CMD");
    monitor_cmd->add_option("--validate-timeout", cfg.validate_timeout_ms,
                            "validation timeout in milliseconds")
        ->envname("RANGER_VALIDATE_TIMEOUT");
    monitor_cmd->add_option("--bucket", monitor_bucket, "day or month")
        ->check(CLI::IsMember({"day", "month"}));
    monitor_cmd->add_flag("--open-upper", cfg.open_upper, "omit final upper bounds");
    monitor_cmd->add_flag("--allow-holes", cfg.allow_holes, "scan past incompatible versions");
    monitor_cmd->add_flag("--eager", eager, "apply each range immediately instead of per depth");
    monitor_cmd->add_option("--count-scopes", count_scopes_text,
                            "extra scopes to count (comma list of provided,test,system)");
    monitor_cmd->add_option("--out", report_json_path, "JSON report path");
    monitor_cmd->add_option("--md", report_md_path, "Markdown report path");
    monitor_cmd->add_option("--remaining", remaining_csv_path, "remaining lib-vers CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp" ||
            e.get_name() == "CallForVersion")
            return app.exit(e);
        app.exit(e);
        return 2;
    }

    try {
        if (*ingest) {
            auto corpus = load_corpus(index_path, poms_dir, vulns_path);
            print_diagnostics(corpus.diagnostics);
            auto g = build_graph(corpus);
            g.save(out_path);
            std::cout << stats_json(g).dump(2) << "\n";
            return 0;
        }

        if (*graph_stats) {
            auto g = load_snapshot_or_fail(cfg.snapshot);
            std::cout << stats_json(g).dump(2) << "\n";
            return 0;
        }
        if (*graph_cmd) {
            std::cerr << "usage: ranger graph stats --snapshot <file>\n";
            return 2;
        }

        if (*resolve_cmd) {
            auto g = load_snapshot_or_fail(cfg.snapshot);
            auto root = release_handle(g, root_gav);
            ResolveOptions opt;
            opt.max_depth = cfg.max_depth;
            auto tree = resolve_tree(g, root, opt);
            if (resolve_json) {
                ordered_json j;
                j["root"] = g.release_id(root).gav();
                j["nodes"] = ordered_json::array();
                for (const auto& n : tree.nodes)
                    j["nodes"].push_back(
                        {{"coordinate", node_gav(g, n)},
                         {"depth", n.depth},
                         {"parent", n.parent},
                         {"scope", scope_name(n.via_scope)},
                         {"optional", n.optional_edge},
                         {"resolved", n.release.has_value()}});
                j["mediation"] = ordered_json::array();
                for (const auto& ev : tree.mediation_log)
                    j["mediation"].push_back({{"library", g.library(ev.library).str()},
                                              {"winner", ev.winner},
                                              {"losers", ev.losers},
                                              {"range_vs_soft", ev.range_vs_soft},
                                              {"cycle", ev.cycle}});
                std::cout << j.dump(2) << "\n";
            } else {
                std::cout << g.release_id(root).gav() << "\n";
                // children in node order, grouped under their parents
                std::function<void(int, int)> emit = [&](int parent, int indent) {
                    for (size_t i = 0; i < tree.nodes.size(); ++i) {
                        const auto& n = tree.nodes[i];
                        if (n.parent != parent) continue;
                        std::cout << std::string(static_cast<size_t>(indent) * 2, ' ')
                                  << node_gav(g, n) << " [" << scope_name(n.via_scope) << "] ("
                                  << n.depth << ")";
                        if (!n.release) std::cout << " (missing)";
                        if (n.optional_edge) std::cout << " (optional)";
                        std::cout << "\n";
                        emit(static_cast<int>(i), indent + 1);
                    }
                };
                emit(-1, 1);
            }
            return 0;
        }

        if (*alsearch_cmd) {
            auto g = load_snapshot_or_fail(cfg.snapshot);
            auto vh = vuln_handle(g, vuln_id);
            auto records = find_affected(g, g.vuln_entry(vh), cfg.max_depth,
                                         parse_count_scopes(count_scopes_text));
            if (alsearch_json) {
                ordered_json j = ordered_json::array();
                for (const auto& rec : records) {
                    ordered_json r;
                    r["release"] = g.release_id(rec.release).gav();
                    r["vuln_id"] = rec.vuln_id;
                    r["depth"] = rec.depth;
                    r["released_at"] =
                        rec.released_at ? ordered_json(rec.released_at->to_string()) : ordered_json();
                    auto path = ordered_json::array();
                    for (uint32_t rh : rec.witness_path) path.push_back(g.release_id(rh).gav());
                    r["witness_path"] = path;
                    j.push_back(std::move(r));
                }
                std::cout << j.dump(2) << "\n";
            } else {
                for (const auto& rec : records)
                    std::cout << rec.depth << "\t" << g.release_id(rec.release).gav() << "\t"
                              << (rec.released_at ? rec.released_at->to_string() : "-") << "\n";
                std::cout << "affected lib-vers: " << records.size() << "\n";
            }
            return 0;
        }

        if (*metrics_cmd) {
            auto g = load_snapshot_or_fail(cfg.snapshot);
            Bucket bucket = bucket_name == "month" ? Bucket::Month : Bucket::Day;
            Date as_of = as_of_or_collection(g, as_of_text);
            std::optional<Date> series_start;
            if (!series_start_text.empty()) {
                series_start = Date::parse(series_start_text);
                if (!series_start)
                    throw Error(ErrorCode::InvalidArgument, "bad date: " + series_start_text);
            }
            auto scopes = parse_count_scopes(count_scopes_text);
            if (!metrics_vuln.empty()) {
                auto vh = vuln_handle(g, metrics_vuln);
                auto bundle = compute_metrics(g, vh, cfg, bucket, as_of, series_start, scopes);
                auto j = metrics_json(g, vh, bundle);
                if (metrics_json_flag) j["series"] = series_points_json(bundle.series.points);
                if (!csv_path.empty()) write_series_csv(bundle.series, csv_path);
                if (!heatmap_path.empty()) write_heatmap_csv(bundle.series, heatmap_path);
                std::cout << j.dump(2) << "\n";
            } else {
                ordered_json all = ordered_json::array();
                for (uint32_t vh = 0; vh < g.vuln_entry_count(); ++vh) {
                    auto bundle = compute_metrics(g, vh, cfg, bucket, as_of, series_start, scopes);
                    if (static_cast<int>(bundle.records.size()) < cfg.min_affected) continue;
                    all.push_back(metrics_json(g, vh, bundle));
                }
                std::cout << all.dump(2) << "\n";
            }
            return 0;
        }

        if (*causes_cmd) {
            auto g = load_snapshot_or_fail(cfg.snapshot);
            auto vh = vuln_handle(g, causes_vuln);
            const auto& entry = g.vuln_entry(vh);
            Date as_of = as_of_or_collection(g, as_of_text);
            EndUserOverrides overrides;
            if (!overrides_path.empty()) {
                std::ifstream in(overrides_path);
                if (!in) throw Error(ErrorCode::IoError, "cannot open " + overrides_path);
                nlohmann::json j;
                in >> j;
                for (const auto& o : j)
                    overrides.push_back({LibraryId{o.at("group"), o.at("artifact")},
                                         VersionNumber::parse(o.at("version").get<std::string>())});
            }
            auto records = find_affected(g, entry, cfg.max_depth);
            auto props = cause_proportions(g, entry, records, as_of,
                                           overrides.empty() ? nullptr : &overrides);
            ordered_json j;
            j["vuln_id"] = entry.vuln.id;
            j["as_of"] = as_of.to_string();
            j["blocked_paths"] = props.blocked_paths;
            j["counts"] = ordered_json::object();
            for (const auto& [cause, count] : props.counts)
                j["counts"]["C" + std::to_string(static_cast<int>(cause))] = count;
            j["fractions"] = ordered_json::object();
            for (const auto& [cause, fraction] : props.fractions)
                j["fractions"]["C" + std::to_string(static_cast<int>(cause))] = fraction;
            j["role_fractions"] = ordered_json::object();
            static const char* role_names[] = {"VulnerableLibrary", "FirstDept", "MediumDept",
                                               "EndUser"};
            for (const auto& [role, fraction] : props.role_fractions)
                j["role_fractions"][role_names[static_cast<int>(role)]] = fraction;
            if (!causes_csv_path.empty()) {
                std::ofstream out(causes_csv_path, std::ios::trunc);
                if (!out) throw Error(ErrorCode::IoError, "cannot write " + causes_csv_path);
                out << "cause,count,fraction\n";
                for (const auto& [cause, count] : props.counts) {
                    auto fit = props.fractions.find(cause);
                    out << "C" << static_cast<int>(cause) << "," << count << ","
                        << (fit == props.fractions.end() ? 0.0 : fit->second) << "\n";
                }
            }
            std::cout << j.dump(2) << "\n";
            return 0;
        }

        if (*usage_cmd) {
            auto g = load_snapshot_or_fail(cfg.snapshot);
            auto ranges = range_usage_stats(g);
            auto dm = dependency_management_stats(g);
            ordered_json j;
            j["edges_total"] = ranges.edges_total;
            j["edges_with_ranges"] = ranges.edges_with_ranges;
            j["vuln_targeted_ranges"] = ranges.vuln_targeted_ranges;
            j["pct_all_versions_vulnerable"] = ranges.pct_all_versions_vulnerable;
            j["pct_latest_vulnerable"] = ranges.pct_latest_vulnerable;
            j["pct_open_upper"] = ranges.pct_open_upper;
            j["dependency_management"] = ordered_json{
                {"poms_with_dm", dm.poms_with_dm},
                {"poms_with_vuln_overrides", dm.poms_with_vuln_overrides},
                {"affected", dm.affected},
                {"bypass", dm.bypass},
                {"overlapping", dm.overlapping}};
            if (!usage_csv_path.empty()) {
                std::ofstream out(usage_csv_path, std::ios::trunc);
                if (!out) throw Error(ErrorCode::IoError, "cannot write " + usage_csv_path);
                out << "key,value\n";
                for (const auto& [key, value] : j.items()) {
                    if (value.is_object())
                        for (const auto& [sub, v] : value.items())
                            out << key << "." << sub << "," << v.dump() << "\n";
                    else
                        out << key << "," << value.dump() << "\n";
                }
            }
            std::cout << j.dump(2) << "\n";
            return 0;
        }

        if (*restore_cmd) {
            auto g = load_snapshot_or_fail(cfg.snapshot);
            auto dep = LibraryId::parse(dep_ga);
            auto target_lib = g.find_library(dep);
            if (!target_lib)
                throw Error(ErrorCode::InvalidArgument, dep.str() + " is not in the snapshot");

            std::ifstream pom_in(pom_path, std::ios::binary);
            if (!pom_in) throw Error(ErrorCode::IoError, "cannot open POM " + pom_path);
            std::ostringstream pom_buf;
            pom_buf << pom_in.rdbuf();
            std::string pom_bytes = pom_buf.str();

            Diagnostics diags;
            ReleaseId self{{"local", "pom"}, VersionNumber::parse("0"), std::nullopt};
            auto pom = parse_pom(pom_bytes, self, diags);

            std::optional<VersionNumber> v_s;
            for (const auto& decl : pom.dependencies) {
                if (decl.target != dep) continue;
                if (!decl.spec || !decl.spec->is_soft())
                    throw Error(ErrorCode::InvalidArgument,
                                dep.str() + " is not declared as a soft pin");
                v_s = decl.spec->preferred();
                break;
            }
            if (!v_s)
                throw Error(ErrorCode::NoSuchEdge, "POM does not declare " + dep.str());

            UsageManifest usage;
            if (!usage_path.empty()) usage = load_usage_manifest(usage_path);
            if (surfaces_dir.empty())
                throw Error(ErrorCode::InvalidArgument, "a --surfaces directory is required");
            DirectorySurfaceProvider surfaces{surfaces_dir};
            TestValidator validator;
            if (!cfg.validate_cmd.empty())
                validator = make_command_validator(
                    cfg.validate_cmd, std::chrono::milliseconds(cfg.validate_timeout_ms));

            auto opts = cfg.restore_options();
            opts.count_scopes = parse_count_scopes(count_scopes_text);
            auto result = restore_range(g, *target_lib, *v_s, usage, surfaces, validator, opts);
            print_diagnostics(diags);

            ordered_json j;
            j["dependency"] = dep.str();
            j["v_s"] = v_s->raw();
            j["outcome"] = restore_outcome_name(result.outcome);
            j["detail"] = result.detail;
            auto selected = ordered_json::array();
            for (const auto& v : result.selected) selected.push_back(v.raw());
            j["selected"] = selected;
            j["range"] = result.range_text;
            if (restore_json) {
                j["per_version"] = ordered_json::object();
                for (const auto& [version, a] : result.per_version) {
                    ordered_json pv;
                    pv["vuln_total"] = a.vuln_total;
                    pv["secure"] = a.secure;
                    pv["compat_ok"] = a.compat_ok ? ordered_json(*a.compat_ok) : ordered_json();
                    pv["test_ok"] = a.test_ok ? ordered_json(*a.test_ok) : ordered_json();
                    pv["surface_missing"] = a.surface_missing;
                    pv["reachable_breaks"] = a.reachable_breaks;
                    j["per_version"][version] = std::move(pv);
                }
            }
            std::cout << j.dump(2) << "\n";

            if (!rewrite_out.empty()) {
                if (result.outcome != RestoreOutcome::Restored)
                    throw Error(ErrorCode::InvalidArgument,
                                "cannot rewrite: restoration outcome is " +
                                    std::string(restore_outcome_name(result.outcome)));
                auto rewritten = rewrite_pom_version(pom_bytes, dep, result.range_text);
                if (rewrite_out == "-") {
                    std::cout << rewritten;
                } else {
                    std::ofstream out(rewrite_out, std::ios::binary | std::ios::trunc);
                    if (!out) throw Error(ErrorCode::IoError, "cannot write " + rewrite_out);
                    out << rewritten;
                }
            }
            return 0;
        }

        if (*monitor_cmd) {
            auto g = load_snapshot_or_fail(cfg.snapshot);
            auto vh = vuln_handle(g, monitor_vuln);
            if (surfaces_dir.empty())
                throw Error(ErrorCode::InvalidArgument, "a --surfaces directory is required");
            DirectorySurfaceProvider surfaces{surfaces_dir};

            CampaignConfig config;
            config.max_depth = cfg.max_depth;
            config.restore = cfg.restore_options();
            config.count_scopes = parse_count_scopes(count_scopes_text);
            config.restore.count_scopes = config.count_scopes;
            config.surfaces = &surfaces;
            config.bucket = monitor_bucket == "day" ? Bucket::Day : Bucket::Month;
            config.eager = eager;
            if (!usage_path.empty()) config.default_usage = load_usage_manifest(usage_path);
            if (!cfg.validate_cmd.empty())
                config.validator = make_command_validator(
                    cfg.validate_cmd, std::chrono::milliseconds(cfg.validate_timeout_ms));

            auto result = run_campaign(g, vh, config);
            if (!report_json_path.empty())
                emit_report(result.report, report_json_path, ReportFormat::Json);
            if (!report_md_path.empty())
                emit_report(result.report, report_md_path, ReportFormat::Markdown);
            if (!remaining_csv_path.empty()) emit_remaining_csv(result.report, remaining_csv_path);
            std::cout << campaign_report_json(result.report).dump(2) << "\n";
            return 0;
        }
    } catch (const Error& e) {
        if (json_errors) {
            ordered_json err{{"error", error_code_name(e.code())}, {"message", e.what()}};
            std::cerr << err.dump() << "\n";
        } else {
            std::cerr << "error: " << e.what() << "\n";
        }
        return 1;
    } catch (const std::exception& e) {
        if (json_errors) {
            ordered_json err{{"error", "Unexpected"}, {"message", e.what()}};
            std::cerr << err.dump() << "\n";
        } else {
            std::cerr << "error: " << e.what() << "\n";
        }
        return 1;
    }
    return 2;
}

} // namespace

int main(int argc, char** argv) { return run(argc, argv); }
