#pragma once

/// Range restoration: given a soft-pinned dependency, select the set of
/// candidate versions that (c1) have no reachable incompatible APIs against
/// the pinned version and (c2) carry no more transitive vulnerabilities,
/// minimize the worst vulnerability count (f1) and, within that, keep as many
/// versions as possible (f2), then synthesize the range text.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <csignal>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "ranger/resolver.hpp"

namespace ranger {

struct ApiEntry {
    std::string signature_hash;
    std::string behavior_tag;
};

struct ApiSurface {
    LibraryId library;
    std::string version;
    std::map<std::string, ApiEntry> entries; // api_id -> descriptor
};

enum class IncompatKind : uint8_t { SourceBinary, Behavioral };

struct Incompatibility {
    std::string api_id;
    IncompatKind kind = IncompatKind::SourceBinary;
};

struct CompatReport {
    std::vector<Incompatibility> incompatible; // sorted by api_id
};

/// Removed APIs and signature changes are source/binary breaks; a changed
/// behavior tag alone is a behavioral break. Additions are never breaks.
inline CompatReport compatibility_check(const ApiSurface& base, const ApiSurface& candidate) {
    CompatReport report;
    for (const auto& [id, entry] : base.entries) {
        auto it = candidate.entries.find(id);
        if (it == candidate.entries.end() || it->second.signature_hash != entry.signature_hash) {
            report.incompatible.push_back({id, IncompatKind::SourceBinary});
        } else if (it->second.behavior_tag != entry.behavior_tag) {
            report.incompatible.push_back({id, IncompatKind::Behavioral});
        }
    }
    return report; // base.entries is ordered, so the report is too
}

struct UsageManifest {
    std::string project;
    std::optional<LibraryId> dependency;
    std::set<std::string> used_apis;

    /// An empty manifest is treated as "everything reachable".
    bool all_reachable() const { return used_apis.empty(); }
};

inline std::vector<std::string> reachable_incompatibilities(const CompatReport& report,
                                                            const UsageManifest& usage) {
    std::vector<std::string> out;
    for (const auto& inc : report.incompatible)
        if (usage.all_reachable() || usage.used_apis.count(inc.api_id)) out.push_back(inc.api_id);
    return out;
}

inline UsageManifest load_usage_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open usage manifest " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::SchemaError, std::string("usage manifest: ") + e.what());
    }
    UsageManifest usage;
    usage.project = j.value("project", "");
    if (j.contains("dependency"))
        usage.dependency = LibraryId{j["dependency"].value("group", ""),
                                     j["dependency"].value("artifact", "")};
    if (j.contains("used_apis"))
        for (const auto& id : j["used_apis"]) usage.used_apis.insert(id.get<std::string>());
    return usage;
}

// ---------------------------------------------------------------------------
// surface providers

class SurfaceProvider {
public:
    virtual ~SurfaceProvider() = default;
    virtual std::optional<ApiSurface> surface(const LibraryId& library,
                                              const VersionNumber& version) const = 0;
};

/// Reads `<dir>/<group>__<artifact>__<version>.json` files.
class DirectorySurfaceProvider final : public SurfaceProvider {
public:
    explicit DirectorySurfaceProvider(std::filesystem::path dir) : dir_(std::move(dir)) {}

    std::optional<ApiSurface> surface(const LibraryId& library,
                                      const VersionNumber& version) const override {
        auto path = dir_ / (library.group + "__" + library.artifact + "__" + version.raw() + ".json");
        std::ifstream in(path);
        if (!in) return std::nullopt;
        nlohmann::json j;
        try {
            in >> j;
        } catch (const std::exception& e) {
            throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
        }
        ApiSurface s;
        s.library = library;
        s.version = version.raw();
        if (j.contains("apis"))
            for (const auto& api : j["apis"])
                s.entries[api.at("id").get<std::string>()] = {api.value("signature_hash", ""),
                                                              api.value("behavior_tag", "")};
        return s;
    }

private:
    std::filesystem::path dir_;
};

/// In-memory provider for tests and campaign fixtures.
class MemorySurfaceProvider final : public SurfaceProvider {
public:
    void add(ApiSurface surface) {
        auto key = surface.library.str() + ":" + surface.version;
        surfaces_[key] = std::move(surface);
    }

    std::optional<ApiSurface> surface(const LibraryId& library,
                                      const VersionNumber& version) const override {
        auto it = surfaces_.find(library.str() + ":" + version.raw());
        if (it == surfaces_.end()) {
            // tolerate order-equal raw spellings
            for (const auto& [key, s] : surfaces_)
                if (s.library == library &&
                    compare_versions(VersionNumber::parse(s.version), version) == 0)
                    return s;
            return std::nullopt;
        }
        return it->second;
    }

private:
    std::map<std::string, ApiSurface> surfaces_;
};

// ---------------------------------------------------------------------------
// validation hook

/// Runs the command (via /bin/sh) with `{version}` substituted; true iff it
/// exits 0 within the timeout. A timeout fails the candidate.
inline bool run_validation_hook(const std::string& command_template, const VersionNumber& version,
                                std::chrono::milliseconds timeout = std::chrono::milliseconds(60000),
                                std::string* diagnostic = nullptr) {
    std::string command = command_template;
    const std::string placeholder = "{version}";
    for (size_t pos = command.find(placeholder); pos != std::string::npos;
         pos = command.find(placeholder, pos))
        command.replace(pos, placeholder.size(), version.raw());

    pid_t pid = ::fork();
    if (pid < 0) throw Error(ErrorCode::SpawnError, "fork failed for validation hook");
    if (pid == 0) {
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    auto deadline = std::chrono::steady_clock::now() + timeout;
    int status = 0;
    for (;;) {
        pid_t done = ::waitpid(pid, &status, WNOHANG);
        if (done == pid) break;
        if (done < 0) throw Error(ErrorCode::SpawnError, "waitpid failed for validation hook");
        if (std::chrono::steady_clock::now() >= deadline) {
            ::kill(pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            if (diagnostic) *diagnostic = "validation hook timed out for " + version.raw();
            return false;
        }
        ::usleep(2000);
    }
    if (WIFEXITED(status) && WEXITSTATUS(status) == 0) return true;
    if (diagnostic)
        *diagnostic = "validation hook failed for " + version.raw() + " (status " +
                      std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1) + ")";
    return false;
}

using TestValidator = std::function<bool(const VersionNumber&)>;

inline TestValidator make_command_validator(std::string command_template,
                                            std::chrono::milliseconds timeout) {
    return [command_template = std::move(command_template), timeout](const VersionNumber& v) {
        return run_validation_hook(command_template, v, timeout);
    };
}

// ---------------------------------------------------------------------------
// restoration

enum class RestoreOutcome : uint8_t { Restored, NoCompatiblePatch, NoSecureVersion, InternalError };

inline std::string_view restore_outcome_name(RestoreOutcome o) {
    switch (o) {
        case RestoreOutcome::Restored: return "Restored";
        case RestoreOutcome::NoCompatiblePatch: return "NoCompatiblePatch";
        case RestoreOutcome::NoSecureVersion: return "NoSecureVersion";
        case RestoreOutcome::InternalError: return "InternalError";
    }
    return "InternalError";
}

struct VersionAssessment {
    int vuln_total = -1;
    bool secure = false;
    std::optional<bool> compat_ok;
    std::optional<bool> test_ok;
    bool surface_missing = false;
    std::vector<std::string> reachable_breaks;
};

struct RestoredRange {
    VersionNumber v_s;
    std::vector<VersionNumber> selected;
    std::string range_text;
    std::map<std::string, VersionAssessment> per_version;
    RestoreOutcome outcome = RestoreOutcome::InternalError;
    std::string detail;
};

struct RestoreOptions {
    bool open_upper = false;
    bool allow_holes = false; // continue a directional scan past an incompatible version
    int max_depth = 10;
    CountScopes count_scopes;
    int parallelism = 1;
};

namespace detail {

template <typename Fn>
void parallel_for(size_t n, int parallelism, Fn&& fn) {
    if (parallelism <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    size_t workers = std::min<size_t>(static_cast<size_t>(parallelism), n);
    std::vector<std::future<void>> futures;
    futures.reserve(workers);
    std::atomic<size_t> next{0};
    for (size_t w = 0; w < workers; ++w)
        futures.push_back(std::async(std::launch::async, [&]() {
            for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        }));
    for (auto& f : futures) f.get();
}

} // namespace detail

/// Core restoration over the candidate universe (all corpus versions of the
/// target library).
inline RestoredRange restore_range(const DependencyGraph& g, uint32_t target_lib,
                                   const VersionNumber& v_s, const UsageManifest& usage,
                                   const SurfaceProvider& surfaces,
                                   const TestValidator& validator = {},
                                   const RestoreOptions& opts = {}) {
    RestoredRange result;
    result.v_s = v_s;

    auto candidates_span = g.releases_of(target_lib);
    std::vector<uint32_t> candidates(candidates_span.begin(), candidates_span.end());
    if (candidates.empty()) {
        result.outcome = RestoreOutcome::InternalError;
        result.detail = "no corpus versions of " + g.library(target_lib).str();
        return result;
    }
    auto vs_handle = g.find_release(target_lib, v_s);
    if (!vs_handle) {
        result.outcome = RestoreOutcome::InternalError;
        result.detail = "pinned version " + v_s.raw() + " not in the corpus";
        return result;
    }
    size_t vs_index = candidates.size();
    for (size_t i = 0; i < candidates.size(); ++i)
        if (candidates[i] == *vs_handle) vs_index = i;

    ResolveOptions ropts;
    ropts.max_depth = opts.max_depth;

    // c2: total vulnerabilities of every candidate's own tree
    std::vector<int> vuln_totals(candidates.size(), 0);
    detail::parallel_for(candidates.size(), opts.parallelism, [&](size_t i) {
        vuln_totals[i] = subtree_vulnerabilities(g, candidates[i], ropts, opts.count_scopes);
    });
    int base = vuln_totals[vs_index];

    std::vector<bool> secure(candidates.size(), false);
    for (size_t i = 0; i < candidates.size(); ++i) secure[i] = vuln_totals[i] <= base;

    auto assess = [&](size_t i) -> VersionAssessment& {
        return result.per_version[g.release(candidates[i]).version.raw()];
    };
    for (size_t i = 0; i < candidates.size(); ++i) {
        auto& a = assess(i);
        a.vuln_total = vuln_totals[i];
        a.secure = secure[i];
    }

    std::optional<ApiSurface> base_surface;
    try {
        base_surface = surfaces.surface(g.library(target_lib), g.release(*vs_handle).version);
    } catch (const Error& e) {
        result.outcome = RestoreOutcome::InternalError;
        result.detail = e.what();
        return result;
    }
    if (!base_surface) {
        result.outcome = RestoreOutcome::InternalError;
        result.detail = "missing API surface for " + g.library(target_lib).str() + ":" + v_s.raw();
        return result;
    }

    // c1: directional scans from v_s, stopping at the first incompatible
    // version unless holes are allowed. Insecure candidates are not part of
    // the scan and never stop it.
    std::vector<size_t> admitted;
    // returns false when the scan must stop (incompatible version hit)
    auto check_candidate = [&](size_t i) {
        auto& a = assess(i);
        std::optional<ApiSurface> cand_surface;
        try {
            cand_surface = surfaces.surface(g.library(target_lib), g.release(candidates[i]).version);
        } catch (const Error& e) {
            result.detail = e.what();
            cand_surface.reset();
        }
        if (!cand_surface) {
            a.surface_missing = true; // candidate skipped, scan continues
            return true;
        }
        auto report = compatibility_check(*base_surface, *cand_surface);
        auto breaks = reachable_incompatibilities(report, usage);
        a.compat_ok = breaks.empty();
        a.reachable_breaks = breaks;
        if (breaks.empty()) {
            admitted.push_back(i);
            return true;
        }
        return opts.allow_holes;
    };
    for (size_t i = vs_index; i < candidates.size(); ++i) {
        if (!secure[i]) continue;
        if (!check_candidate(i)) break;
    }
    for (size_t i = vs_index; i-- > 0;) {
        if (!secure[i]) continue;
        if (!check_candidate(i)) break;
    }

    // f1: keep only versions at the minimal vulnerability count
    int min_vuln = 0;
    if (!admitted.empty()) {
        min_vuln = vuln_totals[admitted.front()];
        for (size_t i : admitted) min_vuln = std::min(min_vuln, vuln_totals[i]);
        std::vector<size_t> kept;
        for (size_t i : admitted)
            if (vuln_totals[i] <= min_vuln) kept.push_back(i);
        admitted = std::move(kept);
    }

    // final validation hook
    if (validator && !admitted.empty()) {
        std::sort(admitted.begin(), admitted.end());
        std::vector<char> pass(admitted.size(), 0);
        try {
            detail::parallel_for(admitted.size(), opts.parallelism, [&](size_t k) {
                pass[k] = validator(g.release(candidates[admitted[k]]).version) ? 1 : 0;
            });
        } catch (const Error& e) {
            result.outcome = RestoreOutcome::InternalError;
            result.detail = e.what();
            return result;
        }
        std::vector<size_t> kept;
        for (size_t k = 0; k < admitted.size(); ++k) {
            assess(admitted[k]).test_ok = pass[k] != 0;
            if (pass[k]) kept.push_back(admitted[k]);
        }
        admitted = std::move(kept);
    }

    std::sort(admitted.begin(), admitted.end());
    for (size_t i : admitted) result.selected.push_back(g.release(candidates[i]).version);

    bool secure_alternative = false; // another candidate passing c2
    bool strict_patch = false;       // a candidate strictly better than v_s
    for (size_t i = 0; i < candidates.size(); ++i) {
        if (i == vs_index || !secure[i]) continue;
        secure_alternative = true;
        if (vuln_totals[i] < base) strict_patch = true;
    }

    if (result.selected.empty()) {
        if (secure_alternative) {
            result.outcome = RestoreOutcome::NoCompatiblePatch;
            if (result.detail.empty())
                result.detail = "secure candidates exist but none is compatible or validated";
        } else if (base > 0) {
            result.outcome = RestoreOutcome::NoSecureVersion;
            result.detail = "no candidate carries fewer vulnerabilities than " + v_s.raw();
        } else {
            result.outcome = RestoreOutcome::NoCompatiblePatch;
            if (result.detail.empty()) result.detail = "no candidate survived validation";
        }
        return result;
    }

    if (result.selected.size() == 1 &&
        compare_versions(result.selected.front(), g.release(*vs_handle).version) == 0 && base > 0) {
        if (strict_patch) {
            result.outcome = RestoreOutcome::NoCompatiblePatch;
            result.detail = "patched candidates exist but none is compatible";
        } else {
            result.outcome = RestoreOutcome::NoSecureVersion;
            result.detail = "only the vulnerable pin itself survives the constraints";
        }
        result.selected.clear();
        return result;
    }

    std::vector<VersionNumber> universe;
    for (uint32_t rh : candidates) universe.push_back(g.release(rh).version);
    result.range_text = synthesize_range(result.selected, universe, opts.open_upper);
    result.outcome = RestoreOutcome::Restored;
    if (min_vuln > 0)
        result.detail = "restored range still carries " + std::to_string(min_vuln) +
                        " vulnerabilities per version";
    return result;
}

/// Restores the range for a dependent's declared soft pin on the target.
inline RestoredRange restore_range_for_dependent(const DependencyGraph& g, uint32_t dependent,
                                                 uint32_t target_lib, const UsageManifest& usage,
                                                 const SurfaceProvider& surfaces,
                                                 const TestValidator& validator = {},
                                                 const RestoreOptions& opts = {}) {
    for (const auto& decl : g.decls_of(dependent)) {
        if (decl.target != target_lib) continue;
        if (!decl.spec || !decl.spec->is_soft()) {
            RestoredRange r;
            r.outcome = RestoreOutcome::InternalError;
            r.detail = g.release_id(dependent).gav() + " does not soft-pin " +
                       g.library(target_lib).str();
            return r;
        }
        return restore_range(g, target_lib, decl.spec->preferred(), usage, surfaces, validator,
                             opts);
    }
    RestoredRange r;
    r.outcome = RestoreOutcome::InternalError;
    r.detail = g.release_id(dependent).gav() + " does not declare " + g.library(target_lib).str();
    return r;
}

} // namespace ranger
