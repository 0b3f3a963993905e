#pragma once

/// Independent campaign simulator for the suppression acceptance check. It
/// re-derives everything from the plain corpus with the naive resolver and
/// the exhaustive restoration oracle: affected lib-vers per depth, the
/// restoration decision for each blocking dependent, and the fixed point
/// after applying the selected version sets. Compatibility comes from a
/// ground-truth callback supplied by the fixture, not from surface diffing.

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "support/oracles.hpp"
#include "support/restore_oracle.hpp"

namespace ranger::testing {

struct SimOutcome {
    long initial_remaining = 0;
    std::vector<std::pair<int, long>> remaining_after_depth; // processed depths only
    long final_remaining = 0;
};

/// compat(dependent_library, target_library, v_s_raw, candidate_raw) -> bool
using GroundTruthCompat =
    std::function<bool(const std::string&, const std::string&, const std::string&,
                       const std::string&)>;

class CampaignSimulator {
public:
    CampaignSimulator(Corpus corpus, std::string vuln_id, GroundTruthCompat compat, int max_depth)
        : corpus_(std::move(corpus)), compat_(std::move(compat)), max_depth_(max_depth) {
        for (const auto& v : corpus_.vulnerabilities)
            if (v.id == vuln_id) vuln_ = &v;
        for (const auto& rel : corpus_.releases) {
            gavs_.push_back(rel.gav());
            versions_by_library_[rel.library.str()].push_back(rel.version);
        }
        for (auto& [lib, vs] : versions_by_library_)
            std::sort(vs.begin(), vs.end(), [](const VersionNumber& a, const VersionNumber& b) {
                return compare_versions(a, b) < 0;
            });
    }

    SimOutcome run() {
        SimOutcome out;
        auto records = affected_records();
        out.initial_remaining = static_cast<long>(records.size());

        for (int depth = 1; depth <= max_depth_; ++depth) {
            if (records.empty()) break;
            std::vector<std::string> deps;
            for (const auto& [gav, info] : records)
                if (info.depth == depth) deps.push_back(gav);
            if (deps.empty()) continue;
            std::sort(deps.begin(), deps.end());

            for (const auto& gav : deps) {
                const auto& info = records.at(gav);
                auto selected = decide(gav, info.next_hop_library);
                if (!selected) continue;
                // apply: replace the dependent's pin with the selected set
                std::vector<Interval> intervals;
                for (const auto& v : *selected) {
                    Interval iv;
                    iv.lower = iv.upper = v;
                    iv.lower_closed = iv.upper_closed = true;
                    intervals.push_back(std::move(iv));
                }
                set_spec(gav, info.next_hop_library, VersionSpec::range_set(std::move(intervals)));
            }
            records = affected_records();
            out.remaining_after_depth.emplace_back(depth, static_cast<long>(records.size()));
        }
        out.final_remaining = records.empty()
                                  ? 0
                                  : static_cast<long>(records.size());
        return out;
    }

private:
    struct RecordInfo {
        int depth = 0;
        std::string next_hop_library;
    };

    std::map<std::string, RecordInfo> affected_records() const {
        NaiveResolver naive(corpus_);
        std::map<std::string, RecordInfo> out;
        for (const auto& gav : gavs_) {
            auto pos = gav.rfind(':');
            if (gav.substr(0, pos) == vuln_->library.str() &&
                vuln_->affected.contains(VersionNumber::parse(gav.substr(pos + 1))))
                continue; // the seed set, not a dependent
            auto tree = naive.resolve(gav, max_depth_);
            auto it = tree.by_library.find(vuln_->library.str());
            if (it == tree.by_library.end()) continue;
            const auto& node = it->second;
            if (!node.version || !scope_transitive(node.scope)) continue;
            if (!vuln_->affected.contains(VersionNumber::parse(*node.version))) continue;
            if (!exists(vuln_->library.str(), *node.version)) continue;
            // walk the parent chain up to the direct dependency of the root
            std::string hop = vuln_->library.str();
            const NaiveNode* cur = &node;
            while (!cur->parent_library.empty()) {
                hop = cur->parent_library;
                cur = &tree.by_library.at(cur->parent_library);
            }
            out.emplace(gav, RecordInfo{node.depth, hop});
        }
        return out;
    }

    /// Restoration decision via the exhaustive oracle on naive-derived counts
    /// and ground-truth compatibility. Returns the selected version set, or
    /// nothing when the restoration fails.
    std::optional<std::vector<VersionNumber>> decide(const std::string& dependent_gav,
                                                     const std::string& target_lib) const {
        auto pin = pinned_version(dependent_gav, target_lib);
        if (!pin) return std::nullopt;
        const auto& versions = versions_by_library_.at(target_lib);

        RestoreInstance instance;
        instance.n = static_cast<int>(versions.size());
        instance.vs = -1;
        std::string dep_lib = dependent_gav.substr(0, dependent_gav.rfind(':'));
        for (int i = 0; i < instance.n; ++i) {
            const auto& v = versions[static_cast<size_t>(i)];
            if (compare_versions(v, *pin) == 0) instance.vs = i;
            instance.vuln_counts.push_back(subtree_vuln_count(target_lib, v));
            instance.compatible.push_back(compat_(dep_lib, target_lib, pin->raw(), v.raw()));
        }
        if (instance.vs < 0) return std::nullopt;
        instance.compatible[static_cast<size_t>(instance.vs)] = true;

        auto optimum = restore_oracle_optimum(instance);
        if (!optimum) return std::nullopt;
        int base = instance.vuln_counts[static_cast<size_t>(instance.vs)];
        if (optimum->size() == 1 && *optimum->begin() == instance.vs && base > 0)
            return std::nullopt; // only the vulnerable pin survives
        std::vector<VersionNumber> selected;
        for (int idx : *optimum) selected.push_back(versions[static_cast<size_t>(idx)]);
        return selected;
    }

    int subtree_vuln_count(const std::string& lib, const VersionNumber& v) const {
        NaiveResolver naive(corpus_);
        int count = vuln_->library.str() == lib && vuln_->affected.contains(v) ? 1 : 0;
        auto tree = naive.resolve(lib + ":" + v.raw(), max_depth_);
        for (const auto& [node_lib, node] : tree.by_library) {
            if (!node.version || !scope_transitive(node.scope)) continue;
            if (node_lib != vuln_->library.str()) continue;
            if (!exists(node_lib, *node.version)) continue;
            if (vuln_->affected.contains(VersionNumber::parse(*node.version))) ++count;
        }
        return count;
    }

    std::optional<VersionNumber> pinned_version(const std::string& gav,
                                                const std::string& target_lib) const {
        for (auto& pom : corpus_.poms) {
            if (pom.release.gav() != gav) continue;
            for (const auto& d : pom.dependencies)
                if (d.target.str() == target_lib && d.spec && d.spec->is_soft())
                    return d.spec->preferred();
        }
        return std::nullopt;
    }

    void set_spec(const std::string& gav, const std::string& target_lib, VersionSpec spec) {
        for (auto& pom : corpus_.poms) {
            if (pom.release.gav() != gav) continue;
            for (auto& d : pom.dependencies)
                if (d.target.str() == target_lib) {
                    d.raw_spec = spec.text();
                    d.spec = std::move(spec);
                    return;
                }
        }
    }

    bool exists(const std::string& lib, const std::string& version) const {
        auto it = versions_by_library_.find(lib);
        if (it == versions_by_library_.end()) return false;
        auto v = VersionNumber::parse(version);
        for (const auto& candidate : it->second)
            if (compare_versions(candidate, v) == 0) return true;
        return false;
    }

    Corpus corpus_;
    const Vulnerability* vuln_ = nullptr;
    GroundTruthCompat compat_;
    int max_depth_;
    std::vector<std::string> gavs_;
    std::map<std::string, std::vector<VersionNumber>> versions_by_library_;
};

} // namespace ranger::testing
