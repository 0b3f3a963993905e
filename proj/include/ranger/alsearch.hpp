#pragma once

/// Backward affected-library search: from a vulnerability's affected
/// releases, walk the reverse dependency index breadth-first under the edge
/// attribute rules (scope, optional, exclusions, multiple-version shielding),
/// then validate every candidate by forward resolution. Tracking is an
/// over-approximation filter; validation is authoritative.

#include <deque>
#include <set>
#include <vector>

#include "ranger/resolver.hpp"

namespace ranger {

struct AffectedRecord {
    uint32_t release = 0;
    std::string vuln_id;
    int depth = 0;
    std::optional<Date> released_at;
    std::vector<uint32_t> witness_path; // candidate first, vulnerable release last
    bool validated = true;
};

namespace detail {

/// True when the declaration's spec admits at least one affected version.
inline bool points_to_vulnerable(const DependencyGraph& g, const DependencyGraph::Decl& decl,
                                 const DependencyGraph::VulnEntry& entry) {
    if (!decl.spec) return false;
    if (decl.spec->is_soft()) {
        auto rel = g.find_release(decl.target, decl.spec->preferred());
        return rel && g.is_affected(*rel, entry);
    }
    for (uint32_t rh : entry.affected)
        if (decl.spec->contains(g.release(rh).version)) return true;
    return false;
}

enum class Shield { None, CandidateOnly, CandidateAndPropagation };

/// Multiple-version rule: a dependent whose first direct declaration on the
/// vulnerable library resolves to a non-vulnerable (or absent) release keeps
/// that nearer version under mediation, so the deeper vulnerable chain never
/// wins. The shield also stops propagation when the declaration is visible
/// transitively.
inline Shield direct_shield(const DependencyGraph& g, uint32_t candidate, uint32_t vuln_lib,
                            const DependencyGraph::VulnEntry& entry) {
    for (const auto& decl : g.decls_of(candidate)) {
        if (decl.target != vuln_lib) continue;
        std::optional<uint32_t> resolved;
        if (decl.spec) {
            if (decl.spec->is_soft())
                resolved = g.find_release(vuln_lib, decl.spec->preferred());
            else
                resolved = highest_member(g, vuln_lib, *decl.spec);
        }
        if (resolved && g.is_affected(*resolved, entry)) return Shield::None;
        // non-vulnerable, dangling or unresolved: occupies the library slot
        return scope_transitive(decl.scope) && !decl.optional
                   ? Shield::CandidateAndPropagation
                   : Shield::CandidateOnly;
    }
    return Shield::None;
}

} // namespace detail

/// Forward-resolution check: does the candidate's resolved tree contain a
/// vulnerable release of the vulnerability's library in a counted scope?
inline bool validate_dependent(const DependencyGraph& g, uint32_t candidate,
                               const DependencyGraph::VulnEntry& entry, int max_depth = 10,
                               const CountScopes& scopes = {}) {
    auto lib = g.find_library(entry.vuln.library);
    if (!lib) return false;
    ResolveOptions opt;
    opt.max_depth = max_depth;
    auto tree = resolve_tree(g, candidate, opt);
    const ResolvedNode* n = tree.node_of(*lib);
    return n && n->release && scopes.counts(n->via_scope) && g.is_affected(*n->release, entry);
}

inline std::vector<AffectedRecord> find_affected(const DependencyGraph& g,
                                                 const DependencyGraph::VulnEntry& entry,
                                                 int max_depth = 10,
                                                 const CountScopes& scopes = {}) {
    auto vuln_lib = g.find_library(entry.vuln.library);
    if (!vuln_lib) return {};

    // tracking: backward BFS over declared edges
    std::deque<std::pair<uint32_t, int>> frontier; // (release, backward depth)
    std::set<uint32_t> visited;                    // propagation guard
    std::set<uint32_t> candidates;
    for (uint32_t rh : entry.affected) {
        frontier.emplace_back(rh, 0);
        visited.insert(rh);
    }

    while (!frontier.empty()) {
        auto [y, d] = frontier.front();
        frontier.pop_front();
        if (d >= max_depth) continue;
        uint32_t y_lib = g.release(y).library;
        const VersionNumber& y_version = g.release(y).version;

        for (uint32_t x : g.dependents_of(y_lib)) {
            if (visited.count(x)) continue;
            bool edge_ok = false;
            for (const auto& decl : g.decls_of(x)) {
                if (decl.target != y_lib) continue;
                if (!decl.spec || !decl.spec->contains(y_version)) continue;
                if (!scope_transitive(decl.scope)) continue;
                if (decl.optional && d >= 1) continue; // optional only at the first hop
                if (d >= 1) {
                    bool masked = false;
                    for (uint32_t e : decl.exclusions)
                        if (e == *vuln_lib) masked = true;
                    if (masked) continue;
                }
                edge_ok = true;
                break;
            }
            if (!edge_ok) continue;

            auto shield = detail::direct_shield(g, x, *vuln_lib, entry);
            if (shield != detail::Shield::CandidateAndPropagation) {
                visited.insert(x);
                frontier.emplace_back(x, d + 1);
            }
            if (shield == detail::Shield::None) candidates.insert(x);
        }
    }

    // validation: authoritative forward resolution per candidate
    std::vector<AffectedRecord> records;
    ResolveOptions opt;
    opt.max_depth = max_depth;
    for (uint32_t candidate : candidates) {
        auto tree = resolve_tree(g, candidate, opt);
        size_t node_index = tree.nodes.size();
        for (size_t i = 0; i < tree.nodes.size(); ++i)
            if (tree.nodes[i].library == *vuln_lib) {
                node_index = i;
                break;
            }
        if (node_index == tree.nodes.size()) continue;
        const auto& node = tree.nodes[node_index];
        if (!node.release || !scopes.counts(node.via_scope) ||
            !g.is_affected(*node.release, entry))
            continue;

        AffectedRecord rec;
        rec.release = candidate;
        rec.vuln_id = entry.vuln.id;
        rec.depth = node.depth;
        rec.released_at = g.release(candidate).released_at;
        rec.witness_path = tree.path_to(node_index);
        records.push_back(std::move(rec));
    }

    std::sort(records.begin(), records.end(), [&](const AffectedRecord& a, const AffectedRecord& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return g.release_id(a.release).gav() < g.release_id(b.release).gav();
    });
    return records;
}

} // namespace ranger
