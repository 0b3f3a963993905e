#pragma once

/// Forward Maven dependency resolution: breadth-first with nearest-wins
/// mediation (shallowest declaration wins, document order breaks ties),
/// scope-limited transitivity, optional pruning, path-accumulated exclusions
/// and root-level dependencyManagement overrides.

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "ranger/graph.hpp"

namespace ranger {

struct ResolvedNode {
    uint32_t library = 0;
    std::optional<uint32_t> release;      // empty: dangling target placeholder
    std::optional<VersionNumber> version; // declared version when known
    int depth = 0;
    int parent = -1; // index into nodes, -1 = root release
    Scope via_scope = Scope::Compile;
    bool optional_edge = false;
    bool via_range = false; // resolved through a range rather than a soft pin
};

struct MediationEvent {
    uint32_t library = 0;
    std::string winner;
    std::vector<std::string> losers;
    bool range_vs_soft = false; // a range and a soft pin met for this library
    bool cycle = false;         // a declaration pointed back into its own path
};

struct ResolvedTree {
    uint32_t root = 0;
    std::vector<ResolvedNode> nodes;
    std::vector<MediationEvent> mediation_log;

    const ResolvedNode* node_of(uint32_t library) const {
        for (const auto& n : nodes)
            if (n.library == library) return &n;
        return nullptr;
    }

    /// Release handles from the node's root-most ancestor down to the node.
    std::vector<uint32_t> path_to(size_t node_index) const {
        std::vector<uint32_t> path;
        int i = static_cast<int>(node_index);
        while (i >= 0) {
            if (nodes[static_cast<size_t>(i)].release)
                path.push_back(*nodes[static_cast<size_t>(i)].release);
            i = nodes[static_cast<size_t>(i)].parent;
        }
        path.push_back(root);
        std::reverse(path.begin(), path.end());
        return path;
    }
};

struct ResolveOptions {
    int max_depth = 10;
    bool use_root_dm = true; // apply the root's dependencyManagement to transitive versions
};

namespace detail {

/// Highest corpus release of `lib` contained in the range set.
inline std::optional<uint32_t> highest_member(const DependencyGraph& g, uint32_t lib,
                                              const VersionSpec& spec) {
    auto releases = g.releases_of(lib);
    for (auto it = releases.rbegin(); it != releases.rend(); ++it)
        if (spec.contains(g.release(*it).version)) return *it;
    return std::nullopt;
}

} // namespace detail

inline ResolvedTree resolve_tree(const DependencyGraph& g, uint32_t root,
                                 const ResolveOptions& opt = {}) {
    if (root >= g.release_count())
        throw Error(ErrorCode::NoSuchRelease, "release handle out of range");

    ResolvedTree tree;
    tree.root = root;

    // root dependencyManagement overrides transitive versions but is not
    // applied on behalf of deeper ancestors
    std::map<uint32_t, const DependencyGraph::Decl*> root_dm;
    if (opt.use_root_dm)
        for (const auto& d : g.dm_of(root))
            if (d.scope != Scope::Import) root_dm.emplace(d.target, &d);

    std::map<uint32_t, size_t> selected;               // library -> node index
    std::vector<std::set<uint32_t>> node_exclusions;   // parallel working state
    std::map<uint32_t, size_t> mediation_index;        // library -> log index

    auto ancestor_libs = [&](int parent) {
        std::set<uint32_t> libs;
        int i = parent;
        while (i >= 0) {
            libs.insert(tree.nodes[static_cast<size_t>(i)].library);
            i = tree.nodes[static_cast<size_t>(i)].parent;
        }
        return libs;
    };

    auto log_loss = [&](uint32_t lib, const std::string& loser, bool kinds_differ, bool cycle) {
        auto it = mediation_index.find(lib);
        if (it == mediation_index.end()) {
            MediationEvent ev;
            ev.library = lib;
            const auto& winner = tree.nodes[selected.at(lib)];
            ev.winner = winner.version ? winner.version->raw() : "?";
            mediation_index.emplace(lib, tree.mediation_log.size());
            tree.mediation_log.push_back(std::move(ev));
            it = mediation_index.find(lib);
        }
        auto& ev = tree.mediation_log[it->second];
        ev.losers.push_back(loser);
        ev.range_vs_soft = ev.range_vs_soft || kinds_differ;
        ev.cycle = ev.cycle || cycle;
    };

    auto process_decl = [&](int parent, int depth, const DependencyGraph::Decl& decl,
                            const std::set<uint32_t>& parent_excl) {
        if (depth >= 2) {
            if (!scope_transitive(decl.scope) || decl.optional) return;
        } else if (decl.scope == Scope::Import) {
            return;
        }
        if (parent_excl.count(decl.target)) return;

        const VersionSpec* spec = nullptr;
        bool overridden = false;
        if (depth >= 2) {
            auto it = root_dm.find(decl.target);
            if (it != root_dm.end() && it->second->spec) {
                spec = &*it->second->spec;
                overridden = true;
            }
        }
        if (!spec && decl.spec) spec = &*decl.spec;

        std::optional<uint32_t> release;
        std::optional<VersionNumber> version;
        if (spec) {
            if (spec->is_soft()) {
                version = spec->preferred();
                release = g.find_release(decl.target, *version);
            } else if (auto rh = detail::highest_member(g, decl.target, *spec)) {
                release = rh;
                version = g.release(*rh).version;
            }
        }

        auto sel = selected.find(decl.target);
        if (sel != selected.end()) {
            const auto& winner = tree.nodes[sel->second];
            bool cycle = ancestor_libs(parent).count(decl.target) > 0;
            bool kinds_differ = spec && (!spec->is_soft() != winner.via_range);
            std::string loser = g.library(decl.target).str() + ":" +
                                (version ? version->raw() : (spec ? spec->text() : "?")) +
                                " (depth " + std::to_string(depth) + ")";
            log_loss(decl.target, loser, kinds_differ && !overridden, cycle);
            return;
        }

        ResolvedNode node;
        node.library = decl.target;
        node.release = release;
        node.version = version;
        node.depth = depth;
        node.parent = parent;
        node.via_scope = decl.scope;
        node.optional_edge = decl.optional;
        node.via_range = spec && !spec->is_soft();

        std::set<uint32_t> excl = parent_excl;
        excl.insert(decl.exclusions.begin(), decl.exclusions.end());

        selected.emplace(decl.target, tree.nodes.size());
        tree.nodes.push_back(std::move(node));
        node_exclusions.push_back(std::move(excl));
    };

    for (const auto& decl : g.decls_of(root)) process_decl(-1, 1, decl, {});

    // nodes vector is in BFS order by construction; expand it as a queue
    for (size_t i = 0; i < tree.nodes.size(); ++i) {
        const auto node = tree.nodes[i]; // copy: vector reallocates during expansion
        if (node.depth >= opt.max_depth) continue;
        if (!node.release) continue;
        if (!scope_transitive(node.via_scope) || node.optional_edge) continue;
        const auto excl = node_exclusions[i];
        for (const auto& decl : g.decls_of(*node.release))
            process_decl(static_cast<int>(i), node.depth + 1, decl, excl);
    }
    return tree;
}

/// Scopes whose nodes participate in vulnerability counting.
struct CountScopes {
    bool provided = false;
    bool test = false;
    bool system = false;

    bool counts(Scope s) const {
        switch (s) {
            case Scope::Compile:
            case Scope::Runtime: return true;
            case Scope::Provided: return provided;
            case Scope::Test: return test;
            case Scope::System: return system;
            case Scope::Import: return false;
        }
        return false;
    }
};

struct VulnerabilityCount {
    std::vector<int> per_node; // parallel to tree.nodes
    int total = 0;
};

inline VulnerabilityCount count_vulnerabilities(const DependencyGraph& g, const ResolvedTree& tree,
                                                const CountScopes& scopes = {}) {
    VulnerabilityCount out;
    out.per_node.assign(tree.nodes.size(), 0);
    for (size_t i = 0; i < tree.nodes.size(); ++i) {
        const auto& n = tree.nodes[i];
        if (!n.release || !scopes.counts(n.via_scope)) continue;
        int c = g.direct_vulnerabilities(*n.release);
        out.per_node[i] = c;
        out.total += c;
    }
    return out;
}

inline std::optional<VersionNumber> resolved_version_of(const DependencyGraph& g, uint32_t root,
                                                        uint32_t target_lib,
                                                        const ResolveOptions& opt = {}) {
    auto tree = resolve_tree(g, root, opt);
    const ResolvedNode* n = tree.node_of(target_lib);
    if (!n) return std::nullopt;
    return n->version;
}

/// Total vulnerabilities of the subtree rooted at `release`, including the
/// release itself.
inline int subtree_vulnerabilities(const DependencyGraph& g, uint32_t release,
                                   const ResolveOptions& opt = {}, const CountScopes& scopes = {}) {
    auto tree = resolve_tree(g, release, opt);
    return g.direct_vulnerabilities(release) + count_vulnerabilities(g, tree, scopes).total;
}

} // namespace ranger
