#pragma once

/// Ecosystem snapshot ingestion: the release index (`index.jsonl`), raw POM
/// documents (`poms/<group>__<artifact>__<version>.xml`) and one merged
/// vulnerability file (`vulns.json`). Output records are normalized and
/// deterministic; problems surface as diagnostics, not aborts.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ranger/common.hpp"
#include "ranger/version.hpp"
#include "ranger/xml.hpp"

namespace ranger {

struct ReleaseId {
    LibraryId library;
    VersionNumber version;
    std::optional<Date> released_at;

    std::string gav() const { return library.str() + ":" + version.raw(); }
};

struct DependencyDecl {
    LibraryId target;
    std::optional<VersionSpec> spec; // empty = UnresolvedSpec sentinel
    std::string raw_spec;            // declared version text, "" when absent
    Scope scope = Scope::Compile;
    bool optional = false;
    std::vector<LibraryId> exclusions;

    bool unresolved() const { return !spec.has_value(); }
};

struct PomDocument {
    ReleaseId release;
    std::optional<ReleaseId> parent;
    std::map<std::string, std::string> properties;
    std::vector<DependencyDecl> dependencies;          // document order
    std::vector<DependencyDecl> dependency_management; // document order
};

struct Vulnerability {
    std::string id;
    LibraryId library;
    VersionSpec affected; // RangeSet
    Date published_at;
    std::optional<std::string> severity;
};

// ---------------------------------------------------------------------------
// index.jsonl

inline std::vector<ReleaseId> load_index(const std::filesystem::path& path, Diagnostics& diags) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open index " + path.string());

    std::vector<ReleaseId> releases;
    std::map<std::string, size_t> seen; // gav -> index into releases
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw Error(ErrorCode::SchemaError,
                        "index line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("group") || !j.contains("artifact") ||
            !j.contains("version"))
            throw Error(ErrorCode::SchemaError, "index line " + std::to_string(lineno) +
                                                    ": need group/artifact/version");
        ReleaseId rel;
        rel.library = {j["group"].get<std::string>(), j["artifact"].get<std::string>()};
        if (rel.library.group.empty() || rel.library.artifact.empty())
            throw Error(ErrorCode::SchemaError,
                        "index line " + std::to_string(lineno) + ": empty coordinates");
        rel.version = VersionNumber::parse(j["version"].get<std::string>());
        if (j.contains("released_at") && !j["released_at"].is_null()) {
            rel.released_at = Date::parse(j["released_at"].get<std::string>());
            if (!rel.released_at)
                throw Error(ErrorCode::SchemaError, "index line " + std::to_string(lineno) +
                                                        ": bad released_at date");
        }

        auto key = rel.gav();
        auto it = seen.find(key);
        if (it != seen.end()) {
            auto& kept = releases[it->second];
            // duplicates keep the earliest released_at
            if (rel.released_at && (!kept.released_at || *rel.released_at < *kept.released_at))
                kept.released_at = rel.released_at;
            warn(diags, "duplicate-release",
                 "index line " + std::to_string(lineno) + ": duplicate " + key);
            continue;
        }
        seen.emplace(std::move(key), releases.size());
        releases.push_back(std::move(rel));
    }

    std::sort(releases.begin(), releases.end(), [](const ReleaseId& a, const ReleaseId& b) {
        if (a.library != b.library) return a.library < b.library;
        int c = compare_versions(a.version, b.version);
        if (c != 0) return c < 0;
        return a.version.raw() < b.version.raw();
    });
    return releases;
}

// ---------------------------------------------------------------------------
// POM parsing

namespace detail {

inline std::optional<std::string> interpolate(const std::string& input,
                                              const std::map<std::string, std::string>& props,
                                              int depth = 0) {
    if (input.find("${") == std::string::npos) return input;
    if (depth > 10) return std::nullopt;
    std::string out;
    size_t i = 0;
    bool complete = true;
    while (i < input.size()) {
        auto open = input.find("${", i);
        if (open == std::string::npos) {
            out.append(input, i, std::string::npos);
            break;
        }
        out.append(input, i, open - i);
        auto close = input.find('}', open + 2);
        if (close == std::string::npos) {
            out.append(input, open, std::string::npos);
            complete = false;
            break;
        }
        std::string key = input.substr(open + 2, close - open - 2);
        auto it = props.find(key);
        if (it == props.end()) {
            out.append(input, open, close - open + 1);
            complete = false;
        } else {
            auto nested = interpolate(it->second, props, depth + 1);
            if (!nested) {
                out.append(input, open, close - open + 1);
                complete = false;
            } else {
                out += *nested;
            }
        }
        i = close + 1;
    }
    if (!complete) return std::nullopt;
    return out;
}

inline std::map<std::string, std::string> builtin_properties(const ReleaseId& release) {
    return {
        {"project.groupId", release.library.group},
        {"project.artifactId", release.library.artifact},
        {"project.version", release.version.raw()},
    };
}

inline DependencyDecl parse_dependency_node(const xml::Node& dep,
                                            const std::map<std::string, std::string>& props,
                                            const ReleaseId& release, Diagnostics& diags) {
    auto text_of = [&](const char* name) -> std::string {
        const xml::Node* n = dep.child(name);
        return n ? n->trimmed_text() : std::string();
    };
    auto resolve = [&](std::string value) -> std::string {
        auto r = interpolate(value, props);
        return r ? *r : value;
    };

    DependencyDecl decl;
    decl.target.group = resolve(text_of("groupId"));
    decl.target.artifact = resolve(text_of("artifactId"));
    if (decl.target.group.empty() || decl.target.artifact.empty())
        throw Error(ErrorCode::MissingCoordinates,
                    "dependency without group/artifact in " + release.gav());

    decl.raw_spec = text_of("version");
    if (!decl.raw_spec.empty()) {
        auto resolved = interpolate(decl.raw_spec, props);
        if (!resolved) {
            warn(diags, "unresolved-spec",
                 release.gav() + " -> " + decl.target.str() + ": uninterpolated '" +
                     decl.raw_spec + "'");
        } else {
            try {
                decl.spec = parse_version_spec(*resolved);
            } catch (const Error& e) {
                warn(diags, "unresolved-spec",
                     release.gav() + " -> " + decl.target.str() + ": " + e.what());
            }
        }
    }

    auto scope_text = text_of("scope");
    if (!scope_text.empty()) {
        auto s = scope_from_name(scope_text);
        if (!s) {
            warn(diags, "unknown-scope", release.gav() + ": scope '" + scope_text + "'");
            s = Scope::Compile;
        }
        decl.scope = *s;
    }
    decl.optional = text_of("optional") == "true";

    if (const xml::Node* excl = dep.child("exclusions")) {
        for (const xml::Node* e : excl->children_named("exclusion")) {
            const xml::Node* g = e->child("groupId");
            const xml::Node* a = e->child("artifactId");
            if (g && a)
                decl.exclusions.push_back({resolve(g->trimmed_text()), resolve(a->trimmed_text())});
        }
        std::sort(decl.exclusions.begin(), decl.exclusions.end());
    }
    return decl;
}

} // namespace detail

/// Parses one POM document. `${...}` placeholders are interpolated from this
/// document's own properties plus the project built-ins; declarations whose
/// version stays uninterpolated are kept with an empty spec and reported.
inline PomDocument parse_pom(std::string_view bytes, const ReleaseId& release,
                             Diagnostics& diags) {
    xml::Node root = xml::parse(bytes);
    if (root.name != "project")
        throw Error(ErrorCode::XmlError, "root element is <" + root.name + ">, expected <project>");

    PomDocument pom;
    pom.release = release;

    if (const xml::Node* parent = root.child("parent")) {
        const xml::Node* g = parent->child("groupId");
        const xml::Node* a = parent->child("artifactId");
        const xml::Node* v = parent->child("version");
        if (g && a && v) {
            ReleaseId pr;
            pr.library = {g->trimmed_text(), a->trimmed_text()};
            pr.version = VersionNumber::parse(v->trimmed_text());
            pom.parent = std::move(pr);
        } else {
            warn(diags, "bad-parent", release.gav() + ": incomplete <parent> coordinates");
        }
    }

    if (const xml::Node* props = root.child("properties"))
        for (const auto& p : props->children)
            pom.properties[p.name] = p.trimmed_text();

    auto effective_props = pom.properties;
    for (auto& [k, v] : detail::builtin_properties(release)) effective_props[k] = v;

    if (const xml::Node* deps = root.child("dependencies"))
        for (const xml::Node* d : deps->children_named("dependency"))
            pom.dependencies.push_back(
                detail::parse_dependency_node(*d, effective_props, release, diags));

    if (const xml::Node* dm = root.child("dependencyManagement"))
        if (const xml::Node* deps = dm->child("dependencies"))
            for (const xml::Node* d : deps->children_named("dependency"))
                pom.dependency_management.push_back(
                    detail::parse_dependency_node(*d, effective_props, release, diags));

    return pom;
}

// ---------------------------------------------------------------------------
// vulns.json

inline std::vector<Vulnerability> load_vulnerabilities(const std::filesystem::path& path,
                                                       Diagnostics& diags) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open vulnerabilities " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::SchemaError, std::string("vulns: ") + e.what());
    }
    if (!doc.is_array()) throw Error(ErrorCode::SchemaError, "vulns: expected a JSON array");

    std::map<std::string, size_t> index; // id + gav -> position
    std::vector<Vulnerability> out;
    for (const auto& j : doc) {
        if (!j.contains("id") || !j.contains("group") || !j.contains("artifact") ||
            !j.contains("published_at") || !j.contains("ranges"))
            throw Error(ErrorCode::SchemaError,
                        "vulns: need id/group/artifact/published_at/ranges");

        std::string id = j["id"].get<std::string>();
        LibraryId lib{j["group"].get<std::string>(), j["artifact"].get<std::string>()};
        auto published = Date::parse(j["published_at"].get<std::string>());
        if (!published)
            throw Error(ErrorCode::SchemaError, "vulns: bad published_at for " + id);

        std::vector<Interval> intervals;
        for (const auto& r : j["ranges"]) {
            std::optional<VersionNumber> introduced, fixed, last_affected;
            if (r.contains("introduced"))
                introduced = VersionNumber::parse(r["introduced"].get<std::string>());
            if (r.contains("fixed")) fixed = VersionNumber::parse(r["fixed"].get<std::string>());
            if (r.contains("last_affected"))
                last_affected = VersionNumber::parse(r["last_affected"].get<std::string>());
            if (fixed && last_affected) {
                warn(diags, "ambiguous-range", id + ": both fixed and last_affected; using fixed");
                last_affected.reset();
            }
            if (introduced && fixed && compare_versions(*fixed, *introduced) < 0)
                throw Error(ErrorCode::UnorderedEvents,
                            id + ": fixed " + fixed->raw() + " < introduced " + introduced->raw());
            if (introduced && last_affected &&
                compare_versions(*last_affected, *introduced) < 0)
                throw Error(ErrorCode::UnorderedEvents, id + ": last_affected " +
                                                            last_affected->raw() +
                                                            " < introduced " + introduced->raw());
            Interval iv;
            iv.lower = introduced ? std::move(introduced)
                                  : std::optional<VersionNumber>(VersionNumber::parse("0"));
            iv.lower_closed = true;
            if (fixed) {
                iv.upper = std::move(fixed);
                iv.upper_closed = false;
            } else if (last_affected) {
                iv.upper = std::move(last_affected);
                iv.upper_closed = true;
            }
            intervals.push_back(std::move(iv));
        }
        if (intervals.empty())
            throw Error(ErrorCode::SchemaError, id + ": no affected ranges");

        std::string key = id + "\x1f" + lib.str();
        auto it = index.find(key);
        if (it != index.end()) {
            // merge duplicate (id, library) entries into one record
            auto merged = out[it->second].affected.intervals();
            merged.insert(merged.end(), intervals.begin(), intervals.end());
            out[it->second].affected = VersionSpec::range_set(std::move(merged));
            warn(diags, "duplicate-vuln", "merged duplicate entry for " + id + " / " + lib.str());
            continue;
        }
        index.emplace(std::move(key), out.size());
        Vulnerability v;
        v.id = std::move(id);
        v.library = std::move(lib);
        v.affected = VersionSpec::range_set(std::move(intervals));
        v.published_at = *published;
        if (j.contains("severity") && !j["severity"].is_null())
            v.severity = j["severity"].get<std::string>();
        out.push_back(std::move(v));
    }

    std::sort(out.begin(), out.end(), [](const Vulnerability& a, const Vulnerability& b) {
        if (a.id != b.id) return a.id < b.id;
        return a.library < b.library;
    });
    return out;
}

/// Releases of the vulnerability's library whose version falls in the
/// affected set. Releases of other libraries are ignored.
inline std::vector<ReleaseId> match_affected_versions(const Vulnerability& vuln,
                                                      const std::vector<ReleaseId>& releases) {
    std::vector<ReleaseId> out;
    for (const auto& r : releases)
        if (r.library == vuln.library && vuln.affected.contains(r.version)) out.push_back(r);
    return out;
}

// ---------------------------------------------------------------------------
// Corpus assembly (parent chains, BOM imports, dependencyManagement fill)

struct Corpus {
    std::vector<ReleaseId> releases;
    std::vector<PomDocument> poms; // parallel to releases where present
    std::vector<Vulnerability> vulnerabilities;
    Diagnostics diagnostics;
};

namespace detail {

inline std::string pom_key(const LibraryId& lib, const VersionNumber& v) {
    return lib.str() + ":" + v.raw();
}

/// Merges parent-chain properties and dependencyManagement into each POM
/// (child overrides parent, chains capped at 10 ancestors), expands one level
/// of import-scoped BOMs, then re-interpolates still-unresolved specs and
/// fills versionless dependencies from the effective dependencyManagement.
inline void finalize_poms(std::vector<PomDocument>& poms, Diagnostics& diags) {
    std::map<std::string, size_t> by_key;
    for (size_t i = 0; i < poms.size(); ++i)
        by_key[pom_key(poms[i].release.library, poms[i].release.version)] = i;

    auto find_pom = [&](const LibraryId& lib, const VersionNumber& v) -> PomDocument* {
        auto it = by_key.find(pom_key(lib, v));
        return it == by_key.end() ? nullptr : &poms[it->second];
    };

    // effective properties and DM per pom, computed against the *raw* parents
    std::vector<std::map<std::string, std::string>> eff_props(poms.size());
    std::vector<std::vector<DependencyDecl>> eff_dm(poms.size());

    for (size_t i = 0; i < poms.size(); ++i) {
        auto& pom = poms[i];
        std::map<std::string, std::string> props = pom.properties;
        std::vector<DependencyDecl> dm = pom.dependency_management;
        std::set<std::string> dm_seen;
        for (const auto& d : dm) dm_seen.insert(d.target.str());

        const PomDocument* cur = &pom;
        for (int hop = 0; hop < 10 && cur->parent; ++hop) {
            PomDocument* parent = find_pom(cur->parent->library, cur->parent->version);
            if (!parent) {
                warn(diags, "missing-parent",
                     cur->release.gav() + ": parent " + cur->parent->gav() + " not in corpus");
                break;
            }
            for (const auto& [k, v] : parent->properties) props.emplace(k, v);
            for (const auto& d : parent->dependency_management)
                if (dm_seen.insert(d.target.str()).second) dm.push_back(d);
            cur = parent;
        }

        // expand import-scoped BOM entries one level
        std::vector<DependencyDecl> expanded;
        for (const auto& d : dm) {
            if (d.scope != Scope::Import) {
                expanded.push_back(d);
                continue;
            }
            if (!d.spec || !d.spec->is_soft()) {
                warn(diags, "bom-import", pom.release.gav() + ": unversioned import of " +
                                              d.target.str() + " ignored");
                continue;
            }
            PomDocument* bom = find_pom(d.target, d.spec->preferred());
            if (!bom) {
                warn(diags, "bom-import", pom.release.gav() + ": imported " + d.target.str() + ":" +
                                              d.spec->preferred().raw() + " not in corpus");
                continue;
            }
            for (const auto& b : bom->dependency_management)
                if (b.scope != Scope::Import && dm_seen.insert(b.target.str()).second)
                    expanded.push_back(b);
        }

        eff_props[i] = std::move(props);
        eff_dm[i] = std::move(expanded);
    }

    for (size_t i = 0; i < poms.size(); ++i) {
        auto& pom = poms[i];
        auto props = eff_props[i];
        for (auto& [k, v] : builtin_properties(pom.release)) props[k] = v;

        auto rescue = [&](DependencyDecl& decl) {
            if (!decl.unresolved() || decl.raw_spec.empty()) return;
            auto resolved = interpolate(decl.raw_spec, props);
            if (!resolved) return;
            try {
                decl.spec = parse_version_spec(*resolved);
            } catch (const Error&) {
            }
        };
        for (auto& d : pom.dependency_management) rescue(d);
        for (auto& d : eff_dm[i]) rescue(d);
        for (auto& d : pom.dependencies) {
            rescue(d);
            if (d.unresolved() && d.raw_spec.empty()) {
                // versionless declaration: adopt the managed version
                for (const auto& m : eff_dm[i]) {
                    if (m.target == d.target && m.spec) {
                        d.spec = m.spec;
                        d.raw_spec = m.raw_spec;
                        break;
                    }
                }
            }
            if (d.unresolved())
                warn(diags, "unresolved-spec",
                     pom.release.gav() + " -> " + d.target.str() + ": no resolvable version");
        }
        pom.properties = std::move(eff_props[i]);
        pom.dependency_management = std::move(eff_dm[i]);
    }
}

} // namespace detail

/// Replaces only the text inside the `<version>` element of the dependency
/// declaration matching `dep`, leaving every other byte of the document
/// untouched. Project dependencies are searched first, then
/// dependencyManagement.
inline std::string rewrite_pom_version(std::string_view pom_bytes, const LibraryId& dep,
                                       std::string_view new_text) {
    xml::Node root = xml::parse(pom_bytes);
    if (root.name != "project")
        throw Error(ErrorCode::XmlError, "root element is <" + root.name + ">, expected <project>");

    auto match_in = [&](const xml::Node* deps) -> const xml::Node* {
        if (!deps) return nullptr;
        for (const xml::Node* d : deps->children_named("dependency")) {
            const xml::Node* grp = d->child("groupId");
            const xml::Node* art = d->child("artifactId");
            if (!grp || !art) continue;
            if (grp->trimmed_text() == dep.group && art->trimmed_text() == dep.artifact) return d;
        }
        return nullptr;
    };

    const xml::Node* target = match_in(root.child("dependencies"));
    if (!target) {
        if (const xml::Node* dm = root.child("dependencyManagement"))
            target = match_in(dm->child("dependencies"));
    }
    if (!target)
        throw Error(ErrorCode::NoSuchEdge, "POM does not declare " + dep.str());
    const xml::Node* version = target->child("version");
    if (!version)
        throw Error(ErrorCode::NoSuchEdge,
                    "declaration of " + dep.str() + " has no <version> element");

    std::string out;
    out.reserve(pom_bytes.size() + new_text.size());
    out.append(pom_bytes.substr(0, version->inner_begin));
    out.append(new_text);
    out.append(pom_bytes.substr(version->inner_end));
    return out;
}

inline std::string pom_file_name(const ReleaseId& release) {
    return release.library.group + "__" + release.library.artifact + "__" +
           release.version.raw() + ".xml";
}

/// Loads index + POM directory + vulnerability file into a normalized corpus.
inline Corpus load_corpus(const std::filesystem::path& index_path,
                          const std::filesystem::path& poms_dir,
                          const std::filesystem::path& vulns_path) {
    Corpus corpus;
    corpus.releases = load_index(index_path, corpus.diagnostics);

    size_t undated = 0;
    for (const auto& rel : corpus.releases)
        if (!rel.released_at) ++undated;
    if (undated > 0)
        warn(corpus.diagnostics, "undated-releases",
             std::to_string(undated) + " releases lack dates and are excluded from time metrics");

    for (const auto& rel : corpus.releases) {
        auto file = poms_dir / pom_file_name(rel);
        std::ifstream in(file, std::ios::binary);
        if (!in) {
            warn(corpus.diagnostics, "missing-pom", rel.gav() + ": no POM file");
            continue;
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        try {
            corpus.poms.push_back(parse_pom(buf.str(), rel, corpus.diagnostics));
        } catch (const Error& e) {
            warn(corpus.diagnostics, "bad-pom", rel.gav() + ": " + e.what());
        }
    }
    detail::finalize_poms(corpus.poms, corpus.diagnostics);

    corpus.vulnerabilities = load_vulnerabilities(vulns_path, corpus.diagnostics);
    return corpus;
}

} // namespace ranger
