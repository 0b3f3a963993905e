#pragma once

/// The dependency-vulnerability graph. Snapshots are immutable; a range
/// update produces a new epoch that shares every unmodified adjacency block
/// with its parent. Library and release vertices are dense handles with
/// interned coordinates.

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ranger/corpus.hpp"

namespace ranger {

class DependencyGraph {
public:
    struct Decl {
        uint32_t target = 0;           // library handle; may have no releases in the corpus
        std::optional<VersionSpec> spec;
        std::string raw_spec;
        Scope scope = Scope::Compile;
        bool optional = false;
        std::vector<uint32_t> exclusions; // library handles, sorted

        bool unresolved() const { return !spec.has_value(); }
    };

    struct Release {
        uint32_t library = 0;
        VersionNumber version;
        std::optional<Date> released_at;
    };

    struct VulnEntry {
        Vulnerability vuln;
        std::vector<uint32_t> affected; // sorted release handles
    };

    DependencyGraph() : core_(std::make_shared<Core>()) {}

    // -- construction -------------------------------------------------------

    static DependencyGraph build(const Corpus& corpus) {
        DependencyGraph g;
        auto core = std::make_shared<Core>();

        for (const auto& rel : corpus.releases) core->intern_library(rel.library);
        for (const auto& pom : corpus.poms) {
            for (const auto& d : pom.dependencies) {
                core->intern_library(d.target);
                for (const auto& e : d.exclusions) core->intern_library(e);
            }
            for (const auto& d : pom.dependency_management) core->intern_library(d.target);
        }
        for (const auto& v : corpus.vulnerabilities) core->intern_library(v.library);
        core->freeze_libraries();

        core->releases.reserve(corpus.releases.size());
        for (const auto& rel : corpus.releases) {
            Release r;
            r.library = *core->find_library(rel.library);
            r.version = rel.version;
            r.released_at = rel.released_at;
            core->release_index.emplace(release_key(r.library, r.version.raw()),
                                        static_cast<uint32_t>(core->releases.size()));
            core->releases.push_back(std::move(r));
        }
        core->releases_by_library.assign(core->libraries.size(), {});
        for (uint32_t h = 0; h < core->releases.size(); ++h)
            core->releases_by_library[core->releases[h].library].push_back(h);

        g.edges_.assign(core->releases.size(), empty_block());
        core->dm.assign(core->releases.size(), {});
        for (const auto& pom : corpus.poms) {
            auto rh = core->lookup_release(pom.release.library, pom.release.version);
            if (!rh) continue;
            auto block = std::make_shared<std::vector<Decl>>();
            for (const auto& d : pom.dependencies) block->push_back(convert_decl(*core, d));
            g.edges_[*rh] = std::move(block);
            auto dm_block = std::make_shared<std::vector<Decl>>();
            for (const auto& d : pom.dependency_management)
                dm_block->push_back(convert_decl(*core, d));
            core->dm[*rh] = std::move(dm_block);
        }

        core->reverse_index.assign(core->libraries.size(), {});
        size_t edge_total = 0;
        for (uint32_t r = 0; r < g.edges_.size(); ++r) {
            edge_total += g.edges_[r]->size();
            for (const auto& d : *g.edges_[r]) core->reverse_index[d.target].push_back(r);
        }
        for (auto& v : core->reverse_index) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
        core->edge_count = edge_total;

        core->vulns_by_library.assign(core->libraries.size(), {});
        for (const auto& vuln : corpus.vulnerabilities) {
            VulnEntry entry;
            entry.vuln = vuln;
            uint32_t lib = *core->find_library(vuln.library);
            for (uint32_t rh : core->releases_by_library[lib])
                if (vuln.affected.contains(core->releases[rh].version))
                    entry.affected.push_back(rh);
            core->vulns_by_library[lib].push_back(static_cast<uint32_t>(core->vulns.size()));
            core->vulns.push_back(std::move(entry));
        }

        g.core_ = std::move(core);
        return g;
    }

    // -- shape ---------------------------------------------------------------

    size_t library_count() const { return core_->libraries.size(); }
    size_t release_count() const { return core_->releases.size(); }
    size_t edge_count() const { return core_->edge_count; }
    size_t vuln_count() const { return core_->vulns.size(); }
    uint64_t epoch() const { return epoch_; }

    const LibraryId& library(uint32_t handle) const { return core_->libraries[handle]; }
    const Release& release(uint32_t handle) const { return core_->releases[handle]; }

    ReleaseId release_id(uint32_t handle) const {
        const Release& r = core_->releases[handle];
        return {core_->libraries[r.library], r.version, r.released_at};
    }

    std::optional<uint32_t> find_library(const LibraryId& id) const {
        return core_->find_library(id);
    }

    /// Release lookup; falls back to order-equality when the raw text differs
    /// (a pin "1.0" finds a release published as "1").
    std::optional<uint32_t> find_release(const LibraryId& id, const VersionNumber& v) const {
        auto lib = core_->find_library(id);
        if (!lib) return std::nullopt;
        return core_->lookup_release_in(*lib, v);
    }

    std::optional<uint32_t> find_release(uint32_t lib, const VersionNumber& v) const {
        return core_->lookup_release_in(lib, v);
    }

    /// Release handles of one library, ascending version order.
    std::span<const uint32_t> releases_of(uint32_t lib) const {
        return core_->releases_by_library[lib];
    }

    std::span<const Decl> decls_of(uint32_t release) const { return *edges_[release]; }
    std::span<const Decl> dm_of(uint32_t release) const {
        const auto& p = core_->dm[release];
        if (!p) return {};
        return *p;
    }

    /// Releases declaring a dependency on the library (any epoch; targets
    /// never change across epochs).
    std::span<const uint32_t> dependents_of(uint32_t lib) const {
        return core_->reverse_index[lib];
    }

    std::span<const uint32_t> vuln_handles_of(uint32_t lib) const {
        return core_->vulns_by_library[lib];
    }
    const VulnEntry& vuln_entry(uint32_t handle) const { return core_->vulns[handle]; }
    size_t vuln_entry_count() const { return core_->vulns.size(); }

    std::optional<uint32_t> find_vuln(std::string_view id) const {
        for (uint32_t i = 0; i < core_->vulns.size(); ++i)
            if (core_->vulns[i].vuln.id == id) return i;
        return std::nullopt;
    }

    bool is_affected(uint32_t release, const VulnEntry& entry) const {
        return std::binary_search(entry.affected.begin(), entry.affected.end(), release);
    }

    /// Count of vulnerabilities whose affected set contains the release.
    int direct_vulnerabilities(uint32_t release) const {
        int n = 0;
        for (uint32_t vh : core_->vulns_by_library[core_->releases[release].library])
            if (is_affected(release, core_->vulns[vh])) ++n;
        return n;
    }

    // -- epochs ---------------------------------------------------------------

    /// Returns a new epoch differing only in the spec of the release's first
    /// declaration on the target library. Throws NoSuchEdge otherwise.
    DependencyGraph apply_range_update(uint32_t release, uint32_t target_lib,
                                       VersionSpec new_spec) const {
        if (release >= edges_.size())
            throw Error(ErrorCode::NoSuchRelease, "release handle out of range");
        const auto& block = *edges_[release];
        size_t at = block.size();
        for (size_t i = 0; i < block.size(); ++i)
            if (block[i].target == target_lib) {
                at = i;
                break;
            }
        if (at == block.size())
            throw Error(ErrorCode::NoSuchEdge, release_id(release).gav() + " does not declare " +
                                                   library(target_lib).str());
        auto replacement = std::make_shared<std::vector<Decl>>(block);
        (*replacement)[at].raw_spec = new_spec.text();
        (*replacement)[at].spec = std::move(new_spec);

        DependencyGraph next(*this); // shares core and all other edge blocks
        next.edges_[release] = std::move(replacement);
        next.epoch_ = epoch_ + 1;
        return next;
    }

    // -- snapshots -------------------------------------------------------------

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoError, "cannot write snapshot " + path.string());
        Writer w(out);

        std::vector<std::string> strings;
        std::map<std::string, uint32_t> string_ids;
        auto sid = [&](const std::string& s) {
            auto it = string_ids.find(s);
            if (it != string_ids.end()) return it->second;
            auto id = static_cast<uint32_t>(strings.size());
            string_ids.emplace(s, id);
            strings.push_back(s);
            return id;
        };
        auto spec_kind = [](const Decl& d) -> uint8_t {
            if (!d.spec) return 2;
            return d.spec->is_soft() ? 0 : 1;
        };

        // pre-intern in deterministic traversal order
        for (const auto& lib : core_->libraries) {
            sid(lib.group);
            sid(lib.artifact);
        }
        for (const auto& r : core_->releases) sid(r.version.raw());
        auto intern_decls = [&](const std::vector<Decl>& block) {
            for (const auto& d : block) {
                if (d.spec) sid(d.spec->text());
                sid(d.raw_spec);
            }
        };
        for (const auto& block : edges_) intern_decls(*block);
        for (const auto& block : core_->dm)
            if (block) intern_decls(*block);
        for (const auto& v : core_->vulns) {
            sid(v.vuln.id);
            sid(v.vuln.affected.text());
            if (v.vuln.severity) sid(*v.vuln.severity);
        }

        out.write(kMagic, 8);
        nlohmann::json header{{"format", 1},
                              {"libraries", core_->libraries.size()},
                              {"releases", core_->releases.size()},
                              {"edges", core_->edge_count},
                              {"vulns", core_->vulns.size()},
                              {"epoch", epoch_}};
        std::string header_text = header.dump();
        w.u32(static_cast<uint32_t>(header_text.size()));
        out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

        w.u32(static_cast<uint32_t>(strings.size()));
        for (const auto& s : strings) {
            w.u32(static_cast<uint32_t>(s.size()));
            out.write(s.data(), static_cast<std::streamsize>(s.size()));
        }
        for (const auto& lib : core_->libraries) {
            w.u32(sid(lib.group));
            w.u32(sid(lib.artifact));
        }
        for (const auto& r : core_->releases) {
            w.u32(r.library);
            w.u32(sid(r.version.raw()));
            w.u8(r.released_at ? 1 : 0);
            w.i32(r.released_at ? r.released_at->days() : 0);
        }
        auto write_decls = [&](const std::vector<Decl>& block) {
            w.u32(static_cast<uint32_t>(block.size()));
            for (const auto& d : block) {
                w.u32(d.target);
                w.u8(spec_kind(d));
                w.u32(d.spec ? sid(d.spec->text()) : 0);
                w.u32(sid(d.raw_spec));
                w.u8(static_cast<uint8_t>(d.scope));
                w.u8(d.optional ? 1 : 0);
                w.u32(static_cast<uint32_t>(d.exclusions.size()));
                for (uint32_t e : d.exclusions) w.u32(e);
            }
        };
        for (const auto& block : edges_) write_decls(*block);
        for (const auto& block : core_->dm) {
            if (block) write_decls(*block);
            else w.u32(0);
        }
        w.u32(static_cast<uint32_t>(core_->vulns.size()));
        for (const auto& v : core_->vulns) {
            w.u32(sid(v.vuln.id));
            w.u32(*core_->find_library(v.vuln.library));
            w.u32(sid(v.vuln.affected.text()));
            w.i32(v.vuln.published_at.days());
            w.u8(v.vuln.severity ? 1 : 0);
            w.u32(v.vuln.severity ? sid(*v.vuln.severity) : 0);
            w.u32(static_cast<uint32_t>(v.affected.size()));
            for (uint32_t rh : v.affected) w.u32(rh);
        }
        out.write(kTrailer, 8);
        out.flush();
        if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
    }

    static DependencyGraph load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(ErrorCode::IoError, "cannot open snapshot " + path.string());
        Reader r(in, path.string());

        char magic[8];
        r.bytes(magic, 8);
        if (std::memcmp(magic, kMagic, 8) != 0)
            throw Error(ErrorCode::VersionMismatch, "not a snapshot file: " + path.string());
        uint32_t header_len = r.u32();
        std::string header_text(header_len, '\0');
        r.bytes(header_text.data(), header_len);
        nlohmann::json header;
        try {
            header = nlohmann::json::parse(header_text);
        } catch (const std::exception&) {
            throw Error(ErrorCode::VersionMismatch, "corrupt snapshot header");
        }
        if (header.value("format", -1) != 1)
            throw Error(ErrorCode::VersionMismatch, "unsupported snapshot format");

        DependencyGraph g;
        auto core = std::make_shared<Core>();

        uint32_t nstrings = r.u32();
        std::vector<std::string> strings(nstrings);
        for (auto& s : strings) {
            uint32_t len = r.u32();
            s.resize(len);
            r.bytes(s.data(), len);
        }
        auto str = [&](uint32_t id) -> const std::string& {
            if (id >= strings.size())
                throw Error(ErrorCode::IoError, "snapshot string id out of range");
            return strings[id];
        };

        size_t nlibs = header.at("libraries").get<size_t>();
        size_t nreleases = header.at("releases").get<size_t>();
        for (size_t i = 0; i < nlibs; ++i) {
            uint32_t gs = r.u32(), as = r.u32();
            core->intern_library({str(gs), str(as)});
        }
        core->freeze_libraries();
        if (core->libraries.size() != nlibs)
            throw Error(ErrorCode::IoError, "snapshot library table inconsistent");

        core->releases.reserve(nreleases);
        for (size_t i = 0; i < nreleases; ++i) {
            Release rel;
            rel.library = r.u32();
            rel.version = VersionNumber::parse(str(r.u32()));
            bool has_date = r.u8() != 0;
            int32_t days = r.i32();
            if (has_date) rel.released_at = Date(days);
            if (rel.library >= nlibs) throw Error(ErrorCode::IoError, "bad release record");
            core->release_index.emplace(release_key(rel.library, rel.version.raw()),
                                        static_cast<uint32_t>(core->releases.size()));
            core->releases.push_back(std::move(rel));
        }
        core->releases_by_library.assign(nlibs, {});
        for (uint32_t h = 0; h < core->releases.size(); ++h)
            core->releases_by_library[core->releases[h].library].push_back(h);

        auto read_decls = [&]() {
            auto block = std::make_shared<std::vector<Decl>>();
            uint32_t count = r.u32();
            block->reserve(count);
            for (uint32_t i = 0; i < count; ++i) {
                Decl d;
                d.target = r.u32();
                uint8_t kind = r.u8();
                uint32_t spec_sid = r.u32();
                d.raw_spec = str(r.u32());
                d.scope = static_cast<Scope>(r.u8());
                d.optional = r.u8() != 0;
                uint32_t ne = r.u32();
                d.exclusions.resize(ne);
                for (auto& e : d.exclusions) e = r.u32();
                if (kind != 2) d.spec = parse_version_spec(str(spec_sid));
                if (d.target >= nlibs) throw Error(ErrorCode::IoError, "bad edge record");
                block->push_back(std::move(d));
            }
            return block;
        };

        g.edges_.resize(nreleases);
        size_t edge_total = 0;
        for (size_t i = 0; i < nreleases; ++i) {
            g.edges_[i] = read_decls();
            edge_total += g.edges_[i]->size();
        }
        core->edge_count = edge_total;
        if (edge_total != header.at("edges").get<size_t>())
            throw Error(ErrorCode::IoError, "snapshot edge count mismatch");
        core->dm.resize(nreleases);
        for (size_t i = 0; i < nreleases; ++i) core->dm[i] = read_decls();

        core->reverse_index.assign(nlibs, {});
        for (uint32_t rel = 0; rel < g.edges_.size(); ++rel)
            for (const auto& d : *g.edges_[rel]) core->reverse_index[d.target].push_back(rel);
        for (auto& v : core->reverse_index) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }

        uint32_t nvulns = r.u32();
        core->vulns_by_library.assign(nlibs, {});
        for (uint32_t i = 0; i < nvulns; ++i) {
            VulnEntry entry;
            entry.vuln.id = str(r.u32());
            uint32_t lib = r.u32();
            if (lib >= nlibs) throw Error(ErrorCode::IoError, "bad vulnerability record");
            entry.vuln.library = core->libraries[lib];
            entry.vuln.affected = parse_version_spec(str(r.u32()));
            entry.vuln.published_at = Date(r.i32());
            bool has_sev = r.u8() != 0;
            uint32_t sev_sid = r.u32();
            if (has_sev) entry.vuln.severity = str(sev_sid);
            uint32_t na = r.u32();
            entry.affected.resize(na);
            for (auto& a : entry.affected) a = r.u32();
            core->vulns_by_library[lib].push_back(i);
            core->vulns.push_back(std::move(entry));
        }

        char trailer[8];
        r.bytes(trailer, 8);
        if (std::memcmp(trailer, kTrailer, 8) != 0)
            throw Error(ErrorCode::IoError, "snapshot trailer missing (truncated file?)");

        g.core_ = std::move(core);
        g.epoch_ = header.at("epoch").get<uint64_t>();
        return g;
    }

private:
    struct Core {
        std::vector<LibraryId> libraries;
        std::map<std::string, uint32_t> library_index;
        std::vector<Release> releases;
        std::map<std::string, uint32_t> release_index;
        std::vector<std::vector<uint32_t>> releases_by_library; // ascending version order
        std::vector<std::vector<uint32_t>> reverse_index;       // lib -> declaring releases
        std::vector<std::shared_ptr<const std::vector<Decl>>> dm;
        std::vector<VulnEntry> vulns;
        std::vector<std::vector<uint32_t>> vulns_by_library;
        size_t edge_count = 0;

        void intern_library(const LibraryId& id) {
            library_index.emplace(id.str(), 0);
        }

        // library handles are assigned after all names are known so that the
        // numbering is independent of discovery order
        void freeze_libraries() {
            libraries.clear();
            uint32_t next = 0;
            for (auto& [name, handle] : library_index) {
                handle = next++;
                libraries.push_back(LibraryId::parse(name));
            }
        }

        std::optional<uint32_t> find_library(const LibraryId& id) const {
            auto it = library_index.find(id.str());
            if (it == library_index.end()) return std::nullopt;
            return it->second;
        }

        std::optional<uint32_t> lookup_release(const LibraryId& lib, const VersionNumber& v) const {
            auto lh = find_library(lib);
            if (!lh) return std::nullopt;
            return lookup_release_in(*lh, v);
        }

        std::optional<uint32_t> lookup_release_in(uint32_t lib, const VersionNumber& v) const {
            auto it = release_index.find(release_key(lib, v.raw()));
            if (it != release_index.end()) return it->second;
            for (uint32_t rh : releases_by_library[lib])
                if (compare_versions(releases[rh].version, v) == 0) return rh;
            return std::nullopt;
        }
    };

    static std::string release_key(uint32_t lib, const std::string& raw) {
        return std::to_string(lib) + "\x1f" + raw;
    }

    static Decl convert_decl(Core& core, const DependencyDecl& d) {
        Decl out;
        out.target = *core.find_library(d.target);
        out.spec = d.spec;
        out.raw_spec = d.raw_spec;
        out.scope = d.scope;
        out.optional = d.optional;
        for (const auto& e : d.exclusions) {
            auto h = core.find_library(e);
            if (h) out.exclusions.push_back(*h);
        }
        std::sort(out.exclusions.begin(), out.exclusions.end());
        return out;
    }

    static const std::shared_ptr<const std::vector<Decl>>& empty_block() {
        static const std::shared_ptr<const std::vector<Decl>> block =
            std::make_shared<const std::vector<Decl>>();
        return block;
    }

    struct Writer {
        explicit Writer(std::ofstream& o) : out(o) {}
        void u8(uint8_t v) { out.put(static_cast<char>(v)); }
        void u32(uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
        void i32(int32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
        std::ofstream& out;
    };

    struct Reader {
        Reader(std::ifstream& i, std::string p) : in(i), path(std::move(p)) {}
        void bytes(char* dst, size_t n) {
            in.read(dst, static_cast<std::streamsize>(n));
            if (static_cast<size_t>(in.gcount()) != n)
                throw Error(ErrorCode::IoError, "truncated snapshot " + path);
        }
        uint8_t u8() {
            uint8_t v;
            bytes(reinterpret_cast<char*>(&v), 1);
            return v;
        }
        uint32_t u32() {
            uint32_t v;
            bytes(reinterpret_cast<char*>(&v), 4);
            return v;
        }
        int32_t i32() {
            int32_t v;
            bytes(reinterpret_cast<char*>(&v), 4);
            return v;
        }
        std::ifstream& in;
        std::string path;
    };

    static constexpr const char* kMagic = "RGRSNP01";
    static constexpr const char* kTrailer = "RGREND01";

    std::shared_ptr<const Core> core_;
    std::vector<std::shared_ptr<const std::vector<Decl>>> edges_;
    uint64_t epoch_ = 0;
};

/// build_graph over a loaded corpus.
inline DependencyGraph build_graph(const Corpus& corpus) { return DependencyGraph::build(corpus); }

inline void save_snapshot(const DependencyGraph& graph, const std::filesystem::path& path) {
    graph.save(path);
}

inline DependencyGraph load_snapshot(const std::filesystem::path& path) {
    return DependencyGraph::load(path);
}

} // namespace ranger
