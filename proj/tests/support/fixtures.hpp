#pragma once

#include <map>
#include <string>
#include <vector>

#include "ranger/corpus.hpp"
#include "ranger/graph.hpp"

namespace ranger::testing {

/// Programmatic corpus assembly for tests: declare releases, edges, managed
/// versions and vulnerabilities, then build a graph.
class CorpusBuilder {
public:
    CorpusBuilder& release(const std::string& group, const std::string& artifact,
                           const std::string& version, const std::string& date = "") {
        ReleaseId rel{{group, artifact}, VersionNumber::parse(version), std::nullopt};
        if (!date.empty()) rel.released_at = Date::parse(date);
        auto key = rel.gav();
        if (!poms_.count(key)) {
            PomDocument pom;
            pom.release = rel;
            order_.push_back(key);
            poms_.emplace(key, std::move(pom));
        }
        return *this;
    }

    CorpusBuilder& dep(const std::string& from_gav, const std::string& to_ga,
                       const std::string& spec_text, Scope scope = Scope::Compile,
                       bool optional = false, const std::vector<std::string>& exclusions = {}) {
        DependencyDecl d;
        d.target = LibraryId::parse(to_ga);
        d.raw_spec = spec_text;
        if (!spec_text.empty()) d.spec = parse_version_spec(spec_text);
        d.scope = scope;
        d.optional = optional;
        for (const auto& e : exclusions) d.exclusions.push_back(LibraryId::parse(e));
        std::sort(d.exclusions.begin(), d.exclusions.end());
        pom_at(from_gav).dependencies.push_back(std::move(d));
        return *this;
    }

    CorpusBuilder& manage(const std::string& gav, const std::string& to_ga,
                          const std::string& spec_text) {
        DependencyDecl d;
        d.target = LibraryId::parse(to_ga);
        d.raw_spec = spec_text;
        if (!spec_text.empty()) d.spec = parse_version_spec(spec_text);
        pom_at(gav).dependency_management.push_back(std::move(d));
        return *this;
    }

    CorpusBuilder& vuln(const std::string& id, const std::string& ga,
                        const std::string& range_text, const std::string& published) {
        Vulnerability v;
        v.id = id;
        v.library = LibraryId::parse(ga);
        v.affected = parse_version_spec(range_text);
        v.published_at = *Date::parse(published);
        vulns_.push_back(std::move(v));
        return *this;
    }

    Corpus corpus() const {
        Corpus c;
        for (const auto& key : order_) {
            const auto& pom = poms_.at(key);
            c.releases.push_back(pom.release);
            c.poms.push_back(pom);
        }
        std::sort(c.releases.begin(), c.releases.end(), [](const ReleaseId& a, const ReleaseId& b) {
            if (a.library != b.library) return a.library < b.library;
            int cv = compare_versions(a.version, b.version);
            if (cv != 0) return cv < 0;
            return a.version.raw() < b.version.raw();
        });
        c.vulnerabilities = vulns_;
        return c;
    }

    DependencyGraph graph() const { return build_graph(corpus()); }

private:
    PomDocument& pom_at(const std::string& gav) {
        auto it = poms_.find(gav);
        if (it == poms_.end())
            throw std::logic_error("fixture: release " + gav + " not declared");
        return it->second;
    }

    std::map<std::string, PomDocument> poms_;
    std::vector<std::string> order_;
    std::vector<Vulnerability> vulns_;
};

} // namespace ranger::testing
