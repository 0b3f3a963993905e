#pragma once

/// Writes a small corpus to disk in the on-disk interchange formats
/// (index.jsonl, poms/, vulns.json, surfaces/) for CLI-level tests.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace ranger::testing {

struct FileDep {
    std::string group, artifact, spec;
    std::string scope;             // empty = default
    bool optional = false;
    std::vector<std::pair<std::string, std::string>> exclusions;
};

struct FileRelease {
    std::string group, artifact, version, released_at;
    std::vector<FileDep> deps;
    std::vector<FileDep> managed;
};

struct FileVuln {
    std::string id, group, artifact, introduced, fixed, published_at;
};

struct FileSurface {
    std::string group, artifact, version;
    std::vector<std::pair<std::string, std::string>> apis; // id -> signature hash
};

inline std::string pom_text(const FileRelease& rel) {
    std::string xml = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    xml += "<project xmlns=\"http://maven.apache.org/POM/4.0.0\">\n";
    xml += "  <groupId>" + rel.group + "</groupId>\n";
    xml += "  <artifactId>" + rel.artifact + "</artifactId>\n";
    xml += "  <version>" + rel.version + "</version>\n";
    auto dep_block = [](const FileDep& d, const std::string& indent) {
        std::string out = indent + "<dependency>\n";
        out += indent + "  <groupId>" + d.group + "</groupId>\n";
        out += indent + "  <artifactId>" + d.artifact + "</artifactId>\n";
        out += indent + "  <version>" + d.spec + "</version>\n";
        if (!d.scope.empty()) out += indent + "  <scope>" + d.scope + "</scope>\n";
        if (d.optional) out += indent + "  <optional>true</optional>\n";
        if (!d.exclusions.empty()) {
            out += indent + "  <exclusions>\n";
            for (const auto& [g, a] : d.exclusions) {
                out += indent + "    <exclusion>\n";
                out += indent + "      <groupId>" + g + "</groupId>\n";
                out += indent + "      <artifactId>" + a + "</artifactId>\n";
                out += indent + "    </exclusion>\n";
            }
            out += indent + "  </exclusions>\n";
        }
        out += indent + "</dependency>\n";
        return out;
    };
    if (!rel.deps.empty()) {
        xml += "  <dependencies>\n";
        for (const auto& d : rel.deps) xml += dep_block(d, "    ");
        xml += "  </dependencies>\n";
    }
    if (!rel.managed.empty()) {
        xml += "  <dependencyManagement>\n    <dependencies>\n";
        for (const auto& d : rel.managed) xml += dep_block(d, "      ");
        xml += "    </dependencies>\n  </dependencyManagement>\n";
    }
    xml += "</project>\n";
    return xml;
}

inline void write_file_corpus(const std::filesystem::path& dir,
                              const std::vector<FileRelease>& releases,
                              const std::vector<FileVuln>& vulns,
                              const std::vector<FileSurface>& surfaces = {}) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "poms");
    if (!surfaces.empty()) fs::create_directories(dir / "surfaces");

    std::ofstream index(dir / "index.jsonl", std::ios::trunc);
    for (const auto& rel : releases) {
        index << "{\"group\":\"" << rel.group << "\",\"artifact\":\"" << rel.artifact
              << "\",\"version\":\"" << rel.version << "\"";
        if (!rel.released_at.empty()) index << ",\"released_at\":\"" << rel.released_at << "\"";
        index << "}\n";

        std::ofstream pom(dir / "poms" /
                              (rel.group + "__" + rel.artifact + "__" + rel.version + ".xml"),
                          std::ios::trunc);
        pom << pom_text(rel);
    }

    std::ofstream vf(dir / "vulns.json", std::ios::trunc);
    vf << "[\n";
    for (size_t i = 0; i < vulns.size(); ++i) {
        const auto& v = vulns[i];
        vf << "  {\"id\":\"" << v.id << "\",\"group\":\"" << v.group << "\",\"artifact\":\""
           << v.artifact << "\",\"published_at\":\"" << v.published_at
           << "\",\"ranges\":[{\"introduced\":\"" << v.introduced << "\",\"fixed\":\"" << v.fixed
           << "\"}]}";
        if (i + 1 < vulns.size()) vf << ",";
        vf << "\n";
    }
    vf << "]\n";

    for (const auto& s : surfaces) {
        std::ofstream sf(dir / "surfaces" /
                             (s.group + "__" + s.artifact + "__" + s.version + ".json"),
                         std::ios::trunc);
        sf << "{\"group\":\"" << s.group << "\",\"artifact\":\"" << s.artifact
           << "\",\"version\":\"" << s.version << "\",\"apis\":[";
        for (size_t i = 0; i < s.apis.size(); ++i) {
            sf << "{\"id\":\"" << s.apis[i].first << "\",\"signature_hash\":\""
               << s.apis[i].second << "\",\"behavior_tag\":\"t\"}";
            if (i + 1 < s.apis.size()) sf << ",";
        }
        sf << "]}\n";
    }
}

/// Runs a command, captures stdout/stderr, returns the exit code.
struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

inline CliResult run_cli(const std::string& binary, const std::string& args,
                         const std::filesystem::path& workdir) {
    namespace fs = std::filesystem;
    auto out_path = workdir / "cli_stdout.txt";
    auto err_path = workdir / "cli_stderr.txt";
    std::string cmd = "cd '" + workdir.string() + "' && '" + binary + "' " + args + " > '" +
                      out_path.string() + "' 2> '" + err_path.string() + "'";
    int raw = std::system(cmd.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };
    result.out = slurp(out_path);
    result.err = slurp(err_path);
    return result;
}

} // namespace ranger::testing
