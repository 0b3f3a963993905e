#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ranger/resolver.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/random_corpus.hpp"

using namespace ranger;
using ranger::testing::CorpusBuilder;

namespace {

uint32_t handle_of(const DependencyGraph& g, const std::string& gav) {
    auto pos = gav.rfind(':');
    auto rel = g.find_release(LibraryId::parse(gav.substr(0, pos)),
                              VersionNumber::parse(gav.substr(pos + 1)));
    REQUIRE(rel.has_value());
    return *rel;
}

uint32_t lib_of(const DependencyGraph& g, const std::string& ga) {
    auto h = g.find_library(LibraryId::parse(ga));
    REQUIRE(h.has_value());
    return *h;
}

} // namespace

TEST_CASE("nearest wins mediation", "[resolver]") {
    auto g = CorpusBuilder()
                 .release("g", "a", "1.0")
                 .release("g", "b", "1.0")
                 .release("g", "c", "1.0")
                 .release("g", "c", "2.0")
                 .dep("g:a:1.0", "g:b", "1.0")
                 .dep("g:a:1.0", "g:c", "2.0")
                 .dep("g:b:1.0", "g:c", "1.0")
                 .graph();
    auto tree = resolve_tree(g, handle_of(g, "g:a:1.0"));
    auto v = resolved_version_of(g, handle_of(g, "g:a:1.0"), lib_of(g, "g:c"));
    REQUIRE(v.has_value());
    CHECK(v->raw() == "2.0");
    REQUIRE_FALSE(tree.mediation_log.empty());
    CHECK(g.library(tree.mediation_log[0].library).str() == "g:c");
    CHECK(tree.mediation_log[0].winner == "2.0");

    SECTION("equal depth: first declaration in document order wins") {
        auto g2 = CorpusBuilder()
                      .release("g", "a", "1.0")
                      .release("g", "b", "1.0")
                      .release("g", "d", "1.0")
                      .release("g", "c", "1.0")
                      .release("g", "c", "2.0")
                      .dep("g:a:1.0", "g:b", "1.0")
                      .dep("g:a:1.0", "g:d", "1.0")
                      .dep("g:b:1.0", "g:c", "1.0")
                      .dep("g:d:1.0", "g:c", "2.0")
                      .graph();
        auto v2 = resolved_version_of(g2, handle_of(g2, "g:a:1.0"), lib_of(g2, "g:c"));
        REQUIRE(v2.has_value());
        CHECK(v2->raw() == "1.0"); // b declared before d
    }
}

TEST_CASE("optional dependencies are not transitive", "[resolver]") {
    auto g = CorpusBuilder()
                 .release("g", "a", "1.0")
                 .release("g", "b", "1.0")
                 .release("g", "c", "1.0")
                 .dep("g:a:1.0", "g:b", "1.0", Scope::Compile, /*optional=*/true)
                 .dep("g:b:1.0", "g:c", "1.0")
                 .graph();
    auto tree = resolve_tree(g, handle_of(g, "g:a:1.0"));
    CHECK(tree.node_of(lib_of(g, "g:b")) != nullptr);
    CHECK(tree.node_of(lib_of(g, "g:c")) == nullptr);

    SECTION("an optional declaration below depth one is skipped entirely") {
        auto g2 = CorpusBuilder()
                      .release("g", "a", "1.0")
                      .release("g", "b", "1.0")
                      .release("g", "c", "1.0")
                      .dep("g:a:1.0", "g:b", "1.0")
                      .dep("g:b:1.0", "g:c", "1.0", Scope::Compile, /*optional=*/true)
                      .graph();
        auto tree2 = resolve_tree(g2, handle_of(g2, "g:a:1.0"));
        CHECK(tree2.node_of(lib_of(g2, "g:c")) == nullptr);
    }
}

TEST_CASE("exclusions suppress the subtree", "[resolver]") {
    auto g = CorpusBuilder()
                 .release("g", "a", "1.0")
                 .release("g", "b", "1.0")
                 .release("g", "l", "1.0")
                 .dep("g:a:1.0", "g:b", "1.0", Scope::Compile, false, {"g:l"})
                 .dep("g:b:1.0", "g:l", "1.0")
                 .graph();
    auto tree = resolve_tree(g, handle_of(g, "g:a:1.0"));
    CHECK(tree.node_of(lib_of(g, "g:l")) == nullptr);
    CHECK(resolved_version_of(g, handle_of(g, "g:a:1.0"), lib_of(g, "g:l")) == std::nullopt);

    SECTION("exclusions accumulate along the path") {
        auto g2 = CorpusBuilder()
                      .release("g", "a", "1.0")
                      .release("g", "b", "1.0")
                      .release("g", "c", "1.0")
                      .release("g", "l", "1.0")
                      .dep("g:a:1.0", "g:b", "1.0", Scope::Compile, false, {"g:l"})
                      .dep("g:b:1.0", "g:c", "1.0")
                      .dep("g:c:1.0", "g:l", "1.0")
                      .graph();
        auto tree2 = resolve_tree(g2, handle_of(g2, "g:a:1.0"));
        CHECK(tree2.node_of(lib_of(g2, "g:l")) == nullptr);
    }
}

TEST_CASE("scope transitivity", "[resolver]") {
    auto g = CorpusBuilder()
                 .release("g", "a", "1.0")
                 .release("g", "t", "1.0")
                 .release("g", "under_t", "1.0")
                 .release("g", "b", "1.0")
                 .release("g", "under_b_test", "1.0")
                 .dep("g:a:1.0", "g:t", "1.0", Scope::Test)
                 .dep("g:t:1.0", "g:under_t", "1.0")
                 .dep("g:a:1.0", "g:b", "1.0")
                 .dep("g:b:1.0", "g:under_b_test", "1.0", Scope::Test)
                 .graph();
    auto tree = resolve_tree(g, handle_of(g, "g:a:1.0"));
    // test-scoped direct dep present at depth 1 but never traversed
    const auto* t = tree.node_of(lib_of(g, "g:t"));
    REQUIRE(t != nullptr);
    CHECK(t->depth == 1);
    CHECK(tree.node_of(lib_of(g, "g:under_t")) == nullptr);
    // test-scoped transitive decl skipped entirely
    CHECK(tree.node_of(lib_of(g, "g:under_b_test")) == nullptr);
}

TEST_CASE("root dependencyManagement", "[resolver]") {
    auto b = CorpusBuilder()
                 .release("g", "a", "1.0")
                 .release("g", "b", "1.0")
                 .release("g", "l", "1.0")
                 .release("g", "l", "2.0")
                 .dep("g:a:1.0", "g:b", "1.0")
                 .dep("g:b:1.0", "g:l", "1.0")
                 .manage("g:a:1.0", "g:l", "2.0");
    auto g = b.graph();
    auto root = handle_of(g, "g:a:1.0");

    SECTION("overrides transitive versions") {
        auto v = resolved_version_of(g, root, lib_of(g, "g:l"));
        REQUIRE(v.has_value());
        CHECK(v->raw() == "2.0");
    }
    SECTION("not applied on behalf of deeper ancestors") {
        // b's own DM must not influence a's resolution
        auto g2 = CorpusBuilder()
                      .release("g", "a", "1.0")
                      .release("g", "b", "1.0")
                      .release("g", "c", "1.0")
                      .release("g", "l", "1.0")
                      .release("g", "l", "2.0")
                      .dep("g:a:1.0", "g:b", "1.0")
                      .dep("g:b:1.0", "g:c", "1.0")
                      .dep("g:c:1.0", "g:l", "1.0")
                      .manage("g:b:1.0", "g:l", "2.0")
                      .graph();
        auto v = resolved_version_of(g2, handle_of(g2, "g:a:1.0"), lib_of(g2, "g:l"));
        REQUIRE(v.has_value());
        CHECK(v->raw() == "1.0");
    }
    SECTION("a direct declaration with an explicit version beats the root DM") {
        auto g3 = CorpusBuilder()
                      .release("g", "a", "1.0")
                      .release("g", "l", "1.0")
                      .release("g", "l", "2.0")
                      .dep("g:a:1.0", "g:l", "1.0")
                      .manage("g:a:1.0", "g:l", "2.0")
                      .graph();
        auto v = resolved_version_of(g3, handle_of(g3, "g:a:1.0"), lib_of(g3, "g:l"));
        REQUIRE(v.has_value());
        CHECK(v->raw() == "1.0");
    }
}

TEST_CASE("ranges resolve to the highest corpus member", "[resolver]") {
    auto g = CorpusBuilder()
                 .release("g", "a", "1.0")
                 .release("g", "l", "1.0")
                 .release("g", "l", "1.5")
                 .release("g", "l", "2.0")
                 .dep("g:a:1.0", "g:l", "[1.0,2.0)")
                 .graph();
    auto v = resolved_version_of(g, handle_of(g, "g:a:1.0"), lib_of(g, "g:l"));
    REQUIRE(v.has_value());
    CHECK(v->raw() == "1.5");
}

TEST_CASE("dangling targets become leaf placeholders", "[resolver]") {
    auto g = CorpusBuilder()
                 .release("g", "a", "1.0")
                 .release("g", "b", "1.0")
                 .dep("g:a:1.0", "g:b", "9.9")
                 .graph();
    auto tree = resolve_tree(g, handle_of(g, "g:a:1.0"));
    const auto* node = tree.node_of(lib_of(g, "g:b"));
    REQUIRE(node != nullptr);
    CHECK_FALSE(node->release.has_value());
    REQUIRE(node->version.has_value());
    CHECK(node->version->raw() == "9.9");
}

TEST_CASE("cycles are not re-expanded and get logged", "[resolver]") {
    auto g = CorpusBuilder()
                 .release("g", "a", "1.0")
                 .release("g", "b", "1.0")
                 .release("g", "c", "1.0")
                 .dep("g:a:1.0", "g:b", "1.0")
                 .dep("g:b:1.0", "g:c", "1.0")
                 .dep("g:c:1.0", "g:b", "1.0")
                 .graph();
    auto tree = resolve_tree(g, handle_of(g, "g:a:1.0"));
    CHECK(tree.nodes.size() == 2);
    bool cycle_logged = false;
    for (const auto& ev : tree.mediation_log)
        if (ev.cycle) cycle_logged = true;
    CHECK(cycle_logged);
}

TEST_CASE("vulnerability counting", "[resolver]") {
    auto b = CorpusBuilder()
                 .release("g", "a", "1.0")
                 .release("g", "l", "1.0")
                 .release("g", "l", "2.0")
                 .dep("g:a:1.0", "g:l", "1.0")
                 .vuln("CVE-1", "g:l", "[1.0,2.0)", "2021-06-01");
    auto g = b.graph();
    auto tree = resolve_tree(g, handle_of(g, "g:a:1.0"));
    auto count = count_vulnerabilities(g, tree);
    CHECK(count.total == 1);

    SECTION("mediation can mask the vulnerability") {
        auto g2 = CorpusBuilder()
                      .release("g", "a", "1.0")
                      .release("g", "b", "1.0")
                      .release("g", "l", "1.0")
                      .release("g", "l", "2.0")
                      .dep("g:a:1.0", "g:l", "2.0")
                      .dep("g:a:1.0", "g:b", "1.0")
                      .dep("g:b:1.0", "g:l", "1.0")
                      .vuln("CVE-1", "g:l", "[1.0,2.0)", "2021-06-01")
                      .graph();
        auto tree2 = resolve_tree(g2, handle_of(g2, "g:a:1.0"));
        CHECK(count_vulnerabilities(g2, tree2).total == 0);
    }

    SECTION("test-scoped nodes are not counted by default but can be widened") {
        auto g3 = CorpusBuilder()
                      .release("g", "a", "1.0")
                      .release("g", "l", "1.0")
                      .release("g", "l", "2.0")
                      .dep("g:a:1.0", "g:l", "1.0", Scope::Test)
                      .vuln("CVE-1", "g:l", "[1.0,2.0)", "2021-06-01")
                      .graph();
        auto tree3 = resolve_tree(g3, handle_of(g3, "g:a:1.0"));
        CHECK(count_vulnerabilities(g3, tree3).total == 0);
        CountScopes widened;
        widened.test = true;
        CHECK(count_vulnerabilities(g3, tree3, widened).total == 1);
    }
}

TEST_CASE("random trees: per-node counts equal brute force", "[resolver][property]") {
    std::mt19937 rng(321);
    for (int iter = 0; iter < 15; ++iter) {
        auto rc = ranger::testing::random_corpus(rng);
        auto g = build_graph(rc.corpus);
        for (const auto& gav : rc.gavs) {
            auto root = handle_of(g, gav);
            auto tree = resolve_tree(g, root);
            auto count = count_vulnerabilities(g, tree);
            int expected_total = 0;
            for (size_t i = 0; i < tree.nodes.size(); ++i) {
                const auto& n = tree.nodes[i];
                int expected = 0;
                if (n.release && CountScopes{}.counts(n.via_scope)) {
                    for (uint32_t vh = 0; vh < g.vuln_entry_count(); ++vh) {
                        const auto& entry = g.vuln_entry(vh);
                        if (entry.vuln.library == g.library(n.library) &&
                            entry.vuln.affected.contains(g.release(*n.release).version))
                            ++expected;
                    }
                }
                CHECK(count.per_node[i] == expected);
                expected_total += expected;
            }
            CHECK(count.total == expected_total);
        }
    }
}

TEST_CASE("mediation agrees with the naive reference resolver", "[resolver][property]") {
    std::mt19937 rng(777);
    for (int iter = 0; iter < 25; ++iter) {
        auto rc = ranger::testing::random_corpus(rng);
        auto g = build_graph(rc.corpus);
        ranger::testing::NaiveResolver naive(rc.corpus);
        for (const auto& gav : rc.gavs) {
            auto tree = resolve_tree(g, handle_of(g, gav));
            auto reference = naive.resolve(gav, 10);
            INFO("root " << gav);
            REQUIRE(tree.nodes.size() == reference.by_library.size());
            for (const auto& n : tree.nodes) {
                auto it = reference.by_library.find(g.library(n.library).str());
                REQUIRE(it != reference.by_library.end());
                const auto& ref = it->second;
                CHECK(n.depth == ref.depth);
                CHECK(n.via_scope == ref.scope);
                if (n.version) {
                    REQUIRE(ref.version.has_value());
                    CHECK(compare_versions(*n.version, VersionNumber::parse(*ref.version)) == 0);
                } else {
                    CHECK_FALSE(ref.version.has_value());
                }
            }
        }
    }
}

TEST_CASE("raising max_depth never removes nodes", "[resolver][property]") {
    std::mt19937 rng(909);
    for (int iter = 0; iter < 10; ++iter) {
        auto rc = ranger::testing::random_corpus(rng);
        auto g = build_graph(rc.corpus);
        for (const auto& gav : rc.gavs) {
            auto root = handle_of(g, gav);
            std::set<uint32_t> prev;
            for (int depth = 1; depth <= 6; ++depth) {
                ResolveOptions opt;
                opt.max_depth = depth;
                auto tree = resolve_tree(g, root, opt);
                std::set<uint32_t> libs;
                for (const auto& n : tree.nodes) libs.insert(n.library);
                for (uint32_t lib : prev) CHECK(libs.count(lib) == 1);
                prev = std::move(libs);
            }
        }
    }
}

TEST_CASE("resolved_version_of mirrors the tree", "[resolver]") {
    auto g = CorpusBuilder()
                 .release("g", "a", "1.0")
                 .release("g", "b", "1.0")
                 .release("g", "c", "1.0")
                 .release("g", "c", "2.0")
                 .release("g", "x", "1.0")
                 .dep("g:a:1.0", "g:b", "1.0", Scope::Compile, false, {"g:x"})
                 .dep("g:a:1.0", "g:c", "2.0")
                 .dep("g:b:1.0", "g:c", "1.0")
                 .dep("g:b:1.0", "g:x", "1.0")
                 .graph();
    auto root = handle_of(g, "g:a:1.0");
    auto win = resolved_version_of(g, root, lib_of(g, "g:c"));
    REQUIRE(win.has_value());
    CHECK(win->raw() == "2.0");
    CHECK(resolved_version_of(g, root, lib_of(g, "g:x")) == std::nullopt); // excluded
    auto g_lib = g.find_library(LibraryId::parse("g:a"));
    REQUIRE(g_lib.has_value());
    CHECK(resolved_version_of(g, root, *g_lib) == std::nullopt); // nobody depends on it
}
