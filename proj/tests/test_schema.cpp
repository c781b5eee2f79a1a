#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "tvreg/schema.hpp"

using namespace tvreg;

namespace {

Covariate cov(const std::string& name, int n, Topology topo) {
    Covariate c;
    c.name = name;
    c.topology = topo;
    for (int i = 1; i <= n; ++i) c.levels.push_back(std::to_string(i));
    return c;
}

// edge rule oracle: neighbors differ in exactly one coordinate along an edge
int tensor_edge_count_by_enumeration(const LevelGraph& g1, const LevelGraph& g2) {
    std::set<std::pair<int, int>> e1(g1.edges.begin(), g1.edges.end());
    std::set<std::pair<int, int>> e2(g2.edges.begin(), g2.edges.end());
    auto adj = [](const std::set<std::pair<int, int>>& e, int a, int b) {
        return e.count({std::min(a, b), std::max(a, b)}) > 0;
    };
    int count = 0;
    const int n = g1.vertex_count * g2.vertex_count;
    for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
            const int a = u / g2.vertex_count, b = u % g2.vertex_count;
            const int ap = v / g2.vertex_count, bp = v % g2.vertex_count;
            if ((adj(e1, a, ap) && b == bp) || (a == ap && adj(e2, b, bp))) ++count;
        }
    }
    return count;
}

}  // namespace

TEST_CASE("complete graph has n(n-1)/2 edges") {
    const auto g = build_level_graph(cov("X", 5, Topology::Complete));
    CHECK(g.vertex_count == 5);
    CHECK(g.edge_count() == 10);
    for (int v = 0; v < 5; ++v) {
        int degree = 0;
        for (auto [i, j] : g.edges) degree += (i == v) + (j == v);
        CHECK(degree == 4);
    }
}

TEST_CASE("path graph connects consecutive pairs") {
    const auto g = build_level_graph(cov("X", 20, Topology::Path));
    REQUIRE(g.edge_count() == 19);
    for (int i = 0; i < 19; ++i) CHECK(g.edges[i] == std::pair<int, int>{i, i + 1});
}

TEST_CASE("loop graph closes the cycle") {
    const auto g = build_level_graph(cov("X", 7, Topology::Loop));
    CHECK(g.edge_count() == 7);
    CHECK(std::find(g.edges.begin(), g.edges.end(), std::pair<int, int>{0, 6}) != g.edges.end());
    for (int v = 0; v < 7; ++v) {
        int degree = 0;
        for (auto [i, j] : g.edges) degree += (i == v) + (j == v);
        CHECK(degree == 2);
    }
}

TEST_CASE("two-level loop falls back to a path") {
    const auto g = build_level_graph(cov("X", 2, Topology::Loop));
    CHECK(g.edge_count() == 1);
    CHECK(g.edges[0] == std::pair<int, int>{0, 1});
}

TEST_CASE("custom topology validation") {
    auto c = cov("X", 3, Topology::Custom);
    c.custom_edges = {{0, 1}, {1, 2}};
    CovariateSchema schema{{c}};
    CHECK_NOTHROW(schema.validate());

    c.custom_edges = {{0, 0}};
    CHECK_THROWS_AS(CovariateSchema{{c}}.validate(), ConfigError);
    c.custom_edges = {{0, 1}, {1, 0}};
    CHECK_THROWS_AS(CovariateSchema{{c}}.validate(), ConfigError);
    c.custom_edges = {{0, 3}};
    CHECK_THROWS_AS(CovariateSchema{{c}}.validate(), ConfigError);
}

TEST_CASE("tensor product of unit squares") {
    const auto p2 = build_level_graph(cov("A", 2, Topology::Path));
    const auto g = tensor_product(p2, p2);
    CHECK(g.vertex_count == 4);
    CHECK(g.edge_count() == 4);
}

TEST_CASE("tensor product matches exhaustive edge rule") {
    const auto c2 = build_level_graph(cov("A", 2, Topology::Complete));
    const auto c3 = build_level_graph(cov("B", 3, Topology::Complete));
    const auto g = tensor_product(c2, c3);
    CHECK(g.vertex_count == 6);
    CHECK(g.edge_count() == 9);  // 1*3 + 2*3
    CHECK(g.edge_count() == tensor_edge_count_by_enumeration(c2, c3));

    const auto p4 = build_level_graph(cov("A", 4, Topology::Path));
    const auto l5 = build_level_graph(cov("B", 5, Topology::Loop));
    const auto g2 = tensor_product(p4, l5);
    CHECK(g2.edge_count() == 3 * 5 + 4 * 5);
    CHECK(g2.edge_count() == tensor_edge_count_by_enumeration(p4, l5));
}

TEST_CASE("tensor product with a single vertex is an isomorphic copy") {
    const auto g = build_level_graph(cov("A", 4, Topology::Complete));
    LevelGraph unit;
    unit.vertex_count = 1;
    const auto prod = tensor_product(g, unit);
    CHECK(prod.vertex_count == g.vertex_count);
    CHECK(prod.edges == g.edges);
}

TEST_CASE("tensor product edge count is symmetric") {
    const auto a = build_level_graph(cov("A", 4, Topology::Path));
    const auto b = build_level_graph(cov("B", 5, Topology::Complete));
    CHECK(tensor_product(a, b).edge_count() == tensor_product(b, a).edge_count());
}

TEST_CASE("term enumeration counts and ordering") {
    CovariateSchema schema;
    schema.covariates = {cov("X1", 2, Topology::Complete), cov("X2", 3, Topology::Complete),
                         cov("X3", 2, Topology::Complete), cov("X4", 4, Topology::Complete)};
    const auto order2 = enumerate_terms(schema, 2);
    CHECK(order2.size() == 10);  // 4 + 6
    for (int d = 0; d < 4; ++d) CHECK(order2[d].covariate_indices == std::vector<int>{d});
    CHECK(order2[4].covariate_indices == std::vector<int>{0, 1});
    CHECK(order2[9].covariate_indices == std::vector<int>{2, 3});
    CHECK(order2[4].graph.edge_count() == 1 * 3 + 2 * 3);

    CovariateSchema three;
    three.covariates = {cov("A", 2, Topology::Complete), cov("B", 2, Topology::Complete),
                        cov("C", 2, Topology::Complete)};
    CHECK(enumerate_terms(three, 1).size() == 3);

    CovariateSchema two;
    two.covariates = {cov("A", 2, Topology::Complete), cov("B", 2, Topology::Complete)};
    CHECK(enumerate_terms(two, 2).size() == 3);

    CHECK_THROWS_AS(enumerate_terms(schema, 3), ConfigError);
    CHECK_THROWS_AS(enumerate_terms(schema, 0), ConfigError);
}

TEST_CASE("term enumeration is deterministic and duplicate-free") {
    CovariateSchema schema;
    schema.covariates = {cov("X1", 3, Topology::Loop), cov("X2", 4, Topology::Path),
                         cov("X3", 2, Topology::Complete)};
    const auto a = enumerate_terms(schema, 2);
    const auto b = enumerate_terms(schema, 2);
    REQUIRE(a.size() == b.size());
    std::set<std::vector<int>> seen;
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].covariate_indices == b[k].covariate_indices);
        CHECK(a[k].graph.edges == b[k].graph.edges);
        CHECK(seen.insert(a[k].covariate_indices).second);
        std::set<std::pair<int, int>> edges(a[k].graph.edges.begin(), a[k].graph.edges.end());
        CHECK(edges.size() == a[k].graph.edges.size());
    }
}

TEST_CASE("schema invariants") {
    CovariateSchema schema;
    schema.covariates = {cov("X", 1, Topology::Complete)};
    CHECK_THROWS_AS(schema.validate(), ConfigError);
    schema.covariates = {cov("X", 2, Topology::Complete), cov("X", 3, Topology::Complete)};
    CHECK_THROWS_AS(schema.validate(), ConfigError);
    auto dup = cov("X", 2, Topology::Complete);
    dup.levels = {"a", "a"};
    schema.covariates = {dup};
    CHECK_THROWS_AS(schema.validate(), ConfigError);
}

TEST_CASE("schema JSON round trip") {
    CovariateSchema schema;
    schema.covariates = {cov("day", 7, Topology::Loop), cov("browser", 4, Topology::Complete)};
    auto custom = cov("geo", 3, Topology::Custom);
    custom.custom_edges = {{0, 1}, {0, 2}};
    schema.covariates.push_back(custom);

    const auto text = schema_to_json_text(schema);
    const auto parsed = schema_from_json_text(text);
    REQUIRE(parsed.size() == 3);
    CHECK(parsed.covariates[0].topology == Topology::Loop);
    CHECK(parsed.covariates[1].levels == schema.covariates[1].levels);
    CHECK(parsed.covariates[2].custom_edges == custom.custom_edges);

    CHECK_THROWS_AS(schema_from_json_text("{not json"), ConfigError);
    CHECK_THROWS_AS(schema_from_json_text(R"({"covariates": [{"name": "x"}]})"), ConfigError);
}
