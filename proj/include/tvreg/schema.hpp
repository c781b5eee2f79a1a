#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tvreg/types.hpp"

namespace tvreg {

enum class Topology { Complete, Path, Loop, Custom };

std::string topology_name(Topology t);
Topology topology_from_name(const std::string& name);

struct Covariate {
    std::string name;
    std::vector<std::string> levels;
    Topology topology = Topology::Complete;
    std::vector<std::pair<int, int>> custom_edges;  // Custom only, 0-based

    int size() const { return static_cast<int>(levels.size()); }
};

struct CovariateSchema {
    std::vector<Covariate> covariates;

    int size() const { return static_cast<int>(covariates.size()); }
    // Throws ConfigError on any invariant violation.
    void validate() const;
    int covariate_index(const std::string& name) const;  // -1 when absent
    std::vector<int> grid_dims() const;
    long long grid_size() const;  // N_x = prod |V_d|
};

// Undirected graph on level indices; edges canonical: i < j, sorted.
struct LevelGraph {
    int vertex_count = 0;
    std::vector<std::pair<int, int>> edges;

    int edge_count() const { return static_cast<int>(edges.size()); }
};

// Canonical level graph for one covariate. A Loop over two levels would
// duplicate the single Path edge, so n == 2 falls back to Path.
LevelGraph build_level_graph(const Covariate& cov);

// Vertices are pairs flattened row-major (a * |V2| + b); an edge joins
// (a,b) and (a',b') iff they differ in exactly one coordinate along an
// edge of that coordinate's graph.
LevelGraph tensor_product(const LevelGraph& g1, const LevelGraph& g2);

// One additive term: a single covariate or an ordered pair of covariates
// with the tensor-product graph on their level combinations.
struct TermSpec {
    std::vector<int> covariate_indices;  // strictly increasing, size 1 or 2
    int vertex_count = 0;
    LevelGraph graph;
    std::string label;  // "X1" or "X1*X3"

    int order() const { return static_cast<int>(covariate_indices.size()); }
    // Row-major flat index of a full-grid cell restricted to this term.
    int flat_of_cell(const std::vector<int>& cell, const std::vector<int>& dims) const {
        if (order() == 1) return cell[covariate_indices[0]];
        return cell[covariate_indices[0]] * dims[covariate_indices[1]] + cell[covariate_indices[1]];
    }
};

// All first-order terms in schema order, then (for max_order == 2) all
// pairs in lexicographic order. max_order outside {1, 2} is rejected.
std::vector<TermSpec> enumerate_terms(const CovariateSchema& schema, int max_order);

CovariateSchema load_schema_json(const std::string& path);
CovariateSchema schema_from_json_text(const std::string& text);
std::string schema_to_json_text(const CovariateSchema& schema);

}  // namespace tvreg
