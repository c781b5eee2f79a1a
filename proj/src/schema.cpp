#include "tvreg/schema.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace tvreg {

std::string topology_name(Topology t) {
    switch (t) {
        case Topology::Complete: return "complete";
        case Topology::Path: return "path";
        case Topology::Loop: return "loop";
        case Topology::Custom: return "custom";
    }
    return "complete";
}

Topology topology_from_name(const std::string& name) {
    if (name == "complete") return Topology::Complete;
    if (name == "path") return Topology::Path;
    if (name == "loop") return Topology::Loop;
    if (name == "custom") return Topology::Custom;
    throw ConfigError("unknown topology '" + name + "' (expected complete|path|loop|custom)");
}

void CovariateSchema::validate() const {
    if (covariates.empty()) throw ConfigError("schema has no covariates");
    std::set<std::string> names;
    for (const auto& cov : covariates) {
        if (cov.name.empty()) throw ConfigError("covariate with empty name");
        if (!names.insert(cov.name).second)
            throw ConfigError("duplicate covariate name '" + cov.name + "'");
        if (cov.size() < 2)
            throw ConfigError("covariate '" + cov.name + "' needs at least 2 levels");
        std::set<std::string> labels(cov.levels.begin(), cov.levels.end());
        if (static_cast<int>(labels.size()) != cov.size())
            throw ConfigError("covariate '" + cov.name + "' has duplicate level labels");
        if (cov.topology == Topology::Custom) {
            std::set<std::pair<int, int>> seen;
            for (auto [i, j] : cov.custom_edges) {
                if (i == j)
                    throw ConfigError("covariate '" + cov.name + "': self-loop edge");
                if (i < 0 || j < 0 || i >= cov.size() || j >= cov.size())
                    throw ConfigError("covariate '" + cov.name + "': edge index out of range");
                if (!seen.insert({std::min(i, j), std::max(i, j)}).second)
                    throw ConfigError("covariate '" + cov.name + "': duplicate edge");
            }
        } else if (!cov.custom_edges.empty()) {
            throw ConfigError("covariate '" + cov.name + "': edges given for non-custom topology");
        }
    }
}

int CovariateSchema::covariate_index(const std::string& name) const {
    for (int d = 0; d < size(); ++d)
        if (covariates[d].name == name) return d;
    return -1;
}

std::vector<int> CovariateSchema::grid_dims() const {
    std::vector<int> dims(covariates.size());
    for (std::size_t d = 0; d < covariates.size(); ++d) dims[d] = covariates[d].size();
    return dims;
}

long long CovariateSchema::grid_size() const {
    long long n = 1;
    for (const auto& cov : covariates) n *= cov.size();
    return n;
}

namespace {

void canonicalize(LevelGraph& g) {
    for (auto& e : g.edges)
        if (e.first > e.second) std::swap(e.first, e.second);
    std::sort(g.edges.begin(), g.edges.end());
}

}  // namespace

LevelGraph build_level_graph(const Covariate& cov) {
    const int n = cov.size();
    LevelGraph g;
    g.vertex_count = n;
    Topology topo = cov.topology;
    if (topo == Topology::Loop && n == 2) topo = Topology::Path;
    switch (topo) {
        case Topology::Complete:
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) g.edges.emplace_back(i, j);
            break;
        case Topology::Path:
            for (int i = 0; i + 1 < n; ++i) g.edges.emplace_back(i, i + 1);
            break;
        case Topology::Loop:
            for (int i = 0; i + 1 < n; ++i) g.edges.emplace_back(i, i + 1);
            g.edges.emplace_back(0, n - 1);
            break;
        case Topology::Custom:
            g.edges = cov.custom_edges;
            break;
    }
    canonicalize(g);
    return g;
}

LevelGraph tensor_product(const LevelGraph& g1, const LevelGraph& g2) {
    const int n1 = g1.vertex_count, n2 = g2.vertex_count;
    LevelGraph g;
    g.vertex_count = n1 * n2;
    g.edges.reserve(g1.edges.size() * static_cast<std::size_t>(n2) +
                    g2.edges.size() * static_cast<std::size_t>(n1));
    for (const auto& [a, ap] : g1.edges)
        for (int b = 0; b < n2; ++b) g.edges.emplace_back(a * n2 + b, ap * n2 + b);
    for (int a = 0; a < n1; ++a)
        for (const auto& [b, bp] : g2.edges) g.edges.emplace_back(a * n2 + b, a * n2 + bp);
    canonicalize(g);
    return g;
}

std::vector<TermSpec> enumerate_terms(const CovariateSchema& schema, int max_order) {
    if (max_order < 1 || max_order > 2)
        throw ConfigError("model order must be 1 or 2");
    schema.validate();
    const int d_count = schema.size();
    std::vector<LevelGraph> graphs(d_count);
    for (int d = 0; d < d_count; ++d) graphs[d] = build_level_graph(schema.covariates[d]);

    std::vector<TermSpec> terms;
    for (int d = 0; d < d_count; ++d) {
        TermSpec t;
        t.covariate_indices = {d};
        t.vertex_count = schema.covariates[d].size();
        t.graph = graphs[d];
        t.label = schema.covariates[d].name;
        terms.push_back(std::move(t));
    }
    if (max_order == 2) {
        for (int d = 0; d < d_count; ++d) {
            for (int f = d + 1; f < d_count; ++f) {
                TermSpec t;
                t.covariate_indices = {d, f};
                t.vertex_count = schema.covariates[d].size() * schema.covariates[f].size();
                t.graph = tensor_product(graphs[d], graphs[f]);
                t.label = schema.covariates[d].name + "*" + schema.covariates[f].name;
                terms.push_back(std::move(t));
            }
        }
    }
    return terms;
}

CovariateSchema schema_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("schema JSON parse error: ") + e.what());
    }
    if (!j.contains("covariates") || !j["covariates"].is_array())
        throw ConfigError("schema JSON must contain a 'covariates' array");
    CovariateSchema schema;
    for (const auto& jc : j["covariates"]) {
        Covariate cov;
        if (!jc.contains("name") || !jc.contains("levels"))
            throw ConfigError("each covariate needs 'name' and 'levels'");
        cov.name = jc["name"].get<std::string>();
        for (const auto& lvl : jc["levels"]) {
            if (lvl.is_string())
                cov.levels.push_back(lvl.get<std::string>());
            else
                cov.levels.push_back(lvl.dump());
        }
        cov.topology = topology_from_name(jc.value("topology", std::string("complete")));
        if (cov.topology == Topology::Custom) {
            if (!jc.contains("edges"))
                throw ConfigError("covariate '" + cov.name + "': custom topology needs 'edges'");
            for (const auto& je : jc["edges"]) {
                if (!je.is_array() || je.size() != 2)
                    throw ConfigError("covariate '" + cov.name + "': edge must be a pair");
                cov.custom_edges.emplace_back(je[0].get<int>(), je[1].get<int>());
            }
        }
        schema.covariates.push_back(std::move(cov));
    }
    schema.validate();
    return schema;
}

CovariateSchema load_schema_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open schema file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return schema_from_json_text(ss.str());
}

std::string schema_to_json_text(const CovariateSchema& schema) {
    nlohmann::ordered_json j;
    j["covariates"] = nlohmann::ordered_json::array();
    for (const auto& cov : schema.covariates) {
        nlohmann::ordered_json jc;
        jc["name"] = cov.name;
        jc["levels"] = cov.levels;
        jc["topology"] = topology_name(cov.topology);
        if (cov.topology == Topology::Custom) {
            auto edges = nlohmann::ordered_json::array();
            for (auto [i, k] : cov.custom_edges) edges.push_back({i, k});
            jc["edges"] = edges;
        }
        j["covariates"].push_back(std::move(jc));
    }
    return j.dump(2) + "\n";
}

}  // namespace tvreg
