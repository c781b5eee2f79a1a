#include "tvreg/simulate.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "tvreg/rng.hpp"

namespace tvreg {

namespace {

Covariate make_covariate(const std::string& name, int n, Topology topo) {
    Covariate cov;
    cov.name = name;
    cov.topology = topo;
    cov.levels.reserve(n);
    for (int i = 1; i <= n; ++i) cov.levels.push_back(std::to_string(i));
    return cov;
}

// tau(x) = global + sum of effects whose level sets contain x
double effect_at(const GroundTruth& truth, const CellKey& key) {
    double tau = truth.global;
    for (const auto& eff : truth.effects) {
        bool inside = true;
        for (std::size_t i = 0; i < eff.covariates.size() && inside; ++i) {
            const auto& set = eff.level_sets[i];
            inside = std::find(set.begin(), set.end(), key[eff.covariates[i]]) != set.end();
        }
        if (inside) tau += eff.value;
    }
    return tau;
}

std::vector<UnitRow> simulate_arms(const CovariateSchema& schema,
                                   const std::vector<std::vector<double>>& cum_probs,
                                   const GroundTruth& truth, long long n_per_arm,
                                   double noise_sd, std::uint64_t seed) {
    std::vector<UnitRow> rows;
    rows.reserve(static_cast<std::size_t>(2 * n_per_arm));
    for (int w = 0; w <= 1; ++w) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(w));
        for (long long i = 0; i < n_per_arm; ++i) {
            UnitRow row;
            row.w = w;
            row.key.resize(schema.size());
            for (int d = 0; d < schema.size(); ++d) row.key[d] = rng.categorical(cum_probs[d]);
            const double mean = w == 1 ? effect_at(truth, row.key) : 0.0;
            row.y = rng.normal(mean, noise_sd);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

}  // namespace

SimData gen_example1(std::uint64_t seed, double effect_scale) {
    SimData sim;
    sim.schema.covariates = {
        make_covariate("X1", 10, Topology::Complete),
        make_covariate("X2", 3, Topology::Complete),
        make_covariate("X3", 5, Topology::Complete),
        make_covariate("X4", 4, Topology::Complete),
    };
    const std::vector<std::vector<double>> probs = {
        std::vector<double>(10, 0.1),
        {0.2, 0.5, 0.3},
        std::vector<double>(5, 0.2),
        {0.1, 0.4, 0.3, 0.2},
    };
    std::vector<std::vector<double>> cum;
    for (const auto& p : probs) cum.push_back(cumulative(p));

    sim.truth.global = 0.03;
    if (effect_scale != 0.0) {
        sim.truth.effects.push_back({{1}, {{1}}, -0.1 * effect_scale});
        sim.truth.effects.push_back({{0, 2}, {{3, 4, 5, 6}, {2, 3}}, 0.1 * effect_scale});
    }
    sim.rows = simulate_arms(sim.schema, cum, sim.truth, 10000, 0.1, seed);
    return sim;
}

SimData gen_example4(std::uint64_t seed) {
    SimData sim;
    sim.schema.covariates = {
        make_covariate("X1", 20, Topology::Path),
        make_covariate("X2", 10, Topology::Complete),
        make_covariate("X3", 5, Topology::Complete),
    };
    const std::vector<std::vector<double>> probs = {
        std::vector<double>(20, 0.05),
        std::vector<double>(10, 0.1),
        {0.1, 0.3, 0.3, 0.2, 0.1},
    };
    std::vector<std::vector<double>> cum;
    for (const auto& p : probs) cum.push_back(cumulative(p));

    sim.truth.global = -0.01;
    sim.truth.effects.push_back({{1}, {{0}}, 0.015});
    sim.rows = simulate_arms(sim.schema, cum, sim.truth, 10000, 0.1, seed);
    return sim;
}

std::vector<UnitRow> gen_null(const CovariateSchema& schema, long long n_per_arm,
                              double noise_sd, std::uint64_t seed) {
    std::vector<std::vector<double>> cum;
    for (const auto& cov : schema.covariates)
        cum.push_back(cumulative(std::vector<double>(cov.size(), 1.0 / cov.size())));
    GroundTruth truth;  // zero everywhere
    return simulate_arms(schema, cum, truth, n_per_arm, noise_sd, seed);
}

void save_units_csv(const CovariateSchema& schema, const std::vector<UnitRow>& rows,
                    const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write file '" + path + "'");
    for (const auto& cov : schema.covariates) out << cov.name << ",";
    out << "w,y\n";
    char buf[64];
    for (const auto& row : rows) {
        for (int d = 0; d < schema.size(); ++d)
            out << schema.covariates[d].levels[row.key[d]] << ",";
        std::snprintf(buf, sizeof(buf), "%d,%.10f\n", row.w, row.y);
        out << buf;
    }
}

std::string ground_truth_to_json_text(const CovariateSchema& schema, const GroundTruth& truth) {
    nlohmann::ordered_json j;
    j["global"] = truth.global;
    j["effects"] = nlohmann::ordered_json::array();
    for (const auto& eff : truth.effects) {
        nlohmann::ordered_json je;
        je["covariates"] = nlohmann::ordered_json::array();
        je["levels"] = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < eff.covariates.size(); ++i) {
            const auto& cov = schema.covariates[eff.covariates[i]];
            je["covariates"].push_back(cov.name);
            auto labels = nlohmann::ordered_json::array();
            for (int l : eff.level_sets[i]) labels.push_back(cov.levels[l]);
            je["levels"].push_back(labels);
        }
        je["value"] = eff.value;
        j["effects"].push_back(std::move(je));
    }
    return j.dump(2) + "\n";
}

}  // namespace tvreg
