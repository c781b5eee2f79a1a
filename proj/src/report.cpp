#include "tvreg/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace tvreg {

namespace {

using ordered_json = nlohmann::ordered_json;

template <class F>
auto stage(const std::string& name, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError("[" + name + "] " + e.what());
    } catch (const SolveError& e) {
        throw SolveError("[" + name + "] " + e.what());
    } catch (const std::exception& e) {
        throw SolveError("[" + name + "] " + e.what());
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

RunConfig RunConfig::from_json_file(const std::string& path) {
    RunConfig cfg;
    cfg.apply_json_text(read_file(path));
    return cfg;
}

void RunConfig::apply_json_text(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config JSON parse error: ") + e.what());
    }
    if (j.contains("schema")) schema_path = j["schema"].get<std::string>();
    if (j.contains("input")) input_path = j["input"].get<std::string>();
    if (j.contains("input_kind")) {
        const auto s = j["input_kind"].get<std::string>();
        if (s == "unit") input_kind = InputKind::Unit;
        else if (s == "cell") input_kind = InputKind::Cell;
        else throw ConfigError("input_kind must be unit|cell");
    }
    if (j.contains("mode")) {
        const auto s = j["mode"].get<std::string>();
        if (s == "additive") mode = FitMode::Additive;
        else if (s == "multiplicative") mode = FitMode::Multiplicative;
        else throw ConfigError("mode must be additive|multiplicative");
    }
    if (j.contains("alpha")) alpha = j["alpha"].get<double>();
    if (j.contains("order")) order = j["order"].get<int>();
    if (j.contains("min_count")) min_count = j["min_count"].get<long long>();
    if (j.contains("grid")) {
        if (j["grid"].contains("count")) grid_count = j["grid"]["count"].get<int>();
        if (j["grid"].contains("min_ratio"))
            grid_min_ratio = j["grid"]["min_ratio"].get<double>();
    }
    if (j.contains("criterion")) {
        const auto s = j["criterion"].get<std::string>();
        if (s == "bic") criterion = Criterion::Bic;
        else if (s == "aic") criterion = Criterion::Aic;
        else throw ConfigError("criterion must be bic|aic");
    }
    if (j.contains("weights")) {
        const auto& jw = j["weights"];
        if (jw.contains("file") && !jw["file"].is_null())
            weights_file = jw["file"].get<std::string>();
        if (jw.contains("mc_samples")) mc_samples = jw["mc_samples"].get<int>();
        if (jw.contains("seed")) weights_seed = jw["seed"].get<std::uint64_t>();
    }
    if (j.contains("screen")) {
        const auto& js = j["screen"];
        if (js.contains("enabled")) screen = js["enabled"].get<bool>();
        if (js.contains("keep_max")) screen_keep_max = js["keep_max"].get<int>();
    }
    if (j.contains("delta_fuse")) delta_fuse = j["delta_fuse"].get<double>();
    if (j.contains("delta_zero")) delta_zero = j["delta_zero"].get<double>();
    if (j.contains("variance_override") && !j["variance_override"].is_null())
        variance_override = j["variance_override"].get<std::string>();
    if (j.contains("admm")) {
        const auto& ja = j["admm"];
        if (ja.contains("rho")) admm.rho = ja["rho"].get<double>();
        if (ja.contains("eps_abs")) admm.eps_abs = ja["eps_abs"].get<double>();
        if (ja.contains("eps_rel")) admm.eps_rel = ja["eps_rel"].get<double>();
        if (ja.contains("max_iter")) admm.max_iter = ja["max_iter"].get<int>();
        if (ja.contains("ridge")) admm.ridge = ja["ridge"].get<double>();
    }
    if (j.contains("threads")) threads = j["threads"].get<int>();
    if (j.contains("out_dir")) out_dir = j["out_dir"].get<std::string>();
    if (j.contains("dump_operators")) dump_operators = j["dump_operators"].get<bool>();
}

void RunConfig::validate() const {
    if (schema_path.empty()) throw ConfigError("no schema file given");
    if (input_path.empty()) throw ConfigError("no input file given");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (alpha == 0.0)
        throw ConfigError("alpha = 0 disables the l1 rows that weight pre-tuning and "
                          "lambda_max need; use alpha > 0");
    if (order != 1 && order != 2) throw ConfigError("order must be 1 or 2");
    if (min_count < 1) throw ConfigError("min_count must be >= 1");
    if (grid_count < 1) throw ConfigError("grid count must be >= 1");
    if (!(grid_min_ratio > 0.0 && grid_min_ratio < 1.0))
        throw ConfigError("grid min_ratio must lie in (0, 1)");
    if (weights_file.empty() && mc_samples < 100)
        throw ConfigError("mc_samples must be >= 100");
    if (screen && screen_keep_max < 1) throw ConfigError("screen keep_max must be >= 1");
    if (!(admm.rho > 0.0) || !(admm.eps_abs > 0.0) || !(admm.eps_rel > 0.0) ||
        admm.max_iter < 1 || admm.ridge < 0.0)
        throw ConfigError("invalid ADMM settings");
}

namespace {

std::string config_echo_json(const RunConfig& cfg) {
    ordered_json j;
    j["schema"] = cfg.schema_path;
    j["input"] = cfg.input_path;
    j["input_kind"] = cfg.input_kind == InputKind::Unit ? "unit" : "cell";
    j["mode"] = cfg.mode == FitMode::Additive ? "additive" : "multiplicative";
    j["alpha"] = cfg.alpha;
    j["order"] = cfg.order;
    j["min_count"] = cfg.min_count;
    j["grid"] = {{"count", cfg.grid_count}, {"min_ratio", cfg.grid_min_ratio}};
    j["criterion"] = cfg.criterion == Criterion::Bic ? "bic" : "aic";
    j["weights"] = {{"file", cfg.weights_file},
                    {"mc_samples", cfg.mc_samples},
                    {"seed", cfg.weights_seed}};
    j["screen"] = {{"enabled", cfg.screen}, {"keep_max", cfg.screen_keep_max}};
    j["delta_fuse"] = cfg.delta_fuse;
    j["delta_zero"] = cfg.delta_zero;
    j["variance_override"] = cfg.variance_override;
    j["admm"] = {{"rho", cfg.admm.rho},
                 {"eps_abs", cfg.admm.eps_abs},
                 {"eps_rel", cfg.admm.eps_rel},
                 {"max_iter", cfg.admm.max_iter},
                 {"ridge", cfg.admm.ridge}};
    j["threads"] = cfg.threads;
    return j.dump(2);
}

std::string level_set_label(const Covariate& cov, const std::vector<int>& levels) {
    std::string out = cov.name + ":";
    if (levels.size() == 1) return out + cov.levels[levels[0]];
    out += "(";
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (i) out += ",";
        out += cov.levels[levels[i]];
    }
    return out + ")";
}

EffectRecord effect_from_vertices(int term_idx, const std::vector<int>& vertices,
                                  const DesignOperator& design,
                                  const CovariateSchema& schema) {
    const auto& term = design.terms[term_idx];
    EffectRecord rec;
    rec.term = term_idx;
    rec.order = term.order();
    rec.covariates = term.covariate_indices;
    rec.vertices = vertices;
    if (term.order() == 1) {
        const auto& cov = schema.covariates[term.covariate_indices[0]];
        rec.level_sets = {vertices};
        rec.level_labels.push_back({});
        for (int v : vertices) rec.level_labels[0].push_back(cov.levels[v]);
        rec.label = level_set_label(cov, vertices);
    } else {
        const auto& cov_a = schema.covariates[term.covariate_indices[0]];
        const auto& cov_b = schema.covariates[term.covariate_indices[1]];
        const int nf = cov_b.size();
        std::set<int> rows, cols;
        for (int v : vertices) {
            rows.insert(v / nf);
            cols.insert(v % nf);
        }
        std::vector<int> ra(rows.begin(), rows.end()), cb(cols.begin(), cols.end());
        const bool rect = ra.size() * cb.size() == vertices.size();
        rec.level_sets = {ra, cb};
        rec.level_labels.resize(2);
        for (int v : ra) rec.level_labels[0].push_back(cov_a.levels[v]);
        for (int v : cb) rec.level_labels[1].push_back(cov_b.levels[v]);
        if (rect) {
            rec.label = level_set_label(cov_a, ra) + "&" + level_set_label(cov_b, cb);
        } else {
            rec.label = term.label + ":cluster(" + std::to_string(vertices.size()) + ")";
        }
    }
    return rec;
}

void fill_stats(EffectRecord& rec, const RefitModel& fit, int kept_pos, double importance,
                FitMode mode) {
    const int i = kept_pos + 1;  // 0 is the intercept
    rec.estimate = fit.coef[i];
    rec.stderror = std::sqrt(std::max(fit.cov(i, i), 0.0));
    rec.tstat = fit.tstat[i];
    rec.pvalue = fit.pvalue[i];
    rec.importance = importance;
    if (mode == FitMode::Multiplicative) rec.pct_change = std::expm1(rec.estimate);
}

void dump_operators_files(const ReducedProblem& problem, const PenaltyOperator& penalty,
                          const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    {
        std::ofstream out(fs::path(out_dir) / "B.txt");
        out.precision(17);
        if (problem.dense) {
            for (Index i = 0; i < problem.b_mat.rows(); ++i)
                for (Index j = 0; j < problem.b_mat.cols(); ++j)
                    if (problem.b_mat(i, j) != 0.0)
                        out << i << " " << j << " " << problem.b_mat(i, j) << "\n";
        } else {
            for (int k = 0; k < problem.atma.outerSize(); ++k)
                for (SpMat::InnerIterator it(problem.atma, k); it; ++it)
                    out << it.row() << " " << it.col() << " " << it.value() << "\n";
        }
    }
    {
        std::ofstream out(fs::path(out_dir) / "b.txt");
        out.precision(17);
        for (Index i = 0; i < problem.b.size(); ++i) out << i << " " << problem.b[i] << "\n";
    }
    {
        std::ofstream out(fs::path(out_dir) / "D.txt");
        out.precision(17);
        const SpMat d = penalty.to_sparse();
        for (int k = 0; k < d.outerSize(); ++k)
            for (SpMat::InnerIterator it(d, k); it; ++it)
                out << it.row() << " " << it.col() << " " << it.value() << "\n";
    }
}

}  // namespace

Matrix render_heatmap_matrix(const CovariateSchema& schema, double intercept,
                             const std::vector<EffectRecord>& effects) {
    std::vector<Index> offsets(schema.size());
    Index t_size = 0;
    for (int d = 0; d < schema.size(); ++d) {
        offsets[d] = t_size;
        t_size += schema.covariates[d].size();
    }
    Matrix mat = Matrix::Zero(t_size, t_size);
    for (Index i = 0; i < t_size; ++i)
        for (Index j = 0; j < i; ++j) mat(i, j) = intercept;
    for (const auto& rec : effects) {
        if (rec.order == 1) {
            const Index off = offsets[rec.covariates[0]];
            for (int l : rec.level_sets[0]) mat(off + l, off + l) += rec.estimate;
        } else {
            const Index off_a = offsets[rec.covariates[0]];
            const Index off_b = offsets[rec.covariates[1]];
            const int nf = schema.covariates[rec.covariates[1]].size();
            for (int v : rec.vertices) mat(off_a + v / nf, off_b + v % nf) += rec.estimate;
        }
    }
    return mat;
}

std::vector<std::string> heatmap_axis_labels(const CovariateSchema& schema) {
    std::vector<std::string> labels;
    for (const auto& cov : schema.covariates)
        for (const auto& lvl : cov.levels) labels.push_back(cov.name + ":" + lvl);
    return labels;
}

Report run_pipeline(const RunConfig& cfg) {
    stage("config", [&] { cfg.validate(); });
    Report report;
    report.mode = cfg.mode;

    CovariateSchema schema = stage("schema", [&] { return load_schema_json(cfg.schema_path); });

    CellStatsMap stats = stage("input", [&] {
        CellStatsMap out;
        if (cfg.input_kind == InputKind::Unit) {
            AggregateResult agg = load_units_csv(schema, cfg.input_path);
            if (agg.accepted == 0) throw ConfigError("no usable rows in input");
            if (agg.rejected > 0)
                report.notes.push_back(std::to_string(agg.rejected) + " input rows rejected");
            out = std::move(agg.cells);
        } else {
            out = load_cells_csv(schema, cfg.input_path);
        }
        if (!cfg.variance_override.empty())
            apply_variance_override(schema, out, cfg.variance_override);
        return out;
    });

    if (cfg.screen) {
        stage("screen", [&] {
            ScreenOptions so;
            so.min_count = cfg.min_count;
            so.multiplicative = cfg.mode == FitMode::Multiplicative;
            ScreenResult scr =
                group_lasso_screen(schema, stats, cfg.screen_keep_max, cfg.weights_seed, so);
            report.screening = scr;
            for (int d : scr.retained)
                report.screened_names.push_back(schema.covariates[d].name);
            if (!scr.note.empty()) report.notes.push_back("screening: " + scr.note);
            if (static_cast<int>(scr.retained.size()) < schema.size()) {
                stats = project_stats(stats, scr.retained);
                CovariateSchema reduced;
                for (int d : scr.retained) reduced.covariates.push_back(schema.covariates[d]);
                schema = std::move(reduced);
            }
        });
    }

    const MeasurementTable m = stage("measurements", [&] {
        if (schema.grid_size() > 2000000)
            throw ConfigError("covariate grid has " + std::to_string(schema.grid_size()) +
                              " cells; enable --screen to bound it");
        MeasurementOptions mo;
        mo.min_count = cfg.min_count;
        if (cfg.mode == FitMode::Multiplicative) {
            std::vector<std::string> diags;
            MeasurementTable table = multiplicative_measurements(schema, stats, mo, &diags);
            for (const auto& d : diags) report.notes.push_back("measurements: " + d);
            return table;
        }
        return additive_measurements(schema, stats, mo);
    });
    report.n_t = m.usable_count();
    if (report.n_t == 0)
        throw SolveError("[measurements] no usable cells (check min_count and input)");
    for (const auto& cov : schema.covariates) report.covariate_names.push_back(cov.name);

    const std::vector<TermSpec> terms =
        stage("terms", [&] { return enumerate_terms(schema, cfg.order); });
    const DesignOperator design = stage("terms", [&] { return build_design(schema, terms); });

    std::vector<double> weights(terms.size(), 1.0);
    stage("weights", [&] {
        for (const auto& t : terms) report.weight_terms.push_back(t.label);
        if (!cfg.weights_file.empty()) {
            ordered_json j = ordered_json::parse(read_file(cfg.weights_file));
            if (!j.contains("weights")) throw ConfigError("weights file lacks 'weights'");
            for (std::size_t k = 0; k < terms.size(); ++k) {
                if (!j["weights"].contains(terms[k].label))
                    throw ConfigError("weights file lacks term '" + terms[k].label + "'");
                weights[k] = j["weights"][terms[k].label].get<double>();
                if (!(weights[k] > 0.0)) throw ConfigError("weights must be positive");
            }
            report.weights = weights;
            report.weight_samples = j.value("samples", 0);
            report.weight_seed = j.value("seed", 0ULL);
            report.weight_se.assign(terms.size(), 0.0);
        } else {
            const PenaltyOperator pen1 =
                build_penalty(terms, cfg.alpha, std::vector<double>(terms.size(), 1.0));
            const WeightEstimate est = estimate_weights(design, pen1, m, cfg.mc_samples,
                                                        cfg.weights_seed, cfg.threads);
            weights = est.weights;
            report.weights = est.weights;
            report.weight_se = est.se_gamma;
            report.weight_samples = est.samples;
            report.weight_seed = est.seed;
        }
    });

    const PenaltyOperator penalty =
        stage("reduce", [&] { return build_penalty(terms, cfg.alpha, weights); });
    const ReducedProblem problem = stage("reduce", [&] { return reduce(design, m); });
    if (cfg.dump_operators && !cfg.out_dir.empty())
        stage("reduce", [&] { dump_operators_files(problem, penalty, cfg.out_dir); });

    const double lmax = stage("lambda_max", [&] { return lambda_max(problem, penalty); });
    report.lambda_max = lmax;
    if (!(lmax > 0.0)) report.notes.push_back("lambda_max is zero: no signal in b");

    const PathResult path = stage("path", [&] {
        const auto grid = lambda_grid(std::max(lmax, 1e-12), cfg.grid_count, cfg.grid_min_ratio);
        PathOptions po;
        po.criterion = cfg.criterion;
        po.delta_fuse = cfg.delta_fuse;
        po.delta_zero = cfg.delta_zero;
        return run_path(problem, penalty, design, m, grid, cfg.admm, po);
    });
    for (const auto& e : path.entries) {
        PathSummaryRow row;
        row.lambda = e.lambda;
        row.n_effects = e.n_effects;
        row.res = e.res;
        row.dof = e.dof;
        row.aic = e.aic;
        row.bic = e.bic;
        row.converged = e.converged;
        report.path.push_back(row);
    }
    report.selected_index = path.selected;
    const PathEntry& selected = path.entries[path.selected];
    report.selected_lambda = selected.lambda;
    bool any_converged = false;
    for (const auto& e : path.entries) any_converged |= e.converged;
    if (!any_converged)
        report.notes.push_back("no path entry converged; selection made among unconverged fits");

    stage("report", [&] {
        const auto tv_importance = importance_scores(selected, design, m);
        report.tv_intercept = selected.refit.intercept();
        for (std::size_t i = 0; i < selected.refit.kept.size(); ++i) {
            const auto& cluster = selected.clusters.clusters[selected.refit.kept[i]];
            EffectRecord rec = effect_from_vertices(cluster.term, cluster.vertices, design, schema);
            rec.provenance = "cluster";
            fill_stats(rec, selected.refit, static_cast<int>(i), tv_importance[i], cfg.mode);
            report.tv_effects.push_back(std::move(rec));
        }
    });

    const ReprocessResult rep = stage("reprocess", [&] {
        return reprocess(selected.clusters, design, schema, m, cfg.criterion);
    });

    stage("report", [&] {
        report.intercept = rep.model.intercept();
        for (std::size_t i = 0; i < rep.model.kept.size(); ++i) {
            const auto& feature = rep.features[rep.support[rep.model.kept[i]]];
            EffectRecord rec =
                effect_from_vertices(feature.term, feature.vertices, design, schema);
            rec.provenance = provenance_name(feature.provenance);
            fill_stats(rec, rep.model, static_cast<int>(i), rep.importance[i], cfg.mode);
            report.effects.push_back(std::move(rec));
        }
        report.heatmap = render_heatmap_matrix(schema, report.intercept, report.effects);
        report.axis_labels = heatmap_axis_labels(schema);
        report.config_echo = config_echo_json(cfg);
    });
    return report;
}

namespace {

ordered_json effect_to_json(const EffectRecord& rec, FitMode mode,
                            const std::vector<std::string>& cov_names) {
    ordered_json je;
    je["label"] = rec.label;
    je["covariates"] = ordered_json::array();
    for (int d : rec.covariates) je["covariates"].push_back(cov_names[d]);
    je["levels"] = rec.level_labels;
    je["level_indices"] = rec.level_sets;
    if (rec.order == 2) je["vertices"] = rec.vertices;
    je["estimate"] = rec.estimate;
    je["stderr"] = rec.stderror;
    je["t"] = rec.tstat;
    je["p"] = rec.pvalue;
    je["importance"] = rec.importance;
    je["provenance"] = rec.provenance;
    if (mode == FitMode::Multiplicative) je["pct_change"] = rec.pct_change;
    return je;
}

}  // namespace

std::string report_to_json_text(const Report& report) {
    ordered_json j;
    j["mode"] = report.mode == FitMode::Additive ? "additive" : "multiplicative";
    j["selected_lambda"] = report.selected_lambda;
    j["lambda_max"] = report.lambda_max;
    j["n_t"] = report.n_t;
    j["intercept"] = report.intercept;
    if (report.mode == FitMode::Multiplicative)
        j["intercept_pct_change"] = std::expm1(report.intercept);

    const std::vector<std::string>& cov_names = report.covariate_names;

    j["effects"] = ordered_json::array();
    for (const auto& rec : report.effects)
        j["effects"].push_back(effect_to_json(rec, report.mode, cov_names));
    j["tv_intercept"] = report.tv_intercept;
    j["tv_effects"] = ordered_json::array();
    for (const auto& rec : report.tv_effects)
        j["tv_effects"].push_back(effect_to_json(rec, report.mode, cov_names));

    j["path"] = ordered_json::array();
    for (const auto& row : report.path) {
        ordered_json jr;
        jr["lambda"] = row.lambda;
        jr["n_effects"] = row.n_effects;
        jr["res"] = row.res;
        jr["dof"] = row.dof;
        jr["aic"] = row.aic;
        jr["bic"] = row.bic;
        jr["converged"] = row.converged;
        j["path"].push_back(std::move(jr));
    }
    j["selected_index"] = report.selected_index;

    ordered_json jw;
    for (std::size_t k = 0; k < report.weight_terms.size(); ++k)
        jw[report.weight_terms[k]] = report.weights.size() > k ? report.weights[k] : 1.0;
    j["weights"] = {{"terms", jw},
                    {"samples", report.weight_samples},
                    {"seed", report.weight_seed}};
    if (!report.weight_se.empty()) {
        ordered_json jse;
        for (std::size_t k = 0; k < report.weight_terms.size(); ++k)
            jse[report.weight_terms[k]] = report.weight_se[k];
        j["weights"]["stderr"] = jse;
    }

    if (report.screening) {
        ordered_json js;
        js["retained"] = report.screened_names;
        js["retained_indices"] = report.screening->retained;
        js["group_norms"] = report.screening->group_norms;
        js["lambda"] = report.screening->lambda;
        js["pass_through"] = report.screening->pass_through;
        j["screening"] = std::move(js);
    }
    j["notes"] = report.notes;

    j["heatmap"] = ordered_json::array();
    for (Index i = 0; i < report.heatmap.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (Index k = 0; k < report.heatmap.cols(); ++k) row.push_back(report.heatmap(i, k));
        j["heatmap"].push_back(std::move(row));
    }
    j["axis_labels"] = report.axis_labels;
    j["config"] = ordered_json::parse(report.config_echo.empty() ? "{}" : report.config_echo);
    return j.dump(2) + "\n";
}

void write_pgm(const Matrix& values, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write file '" + path + "'");
    const double lo = values.size() ? values.minCoeff() : 0.0;
    const double hi = values.size() ? values.maxCoeff() : 0.0;
    const double span = hi - lo;
    out << "P5\n" << values.cols() << " " << values.rows() << "\n255\n";
    for (Index i = 0; i < values.rows(); ++i) {
        for (Index k = 0; k < values.cols(); ++k) {
            const double scaled = span > 0.0 ? (values(i, k) - lo) / span * 255.0 : 0.0;
            const unsigned char byte =
                static_cast<unsigned char>(std::lround(std::min(255.0, std::max(0.0, scaled))));
            out.put(static_cast<char>(byte));
        }
    }
}

void write_outputs(const Report& report, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    {
        std::ofstream out(fs::path(out_dir) / "report.json", std::ios::binary);
        if (!out) throw ConfigError("cannot write report.json");
        out << report_to_json_text(report);
    }
    {
        ordered_json j;
        j["entries"] = ordered_json::array();
        for (const auto& row : report.path) {
            ordered_json jr;
            jr["lambda"] = row.lambda;
            jr["n_effects"] = row.n_effects;
            jr["res"] = row.res;
            jr["dof"] = row.dof;
            jr["aic"] = row.aic;
            jr["bic"] = row.bic;
            jr["converged"] = row.converged;
            j["entries"].push_back(std::move(jr));
        }
        j["selected_index"] = report.selected_index;
        std::ofstream out(fs::path(out_dir) / "path.json", std::ios::binary);
        out << j.dump(2) << "\n";
    }
    {
        std::ofstream out(fs::path(out_dir) / "heatmap.csv", std::ios::binary);
        out.precision(12);
        for (Index i = 0; i < report.heatmap.rows(); ++i) {
            for (Index k = 0; k < report.heatmap.cols(); ++k) {
                if (k) out << ",";
                out << report.heatmap(i, k);
            }
            out << "\n";
        }
    }
    write_pgm(report.heatmap, (fs::path(out_dir) / "heatmap.pgm").string());
    {
        // flat stage-by-feature table: one column per feature, one row per
        // fitting stage
        std::vector<std::string> columns{"global"};
        std::set<std::string> seen;
        for (const auto& rec : report.tv_effects)
            if (seen.insert(rec.label).second) columns.push_back(rec.label);
        for (const auto& rec : report.effects)
            if (seen.insert(rec.label).second) columns.push_back(rec.label);
        auto row_for = [&](const std::vector<EffectRecord>& effects, double intercept) {
            std::vector<std::string> cells(columns.size());
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.6g", intercept);
            cells[0] = buf;
            for (const auto& rec : effects) {
                for (std::size_t c = 0; c < columns.size(); ++c)
                    if (columns[c] == rec.label) {
                        std::snprintf(buf, sizeof(buf), "%.6g", rec.estimate);
                        cells[c] = buf;
                    }
            }
            return cells;
        };
        std::ofstream out(fs::path(out_dir) / "effects.csv", std::ios::binary);
        out << "stage";
        for (const auto& c : columns) out << "," << c;
        out << "\n";
        const auto tv_row = row_for(report.tv_effects, report.tv_intercept);
        out << "tv_ols";
        for (const auto& c : tv_row) out << "," << c;
        out << "\n";
        const auto final_row = row_for(report.effects, report.intercept);
        out << "reprocess_ols";
        for (const auto& c : final_row) out << "," << c;
        out << "\n";
    }
}

}  // namespace tvreg
