// Command-line front end: simulate benchmark data, aggregate unit rows,
// pre-tune between-graph weights, fit additive or multiplicative models,
// and render reports. Exit codes: 0 success, 1 runtime/solver failure,
// 2 configuration or validation error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tvreg/report.hpp"
#include "tvreg/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

int run_simulate(const std::string& example, std::uint64_t seed, const std::string& out_dir,
                 long long n_per_arm, double noise_sd) {
    tvreg::SimData sim;
    if (example == "1") {
        sim = tvreg::gen_example1(seed);
    } else if (example == "1weak") {
        sim = tvreg::gen_example1(seed, 0.5);
    } else if (example == "4") {
        sim = tvreg::gen_example4(seed);
    } else if (example == "null") {
        sim = tvreg::gen_example1(seed, 0.0);
        sim.truth.global = 0.0;
        sim.rows = tvreg::gen_null(sim.schema, n_per_arm, noise_sd, seed);
    } else {
        throw tvreg::ConfigError("unknown example '" + example + "' (use 1|1weak|4|null)");
    }
    fs::create_directories(out_dir);
    std::ofstream schema_out(fs::path(out_dir) / "schema.json");
    schema_out << tvreg::schema_to_json_text(sim.schema);
    tvreg::save_units_csv(sim.schema, sim.rows, (fs::path(out_dir) / "units.csv").string());
    std::ofstream truth_out(fs::path(out_dir) / "truth.json");
    truth_out << tvreg::ground_truth_to_json_text(sim.schema, sim.truth);
    std::cout << "wrote " << sim.rows.size() << " rows to " << out_dir << "\n";
    return 0;
}

int run_aggregate(const std::string& schema_path, const std::string& input,
                  const std::string& output) {
    const auto schema = tvreg::load_schema_json(schema_path);
    const auto agg = tvreg::load_units_csv(schema, input);
    for (const auto& d : agg.diagnostics) std::cerr << "warning: " << d << "\n";
    if (agg.rejected > 0)
        std::cerr << "warning: " << agg.rejected << " rows rejected\n";
    tvreg::save_cells_csv(schema, agg.cells, output);
    std::cout << "aggregated " << agg.accepted << " rows into " << agg.cells.size()
              << " cells\n";
    return 0;
}

int run_weights(const tvreg::RunConfig& cfg, const std::string& output) {
    const auto schema = tvreg::load_schema_json(cfg.schema_path);
    tvreg::CellStatsMap stats;
    if (cfg.input_kind == tvreg::InputKind::Unit)
        stats = tvreg::load_units_csv(schema, cfg.input_path).cells;
    else
        stats = tvreg::load_cells_csv(schema, cfg.input_path);
    tvreg::MeasurementOptions mo;
    mo.min_count = cfg.min_count;
    const auto m = cfg.mode == tvreg::FitMode::Multiplicative
                       ? tvreg::multiplicative_measurements(schema, stats, mo)
                       : tvreg::additive_measurements(schema, stats, mo);
    const auto terms = tvreg::enumerate_terms(schema, cfg.order);
    const auto design = tvreg::build_design(schema, terms);
    const auto pen1 =
        tvreg::build_penalty(terms, cfg.alpha, std::vector<double>(terms.size(), 1.0));
    const auto est = tvreg::estimate_weights(design, pen1, m, cfg.mc_samples, cfg.weights_seed,
                                             cfg.threads);
    ordered_json j;
    j["alpha"] = cfg.alpha;
    j["samples"] = est.samples;
    j["seed"] = est.seed;
    ordered_json jw, jse;
    for (std::size_t k = 0; k < terms.size(); ++k) {
        jw[terms[k].label] = est.weights[k];
        jse[terms[k].label] = est.se_gamma[k];
    }
    j["weights"] = jw;
    j["stderr"] = jse;
    std::ofstream out(output);
    if (!out) throw tvreg::ConfigError("cannot write '" + output + "'");
    out << j.dump(2) << "\n";
    std::cout << "wrote weights for " << terms.size() << " terms to " << output << "\n";
    return 0;
}

int run_fit(const tvreg::RunConfig& cfg) {
    const tvreg::Report report = tvreg::run_pipeline(cfg);
    if (!cfg.out_dir.empty()) tvreg::write_outputs(report, cfg.out_dir);
    std::cout << "selected lambda " << report.selected_lambda << " ("
              << report.effects.size() << " effects after reprocess, "
              << report.tv_effects.size() << " in the TV fit)\n";
    for (const auto& rec : report.effects) {
        std::cout << "  " << rec.label << ": " << rec.estimate << " (p=" << rec.pvalue;
        if (report.mode == tvreg::FitMode::Multiplicative)
            std::cout << ", pct=" << 100.0 * rec.pct_change << "%";
        std::cout << ")\n";
    }
    if (!cfg.out_dir.empty()) std::cout << "outputs in " << cfg.out_dir << "\n";
    return 0;
}

int run_render(const std::string& report_path, const std::string& out_dir) {
    std::ifstream in(report_path);
    if (!in) throw tvreg::ConfigError("cannot open report '" + report_path + "'");
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw tvreg::ConfigError(std::string("report parse error: ") + e.what());
    }
    if (!j.contains("heatmap")) throw tvreg::ConfigError("report lacks a heatmap matrix");
    const auto& jm = j["heatmap"];
    const Eigen::Index rows = static_cast<Eigen::Index>(jm.size());
    const Eigen::Index cols = rows ? static_cast<Eigen::Index>(jm[0].size()) : 0;
    tvreg::Matrix mat(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index k = 0; k < cols; ++k) mat(i, k) = jm[i][k].get<double>();
    fs::create_directories(out_dir);
    {
        std::ofstream out(fs::path(out_dir) / "heatmap.csv", std::ios::binary);
        out.precision(12);
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index k = 0; k < cols; ++k) {
                if (k) out << ",";
                out << mat(i, k);
            }
            out << "\n";
        }
    }
    tvreg::write_pgm(mat, (fs::path(out_dir) / "heatmap.pgm").string());
    std::cout << "rendered " << rows << "x" << cols << " heatmap to " << out_dir << "\n";
    return 0;
}

void add_fit_options(CLI::App* cmd, tvreg::RunConfig& cfg, std::string& config_path,
                     std::string& mode, std::string& input_kind, std::string& criterion,
                     int& screen_keep) {
    cmd->add_option("--config", config_path, "JSON configuration (flags override it)");
    cmd->add_option("--schema", cfg.schema_path, "schema JSON file");
    cmd->add_option("--input", cfg.input_path, "input CSV");
    cmd->add_option("--input-kind", input_kind, "unit|cell (default unit)");
    cmd->add_option("--mode", mode, "additive|multiplicative");
    cmd->add_option("--alpha", cfg.alpha, "TV vs l1 balance in [0,1] (default 0.5)");
    cmd->add_option("--order", cfg.order, "model order 1|2 (default 2)");
    cmd->add_option("--min-count", cfg.min_count, "min per-arm cell count (default 2)");
    cmd->add_option("--grid-count", cfg.grid_count, "lambda grid points (default 50)");
    cmd->add_option("--grid-min-ratio", cfg.grid_min_ratio,
                    "smallest lambda as a fraction of lambda_max (default 0.01)");
    cmd->add_option("--criterion", criterion, "bic|aic (default bic)");
    cmd->add_option("--weights-file", cfg.weights_file, "pre-tuned weights JSON");
    cmd->add_option("--mc-samples", cfg.mc_samples,
                    "Monte Carlo samples for weight pre-tuning (default 10000)");
    cmd->add_option("--weights-seed", cfg.weights_seed, "seed for weight pre-tuning");
    cmd->add_option("--screen", screen_keep,
                    "enable group-lasso pre-screening, keeping at most this many covariates");
    cmd->add_option("--delta-fuse", cfg.delta_fuse, "edge fusion threshold (default adaptive)");
    cmd->add_option("--delta-zero", cfg.delta_zero, "cluster drop threshold (default adaptive)");
    cmd->add_option("--variance-override", cfg.variance_override,
                    "per-cell historical variance CSV");
    cmd->add_option("--rho", cfg.admm.rho, "ADMM penalty parameter (default 10)");
    cmd->add_option("--eps-abs", cfg.admm.eps_abs, "ADMM absolute tolerance (default 1e-6)");
    cmd->add_option("--eps-rel", cfg.admm.eps_rel, "ADMM relative tolerance (default 1e-4)");
    cmd->add_option("--max-iter", cfg.admm.max_iter, "ADMM iteration cap (default 5000)");
    cmd->add_option("--threads", cfg.threads, "weight pre-tuning threads (0 = hardware)");
    cmd->add_option("--out", cfg.out_dir, "output directory");
    cmd->add_flag("--dump-operators", cfg.dump_operators,
                  "write B, b, D as sparse triplet text files");
}

void finish_fit_config(tvreg::RunConfig& cfg, const std::string& config_path,
                       const std::string& mode, const std::string& input_kind,
                       const std::string& criterion, int screen_keep, CLI::App* cmd) {
    if (!config_path.empty()) {
        tvreg::RunConfig from_file = tvreg::RunConfig::from_json_file(config_path);
        // flags given on the command line override the file
        tvreg::RunConfig flags = cfg;
        cfg = from_file;
        if (cmd->count("--schema")) cfg.schema_path = flags.schema_path;
        if (cmd->count("--input")) cfg.input_path = flags.input_path;
        if (cmd->count("--alpha")) cfg.alpha = flags.alpha;
        if (cmd->count("--order")) cfg.order = flags.order;
        if (cmd->count("--min-count")) cfg.min_count = flags.min_count;
        if (cmd->count("--grid-count")) cfg.grid_count = flags.grid_count;
        if (cmd->count("--grid-min-ratio")) cfg.grid_min_ratio = flags.grid_min_ratio;
        if (cmd->count("--weights-file")) cfg.weights_file = flags.weights_file;
        if (cmd->count("--mc-samples")) cfg.mc_samples = flags.mc_samples;
        if (cmd->count("--weights-seed")) cfg.weights_seed = flags.weights_seed;
        if (cmd->count("--delta-fuse")) cfg.delta_fuse = flags.delta_fuse;
        if (cmd->count("--delta-zero")) cfg.delta_zero = flags.delta_zero;
        if (cmd->count("--variance-override")) cfg.variance_override = flags.variance_override;
        if (cmd->count("--rho")) cfg.admm.rho = flags.admm.rho;
        if (cmd->count("--eps-abs")) cfg.admm.eps_abs = flags.admm.eps_abs;
        if (cmd->count("--eps-rel")) cfg.admm.eps_rel = flags.admm.eps_rel;
        if (cmd->count("--max-iter")) cfg.admm.max_iter = flags.admm.max_iter;
        if (cmd->count("--threads")) cfg.threads = flags.threads;
        if (cmd->count("--out")) cfg.out_dir = flags.out_dir;
        if (cmd->count("--dump-operators")) cfg.dump_operators = flags.dump_operators;
    }
    if (cmd->count("--mode") || config_path.empty()) {
        if (mode == "additive") cfg.mode = tvreg::FitMode::Additive;
        else if (mode == "multiplicative") cfg.mode = tvreg::FitMode::Multiplicative;
        else throw tvreg::ConfigError("mode must be additive|multiplicative");
    }
    if (cmd->count("--input-kind") || config_path.empty()) {
        if (input_kind == "unit") cfg.input_kind = tvreg::InputKind::Unit;
        else if (input_kind == "cell") cfg.input_kind = tvreg::InputKind::Cell;
        else throw tvreg::ConfigError("input_kind must be unit|cell");
    }
    if (cmd->count("--criterion") || config_path.empty()) {
        if (criterion == "bic") cfg.criterion = tvreg::Criterion::Bic;
        else if (criterion == "aic") cfg.criterion = tvreg::Criterion::Aic;
        else throw tvreg::ConfigError("criterion must be bic|aic");
    }
    if (cmd->count("--screen")) {
        cfg.screen = true;
        cfg.screen_keep_max = screen_keep;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Total-variation regularized additive regression over discrete covariate "
                 "graphs: concise summaries of heterogeneous treatment effects and metric "
                 "change diagnoses"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "write a synthetic benchmark dataset");
    std::string sim_example = "1", sim_out = "sim";
    std::uint64_t sim_seed = 1;
    long long sim_n = 10000;
    double sim_sd = 0.1;
    sim->add_option("--example", sim_example, "1|1weak|4|null")->required();
    sim->add_option("--seed", sim_seed, "random seed (default 1)");
    sim->add_option("--out", sim_out, "output directory (default sim)");
    sim->add_option("--n-per-arm", sim_n, "rows per arm for example null (default 10000)");
    sim->add_option("--noise-sd", sim_sd, "noise sd for example null (default 0.1)");

    // aggregate
    auto* agg = app.add_subcommand("aggregate", "aggregate unit rows into cell statistics");
    std::string agg_schema, agg_input, agg_out = "cells.csv";
    agg->add_option("--schema", agg_schema, "schema JSON")->required();
    agg->add_option("--input", agg_input, "unit-level CSV")->required();
    agg->add_option("--out", agg_out, "cell-level CSV to write (default cells.csv)");

    // weights
    auto* wts = app.add_subcommand("weights", "Monte Carlo between-graph weight pre-tuning");
    tvreg::RunConfig wcfg;
    std::string w_config, w_mode = "additive", w_kind = "unit", w_criterion = "bic";
    std::string w_out = "weights.json";
    int w_screen = 8;
    add_fit_options(wts, wcfg, w_config, w_mode, w_kind, w_criterion, w_screen);
    wts->add_option("--weights-out", w_out, "weights JSON to write (default weights.json)");

    // fit / diagnose
    auto* fit = app.add_subcommand("fit", "fit the TV-regularized additive model");
    tvreg::RunConfig fcfg;
    std::string f_config, f_mode = "additive", f_kind = "unit", f_criterion = "bic";
    int f_screen = 8;
    add_fit_options(fit, fcfg, f_config, f_mode, f_kind, f_criterion, f_screen);

    auto* diag = app.add_subcommand(
        "diagnose", "diagnose a pre/post metric change (fit with mode=multiplicative)");
    tvreg::RunConfig dcfg;
    std::string d_config, d_mode = "multiplicative", d_kind = "cell", d_criterion = "bic";
    int d_screen = 8;
    add_fit_options(diag, dcfg, d_config, d_mode, d_kind, d_criterion, d_screen);

    // render
    auto* ren = app.add_subcommand("render", "re-render heatmap files from a report");
    std::string ren_report, ren_out = "render";
    ren->add_option("--report", ren_report, "report.json from a fit")->required();
    ren->add_option("--out", ren_out, "output directory (default render)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return run_simulate(sim_example, sim_seed, sim_out, sim_n, sim_sd);
        if (agg->parsed()) return run_aggregate(agg_schema, agg_input, agg_out);
        if (wts->parsed()) {
            finish_fit_config(wcfg, w_config, w_mode, w_kind, w_criterion, w_screen, wts);
            return run_weights(wcfg, w_out);
        }
        if (fit->parsed()) {
            finish_fit_config(fcfg, f_config, f_mode, f_kind, f_criterion, f_screen, fit);
            return run_fit(fcfg);
        }
        if (diag->parsed()) {
            finish_fit_config(dcfg, d_config, d_mode, d_kind, d_criterion, d_screen, diag);
            dcfg.mode = tvreg::FitMode::Multiplicative;
            return run_fit(dcfg);
        }
        if (ren->parsed()) return run_render(ren_report, ren_out);
    } catch (const tvreg::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const tvreg::SolveError& e) {
        std::cerr << "error: " << e.what() << "\n";
        // leave a marker when outputs may already exist
        const std::string out_dir = fit->parsed() ? fcfg.out_dir
                                  : diag->parsed() ? dcfg.out_dir
                                                   : std::string();
        if (!out_dir.empty() && fs::exists(out_dir)) {
            std::ofstream marker(fs::path(out_dir) / "FAILED");
            marker << e.what() << "\n";
        }
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
