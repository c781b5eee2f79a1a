#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tvreg/path.hpp"
#include "tvreg/reprocess.hpp"
#include "tvreg/screening.hpp"
#include "tvreg/weights.hpp"

namespace tvreg {

enum class InputKind { Unit, Cell };
enum class FitMode { Additive, Multiplicative };

struct RunConfig {
    std::string schema_path;
    std::string input_path;
    InputKind input_kind = InputKind::Unit;
    FitMode mode = FitMode::Additive;
    double alpha = 0.5;
    int order = 2;
    long long min_count = 2;
    int grid_count = 50;
    double grid_min_ratio = 0.01;
    Criterion criterion = Criterion::Bic;

    std::string weights_file;  // empty -> Monte Carlo pre-tuning
    int mc_samples = 10000;
    std::uint64_t weights_seed = 1;
    int threads = 0;  // 0 -> hardware

    bool screen = false;
    int screen_keep_max = 8;

    double delta_fuse = -1.0;  // <= 0 -> adaptive default
    double delta_zero = -1.0;
    std::string variance_override;
    AdmmConfig admm;

    std::string out_dir;
    bool dump_operators = false;

    static RunConfig from_json_file(const std::string& path);
    void apply_json_text(const std::string& text);
    void validate() const;
};

struct EffectRecord {
    std::string label;
    std::vector<int> covariates;
    std::vector<std::vector<int>> level_sets;
    std::vector<std::vector<std::string>> level_labels;
    std::vector<int> vertices;  // term-flat (second order rendering)
    int term = -1;
    int order = 1;
    double estimate = 0.0;
    double stderror = 0.0;
    double tstat = 0.0;
    double pvalue = 1.0;
    double importance = 0.0;
    std::string provenance;
    double pct_change = 0.0;  // multiplicative mode: exp(estimate) - 1
};

struct PathSummaryRow {
    double lambda = 0.0;
    int n_effects = 0;
    double res = 0.0;
    int dof = 0;
    double aic = 0.0;
    double bic = 0.0;
    bool converged = false;
};

struct Report {
    FitMode mode = FitMode::Additive;
    double selected_lambda = 0.0;
    double lambda_max = 0.0;
    double intercept = 0.0;   // final (reprocessed) model
    std::vector<EffectRecord> effects;     // final model
    std::vector<EffectRecord> tv_effects;  // BIC-selected TV + OLS stage
    double tv_intercept = 0.0;
    std::vector<PathSummaryRow> path;
    int selected_index = 0;
    std::vector<std::string> weight_terms;
    std::vector<double> weights;
    std::vector<double> weight_se;
    int weight_samples = 0;
    std::uint64_t weight_seed = 0;
    std::optional<ScreenResult> screening;
    std::vector<std::string> screened_names;
    std::vector<std::string> covariate_names;  // fitted (post-screen) schema
    Index n_t = 0;
    std::vector<std::string> notes;
    Matrix heatmap;
    std::vector<std::string> axis_labels;
    std::string config_echo;  // JSON of the effective configuration
};

// T x T matrix, T = sum of retained covariate sizes: diagonal carries
// first-order effects, upper-triangular cross blocks carry second-order
// effects, the whole lower triangle carries the intercept.
Matrix render_heatmap_matrix(const CovariateSchema& schema, double intercept,
                             const std::vector<EffectRecord>& effects);
std::vector<std::string> heatmap_axis_labels(const CovariateSchema& schema);

// screen -> aggregate -> measurements -> weights -> reduce -> path ->
// reprocess -> report. Throws ConfigError / SolveError tagged with the
// failing stage.
Report run_pipeline(const RunConfig& cfg);

std::string report_to_json_text(const Report& report);
void write_outputs(const Report& report, const std::string& out_dir);
void write_pgm(const Matrix& values, const std::string& path);

}  // namespace tvreg
