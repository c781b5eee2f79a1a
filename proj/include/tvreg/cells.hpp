#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tvreg/schema.hpp"
#include "tvreg/types.hpp"

namespace tvreg {

// One level index per covariate.
using CellKey = std::vector<int>;

// Per-arm running moments (Welford), mergeable across partitions.
struct ArmStats {
    long long n = 0;
    double mean = 0.0;
    double m2 = 0.0;  // sum of squared deviations

    void add(double y) {
        ++n;
        const double delta = y - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (y - mean);
    }
    void merge(const ArmStats& o) {
        if (o.n == 0) return;
        if (n == 0) {
            *this = o;
            return;
        }
        const double delta = o.mean - mean;
        const double nt = static_cast<double>(n + o.n);
        m2 += o.m2 + delta * delta * (static_cast<double>(n) * static_cast<double>(o.n)) / nt;
        mean += delta * static_cast<double>(o.n) / nt;
        n += o.n;
    }
    // Sample variance with divisor N-1; meaningful only for n >= 2.
    double variance() const { return n >= 2 ? m2 / static_cast<double>(n - 1) : 0.0; }
    bool has_variance() const { return n >= 2; }
};

// Sufficient statistics of one cell: counts, means and sample variances of
// both arms (0 = control, 1 = treatment).
struct CellStats {
    ArmStats arm[2];

    long long n0() const { return arm[0].n; }
    long long n1() const { return arm[1].n; }
    double mean0() const { return arm[0].mean; }
    double mean1() const { return arm[1].mean; }
    double var0() const { return arm[0].variance(); }
    double var1() const { return arm[1].variance(); }
    void merge(const CellStats& o) {
        arm[0].merge(o.arm[0]);
        arm[1].merge(o.arm[1]);
    }
    // Builds stats from published moments (cell-level input files).
    static CellStats from_moments(long long n0, long long n1, double mean0, double mean1,
                                  double var0, double var1);
};

using CellStatsMap = std::map<CellKey, CellStats>;

struct UnitRow {
    CellKey key;
    int w = 0;
    double y = 0.0;
};

struct AggregateResult {
    CellStatsMap cells;
    long long accepted = 0;
    long long rejected = 0;
    std::vector<std::string> diagnostics;  // first few reject reasons
};

// One-pass accumulation; rows with non-binary w or non-finite y are
// rejected with a diagnostic.
AggregateResult aggregate_units(const std::vector<UnitRow>& rows);

// Dense table over the full cross grid, flat row-major in schema order.
// weight == 0 marks an unusable cell.
struct MeasurementTable {
    std::vector<int> dims;
    Vector value;   // N_x
    Vector weight;  // N_x, finite, >= 0

    Index size() const { return value.size(); }
    Index usable_count() const;   // N_t
    double weight_sum() const;    // 1^T M 1
    long long flat_index(const CellKey& key) const;
    CellKey cell_coords(long long flat) const;
};

struct MeasurementOptions {
    long long min_count = 2;          // per arm
    double zero_var_cap = 1e6;        // cap factor for zero-variance cells
};

// tau_hat = mean1 - mean0, weight = n0*n1 / (n0*var1 + n1*var0).
MeasurementTable additive_measurements(const CovariateSchema& schema, const CellStatsMap& stats,
                                       const MeasurementOptions& opts = {});

// log(mean1/mean0) with delta-method weights
// 1 / (var0/(n0*mean0^2) + var1/(n1*mean1^2)); cells with a nonpositive
// arm mean get weight 0. Throws SolveError when no cell is usable.
MeasurementTable multiplicative_measurements(const CovariateSchema& schema,
                                             const CellStatsMap& stats,
                                             const MeasurementOptions& opts = {},
                                             std::vector<std::string>* diagnostics = nullptr);

// ---- delimited text I/O ----

// Unit-level CSV: one column per covariate (level labels), then w (0/1)
// and y. Unknown level labels reject the row with a diagnostic.
AggregateResult load_units_csv(const CovariateSchema& schema, const std::string& path);

// Cell-level CSV: covariate columns plus n0,n1,mean0,mean1,var0,var1.
CellStatsMap load_cells_csv(const CovariateSchema& schema, const std::string& path);
void save_cells_csv(const CovariateSchema& schema, const CellStatsMap& stats,
                    const std::string& path);

// Variance override CSV: covariate columns plus var0,var1; replaces the
// sample variances of matching cells (historical-variance injection).
void apply_variance_override(const CovariateSchema& schema, CellStatsMap& stats,
                             const std::string& path);

// Collapses a stats map onto a subset of covariates (used by screening).
CellStatsMap project_stats(const CellStatsMap& stats, const std::vector<int>& keep);

}  // namespace tvreg
