#include "tvreg/cells.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tvreg {

CellStats CellStats::from_moments(long long n0, long long n1, double mean0, double mean1,
                                  double var0, double var1) {
    CellStats s;
    s.arm[0].n = n0;
    s.arm[0].mean = mean0;
    s.arm[0].m2 = n0 >= 2 ? var0 * static_cast<double>(n0 - 1) : 0.0;
    s.arm[1].n = n1;
    s.arm[1].mean = mean1;
    s.arm[1].m2 = n1 >= 2 ? var1 * static_cast<double>(n1 - 1) : 0.0;
    return s;
}

AggregateResult aggregate_units(const std::vector<UnitRow>& rows) {
    AggregateResult out;
    for (const auto& row : rows) {
        if (row.w != 0 && row.w != 1) {
            ++out.rejected;
            if (out.diagnostics.size() < 20)
                out.diagnostics.push_back("non-binary treatment indicator");
            continue;
        }
        if (!std::isfinite(row.y)) {
            ++out.rejected;
            if (out.diagnostics.size() < 20) out.diagnostics.push_back("non-finite outcome");
            continue;
        }
        out.cells[row.key].arm[row.w].add(row.y);
        ++out.accepted;
    }
    return out;
}

Index MeasurementTable::usable_count() const {
    return (weight.array() > 0.0).count();
}

double MeasurementTable::weight_sum() const { return weight.sum(); }

long long MeasurementTable::flat_index(const CellKey& key) const {
    long long f = 0;
    for (std::size_t d = 0; d < dims.size(); ++d) f = f * dims[d] + key[d];
    return f;
}

CellKey MeasurementTable::cell_coords(long long flat) const {
    CellKey key(dims.size());
    for (std::size_t d = dims.size(); d-- > 0;) {
        key[d] = static_cast<int>(flat % dims[d]);
        flat /= dims[d];
    }
    return key;
}

namespace {

long long flat_of(const CellKey& key, const std::vector<int>& dims) {
    long long f = 0;
    for (std::size_t d = 0; d < dims.size(); ++d) f = f * dims[d] + key[d];
    return f;
}

// Replaces non-finite weights (degenerate zero-variance cells) by
// cap_factor times the median finite positive weight.
void cap_degenerate_weights(Vector& weight, double cap_factor) {
    std::vector<double> finite;
    bool any_degenerate = false;
    for (Index i = 0; i < weight.size(); ++i) {
        if (weight[i] > 0.0 && std::isfinite(weight[i]))
            finite.push_back(weight[i]);
        else if (!std::isfinite(weight[i]))
            any_degenerate = true;
    }
    if (!any_degenerate) return;
    double median = 1.0;
    if (!finite.empty()) {
        std::nth_element(finite.begin(), finite.begin() + finite.size() / 2, finite.end());
        median = finite[finite.size() / 2];
    }
    const double cap = cap_factor * median;
    for (Index i = 0; i < weight.size(); ++i)
        if (!std::isfinite(weight[i])) weight[i] = cap;
}

}  // namespace

MeasurementTable additive_measurements(const CovariateSchema& schema, const CellStatsMap& stats,
                                       const MeasurementOptions& opts) {
    MeasurementTable table;
    table.dims = schema.grid_dims();
    const long long n_x = schema.grid_size();
    table.value = Vector::Zero(n_x);
    table.weight = Vector::Zero(n_x);
    for (const auto& [key, cs] : stats) {
        if (cs.n0() < opts.min_count || cs.n1() < opts.min_count) continue;
        const long long i = flat_of(key, table.dims);
        const double num = static_cast<double>(cs.n0()) * static_cast<double>(cs.n1());
        const double den =
            static_cast<double>(cs.n0()) * cs.var1() + static_cast<double>(cs.n1()) * cs.var0();
        table.value[i] = cs.mean1() - cs.mean0();
        table.weight[i] = den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
    }
    cap_degenerate_weights(table.weight, opts.zero_var_cap);
    return table;
}

MeasurementTable multiplicative_measurements(const CovariateSchema& schema,
                                             const CellStatsMap& stats,
                                             const MeasurementOptions& opts,
                                             std::vector<std::string>* diagnostics) {
    MeasurementTable table;
    table.dims = schema.grid_dims();
    const long long n_x = schema.grid_size();
    table.value = Vector::Zero(n_x);
    table.weight = Vector::Zero(n_x);
    for (const auto& [key, cs] : stats) {
        if (cs.n0() < opts.min_count || cs.n1() < opts.min_count) continue;
        if (cs.mean0() <= 0.0 || cs.mean1() <= 0.0) {
            if (diagnostics && diagnostics->size() < 20) {
                std::ostringstream ss;
                ss << "cell with nonpositive arm mean skipped (mean0=" << cs.mean0()
                   << ", mean1=" << cs.mean1() << ")";
                diagnostics->push_back(ss.str());
            }
            continue;
        }
        const long long i = flat_of(key, table.dims);
        const double var_log =
            cs.var0() / (static_cast<double>(cs.n0()) * cs.mean0() * cs.mean0()) +
            cs.var1() / (static_cast<double>(cs.n1()) * cs.mean1() * cs.mean1());
        table.value[i] = std::log(cs.mean1() / cs.mean0());
        table.weight[i] = var_log > 0.0 ? 1.0 / var_log : std::numeric_limits<double>::infinity();
    }
    cap_degenerate_weights(table.weight, opts.zero_var_cap);
    if (table.usable_count() == 0)
        throw SolveError("multiplicative measurements: no usable cell (positive means and "
                         "sufficient counts in both arms required)");
    return table;
}

// ---- delimited text I/O ----

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

struct ColumnMap {
    std::vector<int> covariate_col;  // per schema covariate: column index
    std::vector<std::map<std::string, int>> level_of;
};

ColumnMap map_covariate_columns(const CovariateSchema& schema,
                                const std::vector<std::string>& header,
                                const std::string& path) {
    ColumnMap cm;
    cm.covariate_col.assign(schema.size(), -1);
    cm.level_of.resize(schema.size());
    for (int d = 0; d < schema.size(); ++d) {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == schema.covariates[d].name) cm.covariate_col[d] = static_cast<int>(c);
        if (cm.covariate_col[d] < 0)
            throw ConfigError("file '" + path + "': missing column '" +
                              schema.covariates[d].name + "'");
        const auto& levels = schema.covariates[d].levels;
        for (int l = 0; l < static_cast<int>(levels.size()); ++l) cm.level_of[d][levels[l]] = l;
    }
    return cm;
}

int find_column(const std::vector<std::string>& header, const std::string& name,
                const std::string& path) {
    for (std::size_t c = 0; c < header.size(); ++c)
        if (header[c] == name) return static_cast<int>(c);
    throw ConfigError("file '" + path + "': missing column '" + name + "'");
}

double parse_double(const std::string& s) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) return std::numeric_limits<double>::quiet_NaN();
        return v;
    } catch (...) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

}  // namespace

AggregateResult load_units_csv(const CovariateSchema& schema, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open input file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("file '" + path + "' is empty");
    const auto header = split_csv_line(line);
    const auto cm = map_covariate_columns(schema, header, path);
    const int w_col = find_column(header, "w", path);
    const int y_col = find_column(header, "y", path);

    AggregateResult out;
    long long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            ++out.rejected;
            if (out.diagnostics.size() < 20)
                out.diagnostics.push_back("line " + std::to_string(lineno) + ": field count");
            continue;
        }
        CellKey key(schema.size());
        bool ok = true;
        for (int d = 0; d < schema.size() && ok; ++d) {
            const auto it = cm.level_of[d].find(fields[cm.covariate_col[d]]);
            if (it == cm.level_of[d].end()) {
                ok = false;
                ++out.rejected;
                if (out.diagnostics.size() < 20)
                    out.diagnostics.push_back("line " + std::to_string(lineno) +
                                              ": unknown level '" + fields[cm.covariate_col[d]] +
                                              "' for " + schema.covariates[d].name);
            } else {
                key[d] = it->second;
            }
        }
        if (!ok) continue;
        const double wval = parse_double(fields[w_col]);
        const double y = parse_double(fields[y_col]);
        if (wval != 0.0 && wval != 1.0) {
            ++out.rejected;
            if (out.diagnostics.size() < 20)
                out.diagnostics.push_back("line " + std::to_string(lineno) + ": w not 0/1");
            continue;
        }
        if (!std::isfinite(y)) {
            ++out.rejected;
            if (out.diagnostics.size() < 20)
                out.diagnostics.push_back("line " + std::to_string(lineno) + ": bad y");
            continue;
        }
        out.cells[key].arm[static_cast<int>(wval)].add(y);
        ++out.accepted;
    }
    return out;
}

CellStatsMap load_cells_csv(const CovariateSchema& schema, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open input file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("file '" + path + "' is empty");
    const auto header = split_csv_line(line);
    const auto cm = map_covariate_columns(schema, header, path);
    const int c_n0 = find_column(header, "n0", path);
    const int c_n1 = find_column(header, "n1", path);
    const int c_mean0 = find_column(header, "mean0", path);
    const int c_mean1 = find_column(header, "mean1", path);
    const int c_var0 = find_column(header, "var0", path);
    const int c_var1 = find_column(header, "var1", path);

    CellStatsMap out;
    long long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw ConfigError("file '" + path + "' line " + std::to_string(lineno) +
                              ": field count mismatch");
        CellKey key(schema.size());
        for (int d = 0; d < schema.size(); ++d) {
            const auto it = cm.level_of[d].find(fields[cm.covariate_col[d]]);
            if (it == cm.level_of[d].end())
                throw ConfigError("file '" + path + "' line " + std::to_string(lineno) +
                                  ": unknown level '" + fields[cm.covariate_col[d]] + "'");
            key[d] = it->second;
        }
        const double n0 = parse_double(fields[c_n0]);
        const double n1 = parse_double(fields[c_n1]);
        const auto var_field = [&](int col) {
            return fields[col].empty() ? 0.0 : parse_double(fields[col]);
        };
        out[key] = CellStats::from_moments(
            static_cast<long long>(n0), static_cast<long long>(n1),
            parse_double(fields[c_mean0]), parse_double(fields[c_mean1]), var_field(c_var0),
            var_field(c_var1));
    }
    return out;
}

void save_cells_csv(const CovariateSchema& schema, const CellStatsMap& stats,
                    const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write file '" + path + "'");
    for (const auto& cov : schema.covariates) out << cov.name << ",";
    out << "n0,n1,mean0,mean1,var0,var1\n";
    out.precision(17);
    for (const auto& [key, cs] : stats) {
        for (int d = 0; d < schema.size(); ++d) out << schema.covariates[d].levels[key[d]] << ",";
        out << cs.n0() << "," << cs.n1() << "," << cs.mean0() << "," << cs.mean1() << ","
            << cs.var0() << "," << cs.var1() << "\n";
    }
}

void apply_variance_override(const CovariateSchema& schema, CellStatsMap& stats,
                             const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open variance override file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("file '" + path + "' is empty");
    const auto header = split_csv_line(line);
    const auto cm = map_covariate_columns(schema, header, path);
    const int c_var0 = find_column(header, "var0", path);
    const int c_var1 = find_column(header, "var1", path);
    long long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        CellKey key(schema.size());
        bool ok = true;
        for (int d = 0; d < schema.size() && ok; ++d) {
            const auto it = cm.level_of[d].find(fields[cm.covariate_col[d]]);
            if (it == cm.level_of[d].end()) ok = false;
            else key[d] = it->second;
        }
        if (!ok) continue;
        const auto it = stats.find(key);
        if (it == stats.end()) continue;
        const double v0 = parse_double(fields[c_var0]);
        const double v1 = parse_double(fields[c_var1]);
        auto& cs = it->second;
        if (std::isfinite(v0) && cs.arm[0].n >= 1)
            cs.arm[0].m2 = v0 * static_cast<double>(std::max<long long>(cs.arm[0].n - 1, 1));
        if (std::isfinite(v1) && cs.arm[1].n >= 1)
            cs.arm[1].m2 = v1 * static_cast<double>(std::max<long long>(cs.arm[1].n - 1, 1));
    }
}

CellStatsMap project_stats(const CellStatsMap& stats, const std::vector<int>& keep) {
    CellStatsMap out;
    for (const auto& [key, cs] : stats) {
        CellKey sub(keep.size());
        for (std::size_t i = 0; i < keep.size(); ++i) sub[i] = key[keep[i]];
        out[sub].merge(cs);
    }
    return out;
}

}  // namespace tvreg
