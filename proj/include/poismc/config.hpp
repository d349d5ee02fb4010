#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "poismc/csv.hpp"
#include "poismc/errors.hpp"
#include "poismc/kernel.hpp"
#include "poismc/models.hpp"
#include "poismc/split.hpp"

namespace poismc {

struct GridSpec {
    double lo = 0.0;
    double hi = 10.0;
    int points = 201;

    std::vector<double> make() const {
        if (points < 2 || hi <= lo) throw ConfigError("grid: need hi > lo and points >= 2");
        std::vector<double> g(static_cast<std::size_t>(points));
        for (int i = 0; i < points; ++i) {
            g[static_cast<std::size_t>(i)] =
                lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
        }
        return g;
    }

    std::string str() const {
        return csv_value(lo) + ":" + csv_value(hi) + ":" + std::to_string(points);
    }
};

struct ModelSection {
    std::string family = "birth_death";
    // lindley
    double lambda = 0.5;
    double mu = 1.0;
    // birth_death / lindley_discrete
    double p = 0.3;
    int truncation = 20;
    int up = 1;
    int down = 1;
    // reflected_ar1
    double a = 0.5;
    double noise_mean = -0.5;
    double noise_sd = 1.0;
    // matrix
    std::vector<std::vector<double>> rows;
    std::optional<bool> monotone;
};

struct RewardSection {
    std::string form = "identity";
    double scale = 1.0;
    double offset = 0.0;
    int exponent = 2;
    double threshold = 1.0;
    double cap = 1.0;
    double value = 0.0;
    std::optional<bool> monotone;
    std::optional<double> lipschitz_root;
};

struct SplitSection {
    bool present = false;
    double b = 2.0;
    std::optional<double> lambda;  // nullopt = auto (0.95 * maximal mass)
    std::string phi = "maximal";
    double v1_drift = 0.3;  // v1(x) = x / v1_drift
    double v2_quad = 0.5;   // v2(x) = v2_quad x^2 + v2_lin x
    double v2_lin = 8.0;
    long cycle_cap = 10'000'000;
};

struct SolverSection {
    std::string method = "linear";
    int anchor = 0;
    double tol = 1e-10;
    int max_terms = 10000;
    GridSpec grid;
    // Central check tolerances; defaults match Tolerances{}.
    double mass_tol = 1e-12;
    double fixed_point_tol = 1e-10;
    double monotone_slack = 1e-12;
    double residual_tol = 1e-8;
};

/// Full run configuration; schema-validated on parse, unknown keys rejected.
struct RunConfig {
    ModelSection model;
    RewardSection reward;
    SplitSection split;
    SolverSection solver;
    std::uint64_t seed = 12345;
    std::string output_path;

    Tolerances tolerances() const {
        Tolerances t;
        t.mass_tol = solver.mass_tol;
        t.fixed_point_tol = solver.fixed_point_tol;
        t.monotone_slack = solver.monotone_slack;
        t.residual_tol = solver.residual_tol;
        return t;
    }
};

// ---------------------------------------------------------------------------
// Parsing.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& v, const std::string& where) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("invalid number '" + v + "' at " + where);
    }
}

inline long parse_long(const std::string& v, const std::string& where) {
    try {
        std::size_t used = 0;
        const long d = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("invalid integer '" + v + "' at " + where);
    }
}

inline bool parse_bool(const std::string& v, const std::string& where) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("invalid boolean '" + v + "' at " + where);
}

inline GridSpec parse_grid(const std::string& v, const std::string& where) {
    GridSpec g;
    const auto c1 = v.find(':');
    const auto c2 = v.find(':', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
        throw ConfigError("grid must be lo:hi:points at " + where);
    }
    g.lo = parse_double(v.substr(0, c1), where);
    g.hi = parse_double(v.substr(c1 + 1, c2 - c1 - 1), where);
    g.points = static_cast<int>(parse_long(v.substr(c2 + 1), where));
    if (g.points < 2 || g.hi <= g.lo) throw ConfigError("grid: need hi > lo, points >= 2 at " + where);
    return g;
}

inline std::vector<std::vector<double>> parse_matrix_rows(const std::string& v,
                                                          const std::string& where) {
    std::vector<std::vector<double>> rows;
    std::stringstream row_stream(v);
    std::string row_text;
    while (std::getline(row_stream, row_text, ';')) {
        std::vector<double> row;
        std::stringstream cell_stream(row_text);
        std::string cell;
        while (cell_stream >> cell) row.push_back(parse_double(cell, where));
        if (!row.empty()) rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ConfigError("rows: no entries at " + where);
    for (const auto& row : rows) {
        if (row.size() != rows.size()) {
            throw ConfigError("rows: matrix must be square at " + where);
        }
    }
    return rows;
}

}  // namespace detail

/// Parses the structured-text configuration. Sections and keys outside the
/// schema, malformed values, and invalid combinations raise ConfigError with
/// the offending location.
inline RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    std::map<std::string, int> seen;

    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError("unterminated section at line " +
                                                   std::to_string(line_no));
            section = t.substr(1, t.size() - 2);
            if (section != "model" && section != "reward" && section != "split" &&
                section != "solver" && section != "rng" && section != "output") {
                throw ConfigError("unknown section '" + section + "' at line " +
                                  std::to_string(line_no));
            }
            if (section == "split") cfg.split.present = true;
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("expected key = value at line " + std::to_string(line_no));
        }
        if (section.empty()) {
            throw ConfigError("key outside any section at line " + std::to_string(line_no));
        }
        const std::string key = detail::trim(t.substr(0, eq));
        const std::string value = detail::trim(t.substr(eq + 1));
        const std::string where = section + "." + key;
        if (++seen[where] > 1) {
            throw ConfigError("duplicate key " + where + " at line " + std::to_string(line_no));
        }

        if (section == "model") {
            if (key == "family") cfg.model.family = value;
            else if (key == "lambda") cfg.model.lambda = detail::parse_double(value, where);
            else if (key == "mu") cfg.model.mu = detail::parse_double(value, where);
            else if (key == "p") cfg.model.p = detail::parse_double(value, where);
            else if (key == "truncation") cfg.model.truncation = static_cast<int>(detail::parse_long(value, where));
            else if (key == "up") cfg.model.up = static_cast<int>(detail::parse_long(value, where));
            else if (key == "down") cfg.model.down = static_cast<int>(detail::parse_long(value, where));
            else if (key == "a") cfg.model.a = detail::parse_double(value, where);
            else if (key == "noise_mean") cfg.model.noise_mean = detail::parse_double(value, where);
            else if (key == "noise_sd") cfg.model.noise_sd = detail::parse_double(value, where);
            else if (key == "rows") cfg.model.rows = detail::parse_matrix_rows(value, where);
            else if (key == "monotone") cfg.model.monotone = detail::parse_bool(value, where);
            else throw ConfigError("unknown key " + where);
        } else if (section == "reward") {
            if (key == "form") cfg.reward.form = value;
            else if (key == "scale") cfg.reward.scale = detail::parse_double(value, where);
            else if (key == "offset") cfg.reward.offset = detail::parse_double(value, where);
            else if (key == "exponent") cfg.reward.exponent = static_cast<int>(detail::parse_long(value, where));
            else if (key == "threshold") cfg.reward.threshold = detail::parse_double(value, where);
            else if (key == "cap") cfg.reward.cap = detail::parse_double(value, where);
            else if (key == "value") cfg.reward.value = detail::parse_double(value, where);
            else if (key == "monotone") cfg.reward.monotone = detail::parse_bool(value, where);
            else if (key == "lipschitz_root") cfg.reward.lipschitz_root = detail::parse_double(value, where);
            else throw ConfigError("unknown key " + where);
        } else if (section == "split") {
            if (key == "b") cfg.split.b = detail::parse_double(value, where);
            else if (key == "lambda") {
                if (value == "auto") cfg.split.lambda.reset();
                else cfg.split.lambda = detail::parse_double(value, where);
            } else if (key == "phi") cfg.split.phi = value;
            else if (key == "v1_drift") cfg.split.v1_drift = detail::parse_double(value, where);
            else if (key == "v2_quad") cfg.split.v2_quad = detail::parse_double(value, where);
            else if (key == "v2_lin") cfg.split.v2_lin = detail::parse_double(value, where);
            else if (key == "cycle_cap") cfg.split.cycle_cap = detail::parse_long(value, where);
            else throw ConfigError("unknown key " + where);
        } else if (section == "solver") {
            if (key == "method") cfg.solver.method = value;
            else if (key == "anchor") cfg.solver.anchor = static_cast<int>(detail::parse_long(value, where));
            else if (key == "tol") cfg.solver.tol = detail::parse_double(value, where);
            else if (key == "max_terms") cfg.solver.max_terms = static_cast<int>(detail::parse_long(value, where));
            else if (key == "grid") cfg.solver.grid = detail::parse_grid(value, where);
            else if (key == "mass_tol") cfg.solver.mass_tol = detail::parse_double(value, where);
            else if (key == "fixed_point_tol") cfg.solver.fixed_point_tol = detail::parse_double(value, where);
            else if (key == "monotone_slack") cfg.solver.monotone_slack = detail::parse_double(value, where);
            else if (key == "residual_tol") cfg.solver.residual_tol = detail::parse_double(value, where);
            else throw ConfigError("unknown key " + where);
        } else if (section == "rng") {
            if (key == "seed") cfg.seed = static_cast<std::uint64_t>(detail::parse_long(value, where));
            else throw ConfigError("unknown key " + where);
        } else if (section == "output") {
            if (key == "path") cfg.output_path = value;
            else throw ConfigError("unknown key " + where);
        }
    }

    // Cross-field validation.
    const auto& fam = cfg.model.family;
    if (fam != "lindley" && fam != "lindley_discrete" && fam != "birth_death" &&
        fam != "reflected_ar1" && fam != "matrix") {
        throw ConfigError("unknown model family '" + fam + "' at model.family");
    }
    const auto& form = cfg.reward.form;
    if (form != "identity" && form != "affine" && form != "power" && form != "indicator" &&
        form != "capped" && form != "constant") {
        throw ConfigError("unknown reward form '" + form + "' at reward.form");
    }
    if (cfg.split.present) {
        if (cfg.split.lambda && !(*cfg.split.lambda > 0.0 && *cfg.split.lambda <= 1.0)) {
            throw ConfigError("split.lambda must lie in (0,1] or be 'auto' at split.lambda");
        }
        if (cfg.split.b < 0.0) throw ConfigError("split.b must be >= 0 at split.b");
        if (cfg.split.phi != "maximal") {
            throw ConfigError("unknown phi construction '" + cfg.split.phi + "' at split.phi");
        }
        if (cfg.split.v1_drift <= 0.0) throw ConfigError("split.v1_drift must be > 0");
    }
    if (cfg.solver.method != "linear" && cfg.solver.method != "regenerative" &&
        cfg.solver.method != "series") {
        throw ConfigError("unknown solver method '" + cfg.solver.method + "' at solver.method");
    }
    if (fam == "matrix" && cfg.model.rows.empty()) {
        throw ConfigError("matrix family requires model.rows");
    }
    return cfg;
}

/// Canonical serialization: fixed section and key order, family-relevant keys
/// only. parse(serialize(parse(text))) == parse(text).
inline std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    out << "[model]\n";
    out << "family = " << cfg.model.family << "\n";
    const auto& m = cfg.model;
    if (m.family == "lindley") {
        out << "lambda = " << csv_value(m.lambda) << "\n";
        out << "mu = " << csv_value(m.mu) << "\n";
    } else if (m.family == "birth_death") {
        out << "p = " << csv_value(m.p) << "\n";
        out << "truncation = " << m.truncation << "\n";
    } else if (m.family == "lindley_discrete") {
        out << "p = " << csv_value(m.p) << "\n";
        out << "up = " << m.up << "\n";
        out << "down = " << m.down << "\n";
        out << "truncation = " << m.truncation << "\n";
    } else if (m.family == "reflected_ar1") {
        out << "a = " << csv_value(m.a) << "\n";
        out << "noise_mean = " << csv_value(m.noise_mean) << "\n";
        out << "noise_sd = " << csv_value(m.noise_sd) << "\n";
    } else if (m.family == "matrix") {
        out << "rows = ";
        for (std::size_t i = 0; i < m.rows.size(); ++i) {
            if (i > 0) out << " ; ";
            for (std::size_t j = 0; j < m.rows[i].size(); ++j) {
                if (j > 0) out << " ";
                out << csv_value(m.rows[i][j]);
            }
        }
        out << "\n";
        if (m.monotone) out << "monotone = " << (*m.monotone ? "true" : "false") << "\n";
    }

    out << "\n[reward]\n";
    const auto& r = cfg.reward;
    out << "form = " << r.form << "\n";
    if (r.form == "affine") {
        out << "scale = " << csv_value(r.scale) << "\n";
        out << "offset = " << csv_value(r.offset) << "\n";
    } else if (r.form == "power") {
        out << "exponent = " << r.exponent << "\n";
    } else if (r.form == "indicator") {
        out << "threshold = " << csv_value(r.threshold) << "\n";
    } else if (r.form == "capped") {
        out << "cap = " << csv_value(r.cap) << "\n";
    } else if (r.form == "constant") {
        out << "value = " << csv_value(r.value) << "\n";
    }
    if (r.monotone) out << "monotone = " << (*r.monotone ? "true" : "false") << "\n";
    if (r.lipschitz_root) out << "lipschitz_root = " << csv_value(*r.lipschitz_root) << "\n";

    if (cfg.split.present) {
        out << "\n[split]\n";
        const auto& s = cfg.split;
        out << "b = " << csv_value(s.b) << "\n";
        out << "lambda = " << (s.lambda ? csv_value(*s.lambda) : std::string("auto")) << "\n";
        out << "phi = " << s.phi << "\n";
        out << "v1_drift = " << csv_value(s.v1_drift) << "\n";
        out << "v2_quad = " << csv_value(s.v2_quad) << "\n";
        out << "v2_lin = " << csv_value(s.v2_lin) << "\n";
        out << "cycle_cap = " << s.cycle_cap << "\n";
    }

    out << "\n[solver]\n";
    out << "method = " << cfg.solver.method << "\n";
    out << "anchor = " << cfg.solver.anchor << "\n";
    out << "tol = " << csv_value(cfg.solver.tol) << "\n";
    out << "max_terms = " << cfg.solver.max_terms << "\n";
    out << "grid = " << cfg.solver.grid.str() << "\n";
    out << "mass_tol = " << csv_value(cfg.solver.mass_tol) << "\n";
    out << "fixed_point_tol = " << csv_value(cfg.solver.fixed_point_tol) << "\n";
    out << "monotone_slack = " << csv_value(cfg.solver.monotone_slack) << "\n";
    out << "residual_tol = " << csv_value(cfg.solver.residual_tol) << "\n";

    out << "\n[rng]\n";
    out << "seed = " << cfg.seed << "\n";

    if (!cfg.output_path.empty()) {
        out << "\n[output]\n";
        out << "path = " << cfg.output_path << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Construction from a parsed configuration.
// ---------------------------------------------------------------------------

inline MonotoneKernel build_kernel(const RunConfig& cfg) {
    const auto& m = cfg.model;
    if (m.family == "lindley") return build_lindley(m.lambda, m.mu);
    if (m.family == "birth_death") return build_birth_death(m.p, m.truncation);
    if (m.family == "lindley_discrete") {
        return build_lindley_discrete(m.p, m.up, m.down, m.truncation);
    }
    if (m.family == "reflected_ar1") {
        return build_reflected_ar1(m.a, m.noise_mean, m.noise_sd);
    }
    // matrix
    const auto n = static_cast<Eigen::Index>(m.rows.size());
    Eigen::MatrixXd P(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            P(i, j) = m.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    return build_matrix_kernel(std::move(P), m.monotone.value_or(false));
}

inline RewardFunction build_reward(const RunConfig& cfg) {
    const auto& r = cfg.reward;
    RewardFunction out;
    if (r.form == "identity") out = reward_identity();
    else if (r.form == "affine") out = reward_affine(r.scale, r.offset);
    else if (r.form == "power") out = reward_power(r.exponent);
    else if (r.form == "indicator") out = reward_indicator(r.threshold);
    else if (r.form == "capped") out = reward_capped(r.cap);
    else out = reward_constant(r.value);
    if (r.monotone) out.monotone = *r.monotone;
    if (r.lipschitz_root) out.lipschitz_root = *r.lipschitz_root;
    return out;
}

/// Builds the split configuration for the configured model. The 'maximal'
/// phi is the normalized infimum of the one-step laws over the small set;
/// lambda 'auto' resolves to 0.95 times the full minorization mass.
inline SplitConfig build_split(const RunConfig& cfg, const MonotoneKernel& k) {
    if (!cfg.split.present) throw ConfigError("config has no [split] section");
    const auto& s = cfg.split;

    SplitConfig out;
    out.b = s.b;
    out.cycle_cap = s.cycle_cap;
    const double d1 = s.v1_drift;
    const double q2 = s.v2_quad, l2 = s.v2_lin;
    out.v1 = [d1](double x) { return x / d1; };
    out.v2 = [q2, l2](double x) { return q2 * x * x + l2 * x; };

    double lambda_max = 0.0;
    if (k.is_discrete()) {
        out.phi = discrete_minorization_measure(k, static_cast<int>(std::floor(s.b + 1e-9)),
                                                &lambda_max);
    } else if (cfg.model.family == "lindley") {
        out.phi = mm1_minorization_measure(cfg.model.lambda, cfg.model.mu, s.b, &lambda_max);
    } else {
        throw ConfigError("split.phi = maximal supports lindley and discrete families only");
    }
    out.lambda = s.lambda.value_or(0.95 * lambda_max);
    if (out.lambda > lambda_max + 1e-12) {
        throw ConfigError("split.lambda exceeds the available minorization mass " +
                          csv_value(lambda_max));
    }
    return out;
}

}  // namespace poismc
