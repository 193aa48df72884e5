#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <istream>
#include <iostream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "infsup/bounds.hpp"
#include "infsup/constants.hpp"
#include "infsup/errors.hpp"
#include "infsup/fem.hpp"
#include "infsup/geometry.hpp"
#include "infsup/infsup_eig.hpp"
#include "infsup/mesh.hpp"

namespace infsup {

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace csv {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// RFC-4180 field quoting.
inline std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

inline void write_row(std::ostream& os, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) os << ',';
        os << escape(fields[i]);
    }
    os << '\n';
}

/// Splits an RFC-4180 document into rows of unquoted fields.
inline std::vector<std::vector<std::string>> parse(std::istream& is) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    char ch;
    while (is.get(ch)) {
        any = true;
        if (quoted) {
            if (ch == '"') {
                if (is.peek() == '"') {
                    field += '"';
                    is.get();
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (ch == '\n') {
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else if (ch != '\r') {
            field += ch;
        }
    }
    if (quoted) throw InvalidInput("csv: unterminated quoted field");
    if (any) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline double to_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw InvalidInput("csv: not a number: '" + s + "'");
    return v;
}

}  // namespace csv

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

/// One row per (geometry, level).
struct SweepRecord {
    double L = 0.0;
    double H = 0.0;
    double r = 0.0;
    double h = 0.0;
    int level = 0;
    int n_u = 0;
    int n_p = 0;
    double gamma0_h = 0.0;
    double gamma_h_full = 0.0;
    double c1 = 0.0;
    double c2_paper = 0.0;
    double c2_tight = 0.0;
    double c1_h = 0.0;
    double c2_h = 0.0;
    double gamma_lower_analytic = 0.0;
    double gamma_lower_discrete = 0.0;
    double min_margin = 0.0;
    std::uint64_t seed = 0;
    double wall_time_ms = 0.0;

    bool operator==(const SweepRecord&) const = default;
};

inline constexpr std::array<std::string_view, 19> sweep_columns = {
    "L",   "H",        "r",        "h",    "level", "n_u",      "n_p",
    "gamma0_h",        "gamma_h_full",     "c1",    "c2_paper", "c2_tight",
    "c1_h", "c2_h",    "gamma_lower_analytic",      "gamma_lower_discrete",
    "min_margin",      "seed",     "wall_time_ms"};

inline std::vector<std::string> to_fields(const SweepRecord& rec) {
    using csv::format_double;
    return {format_double(rec.L),
            format_double(rec.H),
            format_double(rec.r),
            format_double(rec.h),
            std::to_string(rec.level),
            std::to_string(rec.n_u),
            std::to_string(rec.n_p),
            format_double(rec.gamma0_h),
            format_double(rec.gamma_h_full),
            format_double(rec.c1),
            format_double(rec.c2_paper),
            format_double(rec.c2_tight),
            format_double(rec.c1_h),
            format_double(rec.c2_h),
            format_double(rec.gamma_lower_analytic),
            format_double(rec.gamma_lower_discrete),
            format_double(rec.min_margin),
            std::to_string(rec.seed),
            format_double(rec.wall_time_ms)};
}

inline void write_csv(std::ostream& os, const std::vector<SweepRecord>& records) {
    csv::write_row(os, {sweep_columns.begin(), sweep_columns.end()});
    for (const auto& rec : records) csv::write_row(os, to_fields(rec));
}

inline std::vector<SweepRecord> read_csv(std::istream& is) {
    const auto rows = csv::parse(is);
    if (rows.empty()) throw InvalidInput("csv: missing header");
    if (rows[0] != std::vector<std::string>(sweep_columns.begin(), sweep_columns.end())) {
        throw InvalidInput("csv: header does not match the sweep record columns");
    }
    std::vector<SweepRecord> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& f = rows[i];
        if (f.size() != sweep_columns.size()) throw InvalidInput("csv: wrong field count on row " + std::to_string(i));
        SweepRecord rec;
        std::size_t k = 0;
        auto num = [&] { return csv::to_double(f[k++]); };
        auto integer = [&] { return std::stoll(f[k++]); };
        rec.L = num();
        rec.H = num();
        rec.r = num();
        rec.h = num();
        rec.level = static_cast<int>(integer());
        rec.n_u = static_cast<int>(integer());
        rec.n_p = static_cast<int>(integer());
        rec.gamma0_h = num();
        rec.gamma_h_full = num();
        rec.c1 = num();
        rec.c2_paper = num();
        rec.c2_tight = num();
        rec.c1_h = num();
        rec.c2_h = num();
        rec.gamma_lower_analytic = num();
        rec.gamma_lower_discrete = num();
        rec.min_margin = num();
        rec.seed = std::stoull(f[k++]);
        rec.wall_time_ms = num();
        out.push_back(rec);
    }
    return out;
}

/// Numeric value of a named column; "H/L" is the derived aspect ratio.
inline double column_value(const SweepRecord& rec, std::string_view name) {
    if (name == "H/L") return rec.H / rec.L;
    const auto fields = to_fields(rec);
    for (std::size_t i = 0; i < sweep_columns.size(); ++i)
        if (sweep_columns[i] == name) return csv::to_double(fields[i]);
    throw InvalidInput("unknown column '" + std::string(name) + "'");
}

inline const std::array<std::string_view, 13> sample_columns = {
    "id",      "ratio",      "bound",           "margin",        "p_bar",           "norm_p0", "grad_u0",
    "h1_norm_u0", "ubar_step_slack", "u0_step_slack", "norm_step_slack", "fallback", "seed"};

inline void write_samples_csv(std::ostream& os, const std::vector<SampleVerification>& samples, std::uint64_t seed) {
    csv::write_row(os, {sample_columns.begin(), sample_columns.end()});
    using csv::format_double;
    for (const auto& s : samples) {
        csv::write_row(os, {std::to_string(s.id), format_double(s.ratio), format_double(s.bound),
                            format_double(s.margin), format_double(s.p_bar), format_double(s.norm_p0),
                            format_double(s.grad_u0), format_double(s.h1_norm_u0), format_double(s.ubar_step_slack),
                            format_double(s.u0_step_slack), format_double(s.norm_step_slack),
                            s.fallback ? "1" : "0", std::to_string(seed)});
    }
}

// ---------------------------------------------------------------------------
// Slope fits
// ---------------------------------------------------------------------------

struct SlopeFit {
    std::string x_column;
    std::string y_column;
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    int n_points = 0;
    double max_residual = 0.0;  // largest |log y - fit| over the points
};

/// Least squares on (log x, log y).
inline SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y, std::string x_column = "x",
                          std::string y_column = "y") {
    if (x.size() != y.size()) throw InvalidInput("fit_slope: x and y differ in length");
    const auto n = static_cast<int>(x.size());
    if (n < 3) throw InvalidInput("fit_slope: need at least 3 points, got " + std::to_string(n));
    std::vector<double> lx(n), ly(n);
    for (int i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidInput("fit_slope: data must be positive");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < n; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (!(sxx > 0.0)) throw InvalidInput("fit_slope: x values are all equal");
    SlopeFit fit{std::move(x_column), std::move(y_column)};
    fit.n_points = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (int i = 0; i < n; ++i) {
        const double res = ly[i] - (fit.intercept + fit.slope * lx[i]);
        ss_res += res * res;
        fit.max_residual = std::max(fit.max_residual, std::abs(res));
    }
    fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return fit;
}

inline SlopeFit fit_slope(const std::vector<SweepRecord>& records, std::string_view x_column,
                          std::string_view y_column) {
    std::vector<double> x, y;
    for (const auto& rec : records) {
        x.push_back(column_value(rec, x_column));
        y.push_back(column_value(rec, y_column));
    }
    return fit_slope(x, y, std::string(x_column), std::string(y_column));
}

// ---------------------------------------------------------------------------
// Single runs
// ---------------------------------------------------------------------------

struct RunConfig {
    double L = 1.0;
    double H = 1.0;
    std::optional<double> r;      // default H/2
    std::optional<double> h0;     // coarse mesh size, default H/4
    int levels = 2;               // red refinements of the coarse mesh
    EigOptions eig;
    std::uint64_t seed = 42;
    int samples = 100;
    C2Variant c2_variant = C2Variant::paper;
    bool outflow = true;          // false: every wall is Dirichlet
    bool timing = false;          // false: wall_time_ms is written as 0 for byte-stable output
};

inline DomainSpec domain_of(const RunConfig& cfg) { return make_channel(cfg.L, cfg.H, cfg.r); }

inline Mesh mesh_of(const RunConfig& cfg, int levels) {
    const DomainSpec spec = domain_of(cfg);
    if (levels < 0) throw InvalidInput("levels must be >= 0");
    const auto [nx, ny] = anisotropic_resolution(spec, cfg.h0.value_or(0.25 * cfg.H));
    Mesh mesh = refine(triangulate_channel(spec, nx, ny), levels);
    if (!cfg.outflow) mesh = retag_boundary(mesh, BoundaryTag::dirichlet);
    return mesh;
}

inline Mesh mesh_of(const RunConfig& cfg) { return mesh_of(cfg, cfg.levels); }

inline double mesh_size(const RunConfig& cfg) {
    const DomainSpec spec = domain_of(cfg);
    const auto [nx, ny] = anisotropic_resolution(spec, cfg.h0.value_or(0.25 * cfg.H));
    return std::max(cfg.L / nx, cfg.H / ny) / std::pow(2.0, cfg.levels);
}

namespace detail {

inline std::string describe(const RunConfig& cfg) {
    std::ostringstream os;
    os << "L=" << cfg.L << ", H=" << cfg.H << ", r=" << cfg.r.value_or(0.5 * cfg.H) << ", levels=" << cfg.levels;
    return os.str();
}

/// Runs f, re-raising library errors with the stage name and parameters prepended.
template <typename F>
auto staged(std::string_view stage, const RunConfig& cfg, F&& f) -> decltype(f()) {
    const std::string prefix = "run_single[" + std::string(stage) + "; " + describe(cfg) + "]: ";
    try {
        return f();
    } catch (const NonConvergence& e) {
        throw NonConvergence(prefix + e.what(), e.best_residual());
    } catch (const SingularSystem& e) {
        throw SingularSystem(prefix + e.what());
    } catch (const InvalidInput& e) {
        throw InvalidInput(prefix + e.what());
    }
}

}  // namespace detail

/// mesh -> assembly -> both eigensolves -> constants -> bounds -> sample verification.
inline SweepRecord run_single(const RunConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    const DomainSpec spec = detail::staged("geometry", cfg, [&] { return domain_of(cfg); });
    const Mesh mesh = detail::staged("mesh", cfg, [&] { return mesh_of(cfg); });
    const ProofReplay replay = detail::staged("assembly+eigensolve(zero_mean)", cfg,
                                              [&] { return ProofReplay(mesh, spec, cfg.eig); });
    const InfSupResult full = detail::staged("eigensolve(full)", cfg, [&] {
        return smallest_eigpair(replay.A(), replay.B(), replay.M(), PressureMode::full, cfg.eig);
    });
    if (full.singular) {
        throw SingularSystem("run_single[eigensolve(full); " + detail::describe(cfg) +
                             "]: the pressure Schur complement is singular (constant pressures are in its "
                             "kernel because no outflow boundary exists); use the zero_mean mode");
    }
    const ConstantsReport constants =
        detail::staged("constants", cfg, [&] { return constants_report(spec, ConstantsMethod::analytic); });

    SweepRecord rec;
    rec.L = cfg.L;
    rec.H = cfg.H;
    rec.r = spec.r;
    rec.h = mesh_size(cfg);
    rec.level = mesh.level;
    rec.n_u = replay.mixed().n_u;
    rec.n_p = replay.mixed().n_p;
    rec.gamma0_h = replay.gamma0_h();
    rec.gamma_h_full = full.gamma_h;
    rec.c1 = constants.c1;
    rec.c2_paper = constants.c2_paper;
    rec.c2_tight = constants.c2_tight;
    rec.c1_h = replay.c1_h();
    rec.c2_h = replay.c2_h();
    rec.seed = cfg.seed;
    detail::staged("bounds", cfg, [&] {
        rec.gamma_lower_analytic =
            gamma_lower({replay.gamma0_h(), constants.c1, constants.c2(cfg.c2_variant), 2, spec.area()});
        rec.gamma_lower_discrete = gamma_lower(replay.discrete_inputs());
        rec.min_margin = std::numeric_limits<double>::infinity();
        for (const auto& s : replay.verify_random(cfg.samples, cfg.seed)) rec.min_margin = std::min(rec.min_margin, s.margin);
        if (cfg.samples == 0) rec.min_margin = 0.0;
    });
    if (cfg.timing) {
        rec.wall_time_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    return rec;
}

/// Evaluates f(i) for i in [0, n) on up to `jobs` threads; results keep input order.
template <typename T, typename F>
std::vector<T> parallel_map(std::size_t n, int jobs, F&& f) {
    std::vector<std::optional<T>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                slots[i].emplace(f(i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const auto threads = static_cast<std::size_t>(std::clamp<long>(jobs, 1, static_cast<long>(std::max<std::size_t>(n, 1))));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    std::vector<T> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
        out.push_back(std::move(*slots[i]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct AspectSweep {
    std::vector<SweepRecord> records;
    std::vector<double> gamma0_previous_level;  // Cauchy check partner per record
    SlopeFit gamma0_fit;
    SlopeFit lower_fit;

    /// Largest relative change of gamma0_h between the last two levels.
    double cauchy_deviation() const {
        double worst = 0.0;
        for (std::size_t i = 0; i < records.size(); ++i)
            worst = std::max(worst, std::abs(records[i].gamma0_h - gamma0_previous_level[i]) / records[i].gamma0_h);
        return worst;
    }
};

/// gamma0_h of the zero-trace system on the mesh of `cfg` with `levels` refinements.
inline double zero_trace_gamma(const RunConfig& cfg, int levels) {
    const FESystem fes = build_fesystem(mesh_of(cfg, levels), ConstraintPolicy::all_dirichlet);
    return smallest_eigpair(assemble_gradgrad(fes), assemble_div(fes), assemble_pressure_mass(fes),
                            PressureMode::zero_mean, cfg.eig)
        .gamma_h;
}

/// One run per channel length at fixed height; fits gamma0_h and the analytic
/// lower bound against H/L on log-log axes.
inline AspectSweep run_aspect_sweep(const RunConfig& base, const std::vector<double>& lengths, int jobs = 1) {
    if (lengths.size() < 3) throw InvalidInput("run_aspect_sweep: need at least 3 channel lengths");
    for (std::size_t i = 1; i < lengths.size(); ++i)
        if (!(lengths[i] > lengths[i - 1])) throw InvalidInput("run_aspect_sweep: lengths must be strictly increasing");
    struct Point {
        SweepRecord rec;
        double coarse_gamma0;
    };
    const auto points = parallel_map<Point>(lengths.size(), jobs, [&](std::size_t i) {
        RunConfig cfg = base;
        cfg.L = lengths[i];
        Point pt{run_single(cfg), 0.0};
        pt.coarse_gamma0 = cfg.levels > 0 ? zero_trace_gamma(cfg, cfg.levels - 1) : pt.rec.gamma0_h;
        return pt;
    });
    AspectSweep sweep;
    for (const auto& pt : points) {
        sweep.records.push_back(pt.rec);
        sweep.gamma0_previous_level.push_back(pt.coarse_gamma0);
    }
    sweep.gamma0_fit = fit_slope(sweep.records, "H/L", "gamma0_h");
    sweep.lower_fit = fit_slope(sweep.records, "H/L", "gamma_lower_analytic");
    return sweep;
}

struct RadiusRecord {
    double r;
    double gamma0;
    double c1;
    double c2_paper;
    double c2_tight;
    double min_term;  // c1 / (d c2 |Omega|^{1/2}) before the min{1, .}
    double gamma_lower;
};

struct RadiusSweep {
    std::vector<RadiusRecord> records;
    SlopeFit fit;  // restricted to rows with min_term < 1
};

/// Analytic-constants sweep over the outflow radius for the 3D ball of diameter one.
inline RadiusSweep run_radius_sweep(const std::vector<double>& radii, double gamma0,
                                    C2Variant variant = C2Variant::tight) {
    if (radii.size() < 3) throw InvalidInput("run_radius_sweep: need at least 3 radii");
    if (!(gamma0 > 0.0)) throw InvalidInput("run_radius_sweep: gamma0 must be positive");
    RadiusSweep sweep;
    std::vector<double> x, y;
    for (double r : radii) {
        const DomainSpec spec = make_ball(r);
        const ConstantsReport c = constants_report(spec, ConstantsMethod::analytic);
        const BoundInputs in{gamma0, c.c1, c.c2(variant), 3, spec.area()};
        const RadiusRecord rec{r,          gamma0, c.c1, c.c2_paper, c.c2_tight,
                               c.c1 / (3.0 * c.c2(variant) * std::sqrt(spec.area())), gamma_lower(in)};
        sweep.records.push_back(rec);
        if (rec.min_term < 1.0) {
            x.push_back(r);
            y.push_back(rec.gamma_lower);
        }
    }
    sweep.fit = fit_slope(x, y, "r", "gamma_lower");
    return sweep;
}

inline void write_radius_csv(std::ostream& os, const std::vector<RadiusRecord>& records) {
    csv::write_row(os, {"r", "gamma0", "c1", "c2_paper", "c2_tight", "min_term", "gamma_lower"});
    using csv::format_double;
    for (const auto& rec : records) {
        csv::write_row(os, {format_double(rec.r), format_double(rec.gamma0), format_double(rec.c1),
                            format_double(rec.c2_paper), format_double(rec.c2_tight), format_double(rec.min_term),
                            format_double(rec.gamma_lower)});
    }
}

}  // namespace infsup
