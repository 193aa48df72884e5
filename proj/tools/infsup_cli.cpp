// Command-line driver: single runs, constants, the explicit bound, sweeps and
// per-sample replay of the constructive inf-sup argument.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "infsup/infsup.hpp"

namespace {

using namespace infsup;

enum ExitCode { ok = 0, invalid_input = 1, no_convergence = 2, assertion_failed = 3 };

struct Common {
    double L = 1.0;
    double H = 1.0;
    std::optional<double> r;
    std::optional<double> h0;
    int levels = 2;
    double tol = 1e-10;
    int max_iter = 500;
    std::uint64_t seed = 42;
    std::optional<std::uint64_t> start_seed;
    int jobs = 1;
    int samples = 100;
    std::string csv;
    std::string c2_variant = "paper";
    std::string mesh_dump;
    std::string matrix_dump;
    bool timing = false;
    bool no_outflow = false;

    RunConfig config() const {
        RunConfig cfg;
        cfg.L = L;
        cfg.H = H;
        cfg.r = r;
        cfg.h0 = h0;
        cfg.levels = levels;
        cfg.eig.tol = tol;
        cfg.eig.max_iter = max_iter;
        cfg.eig.seed = start_seed;
        cfg.seed = seed;
        cfg.samples = samples;
        cfg.c2_variant = c2_variant == "tight" ? C2Variant::tight : C2Variant::paper;
        cfg.timing = timing;
        cfg.outflow = !no_outflow;
        return cfg;
    }
};

void add_geometry(CLI::App* cmd, Common& c) {
    cmd->add_option("--L", c.L, "channel length")->check(CLI::PositiveNumber);
    cmd->add_option("--H", c.H, "channel height")->check(CLI::PositiveNumber);
    cmd->add_option("--r", c.r, "probe radius (default H/2)");
}

void add_solver(CLI::App* cmd, Common& c) {
    cmd->add_option("--levels", c.levels, "red refinements of the coarse mesh")->check(CLI::NonNegativeNumber);
    cmd->add_option("--h0", c.h0, "coarse mesh size (default H/4)");
    cmd->add_option("--tol", c.tol, "eigenvalue tolerance");
    cmd->add_option("--max-iter", c.max_iter, "Lanczos iteration budget");
    cmd->add_option("--seed", c.seed, "seed for random pressure samples");
    cmd->add_option("--start-seed", c.start_seed, "random Lanczos start vector instead of the fixed pattern");
    cmd->add_option("--samples", c.samples, "random pressures for the proof replay");
    cmd->add_option("--c2-variant", c.c2_variant, "c2 used in the analytic bound")
        ->check(CLI::IsMember({"paper", "tight"}));
    cmd->add_flag("--timing", c.timing, "fill wall_time_ms (output is then not byte-stable)");
}

void add_output(CLI::App* cmd, Common& c) {
    cmd->add_option("--csv", c.csv, "write CSV here instead of stdout");
    cmd->add_option("--jobs", c.jobs, "concurrent sweep points")->check(CLI::PositiveNumber);
}

/// Opens --csv or falls back to stdout.
class Output {
 public:
    explicit Output(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
            if (!*file_) throw InvalidInput("cannot open " + path);
        }
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
    std::unique_ptr<std::ofstream> file_;
};

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (!item.empty()) out.push_back(csv::to_double(item));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

void print_fit(std::ostream& os, const SlopeFit& fit) {
    os << "fit " << fit.y_column << " vs " << fit.x_column << ": slope=" << csv::format_double(fit.slope)
       << " intercept=" << csv::format_double(fit.intercept) << " r2=" << csv::format_double(fit.r_squared)
       << " n=" << fit.n_points << '\n';
}

void dump_mesh(const std::string& path, const Mesh& mesh) {
    if (path.empty()) return;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidInput("cannot open " + path);
    write_mesh(os, mesh);
}

void dump_matrices(const std::string& prefix, const ProofReplay& replay) {
    if (prefix.empty()) return;
    const std::pair<const char*, const SparseMatrix*> mats[] = {
        {"_A.txt", &replay.A()}, {"_B.txt", &replay.B()}, {"_Mp.txt", &replay.M()}};
    for (const auto& [suffix, m] : mats) {
        std::ofstream os(prefix + suffix, std::ios::binary);
        if (!os) throw InvalidInput("cannot open " + prefix + suffix);
        write_coordinate(os, *m);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Discrete inf-sup constants for Stokes with an outflow boundary"};
    app.require_subcommand(1);
    Common c;

    auto* infsup_cmd = app.add_subcommand("infsup", "single configuration: both eigensolves, constants, bound");
    add_geometry(infsup_cmd, c);
    add_solver(infsup_cmd, c);
    add_output(infsup_cmd, c);
    infsup_cmd->add_option("--mesh-dump", c.mesh_dump, "write the mesh in plain text");
    infsup_cmd->add_option("--matrix-dump", c.matrix_dump, "prefix for coordinate dumps of A, B, M_p");
    infsup_cmd->add_flag("--no-outflow", c.no_outflow, "tag the outflow edge Dirichlet as well");

    auto* constants_cmd = app.add_subcommand("constants", "c1, c2 of the half-ball field");
    int dim = 2;
    std::string method = "analytic";
    add_geometry(constants_cmd, c);
    constants_cmd->add_option("--dim", dim, "2 (channel) or 3 (ball of diameter one)")->check(CLI::IsMember({2, 3}));
    constants_cmd->add_option("--method", method, "analytic or quadrature")
        ->check(CLI::IsMember({"analytic", "quadrature"}));
    add_output(constants_cmd, c);

    auto* bound_cmd = app.add_subcommand("bound", "explicit lower bound from given constants");
    BoundInputs bound_in{0.0, 0.0, 0.0, 2, 0.0};
    bound_cmd->add_option("--gamma0", bound_in.gamma0)->required();
    bound_cmd->add_option("--c1", bound_in.c1)->required();
    bound_cmd->add_option("--c2", bound_in.c2)->required();
    bound_cmd->add_option("--dim", bound_in.d)->check(CLI::PositiveNumber);
    bound_cmd->add_option("--area", bound_in.area)->required();

    auto* aspect_cmd = app.add_subcommand("sweep-aspect", "gamma0_h and bounds over channel lengths at fixed H");
    std::string lengths = "1,2,4,8,16";
    add_geometry(aspect_cmd, c);
    add_solver(aspect_cmd, c);
    add_output(aspect_cmd, c);
    aspect_cmd->add_option("--L-list", lengths, "comma-separated, strictly increasing");

    auto* radius_cmd = app.add_subcommand("sweep-radius", "3D analytic bound over outflow radii");
    std::string radii = "0.05,0.1,0.2,0.4,0.8";
    double gamma0 = 0.0;
    radius_cmd->add_option("--r-list", radii, "comma-separated radii in (0,1)");
    radius_cmd->add_option("--gamma0", gamma0, "fixed gamma0")->required();
    std::string radius_variant = "tight";
    radius_cmd->add_option("--c2-variant", radius_variant, "tight gives the exact power law")
        ->check(CLI::IsMember({"paper", "tight"}));
    add_output(radius_cmd, c);

    auto* verify_cmd = app.add_subcommand("verify", "replay the constructive argument on random pressures");
    add_geometry(verify_cmd, c);
    add_solver(verify_cmd, c);
    add_output(verify_cmd, c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : invalid_input;
    }

    try {
        if (*infsup_cmd) {
            const RunConfig cfg = c.config();
            const SweepRecord rec = run_single(cfg);
            dump_mesh(c.mesh_dump, mesh_of(cfg));
            if (!c.matrix_dump.empty()) {
                const ProofReplay replay(mesh_of(cfg), domain_of(cfg), cfg.eig, rec.gamma0_h);
                dump_matrices(c.matrix_dump, replay);
            }
            Output out(c.csv);
            write_csv(out.stream(), {rec});
        } else if (*constants_cmd) {
            const DomainSpec spec = dim == 3 ? make_ball(c.r.value_or(0.5)) : make_channel(c.L, c.H, c.r);
            const auto rep = constants_report(spec, method == "analytic" ? ConstantsMethod::analytic
                                                                         : ConstantsMethod::quadrature);
            Output out(c.csv);
            csv::write_row(out.stream(), {"c1", "c2_paper", "c2_tight", "area", "dim", "r", "method"});
            csv::write_row(out.stream(), {csv::format_double(rep.c1), csv::format_double(rep.c2_paper),
                                          csv::format_double(rep.c2_tight), csv::format_double(rep.area),
                                          std::to_string(rep.dim), csv::format_double(rep.r),
                                          std::string(to_string(rep.method))});
        } else if (*bound_cmd) {
            std::cout << csv::format_double(gamma_lower(bound_in)) << '\n';
        } else if (*aspect_cmd) {
            const AspectSweep sweep = run_aspect_sweep(c.config(), parse_list(lengths), c.jobs);
            Output out(c.csv);
            write_csv(out.stream(), sweep.records);
            print_fit(std::cerr, sweep.gamma0_fit);
            print_fit(std::cerr, sweep.lower_fit);
            std::cerr << "cauchy deviation of gamma0_h between the last two levels: "
                      << csv::format_double(sweep.cauchy_deviation()) << '\n';
            if (sweep.cauchy_deviation() > 0.01) std::cerr << "warning: gamma0_h not converged to 1%\n";
        } else if (*radius_cmd) {
            const C2Variant variant = radius_variant == "paper" ? C2Variant::paper : C2Variant::tight;
            const RadiusSweep sweep = run_radius_sweep(parse_list(radii), gamma0, variant);
            Output out(c.csv);
            write_radius_csv(out.stream(), sweep.records);
            print_fit(std::cerr, sweep.fit);
        } else if (*verify_cmd) {
            const RunConfig cfg = c.config();
            const ProofReplay replay(mesh_of(cfg), domain_of(cfg), cfg.eig);
            const auto samples = replay.verify_random(cfg.samples, cfg.seed);
            Output out(c.csv);
            write_samples_csv(out.stream(), samples, cfg.seed);
            int failures = 0;
            for (const auto& s : samples) {
                const bool chain_ok = s.ubar_step_slack >= -1e-12 && s.u0_step_slack >= -1e-12 &&
                                      s.norm_step_slack >= -1e-12;
                if (s.margin < -1e-12 || !chain_ok) ++failures;
            }
            std::cerr << samples.size() - failures << "/" << samples.size() << " samples satisfy the bound\n";
            if (failures > 0) return assertion_failed;
        }
    } catch (const NonConvergence& e) {
        std::cerr << "error: " << e.what() << '\n';
        return no_convergence;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return invalid_input;
    }
    return ok;
}
