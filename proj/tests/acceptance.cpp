// Acceptance suite: one PASS/FAIL line per criterion, diagnostics indented below.
// Exit status is nonzero when any criterion fails.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "infsup/infsup.hpp"

using namespace infsup;

namespace {

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void check(bool ok, const std::string& what) {
        if (!ok) pass = false;
        notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    }
    void note(const std::string& what) { notes.push_back("     " + what); }
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct Pencil {
    FESystem fes;
    SparseMatrix A, B, M;
};

Pencil pencil(const Mesh& mesh, ConstraintPolicy policy) {
    FESystem fes = build_fesystem(mesh, policy);
    SparseMatrix A = assemble_gradgrad(fes), B = assemble_div(fes), M = assemble_pressure_mass(fes);
    return {std::move(fes), std::move(A), std::move(B), std::move(M)};
}

Mesh channel(double L, double H, double h0, int levels) {
    const DomainSpec spec = make_channel(L, H);
    const auto [nx, ny] = anisotropic_resolution(spec, h0);
    return refine(triangulate_channel(spec, nx, ny), levels);
}

Outcome oracle_equivalence() {
    Outcome out;
    double worst = 0.0;
    int count = 0;
    for (double L : {1.0, 2.0, 4.0}) {
        for (double h0 : {0.5, 0.25}) {
            for (int level = 0; level <= 2; ++level) {
                const Mesh mesh = channel(L, 1.0, h0, level);
                if (mesh.vertices.size() > 300) continue;
                const Pencil mixed = pencil(mesh, ConstraintPolicy::from_tags);
                const Pencil closed = pencil(mesh, ConstraintPolicy::all_dirichlet);
                const std::array<std::pair<const Pencil*, PressureMode>, 3> cases{
                    {{&mixed, PressureMode::full}, {&mixed, PressureMode::zero_mean}, {&closed, PressureMode::zero_mean}}};
                for (const auto& [p, mode] : cases) {
                    const double dense = std::sqrt(dense_oracle(p->A, p->B, p->M, mode)[0]);
                    const double iter = smallest_eigpair(p->A, p->B, p->M, mode).gamma_h;
                    worst = std::max(worst, std::abs(dense - iter));
                    ++count;
                }
            }
        }
    }
    out.check(worst <= 1e-8, fmt("%d solves with n_p <= 300, max |gamma_dense - gamma_lanczos| = %.3e", count, worst));
    return out;
}

Outcome kernel_dichotomy() {
    Outcome out;
    for (int level = 0; level <= 2; ++level) {
        const Pencil p = pencil(retag_boundary(channel(1.0, 1.0, 0.25, level), BoundaryTag::dirichlet),
                                ConstraintPolicy::from_tags);
        const auto res = smallest_eigpair(p.A, p.B, p.M, PressureMode::full);
        out.check(res.singular && res.lambda_min == 0.0, fmt("closed square, level %d: zero eigenvalue flagged", level));
    }
    // A single coarse Neumann edge anywhere on the boundary.
    const Mesh coarse = retag_boundary(channel(2.0, 1.0, 0.5, 0), BoundaryTag::dirichlet);
    for (std::size_t e : {std::size_t{0}, std::size_t{5}, coarse.boundary_edges.size() - 1}) {
        Mesh base = coarse;
        base.boundary_edges[e].tag = BoundaryTag::neumann;
        double smallest = 1.0;
        for (int level = 0; level <= 3; ++level) {
            const Pencil p = pencil(refine(base, level), ConstraintPolicy::from_tags);
            const auto res = smallest_eigpair(p.A, p.B, p.M, PressureMode::full);
            smallest = std::min(smallest, res.singular ? 0.0 : res.gamma_h);
        }
        out.check(smallest > 0.0, fmt("one Neumann edge (#%zu), levels 0-3: min gamma_h = %.6f", e, smallest));
    }
    return out;
}

Outcome gauss_identity() {
    Outcome out;
    const DomainSpec spec = make_channel(2.0, 1.0, 0.5);
    const std::array<int, 6> ny{3, 5, 9, 17, 33, 65};
    const auto study = gauss_refinement_study(spec, ny);
    bool monotone = true;
    for (std::size_t i = 0; i < study.size(); ++i) {
        out.note(fmt("ny=%2d h=1/%d  flux=%.15f  error=%.3e", ny[i], ny[i], study[i].discrete_flux, study[i].error));
        if (i > 0 && !(study[i].error < study[i - 1].error)) monotone = false;
    }
    out.check(monotone, fmt("error decreases monotonically over %zu refinements", study.size() - 1));
    out.check(study.back().error <= 1e-3 && 1.0 / ny.back() <= 1.0 / 64.0,
              fmt("final error %.3e <= 1e-3 at h = 1/%d", study.back().error, ny.back()));
    double red = 0.0;
    for (int level = 0; level <= 3; ++level)
        red = std::max(red, check_gauss(build_fesystem(refine(triangulate_channel(spec, 4, 2), level)), spec).error);
    out.note(fmt("red refinement of the 4x2 mesh (x0 is a vertex): max error %.1e", red));
    return out;
}

Outcome constants_cross_check() {
    Outcome out;
    double worst = 0.0;
    bool ordered = true;
    for (double r : {0.1, 0.25, 0.5}) {
        for (const DomainSpec& spec : {make_channel(2.0, 1.0, r), make_ball(r)}) {
            const auto a = constants_report(spec, ConstantsMethod::analytic);
            const auto q = constants_report(spec, ConstantsMethod::quadrature);
            worst = std::max({worst, std::abs(a.c1 - q.c1), std::abs(a.c2_tight - q.c2_tight),
                              std::abs(a.c2_paper - q.c2_paper)});
            ordered = ordered && a.c2_tight <= a.c2_paper && q.c2_tight <= q.c2_paper;
        }
    }
    out.check(worst <= 1e-10, fmt("max |analytic - quadrature| over c1, c2 = %.3e", worst));
    out.check(ordered, "c2_tight <= c2_paper for every r and dim");
    return out;
}

Outcome bound_validity() {
    Outcome out;
    struct Config {
        double L, H, r;
        int levels;
    };
    const std::array<Config, 7> configs{{{1, 1, 0.5, 1},
                                         {2, 1, 0.5, 1},
                                         {4, 1, 0.5, 1},
                                         {2, 1, 0.25, 1},
                                         {3, 1, 0.4, 1},
                                         {1, 2, 0.7, 1},
                                         {2, 1, 0.5, 2}}};
    for (const auto& c : configs) {
        RunConfig cfg;
        cfg.L = c.L;
        cfg.H = c.H;
        cfg.r = c.r;
        cfg.levels = c.levels;
        const ProofReplay replay(mesh_of(cfg), domain_of(cfg));
        const auto full = smallest_eigpair(replay.A(), replay.B(), replay.M(), PressureMode::full);
        const auto samples = replay.verify_random(100, 42);
        double margin = 1e300, slack = 1e300;
        for (const auto& s : samples) {
            margin = std::min(margin, s.margin);
            slack = std::min({slack, s.ubar_step_slack, s.u0_step_slack, s.norm_step_slack});
        }
        const double lower = gamma_lower(replay.discrete_inputs());
        out.check(margin >= -1e-12 && slack >= -1e-12 && lower <= full.gamma_h,
                  fmt("L=%g H=%g r=%g level %d: min margin %.3e, min step slack %.3e, lower %.4e <= gamma_h %.4f",
                      c.L, c.H, c.r, c.levels, margin, slack, lower, full.gamma_h));
    }
    return out;
}

struct AspectResult {
    Outcome gamma0;
    Outcome lower;
};

AspectResult aspect_scaling() {
    RunConfig cfg;
    cfg.H = 1.0;
    cfg.h0 = 0.25;
    cfg.levels = 2;  // h = H/16
    const int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    const auto t0 = std::chrono::steady_clock::now();
    const AspectSweep sweep = run_aspect_sweep(cfg, {1, 2, 4, 8, 16}, jobs);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    AspectResult res;
    for (const auto& rec : sweep.records) {
        res.gamma0.note(fmt("L=%-2g gamma0_h=%.6f gamma_h_full=%.6f gamma_lower_analytic=%.4e", rec.L, rec.gamma0_h,
                            rec.gamma_h_full, rec.gamma_lower_analytic));
    }
    res.gamma0.note(fmt("h = H/16, %d jobs, %.1f s; gamma0_h change vs h = H/8: %.2f%%", jobs, secs,
                        100.0 * sweep.cauchy_deviation()));
    const auto& g = sweep.gamma0_fit;
    res.gamma0.check(g.slope >= 0.8 && g.slope <= 1.2, fmt("gamma0_h vs H/L slope %.4f in [0.8, 1.2]", g.slope));
    res.gamma0.check(g.r_squared >= 0.98, fmt("r^2 = %.4f >= 0.98", g.r_squared));
    const auto& l = sweep.lower_fit;
    res.lower.check(l.slope >= 1.3 && l.slope <= 1.7,
                    fmt("gamma_lower_analytic vs H/L slope %.4f in [1.3, 1.7] (r^2 = %.4f)", l.slope, l.r_squared));

    // Diagnostics only: the same fits restricted to L >= 4.
    const std::vector<SweepRecord> tail(sweep.records.begin() + 2, sweep.records.end());
    const auto gt = fit_slope(tail, "H/L", "gamma0_h");
    const auto lt = fit_slope(tail, "H/L", "gamma_lower_analytic");
    res.gamma0.note(fmt("diagnostic, L in {4,8,16} only: slope %.4f (r^2 = %.4f)", gt.slope, gt.r_squared));
    res.lower.note(fmt("diagnostic, L in {4,8,16} only: slope %.4f (r^2 = %.4f)", lt.slope, lt.r_squared));
    return res;
}

Outcome radius_scaling() {
    Outcome out;
    const RadiusSweep sweep = run_radius_sweep({0.05, 0.1, 0.2, 0.4, 0.8}, 0.4);
    for (const auto& rec : sweep.records) out.note(fmt("r=%-4g min term %.6e gamma_lower %.6e", rec.r, rec.min_term, rec.gamma_lower));
    out.check(std::abs(sweep.fit.slope - 1.5) <= 1e-10 && sweep.fit.max_residual <= 1e-10,
              fmt("slope %.15f, max fit residual %.1e, %d points on the min branch", sweep.fit.slope,
                  sweep.fit.max_residual, sweep.fit.n_points));
    return out;
}

Outcome scale_invariance() {
    Outcome out;
    for (const auto& [L, H, r] : {std::array<double, 3>{1, 1, 0.5}, {2, 1, 0.5}, {3, 1, 0.25}}) {
        RunConfig a;
        a.L = L;
        a.H = H;
        a.r = r;
        a.levels = 2;
        a.samples = 10;
        RunConfig b = a;
        b.L = 2 * L;
        b.H = 2 * H;
        b.r = 2 * r;
        const SweepRecord ra = run_single(a), rb = run_single(b);
        const double d0 = std::abs(ra.gamma0_h - rb.gamma0_h);
        const double df = std::abs(ra.gamma_h_full - rb.gamma_h_full);
        out.check(ra.n_p == rb.n_p && ra.n_u == rb.n_u && d0 <= 1e-10 && df <= 1e-10,
                  fmt("(%g,%g,%g) vs doubled: |d gamma0_h| = %.1e, |d gamma_h_full| = %.1e", L, H, r, d0, df));
    }
    return out;
}

Outcome determinism() {
    Outcome out;
    RunConfig cfg;
    cfg.levels = 1;
    cfg.samples = 30;
    cfg.seed = 2024;
    auto csv_of = [&](int jobs) {
        std::ostringstream os;
        write_csv(os, run_aspect_sweep(cfg, {1, 2, 4, 8}, jobs).records);
        return os.str();
    };
    const std::string one = csv_of(1);
    const std::string again = csv_of(1);
    const std::string four = csv_of(4);
    out.check(one == again, "repeated run with --jobs 1 is byte-identical");
    out.check(one == four, fmt("--jobs 1 and --jobs 4 are byte-identical (%zu bytes)", one.size()));
    return out;
}

}  // namespace

int main() {
    int failed = 0;
    auto report = [&](int id, const char* name, const Outcome& o) {
        std::printf("criterion %2d %-28s %s\n", id, name, o.pass ? "PASS" : "FAIL");
        for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failed;
    };
    auto guarded = [](const std::function<Outcome()>& f) {
        try {
            return f();
        } catch (const std::exception& e) {
            Outcome o;
            o.check(false, std::string("exception: ") + e.what());
            return o;
        }
    };

    report(1, "oracle equivalence", guarded(oracle_equivalence));
    report(2, "kernel/positivity", guarded(kernel_dichotomy));
    report(3, "gauss identity", guarded(gauss_identity));
    report(4, "constants cross-check", guarded(constants_cross_check));
    report(5, "constructive bound", guarded(bound_validity));
    AspectResult aspect;
    try {
        aspect = aspect_scaling();
    } catch (const std::exception& e) {
        aspect.gamma0.check(false, std::string("exception: ") + e.what());
        aspect.lower.check(false, "sweep did not run");
    }
    report(6, "aspect-ratio scaling", aspect.gamma0);
    report(7, "lower-bound scaling", aspect.lower);
    report(8, "3D radius scaling", guarded(radius_scaling));
    report(9, "scale invariance", guarded(scale_invariance));
    report(10, "determinism", guarded(determinism));
    std::printf("%d of 10 criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
