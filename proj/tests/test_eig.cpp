#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "infsup/infsup_eig.hpp"
#include "infsup/mesh.hpp"

using namespace infsup;

namespace {

struct Pencil {
    SparseMatrix A, B, M;
};

Pencil pencil(double L, double H, int nx, int ny, int levels, ConstraintPolicy policy) {
    const FESystem fes = build_fesystem(refine(triangulate_channel(make_channel(L, H), nx, ny), levels), policy);
    return {assemble_gradgrad(fes), assemble_div(fes), assemble_pressure_mass(fes)};
}

Pencil mixed(double L, int levels) {
    return pencil(L, 1.0, 2 * static_cast<int>(L), 2, levels, ConstraintPolicy::from_tags);
}
Pencil closed(double L, int levels) {
    return pencil(L, 1.0, 2 * static_cast<int>(L), 2, levels, ConstraintPolicy::all_dirichlet);
}

}  // namespace

TEST(SchurComplement, ZeroPressureMapsToZero) {
    const Pencil p = mixed(1.0, 1);
    const SpdFactor a(p.A);
    EXPECT_EQ(schur_apply(a, p.B, Eigen::VectorXd::Zero(p.B.rows())).norm(), 0.0);
}

TEST(SchurComplement, IsPositiveSemidefinite) {
    const Pencil p = mixed(2.0, 1);
    const SpdFactor a(p.A);
    std::mt19937_64 gen(5);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd q(p.B.rows());
        for (auto& v : q) v = normal(gen);
        EXPECT_GT(q.dot(schur_apply(a, p.B, q)), 0.0);
    }
}

TEST(SchurComplement, ConstantsInKernelWithoutOutflow) {
    const Pencil p = closed(1.0, 1);
    const SpdFactor a(p.A);
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(p.B.rows());
    EXPECT_LT(schur_apply(a, p.B, one).norm(), 1e-12);
    EXPECT_TRUE(constants_in_kernel(p.B));
    EXPECT_FALSE(constants_in_kernel(mixed(1.0, 1).B));
}

TEST(SpdFactor, RejectsSingularMatrix) {
    const FESystem fes = build_fesystem(
        retag_boundary(triangulate_channel(make_channel(1.0, 1.0), 2, 2), BoundaryTag::neumann));
    EXPECT_THROW(SpdFactor{assemble_gradgrad(fes)}, SingularSystem);
}

TEST(InfSup, MatchesDenseOracle) {
    for (double L : {1.0, 2.0, 4.0}) {
        for (int level = 0; level <= 1; ++level) {
            for (const bool outflow : {true, false}) {
                const Pencil p = outflow ? mixed(L, level) : closed(L, level);
                for (PressureMode mode : {PressureMode::full, PressureMode::zero_mean}) {
                    if (!outflow && mode == PressureMode::full) continue;
                    const auto dense = dense_oracle(p.A, p.B, p.M, mode);
                    const auto it = smallest_eigpair(p.A, p.B, p.M, mode);
                    EXPECT_FALSE(it.singular);
                    EXPECT_NEAR(it.gamma_h, std::sqrt(dense[0]), 1e-8)
                        << "L=" << L << " level=" << level << " mode=" << to_string(mode);
                    EXPECT_LE(it.residual, 1e-9);
                }
            }
        }
    }
}

TEST(InfSup, EigenmodeIsNormalizedAndMeanFree) {
    const Pencil p = closed(2.0, 1);
    const auto res = smallest_eigpair(p.A, p.B, p.M, PressureMode::zero_mean);
    EXPECT_NEAR(res.eigenmode.dot(p.M * res.eigenmode), 1.0, 1e-12);
    EXPECT_NEAR((p.M * res.eigenmode).sum(), 0.0, 1e-12);
    EXPECT_NEAR(res.lambda_min, res.gamma_h * res.gamma_h, 1e-15);
    EXPECT_EQ(res.mode, PressureMode::zero_mean);
}

TEST(InfSup, SingularFlagWithoutOutflow) {
    const Pencil p = closed(1.0, 1);
    const auto res = smallest_eigpair(p.A, p.B, p.M, PressureMode::full);
    EXPECT_TRUE(res.singular);
    EXPECT_EQ(res.lambda_min, 0.0);
    EXPECT_NEAR(dense_oracle(p.A, p.B, p.M, PressureMode::full)[0], 0.0, 1e-10);
}

TEST(InfSup, ZeroMeanSpectrumIsFullSpectrumWithoutTheZero) {
    const Pencil p = closed(1.0, 1);
    const auto full = dense_oracle(p.A, p.B, p.M, PressureMode::full);
    const auto zm = dense_oracle(p.A, p.B, p.M, PressureMode::zero_mean);
    ASSERT_EQ(zm.size() + 1, full.size());
    for (Eigen::Index i = 0; i < zm.size(); ++i) EXPECT_NEAR(zm[i], full[i + 1], 1e-10);
}

TEST(InfSup, PositiveAtEveryLevelWithOutflow) {
    for (int level = 0; level <= 3; ++level) {
        const Pencil p = mixed(2.0, level);
        const auto res = smallest_eigpair(p.A, p.B, p.M, PressureMode::full);
        EXPECT_FALSE(res.singular);
        EXPECT_GT(res.gamma_h, 0.1);
    }
}

TEST(InfSup, ScaleInvariance) {
    const auto a = pencil(1.0, 1.0, 4, 4, 0, ConstraintPolicy::from_tags);
    const auto b = pencil(2.0, 2.0, 4, 4, 0, ConstraintPolicy::from_tags);
    EXPECT_NEAR(smallest_eigpair(a.A, a.B, a.M, PressureMode::full).gamma_h,
                smallest_eigpair(b.A, b.B, b.M, PressureMode::full).gamma_h, 1e-10);
}

TEST(InfSup, RayleighQuotientBoundsEveryPressure) {
    // gamma_h^2 <= q^T S q / q^T M q for every q.
    const Pencil p = mixed(2.0, 1);
    const auto res = smallest_eigpair(p.A, p.B, p.M, PressureMode::full);
    const SpdFactor a(p.A);
    std::mt19937_64 gen(9);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd q(p.B.rows());
        for (auto& v : q) v = normal(gen);
        EXPECT_GE(q.dot(schur_apply(a, p.B, q)) / q.dot(p.M * q), res.lambda_min * (1.0 - 1e-10));
    }
}

TEST(InfSup, SeededStartAgrees) {
    const Pencil p = closed(2.0, 1);
    EigOptions seeded;
    seeded.seed = 1234;
    EXPECT_NEAR(smallest_eigpair(p.A, p.B, p.M, PressureMode::zero_mean).gamma_h,
                smallest_eigpair(p.A, p.B, p.M, PressureMode::zero_mean, seeded).gamma_h, 1e-9);
}

TEST(InfSup, ReportsNonConvergence) {
    const Pencil p = mixed(4.0, 1);
    EigOptions tight;
    tight.max_iter = 2;
    tight.restart = 2;
    try {
        smallest_eigpair(p.A, p.B, p.M, PressureMode::full, tight);
        FAIL() << "expected NonConvergence";
    } catch (const NonConvergence& e) {
        EXPECT_GT(e.best_residual(), 0.0);
    }
}

TEST(InfSup, RejectsInconsistentShapes) {
    const Pencil p = mixed(1.0, 0);
    const Pencil q = mixed(2.0, 0);
    EXPECT_THROW(smallest_eigpair(p.A, q.B, p.M, PressureMode::full), InvalidInput);
}

TEST(InfSup, SaddleSolverInvertsSchur) {
    const Pencil p = mixed(2.0, 1);
    const SaddleSolver solver(p.A, p.B, p.M, PressureMode::full);
    const SpdFactor a(p.A);
    Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(p.B.rows(), -1.0, 2.0);
    const Eigen::VectorXd z = solver.solve(g);
    EXPECT_LT((schur_apply(a, p.B, z) - g).norm(), 1e-10 * g.norm());
}

TEST(InfSup, ZeroTraceConstantSettlesUnderRefinement) {
    std::vector<double> gamma;
    for (int level = 0; level <= 3; ++level) {
        const Pencil p = pencil(1.0, 1.0, 4, 4, level, ConstraintPolicy::all_dirichlet);
        gamma.push_back(smallest_eigpair(p.A, p.B, p.M, PressureMode::zero_mean).gamma_h);
    }
    for (std::size_t i = 2; i < gamma.size(); ++i)
        EXPECT_LT(std::abs(gamma[i] - gamma[i - 1]), std::abs(gamma[i - 1] - gamma[i - 2]));
    EXPECT_NEAR(gamma.back(), 0.3656, 1e-3);
}

TEST(InfSup, DenseSpectrumIsNonnegative) {
    const Pencil p = mixed(1.0, 0);
    const auto spectrum = dense_oracle(p.A, p.B, p.M, PressureMode::full);
    EXPECT_GT(spectrum.minCoeff(), 0.0);
    EXPECT_LE(spectrum.maxCoeff(), 2.0 + 1e-12);
}
