#include <gtest/gtest.h>

#include <random>

#include "rotigcv/spectra.hpp"
#include "test_util.hpp"

using namespace rotigcv;
using testutil::spec_from_sq;

TEST(SvdDecompose, IdentityHasUnitValuesAndIdentityFrames) {
    const auto s = svd_decompose(Matrix::Identity(2, 2));
    EXPECT_DOUBLE_EQ(s.singular_values()(0), 1.0);
    EXPECT_DOUBLE_EQ(s.singular_values()(1), 1.0);
    EXPECT_LE((s.left_frame() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((s.right_frame() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SvdDecompose, DiagonalWithZero) {
    Matrix x = Matrix::Zero(2, 2);
    x(0, 0) = 3.0;
    const auto s = svd_decompose(x);
    EXPECT_NEAR(s.singular_values()(0), 3.0, 1e-14);
    EXPECT_EQ(s.singular_values()(1), 0.0);
    EXPECT_EQ(s.rank(), 1u);
}

TEST(SvdDecompose, TallPermutationScaled) {
    Matrix x(3, 2);
    x << 0, 2, 1, 0, 0, 0;
    const auto s = svd_decompose(x);
    ASSERT_EQ(s.singular_values().size(), 2);
    EXPECT_NEAR(s.singular_values()(0), 2.0, 1e-14);
    EXPECT_NEAR(s.singular_values()(1), 1.0, 1e-14);
    // Top right vector is e_2 with a positive entry.
    EXPECT_NEAR(s.right_frame()(0, 1), 1.0, 1e-14);
}

TEST(SvdDecompose, ReconstructionAndOrthogonality) {
    std::mt19937_64 rng(7);
    for (auto [n, p] : {std::pair{20, 20}, {30, 12}, {12, 30}, {1, 5}, {5, 1}}) {
        const Matrix x = testutil::gaussian(n, p, rng);
        const auto s = svd_decompose(x);
        EXPECT_LE((s.reconstruct() - x).norm(), 1e-8 * x.norm());
        EXPECT_LE((s.left_frame() * s.left_frame().transpose() - Matrix::Identity(n, n))
                      .cwiseAbs()
                      .maxCoeff(),
                  1e-10);
        EXPECT_LE((s.right_frame() * s.right_frame().transpose() - Matrix::Identity(p, p))
                      .cwiseAbs()
                      .maxCoeff(),
                  1e-10);
        const Vector& sv = s.singular_values();
        for (Eigen::Index i = 1; i < sv.size(); ++i) EXPECT_LE(sv(i), sv(i - 1));
        EXPECT_GE(sv.minCoeff(), 0.0);
        EXPECT_DOUBLE_EQ(s.gamma(), static_cast<double>(p) / n);
    }
}

TEST(SvdDecompose, SignConventionLargestEntryPositive) {
    std::mt19937_64 rng(11);
    const auto s = svd_decompose(testutil::gaussian(8, 6, rng));
    for (Eigen::Index i = 0; i < 6; ++i) {
        Eigen::Index arg = 0;
        s.right_frame().row(i).cwiseAbs().maxCoeff(&arg);
        EXPECT_GT(s.right_frame()(i, arg), 0.0);
    }
}

TEST(SvdDecompose, DeterministicForFixedInput) {
    std::mt19937_64 rng(3);
    const Matrix x = testutil::gaussian(15, 9, rng);
    const auto a = svd_decompose(x);
    const auto b = svd_decompose(x);
    EXPECT_EQ(a.right_frame(), b.right_frame());
    EXPECT_EQ(a.left_frame(), b.left_frame());
}

TEST(SvdDecompose, RankDeficientValuesClampedToZero) {
    std::mt19937_64 rng(5);
    const Matrix u = testutil::gaussian(10, 3, rng);
    const Matrix x = u * testutil::gaussian(3, 8, rng);
    const auto s = svd_decompose(x);
    EXPECT_EQ(s.rank(), 3u);
    for (Eigen::Index i = 3; i < s.singular_values().size(); ++i) {
        EXPECT_EQ(s.singular_values()(i), 0.0);
    }
}

TEST(SvdDecompose, RejectsNonFinite) {
    Matrix x = Matrix::Identity(3, 3);
    x(1, 2) = std::nan("");
    try {
        svd_decompose(x);
        FAIL() << "expected rejection";
    } catch (const DegenerateInputError& e) {
        EXPECT_NE(std::string(e.what()).find("(1, 2)"), std::string::npos);
    }
}

TEST(FromParts, ValidatesShapesAndOrder) {
    EXPECT_THROW(SpectralDecomposition::from_parts(Vector::Ones(2), Matrix::Identity(2, 2),
                                                   Matrix::Identity(3, 2)),
                 ArgumentError);
    Vector s(2);
    s << 1.0, 2.0;
    EXPECT_THROW(SpectralDecomposition::from_parts(s, Matrix::Identity(2, 2), Matrix::Identity(2, 2)),
                 ArgumentError);
}

TEST(EvalTransforms, SingleUnitValue) {
    const auto t = eval_transforms(spec_from_sq(1, 1, {1.0}), 1.0);
    EXPECT_DOUBLE_EQ(t.m, 0.5);
    EXPECT_DOUBLE_EQ(t.v, 0.5);
    EXPECT_DOUBLE_EQ(t.m_prime, 0.25);
    EXPECT_DOUBLE_EQ(t.v_prime, 0.25);
}

TEST(EvalTransforms, TwoByTwoSums) {
    const auto t = eval_transforms(spec_from_sq(2, 2, {1.0, 2.0}), 1.0);
    EXPECT_NEAR(t.v, 0.5 * (1.0 / 2 + 1.0 / 3), 1e-15);
    EXPECT_NEAR(t.v_prime, 0.5 * (1.0 / 4 + 1.0 / 9), 1e-15);
}

TEST(EvalTransforms, TallPadsCompanion) {
    const auto t = eval_transforms(spec_from_sq(2, 1, {1.0}), 1.0);
    EXPECT_NEAR(t.m, 0.5, 1e-15);
    EXPECT_NEAR(t.v, 0.5 * (0.5 + 1.0), 1e-15);
}

TEST(EvalTransforms, RejectsNonPositiveLambda) {
    const auto s = spec_from_sq(2, 2, {1.0, 2.0});
    EXPECT_THROW(eval_transforms(s, 0.0), DomainError);
    EXPECT_THROW(eval_transforms(s, -1.0), DomainError);
    EXPECT_THROW(trace_smoother(s, 0.0), DomainError);
}

TEST(EvalTransforms, PositiveAndCompanionIdentity) {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> dim(1, 40);
    std::uniform_real_distribution<double> lam(0.01, 20.0);
    for (int rep = 0; rep < 100; ++rep) {
        const auto n = static_cast<std::size_t>(dim(rng));
        const auto p = static_cast<std::size_t>(dim(rng));
        const auto s = testutil::random_spectrum(n, p, rng);
        const double l = lam(rng);
        const auto t = eval_transforms(s, l);
        EXPECT_GT(t.m, 0.0);
        EXPECT_GT(t.v, 0.0);
        EXPECT_GT(t.m_prime, 0.0);
        EXPECT_GT(t.v_prime, 0.0);
        const double g = s.gamma();
        EXPECT_NEAR(t.v, g * t.m + (1.0 - g) / l, 1e-12 * std::max(1.0, t.v));
        EXPECT_NEAR(t.m, t.v / g + (g - 1.0) / (g * l), 1e-12 * std::max(1.0, t.m));
    }
}

TEST(EvalTransforms, FiniteDifferenceDerivative) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> lam(0.1, 5.0);
    for (int rep = 0; rep < 20; ++rep) {
        const auto s = testutil::random_spectrum(25, 40, rng, 0.0, 10.0);
        const double l = lam(rng);
        const double h = 1e-4 * l;
        const auto t = eval_transforms(s, l);
        const double fd_v = (eval_transforms(s, l - h).v - eval_transforms(s, l + h).v) / (2 * h);
        const double fd_m = (eval_transforms(s, l - h).m - eval_transforms(s, l + h).m) / (2 * h);
        EXPECT_NEAR(t.v_prime, fd_v, 1e-6);
        EXPECT_NEAR(t.m_prime, fd_m, 1e-6);
    }
}

TEST(EvalTransforms, MonotoneInLambda) {
    std::mt19937_64 rng(41);
    const auto s = testutil::random_spectrum(30, 20, rng);
    double pv = 1e300, pm = 1e300, pt = 1e300;
    for (double l = 0.01; l < 100.0; l *= 1.3) {
        const auto t = eval_transforms(s, l);
        const double tr = trace_smoother(s, l);
        EXPECT_LT(t.v, pv);
        EXPECT_LT(t.m, pm);
        EXPECT_LT(tr, pt);
        pv = t.v;
        pm = t.m;
        pt = tr;
    }
}

TEST(TraceSmoother, Examples) {
    EXPECT_DOUBLE_EQ(trace_smoother(spec_from_sq(2, 2, {1.0, 1.0}), 1.0), 1.0);
    EXPECT_NEAR(trace_smoother(spec_from_sq(2, 2, {1.0, 2.0}), 1.0), 7.0 / 6.0, 1e-15);
    EXPECT_LT(trace_smoother(spec_from_sq(2, 2, {1.0, 2.0}), 1e12), 1e-11);
}

TEST(TraceSmoother, CompanionTraceIdentity) {
    std::mt19937_64 rng(51);
    for (int rep = 0; rep < 50; ++rep) {
        const auto s = testutil::random_spectrum(17, 33, rng);
        for (double l : {0.05, 1.0, 7.0}) {
            const double n = static_cast<double>(s.n());
            const double tr = trace_smoother(s, l);
            EXPECT_NEAR(tr / n + l * eval_transforms(s, l).v, 1.0, 1e-12);
            EXPECT_GE(tr, 0.0);
            EXPECT_LT(tr, 17.0);
        }
    }
}

TEST(GramEigenvalues, MatchesFullDecomposition) {
    std::mt19937_64 rng(61);
    const Matrix x = testutil::gaussian(12, 7, rng);
    const auto ev = gram_eigenvalues(x);
    const auto s = svd_decompose(x);
    ASSERT_EQ(ev.size(), 7u);
    for (std::size_t i = 0; i < ev.size(); ++i) {
        EXPECT_NEAR(ev[i], s.singular_sq()(static_cast<Eigen::Index>(i)), 1e-10);
    }
}
