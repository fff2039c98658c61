#include <gtest/gtest.h>

#include <random>
#include <set>

#include "rotigcv/baselines.hpp"
#include "test_util.hpp"

using namespace rotigcv;
using testutil::spec_from_sq;

namespace {

Vector e1() {
    Vector v(2);
    v << 1, 0;
    return v;
}

// Average squared error of n explicit leave-one-out ridge refits.
double brute_force_loocv(const Matrix& x, const Vector& y, double lambda) {
    const auto n = x.rows();
    const auto p = x.cols();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        Matrix xi(n - 1, p);
        Vector yi(n - 1);
        for (Eigen::Index j = 0, r = 0; j < n; ++j) {
            if (j == i) continue;
            xi.row(r) = x.row(j);
            yi(r) = y(j);
            ++r;
        }
        const Vector b = (xi.transpose() * xi + lambda * Matrix::Identity(p, p))
                             .ldlt()
                             .solve(xi.transpose() * yi);
        const double e = y(i) - x.row(i).dot(b);
        acc += e * e;
    }
    return acc / static_cast<double>(n);
}

}  // namespace

TEST(Gcv, IdentityExample) {
    EXPECT_NEAR(gcv_metric(svd_decompose(Matrix::Identity(2, 2)), e1(), 1.0), 0.5, 1e-15);
}

TEST(Gcv, NullModelAndZeroResponse) {
    std::mt19937_64 rng(1);
    const Matrix x = testutil::gaussian(12, 7, rng);
    const Vector y = testutil::gaussian_vec(12, rng);
    const auto s = svd_decompose(x);
    EXPECT_NEAR(gcv_metric(s, y, 1e13), y.squaredNorm() / 12.0, 1e-9);
    EXPECT_EQ(gcv_metric(s, Vector::Zero(12), 0.5), 0.0);
}

TEST(Gcv, DivergesWhenTraceReachesN) {
    std::mt19937_64 rng(2);
    const auto s = svd_decompose(testutil::gaussian(5, 12, rng));
    EXPECT_THROW(gcv_metric(s, Vector::Ones(5), 1e-20), DivergenceError);
}

TEST(GcvAsymptotic, UnitExampleAndZero) {
    const auto s = spec_from_sq(1, 1, {1});
    EXPECT_NEAR(gcv_asymptotic(s, 1, 1, 1), 2.0, 1e-15);
    EXPECT_EQ(gcv_asymptotic(s, 0, 0, 1), 0.0);
    EXPECT_THROW(gcv_asymptotic(s, 1, 1, 0), DomainError);
}

TEST(GcvAsymptotic, ClosedAndSumFormsCoincide) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> dim(1, 40);
    for (int rep = 0; rep < 100; ++rep) {
        const auto s = testutil::random_spectrum(dim(rng), dim(rng), rng);
        const double l = 0.05 + 0.1 * rep;
        const double a = gcv_asymptotic(s, 1.3, 0.7, l);
        const double b = gcv_asymptotic_sums(s, 1.3, 0.7, l);
        EXPECT_LE(std::abs(a - b), 1e-12 * std::max(1.0, a));
    }
}

TEST(Loocv, IdentityExample) {
    EXPECT_NEAR(loocv_metric(svd_decompose(Matrix::Identity(2, 2)), e1(), 1.0), 0.5, 1e-15);
}

TEST(Loocv, ShortcutMatchesExplicitRefits) {
    std::mt19937_64 rng(4);
    const Matrix x = testutil::gaussian(30, 10, rng);
    const Vector y = testutil::gaussian_vec(30, rng);
    const auto s = svd_decompose(x);
    for (double l : {0.01, 0.3, 4.0}) {
        EXPECT_LE(testutil::rel_err(loocv_metric(s, y, l), brute_force_loocv(x, y, l)), 1e-8);
    }
}

TEST(Loocv, ShortcutPropertyOverRandomDesigns) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> dim(3, 50);
    for (int rep = 0; rep < 25; ++rep) {
        const int n = dim(rng);
        const int p = dim(rng);
        const Matrix x = testutil::gaussian(n, p, rng);
        const Vector y = testutil::gaussian_vec(n, rng);
        const double l = 0.2 + 0.1 * rep;
        EXPECT_LE(testutil::rel_err(loocv_metric(svd_decompose(x), y, l), brute_force_loocv(x, y, l)),
                  1e-8)
            << "n=" << n << " p=" << p;
    }
}

TEST(Loocv, NullModel) {
    std::mt19937_64 rng(6);
    const Matrix x = testutil::gaussian(9, 4, rng);
    const Vector y = testutil::gaussian_vec(9, rng);
    EXPECT_NEAR(loocv_metric(svd_decompose(x), y, 1e13), y.squaredNorm() / 9.0, 1e-9);
}

TEST(Loocv, EqualsGcvWhenLeveragesAreEqual) {
    const Matrix x = 1.7 * Matrix::Identity(6, 6);
    std::mt19937_64 rng(7);
    const Vector y = testutil::gaussian_vec(6, rng);
    const auto s = svd_decompose(x);
    for (double l : {0.1, 1.0, 5.0}) {
        EXPECT_NEAR(loocv_metric(s, y, l), gcv_metric(s, y, l), 1e-13);
    }
}

TEST(Loocv, DegenerateLeverage) {
    std::mt19937_64 rng(8);
    const auto s = svd_decompose(testutil::gaussian(5, 12, rng));
    EXPECT_THROW(loocv_metric(s, Vector::Ones(5), 1e-16), DivergenceError);
}

TEST(Kfold, PartitionCoversAllSamples) {
    const auto folds = kfold_partition(23, 5, 99);
    std::set<Eigen::Index> seen;
    for (const auto& f : folds) {
        EXPECT_TRUE(f.size() == 4 || f.size() == 5);
        seen.insert(f.begin(), f.end());
    }
    EXPECT_EQ(seen.size(), 23u);
    EXPECT_EQ(folds, kfold_partition(23, 5, 99));
    EXPECT_NE(folds, kfold_partition(23, 5, 100));
}

TEST(Kfold, KEqualsNIsLoocv) {
    std::mt19937_64 rng(9);
    const Matrix x = testutil::gaussian(20, 8, rng);
    const Vector y = testutil::gaussian_vec(20, rng);
    for (double l : {0.1, 2.0}) {
        EXPECT_LE(testutil::rel_err(kfold_metric(x, y, l, 20, 1), loocv_metric(svd_decompose(x), y, l)),
                  1e-8);
    }
}

TEST(Kfold, ZeroResponseAndRange) {
    std::mt19937_64 rng(10);
    const Matrix x = testutil::gaussian(10, 4, rng);
    EXPECT_EQ(kfold_metric(x, Vector::Zero(10), 1.0, 5, 3), 0.0);
    EXPECT_THROW(kfold_metric(x, Vector::Zero(10), 1.0, 1, 3), ArgumentError);
    EXPECT_THROW(kfold_metric(x, Vector::Zero(10), 1.0, 11, 3), ArgumentError);
}

TEST(Kfold, CurveMatchesPointwiseMetric) {
    std::mt19937_64 rng(11);
    const Matrix x = testutil::gaussian(30, 40, rng);
    const Vector y = testutil::gaussian_vec(30, rng);
    const double grid[] = {0.1, 1.0, 10.0};
    const auto c = kfold_curve(x, y, grid, 5, 17);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_DOUBLE_EQ(c[i], kfold_metric(x, y, grid[i], 5, 17));
        EXPECT_GT(c[i], 0.0);
    }
}
