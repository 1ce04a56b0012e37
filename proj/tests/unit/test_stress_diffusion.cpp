#include "diffstruct/errors.hpp"
#include "diffstruct/stress_diffusion.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace diffstruct;

namespace {

TangentStress diag(double a, double b, double angle = 0.0)
{
    const Eigen::Rotation2Dd R(angle);
    return TangentStress::from_matrix(R.toRotationMatrix() * Vec2(a, b).asDiagonal() * R.toRotationMatrix().transpose());
}

} // namespace

TEST(TangentStress, EigenvaluesOrderedByMagnitude)
{
    const TangentStress s = diag(3.0, -5.0, 0.4);
    EXPECT_NEAR(s.eigenvalues[0], 3.0, 1e-12);
    EXPECT_NEAR(s.eigenvalues[1], -5.0, 1e-12);
    const Vec2 v = s.eigenvectors.col(1);
    EXPECT_LT((s.matrix * v - s.eigenvalues[1] * v).norm(), 1e-12);
}

TEST(Remap, CompressionAndTensionGiveSameTensor)
{
    const DiffusionTensor a = remap(diag(1.0, 4.0, 0.3), false, 50.0);
    const DiffusionTensor b = remap(diag(-1.0, -4.0, 0.3), false, 50.0);
    EXPECT_LT((a.major - b.major).norm(), 1e-12);
    EXPECT_LT((a.minor - b.minor).norm(), 1e-12);
}

TEST(Remap, MajorCarriesRatioAlongDominantDirection)
{
    const double angle = 0.9, r = 20.0;
    const DiffusionTensor d = remap(diag(0.5, -2.0, angle), false, r);
    const Vec2 dominant(-std::sin(angle), std::cos(angle));
    const Vec2 other(std::cos(angle), std::sin(angle));
    EXPECT_NEAR(dominant.dot(d.major * dominant), r, 1e-10);
    EXPECT_NEAR(other.dot(d.major * other), 1.0, 1e-10);
    EXPECT_NEAR(dominant.dot(d.minor * dominant), 1.0, 1e-10);
    EXPECT_NEAR(other.dot(d.minor * other), r, 1e-10);
}

TEST(Remap, IsotropicFacesMapToIdentity)
{
    const DiffusionTensor d = remap(diag(2.0, 2.0), true, 100.0);
    EXPECT_EQ(d.major, Mat2::Identity());
    EXPECT_EQ(d.minor, Mat2::Identity());
    EXPECT_TRUE(d.isotropic);
}

TEST(Classify, ThresholdsOnRatioAndFloor)
{
    EXPECT_TRUE(classify(diag(1.0, 1.0), 1e-3, 0.0));
    EXPECT_TRUE(classify(diag(0.9995, 1.0), 1e-3, 0.0));
    EXPECT_FALSE(classify(diag(0.99, 1.0), 1e-3, 0.0));
    EXPECT_TRUE(classify(diag(0.0, 1e-9), 1e-3, 1e-6));
    EXPECT_TRUE(classify(diag(0.0, 0.0), 1e-3, 0.0));
}

TEST(StressToDiffusion, ZeroFieldIsIsotropic)
{
    const std::vector<TangentStress> field(10, TangentStress::from_matrix(Mat2::Zero()));
    for (const DiffusionTensor& d : stress_to_diffusion(field, AnisotropySettings{})) EXPECT_TRUE(d.isotropic);
}

TEST(StressToDiffusion, ScalingDoesNotChangeClassification)
{
    std::mt19937 rng(3);
    std::normal_distribution<double> n;
    std::vector<TangentStress> field;
    for (int i = 0; i < 500; ++i) {
        Mat2 S;
        S << n(rng), n(rng), 0.0, n(rng);
        S(1, 0) = S(0, 1);
        field.push_back(TangentStress::from_matrix(S));
    }
    const AnisotropySettings settings;
    const auto a = stress_to_diffusion(field, settings);
    std::vector<TangentStress> scaled;
    for (const auto& s : field) scaled.push_back(s.scaled(1e3));
    const auto b = stress_to_diffusion(scaled, settings);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].isotropic, b[i].isotropic);
        EXPECT_LT((a[i].major - b[i].major).norm(), 1e-9);
    }
}

TEST(StressToDiffusion, ResultsArePositiveDefinite)
{
    std::vector<TangentStress> field{diag(1, 3, 0.1), diag(-2, 7, 1.1), diag(0, 1, 2.0)};
    for (const DiffusionTensor& d : stress_to_diffusion(field, AnisotropySettings{})) {
        EXPECT_GT(d.major.determinant(), 0.0);
        EXPECT_GT(d.major.trace(), 0.0);
        EXPECT_LT((d.major - d.major.transpose()).norm(), 1e-14);
    }
}

TEST(Anisotropy, RatioIsClamped)
{
    AnisotropySettings s;
    s.r = 0.1;
    EXPECT_EQ(s.ratio(), 1.0);
    s.r = 1e9;
    EXPECT_EQ(s.ratio(), 1e4);
    s.r = std::numeric_limits<double>::infinity();
    EXPECT_THROW(s.validate(), ConfigError);
    s = {};
    s.isotropy_tolerance = 1.5;
    EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Anisotropy, DefaultFloorIsRelativeToField)
{
    const std::vector<TangentStress> field{diag(0, 2), diag(0, -8)};
    EXPECT_NEAR(resolve_stress_floor(field, AnisotropySettings{}), 8e-12, 1e-24);
    AnisotropySettings s;
    s.stress_floor = 0.5;
    EXPECT_EQ(resolve_stress_floor(field, s), 0.5);
}

TEST(Projection, TangentProjectionOfPlanarStress)
{
    FaceFrame frame{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ(), 1.0};
    Mat3 sigma = Mat3::Zero();
    sigma(0, 0) = 2.0;
    sigma(0, 1) = sigma(1, 0) = 0.5;
    sigma(2, 2) = 9.0;
    const TangentStress s = project_to_tangent(sigma, frame);
    EXPECT_NEAR(s.matrix(0, 0), 2.0, 1e-15);
    EXPECT_NEAR(s.matrix(0, 1), 0.5, 1e-15);
    EXPECT_NEAR(s.matrix(1, 1), 0.0, 1e-15);
}
