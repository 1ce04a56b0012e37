#include "generators.hpp"

#include "diffstruct/errors.hpp"
#include "diffstruct/extraction.hpp"

#include <gtest/gtest.h>

using namespace diffstruct;
namespace ts = testing_support;

namespace {

StripeField plane_field(const TriangleMesh& m, double alpha_u, double alpha_w, double mu, double mw)
{
    StripeParams p;
    p.alpha_u = alpha_u;
    p.alpha_w = alpha_w;
    p.m_u = mu;
    p.m_w = mw;
    return StripeField(m, m.positions().col(0), m.positions().col(1), p);
}

// Worst sign violation over a 10-point pattern of every output face.
double worst_impurity(const ExtractedMesh& ex, const StripeParams& p)
{
    static const std::vector<Vec3> pattern = [] {
        std::vector<Vec3> out{Vec3::Constant(1.0 / 3.0)};
        for (int i = 0; i <= 3; ++i)
            for (int j = 0; i + j <= 3; ++j) out.emplace_back(i / 3.0, j / 3.0, (3 - i - j) / 3.0);
        return out;
    }();
    double worst = 0.0;
    for (int f = 0; f < ex.mesh.num_faces(); ++f) {
        double lo = std::numeric_limits<double>::infinity();
        for (const Vec3& b : pattern) {
            double u = 0.0, w = 0.0;
            for (int c = 0; c < 3; ++c) {
                u += b[c] * ex.upsilon[ex.mesh.faces()(f, c)];
                w += b[c] * ex.omega[ex.mesh.faces()(f, c)];
            }
            const Vec2 s = stripe_values(u, w, p);
            lo = std::min(lo, std::max(s.x(), s.y()));
        }
        worst = std::min(worst, lo);
    }
    return worst;
}

} // namespace

TEST(LevelCrossings, ZeroThresholdQuarterPoints)
{
    const auto x = level_crossings(0.0, 1.0, 0.0);
    ASSERT_EQ(x.size(), 2u);
    EXPECT_DOUBLE_EQ(x[0], 0.25);
    EXPECT_DOUBLE_EQ(x[1], 0.75);
}

TEST(LevelCrossings, ThresholdShiftsCrossings)
{
    // p(x) = 0.5 at x = k +- 1/8.
    const auto x = level_crossings(-0.2, 1.2, 0.5);
    const std::vector<double> expect{-0.125, 0.125, 0.875, 1.125};
    ASSERT_EQ(x.size(), expect.size());
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x[i], expect[i], 1e-15);
}

TEST(LevelCrossings, SaturatedThresholdsHaveNone)
{
    EXPECT_TRUE(level_crossings(-5.0, 5.0, 1.0).empty());
    EXPECT_TRUE(level_crossings(-5.0, 5.0, -1.0).empty());
    EXPECT_TRUE(level_crossings(-5.0, 5.0, 2.0).empty());
}

TEST(LevelCrossings, OpenIntervalAndTolerance)
{
    EXPECT_TRUE(level_crossings(0.25, 0.5, 0.0).empty());
    EXPECT_EQ(count_level_crossings(0.2, 0.3, 0.0), 1);
    EXPECT_EQ(count_level_crossings(0.2, 0.3, 0.0, 0.06), 0);
}

TEST(Subdivide, ResolvesMultipleCrossings)
{
    const TriangleMesh m = ts::grid_mesh(4, 4, 1.0, 1.0);
    const StripeField field = plane_field(m, 9.0, 7.0, 0.1, -0.2);
    const RefinedMesh r = adaptive_subdivide(field, 10);
    EXPECT_EQ(r.unresolved_faces, 0);
    EXPECT_GT(r.num_faces(), m.num_faces());
    EXPECT_NEAR(r.total_area(), m.total_area(), 1e-12);
    const double tu = argument_tolerance(r.upsilon, 9.0), tw = argument_tolerance(r.omega, 7.0);
    for (int f = 0; f < r.num_faces(); ++f) {
        double ulo = 1e300, uhi = -1e300, wlo = 1e300, whi = -1e300;
        for (int c = 0; c < 3; ++c) {
            ulo = std::min(ulo, 9.0 * r.upsilon[r.faces(f, c)]);
            uhi = std::max(uhi, 9.0 * r.upsilon[r.faces(f, c)]);
            wlo = std::min(wlo, 7.0 * r.omega[r.faces(f, c)]);
            whi = std::max(whi, 7.0 * r.omega[r.faces(f, c)]);
        }
        EXPECT_LE(count_level_crossings(ulo, uhi, 0.1, tu), 1);
        EXPECT_LE(count_level_crossings(wlo, whi, -0.2, tw), 1);
    }
}

TEST(Subdivide, DepthCapReportsUnresolved)
{
    const TriangleMesh m = ts::grid_mesh(3, 3, 1.0, 1.0);
    const RefinedMesh r = adaptive_subdivide(plane_field(m, 40.0, 40.0, 0.0, 0.0), 0);
    EXPECT_EQ(r.num_faces(), m.num_faces());
    EXPECT_GT(r.unresolved_faces, 0);
    EXPECT_THROW(adaptive_subdivide(plane_field(m, 4.0, 4.0, 0.0, 0.0), -1), ConfigError);
}

TEST(Extract, KeptPlusDiscardedEqualsRefined)
{
    const TriangleMesh m = ts::random_patch(8, 8, 21);
    const StripeField field = plane_field(m, 6.0, 5.0, 0.2, 0.3);
    const ExtractedMesh ex = extract(field);
    EXPECT_NEAR(ex.kept_area + ex.discarded_area, ex.refined_area, 1e-10 * ex.refined_area);
    EXPECT_NEAR(ex.kept_area, ex.mesh.total_area(), 1e-10 * ex.refined_area);
    EXPECT_EQ(static_cast<int>(ex.source_face.size()), ex.mesh.num_faces());
    EXPECT_EQ(static_cast<int>(ex.inside_flags.size()), ex.mesh.num_faces());
}

TEST(Extract, FacesAreSignPure)
{
    const TriangleMesh m = ts::icosphere(3);
    StripeParams p;
    p.alpha_u = 4.0;
    p.alpha_w = 3.0;
    p.m_u = -0.1;
    p.m_w = 0.3;
    const StripeField field(m, m.positions().col(0), m.positions().col(2), p);
    const ExtractedMesh ex = extract(field);
    ASSERT_FALSE(ex.empty());
    EXPECT_GE(worst_impurity(ex, p), -1e-9);
}

TEST(Extract, AreaMatchesCoverage)
{
    const TriangleMesh m = ts::grid_mesh(31, 31, 1.0, 1.0);
    const StripeField field = plane_field(m, 4.0, 3.0, 0.3, 0.5);
    const ExtractedMesh ex = extract(field);
    EXPECT_NEAR(ex.kept_area / m.total_area(), field.coverage(1000000), 0.005);
}

TEST(Extract, IdempotentOnExtractedMesh)
{
    const TriangleMesh m = ts::grid_mesh(9, 9, 1.0, 1.0);
    StripeParams p;
    p.alpha_u = 3.0;
    p.alpha_w = 2.0;
    p.m_u = 0.2;
    p.m_w = 0.4;
    const ExtractedMesh first = extract(StripeField(m, m.positions().col(0), m.positions().col(1), p));
    const ExtractedMesh second = extract(StripeField(first.mesh, first.upsilon, first.omega, p));
    EXPECT_NEAR(second.kept_area, first.kept_area, 1e-9 * first.kept_area);
    EXPECT_NEAR(second.discarded_area, 0.0, 1e-9 * first.kept_area);
}

TEST(Extract, EmptyAndFullStructures)
{
    const TriangleMesh m = ts::icosphere(2);
    const ExtractedMesh none = extract(plane_field(m, 4.0, 4.0, 1.0, 1.0));
    EXPECT_TRUE(none.empty());
    EXPECT_EQ(none.kept_area, 0.0);
    const ExtractedMesh all = extract(plane_field(m, 4.0, 4.0, -1.0, -1.0));
    EXPECT_EQ(all.mesh.num_faces(), m.num_faces());
    EXPECT_NEAR(all.kept_area, m.total_area(), 1e-12);
}

TEST(Extract, SolidFacesAreKeptWhole)
{
    const TriangleMesh m = ts::grid_mesh(9, 9, 1.0, 1.0);
    std::vector<std::uint8_t> solid(m.num_faces(), 0);
    double solid_area = 0.0;
    for (int f = 0; f < m.num_faces(); ++f) {
        if (m.corner(f, 0).x() < 0.3 && m.corner(f, 1).x() < 0.3 && m.corner(f, 2).x() < 0.3) {
            solid[f] = 1;
            solid_area += m.face_area(f);
        }
    }
    ExtractionOptions opts;
    opts.solid_faces = solid;
    const ExtractedMesh ex = extract(plane_field(m, 4.0, 4.0, 1.0, 1.0), opts);
    EXPECT_NEAR(ex.kept_area, solid_area, 1e-12);
    for (auto flag : ex.inside_flags) EXPECT_TRUE(flag & 4u);

    opts.solid_faces.pop_back();
    EXPECT_THROW(extract(plane_field(m, 4.0, 4.0, 1.0, 1.0), opts), ConfigError);
}

TEST(Extract, OutputIsValidManifold)
{
    const TriangleMesh m = ts::torus(24, 10);
    StripeParams p;
    p.alpha_u = 2.0;
    p.alpha_w = 2.0;
    const StripeField field(m, m.positions().col(0), m.positions().col(1), p);
    const ExtractedMesh ex = extract(field);
    // from_arrays already validated it; rebuilding must give the same mesh.
    const TriangleMesh again = TriangleMesh::from_arrays(ex.mesh.positions(), ex.mesh.faces());
    EXPECT_EQ(again.num_faces(), ex.mesh.num_faces());
    EXPECT_EQ(ex.unresolved_faces, 0);
}
