#include "generators.hpp"

#include "diffstruct/errors.hpp"
#include "diffstruct/pipeline.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cstring>
#include <filesystem>
#include <sstream>

using namespace diffstruct;
namespace ts = testing_support;

namespace {

// 2 x 0.5 planar bar, left edge clamped, right edge pulled down in-plane.
SessionConfig bar_config()
{
    SessionConfig c;
    c.name = "bar";
    c.material.bending_enabled = false;
    FixedSpec all;
    all.selection.kind = VertexSelection::Kind::All;
    all.axes = {false, false, true};
    FixedSpec left;
    left.selection.kind = VertexSelection::Kind::Box;
    left.selection.box_min = Vec3(-1, -1, -1);
    left.selection.box_max = Vec3(0, 1, 1);
    ForceSpec pull;
    pull.selection.kind = VertexSelection::Kind::Box;
    pull.selection.box_min = Vec3(2, -1, -1);
    pull.selection.box_max = Vec3(3, 1, 1);
    pull.value = Vec3(0, -1, 0);
    pull.total = true;
    c.boundary.fixed = {all, left};
    c.boundary.forces = {pull};
    c.k = 4;
    return c;
}

const TriangleMesh& bar_mesh()
{
    static const TriangleMesh m = ts::grid_mesh(33, 9, 2.0, 0.5);
    return m;
}

const SessionBundle& bar_bundle()
{
    static const SessionBundle b = precompute(bar_config(), bar_mesh());
    return b;
}

std::string block_bytes(const std::string& bytes)
{
    std::uint64_t length = 0;
    std::memcpy(&length, bytes.data() + 12, sizeof(length));
    std::size_t start = 20 + length;
    start = (start + 7) / 8 * 8;
    return bytes.substr(start);
}

} // namespace

TEST(Pipeline, PrecomputeProducesConsistentBundle)
{
    const SessionBundle& b = bar_bundle();
    EXPECT_EQ(b.revision, 1u);
    EXPECT_EQ(b.num_modes(), 4);
    EXPECT_EQ(b.w.count(), 4);
    EXPECT_EQ(b.base_displacement.size(), 3 * b.mesh.num_vertices());
    EXPECT_EQ(static_cast<int>(b.base_stress.size()), b.mesh.num_faces());
    EXPECT_EQ(b.summary.eigenvalues.rows(), b.mesh.num_faces());
    EXPECT_FALSE(b.timing.bending.has_value());
    EXPECT_GE(b.timing.total, b.timing.stage_sum() * 0.99);
}

TEST(Pipeline, BundleBlocksAreDeterministic)
{
    const SessionBundle again = precompute(bar_config(), bar_mesh());
    EXPECT_EQ(block_bytes(bundle_bytes(again)), block_bytes(bundle_bytes(bar_bundle())));
}

TEST(Pipeline, BundleRoundTripIsBitExact)
{
    const std::string bytes = bundle_bytes(bar_bundle());
    std::istringstream in(bytes);
    const SessionBundle back = load_bundle(in);
    EXPECT_EQ(bundle_bytes(back), bytes);
    EXPECT_EQ(back.u.vectors, bar_bundle().u.vectors);
    EXPECT_EQ(back.mesh.positions(), bar_bundle().mesh.positions());
    EXPECT_EQ(back.summary.isotropic, bar_bundle().summary.isotropic);
}

TEST(Pipeline, BundleHeaderDescribesBlocks)
{
    const std::string bytes = bundle_bytes(bar_bundle());
    ASSERT_EQ(bytes.substr(0, 8), "DSTRBNDL");
    std::uint32_t version = 0;
    std::memcpy(&version, bytes.data() + 8, 4);
    EXPECT_EQ(version, SessionBundle::kFormatVersion);
    std::uint64_t length = 0;
    std::memcpy(&length, bytes.data() + 12, 8);
    const auto header = nlohmann::json::parse(bytes.substr(20, length));
    EXPECT_EQ(header.at("revision"), 1);
    EXPECT_TRUE(header.at("timing").at("bending").is_null());
    std::set<std::string> names;
    for (const auto& block : header.at("blocks")) {
        names.insert(block.at("name").get<std::string>());
        EXPECT_EQ(block.at("offset").get<std::uint64_t>() % 8, 0u);
    }
    for (const char* name : {"positions", "faces", "base_displacement", "base_stress", "stress_eigenvalues",
                             "major_direction", "minor_direction", "isotropic", "von_mises", "u_eigenvalues", "u_modes",
                             "w_eigenvalues", "w_modes"})
        EXPECT_TRUE(names.count(name)) << name;
}

TEST(Pipeline, CorruptBundlesAreRejected)
{
    std::string bytes = bundle_bytes(bar_bundle());
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    std::istringstream a(bad_magic);
    EXPECT_THROW(load_bundle(a), ConfigError);
    std::istringstream b(bytes.substr(0, bytes.size() / 2));
    EXPECT_THROW(load_bundle(b), ConfigError);
    std::string bad_version = bytes;
    bad_version[8] = 9;
    std::istringstream c(bad_version);
    EXPECT_THROW(load_bundle(c), ConfigError);
}

TEST(Pipeline, RatioOneGivesIsotropicOperators)
{
    const SessionBundle iso = recompute_r(bar_bundle(), 1.0);
    const TriangleMesh& m = iso.mesh;
    const ModeSet reference = solve_modes(assemble_isotropic(m, build_face_frames(m)), assemble_mass(m), 4);
    EXPECT_LT((iso.u.eigenvalues - reference.eigenvalues).cwiseAbs().maxCoeff(), 1e-8 * reference.eigenvalues.maxCoeff());
    EXPECT_LT((iso.w.eigenvalues - reference.eigenvalues).cwiseAbs().maxCoeff(), 1e-8 * reference.eigenvalues.maxCoeff());
    EXPECT_EQ(iso.revision, 2u);
    EXPECT_EQ(iso.timing.statics, 0.0);
    EXPECT_EQ(iso.timing.membrane, 0.0);
}

TEST(Pipeline, GammaRescalesStressWithoutResolving)
{
    const SessionBundle twice = recompute_gamma(bar_bundle(), 2.0);
    EXPECT_EQ(twice.base_displacement, bar_bundle().base_displacement);
    EXPECT_LT((twice.summary.von_mises - 2.0 * bar_bundle().summary.von_mises).cwiseAbs().maxCoeff(),
              1e-12 * bar_bundle().summary.von_mises.maxCoeff());
    EXPECT_EQ(twice.summary.isotropic, bar_bundle().summary.isotropic);
}

TEST(Pipeline, ZeroGammaIsFullyIsotropic)
{
    const SessionBundle zero = recompute_gamma(bar_bundle(), 0.0);
    for (auto flag : zero.summary.isotropic) EXPECT_EQ(flag, 1);
}

TEST(Pipeline, RecomputeKChangesModeCount)
{
    const SessionBundle more = recompute_k(bar_bundle(), 6);
    EXPECT_EQ(more.num_modes(), 6);
    EXPECT_LT((more.u.eigenvalues.head(4) - bar_bundle().u.eigenvalues).cwiseAbs().maxCoeff(),
              1e-8 * bar_bundle().u.eigenvalues.maxCoeff());
}

TEST(Pipeline, StripeFieldChecksKnobs)
{
    StripeParams p;
    p.gamma = bar_bundle().config.gamma;
    p.r = bar_bundle().config.anisotropy.r;
    EXPECT_NO_THROW(stripe_field(bar_bundle(), p));
    EXPECT_TRUE(params_match_bundle(p, bar_bundle()));
    p.gamma *= 2.0;
    EXPECT_FALSE(params_match_bundle(p, bar_bundle()));
    EXPECT_THROW(stripe_field(bar_bundle(), p), ConfigError);
    p.gamma = bar_bundle().config.gamma;
    p.a = 5;
    EXPECT_THROW(stripe_field(bar_bundle(), p), ConfigError);
}

TEST(Pipeline, ExportEchoesParametersAndFlagsEmpty)
{
    StripeParams p;
    p.gamma = bar_bundle().config.gamma;
    p.r = bar_bundle().config.anisotropy.r;
    p.alpha_u = p.alpha_w = 0.5 / bar_bundle().u.vectors.col(0).cwiseAbs().maxCoeff();
    const StructureExport full = export_structure(bar_bundle(), p, 10);
    EXPECT_FALSE(full.mesh.empty());
    EXPECT_NE(full.obj.find("# params {"), std::string::npos);
    EXPECT_NE(full.obj.find("# bundle revision 1"), std::string::npos);
    EXPECT_EQ(full.obj.find("empty structure"), std::string::npos);
    EXPECT_EQ(parse_obj_string(full.obj).num_faces(), full.mesh.mesh.num_faces());

    p.m_u = p.m_w = 1.0;
    const StructureExport none = export_structure(bar_bundle(), p, 10);
    EXPECT_TRUE(none.mesh.empty());
    EXPECT_NE(none.obj.find("# empty structure"), std::string::npos);
}

TEST(Pipeline, StageErrorsNameTheStage)
{
    SessionConfig c = bar_config();
    c.boundary.fixed.clear();
    try {
        precompute(c, bar_mesh());
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "statics");
    }
    c = bar_config();
    c.k = 10000;
    try {
        precompute(c, bar_mesh());
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "modes");
    }
    c = bar_config();
    c.mesh_path = "/nonexistent/mesh.obj";
    try {
        precompute(c);
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "load");
    }
}

TEST(Pipeline, TimingTableMarksMissingBending)
{
    const std::string table = format_timing_table({{"bar", bar_bundle().mesh.num_vertices(),
                                                    bar_bundle().mesh.num_faces(), bar_bundle().timing}});
    for (const char* column : {"|V|", "|T|", "Membrane(s)", "Bending(s)", "Statics(s)", "Stress(s)", "Diffusion(s)",
                               "Modes(s)"})
        EXPECT_NE(table.find(column), std::string::npos) << column;
    EXPECT_NE(table.find("N/A"), std::string::npos);
}

TEST(Pipeline, BendingTimedOnShells)
{
    SessionConfig c = load_config(ts::data_path("configs/sphere_pole.json"));
    c.k = 2;
    const SessionBundle b = precompute(c);
    ASSERT_TRUE(b.timing.bending.has_value());
    EXPECT_GT(*b.timing.bending, 0.0);
    const std::string table = format_timing_table({{"sphere", b.mesh.num_vertices(), b.mesh.num_faces(), b.timing}});
    EXPECT_EQ(table.find("N/A"), std::string::npos);
}
