#pragma once

#include "diffstruct/config.hpp"
#include "diffstruct/diffusion_operators.hpp"
#include "diffstruct/extraction.hpp"
#include "diffstruct/mesh.hpp"
#include "diffstruct/stress_diffusion.hpp"
#include "diffstruct/stripes.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace diffstruct {

/// Seconds spent per stage. `bending` is empty when bending is disabled.
struct TimingRecord {
    double membrane = 0.0;
    std::optional<double> bending;
    double statics = 0.0;
    double stress = 0.0;
    double diffusion = 0.0;
    double modes = 0.0;
    /// Wall clock of the whole call.
    double total = 0.0;

    double stage_sum() const { return membrane + bending.value_or(0.0) + statics + stress + diffusion + modes; }
};

/// Per-face stress data at the bundle's gamma.
struct StressSummary {
    /// |F| x 2, ordered by magnitude.
    Eigen::MatrixXd eigenvalues;
    /// |F| x 3 world-space unit vectors of the larger (major) and smaller
    /// (minor) magnitude eigenvalue.
    Eigen::MatrixXd major_direction;
    Eigen::MatrixXd minor_direction;
    std::vector<std::uint8_t> isotropic;
    Eigen::VectorXd von_mises;
};

/// Result of the precompute chain plus everything needed to re-run its tail.
struct SessionBundle {
    static constexpr std::uint32_t kFormatVersion = 1;

    /// Incremented by every recompute.
    std::uint64_t revision = 1;
    SessionConfig config;
    TriangleMesh mesh;
    /// Displacement for the unscaled forces (gamma = 1), length 3|V|.
    Eigen::VectorXd base_displacement;
    /// Tangent-basis stress per face for gamma = 1.
    std::vector<TangentStress> base_stress;
    StressSummary summary;
    ModeSet u;
    ModeSet w;
    TimingRecord timing;

    int num_modes() const { return u.count(); }
};

/// Loads the mesh named by the config and runs the full chain.
SessionBundle precompute(const SessionConfig& config);

/// Full chain on an already loaded mesh; `config.mesh_path` is only echoed.
/// Stage failures are rethrown as StageError tagged with the stage name.
SessionBundle precompute(const SessionConfig& config, const TriangleMesh& mesh);

/// New anisotropy ratio: remap, operators and modes only.
SessionBundle recompute_r(const SessionBundle& bundle, double r);

/// New force scale: stress rescale, classification, operators and modes.
SessionBundle recompute_gamma(const SessionBundle& bundle, double gamma);

/// New mode count: operators and modes only.
SessionBundle recompute_k(const SessionBundle& bundle, int k);

/// Stripe field of a bundle. Throws ConfigError when the mode indices
/// exceed k or when `params.gamma` / `params.r` disagree with the bundle.
StripeField stripe_field(const SessionBundle& bundle, const StripeParams& params);

/// True when the non-real-time knobs of `params` match the bundle.
bool params_match_bundle(const StripeParams& params, const SessionBundle& bundle);

/// Extracts the structure and writes it as OBJ with a parameter echo header.
struct StructureExport {
    ExtractedMesh mesh;
    std::string obj;
};
StructureExport export_structure(const SessionBundle& bundle, const StripeParams& params, int max_depth);

/// Binary bundle: 8-byte magic "DSTRBNDL", uint32 format version, uint64
/// header length, UTF-8 JSON header, then 8-byte aligned little-endian
/// blocks described by the header's "blocks" list.
void save_bundle(std::ostream& out, const SessionBundle& bundle);
void save_bundle(const std::filesystem::path& path, const SessionBundle& bundle);
std::string bundle_bytes(const SessionBundle& bundle);
SessionBundle load_bundle(std::istream& in);
SessionBundle load_bundle(const std::filesystem::path& path);

/// One row of the timing table.
struct TimingRow {
    std::string label;
    int vertices = 0;
    int faces = 0;
    TimingRecord timing;
};

/// Table with columns |V|, |T|, Membrane, Bending, Statics, Stress, Diffusion, Modes (seconds).
std::string format_timing_table(const std::vector<TimingRow>& rows);

} // namespace diffstruct
