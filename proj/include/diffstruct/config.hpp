#pragma once

#include "diffstruct/diffusion_operators.hpp"
#include "diffstruct/mesh.hpp"
#include "diffstruct/shell_fem.hpp"
#include "diffstruct/stress_diffusion.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace diffstruct {

/// Vertex set named in a boundary-condition file. JSON forms:
///   {"vertices": [0, 4, 7]}   0-based ids
///   {"box": {"min": [x, y, z], "max": [x, y, z]}}   closed, padded by 1e-9 * bbox diagonal
///   {"all": true}
struct VertexSelection {
    enum class Kind { Vertices, Box, All };

    Kind kind = Kind::Vertices;
    std::vector<int> vertices;
    Vec3 box_min = Vec3::Zero();
    Vec3 box_max = Vec3::Zero();

    /// Sorted vertex ids. Throws ConfigError when the selection is empty or out of range.
    std::vector<int> resolve(const TriangleMesh& mesh) const;
};

struct FixedSpec {
    VertexSelection selection;
    std::array<bool, 3> axes{true, true, true};
};

/// `value` is applied to every selected vertex, or split evenly across them
/// when `total` is set.
struct ForceSpec {
    VertexSelection selection;
    Vec3 value = Vec3::Zero();
    bool total = false;
};

struct BoundarySpec {
    std::vector<FixedSpec> fixed;
    std::vector<ForceSpec> forces;

    BoundaryConditions resolve(const TriangleMesh& mesh) const;
};

/// Everything needed to run the precompute chain for one mesh.
struct SessionConfig {
    std::string name;
    /// Absolute, or relative to the config file when loaded from disk.
    std::filesystem::path mesh_path;
    BoundarySpec boundary;
    MaterialParams material;
    double gamma = 1.0;
    AnisotropySettings anisotropy;
    int k = 6;
    int max_depth = 10;
    MassLumping lumping = MassLumping::Barycentric;
    Normalization normalization = Normalization::Euclidean;
    std::uint64_t seed = EigenSolverOptions{}.seed;

    void validate() const;
};

void to_json(nlohmann::json& j, const VertexSelection& s);
void from_json(const nlohmann::json& j, VertexSelection& s);
void to_json(nlohmann::json& j, const BoundarySpec& b);
void from_json(const nlohmann::json& j, BoundarySpec& b);
void to_json(nlohmann::json& j, const MaterialParams& m);
void from_json(const nlohmann::json& j, MaterialParams& m);
void to_json(nlohmann::json& j, const AnisotropySettings& a);
void from_json(const nlohmann::json& j, AnisotropySettings& a);
void to_json(nlohmann::json& j, const SessionConfig& c);
void from_json(const nlohmann::json& j, SessionConfig& c);

/// Parses a config file; a relative mesh path is resolved against its directory.
SessionConfig load_config(const std::filesystem::path& path);

} // namespace diffstruct
