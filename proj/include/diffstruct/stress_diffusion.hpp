#pragma once

#include "diffstruct/mesh.hpp"
#include "diffstruct/shell_fem.hpp"
#include "diffstruct/types.hpp"

#include <optional>
#include <vector>

namespace diffstruct {

/// 2x2 stress in a face's tangent basis with its eigen-decomposition.
/// Eigenvalues are ordered by magnitude, |eigenvalues[0]| <= |eigenvalues[1]|;
/// column i of `eigenvectors` belongs to eigenvalue i.
struct TangentStress {
    Mat2 matrix = Mat2::Zero();
    Vec2 eigenvalues = Vec2::Zero();
    Mat2 eigenvectors = Mat2::Identity();

    static TangentStress from_matrix(const Mat2& S);
    TangentStress scaled(double c) const { return from_matrix(c * matrix); }
};

struct AnisotropySettings {
    static constexpr double kMinRatio = 1.0;
    static constexpr double kMaxRatio = 1e4;

    /// Prescribed anisotropy ratio; clamped to [1, 1e4] by `ratio()`.
    double r = 100.0;
    /// Faces with 1 - |l1|/|l2| <= tolerance are isotropic.
    double isotropy_tolerance = 1e-3;
    /// Absolute stress floor. When unset, 1e-12 * max face |l2| is used.
    std::optional<double> stress_floor;

    double ratio() const;
    void validate() const;
};

/// Remapped per-face tensors in the face tangent basis.
struct DiffusionTensor {
    Mat2 major = Mat2::Identity();
    Mat2 minor = Mat2::Identity();
    bool isotropic = true;
};

using DiffusionTensorField = std::vector<DiffusionTensor>;

/// S2 = B^T sigma B with B = [t1 t2].
TangentStress project_to_tangent(const Mat3& stress, const FaceFrame& frame);
std::vector<TangentStress> project_to_tangent(const StressField& stress, const std::vector<FaceFrame>& frames);

/// True when the face is numerically isotropic.
bool classify(const TangentStress& s, double isotropy_tolerance, double stress_floor);

/// Absolute stress floor for a field under `settings`.
double resolve_stress_floor(const std::vector<TangentStress>& field, const AnisotropySettings& settings);

/// Anisotropic faces: the major tensor carries r along the larger-magnitude
/// eigenvector and 1 along the other, the minor tensor swaps them.
/// Isotropic faces map to the identity in both.
DiffusionTensor remap(const TangentStress& s, bool isotropic, double r);

/// classify + remap over the whole field (parallel over faces).
DiffusionTensorField stress_to_diffusion(const std::vector<TangentStress>& field, const AnisotropySettings& settings);

/// Lifts a tangent-basis vector to world coordinates.
inline Vec3 to_world(const FaceFrame& frame, const Vec2& v) { return v.x() * frame.t1 + v.y() * frame.t2; }

} // namespace diffstruct
