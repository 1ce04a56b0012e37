#pragma once

#include "diffstruct/mesh.hpp"
#include "diffstruct/stripes.hpp"
#include "diffstruct/types.hpp"

#include <cstdint>
#include <vector>

namespace diffstruct {

enum class Family : int { Major = 0, Minor = 1 };

/// Wave arguments x in the open interval (lo + tol, hi - tol) where p(x) = m,
/// ascending. Thresholds with |m| >= 1 only touch the wave and yield none.
std::vector<double> level_crossings(double lo, double hi, double m, double tol = 0.0);

inline int count_level_crossings(double lo, double hi, double m, double tol = 0.0)
{
    return static_cast<int>(level_crossings(lo, hi, m, tol).size());
}

struct CrossingCount {
    int major = 0;
    int minor = 0;

    int max() const { return major > minor ? major : minor; }
};

/// Snapping tolerance in wave-argument units for one family of a field.
double argument_tolerance(const Eigen::VectorXd& values, double alpha);

/// Isolines of each family crossing the face, from its linear value range.
CrossingCount count_crossings(const StripeField& field, int face);

/// Midpoint-refined copy of the input with linearly interpolated stripe inputs.
struct RefinedMesh {
    Positions positions;
    Faces faces;
    Eigen::VectorXd upsilon;
    Eigen::VectorXd omega;
    /// Input face each refined face descends from.
    std::vector<int> source_face;
    int rounds = 0;
    /// Faces still crossed more than once per family when the depth cap hit.
    int unresolved_faces = 0;
    double area_epsilon = 0.0;

    int num_faces() const { return static_cast<int>(faces.rows()); }
    double face_area(int f) const;
    double total_area() const;
};

/// Red-green refinement of every face crossed more than once by either
/// family, repeated until none remain or `max_depth` rounds were applied.
RefinedMesh adaptive_subdivide(const StripeField& field, int max_depth);

/// Triangle mesh of the structure: every face is sign-pure.
struct ExtractedMesh {
    TriangleMesh mesh;
    std::vector<int> source_face;
    /// Bit 0: s1 > 0 at the centroid, bit 1: s2 > 0, bit 2: kept as solid.
    std::vector<std::uint8_t> inside_flags;
    /// Stripe inputs at the output vertices.
    Eigen::VectorXd upsilon;
    Eigen::VectorXd omega;
    double kept_area = 0.0;
    double discarded_area = 0.0;
    double refined_area = 0.0;
    int unresolved_faces = 0;

    bool empty() const { return mesh.num_faces() == 0; }
};

/// Cuts every refined face along the isolines of both families (major first)
/// and keeps the sub-triangles whose centroid is inside. Sub-triangles of
/// input faces flagged in `solid_faces` (empty, or one flag per input face)
/// are kept regardless of the indicator.
ExtractedMesh cut_and_discard(const RefinedMesh& refined, const StripeParams& params,
                              const std::vector<std::uint8_t>& solid_faces = {});

struct ExtractionOptions {
    int max_depth = 10;
    /// Optional per-input-face flags of regions to keep whole (supports, load pads).
    std::vector<std::uint8_t> solid_faces;
};

ExtractedMesh extract(const StripeField& field, const ExtractionOptions& options = {});

} // namespace diffstruct
