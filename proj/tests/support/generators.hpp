#pragma once

#include "diffstruct/mesh.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace testing_support {

using diffstruct::TriangleMesh;

/// nx x ny vertex grid on [0, width] x [0, height] in the z = 0 plane, alternating diagonals.
TriangleMesh grid_mesh(int nx, int ny, double width, double height);

/// UV sphere: one vertex per pole, rings - 1 latitude rings of `segments` vertices.
TriangleMesh uv_sphere(int segments, int rings, double radius = 1.0);

/// Unit icosphere with `levels` rounds of 1:4 midpoint subdivision.
TriangleMesh icosphere(int levels);

TriangleMesh torus(int nu, int nv, double major = 1.0, double minor = 0.35);

/// Gently curved grid patch with jittered vertices (nx * ny vertices).
TriangleMesh random_patch(int nx, int ny, std::uint64_t seed);

/// One round of 1:4 midpoint subdivision without moving vertices.
TriangleMesh subdivide(const TriangleMesh& mesh);

/// Path into the bundled data directory.
std::filesystem::path data_path(const std::string& relative);

} // namespace testing_support
