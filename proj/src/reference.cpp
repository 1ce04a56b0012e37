#include "diffstruct/reference.hpp"

#include "diffstruct/errors.hpp"

#include <algorithm>
#include <random>

namespace diffstruct::reference {

SparseMatrix assemble_membrane_hessian(const TriangleMesh& mesh, const MaterialParams& material)
{
    std::vector<Triplet> triplets;
    triplets.reserve(static_cast<std::size_t>(mesh.num_faces()) * 81);
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const auto K = membrane_element_hessian(mesh, f, material);
        for (int a = 0; a < 9; ++a)
            for (int b = 0; b < 9; ++b)
                triplets.emplace_back(3 * mesh.faces()(f, a / 3) + a % 3, 3 * mesh.faces()(f, b / 3) + b % 3, K(a, b));
    }
    SparseMatrix H(3 * mesh.num_vertices(), 3 * mesh.num_vertices());
    H.setFromTriplets(triplets.begin(), triplets.end());
    return H;
}

SparseMatrix assemble_bending_hessian(const TriangleMesh& mesh, const std::vector<EdgeHinge>& hinges,
                                      const MaterialParams& material)
{
    std::vector<Triplet> triplets;
    triplets.reserve(hinges.size() * 144);
    for (const EdgeHinge& h : hinges) {
        const auto K = bending_element_hessian(mesh, h, material);
        const int verts[4] = {h.v0, h.v1, h.opp0, h.opp1};
        for (int a = 0; a < 12; ++a)
            for (int b = 0; b < 12; ++b) triplets.emplace_back(3 * verts[a / 3] + a % 3, 3 * verts[b / 3] + b % 3, K(a, b));
    }
    SparseMatrix H(3 * mesh.num_vertices(), 3 * mesh.num_vertices());
    H.setFromTriplets(triplets.begin(), triplets.end());
    return H;
}

StressField cauchy_stress(const TriangleMesh& rest, const Eigen::VectorXd& u, const MaterialParams& material)
{
    StressField stress(rest.num_faces());
    for (int f = 0; f < rest.num_faces(); ++f) {
        Mat3 grad = Mat3::Zero();
        const Mat3 phi = face_projection(rest, f);
        for (int c = 0; c < 3; ++c) grad += u.segment<3>(3 * rest.faces()(f, c)) * phi.row(c);
        const Vec3 n = (rest.corner(f, 1) - rest.corner(f, 0)).cross(rest.corner(f, 2) - rest.corner(f, 0)).normalized();
        const Mat3 P = Mat3::Identity() - n * n.transpose();
        const Mat3 eps = 0.5 * P * (grad + grad.transpose()) * P;
        stress[f] = 2.0 * material.mu() * eps + material.lambda() * eps.trace() * P;
    }
    return stress;
}

DiffusionTensorField stress_to_diffusion(const std::vector<TangentStress>& field, const AnisotropySettings& settings)
{
    const double floor = resolve_stress_floor(field, settings);
    DiffusionTensorField out;
    out.reserve(field.size());
    for (const auto& s : field) out.push_back(remap(s, classify(s, settings.isotropy_tolerance, floor), settings.ratio()));
    return out;
}

SparseMatrix assemble_anisotropic(const TriangleMesh& mesh, const std::vector<FaceFrame>& frames,
                                  const std::vector<Mat2>& tensors)
{
    if (static_cast<int>(frames.size()) != mesh.num_faces() || static_cast<int>(tensors.size()) != mesh.num_faces()) {
        throw ConfigError("per-face frames and tensors must match the face count");
    }
    std::vector<Triplet> triplets;
    triplets.reserve(static_cast<std::size_t>(mesh.num_faces()) * 9);
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const auto g = hat_gradients(mesh, frames[f], f);
        const Mat3 Le = frames[f].area * g.transpose() * (0.5 * (tensors[f] + tensors[f].transpose())) * g;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) triplets.emplace_back(mesh.faces()(f, i), mesh.faces()(f, j), Le(i, j));
    }
    SparseMatrix L(mesh.num_vertices(), mesh.num_vertices());
    L.setFromTriplets(triplets.begin(), triplets.end());
    return L;
}

double coverage(const StripeField& field, std::int64_t samples, std::uint64_t seed)
{
    if (samples < 1) throw ConfigError("coverage needs at least one sample");
    const TriangleMesh& mesh = field.mesh();
    std::vector<double> cdf(mesh.num_faces());
    double acc = 0.0;
    for (int f = 0; f < mesh.num_faces(); ++f) cdf[f] = acc += mesh.face_area(f);
    if (cdf.empty()) return 0.0;

    constexpr std::int64_t kChunk = 4096;
    std::int64_t hits = 0;
    for (std::int64_t c = 0; c * kChunk < samples; ++c) {
        std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(c));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (std::int64_t s = c * kChunk; s < std::min(samples, (c + 1) * kChunk); ++s) {
            const double pick = unit(rng) * acc;
            const int f = std::min<int>(mesh.num_faces() - 1, static_cast<int>(std::upper_bound(cdf.begin(), cdf.end(), pick) - cdf.begin()));
            const double r1 = unit(rng);
            const double r2 = unit(rng);
            hits += field.inside(f, uniform_barycentric(r1, r2)) ? 1 : 0;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(samples);
}

} // namespace diffstruct::reference
