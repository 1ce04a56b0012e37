// OpenMP kernels against their serial references on UV spheres of growing
// resolution. Run with OMP_NUM_THREADS set to compare scaling.

#include "generators.hpp"

#include "diffstruct/pipeline.hpp"
#include "diffstruct/reference.hpp"

#include <benchmark/benchmark.h>

#include <map>
#include <memory>

using namespace diffstruct;
namespace ts = testing_support;

namespace {

struct Fixture {
    TriangleMesh mesh;
    std::vector<FaceFrame> frames;
    std::vector<EdgeHinge> hinges;
    MaterialParams material;
    Eigen::VectorXd u;
    std::vector<TangentStress> stress;
    std::vector<Mat2> tensors;
    std::unique_ptr<StripeField> field;
};

const Fixture& fixture(int segments)
{
    static std::map<int, std::unique_ptr<Fixture>> cache;
    auto& slot = cache[segments];
    if (slot) return *slot;
    slot = std::make_unique<Fixture>();
    Fixture& f = *slot;
    f.mesh = ts::uv_sphere(segments, segments / 2);
    f.frames = build_face_frames(f.mesh);
    f.hinges = build_hinges(f.mesh);
    f.u = Eigen::VectorXd::Random(3 * f.mesh.num_vertices()) * 1e-3;
    f.stress = project_to_tangent(cauchy_stress(f.mesh, f.u, f.material), f.frames);
    for (const DiffusionTensor& d : stress_to_diffusion(f.stress, AnisotropySettings{})) f.tensors.push_back(d.major);
    Eigen::VectorXd z(f.mesh.num_vertices());
    for (int v = 0; v < f.mesh.num_vertices(); ++v) z[v] = f.mesh.vertex(v).z();
    StripeParams p;
    p.alpha_u = p.alpha_w = 6.0;
    f.field = std::make_unique<StripeField>(f.mesh, z, f.mesh.positions().col(0), p);
    return f;
}

void args(benchmark::internal::Benchmark* b)
{
    for (int s : {32, 64, 128}) b->Arg(s);
    b->Unit(benchmark::kMillisecond);
}

#define KERNEL_PAIR(name, parallel_call, serial_call)                                  \
    void BM_##name##_parallel(benchmark::State& state)                                 \
    {                                                                                   \
        const Fixture& f = fixture(static_cast<int>(state.range(0)));                   \
        for (auto _ : state) benchmark::DoNotOptimize(parallel_call);                   \
        state.counters["faces"] = f.mesh.num_faces();                                   \
    }                                                                                   \
    void BM_##name##_serial(benchmark::State& state)                                   \
    {                                                                                   \
        const Fixture& f = fixture(static_cast<int>(state.range(0)));                   \
        for (auto _ : state) benchmark::DoNotOptimize(serial_call);                     \
        state.counters["faces"] = f.mesh.num_faces();                                   \
    }                                                                                   \
    BENCHMARK(BM_##name##_parallel)->Apply(args);                                      \
    BENCHMARK(BM_##name##_serial)->Apply(args);

KERNEL_PAIR(membrane_hessian, assemble_membrane_hessian(f.mesh, f.material),
            reference::assemble_membrane_hessian(f.mesh, f.material))
KERNEL_PAIR(bending_hessian, assemble_bending_hessian(f.mesh, f.hinges, f.material),
            reference::assemble_bending_hessian(f.mesh, f.hinges, f.material))
KERNEL_PAIR(cauchy_stress, cauchy_stress(f.mesh, f.u, f.material), reference::cauchy_stress(f.mesh, f.u, f.material))
KERNEL_PAIR(stress_remap, stress_to_diffusion(f.stress, AnisotropySettings{}),
            reference::stress_to_diffusion(f.stress, AnisotropySettings{}))
KERNEL_PAIR(anisotropic_operator, assemble_anisotropic(f.mesh, f.frames, f.tensors),
            reference::assemble_anisotropic(f.mesh, f.frames, f.tensors))
KERNEL_PAIR(coverage, f.field->coverage(200000), reference::coverage(*f.field, 200000))

} // namespace

BENCHMARK_MAIN();
