#include "diffstruct/stress_diffusion.hpp"

#include "diffstruct/errors.hpp"

#include <algorithm>
#include <cmath>

namespace diffstruct {

TangentStress TangentStress::from_matrix(const Mat2& S)
{
    TangentStress t;
    t.matrix = 0.5 * (S + S.transpose());
    const double a = t.matrix(0, 0);
    const double b = t.matrix(0, 1);
    const double d = t.matrix(1, 1);
    const double mean = 0.5 * (a + d);
    const double radius = std::hypot(0.5 * (a - d), b);
    const double hi = mean + radius;
    const double lo = mean - radius;

    // Eigenvector of `hi`: angle of the principal axis.
    const double angle = 0.5 * std::atan2(2.0 * b, a - d);
    const Vec2 v_hi(std::cos(angle), std::sin(angle));
    const Vec2 v_lo(-v_hi.y(), v_hi.x());

    if (std::abs(lo) <= std::abs(hi)) {
        t.eigenvalues << lo, hi;
        t.eigenvectors.col(0) = v_lo;
        t.eigenvectors.col(1) = v_hi;
    } else {
        t.eigenvalues << hi, lo;
        t.eigenvectors.col(0) = v_hi;
        t.eigenvectors.col(1) = v_lo;
    }
    return t;
}

double AnisotropySettings::ratio() const { return std::clamp(r, kMinRatio, kMaxRatio); }

void AnisotropySettings::validate() const
{
    if (!std::isfinite(r)) throw ConfigError("anisotropy ratio r must be finite");
    if (!(isotropy_tolerance > 0.0 && isotropy_tolerance < 1.0)) {
        throw ConfigError("isotropy tolerance must lie in (0, 1)");
    }
    if (stress_floor && !(*stress_floor >= 0.0)) throw ConfigError("stress floor must be nonnegative");
}

TangentStress project_to_tangent(const Mat3& stress, const FaceFrame& frame)
{
    const auto B = frame.basis();
    return TangentStress::from_matrix(B.transpose() * stress * B);
}

std::vector<TangentStress> project_to_tangent(const StressField& stress, const std::vector<FaceFrame>& frames)
{
    if (stress.size() != frames.size()) throw ConfigError("stress field and frames differ in length");
    std::vector<TangentStress> out(stress.size());
    const auto n = static_cast<long>(stress.size());
#pragma omp parallel for schedule(static)
    for (long f = 0; f < n; ++f) out[f] = project_to_tangent(stress[f], frames[f]);
    return out;
}

bool classify(const TangentStress& s, double isotropy_tolerance, double stress_floor)
{
    const double l1 = std::abs(s.eigenvalues[0]);
    const double l2 = std::abs(s.eigenvalues[1]);
    if (l2 <= stress_floor || l2 == 0.0) return true;
    return 1.0 - l1 / l2 <= isotropy_tolerance;
}

double resolve_stress_floor(const std::vector<TangentStress>& field, const AnisotropySettings& settings)
{
    if (settings.stress_floor) return *settings.stress_floor;
    double peak = 0.0;
    for (const auto& s : field) peak = std::max(peak, std::abs(s.eigenvalues[1]));
    return 1e-12 * peak;
}

DiffusionTensor remap(const TangentStress& s, bool isotropic, double r)
{
    DiffusionTensor d;
    d.isotropic = isotropic;
    if (isotropic) return d;
    const Vec2 weak = s.eigenvectors.col(0);
    const Vec2 strong = s.eigenvectors.col(1);
    const Mat2 Pw = weak * weak.transpose();
    const Mat2 Ps = strong * strong.transpose();
    d.major = r * Ps + Pw;
    d.minor = Ps + r * Pw;
    return d;
}

DiffusionTensorField stress_to_diffusion(const std::vector<TangentStress>& field, const AnisotropySettings& settings)
{
    settings.validate();
    const double floor = resolve_stress_floor(field, settings);
    const double r = settings.ratio();
    DiffusionTensorField out(field.size());
    const auto n = static_cast<long>(field.size());
#pragma omp parallel for schedule(static)
    for (long f = 0; f < n; ++f) {
        out[f] = remap(field[f], classify(field[f], settings.isotropy_tolerance, floor), r);
    }
    return out;
}

} // namespace diffstruct
