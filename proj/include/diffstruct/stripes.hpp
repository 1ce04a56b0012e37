#pragma once

#include "diffstruct/mesh.hpp"
#include "diffstruct/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>

namespace diffstruct {

/// Zero-mean triangle wave with period 1: +1 at integers, -1 at half-integers.
inline double triangle_wave(double x) { return 1.0 - 4.0 * std::abs(x - std::round(x)); }

/// One point of the structure family: the six real-time stripe parameters,
/// the 1-based mode indices, and the two non-real-time knobs (force scale
/// gamma and anisotropy r). JSON keys: gamma, r, a, b, mU, mW, alphaU,
/// alphaW, betaU, betaW.
struct StripeParams {
    int a = 1;
    int b = 1;
    double alpha_u = 8.0;
    double alpha_w = 8.0;
    double beta_u = 0.0;
    double beta_w = 0.0;
    double m_u = 0.0;
    double m_w = 0.0;
    double gamma = 1.0;
    double r = 100.0;

    /// Throws ConfigError if a or b exceed `mode_count` or a frequency is not positive.
    void validate(int mode_count) const;

    bool operator==(const StripeParams&) const = default;
};

void to_json(nlohmann::json& j, const StripeParams& p);
void from_json(const nlohmann::json& j, StripeParams& p);

/// Per-vertex stripe inputs (upsilon from the major mode, omega from the
/// minor mode) plus the parameters; values are linear over each face.
class StripeField {
public:
    StripeField(const TriangleMesh& mesh, Eigen::VectorXd upsilon, Eigen::VectorXd omega, StripeParams params);

    /// Selects columns a-1 and b-1 of the mode matrices.
    static StripeField from_modes(const TriangleMesh& mesh, const Eigen::MatrixXd& u_modes,
                                  const Eigen::MatrixXd& w_modes, const StripeParams& params);

    const TriangleMesh& mesh() const { return *mesh_; }
    const Eigen::VectorXd& upsilon() const { return upsilon_; }
    const Eigen::VectorXd& omega() const { return omega_; }
    const StripeParams& params() const { return params_; }

    /// (s1, s2) at a barycentric point of a face.
    Vec2 eval(int face, const Vec3& barycentric) const;

    /// max(s1, s2) > 0.
    bool inside(int face, const Vec3& barycentric) const;

    /// Area-weighted Monte-Carlo estimate of the inside fraction.
    double coverage(std::int64_t samples, std::uint64_t seed = 1) const;

private:
    const TriangleMesh* mesh_;
    Eigen::VectorXd upsilon_;
    Eigen::VectorXd omega_;
    StripeParams params_;
};

/// (s1, s2) from interpolated mode values.
inline Vec2 stripe_values(double upsilon, double omega, const StripeParams& p)
{
    return {triangle_wave(p.alpha_u * upsilon + p.beta_u) - p.m_u,
            triangle_wave(p.alpha_w * omega + p.beta_w) - p.m_w};
}

inline bool indicator(const Vec2& s) { return std::max(s.x(), s.y()) > 0.0; }

/// Uniform point in a triangle from two unit-interval samples.
Vec3 uniform_barycentric(double r1, double r2);

} // namespace diffstruct
