#include "diffstruct/stripes.hpp"

#include "diffstruct/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace diffstruct {

void StripeParams::validate(int mode_count) const
{
    if (a < 1 || a > mode_count) {
        throw ConfigError("major mode index a=" + std::to_string(a) + " outside [1, " + std::to_string(mode_count) + "]");
    }
    if (b < 1 || b > mode_count) {
        throw ConfigError("minor mode index b=" + std::to_string(b) + " outside [1, " + std::to_string(mode_count) + "]");
    }
    if (!(alpha_u > 0.0) || !(alpha_w > 0.0)) throw ConfigError("stripe frequencies must be positive");
    if (!std::isfinite(beta_u) || !std::isfinite(beta_w) || !std::isfinite(m_u) || !std::isfinite(m_w)) {
        throw ConfigError("stripe phases and thresholds must be finite");
    }
}

void to_json(nlohmann::json& j, const StripeParams& p)
{
    j = nlohmann::json{{"gamma", p.gamma},     {"r", p.r},           {"a", p.a},
                       {"b", p.b},             {"mU", p.m_u},        {"mW", p.m_w},
                       {"alphaU", p.alpha_u},  {"alphaW", p.alpha_w}, {"betaU", p.beta_u},
                       {"betaW", p.beta_w}};
}

void from_json(const nlohmann::json& j, StripeParams& p)
{
    if (!j.is_object()) throw ConfigError("stripe parameters must be a JSON object");
    StripeParams d;
    p.gamma = j.value("gamma", d.gamma);
    p.r = j.value("r", d.r);
    p.a = j.value("a", d.a);
    p.b = j.value("b", d.b);
    p.m_u = j.value("mU", d.m_u);
    p.m_w = j.value("mW", d.m_w);
    p.alpha_u = j.value("alphaU", d.alpha_u);
    p.alpha_w = j.value("alphaW", d.alpha_w);
    p.beta_u = j.value("betaU", d.beta_u);
    p.beta_w = j.value("betaW", d.beta_w);
}

StripeField::StripeField(const TriangleMesh& mesh, Eigen::VectorXd upsilon, Eigen::VectorXd omega,
                         StripeParams params)
    : mesh_(&mesh), upsilon_(std::move(upsilon)), omega_(std::move(omega)), params_(params)
{
    if (upsilon_.size() != mesh.num_vertices() || omega_.size() != mesh.num_vertices()) {
        throw ConfigError("stripe inputs must have one value per vertex");
    }
}

StripeField StripeField::from_modes(const TriangleMesh& mesh, const Eigen::MatrixXd& u_modes,
                                    const Eigen::MatrixXd& w_modes, const StripeParams& params)
{
    params.validate(static_cast<int>(std::min(u_modes.cols(), w_modes.cols())));
    return StripeField(mesh, u_modes.col(params.a - 1), w_modes.col(params.b - 1), params);
}

Vec2 StripeField::eval(int face, const Vec3& barycentric) const
{
    double up = 0.0;
    double om = 0.0;
    for (int c = 0; c < 3; ++c) {
        const int v = mesh_->faces()(face, c);
        up += barycentric[c] * upsilon_[v];
        om += barycentric[c] * omega_[v];
    }
    return stripe_values(up, om, params_);
}

bool StripeField::inside(int face, const Vec3& barycentric) const { return indicator(eval(face, barycentric)); }

Vec3 uniform_barycentric(double r1, double r2)
{
    const double s = std::sqrt(r1);
    return {1.0 - s, s * (1.0 - r2), s * r2};
}

double StripeField::coverage(std::int64_t samples, std::uint64_t seed) const
{
    if (samples < 1) throw ConfigError("coverage needs at least one sample");
    const int nf = mesh_->num_faces();
    if (nf == 0) return 0.0;
    std::vector<double> cdf(nf);
    double acc = 0.0;
    for (int f = 0; f < nf; ++f) {
        acc += mesh_->face_area(f);
        cdf[f] = acc;
    }

    // Fixed-size chunks with per-chunk seeds keep the estimate independent of the thread count.
    constexpr std::int64_t kChunk = 4096;
    const std::int64_t chunks = (samples + kChunk - 1) / kChunk;
    std::int64_t hits = 0;
#pragma omp parallel for schedule(static) reduction(+ : hits)
    for (std::int64_t c = 0; c < chunks; ++c) {
        std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(c));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const std::int64_t end = std::min(samples, (c + 1) * kChunk);
        for (std::int64_t s = c * kChunk; s < end; ++s) {
            const double pick = unit(rng) * acc;
            const int f = std::min<int>(nf - 1, static_cast<int>(std::upper_bound(cdf.begin(), cdf.end(), pick) - cdf.begin()));
            const double r1 = unit(rng);
            const double r2 = unit(rng);
            if (inside(f, uniform_barycentric(r1, r2))) ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(samples);
}

} // namespace diffstruct
