#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <variant>

#include <Eigen/Dense>

namespace fescale::material {

/// 2D tensors in gradient layout (11, 12, 21, 22).
using Vector4 = Eigen::Matrix<double, 4, 1>;
using Matrix4 = Eigen::Matrix<double, 4, 4>;

struct ElasticParams {
    double youngs_modulus = 1.0; // MPa
    double poisson_ratio = 0.0;

    double shear_modulus() const { return youngs_modulus / (2.0 * (1.0 + poisson_ratio)); }
    double bulk_modulus() const { return youngs_modulus / (3.0 * (1.0 - 2.0 * poisson_ratio)); }
    double lame_lambda() const
    {
        return youngs_modulus * poisson_ratio / ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio));
    }

    void validate() const
    {
        if (!(youngs_modulus > 0.0)) throw std::invalid_argument("Young's modulus must be positive");
        if (!(poisson_ratio > -1.0 && poisson_ratio < 0.5)) {
            throw std::invalid_argument("Poisson ratio must lie in (-1, 0.5)");
        }
    }
};

/// von Mises plasticity with linear isotropic hardening.
struct PlasticParams {
    ElasticParams elastic;
    double yield_stress = 1.0;      // sigma_0, MPa
    double hardening_modulus = 0.0; // h, MPa

    void validate() const
    {
        elastic.validate();
        if (!(yield_stress > 0.0)) throw std::invalid_argument("yield stress must be positive");
        if (!(hardening_modulus >= 0.0)) throw std::invalid_argument("hardening modulus must be non-negative");
    }
};

using MaterialParams = std::variant<ElasticParams, PlasticParams>;

inline const ElasticParams& elastic_part(const MaterialParams& params)
{
    if (const auto* p = std::get_if<PlasticParams>(&params)) return p->elastic;
    return std::get<ElasticParams>(params);
}

inline void validate(const MaterialParams& params)
{
    std::visit([](const auto& p) { p.validate(); }, params);
}

/// Plastic strain components 11, 22, 33, 12 and accumulated plastic strain.
struct MaterialState {
    double eps_p11 = 0.0;
    double eps_p22 = 0.0;
    double eps_p33 = 0.0;
    double eps_p12 = 0.0;
    double alpha_bar = 0.0;

    double plastic_trace() const { return eps_p11 + eps_p22 + eps_p33; }
    bool operator==(const MaterialState&) const = default;
};

struct StressResult {
    Vector4 sigma = Vector4::Zero(); // in-plane Cauchy stress, gradient layout
    double sigma33 = 0.0;            // out-of-plane stress
    Matrix4 tangent = Matrix4::Zero(); // d sigma / d h
    MaterialState new_state;
    bool plastic_active = false;
};

/// Plane-strain elastic stiffness in gradient layout (maps h, not sym(h)).
inline Matrix4 elastic_stiffness(const ElasticParams& p)
{
    const double lam = p.lame_lambda();
    const double mu = p.shear_modulus();
    Matrix4 c;
    // rows/cols: 11, 12, 21, 22
    c << lam + 2 * mu, 0, 0, lam,
        0, mu, mu, 0,
        0, mu, mu, 0,
        lam, 0, 0, lam + 2 * mu;
    return c;
}

namespace detail {

// In-plane index pairs for the gradient layout.
inline constexpr int kI[4] = {0, 0, 1, 1};
inline constexpr int kJ[4] = {0, 1, 0, 1};

inline double delta(int a, int b) { return a == b ? 1.0 : 0.0; }

} // namespace detail

/// Backward-Euler radial return with the algorithmically consistent tangent.
/// Pure: the returned state is a trial value until the caller commits it.
inline StressResult evaluate(const MaterialParams& params, const Vector4& h, const MaterialState& state)
{
    const ElasticParams& el = elastic_part(params);
    const double mu = el.shear_modulus();
    const double kappa = el.bulk_modulus();

    // total strain = sym(h), eps33 = 0
    const double e11 = h[0];
    const double e22 = h[3];
    const double e12 = 0.5 * (h[1] + h[2]);

    const double ee11 = e11 - state.eps_p11;
    const double ee22 = e22 - state.eps_p22;
    const double ee33 = -state.eps_p33;
    const double ee12 = e12 - state.eps_p12;
    const double tr = ee11 + ee22 + ee33;
    const double pressure = kappa * tr;

    double s11 = 2 * mu * (ee11 - tr / 3.0);
    double s22 = 2 * mu * (ee22 - tr / 3.0);
    double s33 = 2 * mu * (ee33 - tr / 3.0);
    double s12 = 2 * mu * ee12;

    StressResult out;
    out.new_state = state;
    out.tangent = elastic_stiffness(el);

    const auto* plastic = std::get_if<PlasticParams>(&params);
    if (plastic != nullptr) {
        const double s_norm = std::sqrt(s11 * s11 + s22 * s22 + s33 * s33 + 2 * s12 * s12);
        const double q_trial = std::sqrt(1.5) * s_norm;
        const double yield = plastic->yield_stress + plastic->hardening_modulus * state.alpha_bar;
        const double f_trial = q_trial - yield;
        if (f_trial > 1e-12 * yield) {
            const double hard = plastic->hardening_modulus;
            const double dgamma = f_trial / (3 * mu + hard);
            const double n11 = s11 / s_norm;
            const double n22 = s22 / s_norm;
            const double n33 = s33 / s_norm;
            const double n12 = s12 / s_norm;
            const double flow = std::sqrt(1.5) * dgamma;

            out.new_state.eps_p11 += flow * n11;
            out.new_state.eps_p22 += flow * n22;
            out.new_state.eps_p33 += flow * n33;
            out.new_state.eps_p12 += flow * n12;
            out.new_state.alpha_bar += dgamma;
            out.plastic_active = true;

            const double scale = 1.0 - 3 * mu * dgamma / q_trial;
            s11 *= scale;
            s22 *= scale;
            s33 *= scale;
            s12 *= scale;

            // C = K 1x1 + 2 mu scale I_dev + 6 mu^2 (dgamma/q_trial - 1/(3 mu + h)) n x n
            const double nn = 6 * mu * mu * (dgamma / q_trial - 1.0 / (3 * mu + hard));
            const double n2[2][2] = {{n11, n12}, {n12, n22}};
            for (int a = 0; a < 4; ++a) {
                const int i = detail::kI[a];
                const int j = detail::kJ[a];
                for (int b = 0; b < 4; ++b) {
                    const int k = detail::kI[b];
                    const int l = detail::kJ[b];
                    const double d_ij_kl = detail::delta(i, j) * detail::delta(k, l);
                    const double i_sym = 0.5 * (detail::delta(i, k) * detail::delta(j, l) +
                                                detail::delta(i, l) * detail::delta(j, k));
                    out.tangent(a, b) = kappa * d_ij_kl + 2 * mu * scale * (i_sym - d_ij_kl / 3.0) +
                                        nn * n2[i][j] * n2[k][l];
                }
            }
        }
    }

    out.sigma << s11 + pressure, s12, s12, s22 + pressure;
    out.sigma33 = s33 + pressure;
    return out;
}

struct TangentCheck {
    double max_relative_error = 0.0;
    bool near_kink = false; // perturbations straddle the elastic/plastic switch
};

/// Central finite differences of sigma against the returned tangent, relative
/// to the largest tangent entry.
inline TangentCheck tangent_check(const MaterialParams& params, const Vector4& h, const MaterialState& state)
{
    const StressResult base = evaluate(params, h, state);
    const double step = 1e-7 * std::max(1.0, h.norm());
    Matrix4 fd;
    bool kink = false;
    for (int b = 0; b < 4; ++b) {
        Vector4 hp = h;
        Vector4 hm = h;
        hp[b] += step;
        hm[b] -= step;
        const StressResult rp = evaluate(params, hp, state);
        const StressResult rm = evaluate(params, hm, state);
        kink = kink || rp.plastic_active != base.plastic_active || rm.plastic_active != base.plastic_active;
        fd.col(b) = (rp.sigma - rm.sigma) / (2 * step);
    }
    const double scale = base.tangent.cwiseAbs().maxCoeff();
    return {(fd - base.tangent).cwiseAbs().maxCoeff() / scale, kink};
}

/// von Mises equivalent stress including the out-of-plane component.
inline double von_mises(const Vector4& sigma, double sigma33)
{
    const double p = (sigma[0] + sigma[3] + sigma33) / 3.0;
    const double s11 = sigma[0] - p;
    const double s22 = sigma[3] - p;
    const double s33 = sigma33 - p;
    const double s12 = 0.5 * (sigma[1] + sigma[2]);
    return std::sqrt(1.5 * (s11 * s11 + s22 * s22 + s33 * s33 + 2 * s12 * s12));
}

} // namespace fescale::material
