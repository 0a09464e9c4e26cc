#ifndef GBMPO_DIVERGENCE_HPP
#define GBMPO_DIVERGENCE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "gbmpo/simplex.hpp"

namespace gbmpo {

// ---------------------------------------------------------------------------
// Activation families of the neural inverse potential
// ---------------------------------------------------------------------------

enum class ActivationKind : std::uint8_t { Cubic, Quadratic, SquareRoot, CubeRoot, LogShifted, Exponential };

inline constexpr std::size_t kMirrorUnits = 126;
inline constexpr std::size_t kUnitsPerKind = 21;
inline constexpr std::size_t kMirrorParamCount = 3 * kMirrorUnits + 2;  // 380

/// Shift inside the logarithmic activation.
inline constexpr double kLogShift = 1e-3;
/// Exponential arguments are clamped to this value.
inline constexpr double kExpArgCap = 60.0;

/// Activation kind of unit `j` (0-based). Units come in six consecutive
/// blocks of 21: cubic, quadratic, square root, cube root, log, exp.
constexpr ActivationKind activation_of_unit(std::size_t j) {
    return static_cast<ActivationKind>(j / kUnitsPerKind);
}

inline const char* to_string(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::Cubic: return "cubic";
        case ActivationKind::Quadratic: return "quadratic";
        case ActivationKind::SquareRoot: return "sqrt";
        case ActivationKind::CubeRoot: return "cbrt";
        case ActivationKind::LogShifted: return "log";
        case ActivationKind::Exponential: return "exp";
    }
    return "?";
}

inline double positive_part(double u) { return u > 0.0 ? u : 0.0; }

inline double activation(ActivationKind kind, double u) {
    switch (kind) {
        case ActivationKind::Cubic: return u * u * u;
        case ActivationKind::Quadratic: {
            const double up = positive_part(u);
            return up * up;
        }
        case ActivationKind::SquareRoot: return std::sqrt(positive_part(u));
        case ActivationKind::CubeRoot: return std::cbrt(positive_part(u));
        case ActivationKind::LogShifted: return std::log(positive_part(u) + kLogShift);
        case ActivationKind::Exponential: return std::exp(std::min(u, kExpArgCap));
    }
    return 0.0;
}

class DegenerateWeightError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Antiderivative in y of activation(kind, w*y + b), including the 1/w factor.
///
/// Guarded kinds stay consistent with their activation below the kink, so
/// d/dy primitive == activation everywhere: the positive-part powers are
/// flat for u <= 0, the log unit is linear there (slope log 1e-3), and the
/// exponential continues linearly past the clamp.
inline double primitive(ActivationKind kind, double y, double w, double b) {
    if (w == 0.0) {
        throw DegenerateWeightError("primitive: input weight is zero (" + std::string(to_string(kind)) + " unit)");
    }
    const double u = w * y + b;
    const double up = positive_part(u);
    switch (kind) {
        case ActivationKind::Cubic: return (u * u) * (u * u) / (4.0 * w);
        case ActivationKind::Quadratic: return up * up * up / (3.0 * w);
        case ActivationKind::SquareRoot: return 2.0 / (3.0 * w) * up * std::sqrt(up);
        case ActivationKind::CubeRoot: return 3.0 / (4.0 * w) * up * std::cbrt(up);
        case ActivationKind::LogShifted: {
            if (u > 0.0) {
                const double s = u + kLogShift;
                return (s * std::log(s) - s) / w;
            }
            const double log_shift = std::log(kLogShift);
            return (kLogShift * log_shift - kLogShift + u * log_shift) / w;
        }
        case ActivationKind::Exponential: {
            if (u <= kExpArgCap) return std::exp(u) / w;
            const double cap = std::exp(kExpArgCap);
            return cap * (1.0 + (u - kExpArgCap)) / w;
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Neural mirror map parameters
// ---------------------------------------------------------------------------

/// Parameters of the neural inverse potential
///   phi^{-1}(y) = sum_j v_j g_j(w_j y + b_j) + a y + c log y.
struct NeuralMirrorParams {
    std::array<double, kMirrorUnits> v{};
    std::array<double, kMirrorUnits> w{};
    std::array<double, kMirrorUnits> b{};
    double a = 0.0;
    double c = 0.0;

    /// Canonical order: v, w, b, a, c.
    [[nodiscard]] std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(kMirrorParamCount);
        out.insert(out.end(), v.begin(), v.end());
        out.insert(out.end(), w.begin(), w.end());
        out.insert(out.end(), b.begin(), b.end());
        out.push_back(a);
        out.push_back(c);
        return out;
    }

    static NeuralMirrorParams unflatten(std::span<const double> flat) {
        if (flat.size() != kMirrorParamCount) {
            throw std::invalid_argument("mirror map needs " + std::to_string(kMirrorParamCount) +
                                        " parameters, got " + std::to_string(flat.size()));
        }
        NeuralMirrorParams p;
        auto it = flat.begin();
        for (auto* block : {&p.v, &p.w, &p.b}) {
            std::copy(it, it + kMirrorUnits, block->begin());
            it += kMirrorUnits;
        }
        p.a = *it++;
        p.c = *it;
        return p;
    }

    /// Pure KL recovery: phi^{-1}(y) = log y.
    static NeuralMirrorParams entropic() {
        NeuralMirrorParams p;
        p.c = 1.0;
        return p;
    }

    /// Pure L2 recovery: phi^{-1}(y) = y.
    static NeuralMirrorParams euclidean() {
        NeuralMirrorParams p;
        p.a = 1.0;
        return p;
    }

    friend bool operator==(const NeuralMirrorParams&, const NeuralMirrorParams&) = default;
};

inline double phi_inverse(const NeuralMirrorParams& params, double y) {
    y = clamp_probability(y);
    double total = params.a * y + params.c * std::log(y);
    for (std::size_t j = 0; j < kMirrorUnits; ++j) {
        if (params.v[j] == 0.0) continue;
        total += params.v[j] * activation(activation_of_unit(j), params.w[j] * y + params.b[j]);
    }
    return total;
}

/// Mirror potential h(y), an antiderivative of phi_inverse. Units with a zero
/// output weight are skipped, so their input weight may be zero.
inline double mirror_potential(const NeuralMirrorParams& params, double y) {
    y = clamp_probability(y);
    double total = 0.5 * params.a * y * y + params.c * (y * std::log(y) - y);
    for (std::size_t j = 0; j < kMirrorUnits; ++j) {
        if (params.v[j] == 0.0) continue;
        total += params.v[j] * primitive(activation_of_unit(j), y, params.w[j], params.b[j]);
    }
    return total;
}

/// Per-action Bregman divergence of the mirror potential, written as its
/// neural, quadratic and entropic components.
inline double bregman_per_action(const NeuralMirrorParams& params, double y, double y0) {
    y = clamp_probability(y);
    y0 = clamp_probability(y0);
    const double dy = y - y0;
    double neural = 0.0;
    for (std::size_t j = 0; j < kMirrorUnits; ++j) {
        if (params.v[j] == 0.0) continue;
        const auto kind = activation_of_unit(j);
        const double w = params.w[j];
        const double b = params.b[j];
        neural += params.v[j] *
                  (primitive(kind, y, w, b) - primitive(kind, y0, w, b) - activation(kind, w * y0 + b) * dy);
    }
    const double quadratic = 0.5 * params.a * dy * dy;
    const double entropic = params.c * (y * std::log(y / y0) - dy);
    return neural + quadratic + entropic;
}

// ---------------------------------------------------------------------------
// Potential specifications
// ---------------------------------------------------------------------------

struct KlPotential {
    friend bool operator==(const KlPotential&, const KlPotential&) = default;
};
struct ProbL2Potential {
    friend bool operator==(const ProbL2Potential&, const ProbL2Potential&) = default;
};
struct AlphaPotential {
    double alpha_param;
    friend bool operator==(const AlphaPotential&, const AlphaPotential&) = default;
};
struct NeuralPotential {
    NeuralMirrorParams params;
    friend bool operator==(const NeuralPotential&, const NeuralPotential&) = default;
};

/// Choice of convex potential phi defining a Bregman divergence.
class PotentialSpec {
public:
    using Kind = std::variant<KlPotential, ProbL2Potential, AlphaPotential, NeuralPotential>;

    PotentialSpec() : kind_(ProbL2Potential{}) {}

    static PotentialSpec kl() { return PotentialSpec(KlPotential{}); }
    static PotentialSpec prob_l2() { return PotentialSpec(ProbL2Potential{}); }
    static PotentialSpec alpha(double alpha_param) {
        if (alpha_param == 0.0 || alpha_param == 1.0 || !std::isfinite(alpha_param)) {
            throw std::invalid_argument("alpha potential requires alpha not in {0, 1}, got " +
                                        std::to_string(alpha_param));
        }
        return PotentialSpec(AlphaPotential{alpha_param});
    }
    static PotentialSpec neural(NeuralMirrorParams params) { return PotentialSpec(NeuralPotential{std::move(params)}); }

    [[nodiscard]] const Kind& kind() const noexcept { return kind_; }
    [[nodiscard]] bool is_kl() const noexcept { return std::holds_alternative<KlPotential>(kind_); }
    [[nodiscard]] bool is_neural() const noexcept { return std::holds_alternative<NeuralPotential>(kind_); }

    [[nodiscard]] std::string name() const {
        struct Visitor {
            std::string operator()(const KlPotential&) const { return "kl"; }
            std::string operator()(const ProbL2Potential&) const { return "prob_l2"; }
            std::string operator()(const AlphaPotential& a) const {
                char buf[48];
                std::snprintf(buf, sizeof buf, "alpha(%g)", a.alpha_param);
                return buf;
            }
            std::string operator()(const NeuralPotential&) const { return "neural"; }
        };
        return std::visit(Visitor{}, kind_);
    }

    friend bool operator==(const PotentialSpec&, const PotentialSpec&) = default;

private:
    explicit PotentialSpec(Kind kind) : kind_(std::move(kind)) {}
    Kind kind_;
};

/// Counts evaluations of a learned divergence that came out negative. A
/// learned potential need not be convex, so these are tracked, not rejected.
struct DivergenceStats {
    std::uint64_t evaluations = 0;
    std::uint64_t negative = 0;
};

namespace detail {

inline void require_same_size(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) {
        throw std::invalid_argument("dimension mismatch: " + std::to_string(p.size()) + " vs " +
                                    std::to_string(q.size()));
    }
}

inline double alpha_phi_term(double alpha, double p) { return (std::pow(p, alpha) - p) / (alpha * (alpha - 1.0)); }

inline double alpha_grad_term(double alpha, double p) {
    return (alpha * std::pow(p, alpha - 1.0) - 1.0) / (alpha * (alpha - 1.0));
}

}  // namespace detail

/// D_phi(p || q) = phi(p) - phi(q) - <grad phi(q), p - q>.
inline double bregman_simplex(const PotentialSpec& spec, std::span<const double> p, std::span<const double> q) {
    detail::require_same_size(p, q);
    struct Visitor {
        std::span<const double> p, q;
        double operator()(const KlPotential&) const {
            double total = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                if (p[i] == 0.0) continue;
                total += p[i] * std::log(p[i] / clamp_probability(q[i]));
            }
            return total;
        }
        double operator()(const ProbL2Potential&) const {
            double total = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double d = p[i] - q[i];
                total += d * d;
            }
            return 0.5 * total;
        }
        double operator()(const AlphaPotential& a) const {
            double total = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double pi = clamp_probability(p[i]);
                const double qi = clamp_probability(q[i]);
                total += detail::alpha_phi_term(a.alpha_param, pi) - detail::alpha_phi_term(a.alpha_param, qi) -
                         detail::alpha_grad_term(a.alpha_param, qi) * (pi - qi);
            }
            return total;
        }
        double operator()(const NeuralPotential& n) const {
            double total = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) total += bregman_per_action(n.params, p[i], q[i]);
            return total;
        }
    };
    return std::visit(Visitor{p, q}, spec.kind());
}

inline double bregman_simplex(const PotentialSpec& spec, const Simplex& p, const Simplex& q) {
    return bregman_simplex(spec, p.probs(), q.probs());
}

/// As above, recording negative learned-divergence values into `stats`.
inline double bregman_simplex(const PotentialSpec& spec, const Simplex& p, const Simplex& q, DivergenceStats& stats) {
    const double d = bregman_simplex(spec, p, q);
    if (spec.is_neural()) {
        ++stats.evaluations;
        if (d < 0.0) ++stats.negative;
    }
    return d;
}

/// Gradient of the potential at p, one coordinate per action.
inline std::vector<double> grad_phi(const PotentialSpec& spec, std::span<const double> p) {
    std::vector<double> out(p.size());
    struct Visitor {
        std::span<const double> p;
        std::vector<double>& out;
        void operator()(const KlPotential&) const {
            for (std::size_t i = 0; i < p.size(); ++i) out[i] = 1.0 + std::log(clamp_probability(p[i]));
        }
        void operator()(const ProbL2Potential&) const {
            for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i];
        }
        void operator()(const AlphaPotential& a) const {
            for (std::size_t i = 0; i < p.size(); ++i)
                out[i] = detail::alpha_grad_term(a.alpha_param, clamp_probability(p[i]));
        }
        void operator()(const NeuralPotential& n) const {
            for (std::size_t i = 0; i < p.size(); ++i) out[i] = phi_inverse(n.params, p[i]);
        }
    };
    std::visit(Visitor{p, out}, spec.kind());
    return out;
}

inline std::vector<double> grad_phi(const PotentialSpec& spec, const Simplex& p) { return grad_phi(spec, p.probs()); }

}  // namespace gbmpo

#endif  // GBMPO_DIVERGENCE_HPP
