#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "phasescreen/error.hpp"

namespace phasescreen {

struct ConstantKappa {
    double value = 1.0;
};

/// kappa(z) = a + b z.
struct AffineKappa {
    double a = 1.0;
    double b = 0.0;
};

/// kappa(z) = sum_i c_i z^i.
struct PolynomialKappa {
    std::vector<double> coeffs;
};

/// Piecewise-linear interpolant through (nodes, values). Its integral is the
/// composite trapezoid rule on the nodes, so chi carries the trapezoid error
/// O(h^2 max|kappa''|) of the underlying profile when nodes have spacing h.
struct TabulatedKappa {
    std::vector<double> nodes;
    std::vector<double> values;
};

/// Diffraction coefficient kappa_1(z) > 0.
class Kappa1Profile {
public:
    using Variant = std::variant<ConstantKappa, AffineKappa, PolynomialKappa, TabulatedKappa>;

    Kappa1Profile() : v_(ConstantKappa{1.0}) {}
    template <class T>
        requires std::is_constructible_v<Variant, T>
    Kappa1Profile(T v) : Kappa1Profile(Variant(std::move(v)), 0) {}  // NOLINT(google-explicit-constructor)

private:
    Kappa1Profile(Variant v, int) : v_(std::move(v)) {
        if (const auto* t = std::get_if<TabulatedKappa>(&v_)) {
            detail::require(t->nodes.size() >= 2 && t->nodes.size() == t->values.size(),
                            "tabulated kappa1 needs >= 2 nodes with matching values");
            detail::require(std::is_sorted(t->nodes.begin(), t->nodes.end()) &&
                                std::adjacent_find(t->nodes.begin(), t->nodes.end()) == t->nodes.end(),
                            "tabulated kappa1 nodes must be strictly increasing");
        }
        if (const auto* p = std::get_if<PolynomialKappa>(&v_))
            detail::require(!p->coeffs.empty(), "polynomial kappa1 needs at least one coefficient");
    }

public:
    const Variant& variant() const { return v_; }

    bool is_constant() const {
        if (std::holds_alternative<ConstantKappa>(v_)) return true;
        if (const auto* a = std::get_if<AffineKappa>(&v_)) return a->b == 0.0;
        return false;
    }

    double operator()(double z) const {
        return std::visit(
            [z](const auto& k) -> double {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, ConstantKappa>) {
                    return k.value;
                } else if constexpr (std::is_same_v<T, AffineKappa>) {
                    return k.a + k.b * z;
                } else if constexpr (std::is_same_v<T, PolynomialKappa>) {
                    double s = 0.0;
                    for (auto it = k.coeffs.rbegin(); it != k.coeffs.rend(); ++it) s = s * z + *it;
                    return s;
                } else {
                    return interpolate(k, z);
                }
            },
            v_);
    }

    /// Exact antiderivative of the profile with F(0) = 0.
    double antiderivative(double z) const {
        return std::visit(
            [z](const auto& k) -> double {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, ConstantKappa>) {
                    return k.value * z;
                } else if constexpr (std::is_same_v<T, AffineKappa>) {
                    return k.a * z + 0.5 * k.b * z * z;
                } else if constexpr (std::is_same_v<T, PolynomialKappa>) {
                    double s = 0.0;
                    for (std::size_t i = k.coeffs.size(); i-- > 0;) s = s * z + k.coeffs[i] / static_cast<double>(i + 1);
                    return s * z;
                } else {
                    return tabulated_antiderivative(k, z);
                }
            },
            v_);
    }

    /// Checks kappa1 > 0 on [0, Z] (at the nodes or on a fine sampling).
    void validate_positive(double Z) const {
        bool ok = true;
        if (const auto* t = std::get_if<TabulatedKappa>(&v_)) {
            ok = *std::min_element(t->values.begin(), t->values.end()) > 0.0 && t->nodes.front() <= 0.0 &&
                 t->nodes.back() >= Z;
        } else {
            constexpr int samples = 1024;
            for (int i = 0; i <= samples && ok; ++i) ok = (*this)(Z * i / samples) > 0.0;
        }
        detail::require(ok, "kappa1 must be positive on [0, Z]");
    }

private:
    static double interpolate(const TabulatedKappa& t, double z) {
        if (z <= t.nodes.front()) return t.values.front();
        if (z >= t.nodes.back()) return t.values.back();
        const auto it = std::upper_bound(t.nodes.begin(), t.nodes.end(), z);
        const std::size_t i = static_cast<std::size_t>(it - t.nodes.begin()) - 1;
        const double w = (z - t.nodes[i]) / (t.nodes[i + 1] - t.nodes[i]);
        return (1.0 - w) * t.values[i] + w * t.values[i + 1];
    }

    static double tabulated_antiderivative(const TabulatedKappa& t, double z) {
        // integral from 0 of the piecewise-linear interpolant (constant extension outside)
        auto integral_to = [&](double x) {
            double s = 0.0;
            double lo = t.nodes.front();
            if (x <= lo) return t.values.front() * (x - lo);
            for (std::size_t i = 0; i + 1 < t.nodes.size(); ++i) {
                const double a = t.nodes[i];
                const double b = std::min(t.nodes[i + 1], x);
                if (b <= a) break;
                s += 0.5 * (b - a) * (t.values[i] + interpolate(t, b));
            }
            if (x > t.nodes.back()) s += t.values.back() * (x - t.nodes.back());
            return s;
        };
        return integral_to(z) - integral_to(0.0);
    }

    Variant v_;
};

/// chi_{z1}(z2) = integral of kappa1 over [z1, z2].
inline double chi(const Kappa1Profile& profile, double z1, double z2) {
    detail::require(z1 <= z2, "chi: reversed interval");
    if (const auto* c = std::get_if<ConstantKappa>(&profile.variant())) return c->value * (z2 - z1);
    return profile.antiderivative(z2) - profile.antiderivative(z1);
}

namespace detail {

inline std::size_t grid_index(double z, double dz, const char* what) {
    const double r = z / dz;
    const double rr = std::round(r);
    require(rr >= 0.0 && std::abs(r - rr) <= 1e-9 * std::max(1.0, rr),
            std::string("chi_split: ") + what + " is not a multiple of dz");
    return static_cast<std::size_t>(rr);
}

}  // namespace detail

/// Collocated integral chi^Delta_{z1}(z2) = dz * sum kappa1(c) over the collocation
/// points c = (n + gamma) dz with z1 < c <= z2.
inline double chi_split(const Kappa1Profile& profile, double gamma, double dz, double z1, double z2) {
    detail::require(dz > 0.0, "chi_split: dz must be positive");
    detail::require(gamma >= 0.0 && gamma <= 1.0, "chi_split: gamma must lie in [0, 1]");
    detail::require(z1 <= z2, "chi_split: reversed interval");
    const std::size_t n1 = detail::grid_index(z1, dz, "z1");
    const std::size_t n2 = detail::grid_index(z2, dz, "z2");
    // gamma = 0 puts the point of step n on its left end, which belongs to (z_{n-1}, z_n]
    const std::size_t shift = gamma == 0.0 ? 1 : 0;
    double s = 0.0;
    for (std::size_t n = n1 + shift; n < n2 + shift; ++n) s += dz * profile((static_cast<double>(n) + gamma) * dz);
    return s;
}

}  // namespace phasescreen
