#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "phasescreen/grid.hpp"

namespace phasescreen {

/// |z|^p, exact repeated products for even p.
inline double intensity_power(Complex z, int p) {
    if (p % 2 != 0) return std::pow(std::abs(z), p);
    const double n = std::norm(z);
    double v = 1.0;
    for (int k = 0; k < p / 2; ++k) v *= n;
    return v;
}

/// Fourier-mode projection sum_j |u_j|^p exp(i m pi x_j / L) dx^d (x_j along axis 0).
struct ProjectionSpec {
    int p = 2;
    int m = 1;
    friend bool operator==(const ProjectionSpec&, const ProjectionSpec&) = default;
};

inline Complex mode_projection(const ComplexField& u, const ProjectionSpec& spec) {
    const GridSpec& g = u.grid;
    Complex s{};
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double x = g.coordinate(g.dim == 1 ? i : i / g.points);
        const double a = intensity_power(u[i], spec.p);
        s += a * std::polar(1.0, spec.m * std::numbers::pi * x / g.length);
    }
    return s * g.cell_volume();
}

/// Raw sums over Monte Carlo samples; all statistics are derived on demand.
class MomentAccumulator {
public:
    MomentAccumulator() = default;
    explicit MomentAccumulator(const GridSpec& g, std::vector<ProjectionSpec> projections = {})
        : grid_(g),
          projections_(std::move(projections)),
          sum_u_(g.size()),
          sum_i2_(g.size()),
          sum_i4_(g.size()),
          sum_proj_(projections_.size()) {}

    const GridSpec& grid() const { return grid_; }
    std::size_t count() const { return count_; }
    const std::vector<ProjectionSpec>& projections() const { return projections_; }

    void accumulate(const ComplexField& u) {
        detail::require(u.grid == grid_, "accumulate: grid mismatch");
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double i2 = std::norm(u[i]);
            sum_u_[i] += u[i];
            sum_i2_[i] += i2;
            sum_i4_[i] += i2 * i2;
        }
        for (std::size_t k = 0; k < projections_.size(); ++k) sum_proj_[k] += mode_projection(u, projections_[k]);
        ++count_;
    }

    void merge(const MomentAccumulator& other) {
        if (other.count_ == 0 && other.sum_u_.empty()) return;
        if (count_ == 0 && sum_u_.empty()) {
            *this = other;
            return;
        }
        detail::require(other.grid_ == grid_, "merge: grid mismatch");
        detail::require(other.projections_ == projections_, "merge: projection configuration mismatch");
        for (std::size_t i = 0; i < sum_u_.size(); ++i) {
            sum_u_[i] += other.sum_u_[i];
            sum_i2_[i] += other.sum_i2_[i];
            sum_i4_[i] += other.sum_i4_[i];
        }
        for (std::size_t k = 0; k < sum_proj_.size(); ++k) sum_proj_[k] += other.sum_proj_[k];
        count_ += other.count_;
    }

    Complex mean(std::size_t i) const { return sum_u_[i] / static_cast<double>(nonzero()); }
    double mean_intensity(std::size_t i) const { return sum_i2_[i] / static_cast<double>(nonzero()); }
    double mean_i4(std::size_t i) const { return sum_i4_[i] / static_cast<double>(nonzero()); }
    Complex mean_projection(std::size_t k) const { return sum_proj_[k] / static_cast<double>(nonzero()); }

    /// sqrt(E|u - Eu|^2 / n), the standard error of the complex mean.
    double mean_stderr(std::size_t i) const {
        const double n = static_cast<double>(nonzero());
        return std::sqrt(std::max(0.0, mean_intensity(i) - std::norm(mean(i))) / n);
    }

    /// Standard error of the mean intensity.
    double intensity_stderr(std::size_t i) const {
        const double n = static_cast<double>(nonzero());
        const double e2 = mean_intensity(i);
        return std::sqrt(std::max(0.0, mean_i4(i) - e2 * e2) / n);
    }

    ComplexField mean_field() const {
        ComplexField f(grid_);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = mean(i);
        return f;
    }

    const std::vector<Complex>& sum_u() const { return sum_u_; }
    const std::vector<double>& sum_i2() const { return sum_i2_; }
    const std::vector<double>& sum_i4() const { return sum_i4_; }
    const std::vector<Complex>& sum_projections() const { return sum_proj_; }

private:
    std::size_t nonzero() const {
        detail::require(count_ > 0, "moment accumulator is empty");
        return count_;
    }

    GridSpec grid_;
    std::vector<ProjectionSpec> projections_;
    std::size_t count_ = 0;
    std::vector<Complex> sum_u_;
    std::vector<double> sum_i2_;
    std::vector<double> sum_i4_;
    std::vector<Complex> sum_proj_;
};

inline MomentAccumulator accumulate(MomentAccumulator acc, const ComplexField& u) {
    acc.accumulate(u);
    return acc;
}

inline MomentAccumulator merge(MomentAccumulator a, const MomentAccumulator& b) {
    a.merge(b);
    return a;
}

/// S = E|u|^4 / (E|u|^2)^2 - 1 at flat grid index i.
inline double scintillation_index(const MomentAccumulator& acc, std::size_t i) {
    detail::require(acc.count() >= 2, "scintillation index needs at least two samples");
    const double e2 = acc.mean_intensity(i);
    if (!(e2 > 0.0)) throw NumericalError("scintillation index undefined: zero mean intensity");
    return acc.mean_i4(i) / (e2 * e2) - 1.0;
}

}  // namespace phasescreen
