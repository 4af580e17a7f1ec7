#pragma once

// Brownian-bridge eigensystem composed with the conditional transform
// u = T(y, x) = F(y | x, theta):
//
//   mu_j = 1 / (pi j)^2,   f_j = sqrt(2) sin(j pi u),   g_j = sqrt(2) cos(j pi u).

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "pcdtest/error.hpp"
#include "pcdtest/model_family.hpp"

namespace pcdtest {

/// A component number j >= 1.
class ComponentIndex {
public:
    explicit ComponentIndex(int j) : j_(j) {
        if (j < 1) throw InvalidIndex("component index must be >= 1, got " + std::to_string(j));
    }
    int value() const noexcept { return j_; }
    friend auto operator<=>(const ComponentIndex&, const ComponentIndex&) = default;

private:
    int j_;
};

/// sin(pi x), exactly zero at integers.
inline double sin_pi(double x) {
    double r = std::remainder(x, 2.0);  // r in [-1, 1]
    if (r == 0.0 || r == 1.0 || r == -1.0) return 0.0;
    if (r > 0.5) r = 1.0 - r;
    else if (r < -0.5) r = -1.0 - r;
    return std::sin(std::numbers::pi * r);
}

/// cos(pi x), exactly zero at half-integers.
inline double cos_pi(double x) { return sin_pi(x + 0.5); }

inline double eigenvalue(ComponentIndex j) {
    const double pj = std::numbers::pi * j.value();
    return 1.0 / (pj * pj);
}

/// T(y, x) = F(y | x, theta).
inline double transform(const ModelFamily& family, const ParamVector& theta, std::span<const double> x, double y) {
    return cdf(family, theta, x, y);
}

struct BasisValue {
    double f;  // sqrt(2) sin(j pi u)
    double g;  // sqrt(2) cos(j pi u)
};

inline BasisValue basis_pair(ComponentIndex j, double u) {
    if (!(u >= 0.0 && u <= 1.0)) throw DomainError("basis argument must lie in [0,1], got " + std::to_string(u));
    const double a = j.value() * u;
    return {std::numbers::sqrt2 * sin_pi(a), std::numbers::sqrt2 * cos_pi(a)};
}

namespace detail {

// Beyond this the angle-addition recurrence is replaced by direct evaluation.
constexpr int kRecurrenceLimit = 64;

// (sin(pi u), cos(pi u)) from one sincos; exact at u in {0, 1/2, 1} for u in [0,1].
inline void sincos_pi(double u, double& s, double& c) {
    if (!(u >= 0.0 && u <= 1.0)) {
        s = sin_pi(u);
        c = cos_pi(u);
        return;
    }
    const double w = u <= 0.5 ? u : 1.0 - u;
    s = std::sin(std::numbers::pi * w);
    const double cw = w == 0.5 ? 0.0 : std::cos(std::numbers::pi * w);
    c = u <= 0.5 ? cw : -cw;
}

// dst[j-1][k] = sqrt(2) sin(j pi u[k]) * scale[j-1], k < len.
inline void sine_series(const double* u, std::size_t len, int count, double* const* dst, const double* scale) {
    if (count > kRecurrenceLimit) {
        for (int j = 1; j <= count; ++j)
            for (std::size_t k = 0; k < len; ++k)
                dst[j - 1][k] = std::numbers::sqrt2 * sin_pi(j * u[k]) * scale[j - 1];
        return;
    }
    for (std::size_t k = 0; k < len; ++k) {
        double s1, c1;
        sincos_pi(u[k], s1, c1);
        double s = s1, c = c1;
        dst[0][k] = std::numbers::sqrt2 * s * scale[0];
        for (int j = 2; j <= count; ++j) {
            const double sn = s * c1 + c * s1;
            c = c * c1 - s * s1;
            s = sn;
            dst[j - 1][k] = std::numbers::sqrt2 * s * scale[j - 1];
        }
    }
}

}  // namespace detail

/// sqrt(2) sin(j pi u), elementwise.
inline Matrix sine_harmonic(const Matrix& u, int j) {
    return u.unaryExpr([j](double v) { return std::numbers::sqrt2 * sin_pi(j * v); });
}

/// out[j-1](i, l) = sqrt(2) sin(j pi u(i, l)) for j = 1..count.
inline std::vector<Matrix> sine_harmonics(const Matrix& u, int count) {
    std::vector<Matrix> out;
    if (count <= 0) return out;
    out.assign(static_cast<std::size_t>(count), Matrix(u.rows(), u.cols()));
    std::vector<double*> dst;
    for (auto& m : out) dst.push_back(m.data());
    const std::vector<double> ones(static_cast<std::size_t>(count), 1.0);
    detail::sine_series(u.data(), static_cast<std::size_t>(u.size()), count, dst.data(), ones.data());
    return out;
}

/// out[j-1](i) = sqrt(2) cos(j pi u(i)) for j = 1..count.
inline std::vector<Vector> cosine_harmonics(const Vector& u, int count) {
    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int j = 1; j <= count; ++j)
        out.push_back(u.unaryExpr([j](double v) { return std::numbers::sqrt2 * cos_pi(j * v); }));
    return out;
}

}  // namespace pcdtest
