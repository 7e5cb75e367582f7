#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wavelab {

// Quintic smoothstep: 0 for x<=0, 1 for x>=1, C^2 at the joints.
inline double smoothstep_c2(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

inline double smoothstep_c2_deriv(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return 30.0 * x * x * (1.0 - x) * (1.0 - x);
}

// Degree-9 smoothstep, C^4 at the joints. Used where fourth derivatives
// of the blend must stay bounded (truncated virial potential).
inline double smoothstep_c4(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double x5 = x * x * x * x * x;
    return x5 * (126.0 + x * (-420.0 + x * (540.0 + x * (-315.0 + 70.0 * x))));
}

inline double smoothstep_c4_d1(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    const double x4 = x * x * x * x;
    return x4 * (630.0 + x * (-2520.0 + x * (3780.0 + x * (-2520.0 + 630.0 * x))));
}

inline double smoothstep_c4_d2(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    const double x3 = x * x * x;
    return x3 * (2520.0 + x * (-12600.0 + x * (22680.0 + x * (-17640.0 + 5040.0 * x))));
}

inline double smoothstep_c4_d3(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    const double x2 = x * x;
    return x2 * (7560.0 + x * (-50400.0 + x * (113400.0 + x * (-105840.0 + 35280.0 * x))));
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual_rms = 0.0;
};

inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("linear_fit: need two samples of equal length");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double det = n * sxx - sx * sx;
    if (det == 0.0) throw std::invalid_argument("linear_fit: degenerate abscissae");
    LinearFit f;
    f.slope = (n * sxy - sx * sy) / det;
    f.intercept = (sy - f.slope * sx) / n;
    double ss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (f.intercept + f.slope * x[i]);
        ss += e * e;
    }
    f.residual_rms = std::sqrt(ss / n);
    return f;
}

// Gauss-Legendre nodes/weights on [-1,1], computed once per order by
// Newton iteration on the Legendre recurrence.
inline const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int order) {
    static std::vector<std::pair<std::vector<double>, std::vector<double>>> cache(65);
    if (order < 2 || order > 64) throw std::invalid_argument("gauss_legendre: order out of range");
    auto& entry = cache[static_cast<std::size_t>(order)];
    if (!entry.first.empty()) return entry;
    std::vector<double> x(static_cast<std::size_t>(order)), w(static_cast<std::size_t>(order));
    const int n = order;
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * t * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (t * p0 - p1) / (t * t - 1.0);
            const double dt = p0 / pp;
            t -= dt;
            if (std::abs(dt) < 1e-15) break;
        }
        x[static_cast<std::size_t>(i)] = -t;
        x[static_cast<std::size_t>(n - 1 - i)] = t;
        const double wi = 2.0 / ((1.0 - t * t) * pp * pp);
        w[static_cast<std::size_t>(i)] = wi;
        w[static_cast<std::size_t>(n - 1 - i)] = wi;
    }
    entry = {std::move(x), std::move(w)};
    return entry;
}

// Natural cubic spline through (x_i, y_i), x strictly increasing.
class CubicSpline {
  public:
    CubicSpline() = default;

    CubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 3 || y_.size() != n) throw std::invalid_argument("CubicSpline: need >= 3 nodes");
        m_.assign(n, 0.0);
        std::vector<double> diag(n, 2.0), rhs(n, 0.0), sub(n, 0.0), sup(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double hl = x_[i] - x_[i - 1];
            const double hr = x_[i + 1] - x_[i];
            sub[i] = hl / (hl + hr);
            sup[i] = hr / (hl + hr);
            rhs[i] = 6.0 / (hl + hr) * ((y_[i + 1] - y_[i]) / hr - (y_[i] - y_[i - 1]) / hl);
        }
        for (std::size_t i = 1; i < n; ++i) {
            const double f = sub[i] / diag[i - 1];
            diag[i] -= f * sup[i - 1];
            rhs[i] -= f * rhs[i - 1];
        }
        m_[n - 1] = rhs[n - 1] / diag[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) m_[i] = (rhs[i] - sup[i] * m_[i + 1]) / diag[i];
    }

    bool valid() const { return !x_.empty(); }
    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }

    // Evaluates the spline; clamps to zero outside the table (profiles we
    // interpolate decay to zero at both ends of their tables).
    double operator()(double x) const {
        if (x_.empty()) throw std::logic_error("CubicSpline: empty");
        if (x < x_.front() || x > x_.back()) return 0.0;
        const auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - x_.begin())) - 1;
        if (i + 1 >= x_.size()) i = x_.size() - 2;
        const double h = x_[i + 1] - x_[i];
        const double a = (x_[i + 1] - x) / h;
        const double b = (x - x_[i]) / h;
        return a * y_[i] + b * y_[i + 1] +
               ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
    }

    const std::vector<double>& xs() const { return x_; }
    const std::vector<double>& ys() const { return y_; }

  private:
    std::vector<double> x_, y_, m_;
};

// FNV-1a, used for artifact content hashes in run manifests.
inline std::uint64_t fnv1a64(std::span<const char> data) {
    std::uint64_t h = 1469598103934665603ull;
    for (char c : data) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

// Round-trip-exact float formatting for CSV/JSON output.
inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double sq(double v) { return v * v; }

}  // namespace wavelab
