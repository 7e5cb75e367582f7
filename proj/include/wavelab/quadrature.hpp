#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "wavelab/math_util.hpp"

namespace wavelab {

// Panel Gauss-Legendre on [a,b].
template <class F>
double integrate_gl(F&& f, double a, double b, int order = 48) {
    const auto& [xs, ws] = gauss_legendre(order);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double total = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) total += ws[i] * f(mid + half * xs[i]);
    return half * total;
}

struct ImproperOptions {
    double r_lo = 0.0;
    double r_hi = 1e12;       // effective infinity for power-law tails
    int order = 48;           // GL order per panel
    int panels_per_decade = 4;
    double first_panel = 1e-6;
};

// Improper radial integral of a smooth integrand with power-law decay:
// linear panel near zero, then geometric panels out to r_hi. The integrand
// receives the full measure (caller multiplies by r^{D-1} itself).
template <class F>
double integrate_improper(F&& f, const ImproperOptions& opt = {}) {
    if (opt.r_hi <= opt.r_lo) throw std::invalid_argument("integrate_improper: empty range");
    double total = 0.0;
    double a = opt.r_lo;
    double b = std::max(opt.r_lo, opt.first_panel);
    if (b > a) {
        total += integrate_gl(f, a, b, opt.order);
        a = b;
    }
    const double ratio = std::pow(10.0, 1.0 / opt.panels_per_decade);
    while (a < opt.r_hi) {
        b = std::min(a * ratio, opt.r_hi);
        total += integrate_gl(f, a, b, opt.order);
        a = b;
    }
    return total;
}

}  // namespace wavelab
