#pragma once

#include "relunet/piecewise.hpp"

#include <optional>
#include <vector>

namespace relunet {

// Flat layout: w_j = theta[j], b_j = theta[H + j], v_j = theta[2H + j], c = theta[3H].
struct ShallowArch {
    int width = 1;
    std::size_t param_count() const { return 3 * static_cast<std::size_t>(width) + 1; }
};

template <class S>
struct ShallowUnpacked {
    std::vector<S> w, b, v;
    S c{0};
};

inline void check_shallow_length(std::size_t length, int width) {
    if (width < 0) throw InvalidInput("width must be nonnegative");
    if (length != 3 * static_cast<std::size_t>(width) + 1)
        throw InvalidInput("parameter vector length does not match width");
}

template <class S>
ShallowUnpacked<S> shallow_unpack(const std::vector<S>& theta, int width) {
    check_shallow_length(theta.size(), width);
    ShallowUnpacked<S> u;
    u.w.assign(theta.begin(), theta.begin() + width);
    u.b.assign(theta.begin() + width, theta.begin() + 2 * width);
    u.v.assign(theta.begin() + 2 * width, theta.begin() + 3 * width);
    u.c = theta[3 * width];
    return u;
}

template <class S>
std::vector<S> shallow_pack(const ShallowUnpacked<S>& u) {
    if (u.b.size() != u.w.size() || u.v.size() != u.w.size()) throw InvalidInput("neuron arrays differ in length");
    std::vector<S> theta(u.w);
    theta.insert(theta.end(), u.b.begin(), u.b.end());
    theta.insert(theta.end(), u.v.begin(), u.v.end());
    theta.push_back(u.c);
    return theta;
}

// Kink location -b_j / w_j; empty when w_j = 0.
template <class S>
std::optional<S> shallow_kink(const std::vector<S>& theta, int width, int j) {
    const S& w = theta[j];
    if (w == 0) return std::nullopt;
    return S(-theta[width + j] / w);
}

template <class S>
S shallow_eval(const std::vector<S>& theta, int width, const S& x) {
    S acc = theta[3 * width];
    for (int j = 0; j < width; ++j) {
        S z = theta[j] * x + theta[width + j];
        if (z > 0) acc += theta[2 * width + j] * z;
    }
    return acc;
}

template <class S>
struct Problem {
    PiecewisePoly<S> target;
    PiecewisePoly<S> density;

    const S& lower() const { return target.lower(); }
    const S& upper() const { return target.upper(); }

    void validate() const {
        require_same_domain(target.lower(), target.upper(), density.lower(), density.upper());
        if (!target.is_continuous()) throw InvalidInput("target must be continuous");
        const auto& x = density.breakpoints();
        for (std::size_t i = 0; i < density.piece_count(); ++i) {
            auto [mn, mx] = poly_range(density.pieces()[i], x[i], x[i + 1]);
            (void)mx;
            if (mn < 0 && !near_zero(mn, density.magnitude())) throw InvalidInput("density must be nonnegative");
        }
    }
};

// Interior kinks of the network on (a, b), sorted and unique.
template <class S>
std::vector<S> shallow_kinks_inside(const std::vector<S>& theta, int width, const S& a, const S& b) {
    std::vector<S> ks;
    for (int j = 0; j < width; ++j) {
        auto q = shallow_kink(theta, width, j);
        if (q && a < *q && *q < b) ks.push_back(*q);
    }
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    return ks;
}

// Slope and intercept of the realization on a cell whose interior contains mid.
template <class S>
std::pair<S, S> shallow_affine_at(const std::vector<S>& theta, int width, const S& mid) {
    S slope(0), intercept = theta[3 * width];
    for (int j = 0; j < width; ++j) {
        if (theta[j] * mid + theta[width + j] > 0) {
            slope += theta[2 * width + j] * theta[j];
            intercept += theta[2 * width + j] * theta[width + j];
        }
    }
    return {slope, intercept};
}

template <class S>
PiecewiseLinear<S> realize(const std::vector<S>& theta, int width, const S& a, const S& b) {
    check_shallow_length(theta.size(), width);
    std::vector<S> xs{a};
    for (const auto& k : shallow_kinks_inside(theta, width, a, b)) xs.push_back(k);
    xs.push_back(b);
    std::vector<S> slopes, intercepts;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        auto [s, t] = shallow_affine_at(theta, width, S((xs[i] + xs[i + 1]) / S(2)));
        slopes.push_back(s);
        intercepts.push_back(t);
    }
    return PiecewiseLinear<S>::canonicalize(xs, slopes, intercepts);
}

template <class S>
struct RiskGrad {
    S risk{0};
    std::vector<S> grad;
};

// Walks the cells formed by the data breakpoints and the network kinks; on each cell the
// residual (N - f) p is a polynomial and all integrals are closed form.
template <class S>
RiskGrad<S> shallow_risk_grad(const std::vector<S>& theta, int width, const Problem<S>& problem, bool want_grad) {
    check_shallow_length(theta.size(), width);
    const S& a = problem.lower();
    const S& b = problem.upper();
    const auto& fx = problem.target.breakpoints();
    const auto& px = problem.density.breakpoints();
    auto cells = merge_points(merge_points(fx, px), shallow_kinks_inside(theta, width, a, b));
    RiskGrad<S> out;
    if (want_grad) out.grad.assign(theta.size(), S(0));
    std::size_t jf = 0, jp = 0;
    std::vector<char> active(width);
    for (std::size_t k = 0; k + 1 < cells.size(); ++k) {
        const S& lo = cells[k];
        const S& hi = cells[k + 1];
        while (jf + 1 < problem.target.piece_count() && !(lo < fx[jf + 1])) ++jf;
        while (jp + 1 < problem.density.piece_count() && !(lo < px[jp + 1])) ++jp;
        const auto& dens = problem.density.pieces()[jp];
        if (dens.is_zero()) continue;
        S mid = (lo + hi) / S(2);
        S slope(0), intercept = theta[3 * width];
        for (int j = 0; j < width; ++j) {
            active[j] = theta[j] * mid + theta[width + j] > 0;
            if (active[j]) {
                slope += theta[2 * width + j] * theta[j];
                intercept += theta[2 * width + j] * theta[width + j];
            }
        }
        Poly<S> resid = Poly<S>::linear(slope, intercept) - problem.target.pieces()[jf];
        Poly<S> weighted = resid * dens;
        out.risk += (resid * weighted).integrate(lo, hi);
        if (!want_grad) continue;
        S m0 = weighted.moment(lo, hi, 0);
        S m1 = weighted.moment(lo, hi, 1);
        out.grad[3 * width] += S(2) * m0;
        for (int j = 0; j < width; ++j) {
            if (!active[j]) continue;
            const S& w = theta[j];
            const S& bias = theta[width + j];
            const S& v = theta[2 * width + j];
            out.grad[j] += S(2) * v * m1;
            out.grad[width + j] += S(2) * v * m0;
            out.grad[2 * width + j] += S(2) * (w * m1 + bias * m0);
        }
    }
    return out;
}

template <class S>
S risk_exact(const std::vector<S>& theta, int width, const Problem<S>& problem) {
    return shallow_risk_grad(theta, width, problem, false).risk;
}

template <class S>
std::vector<S> grad_exact(const std::vector<S>& theta, int width, const Problem<S>& problem) {
    return shallow_risk_grad(theta, width, problem, true).grad;
}

// Exact weighted L2 distance between a piecewise linear function and the target.
template <class S>
S pl_risk(const PiecewiseLinear<S>& g, const Problem<S>& problem) {
    auto resid = pp_sub(g.to_piecewise_poly(), problem.target);
    return pp_integrate(pp_mul(pp_mul(resid, resid), problem.density));
}

// Parameter map for the affine change of variable x = a + (b - a) t:
// the returned network on [0, 1] satisfies N'(t) = N(a + (b - a) t).
template <class S>
std::vector<S> to_unit_domain_params(const std::vector<S>& theta, int width, const S& a, const S& b) {
    auto u = shallow_unpack(theta, width);
    for (int j = 0; j < width; ++j) {
        u.b[j] = u.b[j] + a * u.w[j];
        u.w[j] = (b - a) * u.w[j];
    }
    return shallow_pack(u);
}

template <class S>
std::vector<S> from_unit_domain_params(const std::vector<S>& theta, int width, const S& a, const S& b) {
    auto u = shallow_unpack(theta, width);
    for (int j = 0; j < width; ++j) {
        u.w[j] = u.w[j] / (b - a);
        u.b[j] = u.b[j] - a * u.w[j];
    }
    return shallow_pack(u);
}

// C^1 surrogate of max{y, 0}: zero below 1/(2r), identity above 1/r, cubic Hermite blend between.
struct Smoothing {
    static constexpr double kLower = 0.5;
    static constexpr double kUpper = 1.0;

    static double value(double y, double r);
    static double derivative(double y, double r);
};

double risk_smoothed(const std::vector<double>& theta, int width, const Problem<double>& problem, double r);
std::vector<double> grad_smoothed(const std::vector<double>& theta, int width, const Problem<double>& problem,
                                  double r);

}  // namespace relunet
