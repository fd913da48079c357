#pragma once

#include "relunet/poly.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace relunet {

template <class S>
std::vector<S> merge_points(const std::vector<S>& a, const std::vector<S>& b) {
    std::vector<S> out;
    out.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// Piecewise polynomial on [x_0, x_N]. Piece i lives on [x_i, x_{i+1}); the last piece is closed.
template <class S>
class PiecewisePoly {
public:
    PiecewisePoly() = default;
    PiecewisePoly(std::vector<S> breakpoints, std::vector<Poly<S>> pieces)
        : x_(std::move(breakpoints)), p_(std::move(pieces)) {
        if (x_.size() < 2) throw InvalidInput("piecewise polynomial needs at least two breakpoints");
        if (p_.size() + 1 != x_.size()) throw InvalidInput("piece count must be breakpoint count minus one");
        for (std::size_t i = 1; i < x_.size(); ++i)
            if (!(x_[i - 1] < x_[i])) throw InvalidInput("breakpoints must be strictly increasing");
    }

    static PiecewisePoly from_poly(const S& a, const S& b, Poly<S> p) {
        return PiecewisePoly({a, b}, {std::move(p)});
    }
    static PiecewisePoly constant(const S& a, const S& b, const S& c) { return from_poly(a, b, Poly<S>::constant(c)); }

    const S& lower() const { return x_.front(); }
    const S& upper() const { return x_.back(); }
    const std::vector<S>& breakpoints() const { return x_; }
    const std::vector<Poly<S>>& pieces() const { return p_; }
    std::size_t piece_count() const { return p_.size(); }

    std::size_t piece_index(const S& x) const {
        if (x < lower() || x > upper()) throw DomainError("evaluation point outside the domain");
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t i = static_cast<std::size_t>(it - x_.begin());
        return std::min(i == 0 ? 0 : i - 1, p_.size() - 1);
    }

    S operator()(const S& x) const { return p_[piece_index(x)](x); }

    int max_degree() const {
        int d = 0;
        for (const auto& q : p_) d = std::max(d, q.degree());
        return d;
    }

    double magnitude() const {
        double m = 0.0;
        for (const auto& v : x_) m = std::max(m, abs_value(to_double(v)));
        for (const auto& q : p_) m = std::max(m, q.magnitude());
        return m;
    }

    bool is_continuous() const {
        const double scale = magnitude();
        for (std::size_t i = 1; i < p_.size(); ++i)
            if (!near_equal(p_[i - 1](x_[i]), p_[i](x_[i]), scale)) return false;
        return true;
    }

    // Same function on the partition refined by the given points (which may include existing ones).
    PiecewisePoly refine(const std::vector<S>& points) const {
        std::vector<S> inner;
        for (const auto& v : points)
            if (lower() < v && v < upper()) inner.push_back(v);
        std::sort(inner.begin(), inner.end());
        auto xs = merge_points(x_, inner);
        std::vector<Poly<S>> ps;
        ps.reserve(xs.size() - 1);
        std::size_t j = 0;
        for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
            while (j + 1 < p_.size() && !(xs[i] < x_[j + 1])) ++j;
            ps.push_back(p_[j]);
        }
        return PiecewisePoly(std::move(xs), std::move(ps));
    }

private:
    std::vector<S> x_;
    std::vector<Poly<S>> p_;
};

template <class S>
void require_same_domain(const S& a0, const S& b0, const S& a1, const S& b1) {
    if (a0 != a1 || b0 != b1) throw InvalidInput("domain mismatch");
}

template <class S, class Op>
PiecewisePoly<S> pp_combine(const PiecewisePoly<S>& f, const PiecewisePoly<S>& g, Op op) {
    require_same_domain(f.lower(), f.upper(), g.lower(), g.upper());
    auto xs = merge_points(f.breakpoints(), g.breakpoints());
    auto fr = f.refine(xs), gr = g.refine(xs);
    std::vector<Poly<S>> ps;
    ps.reserve(fr.piece_count());
    for (std::size_t i = 0; i < fr.piece_count(); ++i) ps.push_back(op(fr.pieces()[i], gr.pieces()[i]));
    return PiecewisePoly<S>(fr.breakpoints(), std::move(ps));
}

template <class S>
PiecewisePoly<S> pp_add(const PiecewisePoly<S>& f, const PiecewisePoly<S>& g) {
    return pp_combine(f, g, [](const Poly<S>& p, const Poly<S>& q) { return p + q; });
}

template <class S>
PiecewisePoly<S> pp_sub(const PiecewisePoly<S>& f, const PiecewisePoly<S>& g) {
    return pp_combine(f, g, [](const Poly<S>& p, const Poly<S>& q) { return p - q; });
}

template <class S>
PiecewisePoly<S> pp_mul(const PiecewisePoly<S>& f, const PiecewisePoly<S>& g) {
    return pp_combine(f, g, [](const Poly<S>& p, const Poly<S>& q) { return p * q; });
}

template <class S>
PiecewisePoly<S> pp_scale(const S& s, const PiecewisePoly<S>& f) {
    std::vector<Poly<S>> ps;
    for (const auto& p : f.pieces()) ps.push_back(s * p);
    return PiecewisePoly<S>(f.breakpoints(), std::move(ps));
}

template <class S>
S pp_integrate(const PiecewisePoly<S>& f) {
    S acc(0);
    const auto& x = f.breakpoints();
    for (std::size_t i = 0; i < f.piece_count(); ++i) acc += f.pieces()[i].integrate(x[i], x[i + 1]);
    return acc;
}

// x -> -f(lower + upper - x)
template <class S>
PiecewisePoly<S> pp_reflect(const PiecewisePoly<S>& f) {
    const S sum = f.lower() + f.upper();
    std::vector<S> xs;
    std::vector<Poly<S>> ps;
    for (auto it = f.breakpoints().rbegin(); it != f.breakpoints().rend(); ++it) xs.push_back(sum - *it);
    for (auto it = f.pieces().rbegin(); it != f.pieces().rend(); ++it) ps.push_back(-it->compose_affine(S(-1), sum));
    return PiecewisePoly<S>(std::move(xs), std::move(ps));
}

// x -> f(alpha + (beta - alpha) t) for t in [0, 1]; the image domain is [0, 1].
template <class S>
PiecewisePoly<S> pp_to_unit_domain(const PiecewisePoly<S>& f) {
    const S a = f.lower(), len = f.upper() - f.lower();
    std::vector<S> xs;
    std::vector<Poly<S>> ps;
    for (const auto& v : f.breakpoints()) xs.push_back((v - a) / len);
    xs.front() = S(0);
    xs.back() = S(1);
    for (const auto& p : f.pieces()) ps.push_back(p.compose_affine(len, a));
    return PiecewisePoly<S>(std::move(xs), std::move(ps));
}

template <class S>
PiecewisePoly<S> pp_relu(const PiecewisePoly<S>& f) {
    if (!f.is_continuous()) throw InvalidInput("relu composition requires a continuous function");
    std::vector<S> xs{f.lower()};
    std::vector<Poly<S>> ps;
    const auto& x = f.breakpoints();
    for (std::size_t i = 0; i < f.piece_count(); ++i) {
        const auto& p = f.pieces()[i];
        std::vector<S> cuts;
        if (!p.is_zero()) cuts = roots_in(p, x[i], x[i + 1]);
        cuts.push_back(x[i + 1]);
        S left = x[i];
        for (const auto& right : cuts) {
            S mid = (left + right) / S(2);
            ps.push_back(p(mid) > 0 ? p : Poly<S>());
            xs.push_back(right);
            left = right;
        }
    }
    return PiecewisePoly<S>(std::move(xs), std::move(ps));
}

// Lipschitz constant of a continuous piecewise polynomial: max |p'| over the pieces.
template <class S>
S pp_lipschitz(const PiecewisePoly<S>& f) {
    S best(0);
    const auto& x = f.breakpoints();
    for (std::size_t i = 0; i < f.piece_count(); ++i) {
        auto [mn, mx] = poly_range(f.pieces()[i].derivative(), x[i], x[i + 1]);
        best = std::max(best, std::max(abs_value(mn), abs_value(mx)));
    }
    return best;
}

template <class S>
std::pair<S, S> pp_range(const PiecewisePoly<S>& f) {
    const auto& x = f.breakpoints();
    auto range = poly_range(f.pieces()[0], x[0], x[1]);
    for (std::size_t i = 1; i < f.piece_count(); ++i) {
        auto [mn, mx] = poly_range(f.pieces()[i], x[i], x[i + 1]);
        range.first = std::min(range.first, mn);
        range.second = std::max(range.second, mx);
    }
    return range;
}

// Continuous piecewise linear function in canonical form: no two adjacent pieces share a slope.
template <class S>
class PiecewiseLinear {
public:
    PiecewiseLinear() = default;

    // Raw pieces on x_0 < ... < x_N with given slopes and intercepts; checks continuity and merges.
    static PiecewiseLinear canonicalize(const std::vector<S>& xs, const std::vector<S>& slopes,
                                        const std::vector<S>& intercepts) {
        if (xs.size() < 2 || slopes.size() + 1 != xs.size() || intercepts.size() != slopes.size())
            throw InvalidInput("inconsistent piecewise linear data");
        double scale = 0.0;
        for (std::size_t i = 0; i < slopes.size(); ++i) {
            if (!(xs[i] < xs[i + 1])) throw InvalidInput("breakpoints must be strictly increasing");
            scale = std::max({scale, abs_value(to_double(slopes[i])) * abs_value(to_double(xs[i])),
                              abs_value(to_double(slopes[i])) * abs_value(to_double(xs[i + 1])),
                              abs_value(to_double(intercepts[i]))});
        }
        for (std::size_t i = 1; i < slopes.size(); ++i) {
            S left = slopes[i - 1] * xs[i] + intercepts[i - 1];
            S right = slopes[i] * xs[i] + intercepts[i];
            if (!near_equal(left, right, scale, 1e-10)) throw InvalidInput("piecewise linear data is discontinuous");
        }
        double max_slope = 0.0;
        for (const auto& v : slopes) max_slope = std::max(max_slope, abs_value(to_double(v)));

        PiecewiseLinear out;
        out.q_.push_back(xs.front());
        out.A_.push_back(slopes.front());
        out.B_.push_back(intercepts.front());
        for (std::size_t i = 1; i < slopes.size(); ++i) {
            if (near_equal(slopes[i], out.A_.back(), max_slope, 1e-9)) continue;
            out.q_.push_back(xs[i]);
            out.A_.push_back(slopes[i]);
            out.B_.push_back(intercepts[i]);
        }
        out.q_.push_back(xs.back());
        if constexpr (!is_exact_v<S>) {
            for (std::size_t i = 1; i < out.A_.size(); ++i)
                out.B_[i] = out.B_[i - 1] - (out.A_[i] - out.A_[i - 1]) * out.q_[i];
        }
        return out;
    }

    // Linear interpolation of nodes (x_k, y_k); coincident nodes are collapsed.
    static PiecewiseLinear from_nodes(const std::vector<S>& xs, const std::vector<S>& ys) {
        if (xs.size() != ys.size() || xs.size() < 2) throw InvalidInput("need at least two nodes");
        const double span = abs_value(to_double(S(xs.back() - xs.front())));
        std::vector<S> kx{xs.front()}, ky{ys.front()};
        for (std::size_t k = 1; k < xs.size(); ++k) {
            bool coincide;
            if constexpr (is_exact_v<S>)
                coincide = xs[k] == kx.back();
            else
                coincide = abs_value(xs[k] - kx.back()) <= 1e-13 * span;
            if (coincide) {
                if (k + 1 == xs.size()) {
                    kx.back() = xs[k];
                    ky.back() = ys[k];
                }
                continue;
            }
            if (xs[k] < kx.back()) throw InvalidInput("nodes must be increasing");
            kx.push_back(xs[k]);
            ky.push_back(ys[k]);
        }
        if (kx.size() < 2) throw InvalidInput("degenerate node set");
        std::vector<S> slopes, intercepts;
        for (std::size_t k = 0; k + 1 < kx.size(); ++k) {
            S slope = (ky[k + 1] - ky[k]) / (kx[k + 1] - kx[k]);
            slopes.push_back(slope);
            intercepts.push_back(ky[k] - slope * kx[k]);
        }
        return canonicalize(kx, slopes, intercepts);
    }

    static PiecewiseLinear affine(const S& a, const S& b, const S& slope, const S& intercept) {
        return canonicalize({a, b}, {slope}, {intercept});
    }

    static PiecewiseLinear from_piecewise_poly(const PiecewisePoly<S>& f) {
        std::vector<S> slopes, intercepts;
        for (const auto& p : f.pieces()) {
            if (p.degree() > 1) throw InvalidInput("piece of degree above one in a piecewise linear function");
            slopes.push_back(p.coeff(1));
            intercepts.push_back(p.coeff(0));
        }
        return canonicalize(f.breakpoints(), slopes, intercepts);
    }

    int breakpoint_count() const { return static_cast<int>(A_.size()) - 1; }
    const std::vector<S>& q() const { return q_; }
    const std::vector<S>& A() const { return A_; }
    const std::vector<S>& B() const { return B_; }
    const S& lower() const { return q_.front(); }
    const S& upper() const { return q_.back(); }

    std::size_t piece_index(const S& x) const {
        if (x < lower() || x > upper()) throw DomainError("evaluation point outside the domain");
        auto it = std::upper_bound(q_.begin(), q_.end(), x);
        std::size_t i = static_cast<std::size_t>(it - q_.begin());
        return std::min(i == 0 ? 0 : i - 1, A_.size() - 1);
    }

    S operator()(const S& x) const {
        std::size_t i = piece_index(x);
        return A_[i] * x + B_[i];
    }

    S lipschitz() const {
        S best(0);
        for (const auto& a : A_) best = std::max(best, abs_value(a));
        return best;
    }

    // Node values at q_0..q_{Q+1}.
    std::vector<S> node_values() const {
        std::vector<S> ys;
        for (std::size_t k = 0; k < q_.size(); ++k) {
            std::size_t i = std::min(k, A_.size() - 1);
            ys.push_back(A_[i] * q_[k] + B_[i]);
        }
        return ys;
    }

    PiecewisePoly<S> to_piecewise_poly() const {
        std::vector<Poly<S>> ps;
        for (std::size_t i = 0; i < A_.size(); ++i) ps.push_back(Poly<S>::linear(A_[i], B_[i]));
        return PiecewisePoly<S>(q_, std::move(ps));
    }

    friend bool operator==(const PiecewiseLinear& f, const PiecewiseLinear& g) {
        return f.q_ == g.q_ && f.A_ == g.A_ && f.B_ == g.B_;
    }

private:
    std::vector<S> q_, A_, B_;
};

template <class S>
int breakpoint_count(const PiecewiseLinear<S>& f) {
    return f.breakpoint_count();
}

template <class S>
S lipschitz(const PiecewiseLinear<S>& f) {
    return f.lipschitz();
}

template <class S>
PiecewiseLinear<S> pl_combine(const PiecewiseLinear<S>& f, const S& sf, const PiecewiseLinear<S>& g, const S& sg) {
    require_same_domain(f.lower(), f.upper(), g.lower(), g.upper());
    auto xs = merge_points(f.q(), g.q());
    std::vector<S> slopes, intercepts;
    for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
        S mid = (xs[k] + xs[k + 1]) / S(2);
        std::size_t i = f.piece_index(mid), j = g.piece_index(mid);
        slopes.push_back(sf * f.A()[i] + sg * g.A()[j]);
        intercepts.push_back(sf * f.B()[i] + sg * g.B()[j]);
    }
    return PiecewiseLinear<S>::canonicalize(xs, slopes, intercepts);
}

template <class S>
PiecewiseLinear<S> pl_add(const PiecewiseLinear<S>& f, const PiecewiseLinear<S>& g) {
    return pl_combine(f, S(1), g, S(1));
}

template <class S>
PiecewiseLinear<S> pl_sub(const PiecewiseLinear<S>& f, const PiecewiseLinear<S>& g) {
    return pl_combine(f, S(1), g, S(-1));
}

template <class S>
PiecewiseLinear<S> pl_scale(const S& s, const PiecewiseLinear<S>& f) {
    std::vector<S> slopes, intercepts;
    for (std::size_t i = 0; i < f.A().size(); ++i) {
        slopes.push_back(s * f.A()[i]);
        intercepts.push_back(s * f.B()[i]);
    }
    return PiecewiseLinear<S>::canonicalize(f.q(), slopes, intercepts);
}

template <class S>
PiecewiseLinear<S> pl_add_constant(const PiecewiseLinear<S>& f, const S& c) {
    std::vector<S> intercepts = f.B();
    for (auto& v : intercepts) v += c;
    return PiecewiseLinear<S>::canonicalize(f.q(), f.A(), intercepts);
}

// x -> -f(lower + upper - x): slopes reverse order, breakpoints mirror.
template <class S>
PiecewiseLinear<S> pl_reflect(const PiecewiseLinear<S>& f) {
    const S sum = f.lower() + f.upper();
    std::vector<S> xs, slopes, intercepts;
    for (auto it = f.q().rbegin(); it != f.q().rend(); ++it) xs.push_back(sum - *it);
    for (std::size_t k = f.A().size(); k-- > 0;) {
        slopes.push_back(f.A()[k]);
        intercepts.push_back(-f.B()[k] - f.A()[k] * sum);
    }
    return PiecewiseLinear<S>::canonicalize(xs, slopes, intercepts);
}

// max{f, 0} with kinks inserted at the zero crossings.
template <class S>
PiecewiseLinear<S> pl_relu(const PiecewiseLinear<S>& f) {
    std::vector<S> xs{f.lower()}, slopes, intercepts;
    for (std::size_t i = 0; i < f.A().size(); ++i) {
        const S& lo = f.q()[i];
        const S& hi = f.q()[i + 1];
        std::vector<S> cuts;
        if (f.A()[i] != 0) {
            S root = -f.B()[i] / f.A()[i];
            if (lo < root && root < hi) cuts.push_back(root);
        }
        cuts.push_back(hi);
        S left = lo;
        for (const auto& right : cuts) {
            S mid = (left + right) / S(2);
            bool active = f.A()[i] * mid + f.B()[i] > 0;
            slopes.push_back(active ? f.A()[i] : S(0));
            intercepts.push_back(active ? f.B()[i] : S(0));
            xs.push_back(right);
            left = right;
        }
    }
    return PiecewiseLinear<S>::canonicalize(xs, slopes, intercepts);
}

// x -> f(lower + (upper - lower) t) on [0, 1].
template <class S>
PiecewiseLinear<S> pl_to_unit_domain(const PiecewiseLinear<S>& f) {
    const S a = f.lower(), len = f.upper() - f.lower();
    std::vector<S> xs, slopes, intercepts;
    for (const auto& v : f.q()) xs.push_back((v - a) / len);
    xs.front() = S(0);
    xs.back() = S(1);
    for (std::size_t i = 0; i < f.A().size(); ++i) {
        slopes.push_back(f.A()[i] * len);
        intercepts.push_back(f.A()[i] * a + f.B()[i]);
    }
    return PiecewiseLinear<S>::canonicalize(xs, slopes, intercepts);
}

// Coefficient-wise change of scalar; double to rational is exact.
template <class T, class S>
PiecewisePoly<T> pp_convert(const PiecewisePoly<S>& f) {
    auto cast = [](const S& x) {
        if constexpr (std::is_same_v<T, S>) return x;
        else if constexpr (is_exact_v<T>) return T(x);
        else return to_double(x);
    };
    std::vector<T> xs;
    for (const auto& x : f.breakpoints()) xs.push_back(cast(x));
    std::vector<Poly<T>> ps;
    for (const auto& p : f.pieces()) {
        std::vector<T> c;
        for (const auto& v : p.coeffs()) c.push_back(cast(v));
        ps.emplace_back(std::move(c));
    }
    return PiecewisePoly<T>(std::move(xs), std::move(ps));
}

}  // namespace relunet
