#pragma once

#include "relunet/log.hpp"
#include "relunet/repr.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace relunet {

template <class S>
struct AdjustOutcome {
    PiecewiseLinear<S> h;
    bool q_dropped = false;
    S risk_before{0};
    S risk_after{0};
    std::string case_label;      // "<position>/<construction>", or "unchanged"
    bool indeterminate = false;  // float crossing test could not decide
};

namespace detail {

template <class S>
struct Crossing {
    bool found = false;
    S z{0};
    int side = 0;  // sign of f - g on the piece when there is no crossing
    bool indeterminate = false;
};

template <class S>
S clamp_to(const S& x, const S& lo, const S& hi) {
    if (x < lo) return lo;
    if (hi < x) return hi;
    return x;
}

// Where does f meet g on the open piece k? Among several crossings the one nearest the middle
// of the piece wins, so mirrored inputs pick mirrored crossings.
template <class S>
Crossing<S> find_crossing(const PiecewiseLinear<S>& g, const PiecewisePoly<S>& f, std::size_t k) {
    const S lo = g.q()[k], hi = g.q()[k + 1];
    const S mid = (lo + hi) / 2;
    const Poly<S> line = Poly<S>::linear(g.A()[k], g.B()[k]);
    Crossing<S> out;
    auto offer = [&](const S& x) {
        if (!out.found || abs_value(S(x - mid)) < abs_value(S(out.z - mid))) out.z = x;
        out.found = true;
    };
    if constexpr (is_exact_v<S>) {
        const auto& xb = f.breakpoints();
        for (std::size_t m = 0; m < f.piece_count(); ++m) {
            const S s0 = std::max(lo, xb[m]), s1 = std::min(hi, xb[m + 1]);
            if (!(s0 < s1)) continue;
            const Poly<S> d = f.pieces()[m] - line;
            if (d.is_zero()) {
                offer(clamp_to(mid, s0, s1));
                continue;
            }
            for (const auto& x : roots_in(d, s0, s1)) offer(x);
            if (s1 < hi && d(s1) == 0) offer(s1);
        }
        if (!out.found) out.side = sign_of(S(f(mid) - line(mid)));
        return out;
    } else {
        constexpr int kGrid = 256;
        const double scale = 1.0 + f.magnitude() + std::fabs(g.A()[k]) * std::max(std::fabs(lo), std::fabs(hi)) +
                             std::fabs(g.B()[k]);
        auto diff = [&](double x) { return f(x) - line(x); };
        double prev_x = 0.0, prev_d = 0.0, min_abs = INFINITY, max_abs = -1.0;
        for (int n = 1; n < kGrid; ++n) {
            const double x = lo + (hi - lo) * n / kGrid;
            const double d = diff(x);
            if (d == 0.0) {
                offer(x);
            } else if (n > 1 && prev_d != 0.0 && (d > 0) != (prev_d > 0)) {
                double l = prev_x, r = x, dl = prev_d;
                for (int it = 0; it < 200 && r - l > 1e-15 * (1.0 + std::fabs(l)); ++it) {
                    const double m = 0.5 * (l + r), dm = diff(m);
                    if (dm == 0.0) {
                        l = r = m;
                        break;
                    }
                    if ((dm > 0) == (dl > 0)) {
                        l = m;
                        dl = dm;
                    } else {
                        r = m;
                    }
                }
                offer(0.5 * (l + r));
            }
            min_abs = std::min(min_abs, std::fabs(d));
            if (std::fabs(d) > max_abs) {
                max_abs = std::fabs(d);
                out.side = d > 0 ? 1 : -1;
            }
            prev_x = x;
            prev_d = d;
        }
        if (!out.found && min_abs <= 1e-9 * scale) {
            out.indeterminate = true;
            log_warning("slope adjustment: target and approximant nearly touch; treating the piece as crossing-free");
        }
        return out;
    }
}


// Nodes and node values of g; piece i (1-based) spans [q[i-1], q[i]] with slope A(i).
template <class S>
struct Frame {
    explicit Frame(const PiecewiseLinear<S>& fn) : g(fn), q(fn.q()), y(fn.node_values()) {}
    const PiecewiseLinear<S>& g;
    std::vector<S> q, y;
    int Q() const { return g.breakpoint_count(); }
    const S& A(int i) const { return g.A()[i - 1]; }
    const S& B(int i) const { return g.B()[i - 1]; }
    PiecewiseLinear<S> build() const { return PiecewiseLinear<S>::from_nodes(q, y); }
};

template <class S>
struct Built {
    PiecewiseLinear<S> h;
    std::string label;
};

template <class S>
Built<S> reflected(Built<S> b) {
    b.h = pl_reflect(b.h);
    return b;
}

// f lies below g on piece i; 0 < a < A_i.
template <class S>
Built<S> lower_slope_without_crossing(const PiecewiseLinear<S>& g, int i, const S& a) {
    Frame<S> fr(g);
    const int Q = fr.Q();
    auto& q = fr.q;
    auto& y = fr.y;
    if (i == Q + 1) {
        y[Q + 1] = y[Q] + a * (q[Q + 1] - q[Q]);
        return {fr.build(), "no-crossing/last-piece"};
    }
    const bool rises_enough = y[i + 1] - y[i - 1] >= a * (q[i + 1] - q[i - 1]);
    if (rises_enough && fr.A(i + 1) < fr.A(i)) {
        q.erase(q.begin() + i);
        y.erase(y.begin() + i);
        return {fr.build(), "no-crossing/drop-breakpoint"};
    }
    // The slope-a ray from the left node meets the line of piece i + 1.
    S u = (fr.B(i + 1) - y[i - 1] + a * q[i - 1]) / (a - fr.A(i + 1));
    u = clamp_to(u, q[i - 1], q[i + 1]);
    y[i] = y[i - 1] + a * (u - q[i - 1]);
    q[i] = u;
    return {fr.build(), rises_enough ? "no-crossing/pivot" : "no-crossing/pivot-low-rise"};
}

// g meets f at z inside the first piece; 0 < a < A_1.
template <class S>
Built<S> lower_first_slope(const PiecewiseLinear<S>& g, const S& z, const S& a) {
    Frame<S> fr(g);
    const S gz = g(z);
    if (fr.Q() == 0) return {PiecewiseLinear<S>::affine(g.lower(), g.upper(), a, gz - a * z), "first-piece/affine"};
    auto& q = fr.q;
    auto& y = fr.y;
    const bool rises_enough = y[2] - gz >= a * (q[2] - z);
    if (rises_enough && fr.A(2) < fr.A(1)) {
        const S secant = (y[2] - gz) / (q[2] - z);
        y[0] = gz + secant * (q[0] - z);
        q.erase(q.begin() + 1);
        y.erase(y.begin() + 1);
        return {fr.build(), "first-piece/drop-breakpoint"};
    }
    S u = (fr.B(2) - gz + a * z) / (a - fr.A(2));
    u = clamp_to(u, q[0], q[2]);
    y[0] = gz + a * (q[0] - z);
    q[1] = u;
    y[1] = gz + a * (u - z);
    return {fr.build(), rises_enough ? "first-piece/pivot" : "first-piece/pivot-low-rise"};
}

// g meets f at z inside interior piece i (2 <= i <= Q); 0 < a < A_i.
template <class S>
Built<S> lower_interior_slope(const PiecewiseLinear<S>& g, const S& z, int i, const S& a, bool mirrored = false) {
    Frame<S> fr(g);
    auto& q = fr.q;
    auto& y = fr.y;
    const S gz = g(z);
    const S right_secant = (y[i + 1] - gz) / (q[i + 1] - z);
    const S left_secant = (y[i - 2] - gz) / (q[i - 2] - z);
    const S& prev = fr.A(i - 1);
    const S& cur = fr.A(i);
    const S& next = fr.A(i + 1);

    // Slope-a segment through (z, g(z)) cut off by the lines of both neighbours.
    auto double_pivot = [&](const char* label) -> Built<S> {
        S u = clamp_to(S((fr.B(i - 1) - gz + a * z) / (a - prev)), q[i - 2], z);
        S v = clamp_to(S((fr.B(i + 1) - gz + a * z) / (a - next)), z, q[i + 1]);
        q[i - 1] = u;
        y[i - 1] = gz + a * (u - z);
        q[i] = v;
        y[i] = gz + a * (v - z);
        return {fr.build(), label};
    };
    auto reflect_and_retry = [&]() {
        const PiecewiseLinear<S> rg = pl_reflect(g);
        return reflected(lower_interior_slope(rg, S(g.lower() + g.upper() - z), fr.Q() + 2 - i, a, true));
    };

    if (cur < std::min(prev, next)) return double_pivot("interior/local-min-pivot");
    if (cur > std::max(prev, next)) {
        if (std::max(right_secant, left_secant) < a) return double_pivot("interior/local-max-pivot");
        if (right_secant < left_secant && !mirrored) return reflect_and_retry();
        S u = (fr.B(i - 1) - gz + right_secant * z) / (right_secant - prev);
        u = clamp_to(u, q[i - 2], q[i - 1]);
        const S yu = gz + right_secant * (u - z);
        q.erase(q.begin() + (i - 1), q.begin() + (i + 1));
        y.erase(y.begin() + (i - 1), y.begin() + (i + 1));
        q.insert(q.begin() + (i - 1), u);
        y.insert(y.begin() + (i - 1), yu);
        return {fr.build(), "interior/local-max-secant"};
    }
    if (std::min(right_secant, left_secant) < a) return double_pivot("interior/monotone-pivot");
    if (!(prev < cur) && !mirrored) return reflect_and_retry();
    S u = (fr.B(i + 1) - gz + left_secant * z) / (left_secant - next);
    u = clamp_to(u, z, q[i + 1]);
    const S yu = gz + left_secant * (u - z);
    q.erase(q.begin() + (i - 1), q.begin() + (i + 1));
    y.erase(y.begin() + (i - 1), y.begin() + (i + 1));
    q.insert(q.begin() + (i - 1), u);
    y.insert(y.begin() + (i - 1), yu);
    return {fr.build(), "interior/monotone-secant"};
}

// Normalized dispatch: 0 < a < A_i, piece i 1-based.
template <class S>
Built<S> lower_slope(const PiecewiseLinear<S>& g, int i, const S& a, const Crossing<S>& crossing) {
    const int Q = g.breakpoint_count();
    if (!crossing.found) {
        // The construction needs f below g; mirror when it is above.
        if (crossing.side > 0) return reflected(lower_slope_without_crossing(pl_reflect(g), Q + 2 - i, a));
        return lower_slope_without_crossing(g, i, a);
    }
    if (i == 1) return lower_first_slope(g, crossing.z, a);
    if (i == Q + 1) return reflected(lower_first_slope(pl_reflect(g), S(g.lower() + g.upper() - crossing.z), a));
    return lower_interior_slope(g, crossing.z, i, a);
}

template <class S>
bool slopes_match_except(const PiecewiseLinear<S>& h, const PiecewiseLinear<S>& g, std::size_t piece, const S& a) {
    if (h.A().size() != g.A().size()) return false;
    double scale = 1.0 + abs_value(to_double(a));
    for (const auto& s : g.A()) scale = std::max(scale, abs_value(to_double(s)));
    for (std::size_t k = 0; k < g.A().size(); ++k) {
        const S& want = k == piece ? a : g.A()[k];
        if (!near_equal(h.A()[k], want, scale, 1e-9)) return false;
    }
    return true;
}

template <class S>
bool exceeds(const S& slope, const S& bound) {
    if constexpr (is_exact_v<S>)
        return abs_value(slope) > bound;
    else
        return abs_value(slope) > bound * (1.0 + 1e-9) + 1e-300;
}

template <class S>
long over_count(const PiecewiseLinear<S>& g, const S& bound) {
    return std::count_if(g.A().begin(), g.A().end(), [&](const S& s) { return exceeds(s, bound); });
}

// (Q + 1)^2 plus the number of slopes above the bound; every reduction step lowers it.
template <class S>
long reduction_potential(const PiecewiseLinear<S>& g, const S& bound) {
    const long q = g.breakpoint_count();
    return (q + 1) * (q + 1) + over_count(g, bound);
}

template <class S>
PiecewiseLinear<S> best_constant(const Problem<S>& problem) {
    const S mass = pp_integrate(problem.density);
    const S c = mass == 0 ? problem.target(problem.lower())
                          : S(pp_integrate(pp_mul(problem.target, problem.density)) / mass);
    return PiecewiseLinear<S>::affine(problem.lower(), problem.upper(), S(0), c);
}

}  // namespace detail

// Replace the slope of piece `piece` (0-based) by `a` without raising the risk, or drop a breakpoint.
template <class S>
AdjustOutcome<S> adjust_slope(const PiecewiseLinear<S>& g, const Problem<S>& problem, int piece, const S& a) {
    const int Q = g.breakpoint_count();
    if (piece < 0 || piece > Q) throw InvalidInput("piece index out of range");
    require_same_domain(g.lower(), g.upper(), problem.lower(), problem.upper());
    const S& current = g.A()[piece];
    const S lip = pp_lipschitz(problem.target);
    const double scale = 1.0 + abs_value(to_double(current));
    const bool above_lip = !(abs_value(a) < lip) || near_equal(abs_value(a), lip, scale, 1e-12);
    const bool below_slope = !(abs_value(current) < abs_value(a)) || near_equal(abs_value(a), abs_value(current), scale, 1e-12);
    if (!above_lip || !below_slope || !(a * current > 0))
        throw InvalidInput("slope target must satisfy Lip(f) <= |a| <= |A_i| with the sign of A_i");

    AdjustOutcome<S> out;
    out.risk_before = pl_risk(g, problem);
    if (a == current) {
        out.h = g;
        out.risk_after = out.risk_before;
        out.case_label = "unchanged";
        return out;
    }
    auto crossing = detail::find_crossing(g, problem.target, static_cast<std::size_t>(piece));
    out.indeterminate = crossing.indeterminate;
    detail::Built<S> built;
    if (a < 0) {
        crossing.side = -crossing.side;
        built = detail::lower_slope(pl_scale(S(-1), g), piece + 1, S(-a), crossing);
        built.h = pl_scale(S(-1), built.h);
    } else {
        built = detail::lower_slope(g, piece + 1, a, crossing);
    }
    out.h = std::move(built.h);
    out.case_label = std::move(built.label);
    const int q_after = out.h.breakpoint_count();
    if (q_after > Q) throw std::logic_error("slope adjustment added a breakpoint");
    out.q_dropped = q_after < Q;
    if (!out.q_dropped && !detail::slopes_match_except(out.h, g, static_cast<std::size_t>(piece), a))
        throw std::logic_error("slope adjustment changed more than the requested slope");
    out.risk_after = pl_risk(out.h, problem);
    return out;
}

// Lower every slope above Lip(f) down to Lip(f); a constant target gives the best constant.
// `potentials`, when given, receives the reduction potential before each step and at the end.
template <class S>
PiecewiseLinear<S> lipschitz_reduce(const PiecewiseLinear<S>& g, const Problem<S>& problem,
                                    std::vector<long>* potentials = nullptr) {
    const S lip = pp_lipschitz(problem.target);
    if (lip == 0) return detail::best_constant(problem);
    PiecewiseLinear<S> h = g;
    long potential = detail::reduction_potential(h, lip);
    if (potentials) potentials->push_back(potential);
    for (;;) {
        const auto& A = h.A();
        auto it = std::find_if(A.begin(), A.end(), [&](const S& s) { return detail::exceeds(s, lip); });
        if (it == A.end()) break;
        const int piece = static_cast<int>(it - A.begin());
        const S a = sign_of(*it) > 0 ? lip : S(-lip);
        h = adjust_slope(h, problem, piece, a).h;
        const long next = detail::reduction_potential(h, lip);
        if (potentials) potentials->push_back(next);
        if (next >= potential) throw std::logic_error("Lipschitz reduction failed to make progress");
        potential = next;
    }
    return h;
}

// Lower the Lipschitz constant to Q(g) Lip(f) while keeping the alternating slope relation on
// `indices` (0-based) intact, unless a breakpoint disappears on the way.
template <class S>
PiecewiseLinear<S> relation_preserving_reduce(const PiecewiseLinear<S>& g, const Problem<S>& problem,
                                              const std::vector<int>& indices) {
    const int q0 = g.breakpoint_count();
    for (int idx : indices)
        if (idx > q0) throw InvalidInput("relation index beyond the last piece");
    if (!relation_indices_valid(g.A(), indices)) throw InvalidInput("indices do not carry a slope relation");
    const S lip = pp_lipschitz(problem.target);
    const S bound = S(q0) * lip;
    if (!detail::exceeds(g.lipschitz(), bound)) return g;
    if (lip == 0) return detail::best_constant(problem);

    PiecewiseLinear<S> h = g;
    long potential = detail::reduction_potential(h, bound);
    while (h.breakpoint_count() == q0 && detail::exceeds(h.lipschitz(), bound)) {
        const auto& A = h.A();
        const int top = static_cast<int>(
            std::find_if(A.begin(), A.end(), [&](const S& s) { return detail::exceeds(s, bound); }) - A.begin());
        const S top_target = sign_of(A[top]) > 0 ? bound : S(-bound);
        std::vector<std::pair<int, S>> moves{{top, top_target}};

        auto pos = std::find(indices.begin(), indices.end(), top);
        if (pos != indices.end()) {
            // Take the excess off the top slope and the same mass off members pulling the other way.
            auto signed_slope = [&](std::size_t p) { return (p % 2 == 0) ? A[indices[p]] : S(-A[indices[p]]); };
            const std::size_t top_pos = static_cast<std::size_t>(pos - indices.begin());
            const int side = sign_of(signed_slope(top_pos));
            std::vector<std::size_t> donors;
            for (std::size_t p = 0; p < indices.size(); ++p)
                if (p != top_pos && sign_of(signed_slope(p)) == -side) donors.push_back(p);
            std::stable_sort(donors.begin(), donors.end(), [&](std::size_t x, std::size_t y) {
                return abs_value(A[indices[x]]) > abs_value(A[indices[y]]);
            });
            S need = abs_value(A[top]) - bound;
            for (std::size_t p : donors) {
                if (!(need > 0)) break;
                const S& slope = A[indices[p]];
                const S cap = abs_value(slope) > lip ? S(abs_value(slope) - lip) : S(0);
                const S take = std::min(cap, need);
                if (!(take > 0)) continue;
                need -= take;
                const S mag = abs_value(slope) - take;
                moves.emplace_back(indices[p], sign_of(slope) > 0 ? mag : S(-mag));
            }
            if (!near_zero(need, to_double(bound), 1e-9))
                throw std::logic_error("slope relation has too little mass to redistribute");
        }
        std::sort(moves.begin(), moves.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
        for (const auto& [piece, a] : moves) {
            if (h.A()[piece] == a) continue;
            auto out = adjust_slope(h, problem, piece, a);
            h = std::move(out.h);
            if (out.q_dropped) return h;
        }
        const long next = detail::reduction_potential(h, bound);
        if (next >= potential) throw std::logic_error("relation-preserving reduction failed to make progress");
        potential = next;
    }
    return h;
}

template <class S>
struct BetterApproxResult {
    std::vector<S> theta;
    S risk_before{0};
    S risk_after{0};
    int q_before = 0;
    int q_after = 0;
    S lip_after{0};
    S sup_after{0};
    S lip_target{0};  // Lip(f)
    S sup_target{0};  // sup |f|
};

// A network of the same width with no larger risk, no more breakpoints, Lipschitz constant at
// most width * Lip(f) and sup norm at most width * Lip(f) * (b - a) + sup |f|.
template <class S>
BetterApproxResult<S> better_approx(const std::vector<S>& theta, int width, const Problem<S>& problem) {
    check_shallow_length(theta.size(), width);
    const S a = problem.lower(), b = problem.upper();
    const auto g = realize(theta, width, a, b);
    BetterApproxResult<S> res;
    res.risk_before = risk_exact(theta, width, problem);
    res.q_before = g.breakpoint_count();
    res.lip_target = pp_lipschitz(problem.target);
    {
        auto [lo, hi] = pp_range(problem.target);
        res.sup_target = std::max(abs_value(lo), abs_value(hi));
    }

    std::vector<S> out;
    if (g.breakpoint_count() == width) {
        auto cert = slope_relation_holds(g, width);
        if (!cert.holds) throw std::logic_error("realization of a network lacks its slope relation");
        auto h = relation_preserving_reduce(g, problem, cert.witness_indices);
        if (h.breakpoint_count() == width)
            out = synthesize_with_certificate(h, width, cert.witness_indices);
        else
            out = synthesize(lipschitz_reduce(h, problem), width);
    } else {
        out = synthesize(lipschitz_reduce(g, problem), width);
    }

    // Shift by the smallest gap when the residual keeps one sign.
    auto residual = pp_sub(realize(out, width, a, b).to_piecewise_poly(), problem.target);
    auto [lo, hi] = pp_range(residual);
    if (lo > 0)
        out[3 * width] -= lo;
    else if (hi < 0)
        out[3 * width] -= hi;

    const auto n = realize(out, width, a, b);
    res.theta = out;
    res.risk_after = risk_exact(out, width, problem);
    res.q_after = n.breakpoint_count();
    res.lip_after = n.lipschitz();
    auto [nlo, nhi] = pp_range(n.to_piecewise_poly());
    res.sup_after = std::max(abs_value(nlo), abs_value(nhi));
    return res;
}

}  // namespace relunet
