#pragma once

#include "relunet/shallow.hpp"

#include <stdexcept>
#include <vector>

namespace relunet {

class NotRepresentable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CapacityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kMaxSearchWidth = 30;

// Slope indices are 0-based: the relation reads sum_p (-1)^p A[indices[p]] = 0 over an odd-size set.
struct SlopeRelationCertificate {
    bool holds = false;
    std::vector<int> witness_indices;
    bool advisory = false;  // decided with a float tolerance rather than exactly
};

template <class S>
S alternating_sum(const std::vector<S>& slopes, const std::vector<int>& indices) {
    S acc(0);
    for (std::size_t p = 0; p < indices.size(); ++p) acc += (p % 2 == 0) ? slopes[indices[p]] : S(-slopes[indices[p]]);
    return acc;
}

template <class S>
double slope_scale(const std::vector<S>& slopes) {
    double m = 0.0;
    for (const auto& a : slopes) m = std::max(m, abs_value(to_double(a)));
    return m;
}

template <class S>
bool relation_indices_valid(const std::vector<S>& slopes, const std::vector<int>& indices) {
    if (indices.size() % 2 == 0) return false;
    for (std::size_t p = 0; p < indices.size(); ++p) {
        if (indices[p] < 0 || indices[p] >= static_cast<int>(slopes.size())) return false;
        if (p > 0 && indices[p] <= indices[p - 1]) return false;
    }
    return near_zero(alternating_sum(slopes, indices), slope_scale(slopes), 1e-9);
}

namespace detail {

template <class S>
struct SubsetSum {
    S value;
    unsigned mask;
};

// Signed sums over all subsets of slopes[first, first + count), signs alternating by rank.
template <class S>
void enumerate_subsets(const std::vector<S>& slopes, int first, int count, std::vector<SubsetSum<S>>& even,
                       std::vector<SubsetSum<S>>& odd) {
    for (unsigned mask = 0; mask < (1u << count); ++mask) {
        S acc(0);
        int rank = 0;
        for (int k = 0; k < count; ++k) {
            if (!(mask >> k & 1u)) continue;
            if (rank % 2 == 0)
                acc += slopes[first + k];
            else
                acc -= slopes[first + k];
            ++rank;
        }
        (rank % 2 == 0 ? even : odd).push_back({acc, mask});
    }
}

}  // namespace detail

// Meet in the middle: a left subset of size s and a right subset combine to
// S_left + (-1)^s S_right, and the total size has to be odd.
template <class S>
std::vector<int> find_slope_relation(const std::vector<S>& slopes) {
    const int n = static_cast<int>(slopes.size());
    const int nl = n / 2, nr = n - nl;
    using Entry = detail::SubsetSum<S>;
    std::vector<Entry> left_even, left_odd, right_even, right_odd;
    detail::enumerate_subsets(slopes, 0, nl, left_even, left_odd);
    detail::enumerate_subsets(slopes, nl, nr, right_even, right_odd);
    auto by_value = [](const Entry& x, const Entry& y) { return x.value < y.value || (x.value == y.value && x.mask < y.mask); };
    std::sort(right_even.begin(), right_even.end(), by_value);
    std::sort(right_odd.begin(), right_odd.end(), by_value);
    const double tol = is_exact_v<S> ? 0.0 : 1e-9 * (1.0 + slope_scale(slopes));

    auto lookup = [&](const std::vector<Entry>& table, const S& target) -> const Entry* {
        auto it = std::lower_bound(table.begin(), table.end(), target - S(tol),
                                   [](const Entry& e, const S& t) { return e.value < t; });
        if (it != table.end() && !(target + S(tol) < it->value)) return &*it;
        return nullptr;
    };

    std::vector<Entry> lefts(left_even);
    lefts.insert(lefts.end(), left_odd.begin(), left_odd.end());
    std::sort(lefts.begin(), lefts.end(), [](const Entry& x, const Entry& y) { return x.mask < y.mask; });
    for (const auto& l : lefts) {
        const bool left_odd_size = __builtin_popcount(l.mask) % 2 == 1;
        const Entry* hit = left_odd_size ? lookup(right_even, l.value) : lookup(right_odd, S(-l.value));
        if (!hit) continue;
        std::vector<int> idx;
        for (int k = 0; k < nl; ++k)
            if (l.mask >> k & 1u) idx.push_back(k);
        for (int k = 0; k < nr; ++k)
            if (hit->mask >> k & 1u) idx.push_back(nl + k);
        return idx;
    }
    return {};
}

template <class S>
SlopeRelationCertificate slope_relation_holds(const PiecewiseLinear<S>& f, int width) {
    if (width < 0) throw InvalidInput("width must be nonnegative");
    SlopeRelationCertificate cert;
    cert.advisory = !is_exact_v<S>;
    const int q = f.breakpoint_count();
    if (q > width) return cert;
    if (q <= width - 1) {
        cert.holds = true;
        return cert;
    }
    if (width > kMaxSearchWidth) throw CapacityError("index-set search is capped at width 30");
    cert.witness_indices = find_slope_relation(f.A());
    cert.holds = !cert.witness_indices.empty();
    return cert;
}

// Unit-slope neurons anchored at q_0..q_Q; needs Q <= width - 1.
template <class S>
std::vector<S> synthesize_direct(const PiecewiseLinear<S>& f, int width) {
    const int q = f.breakpoint_count();
    if (q > width - 1) throw InvalidInput("direct construction needs fewer breakpoints than neurons");
    ShallowUnpacked<S> u;
    u.w.assign(width, S(0));
    u.b.assign(width, S(0));
    u.v.assign(width, S(0));
    for (int j = 0; j <= q; ++j) {
        u.w[j] = S(1);
        u.b[j] = -f.q()[j];
        u.v[j] = j == 0 ? f.A()[0] : S(f.A()[j] - f.A()[j - 1]);
    }
    u.c = f.B()[0] + f.A()[0] * f.lower();
    return shallow_pack(u);
}

namespace detail {

// Peel the last kink off f (which has exactly `width` breakpoints) and recurse.
template <class S>
void peel(const PiecewiseLinear<S>& f, int width, std::vector<int> indices, ShallowUnpacked<S>& out) {
    if (f.breakpoint_count() != width) throw std::logic_error("peel-off lost track of the breakpoint count");
    if (!relation_indices_valid(f.A(), indices)) throw std::logic_error("peel-off index set no longer certifies");
    if (width == 0) {
        out.c = f.B()[0];
        return;
    }
    const int m = width;
    const S d = f.A()[m] - f.A()[m - 1];
    const S kink = f.q()[m];
    const int k = static_cast<int>(indices.size());
    S w, b;
    PiecewiseLinear<S> ramp;
    if (indices.back() != m) {
        w = S(1);
        b = -kink;
    } else {
        w = S(-1);
        b = kink;
        if (k > 1 && indices[k - 2] == m - 1) {
            indices.resize(k - 2);
        } else {
            indices.back() = m - 1;
        }
    }
    ramp = pl_relu(PiecewiseLinear<S>::affine(f.lower(), f.upper(), w, b));
    auto rest = pl_sub(f, pl_scale(d, ramp));
    peel(rest, m - 1, std::move(indices), out);
    out.w[m - 1] = w;
    out.b[m - 1] = b;
    out.v[m - 1] = d;
}

}  // namespace detail

// Network with exactly `width` breakpoints worth of neurons realizing f, given a certifying index set.
template <class S>
std::vector<S> synthesize_with_certificate(const PiecewiseLinear<S>& f, int width, const std::vector<int>& indices) {
    if (f.breakpoint_count() != width) throw InvalidInput("certificate synthesis needs Q(f) = width");
    if (!relation_indices_valid(f.A(), indices)) throw InvalidInput("index set does not certify the slope relation");
    ShallowUnpacked<S> u;
    u.w.assign(width, S(0));
    u.b.assign(width, S(0));
    u.v.assign(width, S(0));
    detail::peel(f, width, indices, u);
    return shallow_pack(u);
}

template <class S>
std::vector<S> synthesize(const PiecewiseLinear<S>& f, int width) {
    auto cert = slope_relation_holds(f, width);
    if (!cert.holds) throw NotRepresentable("function is not representable at this width");
    if (f.breakpoint_count() <= width - 1) return synthesize_direct(f, width);
    return synthesize_with_certificate(f, width, cert.witness_indices);
}

}  // namespace relunet
