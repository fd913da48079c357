#pragma once

#include "relunet/scalar.hpp"

#include <algorithm>
#include <utility>
#include <vector>

namespace relunet {

// Univariate polynomial, coefficients in ascending powers.
template <class S>
class Poly {
public:
    Poly() = default;
    explicit Poly(std::vector<S> coeffs) : c_(std::move(coeffs)) { strip(); }

    static Poly constant(const S& value) { return Poly(std::vector<S>{value}); }
    static Poly linear(const S& slope, const S& intercept) { return Poly(std::vector<S>{intercept, slope}); }

    const std::vector<S>& coeffs() const { return c_; }
    int degree() const { return c_.empty() ? 0 : static_cast<int>(c_.size()) - 1; }
    bool is_zero() const { return c_.empty(); }
    S coeff(std::size_t k) const { return k < c_.size() ? c_[k] : S(0); }

    S operator()(const S& x) const {
        S acc(0);
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * x + *it;
        return acc;
    }

    Poly derivative() const {
        std::vector<S> d;
        for (std::size_t k = 1; k < c_.size(); ++k) d.push_back(c_[k] * S(static_cast<long>(k)));
        return Poly(std::move(d));
    }

    // Antiderivative vanishing at zero.
    Poly antiderivative() const {
        std::vector<S> a(c_.size() + 1, S(0));
        for (std::size_t k = 0; k < c_.size(); ++k) a[k + 1] = c_[k] / S(static_cast<long>(k + 1));
        return Poly(std::move(a));
    }

    S integrate(const S& lo, const S& hi) const { return moment(lo, hi, 0); }

    // Integral of p(x) * x^m over [lo, hi].
    S moment(const S& lo, const S& hi, int m) const {
        S acc(0);
        S lo_pow = lo, hi_pow = hi;
        for (int k = 0; k < m; ++k) {
            lo_pow *= lo;
            hi_pow *= hi;
        }
        for (std::size_t k = 0; k < c_.size(); ++k) {
            acc += c_[k] * (hi_pow - lo_pow) / S(static_cast<long>(k + m + 1));
            lo_pow *= lo;
            hi_pow *= hi;
        }
        return acc;
    }

    // x -> p(alpha * x + beta)
    Poly compose_affine(const S& alpha, const S& beta) const {
        Poly result;
        Poly inner = Poly::linear(alpha, beta);
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) result = result * inner + Poly::constant(*it);
        return result;
    }

    double magnitude() const {
        double m = 0.0;
        for (const auto& v : c_) m = std::max(m, abs_value(to_double(v)));
        return m;
    }

    friend Poly operator+(const Poly& a, const Poly& b) {
        std::vector<S> r(std::max(a.c_.size(), b.c_.size()), S(0));
        for (std::size_t k = 0; k < a.c_.size(); ++k) r[k] += a.c_[k];
        for (std::size_t k = 0; k < b.c_.size(); ++k) r[k] += b.c_[k];
        return Poly(std::move(r));
    }
    friend Poly operator-(const Poly& a) {
        std::vector<S> r(a.c_);
        for (auto& v : r) v = -v;
        return Poly(std::move(r));
    }
    friend Poly operator-(const Poly& a, const Poly& b) { return a + (-b); }
    friend Poly operator*(const Poly& a, const Poly& b) {
        if (a.is_zero() || b.is_zero()) return Poly();
        std::vector<S> r(a.c_.size() + b.c_.size() - 1, S(0));
        for (std::size_t i = 0; i < a.c_.size(); ++i)
            for (std::size_t j = 0; j < b.c_.size(); ++j) r[i + j] += a.c_[i] * b.c_[j];
        return Poly(std::move(r));
    }
    friend Poly operator*(const S& s, const Poly& a) {
        std::vector<S> r(a.c_);
        for (auto& v : r) v *= s;
        return Poly(std::move(r));
    }
    friend bool operator==(const Poly& a, const Poly& b) { return a.c_ == b.c_; }

private:
    void strip() {
        while (!c_.empty() && c_.back() == 0) c_.pop_back();
    }
    std::vector<S> c_;
};

template <class S>
Poly<S> poly_remainder(const Poly<S>& num, const Poly<S>& den) {
    std::vector<S> r = num.coeffs();
    const auto& d = den.coeffs();
    const int dd = den.degree();
    const double scale = num.magnitude();
    for (int k = static_cast<int>(r.size()) - 1; k >= dd; --k) {
        S factor = r[k] / d[dd];
        for (int j = 0; j <= dd; ++j) r[k - dd + j] -= factor * d[j];
        r[k] = S(0);
    }
    if constexpr (!is_exact_v<S>) {
        for (auto& v : r)
            if (abs_value(v) <= 1e-13 * scale) v = S(0);
    }
    return Poly<S>(std::move(r));
}

template <class S>
std::vector<Poly<S>> sturm_chain(const Poly<S>& p) {
    std::vector<Poly<S>> chain{p, p.derivative()};
    while (!chain.back().is_zero() && chain.back().degree() > 0) {
        Poly<S> r = poly_remainder(chain[chain.size() - 2], chain.back());
        if (r.is_zero()) break;
        chain.push_back(-r);
    }
    if (chain.back().is_zero()) chain.pop_back();
    return chain;
}

template <class S>
int sturm_sign_changes(const std::vector<Poly<S>>& chain, const S& x) {
    int changes = 0, last = 0;
    for (const auto& q : chain) {
        int s = sign_of(q(x));
        if (s == 0) continue;
        if (last != 0 && s != last) ++changes;
        last = s;
    }
    return changes;
}

// Distinct real roots of p strictly inside (lo, hi), ascending. p must be nonzero.
// Degree one is solved in closed form; higher degrees are isolated by Sturm counts
// and bisected to width 1e-14 relative, then polished by one Newton step.
template <class S>
std::vector<S> roots_in(const Poly<S>& p, const S& lo, const S& hi) {
    std::vector<S> out;
    if (p.degree() == 0 || !(lo < hi)) return out;
    if (p.degree() == 1) {
        S x = -p.coeff(0) / p.coeff(1);
        if (lo < x && x < hi) out.push_back(x);
        return out;
    }
    const auto chain = sturm_chain(p);
    const auto dp = p.derivative();
    auto count = [&](const S& l, const S& h) {
        int n = sturm_sign_changes(chain, l) - sturm_sign_changes(chain, h);
        if (p(h) == 0) --n;
        return std::max(n, 0);
    };
    struct Bracket {
        S lo, hi;
        int n;
    };
    std::vector<Bracket> stack{{lo, hi, count(lo, hi)}};
    while (!stack.empty()) {
        Bracket br = stack.back();
        stack.pop_back();
        if (br.n == 0) continue;
        S mid = (br.lo + br.hi) / S(2);
        double width = to_double(S(br.hi - br.lo));
        double tol = 1e-14 * (1.0 + abs_value(to_double(mid)));
        if (p(mid) == 0) {
            out.push_back(mid);
            stack.push_back({br.lo, mid, count(br.lo, mid)});
            stack.push_back({mid, br.hi, count(mid, br.hi)});
            continue;
        }
        if (br.n == 1 && width <= tol) {
            S x = mid;
            S slope = dp(x);
            if (slope != 0) {
                S polished = x - p(x) / slope;
                if (br.lo < polished && polished < br.hi) x = polished;
            }
            out.push_back(x);
            continue;
        }
        if (width <= 1e-3 * tol) {
            // Clustered roots below resolution; report the cluster once.
            out.push_back(mid);
            continue;
        }
        stack.push_back({br.lo, mid, count(br.lo, mid)});
        stack.push_back({mid, br.hi, count(mid, br.hi)});
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// Minimum and maximum of p over [lo, hi].
template <class S>
std::pair<S, S> poly_range(const Poly<S>& p, const S& lo, const S& hi) {
    S mn = p(lo), mx = mn;
    auto take = [&](const S& x) {
        S v = p(x);
        if (v < mn) mn = v;
        if (v > mx) mx = v;
    };
    take(hi);
    if (p.degree() >= 2) {
        auto dp = p.derivative();
        if (!dp.is_zero())
            for (const auto& x : roots_in(dp, lo, hi)) take(x);
    }
    return {mn, mx};
}

}  // namespace relunet
