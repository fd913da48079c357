#pragma once

#include "relunet/shallow.hpp"

#include <functional>
#include <vector>

namespace relunet {

// Widths l_0, ..., l_L. Layer k (1-based) stores its l_k x l_{k-1} weights row by row, then its l_k biases.
struct DeepArch {
    std::vector<int> widths;

    int depth() const { return static_cast<int>(widths.size()) - 1; }
    int in_dim() const { return widths.front(); }
    int out_dim() const { return widths.back(); }
    void validate() const;
    std::size_t param_count() const;
    std::size_t offset(int k) const;                       // parameters before layer k
    std::size_t weight_index(int k, int i, int j) const;   // 0-based neuron i, input j
    std::size_t bias_index(int k, int i) const;
    void check_length(std::size_t length) const;

    static DeepArch shallow(int width) { return DeepArch{{1, width, 1}}; }
};

template <class S>
struct DenseLayer {
    int rows = 0, cols = 0;
    std::vector<S> weights;  // row-major
    std::vector<S> bias;
    const S& w(int i, int j) const { return weights[static_cast<std::size_t>(i) * cols + j]; }
};

template <class S>
DenseLayer<S> deep_unpack(const std::vector<S>& theta, const DeepArch& arch, int k) {
    arch.check_length(theta.size());
    if (k < 1 || k > arch.depth()) throw InvalidInput("layer index out of range");
    DenseLayer<S> layer;
    layer.rows = arch.widths[k];
    layer.cols = arch.widths[k - 1];
    const std::size_t start = arch.offset(k);
    const std::size_t nw = static_cast<std::size_t>(layer.rows) * layer.cols;
    layer.weights.assign(theta.begin() + start, theta.begin() + start + nw);
    layer.bias.assign(theta.begin() + start + nw, theta.begin() + start + nw + layer.rows);
    return layer;
}

template <class S>
std::vector<S> deep_pack(const std::vector<DenseLayer<S>>& layers) {
    std::vector<S> theta;
    for (const auto& l : layers) {
        if (l.weights.size() != static_cast<std::size_t>(l.rows) * l.cols || l.bias.size() != static_cast<std::size_t>(l.rows))
            throw InvalidInput("layer arrays do not match their shape");
        theta.insert(theta.end(), l.weights.begin(), l.weights.end());
        theta.insert(theta.end(), l.bias.begin(), l.bias.end());
    }
    return theta;
}

template <class S>
std::vector<DenseLayer<S>> deep_unpack_all(const std::vector<S>& theta, const DeepArch& arch) {
    std::vector<DenseLayer<S>> out;
    for (int k = 1; k <= arch.depth(); ++k) out.push_back(deep_unpack(theta, arch, k));
    return out;
}

// Pre-activations of every layer; the last entry is the output.
template <class S>
std::vector<std::vector<S>> deep_preactivations(const std::vector<S>& theta, const DeepArch& arch, const std::vector<S>& x) {
    arch.check_length(theta.size());
    if (static_cast<int>(x.size()) != arch.in_dim()) throw InvalidInput("input dimension mismatch");
    std::vector<std::vector<S>> pre;
    std::vector<S> act = x;
    std::size_t pos = 0;
    for (int k = 1; k <= arch.depth(); ++k) {
        const int rows = arch.widths[k], cols = arch.widths[k - 1];
        const std::size_t bias_pos = pos + static_cast<std::size_t>(rows) * cols;
        std::vector<S> z(rows);
        for (int i = 0; i < rows; ++i) {
            S acc = theta[bias_pos + i];
            for (int j = 0; j < cols; ++j) acc += theta[pos + static_cast<std::size_t>(i) * cols + j] * act[j];
            z[i] = acc;
        }
        pos = bias_pos + rows;
        pre.push_back(z);
        act.resize(rows);
        for (int i = 0; i < rows; ++i) act[i] = z[i] > 0 ? z[i] : S(0);
    }
    return pre;
}

template <class S>
std::vector<S> deep_forward(const std::vector<S>& theta, const DeepArch& arch, const std::vector<S>& x) {
    return deep_preactivations(theta, arch, x).back();
}

// Layer k + 1 sees its input through the surrogate with parameter r^(1/k).
std::vector<double> deep_forward_smoothed(const std::vector<double>& theta, const DeepArch& arch,
                                          const std::vector<double>& x, double r);

// Gradient of |N(x) - y|^2 with the ReLU derivative taken as the indicator of (0, inf).
std::vector<double> deep_grad_backprop_left(const std::vector<double>& theta, const DeepArch& arch,
                                            const std::vector<double>& x, const std::vector<double>& y);

// Same, through the smoothed network.
std::vector<double> deep_grad_backprop_smoothed(const std::vector<double>& theta, const DeepArch& arch,
                                                const std::vector<double>& x, const std::vector<double>& y, double r);

// ---- quadrature-based risk and gradient on [a, b]^d ----

struct Quadrature {
    std::vector<std::vector<double>> nodes;
    std::vector<double> weights;
};

// Composite Gauss-Legendre on [a, b] with `panels` panels per axis, tensorized over `dim` axes (dim <= 3).
Quadrature tensor_gauss_legendre(int dim, double a, double b, int order, int panels);
// Composite rule on explicit 1-D panel edges.
Quadrature gauss_legendre_on(const std::vector<double>& edges, int order);

struct DeepProblemND {
    double lower = 0.0, upper = 1.0;
    std::function<std::vector<double>(const std::vector<double>&)> target;
    std::function<double(const std::vector<double>&)> density;
};

double deep_risk_quadrature(const std::vector<double>& theta, const DeepArch& arch, const DeepProblemND& problem,
                            const Quadrature& quad);
// Quadrature average of the per-sample left-derivative backprop gradient.
std::vector<double> deep_grad_backprop_average(const std::vector<double>& theta, const DeepArch& arch,
                                               const DeepProblemND& problem, const Quadrature& quad);
// The explicit path-sum expression for the generalized gradient, evaluated on the same nodes.
std::vector<double> deep_grad_formula(const std::vector<double>& theta, const DeepArch& arch,
                                      const DeepProblemND& problem, const Quadrature& quad);

// ---- exact piecewise-linear propagation for scalar input ----

template <class S>
struct DeepProblem1D {
    std::vector<PiecewisePoly<S>> targets;  // one per output
    PiecewisePoly<S> density;

    const S& lower() const { return density.lower(); }
    const S& upper() const { return density.upper(); }

    static DeepProblem1D from(const Problem<S>& p) { return {{p.target}, p.density}; }
    Problem<S> component(int v) const { return {targets[v], density}; }
};

template <class S>
struct Propagation {
    std::vector<std::vector<PiecewiseLinear<S>>> pre;  // pre[k - 1][i]: pre-activation of neuron i in layer k
    std::vector<S> cells;                              // cell edges on [a, b]
    std::vector<std::vector<char>> patterns;           // per cell, flattened activity of hidden neurons

    const std::vector<PiecewiseLinear<S>>& outputs() const { return pre.back(); }
};

namespace detail {

template <class S>
void add_point(std::vector<S>& pts, const S& x, const S& a, const S& b) {
    if (a < x && x < b) pts.push_back(x);
}

// Sorted union; float points closer than 1e-12 (relative to the domain) are merged.
template <class S>
std::vector<S> dedupe_points(std::vector<S> pts, const S& a, const S& b) {
    std::sort(pts.begin(), pts.end());
    std::vector<S> out{a};
    const double tol = is_exact_v<S> ? 0.0 : 1e-12 * (1.0 + abs_value(to_double(b)) + abs_value(to_double(a)));
    for (const auto& x : pts) {
        if (is_exact_v<S> ? x == out.back() : to_double(S(x - out.back())) <= tol) continue;
        out.push_back(x);
    }
    if (!is_exact_v<S> && out.size() > 1 && to_double(S(b - out.back())) <= tol) out.pop_back();
    out.push_back(b);
    return out;
}

}  // namespace detail

template <class S>
Propagation<S> propagate_pl(const std::vector<S>& theta, const DeepArch& arch, const S& a, const S& b) {
    arch.check_length(theta.size());
    if (arch.in_dim() != 1) throw InvalidInput("piecewise linear propagation needs scalar input");
    if (!(a < b)) throw InvalidInput("domain must satisfy a < b");
    Propagation<S> out;
    const int L = arch.depth();
    std::vector<PiecewiseLinear<S>> act{PiecewiseLinear<S>::affine(a, b, S(1), S(0))};
    std::vector<S> pts;
    for (int k = 1; k <= L; ++k) {
        auto layer = deep_unpack(theta, arch, k);
        std::vector<PiecewiseLinear<S>> z;
        for (int i = 0; i < layer.rows; ++i) {
            auto acc = PiecewiseLinear<S>::affine(a, b, S(0), layer.bias[i]);
            for (int j = 0; j < layer.cols; ++j)
                if (layer.w(i, j) != 0) acc = pl_combine(acc, S(1), act[j], layer.w(i, j));
            z.push_back(std::move(acc));
        }
        if (k < L) {
            act.clear();
            for (const auto& zi : z) {
                for (std::size_t m = 1; m + 1 < zi.q().size(); ++m) pts.push_back(zi.q()[m]);
                for (std::size_t m = 0; m < zi.A().size(); ++m)
                    if (zi.A()[m] != 0) detail::add_point(pts, S(-zi.B()[m] / zi.A()[m]), zi.q()[m], zi.q()[m + 1]);
                act.push_back(pl_relu(zi));
            }
        } else {
            for (const auto& zi : z)
                for (std::size_t m = 1; m + 1 < zi.q().size(); ++m) pts.push_back(zi.q()[m]);
        }
        out.pre.push_back(std::move(z));
    }
    out.cells = detail::dedupe_points(std::move(pts), a, b);
    for (std::size_t c = 0; c + 1 < out.cells.size(); ++c) {
        const S mid = (out.cells[c] + out.cells[c + 1]) / 2;
        std::vector<char> pattern;
        for (int k = 1; k < L; ++k)
            for (const auto& zi : out.pre[k - 1]) pattern.push_back(zi(mid) > 0);
        out.patterns.push_back(std::move(pattern));
    }
    return out;
}

// Exact risk and generalized gradient for scalar input. On each cell the activity pattern is
// fixed, so every hidden activation is affine and the integrands are polynomials.
template <class S>
RiskGrad<S> deep_risk_grad_exact_1d(const std::vector<S>& theta, const DeepArch& arch, const DeepProblem1D<S>& problem,
                                    bool want_grad) {
    arch.check_length(theta.size());
    if (arch.in_dim() != 1) throw InvalidInput("exact deep risk needs scalar input");
    if (static_cast<int>(problem.targets.size()) != arch.out_dim())
        throw InvalidInput("one target component per network output is required");
    const S a = problem.lower(), b = problem.upper();
    for (const auto& t : problem.targets) require_same_domain(t.lower(), t.upper(), a, b);
    const int L = arch.depth();
    auto prop = propagate_pl(theta, arch, a, b);
    std::vector<S> edges = prop.cells;
    for (const auto& t : problem.targets) edges = merge_points(edges, t.breakpoints());
    edges = merge_points(edges, problem.density.breakpoints());
    auto layers = deep_unpack_all(theta, arch);

    RiskGrad<S> out;
    if (want_grad) out.grad.assign(theta.size(), S(0));
    // Affine form (slope, intercept) of each activation on the current cell; layer 0 is x.
    std::vector<std::vector<std::pair<S, S>>> act(L);
    std::vector<std::vector<char>> on(L);
    for (std::size_t c = 0; c + 1 < edges.size(); ++c) {
        const S lo = edges[c], hi = edges[c + 1], mid = (lo + hi) / 2;
        const auto& dens = problem.density.pieces()[problem.density.piece_index(mid)];
        if (dens.is_zero()) continue;
        act[0] = {{S(1), S(0)}};
        for (int k = 1; k < L; ++k) {
            act[k].clear();
            on[k].clear();
            for (const auto& zi : prop.pre[k - 1]) {
                const std::size_t m = zi.piece_index(mid);
                const bool active = zi.A()[m] * mid + zi.B()[m] > 0;
                on[k].push_back(active);
                act[k].push_back(active ? std::make_pair(zi.A()[m], zi.B()[m]) : std::make_pair(S(0), S(0)));
            }
        }
        for (int v = 0; v < arch.out_dim(); ++v) {
            const auto& zo = prop.pre[L - 1][v];
            const std::size_t m = zo.piece_index(mid);
            const auto& target = problem.targets[v];
            Poly<S> resid = Poly<S>::linear(zo.A()[m], zo.B()[m]) - target.pieces()[target.piece_index(mid)];
            Poly<S> weighted = resid * dens;
            out.risk += (resid * weighted).integrate(lo, hi);
            if (!want_grad) continue;
            const S m0 = weighted.moment(lo, hi, 0), m1 = weighted.moment(lo, hi, 1);
            // delta[i]: derivative of output v with respect to pre-activation i of the current layer.
            std::vector<S> delta(arch.widths[L], S(0));
            delta[v] = S(1);
            for (int k = L; k >= 1; --k) {
                const auto& layer = layers[k - 1];
                for (int i = 0; i < layer.rows; ++i) {
                    if (delta[i] == 0) continue;
                    const S g = S(2) * delta[i];
                    out.grad[arch.bias_index(k, i)] += g * m0;
                    for (int j = 0; j < layer.cols; ++j) {
                        const auto& [s, t] = act[k - 1][j];
                        out.grad[arch.weight_index(k, i, j)] += g * (s * m1 + t * m0);
                    }
                }
                if (k == 1) break;
                std::vector<S> next(layer.cols, S(0));
                for (int j = 0; j < layer.cols; ++j) {
                    if (!on[k - 1][j]) continue;
                    for (int i = 0; i < layer.rows; ++i) next[j] += layer.w(i, j) * delta[i];
                }
                delta = std::move(next);
            }
        }
    }
    return out;
}

template <class S>
S deep_risk_exact_1d(const std::vector<S>& theta, const DeepArch& arch, const DeepProblem1D<S>& problem) {
    return deep_risk_grad_exact_1d(theta, arch, problem, false).risk;
}

template <class S>
std::vector<S> deep_grad_exact_1d(const std::vector<S>& theta, const DeepArch& arch, const DeepProblem1D<S>& problem) {
    return deep_risk_grad_exact_1d(theta, arch, problem, true).grad;
}

// Smoothed risk gradient for scalar input, integrated with composite Gauss-Legendre over
// `panels` equal panels refined at the data breakpoints.
std::vector<double> deep_grad_smoothed_1d(const std::vector<double>& theta, const DeepArch& arch,
                                          const DeepProblem1D<double>& problem, double r, int panels = 4096);
double deep_risk_smoothed_1d(const std::vector<double>& theta, const DeepArch& arch,
                             const DeepProblem1D<double>& problem, double r, int panels = 4096);

}  // namespace relunet
