#include "relunet/deep.hpp"

#include <boost/math/special_functions/legendre.hpp>

#include <cmath>

namespace relunet {

void DeepArch::validate() const {
    if (widths.size() < 2) throw InvalidInput("an architecture needs at least one layer");
    for (int w : widths)
        if (w < 1) throw InvalidInput("layer widths must be at least 1");
}

std::size_t DeepArch::offset(int k) const {
    std::size_t acc = 0;
    for (int h = 1; h < k; ++h) acc += static_cast<std::size_t>(widths[h]) * (widths[h - 1] + 1);
    return acc;
}

std::size_t DeepArch::param_count() const { return offset(depth() + 1); }

std::size_t DeepArch::weight_index(int k, int i, int j) const {
    if (k < 1 || k > depth() || i < 0 || i >= widths[k] || j < 0 || j >= widths[k - 1])
        throw InvalidInput("weight index out of range");
    return offset(k) + static_cast<std::size_t>(i) * widths[k - 1] + j;
}

std::size_t DeepArch::bias_index(int k, int i) const {
    if (k < 1 || k > depth() || i < 0 || i >= widths[k]) throw InvalidInput("bias index out of range");
    return offset(k) + static_cast<std::size_t>(widths[k]) * widths[k - 1] + i;
}

void DeepArch::check_length(std::size_t length) const {
    validate();
    if (length != param_count()) throw InvalidInput("parameter vector length does not match the architecture");
}

namespace {

// Forward pass keeping pre-activations and activations; `smooth` < 0 means plain ReLU.
struct Trace {
    std::vector<std::vector<double>> pre;  // layers 1..L
    std::vector<std::vector<double>> act;  // layers 0..L-1 (act[0] = x)
};

Trace run_forward(const std::vector<double>& theta, const DeepArch& arch, const std::vector<double>& x, double r) {
    arch.check_length(theta.size());
    if (static_cast<int>(x.size()) != arch.in_dim()) throw InvalidInput("input dimension mismatch");
    Trace t;
    t.act.push_back(x);
    std::size_t pos = 0;
    const int L = arch.depth();
    for (int k = 1; k <= L; ++k) {
        const int rows = arch.widths[k], cols = arch.widths[k - 1];
        const std::size_t bias_pos = pos + static_cast<std::size_t>(rows) * cols;
        const auto& in = t.act.back();
        std::vector<double> z(rows);
        for (int i = 0; i < rows; ++i) {
            double acc = theta[bias_pos + i];
            for (int j = 0; j < cols; ++j) acc += theta[pos + static_cast<std::size_t>(i) * cols + j] * in[j];
            z[i] = acc;
        }
        pos = bias_pos + rows;
        if (k < L) {
            std::vector<double> a(rows);
            const double rk = r < 0 ? 0.0 : std::pow(r, 1.0 / k);
            for (int i = 0; i < rows; ++i) a[i] = r < 0 ? std::max(z[i], 0.0) : Smoothing::value(z[i], rk);
            t.act.push_back(std::move(a));
        }
        t.pre.push_back(std::move(z));
    }
    return t;
}

std::vector<double> backprop(const std::vector<double>& theta, const DeepArch& arch, const Trace& t,
                             const std::vector<double>& y, double r) {
    const int L = arch.depth();
    if (static_cast<int>(y.size()) != arch.out_dim()) throw InvalidInput("label dimension mismatch");
    std::vector<double> grad(theta.size(), 0.0);
    std::vector<double> delta(arch.out_dim());
    for (int v = 0; v < arch.out_dim(); ++v) delta[v] = 2.0 * (t.pre.back()[v] - y[v]);
    for (int k = L; k >= 1; --k) {
        const int rows = arch.widths[k], cols = arch.widths[k - 1];
        const std::size_t w0 = arch.offset(k), b0 = w0 + static_cast<std::size_t>(rows) * cols;
        const auto& in = t.act[k - 1];
        for (int i = 0; i < rows; ++i) {
            grad[b0 + i] += delta[i];
            for (int j = 0; j < cols; ++j) grad[w0 + static_cast<std::size_t>(i) * cols + j] += delta[i] * in[j];
        }
        if (k == 1) break;
        const auto& z = t.pre[k - 2];
        const double rk = r < 0 ? 0.0 : std::pow(r, 1.0 / (k - 1));
        std::vector<double> next(cols, 0.0);
        for (int j = 0; j < cols; ++j) {
            const double d = r < 0 ? (z[j] > 0 ? 1.0 : 0.0) : Smoothing::derivative(z[j], rk);
            if (d == 0.0) continue;
            double acc = 0.0;
            for (int i = 0; i < rows; ++i) acc += theta[w0 + static_cast<std::size_t>(i) * cols + j] * delta[i];
            next[j] = acc * d;
        }
        delta = std::move(next);
    }
    return grad;
}

void check_r(double r) {
    if (!(r >= 1.0)) throw InvalidInput("smoothing parameter must satisfy r >= 1");
}

std::pair<std::vector<double>, std::vector<double>> gauss_rule(int order) {
    if (order < 1 || order > 200) throw InvalidInput("quadrature order must lie in [1, 200]");
    auto zeros = boost::math::legendre_p_zeros<double>(order);  // nonnegative half
    std::vector<double> xs, ws;
    for (double z : zeros) {
        const double dp = boost::math::legendre_p_prime(order, z);
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        xs.push_back(z);
        ws.push_back(w);
        if (z != 0.0) {
            xs.push_back(-z);
            ws.push_back(w);
        }
    }
    return {xs, ws};
}

}  // namespace

std::vector<double> deep_forward_smoothed(const std::vector<double>& theta, const DeepArch& arch,
                                          const std::vector<double>& x, double r) {
    check_r(r);
    return run_forward(theta, arch, x, r).pre.back();
}

std::vector<double> deep_grad_backprop_left(const std::vector<double>& theta, const DeepArch& arch,
                                            const std::vector<double>& x, const std::vector<double>& y) {
    return backprop(theta, arch, run_forward(theta, arch, x, -1.0), y, -1.0);
}

std::vector<double> deep_grad_backprop_smoothed(const std::vector<double>& theta, const DeepArch& arch,
                                                const std::vector<double>& x, const std::vector<double>& y,
                                                double r) {
    check_r(r);
    return backprop(theta, arch, run_forward(theta, arch, x, r), y, r);
}

Quadrature gauss_legendre_on(const std::vector<double>& edges, int order) {
    auto [xs, ws] = gauss_rule(order);
    Quadrature q;
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
        const double half = 0.5 * (edges[p + 1] - edges[p]), centre = 0.5 * (edges[p + 1] + edges[p]);
        for (std::size_t n = 0; n < xs.size(); ++n) {
            q.nodes.push_back({centre + half * xs[n]});
            q.weights.push_back(half * ws[n]);
        }
    }
    return q;
}

Quadrature tensor_gauss_legendre(int dim, double a, double b, int order, int panels) {
    if (dim < 1 || dim > 3) throw InvalidInput("tensor quadrature supports 1 to 3 input dimensions");
    if (panels < 1) throw InvalidInput("need at least one panel");
    if (!(a < b)) throw InvalidInput("domain must satisfy a < b");
    std::vector<double> edges;
    for (int p = 0; p <= panels; ++p) edges.push_back(a + (b - a) * p / panels);
    const Quadrature axis = gauss_legendre_on(edges, order);
    Quadrature q{{{}}, {1.0}};
    for (int d = 0; d < dim; ++d) {
        Quadrature next;
        for (std::size_t m = 0; m < q.nodes.size(); ++m)
            for (std::size_t n = 0; n < axis.nodes.size(); ++n) {
                auto node = q.nodes[m];
                node.push_back(axis.nodes[n][0]);
                next.nodes.push_back(std::move(node));
                next.weights.push_back(q.weights[m] * axis.weights[n]);
            }
        q = std::move(next);
    }
    return q;
}

double deep_risk_quadrature(const std::vector<double>& theta, const DeepArch& arch, const DeepProblemND& problem,
                            const Quadrature& quad) {
    double total = 0.0;
    for (std::size_t n = 0; n < quad.nodes.size(); ++n) {
        const auto& x = quad.nodes[n];
        auto out = deep_forward(theta, arch, x);
        auto y = problem.target(x);
        double e = 0.0;
        for (std::size_t v = 0; v < out.size(); ++v) e += (out[v] - y[v]) * (out[v] - y[v]);
        total += quad.weights[n] * e * problem.density(x);
    }
    return total;
}

std::vector<double> deep_grad_backprop_average(const std::vector<double>& theta, const DeepArch& arch,
                                               const DeepProblemND& problem, const Quadrature& quad) {
    std::vector<double> grad(theta.size(), 0.0);
    for (std::size_t n = 0; n < quad.nodes.size(); ++n) {
        const auto& x = quad.nodes[n];
        const double w = quad.weights[n] * problem.density(x);
        if (w == 0.0) continue;
        auto g = deep_grad_backprop_left(theta, arch, x, problem.target(x));
        for (std::size_t p = 0; p < grad.size(); ++p) grad[p] += w * g[p];
    }
    return grad;
}

std::vector<double> deep_grad_formula(const std::vector<double>& theta, const DeepArch& arch,
                                      const DeepProblemND& problem, const Quadrature& quad) {
    arch.check_length(theta.size());
    const int L = arch.depth();
    auto layers = deep_unpack_all(theta, arch);
    std::vector<double> grad(theta.size(), 0.0);
    for (std::size_t n = 0; n < quad.nodes.size(); ++n) {
        const auto& x = quad.nodes[n];
        const double weight = quad.weights[n] * problem.density(x);
        if (weight == 0.0) continue;
        auto pre = deep_preactivations(theta, arch, x);
        auto y = problem.target(x);
        auto active = [&](int layer, int neuron) { return pre[layer - 1][neuron] > 0.0; };

        // Sum over index paths v_k = i, v_{k+1}, ..., v_L of the weight/indicator products.
        std::function<double(int, int)> path_sum = [&](int k, int vk) -> double {
            if (k == L) return pre[L - 1][vk] - y[vk];
            double acc = 0.0;
            if (!active(k, vk)) return 0.0;
            for (int next = 0; next < arch.widths[k + 1]; ++next) {
                const double w = layers[k].w(next, vk);
                if (w != 0.0) acc += w * path_sum(k + 1, next);
            }
            return acc;
        };
        for (int k = 1; k <= L; ++k) {
            for (int i = 0; i < arch.widths[k]; ++i) {
                const double s = 2.0 * path_sum(k, i) * weight;
                if (s == 0.0) continue;
                grad[arch.bias_index(k, i)] += s;
                for (int j = 0; j < arch.widths[k - 1]; ++j) {
                    const double input = k > 1 ? std::max(pre[k - 2][j], 0.0) : x[j];
                    grad[arch.weight_index(k, i, j)] += s * input;
                }
            }
        }
    }
    return grad;
}

namespace {

Quadrature smoothing_rule(const DeepProblem1D<double>& problem, int panels) {
    const double a = problem.lower(), b = problem.upper();
    std::vector<double> edges;
    for (int p = 0; p <= panels; ++p) edges.push_back(a + (b - a) * p / panels);
    edges.back() = b;
    for (const auto& t : problem.targets) edges = merge_points(edges, t.breakpoints());
    edges = merge_points(edges, problem.density.breakpoints());
    return gauss_legendre_on(edges, 8);
}

}  // namespace

std::vector<double> deep_grad_smoothed_1d(const std::vector<double>& theta, const DeepArch& arch,
                                          const DeepProblem1D<double>& problem, double r, int panels) {
    check_r(r);
    auto quad = smoothing_rule(problem, panels);
    std::vector<double> grad(theta.size(), 0.0);
    std::vector<double> y(arch.out_dim());
    for (std::size_t n = 0; n < quad.nodes.size(); ++n) {
        const double x = quad.nodes[n][0];
        const double w = quad.weights[n] * problem.density(x);
        if (w == 0.0) continue;
        for (int v = 0; v < arch.out_dim(); ++v) y[v] = problem.targets[v](x);
        auto g = deep_grad_backprop_smoothed(theta, arch, {x}, y, r);
        for (std::size_t p = 0; p < grad.size(); ++p) grad[p] += w * g[p];
    }
    return grad;
}

double deep_risk_smoothed_1d(const std::vector<double>& theta, const DeepArch& arch,
                             const DeepProblem1D<double>& problem, double r, int panels) {
    check_r(r);
    auto quad = smoothing_rule(problem, panels);
    double total = 0.0;
    for (std::size_t n = 0; n < quad.nodes.size(); ++n) {
        const double x = quad.nodes[n][0];
        auto out = deep_forward_smoothed(theta, arch, {x}, r);
        double e = 0.0;
        for (int v = 0; v < arch.out_dim(); ++v) e += (out[v] - problem.targets[v](x)) * (out[v] - problem.targets[v](x));
        total += quad.weights[n] * e * problem.density(x);
    }
    return total;
}

}  // namespace relunet
