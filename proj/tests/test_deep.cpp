#include "relunet/deep.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace relunet;
using Q = Rational;

namespace {

Q r(long p, long q = 1) { return Q(p, q); }

std::vector<double> random_theta(std::mt19937_64& rng, const DeepArch& arch, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    std::vector<double> t(arch.param_count());
    for (auto& v : t) v = n(rng);
    return t;
}

double norm(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double diff_norm(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

DeepProblem1D<double> abs_problem() {
    std::vector<double> xs{0.0, 0.5, 1.0};
    PiecewisePoly<double> f(xs, {Poly<double>::linear(-1.0, 0.5), Poly<double>::linear(1.0, -0.5)});
    return {{f}, PiecewisePoly<double>::constant(0.0, 1.0, 1.0)};
}

// Plain composite Simpson on a fine uniform grid; independent of the cell machinery.
double simpson_deep_risk(const std::vector<double>& theta, const DeepArch& arch, const DeepProblem1D<double>& pr,
                         int panels) {
    const double a = pr.lower(), b = pr.upper(), h = (b - a) / panels;
    auto integrand = [&](double x) {
        auto out = deep_forward(theta, arch, {x});
        double e = 0;
        for (int v = 0; v < arch.out_dim(); ++v) e += (out[v] - pr.targets[v](x)) * (out[v] - pr.targets[v](x));
        return e * pr.density(x);
    };
    double s = integrand(a) + integrand(b);
    for (int k = 1; k < panels; ++k) s += (k % 2 ? 4.0 : 2.0) * integrand(a + k * h);
    return s * h / 3.0;
}

}  // namespace

TEST(DeepLayout, ParameterCount) {
    // sum of l_i (l_{i-1} + 1): 48 + 54 + 49 + 24
    EXPECT_EQ((DeepArch{{5, 8, 6, 7, 3}}.param_count()), 175u);
    EXPECT_EQ(DeepArch::shallow(4).param_count(), 13u);
    EXPECT_THROW((DeepArch{{1, 0, 1}}.validate()), InvalidInput);
    EXPECT_THROW((DeepArch{{1}}.validate()), InvalidInput);
}

TEST(DeepLayout, ShallowLayoutCoincides) {
    const int H = 5;
    auto arch = DeepArch::shallow(H);
    for (int j = 0; j < H; ++j) {
        EXPECT_EQ(arch.weight_index(1, j, 0), static_cast<std::size_t>(j));
        EXPECT_EQ(arch.bias_index(1, j), static_cast<std::size_t>(H + j));
        EXPECT_EQ(arch.weight_index(2, 0, j), static_cast<std::size_t>(2 * H + j));
    }
    EXPECT_EQ(arch.bias_index(2, 0), static_cast<std::size_t>(3 * H));
    std::mt19937_64 rng(5);
    auto theta = random_theta(rng, arch);
    for (double x : {-0.3, 0.1, 0.77, 2.0}) EXPECT_DOUBLE_EQ(deep_forward(theta, arch, {x})[0], shallow_eval(theta, H, x));
    EXPECT_THROW(arch.weight_index(2, 1, 0), InvalidInput);
}

TEST(DeepLayout, PackUnpackRoundTrip) {
    std::mt19937_64 rng(7);
    DeepArch arch{{3, 4, 2, 5}};
    auto theta = random_theta(rng, arch);
    EXPECT_EQ(deep_pack(deep_unpack_all(theta, arch)), theta);
    auto l2 = deep_unpack(theta, arch, 2);
    EXPECT_EQ(l2.rows, 2);
    EXPECT_EQ(l2.cols, 4);
    EXPECT_EQ(l2.w(1, 3), theta[arch.weight_index(2, 1, 3)]);
    EXPECT_THROW(deep_unpack(theta, arch, 4), InvalidInput);
    EXPECT_THROW(deep_unpack(std::vector<double>(3), arch, 1), InvalidInput);
}

TEST(DeepForward, Examples) {
    DeepArch arch{{1, 1, 1, 1}};
    std::vector<double> zero(arch.param_count(), 0.0);
    EXPECT_EQ(deep_forward(zero, arch, {0.3})[0], 0.0);
    // relu(relu(x) - 1/2)
    std::vector<Q> theta{r(1), r(0), r(1), r(-1, 2), r(1), r(0)};
    for (auto [x, want] : std::vector<std::pair<Q, Q>>{{r(0), r(0)}, {r(1, 4), r(0)}, {r(1, 2), r(0)}, {r(3, 4), r(1, 4)}, {r(1), r(1, 2)}})
        EXPECT_EQ(deep_forward(theta, arch, {x})[0], want);
    auto prop = propagate_pl(theta, arch, r(0), r(1));
    EXPECT_EQ(prop.outputs()[0].breakpoint_count(), 1);
    EXPECT_EQ(prop.outputs()[0].q()[1], r(1, 2));
    EXPECT_THROW(deep_forward(zero, arch, {0.1, 0.2}), InvalidInput);
}

TEST(DeepForward, ZeroNetworkPropagatesToConstant) {
    DeepArch arch{{1, 3, 2, 1}};
    std::vector<Q> zero(arch.param_count(), r(0));
    auto prop = propagate_pl(zero, arch, r(0), r(1));
    EXPECT_EQ(prop.outputs()[0], PiecewiseLinear<Q>::affine(r(0), r(1), r(0), r(0)));
}

TEST(DeepForward, SmoothedAgreesAwayFromBlendZones) {
    DeepArch arch{{1, 2, 2, 1}};
    // All hidden pre-activations are at least 1 on x >= 0.
    std::vector<double> theta{1.0, 2.0, 1.0, 1.5, 1.0, 0.5, 0.25, 1.0, 0.0, 0.0, 3.0, -1.0, 0.2};
    for (double x : {0.0, 0.3, 1.0}) EXPECT_DOUBLE_EQ(deep_forward_smoothed(theta, arch, {x}, 1.0)[0], deep_forward(theta, arch, {x})[0]);
    EXPECT_THROW(deep_forward_smoothed(theta, arch, {0.0}, 0.5), InvalidInput);
}

TEST(DeepForward, SmoothedConvergesMonotonically) {
    std::mt19937_64 rng(11);
    DeepArch arch{{1, 4, 3, 1}};
    std::uniform_real_distribution<double> ux(-1.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        auto theta = random_theta(rng, arch);
        const double x = ux(rng);
        double prev = INFINITY;
        for (double rr : {10.0, 100.0, 1000.0}) {
            double err = std::fabs(deep_forward_smoothed(theta, arch, {x}, rr)[0] - deep_forward(theta, arch, {x})[0]);
            EXPECT_LE(err, prev + 1e-15);
            prev = err;
        }
    }
}

TEST(DeepBackprop, ZeroPreactivationBlocksThePath) {
    DeepArch arch{{1, 1, 1}};
    std::vector<double> theta{1.0, -0.5, 2.0, 0.0};  // hidden pre-activation x - 1/2
    auto g = deep_grad_backprop_left(theta, arch, {0.5}, {1.0});
    EXPECT_EQ(g[0], 0.0);
    EXPECT_EQ(g[1], 0.0);
    EXPECT_EQ(g[2], 0.0);
    EXPECT_EQ(g[3], 2.0 * (0.0 - 1.0));
    auto zero = deep_grad_backprop_left(theta, arch, {0.75}, {0.5});
    for (double v : zero) EXPECT_EQ(v, 0.0);
}

TEST(DeepExact, MatchesShallowExactly) {
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<int> num(-9, 9);
    std::vector<Q> xs{r(0), r(1, 3), r(1)};
    Problem<Q> pr{PiecewisePoly<Q>(xs, {Poly<Q>({r(1), r(-2), r(3)}), Poly<Q>({r(4, 9), r(1), r(-1)})}),
                  PiecewisePoly<Q>(std::vector<Q>{r(0), r(1, 2), r(1)}, {Poly<Q>::constant(r(1)), Poly<Q>::linear(r(1), r(1, 2))})};
    ASSERT_TRUE(pr.target.is_continuous());
    for (int t = 0; t < 100; ++t) {
        const int H = 1 + t % 5;
        std::vector<Q> theta(3 * H + 1);
        for (auto& v : theta) v = r(num(rng), 1 + rng() % 4);
        auto deep = deep_risk_grad_exact_1d(theta, DeepArch::shallow(H), DeepProblem1D<Q>::from(pr), true);
        EXPECT_EQ(deep.risk, risk_exact(theta, H, pr));
        EXPECT_EQ(deep.grad, grad_exact(theta, H, pr));
    }
}

TEST(DeepExact, PropagationMatchesForward) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ux(-1.0, 2.0);
    for (const auto& widths : std::vector<std::vector<int>>{{1, 4, 4, 1}, {1, 8, 8, 8, 1}, {1, 3, 2}, {1, 5, 1, 4, 2}}) {
        DeepArch arch{widths};
        for (int t = 0; t < 5; ++t) {
            auto theta = random_theta(rng, arch);
            auto prop = propagate_pl(theta, arch, -1.0, 2.0);
            for (int n = 0; n < 2000; ++n) {
                const double x = ux(rng);
                auto want = deep_forward(theta, arch, {x});
                for (int v = 0; v < arch.out_dim(); ++v) EXPECT_NEAR(prop.outputs()[v](x), want[v], 1e-10 * (1 + std::fabs(want[v])));
            }
            // Coarse growth bound on the number of cells.
            double bound = 1.0;
            for (int k = 1; k < arch.depth(); ++k) bound *= arch.widths[k] + 1;
            for (int k = 1; k < arch.depth(); ++k) bound *= 1.0;
            std::size_t cells = prop.cells.size() - 1;
            double per_layer = 1.0;
            for (int k = 1; k < arch.depth(); ++k) per_layer *= 2.0 * (arch.widths[k] + 1);
            EXPECT_LE(static_cast<double>(cells), std::max(bound, per_layer));
            // Activity pattern matches a fresh forward evaluation at each cell midpoint.
            for (std::size_t c = 0; c + 1 < prop.cells.size(); ++c) {
                const double mid = 0.5 * (prop.cells[c] + prop.cells[c + 1]);
                auto pre = deep_preactivations(theta, arch, {mid});
                std::size_t idx = 0;
                for (int k = 1; k < arch.depth(); ++k)
                    for (double z : pre[k - 1]) EXPECT_EQ(prop.patterns[c][idx++], z > 0);
            }
        }
    }
}

TEST(DeepExact, RiskMatchesSimpson) {
    std::mt19937_64 rng(19);
    auto pr = abs_problem();
    for (int t = 0; t < 20; ++t) {
        DeepArch arch{{1, 4, 4, 1}};
        auto theta = random_theta(rng, arch);
        const double exact = deep_risk_exact_1d(theta, arch, pr);
        EXPECT_NEAR(exact, simpson_deep_risk(theta, arch, pr, 200000), 1e-7 * (1 + exact));
    }
}

TEST(DeepExact, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(23);
    auto pr = abs_problem();
    DeepArch arch{{1, 4, 4, 1}};
    for (int t = 0; t < 20; ++t) {
        auto theta = random_theta(rng, arch);
        auto g = deep_grad_exact_1d(theta, arch, pr);
        const double h = 1e-6;
        for (std::size_t p = 0; p < theta.size(); ++p) {
            auto up = theta, down = theta;
            up[p] += h;
            down[p] -= h;
            const double fd = (deep_risk_exact_1d(up, arch, pr) - deep_risk_exact_1d(down, arch, pr)) / (2 * h);
            EXPECT_NEAR(g[p], fd, 1e-4 * std::max(1.0, std::fabs(fd))) << "component " << p;
        }
    }
}

TEST(DeepExact, ExactFitHasZeroRiskAndGradient) {
    // relu(x - 1/2) + relu(1/2 - x) through a (1, 2, 1, 1) net reproduces |x - 1/2|.
    DeepArch arch{{1, 2, 1, 1}};
    std::vector<Q> theta{r(1), r(-1), r(-1, 2), r(1, 2), r(1), r(1), r(0), r(1), r(0)};
    std::vector<Q> xs{r(0), r(1, 2), r(1)};
    DeepProblem1D<Q> pr{{PiecewisePoly<Q>(xs, {Poly<Q>::linear(r(-1), r(1, 2)), Poly<Q>::linear(r(1), r(-1, 2))})},
                        PiecewisePoly<Q>::constant(r(0), r(1), r(1))};
    auto rg = deep_risk_grad_exact_1d(theta, arch, pr, true);
    EXPECT_EQ(rg.risk, r(0));
    for (const auto& v : rg.grad) EXPECT_EQ(v, r(0));
}

TEST(DeepFormula, MatchesBackpropAverage) {
    std::mt19937_64 rng(29);
    for (int t = 0; t < 10; ++t) {
        DeepArch arch{{1, 3, 2, 1}};
        auto theta = random_theta(rng, arch);
        DeepProblemND pr{0.0, 1.0, [](const std::vector<double>& x) { return std::vector<double>{std::sin(3 * x[0])}; },
                         [](const std::vector<double>& x) { return 1.0 + x[0]; }};
        auto quad = tensor_gauss_legendre(1, 0.0, 1.0, 10, 100);
        ASSERT_EQ(quad.nodes.size(), 1000u);
        auto a = deep_grad_formula(theta, arch, pr, quad);
        auto b = deep_grad_backprop_average(theta, arch, pr, quad);
        EXPECT_LE(diff_norm(a, b), 1e-12 * (1 + norm(b)));
    }
    for (int t = 0; t < 5; ++t) {
        DeepArch arch{{2, 3, 3, 2}};
        auto theta = random_theta(rng, arch);
        DeepProblemND pr{-1.0, 1.0,
                         [](const std::vector<double>& x) { return std::vector<double>{x[0] * x[1], std::fabs(x[0])}; },
                         [](const std::vector<double>&) { return 1.0; }};
        auto quad = tensor_gauss_legendre(2, -1.0, 1.0, 6, 6);
        auto a = deep_grad_formula(theta, arch, pr, quad);
        auto b = deep_grad_backprop_average(theta, arch, pr, quad);
        EXPECT_LE(diff_norm(a, b), 1e-12 * (1 + norm(b)));
    }
}

TEST(DeepFormula, TargetEqualToNetworkGivesZero) {
    std::mt19937_64 rng(31);
    DeepArch arch{{1, 1, 1, 1}};
    auto theta = random_theta(rng, arch);
    DeepProblemND pr{0.0, 1.0, [&](const std::vector<double>& x) { return deep_forward(theta, arch, x); },
                     [](const std::vector<double>&) { return 1.0; }};
    auto quad = tensor_gauss_legendre(1, 0.0, 1.0, 5, 20);
    for (double v : deep_grad_formula(theta, arch, pr, quad)) EXPECT_EQ(v, 0.0);
}

TEST(DeepQuadrature, TensorRuleIntegratesPolynomials) {
    auto quad = tensor_gauss_legendre(3, 0.0, 2.0, 3, 2);
    double s = 0.0;
    for (std::size_t n = 0; n < quad.nodes.size(); ++n) {
        const auto& x = quad.nodes[n];
        s += quad.weights[n] * x[0] * x[0] * x[1] * x[2] * x[2] * x[2];
    }
    EXPECT_NEAR(s, (8.0 / 3.0) * 2.0 * 4.0, 1e-12);
    EXPECT_THROW(tensor_gauss_legendre(4, 0.0, 1.0, 3, 1), InvalidInput);
}

TEST(DeepSmoothing, GradientLimit) {
    std::mt19937_64 rng(37);
    auto pr = abs_problem();
    for (int t = 0; t < 5; ++t) {
        DeepArch arch{{1, 3, 3, 1}};
        auto theta = random_theta(rng, arch);
        auto exact = deep_grad_exact_1d(theta, arch, pr);
        double prev = INFINITY;
        for (double rr : {10.0, 100.0, 1000.0, 10000.0}) {
            const double err = diff_norm(deep_grad_smoothed_1d(theta, arch, pr, rr), exact) / (1 + norm(exact));
            // Below ~1e-5 the panel rule's own error at the kinks dominates.
            if (prev > 1e-5) {
                EXPECT_LE(err, prev * 1.05);
            }
            prev = err;
        }
        EXPECT_LE(prev, 1e-2);
    }
}
