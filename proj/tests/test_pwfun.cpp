#include "relunet/io.hpp"
#include "relunet/piecewise.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace relunet;
using Q = Rational;

namespace {

Q r(long p, long q = 1) { return Q(p, q); }

PiecewisePoly<Q> step_half() {
    return PiecewisePoly<Q>({r(0), r(1, 2), r(1)}, {Poly<Q>(), Poly<Q>::constant(r(1))});
}

PiecewisePoly<Q> random_pp(std::mt19937_64& rng, int pieces, int degree) {
    std::uniform_int_distribution<int> num(-20, 20);
    std::vector<Q> xs{r(0)};
    for (int i = 1; i < pieces; ++i) xs.push_back(r(i, pieces) + r(num(rng), 1000));
    xs.push_back(r(1));
    std::vector<Poly<Q>> ps;
    for (int i = 0; i < pieces; ++i) {
        std::vector<Q> c;
        for (int k = 0; k <= degree; ++k) c.push_back(r(num(rng), 7));
        ps.emplace_back(c);
    }
    return PiecewisePoly<Q>(xs, ps);
}

PiecewiseLinear<Q> random_pl(std::mt19937_64& rng, int pieces) {
    std::uniform_int_distribution<int> num(-9, 9);
    std::vector<Q> xs{r(0)}, ys{r(num(rng))};
    for (int i = 1; i <= pieces; ++i) {
        xs.push_back(i == pieces ? r(1) : r(i, pieces) + r(num(rng), 100 * pieces));
        ys.push_back(r(num(rng), 3));
    }
    return PiecewiseLinear<Q>::from_nodes(xs, ys);
}

}  // namespace

TEST(Poly, EvaluationAndDegree) {
    Poly<Q> sq({r(0), r(0), r(1)});
    EXPECT_EQ(sq(r(1, 2)), r(1, 4));
    EXPECT_EQ(sq.degree(), 2);
    EXPECT_EQ(Poly<Q>({r(0), r(0)}).degree(), 0);
    EXPECT_TRUE(Poly<Q>({r(0), r(0)}).is_zero());
}

TEST(Poly, ComposeAffineMatchesDirectEvaluation) {
    Poly<Q> p({r(1), r(-2), r(3), r(1, 2)});
    auto comp = p.compose_affine(r(3), r(-1, 4));
    for (int k = -5; k <= 5; ++k) EXPECT_EQ(comp(r(k, 3)), p(r(3) * r(k, 3) - r(1, 4)));
}

TEST(Poly, RootsExactAndIsolated) {
    Poly<Q> p({r(-1, 4), r(0), r(1)});
    auto roots = roots_in(p, r(0), r(1));
    ASSERT_EQ(roots.size(), 1u);
    EXPECT_EQ(roots[0], r(1, 2));

    Poly<double> cubic({-0.006, 0.11, -0.6, 1.0});  // (x-0.1)(x-0.2)(x-0.3)
    auto rd = roots_in(cubic, 0.0, 1.0);
    ASSERT_EQ(rd.size(), 3u);
    EXPECT_NEAR(rd[0], 0.1, 1e-13);
    EXPECT_NEAR(rd[1], 0.2, 1e-13);
    EXPECT_NEAR(rd[2], 0.3, 1e-13);

    Poly<double> sq({0.25, -1.0, 1.0});  // double root at 1/2
    auto rr = roots_in(sq, 0.0, 1.0);
    ASSERT_EQ(rr.size(), 1u);
    EXPECT_NEAR(rr[0], 0.5, 1e-7);
}

TEST(PiecewisePoly, Evaluate) {
    auto f = PiecewisePoly<Q>::from_poly(r(0), r(1), Poly<Q>({r(0), r(0), r(1)}));
    EXPECT_EQ(f(r(1, 2)), r(1, 4));
    PiecewisePoly<Q> g({r(0), r(1, 2), r(1)}, {Poly<Q>(), Poly<Q>::linear(r(1), r(-1, 2))});
    EXPECT_EQ(g(r(3, 4)), r(1, 4));
    EXPECT_EQ(PiecewisePoly<Q>::constant(r(0), r(1), r(3))(r(0)), r(3));
    EXPECT_THROW(g(r(2)), DomainError);
    EXPECT_THROW(g(r(-1, 10)), DomainError);
}

TEST(PiecewisePoly, HalfOpenPieceConvention) {
    auto s = step_half();
    EXPECT_EQ(s(r(1, 2)), r(1));
    EXPECT_EQ(s(r(1)), r(1));
    EXPECT_EQ(s(r(0)), r(0));
}

TEST(PiecewisePoly, RejectsBadBreakpoints) {
    EXPECT_THROW(PiecewisePoly<Q>({r(0), r(0)}, {Poly<Q>()}), InvalidInput);
    EXPECT_THROW(PiecewisePoly<Q>({r(0), r(1)}, {}), InvalidInput);
}

TEST(PiecewisePoly, ProductAndSum) {
    auto x = PiecewisePoly<Q>::from_poly(r(0), r(1), Poly<Q>::linear(r(1), r(0)));
    auto xx = pp_mul(x, x);
    EXPECT_EQ(xx.pieces()[0], Poly<Q>({r(0), r(0), r(1)}));
    auto sx = pp_mul(step_half(), x);
    ASSERT_EQ(sx.piece_count(), 2u);
    EXPECT_TRUE(sx.pieces()[0].is_zero());
    EXPECT_EQ(sx.pieces()[1], Poly<Q>::linear(r(1), r(0)));
    auto same = pp_add(x, PiecewisePoly<Q>::constant(r(0), r(1), r(0)));
    EXPECT_EQ(same.pieces()[0], x.pieces()[0]);
    EXPECT_THROW(pp_add(x, PiecewisePoly<Q>::constant(r(0), r(2), r(0))), InvalidInput);
}

TEST(PiecewisePoly, Integrate) {
    EXPECT_EQ(pp_integrate(PiecewisePoly<Q>::from_poly(r(0), r(1), Poly<Q>({r(0), r(0), r(1)}))), r(1, 3));
    EXPECT_EQ(pp_integrate(step_half()), r(1, 2));
    EXPECT_EQ(pp_integrate(PiecewisePoly<Q>::from_poly(r(0), r(1), Poly<Q>({r(0), r(0), r(0), r(0), r(1)}))), r(1, 5));
}

TEST(PiecewisePoly, IntegralIsAdditive) {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 50; ++t) {
        auto f = random_pp(rng, 3, 4), g = random_pp(rng, 4, 3);
        EXPECT_EQ(pp_integrate(pp_add(f, g)), pp_integrate(f) + pp_integrate(g));
    }
}

TEST(PiecewisePoly, IntegralMatchesSimpson) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 10; ++t) {
        auto f = random_pp(rng, 3, 4);
        PiecewisePoly<double> fd(
            [&] {
                std::vector<double> xs;
                for (const auto& v : f.breakpoints()) xs.push_back(to_double(v));
                return xs;
            }(),
            [&] {
                std::vector<Poly<double>> ps;
                for (const auto& p : f.pieces()) {
                    std::vector<double> c;
                    for (const auto& v : p.coeffs()) c.push_back(to_double(v));
                    ps.emplace_back(c);
                }
                return ps;
            }());
        // Simpson per data piece so the smooth-integrand error bound applies.
        double simpson = 0.0;
        const int panels = 2000;
        for (std::size_t i = 0; i < fd.piece_count(); ++i) {
            double lo = fd.breakpoints()[i], hi = fd.breakpoints()[i + 1], h = (hi - lo) / panels;
            const auto& p = fd.pieces()[i];
            double s = p(lo) + p(hi);
            for (int k = 1; k < panels; ++k) s += (k % 2 ? 4 : 2) * p(lo + k * h);
            simpson += s * h / 3;
        }
        double exact = to_double(pp_integrate(f));
        EXPECT_NEAR(simpson, exact, 1e-8 * (1 + std::fabs(exact)));
    }
}

TEST(PiecewisePoly, ReluOfLinear) {
    auto f = PiecewisePoly<Q>::from_poly(r(0), r(1), Poly<Q>::linear(r(1), r(-1, 2)));
    auto g = pp_relu(f);
    ASSERT_EQ(g.breakpoints(), (std::vector<Q>{r(0), r(1, 2), r(1)}));
    EXPECT_TRUE(g.pieces()[0].is_zero());
    EXPECT_EQ(g.pieces()[1], f.pieces()[0]);
}

TEST(PiecewisePoly, ReluOfSquareUnchangedAndClippedQuadratic) {
    auto sq = PiecewisePoly<Q>::from_poly(r(0), r(1), Poly<Q>({r(0), r(0), r(1)}));
    auto g = pp_relu(sq);
    EXPECT_EQ(g.piece_count(), 1u);
    EXPECT_EQ(g.pieces()[0], sq.pieces()[0]);

    auto h = PiecewisePoly<Q>::from_poly(r(0), r(1), Poly<Q>({r(-1, 4), r(0), r(1)}));
    auto rh = pp_relu(h);
    ASSERT_EQ(rh.breakpoints(), (std::vector<Q>{r(0), r(1, 2), r(1)}));
    for (int k = 0; k <= 1000; ++k) {
        Q x = r(k, 1000);
        Q expect = std::max(h(x), r(0));
        EXPECT_EQ(rh(x), expect);
    }
}

TEST(PiecewisePoly, ReluPointwiseOnRandomContinuous) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        auto g = random_pl(rng, 4).to_piecewise_poly();
        auto sq = pp_sub(pp_mul(g, g), PiecewisePoly<Q>::constant(r(0), r(1), r(2)));
        for (const auto& f : {g, sq}) {
            auto rf = pp_relu(f);
            for (int k = 0; k < 50; ++k) {
                Q x(unif(rng));
                EXPECT_GE(rf(x), 0);
                if (f(x) >= 0) {
                    EXPECT_EQ(rf(x), f(x));
                }
            }
        }
    }
    PiecewisePoly<Q> jump({r(0), r(1, 2), r(1)}, {Poly<Q>(), Poly<Q>::constant(r(1))});
    EXPECT_THROW(pp_relu(jump), InvalidInput);
}

TEST(PiecewiseLinear, CanonicalizeMergesEqualSlopes) {
    auto f = PiecewiseLinear<Q>::canonicalize({r(0), r(1, 2), r(1)}, {r(1), r(1)}, {r(0), r(0)});
    EXPECT_EQ(f.breakpoint_count(), 0);
    EXPECT_EQ(f.A(), (std::vector<Q>{r(1)}));
    auto g = PiecewiseLinear<Q>::canonicalize({r(0), r(1, 2), r(1)}, {r(0), r(2)}, {r(0), r(-1)});
    EXPECT_EQ(g.breakpoint_count(), 1);
    EXPECT_EQ(g.q()[1], r(1, 2));
    auto z = PiecewiseLinear<Q>::affine(r(0), r(1), r(0), r(0));
    EXPECT_EQ(z.breakpoint_count(), 0);
    EXPECT_EQ(z.A()[0], 0);
    EXPECT_EQ(z.B()[0], 0);
    EXPECT_THROW(PiecewiseLinear<Q>::canonicalize({r(0), r(1, 2), r(1)}, {r(0), r(2)}, {r(0), r(0)}), InvalidInput);
}

TEST(PiecewiseLinear, CanonicalizeIdempotentAndValuePreserving) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        auto f = random_pl(rng, 5);
        auto again = PiecewiseLinear<Q>::canonicalize(f.q(), f.A(), f.B());
        EXPECT_EQ(again, f);
        // Split every piece in two without changing the function.
        std::vector<Q> xs{f.q()[0]}, slopes, intercepts;
        for (std::size_t i = 0; i < f.A().size(); ++i) {
            xs.push_back((f.q()[i] + f.q()[i + 1]) / 2);
            xs.push_back(f.q()[i + 1]);
            slopes.insert(slopes.end(), 2, f.A()[i]);
            intercepts.insert(intercepts.end(), 2, f.B()[i]);
        }
        auto merged = PiecewiseLinear<Q>::canonicalize(xs, slopes, intercepts);
        EXPECT_EQ(merged, f);
        for (int k = 0; k < 50; ++k) {
            Q x(unif(rng));
            EXPECT_EQ(merged(x), f(x));
        }
    }
}

TEST(PiecewiseLinear, InterceptRelationHolds) {
    std::mt19937_64 rng(9);
    for (int t = 0; t < 50; ++t) {
        auto f = random_pl(rng, 6);
        for (int i = 1; i <= f.breakpoint_count(); ++i)
            EXPECT_EQ(f.B()[i], f.B()[i - 1] - (f.A()[i] - f.A()[i - 1]) * f.q()[i]);
    }
    std::uniform_real_distribution<double> unif(-3.0, 3.0);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> xs{0.0, 0.2, 0.45, 0.7, 1.0}, ys;
        for (int k = 0; k < 5; ++k) ys.push_back(unif(rng));
        auto f = PiecewiseLinear<double>::from_nodes(xs, ys);
        for (int i = 1; i <= f.breakpoint_count(); ++i) {
            double rhs = f.B()[i - 1] - (f.A()[i] - f.A()[i - 1]) * f.q()[i];
            EXPECT_NEAR(f.B()[i], rhs, 1e-10 * (1 + std::fabs(rhs)));
        }
    }
}

TEST(PiecewiseLinear, FloatMergeToleranceKeepsGenuineKinks) {
    auto f = PiecewiseLinear<double>::canonicalize({0.0, 0.5, 1.0}, {1.0, 1.0 + 1e-12}, {0.0, -0.5e-12});
    EXPECT_EQ(f.breakpoint_count(), 0);
    auto g = PiecewiseLinear<double>::canonicalize({0.0, 0.5, 1.0}, {1.0, 1.0 + 1e-6}, {0.0, -0.5e-6});
    EXPECT_EQ(g.breakpoint_count(), 1);
}

TEST(PiecewiseLinear, AdditionIsSubadditiveInBreakpoints) {
    auto x = PiecewiseLinear<Q>::affine(r(0), r(1), r(1), r(0));
    auto mx = PiecewiseLinear<Q>::affine(r(0), r(1), r(-1), r(0));
    auto z = pl_add(x, mx);
    EXPECT_EQ(z.breakpoint_count(), 0);
    auto f = PiecewiseLinear<Q>::from_nodes({r(0), r(1, 3), r(1)}, {r(0), r(1), r(0)});
    auto g = PiecewiseLinear<Q>::from_nodes({r(0), r(2, 3), r(1)}, {r(0), r(5), r(1)});
    EXPECT_EQ(pl_add(f, g).breakpoint_count(), 2);
    std::mt19937_64 rng(1);
    for (int t = 0; t < 100; ++t) {
        auto a = random_pl(rng, 4), b = random_pl(rng, 3);
        EXPECT_LE(pl_add(a, b).breakpoint_count(), a.breakpoint_count() + b.breakpoint_count());
    }
    auto h = random_pl(rng, 4);
    EXPECT_EQ(pl_add(h, pl_scale(r(-1), h)).breakpoint_count(), 0);
}

TEST(PiecewiseLinear, BreakpointsAndLipschitz) {
    auto tent = PiecewiseLinear<Q>::from_nodes({r(0), r(1, 2), r(1)}, {r(1, 2), r(0), r(1, 2)});
    EXPECT_EQ(breakpoint_count(tent), 1);
    EXPECT_EQ(lipschitz(tent), r(1));
    EXPECT_EQ(lipschitz(PiecewiseLinear<Q>::affine(r(0), r(1), r(0), r(4))), r(0));
    auto f = PiecewiseLinear<Q>::from_nodes({r(0), r(1, 3), r(2, 3), r(1)}, {r(0), r(-1), r(-1), r(-1, 3)});
    EXPECT_EQ(f.A(), (std::vector<Q>{r(-3), r(0), r(2)}));
    EXPECT_EQ(lipschitz(f), r(3));
}

TEST(PiecewiseLinear, ReflectionReversesSlopes) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 20; ++t) {
        auto f = random_pl(rng, 4);
        auto g = pl_reflect(f);
        for (std::size_t i = 0; i < f.A().size(); ++i) EXPECT_EQ(g.A()[i], f.A()[f.A().size() - 1 - i]);
        for (int k = 0; k <= 10; ++k) EXPECT_EQ(g(r(k, 10)), -f(r(1) - r(k, 10)));
        EXPECT_EQ(pl_reflect(g), f);
    }
}

TEST(PiecewiseLinear, ReluInsertsZeroCrossings) {
    auto f = PiecewiseLinear<Q>::affine(r(0), r(1), r(1), r(-1, 2));
    auto g = pl_relu(f);
    EXPECT_EQ(g.breakpoint_count(), 1);
    EXPECT_EQ(g.q()[1], r(1, 2));
}

TEST(Serialization, RoundTripRational) {
    std::mt19937_64 rng(4);
    auto f = random_pp(rng, 3, 2);
    auto j = pp_to_json(f);
    auto g = pp_from_json<Q>(Json::parse(j.dump()));
    EXPECT_EQ(g.breakpoints(), f.breakpoints());
    for (std::size_t i = 0; i < f.piece_count(); ++i) EXPECT_EQ(g.pieces()[i], f.pieces()[i]);
    EXPECT_TRUE(j["breakpoints"][1].is_string());
}

TEST(Serialization, DecimalNumbersAreReadExactly) {
    auto j = Json::parse(R"({"domain":[0,1],"breakpoints":[0,0.1,1],"pieces":[[0.5],["1/3", 2]]})");
    auto f = pp_from_json<Q>(j);
    EXPECT_EQ(f.breakpoints()[1], r(1, 10));
    EXPECT_EQ(f.pieces()[1].coeff(0), r(1, 3));
    auto fd = pp_from_json<double>(j);
    EXPECT_DOUBLE_EQ(fd.pieces()[1].coeff(0), 1.0 / 3);
    EXPECT_THROW(pp_from_json<Q>(Json::parse(R"({"domain":[0,1],"breakpoints":[0,2],"pieces":[[1]]})")),
                 InvalidInput);
}
