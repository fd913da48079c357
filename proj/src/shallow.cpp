#include "relunet/shallow.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>

namespace relunet {

double Smoothing::value(double y, double r) {
    const double lo = kLower / r, hi = kUpper / r;
    if (y <= lo) return 0.0;
    if (y >= hi) return y;
    const double t = (y - lo) / (hi - lo);
    // Hermite data: value 0, slope 0 at lo; value hi, slope 1 at hi.
    return hi * (3 * t * t - 2 * t * t * t) + (hi - lo) * (t * t * t - t * t);
}

double Smoothing::derivative(double y, double r) {
    const double lo = kLower / r, hi = kUpper / r;
    if (y <= lo) return 0.0;
    if (y >= hi) return 1.0;
    const double t = (y - lo) / (hi - lo);
    return (hi * (6 * t - 6 * t * t) + (hi - lo) * (3 * t * t - 2 * t)) / (hi - lo);
}

namespace {

void check_r(double r) {
    if (!(r >= 1.0)) throw InvalidInput("smoothing parameter must satisfy r >= 1");
}

// Subintervals on which every smoothed pre-activation and the data are polynomial.
std::vector<double> smoothing_seams(const std::vector<double>& theta, int width, const Problem<double>& problem,
                                    double r) {
    const double a = problem.lower(), b = problem.upper();
    std::vector<double> seams;
    for (int j = 0; j < width; ++j) {
        const double w = theta[j], bias = theta[width + j];
        if (w == 0.0) continue;
        for (double level : {Smoothing::kLower / r, Smoothing::kUpper / r}) {
            double x = (level - bias) / w;
            if (a < x && x < b) seams.push_back(x);
        }
    }
    std::sort(seams.begin(), seams.end());
    return merge_points(merge_points(problem.target.breakpoints(), problem.density.breakpoints()), seams);
}

double smoothed_net(const std::vector<double>& theta, int width, double x, double r) {
    double acc = theta[3 * width];
    for (int j = 0; j < width; ++j) acc += theta[2 * width + j] * Smoothing::value(theta[j] * x + theta[width + j], r);
    return acc;
}

}  // namespace

double risk_smoothed(const std::vector<double>& theta, int width, const Problem<double>& problem, double r) {
    check_r(r);
    check_shallow_length(theta.size(), width);
    auto seams = smoothing_seams(theta, width, problem, r);
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < seams.size(); ++k) {
        auto integrand = [&](double x) {
            double e = smoothed_net(theta, width, x, r) - problem.target(x);
            return e * e * problem.density(x);
        };
        total += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(integrand, seams[k], seams[k + 1], 15,
                                                                                1e-12);
    }
    return total;
}

// Gauss-Legendre with 20 nodes per seam interval integrates the polynomial integrand exactly.
std::vector<double> grad_smoothed(const std::vector<double>& theta, int width, const Problem<double>& problem,
                                  double r) {
    check_r(r);
    check_shallow_length(theta.size(), width);
    using Rule = boost::math::quadrature::gauss<double, 20>;
    const auto& abscissa = Rule::abscissa();
    const auto& weights = Rule::weights();
    auto seams = smoothing_seams(theta, width, problem, r);
    std::vector<double> grad(theta.size(), 0.0);
    for (std::size_t k = 0; k + 1 < seams.size(); ++k) {
        const double half = 0.5 * (seams[k + 1] - seams[k]), centre = 0.5 * (seams[k + 1] + seams[k]);
        for (std::size_t n = 0; n < abscissa.size(); ++n) {
            for (int side : {-1, 1}) {
                if (side == -1 && abscissa[n] == 0.0) continue;
                const double x = centre + side * half * abscissa[n];
                const double wq = half * weights[n];
                const double e = 2.0 * (smoothed_net(theta, width, x, r) - problem.target(x)) * problem.density(x) * wq;
                grad[3 * width] += e;
                for (int j = 0; j < width; ++j) {
                    const double z = theta[j] * x + theta[width + j];
                    const double v = theta[2 * width + j];
                    const double d = Smoothing::derivative(z, r);
                    grad[j] += e * v * d * x;
                    grad[width + j] += e * v * d;
                    grad[2 * width + j] += e * Smoothing::value(z, r);
                }
            }
        }
    }
    return grad;
}

}  // namespace relunet
