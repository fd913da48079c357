#pragma once

#include "relunet/deep.hpp"
#include "relunet/rng.hpp"
#include "relunet/shallow.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace relunet {

using Vec = std::vector<double>;

// Risk and generalized gradient at theta, plus an optional label of the smooth region theta lies in.
struct Objective {
    std::function<RiskGrad<double>(const Vec&)> eval;
    std::function<std::vector<int>(const Vec&)> signature;
    std::size_t dim = 0;
};

Objective shallow_objective(const Problem<double>& problem, int width);
Objective deep_objective(const DeepProblem1D<double>& problem, const DeepArch& arch);
// risk |theta|^2, gradient 2 theta
Objective quadratic_objective(std::size_t dim);

// Per neuron: sign of w_j and the position of its kink among the data breakpoints.
std::vector<int> shallow_region_signature(const Vec& theta, int width, const Problem<double>& problem);

// Divergence is declared once |theta| exceeds this or the risk stops being finite.
inline constexpr double kDivergenceNorm = 1e12;

enum class Integrator { euler, rk4 };
Integrator integrator_from_string(const std::string& name);
std::string to_string(Integrator i);

struct GFConfig {
    double h = 0.0;  // 0 picks 1e-3 / (1 + |G(theta_0)|)
    double T = 1.0;
    Integrator integrator = Integrator::rk4;
    int check_interval = 100;  // steps between energy checks
    double energy_tol = 1e-6;  // relative to 1 + L(theta_0)
    int max_halvings = 6;
    int record_stride = 0;     // 0 keeps about 10^4 samples

    void validate() const;
};

// Samples are aligned: times[i], risks[i], grad_norms[i], thetas[i] (and energy[i] for GF,
// grads[i] / signatures[i] when requested). The first and the last state are always kept.
struct Trajectory {
    Vec times;
    Vec risks;
    Vec grad_norms;
    Vec energy;  // cumulative integral of |G|^2 (GF only; RK4 stages, or trapezoid for Euler)
    std::vector<Vec> thetas;
    std::vector<Vec> grads;
    std::vector<std::vector<int>> signatures;

    bool diverged = false;
    std::string divergence_reason;
    double step = 0.0;             // h for GF, learning rate for GD
    int halvings = 0;
    double energy_residual = 0.0;  // largest residual seen in the accepted run
    bool energy_ok = true;
    double max_risk_increase = 0.0;

    std::size_t size() const { return times.size(); }
    double final_risk() const { return risks.back(); }
};

Trajectory gf_integrate(const Vec& theta0, const Objective& objective, const GFConfig& config);

struct GDOptions {
    int record_stride = 1;
    bool record_grads = false;
    bool record_signatures = false;
};

Trajectory gd_run(const Vec& theta0, double gamma, long steps, const Objective& objective, const GDOptions& options = {});

struct GDConfig {
    double gamma = 1e-2;
    long steps = 1000;
    int inits = 1;  // K
    InitSampler sampler = InitSampler::uniform;
    double radius = 2.0;
    std::uint64_t seed = 0;
    int record_stride = 1;

    void validate() const;
};

struct MultistartResult {
    std::vector<Trajectory> runs;
    std::vector<int> argmin;       // per recorded sample, smallest kappa among minimizers; -1 if none finite
    Vec min_risk;                  // per recorded sample
    Vec prefix_best;               // prefix_best[K'-1]: best final risk among the first K' runs
    int best_kappa = -1;           // argmin at the last sample
    double best_risk = 0.0;
    int diverged_count = 0;
};

MultistartResult multistart(const Objective& objective, const GDConfig& config, int jobs = 1);
// Same driver on explicit initializations; config.inits is taken from their count.
MultistartResult multistart_from(const Objective& objective, const std::vector<Vec>& inits, GDConfig config,
                                 int jobs = 1);

struct DescentReport {
    double lipschitz_estimate = 0.0;
    bool step_within_bound = true;  // gamma <= 1 / L_hat
    long steps = 0;
    long smooth_steps = 0, smooth_satisfied = 0;
    long boundary_steps = 0, boundary_satisfied = 0;
    double smooth_fraction = 1.0;   // vacuous when there are no smooth steps
};

// Needs a GD trajectory recorded at stride 1 with gradients (and signatures to split off boundary steps).
DescentReport descent_check(const Trajectory& traj, double gamma, double tol = 1e-12);

struct PowerFit {
    double exponent = 0.0;  // y ~ c (1 + t)^(-exponent)
    double constant = 0.0;  // max over the window of y (1 + t)^exponent
    double r2 = 0.0;
    int points = 0;
};

struct RateFit {
    PowerFit distance;  // |theta_t - reference|
    PowerFit risk;      // L(theta_t) - reference risk
    Vec reference_theta;
    double reference_risk = 0.0;
    bool converged = false;
    bool inconclusive = false;
    std::string note;
};

struct RateFitOptions {
    double tail_fraction = 0.5;
    double floor = 1e-12;
    double converged_grad_norm = 1e-3;
    std::optional<Vec> reference_theta;     // default: final snapshot
    std::optional<double> reference_risk;   // default: final risk
};

RateFit fit_rate(const Trajectory& traj, const RateFitOptions& options = {});

struct KLProbe {
    double alpha = 0.0;
    double constant = 0.0;
    double slope = 0.0;  // raw regression slope of log|G| on log(gap)
    double r2 = 0.0;
    int points = 0;
    double window_start = 0.0, window_end = 0.0;
    bool plateau = false;  // slope <= 1e-6: gradient does not shrink with the gap, alpha set to 1
    bool clamped = false;  // slope > 1, alpha set to 1
    bool holds_everywhere = false;
    bool inconclusive = false;
};

struct KLOptions {
    double tail_fraction = 0.5;
    double floor = 1e-12;
};

KLProbe kl_probe(const Trajectory& traj, double reference_risk, const KLOptions& options = {});

// Least squares y = slope x + intercept.
struct LineFit {
    double slope = 0.0, intercept = 0.0, r2 = 0.0;
};
LineFit fit_line(const Vec& x, const Vec& y);

}  // namespace relunet
