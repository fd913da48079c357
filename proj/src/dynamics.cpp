#include "relunet/dynamics.hpp"

#include "relunet/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace relunet {

InitSampler sampler_from_string(const std::string& name) {
    if (name == "uniform") return InitSampler::uniform;
    if (name == "cauchy") return InitSampler::cauchy;
    throw InvalidInput("unknown init sampler '" + name + "' (expected uniform or cauchy)");
}

std::string to_string(InitSampler s) { return s == InitSampler::uniform ? "uniform" : "cauchy"; }

std::vector<double> sample_init(std::uint64_t master, std::uint64_t index, std::size_t dim, InitSampler sampler,
                                double radius) {
    if (!(radius > 0.0)) throw InvalidInput("init radius must be positive");
    std::mt19937_64 gen(stream_seed(master, index));
    std::vector<double> theta(dim);
    for (auto& v : theta) {
        const double u = unit_uniform(gen);
        if (sampler == InitSampler::uniform)
            v = radius * (2.0 * u - 1.0);
        else
            v = radius * std::tan(M_PI * (u + 0x1.0p-54 - 0.5));  // shifted off the pole at u = 0
    }
    return theta;
}

Integrator integrator_from_string(const std::string& name) {
    if (name == "rk4") return Integrator::rk4;
    if (name == "euler") return Integrator::euler;
    throw InvalidInput("unknown integrator '" + name + "' (expected rk4 or euler)");
}

std::string to_string(Integrator i) { return i == Integrator::rk4 ? "rk4" : "euler"; }

namespace {

double norm2(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

double dist(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

// y + s x
Vec axpy(const Vec& y, double s, const Vec& x) {
    Vec out(y);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * x[i];
    return out;
}

bool blown_up(const Vec& theta, double risk) {
    return !std::isfinite(risk) || !(std::sqrt(norm2(theta)) <= kDivergenceNorm);
}

void check_dim(const Vec& theta, const Objective& objective) {
    if (objective.dim != 0 && theta.size() != objective.dim)
        throw InvalidInput("parameter vector has length " + std::to_string(theta.size()) + ", expected " +
                           std::to_string(objective.dim));
}

void record(Trajectory& tr, double t, const RiskGrad<double>& rg, const Vec& theta, double energy, bool with_energy) {
    tr.times.push_back(t);
    tr.risks.push_back(rg.risk);
    tr.grad_norms.push_back(std::sqrt(norm2(rg.grad)));
    tr.thetas.push_back(theta);
    if (with_energy) tr.energy.push_back(energy);
}

}  // namespace

std::vector<int> shallow_region_signature(const Vec& theta, int width, const Problem<double>& problem) {
    check_shallow_length(theta.size(), width);
    const auto pts = merge_points(problem.target.breakpoints(), problem.density.breakpoints());
    std::vector<int> sig;
    for (int j = 0; j < width; ++j) {
        const double w = theta[j], b = theta[width + j];
        sig.push_back(w > 0 ? 1 : (w < 0 ? -1 : 0));
        if (w == 0.0) {
            sig.push_back(b > 0 ? 1 : (b < 0 ? -1 : 0));
            continue;
        }
        const double kink = -b / w;
        const auto lo = std::lower_bound(pts.begin(), pts.end(), kink);
        const bool on = lo != pts.end() && *lo == kink;
        sig.push_back(2 * static_cast<int>(lo - pts.begin()) + (on ? 1 : 0));
    }
    return sig;
}

Objective shallow_objective(const Problem<double>& problem, int width) {
    problem.validate();
    if (width < 1) throw InvalidInput("width must be at least 1");
    Objective o;
    o.dim = static_cast<std::size_t>(3 * width + 1);
    o.eval = [problem, width](const Vec& theta) { return shallow_risk_grad(theta, width, problem, true); };
    o.signature = [problem, width](const Vec& theta) { return shallow_region_signature(theta, width, problem); };
    return o;
}

Objective deep_objective(const DeepProblem1D<double>& problem, const DeepArch& arch) {
    arch.validate();
    if (arch.in_dim() != 1) throw InvalidInput("deep objective needs scalar input");
    if (static_cast<int>(problem.targets.size()) != arch.out_dim())
        throw InvalidInput("one target component per network output is required");
    Objective o;
    o.dim = arch.param_count();
    o.eval = [problem, arch](const Vec& theta) { return deep_risk_grad_exact_1d(theta, arch, problem, true); };
    // Cell count plus the activity pattern at every data breakpoint.
    o.signature = [problem, arch](const Vec& theta) {
        auto pts = problem.density.breakpoints();
        for (const auto& t : problem.targets) pts = merge_points(pts, t.breakpoints());
        auto prop = propagate_pl(theta, arch, problem.lower(), problem.upper());
        std::vector<int> sig{static_cast<int>(prop.cells.size())};
        for (double x : pts) {
            auto pre = deep_preactivations(theta, arch, {x});
            for (int k = 0; k + 1 < arch.depth(); ++k)
                for (double z : pre[k]) sig.push_back(z > 0);
        }
        return sig;
    };
    return o;
}

Objective quadratic_objective(std::size_t dim) {
    Objective o;
    o.dim = dim;
    o.eval = [](const Vec& theta) {
        RiskGrad<double> rg;
        rg.risk = norm2(theta);
        rg.grad = theta;
        for (auto& g : rg.grad) g *= 2.0;
        return rg;
    };
    return o;
}

// ---- gradient flow ----

void GFConfig::validate() const {
    if (!(h >= 0.0) || !std::isfinite(h)) throw InvalidInput("step size must be positive (or 0 for automatic)");
    if (!(T >= 0.0) || !std::isfinite(T)) throw InvalidInput("horizon T must be nonnegative");
    if (check_interval < 1) throw InvalidInput("energy check interval must be at least 1");
    if (!(energy_tol > 0.0)) throw InvalidInput("energy tolerance must be positive");
    if (max_halvings < 0) throw InvalidInput("max_halvings must be nonnegative");
    if (record_stride < 0) throw InvalidInput("record stride must be nonnegative");
}

namespace {

// One attempt at fixed step h. Returns false when the energy check asks for a smaller step.
bool gf_attempt(const Vec& theta0, const Objective& obj, const GFConfig& cfg, double h, long steps, bool may_restart,
                Trajectory& tr) {
    tr = Trajectory{};
    tr.step = h;
    const long stride =
        cfg.record_stride > 0 ? cfg.record_stride : std::max<long>(1, steps / 10000);
    Vec theta = theta0;
    RiskGrad<double> cur = obj.eval(theta);
    const double L0 = cur.risk;
    const double tol = cfg.energy_tol * (1.0 + std::fabs(L0));
    double energy = 0.0;
    record(tr, 0.0, cur, theta, energy, true);
    if (blown_up(theta, L0)) {
        tr.diverged = true;
        tr.divergence_reason = "initial risk is not finite";
        return true;
    }
    for (long n = 1; n <= steps; ++n) {
        const Vec& k1 = cur.grad;  // the flow is theta' = -G(theta)
        Vec next;
        double dE = 0.0;
        if (cfg.integrator == Integrator::euler) {
            next = axpy(theta, -h, k1);
        } else {
            Vec k2 = obj.eval(axpy(theta, -0.5 * h, k1)).grad;
            Vec k3 = obj.eval(axpy(theta, -0.5 * h, k2)).grad;
            Vec k4 = obj.eval(axpy(theta, -h, k3)).grad;
            next = theta;
            for (std::size_t i = 0; i < next.size(); ++i) next[i] -= h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            // E' = |G|^2 rides along as an extra RK4 component, so the residual keeps fourth order.
            dE = h / 6.0 * (norm2(k1) + 2.0 * norm2(k2) + 2.0 * norm2(k3) + norm2(k4));
        }
        RiskGrad<double> nxt = obj.eval(next);
        const double t = static_cast<double>(n) * h;
        if (blown_up(next, nxt.risk)) {
            tr.diverged = true;
            tr.divergence_reason = std::isfinite(nxt.risk) ? "parameter norm exceeded 1e12" : "risk is not finite";
            record(tr, t, nxt, next, energy, true);
            return true;
        }
        energy += cfg.integrator == Integrator::euler ? 0.5 * h * (norm2(cur.grad) + norm2(nxt.grad)) : dE;
        tr.max_risk_increase = std::max(tr.max_risk_increase, nxt.risk - cur.risk);
        theta = std::move(next);
        cur = std::move(nxt);
        if (n % cfg.check_interval == 0 || n == steps) {
            const double rho = std::fabs(cur.risk - L0 + energy);
            tr.energy_residual = std::max(tr.energy_residual, rho);
            if (rho > tol) {
                if (may_restart) return false;
                tr.energy_ok = false;
            }
        }
        if (n % stride == 0 || n == steps) record(tr, t, cur, theta, energy, true);
    }
    return true;
}

}  // namespace

Trajectory gf_integrate(const Vec& theta0, const Objective& objective, const GFConfig& config) {
    config.validate();
    check_dim(theta0, objective);
    double h = config.h;
    if (h == 0.0) h = 1e-3 / (1.0 + std::sqrt(norm2(objective.eval(theta0).grad)));
    long steps = config.T == 0.0 ? 0 : static_cast<long>(std::ceil(config.T / h - 1e-9));
    if (steps > 0) h = config.T / static_cast<double>(steps);
    Trajectory tr;
    for (int halving = 0;; ++halving) {
        const bool may_restart = halving < config.max_halvings;
        if (gf_attempt(theta0, objective, config, h, steps, may_restart, tr)) {
            tr.halvings = halving;
            return tr;
        }
        h *= 0.5;
        steps *= 2;
    }
}

// ---- gradient descent ----

Trajectory gd_run(const Vec& theta0, double gamma, long steps, const Objective& objective, const GDOptions& options) {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InvalidInput("learning rate must be nonnegative");
    if (steps < 0) throw InvalidInput("step count must be nonnegative");
    if (options.record_stride < 1) throw InvalidInput("record stride must be at least 1");
    if (options.record_signatures && !objective.signature)
        throw InvalidInput("objective has no region signature");
    check_dim(theta0, objective);
    Trajectory tr;
    tr.step = gamma;
    Vec theta = theta0;
    RiskGrad<double> cur = objective.eval(theta);
    auto keep = [&](long n) {
        record(tr, static_cast<double>(n), cur, theta, 0.0, false);
        if (options.record_grads) tr.grads.push_back(cur.grad);
        if (options.record_signatures) tr.signatures.push_back(objective.signature(theta));
    };
    keep(0);
    if (blown_up(theta, cur.risk)) {
        tr.diverged = true;
        tr.divergence_reason = "initial risk is not finite";
        return tr;
    }
    for (long n = 1; n <= steps; ++n) {
        Vec next = axpy(theta, -gamma, cur.grad);
        RiskGrad<double> nxt = objective.eval(next);
        tr.max_risk_increase = std::max(tr.max_risk_increase, nxt.risk - cur.risk);
        theta = std::move(next);
        cur = std::move(nxt);
        if (blown_up(theta, cur.risk)) {
            tr.diverged = true;
            tr.divergence_reason = std::isfinite(cur.risk) ? "parameter norm exceeded 1e12" : "risk is not finite";
            keep(n);
            return tr;
        }
        if (n % options.record_stride == 0 || n == steps) keep(n);
    }
    return tr;
}

// ---- multi-start ----

void GDConfig::validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidInput("learning rate must be positive");
    if (steps < 0) throw InvalidInput("step count must be nonnegative");
    if (inits < 1) throw InvalidInput("at least one initialization is required");
    if (!(radius > 0.0) || !std::isfinite(radius)) throw InvalidInput("init radius must be positive");
    if (record_stride < 1) throw InvalidInput("record stride must be at least 1");
}

MultistartResult multistart(const Objective& objective, const GDConfig& config, int jobs) {
    config.validate();
    if (objective.dim == 0) throw InvalidInput("objective dimension is unknown");
    std::vector<Vec> inits;
    for (int k = 0; k < config.inits; ++k)
        inits.push_back(sample_init(config.seed, k, objective.dim, config.sampler, config.radius));
    return multistart_from(objective, inits, config, jobs);
}

MultistartResult multistart_from(const Objective& objective, const std::vector<Vec>& inits, GDConfig config, int jobs) {
    config.inits = static_cast<int>(inits.size());
    config.validate();
    MultistartResult out;
    out.runs.resize(config.inits);
    GDOptions opts;
    opts.record_stride = config.record_stride;
    run_indexed(config.inits, jobs, [&](std::size_t k) {
        out.runs[k] = gd_run(inits[k], config.gamma, config.steps, objective, opts);
    });
    std::size_t samples = 0;
    for (const auto& r : out.runs) {
        samples = std::max(samples, r.size());
        if (r.diverged) ++out.diverged_count;
    }
    for (std::size_t i = 0; i < samples; ++i) {
        int best = -1;
        double best_risk = std::numeric_limits<double>::quiet_NaN();
        for (int k = 0; k < config.inits; ++k) {
            const auto& r = out.runs[k];
            if (i >= r.size() || std::isnan(r.risks[i])) continue;
            if (best < 0 || r.risks[i] < best_risk) {
                best = k;
                best_risk = r.risks[i];
            }
        }
        out.argmin.push_back(best);
        out.min_risk.push_back(best_risk);
    }
    double running = std::numeric_limits<double>::infinity();
    for (const auto& r : out.runs) {
        if (!r.diverged && std::isfinite(r.final_risk())) running = std::min(running, r.final_risk());
        out.prefix_best.push_back(running);
    }
    out.best_kappa = out.argmin.empty() ? -1 : out.argmin.back();
    out.best_risk = out.min_risk.empty() ? std::numeric_limits<double>::quiet_NaN() : out.min_risk.back();
    return out;
}

// ---- descent monitoring ----

DescentReport descent_check(const Trajectory& traj, double gamma, double tol) {
    const std::size_t n = traj.size();
    if (traj.grads.size() != n) throw InvalidInput("descent check needs recorded gradients");
    for (std::size_t k = 1; k < n; ++k)
        if (traj.times[k] - traj.times[k - 1] != 1.0) throw InvalidInput("descent check needs every GD step recorded");
    const bool with_sig = traj.signatures.size() == n;
    DescentReport rep;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double dx = dist(traj.thetas[k + 1], traj.thetas[k]);
        if (dx > 0) rep.lipschitz_estimate = std::max(rep.lipschitz_estimate, dist(traj.grads[k + 1], traj.grads[k]) / dx);
    }
    rep.step_within_bound = gamma * rep.lipschitz_estimate <= 1.0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        ++rep.steps;
        const double g = traj.grad_norms[k];
        const bool ok = traj.risks[k + 1] <= traj.risks[k] - 0.5 * gamma * g * g + tol;
        if (with_sig && traj.signatures[k] != traj.signatures[k + 1]) {
            ++rep.boundary_steps;
            rep.boundary_satisfied += ok;
        } else {
            ++rep.smooth_steps;
            rep.smooth_satisfied += ok;
        }
    }
    if (rep.smooth_steps > 0) rep.smooth_fraction = static_cast<double>(rep.smooth_satisfied) / rep.smooth_steps;
    return rep;
}

// ---- rates and KL exponent ----

LineFit fit_line(const Vec& x, const Vec& y) {
    LineFit f;
    const std::size_t n = x.size();
    if (n < 2) return f;
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0) return f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy == 0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return f;
}

namespace {

std::size_t tail_start(std::size_t n, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidInput("tail fraction must lie in (0, 1]");
    return static_cast<std::size_t>(std::floor((1.0 - fraction) * static_cast<double>(n)));
}

PowerFit power_fit(const Vec& t, const Vec& y) {
    PowerFit p;
    Vec lx, ly;
    for (std::size_t i = 0; i < t.size(); ++i) {
        lx.push_back(std::log1p(t[i]));
        ly.push_back(std::log(y[i]));
    }
    p.points = static_cast<int>(t.size());
    auto line = fit_line(lx, ly);
    p.exponent = -line.slope;
    p.r2 = line.r2;
    for (std::size_t i = 0; i < t.size(); ++i) p.constant = std::max(p.constant, y[i] * std::pow(1.0 + t[i], p.exponent));
    return p;
}

}  // namespace

RateFit fit_rate(const Trajectory& traj, const RateFitOptions& options) {
    RateFit fit;
    if (traj.size() == 0) {
        fit.inconclusive = true;
        fit.note = "empty trajectory";
        return fit;
    }
    fit.reference_theta = options.reference_theta.value_or(traj.thetas.back());
    fit.reference_risk = options.reference_risk.value_or(traj.final_risk());
    fit.converged = !traj.diverged && traj.grad_norms.back() <= options.converged_grad_norm;
    const std::size_t start = tail_start(traj.size(), options.tail_fraction);
    const double dfloor = options.floor * (1.0 + std::sqrt(norm2(fit.reference_theta)));
    const double rfloor = options.floor * (1.0 + std::fabs(fit.reference_risk));
    Vec td, d, tr, r;
    for (std::size_t i = start; i < traj.size(); ++i) {
        const double di = dist(traj.thetas[i], fit.reference_theta);
        if (di > dfloor) {
            td.push_back(traj.times[i]);
            d.push_back(di);
        }
        const double gi = traj.risks[i] - fit.reference_risk;
        if (gi > rfloor) {
            tr.push_back(traj.times[i]);
            r.push_back(gi);
        }
    }
    fit.distance = power_fit(td, d);
    fit.risk = power_fit(tr, r);
    if (!fit.converged) {
        fit.inconclusive = true;
        fit.note = traj.diverged ? "trajectory diverged" : "final gradient norm above the convergence threshold";
    } else if (fit.distance.points < 3 || fit.risk.points < 3) {
        fit.inconclusive = true;
        fit.note = "fewer than 3 tail points above the floor";
    }
    return fit;
}

// Slopes this small are rounding noise on a flat gradient norm.
constexpr double kPlateauSlope = 1e-6;

KLProbe kl_probe(const Trajectory& traj, double reference_risk, const KLOptions& options) {
    KLProbe p;
    const std::size_t start = tail_start(traj.size(), options.tail_fraction);
    Vec lx, ly, gaps, norms;
    for (std::size_t i = start; i < traj.size(); ++i) {
        const double gap = traj.risks[i] - reference_risk;
        if (!(gap > options.floor)) continue;
        if (gaps.empty()) p.window_start = traj.times[i];
        p.window_end = traj.times[i];
        gaps.push_back(gap);
        norms.push_back(traj.grad_norms[i]);
        if (traj.grad_norms[i] > 0) {
            lx.push_back(std::log(gap));
            ly.push_back(std::log(traj.grad_norms[i]));
        }
    }
    p.points = static_cast<int>(gaps.size());
    if (lx.size() < 2) {
        p.inconclusive = true;
        p.alpha = 1.0;
        p.constant = gaps.empty() ? 0.0 : std::numeric_limits<double>::infinity();
        return p;
    }
    auto line = fit_line(lx, ly);
    p.slope = line.slope;
    p.r2 = line.r2;
    if (line.slope <= kPlateauSlope) {
        p.plateau = true;
        p.alpha = 1.0;
    } else if (line.slope > 1.0) {
        p.clamped = true;
        p.alpha = 1.0;
    } else {
        p.alpha = line.slope;
    }
    for (std::size_t i = 0; i < gaps.size(); ++i)
        p.constant = std::max(p.constant, norms[i] > 0 ? std::pow(gaps[i], p.alpha) / norms[i]
                                                       : std::numeric_limits<double>::infinity());
    p.holds_everywhere = std::isfinite(p.constant);
    if (p.holds_everywhere)
        for (std::size_t i = 0; i < gaps.size(); ++i)
            if (std::pow(gaps[i], p.alpha) > p.constant * norms[i] * (1.0 + 1e-12)) p.holds_everywhere = false;
    return p;
}

}  // namespace relunet
