#include "relunet/experiment.hpp"

#include "relunet/approx.hpp"
#include "relunet/dynamics.hpp"
#include "relunet/log.hpp"
#include "relunet/repr.hpp"
#include "relunet/width_scan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace relunet {

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"check", "approx",    "risk",  "grad",     "gradcheck",
                                                "train", "multistart", "rates", "widthscan"};
    return names;
}

std::string json_text(const Json& j) { return j.dump(2) + "\n"; }

std::string trajectory_csv_header(std::size_t dim) {
    std::string h = "step_or_time,risk,grad_norm";
    for (std::size_t i = 0; i < dim; ++i) h += ",theta_" + std::to_string(i);
    return h + "\n";
}

namespace {

enum class Mode { rational, floating };

// ---- config reading ----

void allow_keys(const Json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw InvalidInput(where + " must be a JSON object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw InvalidInput("unknown key '" + k + "' in " + where);
}

const Json& need(const Json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw InvalidInput(where + " lacks '" + key + "'");
    return j.at(key);
}

long get_int(const Json& j, const char* key, long fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw InvalidInput(std::string("'") + key + "' must be an integer");
    return v.get<long>();
}

double get_real(const Json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    const double v = scalar_from_json<double>(j.at(key));
    if (!std::isfinite(v)) throw InvalidInput(std::string("'") + key + "' must be finite");
    return v;
}

std::string get_string(const Json& j, const char* key, const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_string()) throw InvalidInput(std::string("'") + key + "' must be a string");
    return j.at(key).get<std::string>();
}

Mode mode_of(const Json& cfg, const RunOptions& opt, Mode fallback) {
    std::string m = opt.mode ? *opt.mode : get_string(cfg, "mode", fallback == Mode::rational ? "rational" : "float");
    if (m == "rational") return Mode::rational;
    if (m == "float") return Mode::floating;
    throw InvalidInput("mode must be 'rational' or 'float', got '" + m + "'");
}

std::uint64_t seed_of(const Json& cfg, const RunOptions& opt) {
    if (opt.seed) return *opt.seed;
    if (!cfg.contains("seed")) return 0;
    const auto& v = cfg.at("seed");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        throw InvalidInput("'seed' must be a nonnegative integer");
    return v.get<std::uint64_t>();
}

template <class S>
Problem<S> problem_from(const Json& cfg) {
    const auto& p = need(cfg, "problem", "config");
    allow_keys(p, "problem", {"target", "density"});
    Problem<S> out;
    out.target = pp_from_json<S>(need(p, "target", "problem"));
    out.density = p.contains("density") ? pp_from_json<S>(p.at("density"))
                                        : PiecewisePoly<S>::constant(out.target.lower(), out.target.upper(), S(1));
    out.validate();
    return out;
}

// Node form {knots:[x...], values:[y...]} or a piecewise polynomial of degree <= 1.
template <class S>
PiecewiseLinear<S> pl_from_json(const Json& j) {
    if (j.is_object() && j.contains("knots")) {
        allow_keys(j, "function", {"knots", "values"});
        auto xs = scalars_from_json<S>(j.at("knots"));
        auto ys = scalars_from_json<S>(need(j, "values", "function"));
        if (xs.size() < 2 || xs.size() != ys.size()) throw InvalidInput("knots and values must have equal length >= 2");
        std::vector<S> slopes, intercepts;
        for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
            if (!(xs[i] < xs[i + 1])) throw InvalidInput("knots must be strictly increasing");
            S s = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
            intercepts.push_back(ys[i] - s * xs[i]);
            slopes.push_back(s);
        }
        return PiecewiseLinear<S>::canonicalize(xs, slopes, intercepts);
    }
    auto pp = pp_from_json<S>(j);
    if (!pp.is_continuous()) throw InvalidInput("function must be continuous");
    return PiecewiseLinear<S>::from_piecewise_poly(pp);
}

DeepArch arch_from(const Json& cfg) {
    if (cfg.contains("architecture")) {
        const auto& a = cfg.at("architecture");
        allow_keys(a, "architecture", {"layers", "domain"});
        DeepArch arch;
        const auto& layers = need(a, "layers", "architecture");
        if (!layers.is_array()) throw InvalidInput("'layers' must be an array of widths");
        for (const auto& w : layers) {
            if (!w.is_number_integer()) throw InvalidInput("layer widths must be integers");
            arch.widths.push_back(w.get<int>());
        }
        arch.validate();
        return arch;
    }
    if (cfg.contains("width")) {
        const long w = get_int(cfg, "width", 0);
        if (w < 1) throw InvalidInput("width must be at least 1");
        return DeepArch::shallow(static_cast<int>(w));
    }
    throw InvalidInput("config needs 'architecture' or 'width'");
}

template <class S>
void check_arch_domain(const Json& cfg, const Problem<S>& pr) {
    if (!cfg.contains("architecture") || !cfg.at("architecture").contains("domain")) return;
    auto [a, b] = domain_from_json<S>(cfg.at("architecture").at("domain"));
    require_same_domain(a, b, pr.lower(), pr.upper());
}

bool is_shallow(const DeepArch& arch) {
    return arch.depth() == 2 && arch.in_dim() == 1 && arch.out_dim() == 1;
}

template <class S>
std::vector<S> theta_from(const Json& cfg, std::size_t dim) {
    std::vector<S> theta;
    if (cfg.contains("theta")) {
        theta = scalars_from_json<S>(cfg.at("theta"));
    } else if (cfg.contains("theta_file")) {
        std::ifstream in(get_string(cfg, "theta_file", ""));
        if (!in) throw InvalidInput("cannot read theta_file");
        std::string line, cell;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::stringstream ss(line);
            while (std::getline(ss, cell, ',')) {
                cell.erase(0, cell.find_first_not_of(" \t\r"));
                cell.erase(cell.find_last_not_of(" \t\r") + 1);
                if (!cell.empty()) theta.push_back(parse_scalar<S>(cell));
            }
        }
    } else {
        throw InvalidInput("config needs 'theta' or 'theta_file'");
    }
    if (theta.size() != dim)
        throw InvalidInput("theta has " + std::to_string(theta.size()) + " entries, architecture needs " +
                           std::to_string(dim));
    return theta;
}

Objective objective_for(const Problem<double>& pr, const DeepArch& arch) {
    if (is_shallow(arch)) return shallow_objective(pr, arch.widths[1]);
    if (arch.in_dim() != 1 || arch.out_dim() != 1) throw InvalidInput("training needs a scalar-input, scalar-output net");
    return deep_objective(DeepProblem1D<double>::from(pr), arch);
}

Json arch_json(const DeepArch& arch) { return Json{{"layers", arch.widths}}; }

// ---- output helpers ----

std::string trajectory_csv(const Trajectory& tr, long stride) {
    const std::size_t dim = tr.thetas.empty() ? 0 : tr.thetas.front().size();
    std::string out = trajectory_csv_header(dim);
    for (std::size_t i = 0; i < tr.size(); ++i) {
        if (i % static_cast<std::size_t>(stride) != 0 && i + 1 != tr.size()) continue;
        out += format_scalar(tr.times[i]) + "," + format_scalar(tr.risks[i]) + "," + format_scalar(tr.grad_norms[i]);
        for (double v : tr.thetas[i]) out += "," + format_scalar(v);
        out += "\n";
    }
    return out;
}

std::string trajectory_dat(const Trajectory& tr, long stride, bool with_energy) {
    std::string out = with_energy ? "# t risk grad_norm energy\n" : "# step risk grad_norm\n";
    for (std::size_t i = 0; i < tr.size(); ++i) {
        if (i % static_cast<std::size_t>(stride) != 0 && i + 1 != tr.size()) continue;
        out += format_scalar(tr.times[i]) + " " + format_scalar(tr.risks[i]) + " " + format_scalar(tr.grad_norms[i]);
        if (with_energy) out += " " + format_scalar(tr.energy[i]);
        out += "\n";
    }
    return out;
}

Json power_json(const PowerFit& p) {
    return Json{{"exponent", p.exponent}, {"constant", p.constant}, {"r2", p.r2}, {"points", p.points}};
}

Json rate_json(const RateFit& f) {
    return Json{{"beta", power_json(f.distance)},  {"risk_rate", power_json(f.risk)},
                {"reference_risk", f.reference_risk}, {"reference_theta", f.reference_theta},
                {"converged", f.converged},          {"inconclusive", f.inconclusive},
                {"note", f.note}};
}

Json kl_json(const KLProbe& p) {
    return Json{{"alpha", p.alpha},
                {"constant", p.constant},
                {"slope", p.slope},
                {"r2", p.r2},
                {"points", p.points},
                {"window", {p.window_start, p.window_end}},
                {"plateau", p.plateau},
                {"clamped", p.clamped},
                {"holds_everywhere", p.holds_everywhere},
                {"inconclusive", p.inconclusive}};
}

Json trajectory_summary(const Trajectory& tr) {
    Json j{{"samples", tr.size()},
           {"initial_risk", tr.risks.front()},
           {"final_risk", tr.final_risk()},
           {"final_grad_norm", tr.grad_norms.back()},
           {"final_time", tr.times.back()},
           {"diverged", tr.diverged},
           {"max_risk_increase", tr.max_risk_increase}};
    if (tr.diverged) j["divergence_reason"] = tr.divergence_reason;
    if (!tr.energy.empty()) {
        j["step"] = tr.step;
        j["halvings"] = tr.halvings;
        j["energy_residual"] = tr.energy_residual;
        j["energy_ok"] = tr.energy_ok;
    }
    return j;
}

// ---- dynamics settings ----

struct DynamicsSettings {
    std::string method = "gd";
    GFConfig gf;
    GDConfig gd;
    long csv_stride = 1;
};

DynamicsSettings dynamics_from(const Json& cfg, std::uint64_t seed, const std::string& default_method) {
    DynamicsSettings s;
    s.method = default_method;
    Json d = cfg.contains("dynamics") ? cfg.at("dynamics") : Json::object();
    allow_keys(d, "dynamics",
               {"method", "T", "h", "integrator", "energy_tol", "check_interval", "max_halvings", "gamma", "steps",
                "inits", "sampler", "radius", "record_stride", "csv_stride"});
    s.method = get_string(d, "method", default_method);
    if (s.method != "gf" && s.method != "gd") throw InvalidInput("dynamics method must be 'gf' or 'gd'");
    s.gf.T = get_real(d, "T", 10.0);
    s.gf.h = get_real(d, "h", 0.0);
    s.gf.integrator = integrator_from_string(get_string(d, "integrator", "rk4"));
    s.gf.energy_tol = get_real(d, "energy_tol", 1e-6);
    s.gf.check_interval = static_cast<int>(get_int(d, "check_interval", 100));
    s.gf.max_halvings = static_cast<int>(get_int(d, "max_halvings", 6));
    s.gf.record_stride = static_cast<int>(get_int(d, "record_stride", 0));
    s.gf.validate();
    s.gd.gamma = get_real(d, "gamma", 1e-2);
    s.gd.steps = get_int(d, "steps", 1000);
    s.gd.inits = static_cast<int>(get_int(d, "inits", 1));
    s.gd.sampler = sampler_from_string(get_string(d, "sampler", "uniform"));
    s.gd.radius = get_real(d, "radius", 2.0);
    s.gd.seed = seed;
    s.gd.record_stride = static_cast<int>(get_int(d, "record_stride", 1));
    if (s.gd.record_stride < 1) s.gd.record_stride = 1;
    s.gd.validate();
    s.csv_stride = get_int(d, "csv_stride", 1);
    if (s.csv_stride < 1) throw InvalidInput("csv_stride must be at least 1");
    return s;
}

RateFitOptions fit_options_from(const Json& cfg) {
    RateFitOptions o;
    Json f = cfg.contains("fit") ? cfg.at("fit") : Json::object();
    allow_keys(f, "fit", {"tail_fraction", "floor", "converged_grad_norm"});
    o.tail_fraction = get_real(f, "tail_fraction", 0.5);
    o.floor = get_real(f, "floor", 1e-12);
    o.converged_grad_norm = get_real(f, "converged_grad_norm", 1e-3);
    if (!(o.tail_fraction > 0 && o.tail_fraction <= 1)) throw InvalidInput("tail_fraction must lie in (0, 1]");
    return o;
}

void require_float(Mode m, const std::string& command) {
    if (m != Mode::floating) throw InvalidInput(command + " runs in float mode only");
}

// ---- commands ----

template <class S>
CommandResult cmd_check(const Json& cfg) {
    allow_keys(cfg, "config", {"mode", "seed", "function", "width"});
    auto f = pl_from_json<S>(need(cfg, "function", "config"));
    const long width = get_int(cfg, "width", -1);
    if (width < 0) throw InvalidInput("config needs a nonnegative 'width'");
    CommandResult res;
    auto cert = slope_relation_holds(f, static_cast<int>(width));
    res.report = {{"representable", cert.holds},
                  {"breakpoints", f.breakpoint_count()},
                  {"width", width},
                  {"advisory", cert.advisory}};
    if (cert.holds) {
        Json idx = Json::array();
        for (int i : cert.witness_indices) idx.push_back(i + 1);
        res.report["witness_indices"] = idx;  // 1-based slope indices
        if (width >= 1) res.report["witness_theta"] = scalars_to_json(synthesize(f, static_cast<int>(width)));
    }
    res.exit_code = cert.holds ? kExitOk : kExitNegative;
    return res;
}

template <class S>
CommandResult cmd_approx(const Json& cfg) {
    allow_keys(cfg, "config", {"mode", "seed", "problem", "width", "architecture", "theta", "theta_file"});
    auto pr = problem_from<S>(cfg);
    auto arch = arch_from(cfg);
    check_arch_domain(cfg, pr);
    if (!is_shallow(arch)) throw InvalidInput("approx works on shallow (1, H, 1) networks");
    auto theta = theta_from<S>(cfg, arch.param_count());
    auto r = better_approx(theta, arch.widths[1], pr);
    CommandResult res;
    res.report = {{"theta", scalars_to_json(r.theta)},
                  {"risk_before", scalar_to_json(r.risk_before)},
                  {"risk_after", scalar_to_json(r.risk_after)},
                  {"breakpoints_before", r.q_before},
                  {"breakpoints_after", r.q_after},
                  {"lipschitz_after", scalar_to_json(r.lip_after)},
                  {"sup_after", scalar_to_json(r.sup_after)},
                  {"lipschitz_bound", scalar_to_json(S(S(arch.widths[1]) * r.lip_target))},
                  {"sup_bound", scalar_to_json(S(S(arch.widths[1]) * r.lip_target * (pr.upper() - pr.lower()) +
                                                 r.sup_target))}};
    return res;
}

template <class S>
CommandResult cmd_risk_grad(const Json& cfg, bool want_grad) {
    allow_keys(cfg, "config", {"mode", "seed", "problem", "width", "architecture", "theta", "theta_file"});
    auto pr = problem_from<S>(cfg);
    auto arch = arch_from(cfg);
    check_arch_domain(cfg, pr);
    if (arch.in_dim() != 1 || arch.out_dim() != 1) throw InvalidInput("exact risk needs a scalar-input, scalar-output net");
    auto theta = theta_from<S>(cfg, arch.param_count());
    RiskGrad<S> rg = is_shallow(arch) ? shallow_risk_grad(theta, arch.widths[1], pr, want_grad)
                                      : deep_risk_grad_exact_1d(theta, arch, DeepProblem1D<S>::from(pr), want_grad);
    CommandResult res;
    res.report = {{"architecture", arch_json(arch)}, {"risk", scalar_to_json(rg.risk)}};
    if (want_grad) res.report["gradient"] = scalars_to_json(rg.grad);
    return res;
}

// Cell edges of the realization keep a margin from the data breakpoints and from each other.
bool in_smooth_region(const Vec& theta, const DeepArch& arch, const Problem<double>& pr, double margin) {
    const double a = pr.lower(), b = pr.upper(), gap = margin * (b - a);
    auto prop = propagate_pl(theta, arch, a, b);
    const auto data = merge_points(pr.target.breakpoints(), pr.density.breakpoints());
    for (std::size_t c = 1; c + 1 < prop.cells.size(); ++c) {
        const double e = prop.cells[c];
        if (prop.cells[c + 1] - e < gap) return false;
        for (double x : data)
            if (std::fabs(e - x) < gap) return false;
    }
    // First-layer units whose kink has only barely left the domain are also too close.
    auto first = deep_unpack(theta, arch, 1);
    for (int i = 0; i < first.rows; ++i) {
        if (std::fabs(first.w(i, 0)) < margin) return false;
        const double k = -first.bias[i] / first.w(i, 0);
        if (std::fabs(k - a) < gap || std::fabs(k - b) < gap) return false;
    }
    return true;
}

CommandResult cmd_gradcheck(const Json& cfg, const RunOptions& opt) {
    allow_keys(cfg, "config", {"mode", "seed", "problem", "width", "architecture", "gradcheck"});
    require_float(mode_of(cfg, opt, Mode::floating), "gradcheck");
    auto pr = problem_from<double>(cfg);
    auto arch = arch_from(cfg);
    check_arch_domain(cfg, pr);
    auto obj = objective_for(pr, arch);
    Json g = cfg.contains("gradcheck") ? cfg.at("gradcheck") : Json::object();
    allow_keys(g, "gradcheck", {"samples", "tol", "h", "radius", "margin"});
    const long samples = get_int(g, "samples", 100);
    const double tol = get_real(g, "tol", 1e-4), h = get_real(g, "h", 1e-6);
    const double radius = get_real(g, "radius", 2.0), margin = get_real(g, "margin", 1e-3);
    if (samples < 0) throw InvalidInput("samples must be nonnegative");
    if (!(tol > 0) || !(h > 0) || !(radius > 0) || !(margin > 0)) throw InvalidInput("tol, h, radius, margin must be positive");
    const std::uint64_t seed = seed_of(cfg, opt);

    CommandResult res;
    if (samples == 0) log_warning("gradcheck with zero samples passes vacuously");
    double worst = 0.0;
    Json worst_case = nullptr;
    std::uint64_t draw = 0;
    const std::uint64_t max_draws = 1000 * static_cast<std::uint64_t>(samples) + 1000;
    for (long n = 0; n < samples; ++n) {
        Vec theta;
        do {
            if (draw >= max_draws) throw std::runtime_error("could not sample enough smooth-region parameters");
            theta = sample_init(seed, draw++, obj.dim, InitSampler::uniform, radius);
        } while (!in_smooth_region(theta, arch, pr, margin));
        Vec grad = obj.eval(theta).grad;
        if (opt.corrupt_gradient) grad[0] += 0.1;
        for (std::size_t p = 0; p < theta.size(); ++p) {
            Vec up = theta, down = theta;
            up[p] += h;
            down[p] -= h;
            const double fd = (obj.eval(up).risk - obj.eval(down).risk) / (2 * h);
            const double err = std::fabs(grad[p] - fd) / std::max(1.0, std::fabs(fd));
            if (err > worst) {
                worst = err;
                worst_case = {{"sample", n}, {"component", p}, {"gradient", grad[p]}, {"finite_difference", fd},
                              {"theta", theta}};
            }
        }
    }
    res.report = {{"samples", samples}, {"tolerance", tol}, {"h", h}, {"max_relative_error", worst},
                  {"passed", worst <= tol}};
    if (worst > tol) {
        res.report["worst"] = worst_case;
        res.exit_code = kExitCheckFailed;
    }
    return res;
}

Vec init_for(const Json& cfg, const Objective& obj, const DynamicsSettings& s) {
    if (cfg.contains("theta") || cfg.contains("theta_file")) return theta_from<double>(cfg, obj.dim);
    return sample_init(s.gd.seed, 0, obj.dim, s.gd.sampler, s.gd.radius);
}

CommandResult cmd_train(const Json& cfg, const RunOptions& opt, bool rates) {
    allow_keys(cfg, "config", {"mode", "seed", "problem", "width", "architecture", "dynamics", "theta", "theta_file", "fit"});
    require_float(mode_of(cfg, opt, Mode::floating), rates ? "rates" : "train");
    auto pr = problem_from<double>(cfg);
    auto arch = arch_from(cfg);
    check_arch_domain(cfg, pr);
    auto obj = objective_for(pr, arch);
    auto s = dynamics_from(cfg, seed_of(cfg, opt), rates ? "gf" : "gd");
    auto fit_opts = fit_options_from(cfg);
    auto theta0 = init_for(cfg, obj, s);

    Trajectory tr = s.method == "gf" ? gf_integrate(theta0, obj, s.gf) : gd_run(theta0, s.gd.gamma, s.gd.steps, obj, {s.gd.record_stride});
    CommandResult res;
    auto fit = fit_rate(tr, fit_opts);
    auto kl = kl_probe(tr, fit.reference_risk, {fit_opts.tail_fraction, fit_opts.floor});
    res.report = {{"command", rates ? "rates" : "train"},
                  {"method", s.method},
                  {"architecture", arch_json(arch)},
                  {"seed", s.gd.seed},
                  {"final_risk", tr.final_risk()},
                  {"best_kappa", 0},
                  {"rate_fit", rate_json(fit)},
                  {"kl_probe", kl_json(kl)},
                  {"diverged_count", tr.diverged ? 1 : 0},
                  {"trajectory", trajectory_summary(tr)}};
    res.files["trajectory_0.csv"] = trajectory_csv(tr, s.csv_stride);
    res.files["plotdata.dat"] = trajectory_dat(tr, s.csv_stride, s.method == "gf");
    res.files["report.json"] = json_text(res.report);
    if (tr.diverged) res.exit_code = kExitAllDiverged;
    return res;
}

CommandResult cmd_multistart(const Json& cfg, const RunOptions& opt) {
    allow_keys(cfg, "config", {"mode", "seed", "problem", "width", "architecture", "dynamics", "fit"});
    require_float(mode_of(cfg, opt, Mode::floating), "multistart");
    auto pr = problem_from<double>(cfg);
    auto arch = arch_from(cfg);
    check_arch_domain(cfg, pr);
    auto obj = objective_for(pr, arch);
    auto s = dynamics_from(cfg, seed_of(cfg, opt), "gd");
    if (s.method != "gd") throw InvalidInput("multistart runs gradient descent");
    auto fit_opts = fit_options_from(cfg);

    auto ms = multistart(obj, s.gd, opt.jobs);
    CommandResult res;
    Json runs = Json::array();
    for (std::size_t k = 0; k < ms.runs.size(); ++k) {
        runs.push_back(trajectory_summary(ms.runs[k]));
        res.files["trajectory_" + std::to_string(k) + ".csv"] = trajectory_csv(ms.runs[k], s.csv_stride);
    }
    res.report = {{"command", "multistart"},
                  {"architecture", arch_json(arch)},
                  {"seed", s.gd.seed},
                  {"inits", s.gd.inits},
                  {"final_risk", ms.best_risk},
                  {"best_kappa", ms.best_kappa},
                  {"diverged_count", ms.diverged_count},
                  {"prefix_best", ms.prefix_best},
                  {"runs", runs}};
    if (ms.best_kappa >= 0) {
        const auto& best = ms.runs[ms.best_kappa];
        auto fit = fit_rate(best, fit_opts);
        res.report["rate_fit"] = rate_json(fit);
        res.report["kl_probe"] = kl_json(kl_probe(best, fit.reference_risk, {fit_opts.tail_fraction, fit_opts.floor}));
    } else {
        res.report["rate_fit"] = nullptr;
        res.report["kl_probe"] = nullptr;
    }
    std::string dat = "# step min_risk argmin_kappa\n";
    for (std::size_t i = 0; i < ms.min_risk.size(); ++i) {
        if (i % static_cast<std::size_t>(s.csv_stride) != 0 && i + 1 != ms.min_risk.size()) continue;
        dat += std::to_string(static_cast<long>(i) * s.gd.record_stride) + " " + format_scalar(ms.min_risk[i]) + " " +
               std::to_string(ms.argmin[i]) + "\n";
    }
    res.files["plotdata.dat"] = dat;
    res.files["report.json"] = json_text(res.report);
    if (ms.diverged_count == s.gd.inits) res.exit_code = kExitAllDiverged;
    return res;
}

CommandResult cmd_widthscan(const Json& cfg, const RunOptions& opt) {
    allow_keys(cfg, "config", {"mode", "seed", "problem", "dynamics", "widthscan"});
    require_float(mode_of(cfg, opt, Mode::floating), "widthscan");
    auto pr = problem_from<double>(cfg);
    auto s = dynamics_from(cfg, seed_of(cfg, opt), "gd");
    const auto& w = need(cfg, "widthscan", "config");
    allow_keys(w, "widthscan", {"widths", "architectures", "budget", "warm_start"});
    WidthScanConfig wc;
    if (w.contains("widths")) {
        for (const auto& v : w.at("widths")) {
            if (!v.is_number_integer() || v.get<int>() < 1) throw InvalidInput("widths must be positive integers");
            wc.archs.push_back(DeepArch::shallow(v.get<int>()));
        }
    }
    if (w.contains("architectures")) {
        for (const auto& layers : w.at("architectures")) {
            DeepArch a;
            for (const auto& v : layers) {
                if (!v.is_number_integer()) throw InvalidInput("layer widths must be integers");
                a.widths.push_back(v.get<int>());
            }
            if (a.in_dim() != 1 || a.out_dim() != 1) throw InvalidInput("width scan needs (1, ..., 1) architectures");
            wc.archs.push_back(a);
        }
    }
    wc.budget = static_cast<int>(get_int(w, "budget", 4));
    if (w.contains("warm_start")) {
        if (!w.at("warm_start").is_boolean()) throw InvalidInput("'warm_start' must be a boolean");
        wc.warm_start = w.at("warm_start").get<bool>();
    }
    wc.gd = s.gd;
    wc.validate();

    auto rows = width_scan(DeepProblem1D<double>::from(pr), wc, opt.jobs);
    CommandResult res;
    Json jr = Json::array();
    std::string dat = "# min_width best_risk\n";
    bool any_finite = false;
    for (const auto& r : rows) {
        jr.push_back({{"layers", r.arch.widths}, {"min_width", r.min_width}, {"best_risk", r.best_risk},
                      {"seeds_used", r.seeds_used}, {"warm_started", r.warm_started}});
        dat += std::to_string(r.min_width) + " " + format_scalar(r.best_risk) + "\n";
        any_finite = any_finite || std::isfinite(r.best_risk);
    }
    res.report = {{"command", "widthscan"}, {"seed", s.gd.seed}, {"budget", wc.budget}, {"rows", jr}};
    res.files["widthscan.csv"] = width_scan_csv(rows);
    res.files["plotdata.dat"] = dat;
    res.files["report.json"] = json_text(res.report);
    if (!any_finite) res.exit_code = kExitAllDiverged;
    return res;
}

}  // namespace

CommandResult run_command(const std::string& command, const Json& config, const RunOptions& options) {
    if (!config.is_object()) throw InvalidInput("config must be a JSON object");
    if (options.jobs < 1) throw InvalidInput("--jobs must be at least 1");
    const bool exact_default = command == "check" || command == "approx" || command == "risk" || command == "grad";
    if (exact_default) {
        const Mode m = mode_of(config, options, Mode::rational);
        seed_of(config, options);
        const bool exact = m == Mode::rational;
        CommandResult res;
        if (command == "check")
            res = exact ? cmd_check<Rational>(config) : cmd_check<double>(config);
        else if (command == "approx")
            res = exact ? cmd_approx<Rational>(config) : cmd_approx<double>(config);
        else
            res = exact ? cmd_risk_grad<Rational>(config, command == "grad")
                        : cmd_risk_grad<double>(config, command == "grad");
        res.report["mode"] = exact ? "rational" : "float";
        res.files["report.json"] = json_text(res.report);
        return res;
    }
    if (command == "gradcheck") return cmd_gradcheck(config, options);
    if (command == "train") return cmd_train(config, options, false);
    if (command == "rates") return cmd_train(config, options, true);
    if (command == "multistart") return cmd_multistart(config, options);
    if (command == "widthscan") return cmd_widthscan(config, options);
    throw InvalidInput("unknown command '" + command + "'");
}

}  // namespace relunet
