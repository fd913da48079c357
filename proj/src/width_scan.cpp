#include "relunet/width_scan.hpp"

#include "relunet/log.hpp"
#include "relunet/parallel.hpp"
#include "relunet/repr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace relunet {

void WidthScanConfig::validate() const {
    if (archs.empty()) throw InvalidInput("width scan needs at least one architecture");
    if (budget < 1) throw InvalidInput("width scan budget must be at least 1");
    for (const auto& a : archs) {
        a.validate();
        if (a.depth() < 2) throw InvalidInput("width scan architectures need a hidden layer");
    }
    GDConfig g = gd;
    g.inits = 1;
    g.validate();
}

namespace {

bool is_piecewise_linear(const PiecewisePoly<double>& f) {
    if (!f.is_continuous()) return false;
    for (const auto& p : f.pieces())
        if (p.degree() > 1) return false;
    return true;
}

// Exact witness for a (1, H, 1) architecture, when the target allows one.
std::optional<Vec> shallow_witness(const DeepProblem1D<double>& problem, const DeepArch& arch) {
    if (arch.depth() != 2 || arch.in_dim() != 1 || arch.out_dim() != 1) return std::nullopt;
    if (!is_piecewise_linear(problem.targets[0])) return std::nullopt;
    const auto f = PiecewiseLinear<Rational>::from_piecewise_poly(pp_convert<Rational>(problem.targets[0]));
    const int width = arch.widths[1];
    try {
        if (!slope_relation_holds(f, width).holds) return std::nullopt;
        auto theta = synthesize(f, width);
        Vec out;
        for (const auto& v : theta) out.push_back(to_double(v));
        return out;
    } catch (const CapacityError& e) {
        log_warning(std::string("width scan skips the warm start: ") + e.what());
        return std::nullopt;
    }
}

}  // namespace

std::vector<WidthScanRow> width_scan(const DeepProblem1D<double>& problem, const WidthScanConfig& config, int jobs) {
    config.validate();
    std::vector<Objective> objectives;
    for (const auto& a : config.archs) objectives.push_back(deep_objective(problem, a));
    const std::size_t per = static_cast<std::size_t>(config.budget);
    const std::size_t total = config.archs.size() * per;
    Vec finals(total, std::numeric_limits<double>::quiet_NaN());
    run_indexed(total, jobs, [&](std::size_t job) {
        const std::size_t a = job / per, s = job % per;
        const auto& obj = objectives[a];
        auto theta0 = sample_init(stream_seed(config.gd.seed, a), s, obj.dim, config.gd.sampler, config.gd.radius);
        GDOptions opts;
        opts.record_stride = static_cast<int>(std::max<long>(1, config.gd.steps));
        auto tr = gd_run(theta0, config.gd.gamma, config.gd.steps, obj, opts);
        if (!tr.diverged) finals[job] = tr.final_risk();
    });
    std::vector<WidthScanRow> rows;
    for (std::size_t a = 0; a < config.archs.size(); ++a) {
        WidthScanRow row;
        row.arch = config.archs[a];
        row.min_width = *std::min_element(row.arch.widths.begin() + 1, row.arch.widths.end() - 1);
        row.seeds_used = config.budget;
        row.best_risk = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < per; ++s)
            if (std::isfinite(finals[a * per + s])) row.best_risk = std::min(row.best_risk, finals[a * per + s]);
        if (config.warm_start) {
            if (auto w = shallow_witness(problem, row.arch)) {
                row.warm_started = true;
                row.best_risk = std::min(row.best_risk, objectives[a].eval(*w).risk);
            }
        }
        rows.push_back(row);
    }
    return rows;
}

std::string width_scan_csv(const std::vector<WidthScanRow>& rows) {
    std::string out = "min_width,best_risk,seeds_used\n";
    for (const auto& r : rows)
        out += std::to_string(r.min_width) + "," + format_scalar(r.best_risk) + "," + std::to_string(r.seeds_used) + "\n";
    return out;
}

}  // namespace relunet
