#pragma once

#include "relunet/dynamics.hpp"

#include <string>
#include <vector>

namespace relunet {

struct WidthScanConfig {
    std::vector<DeepArch> archs;
    int budget = 1;  // random inits per architecture
    GDConfig gd;     // `inits` is ignored, `budget` is used instead
    bool warm_start = true;

    void validate() const;
};

struct WidthScanRow {
    DeepArch arch;
    int min_width = 0;
    double best_risk = 0.0;
    int seeds_used = 0;
    bool warm_started = false;  // an exact witness of the target was among the candidates
};

// Best risk over `budget` GD runs per architecture. Shallow architectures on which a piecewise
// linear target is representable also get the synthesized witness as a candidate.
std::vector<WidthScanRow> width_scan(const DeepProblem1D<double>& problem, const WidthScanConfig& config, int jobs = 1);

std::string width_scan_csv(const std::vector<WidthScanRow>& rows);

}  // namespace relunet
