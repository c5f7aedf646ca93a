#pragma once

#include <string>

#include "trifusion/acoustic_fusion.hpp"
#include "trifusion/dataio.hpp"
#include "trifusion/harness.hpp"

namespace trifusion {

/// Predicted positions over the pool plane, one color per true location,
/// true locations marked as hollow squares.
void plot_scatter(const EvalResult& res, const std::string& path);

/// Distribution of raw direction codes per true class, with mean and
/// extremum markers and the decision thresholds.
void plot_violin(const EvalResult& res, const std::string& path);

/// 3x3 confusion matrix as a shaded grid.
void plot_confusion(const EvalReport& report, const std::string& path);

/// Side-by-side alpha-blend visualizations (red background) of the fused
/// RGBA frame for the first few cases of a dataset.
void plot_fusion_panels(const Dataset& ds, const RigModel& rig, const ExpansionFactors& gamma,
                        int max_panels, const std::string& path);

}  // namespace trifusion
