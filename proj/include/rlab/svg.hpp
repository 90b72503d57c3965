#pragma once

#include <string>
#include <vector>

namespace rlab {

struct ExperimentReport;

/// Budget-vs-median curves with a shaded +-1 sd band over folds, one panel
/// per metric. Deterministic text output.
std::string render_report_svg(const ExperimentReport& rep);

/// Two overlaid integer-value histograms (clean vs poisoned distributions).
std::string render_histogram_pair_svg(const std::string& title,
                                      const std::string& label_a,
                                      const std::vector<double>& values_a,
                                      const std::string& label_b,
                                      const std::vector<double>& values_b);

} // namespace rlab
