#pragma once

#include <cstdint>
#include <span>

namespace fvad::train {

// Mann-Whitney AUC with midranks for tied scores. Throws UndefinedMetric if
// only one class is present, ShapeError on length mismatch.
double compute_auc(std::span<const float> scores, std::span<const std::uint8_t> labels);
double compute_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

}  // namespace fvad::train
