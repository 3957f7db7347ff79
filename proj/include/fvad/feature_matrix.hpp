#pragma once

#include <Eigen/Dense>

#include <string>

namespace fvad {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kDefaultHopMs = 20.0;

// T frames by D dims on a fixed hop grid. All feature streams (MFCC, PTM,
// synthetic) travel through the toolkit in this form.
struct FeatureMatrix {
  RowMatrixF data;
  double hop_ms = kDefaultHopMs;
  std::string source_tag;

  Eigen::Index frames() const { return data.rows(); }
  Eigen::Index dims() const { return data.cols(); }
  double duration_s() const { return static_cast<double>(frames()) * hop_ms / 1000.0; }

  // Throws InvalidInput unless T >= 1, D >= 1, hop_ms > 0 and all entries are finite.
  void validate() const;
};

}  // namespace fvad
