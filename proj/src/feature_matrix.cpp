#include "fvad/feature_matrix.hpp"

#include "fvad/error.hpp"

namespace fvad {

void FeatureMatrix::validate() const {
  if (data.rows() < 1 || data.cols() < 1) {
    throw InvalidInput("feature matrix '" + source_tag + "' is empty");
  }
  if (!(hop_ms > 0.0)) throw InvalidInput("feature matrix hop_ms must be positive");
  if (!data.allFinite()) {
    throw InvalidInput("feature matrix '" + source_tag + "' has non-finite entries");
  }
}

}  // namespace fvad
