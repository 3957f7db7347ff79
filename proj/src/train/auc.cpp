#include "fvad/train/auc.hpp"

#include "fvad/error.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace fvad::train {
namespace {

template <typename T>
double auc_impl(std::span<const T> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    // Ranks are 1-based; the tie group i..j shares the mean rank.
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] != 0) {
        pos_rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j + 1;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetric("auc needs both classes present");
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

}  // namespace

double compute_auc(std::span<const float> scores, std::span<const std::uint8_t> labels) {
  return auc_impl(scores, labels);
}

double compute_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  return auc_impl(scores, labels);
}

}  // namespace fvad::train
