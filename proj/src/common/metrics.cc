#include "instasent/common/metrics.h"

#include <numeric>

#include "instasent/common/error.h"

namespace instasent {

void ConfusionMatrix::Add(int truth, int predicted) {
  if (truth < 0 || truth >= n_ || predicted < 0 || predicted >= n_)
    throw ArgumentError("class index out of range");
  ++counts_[truth * n_ + predicted];
}

std::int64_t ConfusionMatrix::Total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::Trace() const {
  std::int64_t t = 0;
  for (int i = 0; i < n_; ++i) t += at(i, i);
  return t;
}

std::int64_t ConfusionMatrix::RowSum(int truth) const {
  std::int64_t s = 0;
  for (int j = 0; j < n_; ++j) s += at(truth, j);
  return s;
}

double ConfusionMatrix::Accuracy() const {
  const auto total = Total();
  return total == 0 ? 0.0 : static_cast<double>(Trace()) / static_cast<double>(total);
}

}  // namespace instasent
