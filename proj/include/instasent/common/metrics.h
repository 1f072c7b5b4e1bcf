#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace instasent {

// Square confusion matrix; rows are true classes, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes)
      : n_(num_classes), counts_(static_cast<size_t>(num_classes) * num_classes, 0) {}

  void Add(int truth, int predicted);

  int num_classes() const { return n_; }
  std::int64_t at(int truth, int predicted) const { return counts_[truth * n_ + predicted]; }
  std::int64_t Total() const;
  std::int64_t Trace() const;
  std::int64_t RowSum(int truth) const;
  // trace / total; 0 for an empty matrix.
  double Accuracy() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int n_;
  std::vector<std::int64_t> counts_;
};

struct Evaluation {
  double accuracy = 0;
  ConfusionMatrix confusion{4};
};

}  // namespace instasent
