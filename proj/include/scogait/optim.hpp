#pragma once

#include <vector>

#include "scogait/layers.hpp"

namespace scogait {

struct SgdOptions {
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

// SGD with heavy-ball momentum; decay is added to the gradient of
// parameters flagged `decay` (conv, FC and classifier weights).
template <typename T>
class Sgd {
 public:
  Sgd(std::vector<Param<T>*> params, SgdOptions options);

  void step(double lr);

 private:
  std::vector<Param<T>*> params_;
  SgdOptions options_;
  std::vector<Tensor<T>> velocity_;
  bool started_ = false;
};

}  // namespace scogait
