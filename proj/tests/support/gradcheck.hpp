#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "scogait/losses.hpp"
#include "scogait/model.hpp"
#include "scogait/random.hpp"

namespace scogait::testing {

struct GradCheckStats {
  int checked = 0;
  int within = 0;
  double max_rel = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Tiny double-precision ScoNet-MT: stem 4, one stage of 8, 8x8 inputs,
// 4 horizontal parts, embed_dim 8; four views (two identities) of two frames.
struct TinyProblem {
  ModelConfig cfg;
  Tensor<double> frames;
  std::vector<int> lengths{2, 2, 2, 2};
  std::vector<int> labels{0, 0, 2, 2};
  std::vector<int> identities{0, 0, 1, 1};

  TinyProblem() {
    cfg.in_h = 8;
    cfg.in_w = 8;
    cfg.channels = {4, 8};
    cfg.strides = {1};
    cfg.blocks_per_stage = 1;
    cfg.parts = 4;
    cfg.embed_dim = 8;
    cfg.variant = Variant::kSconetMt;
    Rng rng(2024);
    frames = Tensor<double>({8, 1, 8, 8});
    for (auto& v : frames.values()) v = rng.normal();
  }

  double loss(ScoNet<double>& m, bool backward) const {
    const auto out = m.forward(frames, lengths, Mode::kTrain);
    const auto ce = cross_entropy(out.logits, labels);
    const auto tr = triplet_loss(out.embeddings, identities);
    if (backward) {
      m.zero_grad();
      m.backward(tr.grad, ce.grad);
    }
    return total_loss(ce.value, tr.value, cfg.variant).total;
  }
};

// Central differences against analytic gradients for every encoder parameter.
inline GradCheckStats check_encoder_gradients(double tol = 1e-3, double h = 1e-6) {
  TinyProblem prob;
  ScoNet<double> m(prob.cfg);
  m.init(99);
  // Give the classifier real weight so CE gradients reach the encoder.
  for (auto* p : m.refs().params) {
    if (p->name == "head.classifier.weight") {
      Rng rng(5);
      for (auto& v : p->value.values()) v = 0.5 * rng.normal();
    }
  }
  prob.loss(m, true);
  GradCheckStats stats;
  for (auto* p : m.refs().params) {
    if (p->name.rfind("encoder.", 0) != 0) continue;
    const Tensor<double> analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double keep = p->value[i];
      p->value[i] = keep + h;
      const double up = prob.loss(m, false);
      p->value[i] = keep - h;
      const double down = prob.loss(m, false);
      p->value[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      ++stats.checked;
      if (rel <= tol) ++stats.within;
      if (rel > stats.max_rel) {
        stats.max_rel = rel;
        stats.worst_analytic = a;
        stats.worst_numeric = numeric;
      }
    }
  }
  return stats;
}

}  // namespace scogait::testing
