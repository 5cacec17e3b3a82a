#include "scogait/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "scogait/errors.hpp"

namespace scogait {

namespace {

// Squared distances between all pairs of rows for one part.
template <typename T>
std::vector<double> part_distances(const Tensor<T>& e, int part, int parts, int dim) {
  const int b = e.shape()[0];
  std::vector<double> d(static_cast<std::size_t>(b) * b, 0.0);
  for (int i = 0; i < b; ++i) {
    const T* x = e.data() + (static_cast<std::size_t>(i) * parts + part) * dim;
    for (int j = i + 1; j < b; ++j) {
      const T* y = e.data() + (static_cast<std::size_t>(j) * parts + part) * dim;
      double s = 0.0;
      for (int k = 0; k < dim; ++k) {
        const double diff = static_cast<double>(x[k]) - y[k];
        s += diff * diff;
      }
      d[static_cast<std::size_t>(i) * b + j] = s;
      d[static_cast<std::size_t>(j) * b + i] = s;
    }
  }
  return d;
}

// Accumulates the hinge loss of one part and its gradient.
template <typename T>
double part_loss(const Tensor<T>& e, Tensor<T>& grad, int part, int parts, int dim,
                 const std::vector<double>& dist, const TripletSet& triplets, double margin,
                 double scale, int& n_active) {
  const int b = e.shape()[0];
  std::vector<const Triplet*> active;
  double sum = 0.0;
  for (const auto& t : triplets) {
    const double h = dist[static_cast<std::size_t>(t.anchor) * b + t.positive] -
                     dist[static_cast<std::size_t>(t.anchor) * b + t.negative] + margin;
    if (h > 0) {
      sum += h;
      active.push_back(&t);
    }
  }
  n_active = static_cast<int>(active.size());
  if (active.empty()) return 0.0;
  const double w = scale / static_cast<double>(active.size());
  auto row = [&](Tensor<T>& t, int i) {
    return t.data() + (static_cast<std::size_t>(i) * parts + part) * dim;
  };
  auto crow = [&](int i) {
    return e.data() + (static_cast<std::size_t>(i) * parts + part) * dim;
  };
  for (const Triplet* t : active) {
    const T* a = crow(t->anchor);
    const T* p = crow(t->positive);
    const T* n = crow(t->negative);
    T* ga = row(grad, t->anchor);
    T* gp = row(grad, t->positive);
    T* gn = row(grad, t->negative);
    for (int k = 0; k < dim; ++k) {
      // d/da (|a-p|^2 - |a-n|^2) = 2(n - p)
      ga[k] += static_cast<T>(2.0 * w * (static_cast<double>(n[k]) - p[k]));
      gp[k] += static_cast<T>(-2.0 * w * (static_cast<double>(a[k]) - p[k]));
      gn[k] += static_cast<T>(2.0 * w * (static_cast<double>(a[k]) - n[k]));
    }
  }
  return sum / static_cast<double>(active.size());
}

template <typename T>
Tensor<T> as_parts(const Tensor<T>& e, TripletReduction r) {
  if (e.shape().size() != 3) {
    throw ShapeError("triplet loss expects [batch, parts, dim], got " + shape_string(e.shape()));
  }
  if (r == TripletReduction::kPerPart) return e;
  return e.reshaped({e.shape()[0], 1, e.shape()[1] * e.shape()[2]});
}

template <typename T>
LossTerm<T> run_triplet(const Tensor<T>& embeddings, std::span<const int> identities,
                        const TripletSet* fixed, const TripletOptions& opt) {
  const Tensor<T> e = as_parts(embeddings, opt.reduction);
  const int b = e.shape()[0];
  const int parts = e.shape()[1];
  const int dim = e.shape()[2];
  LossTerm<T> out;
  out.grad = Tensor<T>(e.shape());

  TripletSet all;
  if (!fixed) {
    if (static_cast<int>(identities.size()) != b) {
      throw ShapeError("identity count does not match the batch");
    }
    if (opt.mining == Mining::kBatchAll) all = mine_triplets(identities);
  }
  const bool hard = !fixed && opt.mining == Mining::kBatchHard;
  const TripletSet& base = fixed ? *fixed : all;
  if (!hard && base.empty()) {
    spdlog::warn("no valid triplets in batch; triplet term is zero");
    out.grad = Tensor<T>(embeddings.shape());
    return out;
  }
  for (const auto& t : base) {
    if (t.anchor < 0 || t.anchor >= b || t.positive < 0 || t.positive >= b || t.negative < 0 ||
        t.negative >= b) {
      throw ShapeError("triplet index outside the batch");
    }
  }

  double total = 0.0;
  long active = 0;
  const double scale = 1.0 / parts;
  for (int p = 0; p < parts; ++p) {
    const auto dist = part_distances(e, p, parts, dim);
    TripletSet mined;
    if (hard) mined = mine_hard_triplets(identities, dist);
    int n = 0;
    total += part_loss(e, out.grad, p, parts, dim, dist, hard ? mined : base, opt.margin, scale, n);
    active += n;
  }
  out.value = total / parts;
  out.n_active = static_cast<int>(std::lround(static_cast<double>(active) / parts));
  out.grad = out.grad.reshaped(embeddings.shape());
  return out;
}

}  // namespace

TripletSet mine_triplets(std::span<const int> id) {
  TripletSet out;
  const int b = static_cast<int>(id.size());
  for (int a = 0; a < b; ++a) {
    for (int p = 0; p < b; ++p) {
      if (p == a || id[p] != id[a]) continue;
      for (int n = 0; n < b; ++n) {
        if (id[n] != id[a]) out.push_back({a, p, n});
      }
    }
  }
  return out;
}

TripletSet mine_hard_triplets(std::span<const int> id, std::span<const double> dist) {
  const int b = static_cast<int>(id.size());
  if (dist.size() != static_cast<std::size_t>(b) * b) {
    throw ShapeError("distance matrix does not match the batch");
  }
  TripletSet out;
  for (int a = 0; a < b; ++a) {
    int hp = -1, hn = -1;
    for (int j = 0; j < b; ++j) {
      const double d = dist[static_cast<std::size_t>(a) * b + j];
      if (j != a && id[j] == id[a]) {
        if (hp < 0 || d > dist[static_cast<std::size_t>(a) * b + hp]) hp = j;
      } else if (id[j] != id[a]) {
        if (hn < 0 || d < dist[static_cast<std::size_t>(a) * b + hn]) hn = j;
      }
    }
    if (hp >= 0 && hn >= 0) out.push_back({a, hp, hn});
  }
  return out;
}

std::string to_string(Mining m) { return m == Mining::kBatchAll ? "batch_all" : "batch_hard"; }

Mining parse_mining(const std::string& s) {
  if (s == "batch_all") return Mining::kBatchAll;
  if (s == "batch_hard") return Mining::kBatchHard;
  throw ConfigError({"unknown mining strategy '" + s + "' (batch_all, batch_hard)"});
}

std::string to_string(TripletReduction r) {
  return r == TripletReduction::kPerPart ? "per_part" : "concat";
}

TripletReduction parse_reduction(const std::string& s) {
  if (s == "per_part") return TripletReduction::kPerPart;
  if (s == "concat") return TripletReduction::kConcat;
  throw ConfigError({"unknown triplet reduction '" + s + "' (per_part, concat)"});
}

double cross_entropy(std::span<const double> logits, int label) {
  if (label < 0 || label >= static_cast<int>(logits.size())) {
    throw ShapeError("label outside the logit range");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - m);
  return m + std::log(s) - logits[label];
}

template <typename T>
LossTerm<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  if (logits.shape().size() != 2 || logits.shape()[0] != static_cast<int>(labels.size())) {
    throw ShapeError("cross entropy expects [batch, classes] logits and one label per row");
  }
  const int b = logits.shape()[0];
  const int k = logits.shape()[1];
  LossTerm<T> out;
  out.grad = Tensor<T>(logits.shape());
  std::vector<double> row(k);
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < k; ++j) row[j] = logits[static_cast<std::size_t>(i) * k + j];
    out.value += cross_entropy(row, labels[i]);
    const double m = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double z : row) s += std::exp(z - m);
    for (int j = 0; j < k; ++j) {
      const double prob = std::exp(row[j] - m) / s;
      out.grad[static_cast<std::size_t>(i) * k + j] =
          static_cast<T>((prob - (j == labels[i] ? 1.0 : 0.0)) / b);
    }
  }
  out.value /= b;
  return out;
}

template <typename T>
LossTerm<T> triplet_loss(const Tensor<T>& embeddings, std::span<const int> identities,
                         const TripletOptions& options) {
  return run_triplet<T>(embeddings, identities, nullptr, options);
}

template <typename T>
LossTerm<T> triplet_loss(const Tensor<T>& embeddings, const TripletSet& triplets, double margin,
                         TripletReduction reduction) {
  TripletOptions opt;
  opt.margin = margin;
  opt.reduction = reduction;
  return run_triplet<T>(embeddings, {}, &triplets, opt);
}

TripletIdentity triplet_identity(Variant v) {
  switch (v) {
    case Variant::kSconetPlain:
    case Variant::kSconet:
      return TripletIdentity::kNone;
    case Variant::kSconetPlainTriplet:
    case Variant::kSconetTriplet:
      return TripletIdentity::kLabel;
    case Variant::kSconetPlainMt:
    case Variant::kSconetMt:
      return TripletIdentity::kSubject;
  }
  return TripletIdentity::kNone;
}

LossReport total_loss(double ce, double triplet, Variant variant, int n_active) {
  LossReport r;
  r.ce = ce;
  if (triplet_identity(variant) != TripletIdentity::kNone) {
    r.triplet = triplet;
    r.n_active_triplets = n_active;
  }
  r.total = r.ce + r.triplet;
  return r;
}

template LossTerm<float> cross_entropy(const Tensor<float>&, std::span<const int>);
template LossTerm<double> cross_entropy(const Tensor<double>&, std::span<const int>);
template LossTerm<float> triplet_loss(const Tensor<float>&, std::span<const int>,
                                      const TripletOptions&);
template LossTerm<double> triplet_loss(const Tensor<double>&, std::span<const int>,
                                       const TripletOptions&);
template LossTerm<float> triplet_loss(const Tensor<float>&, const TripletSet&, double,
                                      TripletReduction);
template LossTerm<double> triplet_loss(const Tensor<double>&, const TripletSet&, double,
                                       TripletReduction);

}  // namespace scogait
