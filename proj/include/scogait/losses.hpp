#pragma once

#include <span>
#include <string>
#include <vector>

#include "scogait/model.hpp"
#include "scogait/tensor.hpp"

namespace scogait {

struct Triplet {
  int anchor;
  int positive;
  int negative;
  friend bool operator==(const Triplet&, const Triplet&) = default;
  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

using TripletSet = std::vector<Triplet>;

// Every (a, p, n) with id[a] == id[p], a != p, id[a] != id[n], in
// lexicographic order.
TripletSet mine_triplets(std::span<const int> identities);

// For each anchor, the farthest positive and the nearest negative under
// `dist` (row-major B x B). Anchors lacking either are skipped.
TripletSet mine_hard_triplets(std::span<const int> identities, std::span<const double> dist);

enum class Mining { kBatchAll, kBatchHard };
// Per-part hinges averaged across parts, or one hinge on the concatenation.
enum class TripletReduction { kPerPart, kConcat };

std::string to_string(Mining m);
Mining parse_mining(const std::string& s);
std::string to_string(TripletReduction r);
TripletReduction parse_reduction(const std::string& s);

struct TripletOptions {
  double margin = 0.2;
  Mining mining = Mining::kBatchAll;
  TripletReduction reduction = TripletReduction::kPerPart;
};

template <typename T>
struct LossTerm {
  double value = 0.0;
  Tensor<T> grad;  // same shape as the input
  int n_active = 0;
};

// Softmax cross-entropy of one logit row; log-sum-exp stabilized.
double cross_entropy(std::span<const double> logits, int label);

// Batch mean over rows of logits [B, K]; grad = (softmax - onehot) / B.
template <typename T>
LossTerm<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

// Hinge triplet loss on embeddings [B, parts, D] with squared Euclidean
// distances. Within a part the hinge is averaged over triplets whose loss is
// positive; parts are then averaged. n_active is the number of positive
// hinges averaged over parts, rounded.
template <typename T>
LossTerm<T> triplet_loss(const Tensor<T>& embeddings, std::span<const int> identities,
                         const TripletOptions& options = {});

// Same, with a fixed triplet set (no mining).
template <typename T>
LossTerm<T> triplet_loss(const Tensor<T>& embeddings, const TripletSet& triplets,
                         double margin = 0.2,
                         TripletReduction reduction = TripletReduction::kPerPart);

enum class TripletIdentity { kNone, kLabel, kSubject };
TripletIdentity triplet_identity(Variant v);

struct LossReport {
  double ce = 0.0;
  double triplet = 0.0;
  double total = 0.0;
  int n_active_triplets = 0;
};

LossReport total_loss(double ce, double triplet, Variant variant, int n_active = 0);

}  // namespace scogait
