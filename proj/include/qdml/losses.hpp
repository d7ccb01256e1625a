#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "qdml/core.hpp"

namespace qdml {

// Reference-anchored distances of one quadruplet.
struct QuadrupletDistances {
  double d_rpp = 0.0;
  double d_rpm = 0.0;
  double d_rn = 0.0;
};

// Batch means and population variances of the three distance sequences.
struct BatchDistanceStats {
  double mu_pp = 0.0, mu_pm = 0.0, mu_n = 0.0;
  double var_pp = 0.0, var_pm = 0.0, var_n = 0.0;
};

struct PairExample {
  double d = 0.0;
  bool same_class = false;
};

// Scores of the two classification heads for one sample.
struct HeadLogits {
  Vector coarse;  // length k1
  Vector fine;    // length k2
};

double contrastive_loss(const PairExample& p, double alpha);
double triplet_loss(double d_rp, double d_rn, double m_trip);

// lambda_c1 * CE(softmax(coarse), coarse_id) + lambda_c2 * CE(softmax(fine),
// fine_id) with one-hot targets.
double classification_loss(const HeadLogits& logits, int coarse_id,
                           int fine_id, double lambda_c1, double lambda_c2);

// The two ratio hinges alone, without the classification term.
double joint_distance_terms(const QuadrupletDistances& q, const HyperParams& h);

double joint_loss(const QuadrupletDistances& q, const HeadLogits& ref_logits,
                  int coarse_id, int fine_id, const HyperParams& h);

BatchDistanceStats batch_stats(std::span<const QuadrupletDistances> batch);
double global_loss(std::span<const QuadrupletDistances> batch,
                   const HyperParams& h);

// One element of a combined-loss batch: distances plus the reference's
// head scores and labels.
struct QuadrupletTerm {
  QuadrupletDistances dist;
  HeadLogits ref_logits;
  int coarse = 0;
  int fine = 0;
};

// sum_i joint_loss(Q_i) + eta * global_loss(Q).
double combined_loss(std::span<const QuadrupletTerm> batch,
                     const HyperParams& h);

// Embeddings of the four members, ordered r, pp, pm, n.
using QuadrupletEmbeddings = std::array<std::span<const double>, 4>;

struct QuadrupletGradient {
  std::array<Vector, 4> embedding;  // d loss / d member embedding
  HeadLogits ref_logits;            // d loss / d reference head scores
};

struct CombinedLossGradient {
  double loss = 0.0;
  std::vector<QuadrupletGradient> per_quadruplet;
  // Number of distance terms whose gradient was required at a zero distance
  // and was replaced by 0.
  std::size_t singular_terms = 0;
};

// Value and analytic gradient of combined_loss with the distances computed
// from the given embeddings. Hinges contribute a zero subgradient at their
// kink.
CombinedLossGradient combined_loss_grad(
    std::span<const QuadrupletEmbeddings> embeddings,
    std::span<const HeadLogits> ref_logits, std::span<const ClassLabel> labels,
    const HyperParams& h);

}  // namespace qdml
