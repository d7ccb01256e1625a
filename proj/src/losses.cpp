#include "qdml/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qdml {
namespace {

double hinge(double v) { return v > 0.0 ? v : 0.0; }

// [1 - num / den]_+ written as (den - num) / den so that the result is
// exactly zero iff num >= den.
double ratio_hinge(double num, double den) {
  return num >= den ? 0.0 : (den - num) / den;
}

double log_sum_exp(std::span<const double> s) {
  const double m = *std::max_element(s.begin(), s.end());
  double acc = 0.0;
  for (double v : s) acc += std::exp(v - m);
  return m + std::log(acc);
}

void check_head(std::span<const double> scores, int target, const char* name) {
  require(!scores.empty(), ErrorCode::kInvalidArgument,
          std::string(name) + " head has no scores");
  require(target >= 0 && static_cast<std::size_t>(target) < scores.size(),
          ErrorCode::kInvalidArgument,
          std::string(name) + " label " + std::to_string(target) +
              " outside head range");
}

double cross_entropy(std::span<const double> scores, int target) {
  return log_sum_exp(scores) - scores[target];
}

// lambda * (softmax(scores) - onehot(target)).
Vector cross_entropy_grad(std::span<const double> scores, int target,
                          double lambda) {
  const double lse = log_sum_exp(scores);
  Vector g(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    g[i] = lambda * std::exp(scores[i] - lse);
  }
  g[target] -= lambda;
  return g;
}

void check_distances(const QuadrupletDistances& q) {
  require(std::isfinite(q.d_rpp) && std::isfinite(q.d_rpm) && std::isfinite(q.d_rn),
          ErrorCode::kNonFinite, "quadruplet distance is not finite");
  require(q.d_rpp >= 0.0 && q.d_rpm >= 0.0 && q.d_rn >= 0.0,
          ErrorCode::kInvalidArgument, "quadruplet distances must be nonnegative");
}

}  // namespace

double contrastive_loss(const PairExample& p, double alpha) {
  require(alpha > 0.0, ErrorCode::kConfig, "contrastive margin must be positive");
  require(p.d >= 0.0, ErrorCode::kInvalidArgument, "distance must be nonnegative");
  if (p.same_class) return p.d * p.d;
  const double slack = hinge(alpha - p.d);
  return slack * slack;
}

double triplet_loss(double d_rp, double d_rn, double m_trip) {
  require(d_rp >= 0.0 && d_rn >= 0.0, ErrorCode::kInvalidArgument,
          "distances must be nonnegative");
  return hinge(d_rp * d_rp - d_rn * d_rn + m_trip);
}

double classification_loss(const HeadLogits& logits, int coarse_id,
                           int fine_id, double lambda_c1, double lambda_c2) {
  check_head(logits.coarse, coarse_id, "coarse");
  check_head(logits.fine, fine_id, "fine");
  return lambda_c1 * cross_entropy(logits.coarse, coarse_id) +
         lambda_c2 * cross_entropy(logits.fine, fine_id);
}

double joint_distance_terms(const QuadrupletDistances& q, const HyperParams& h) {
  h.validate();
  check_distances(q);
  return ratio_hinge(q.d_rpm, q.d_rpp + h.m1 - h.m2) +
         ratio_hinge(q.d_rn, q.d_rpm + h.m2);
}

double joint_loss(const QuadrupletDistances& q, const HeadLogits& ref_logits,
                  int coarse_id, int fine_id, const HyperParams& h) {
  return joint_distance_terms(q, h) +
         classification_loss(ref_logits, coarse_id, fine_id, h.lambda_c1,
                             h.lambda_c2);
}

BatchDistanceStats batch_stats(std::span<const QuadrupletDistances> batch) {
  require(!batch.empty(), ErrorCode::kInvalidArgument,
          "batch statistics need a non-empty batch");
  const double b = static_cast<double>(batch.size());
  BatchDistanceStats s;
  for (const auto& q : batch) {
    s.mu_pp += q.d_rpp;
    s.mu_pm += q.d_rpm;
    s.mu_n += q.d_rn;
  }
  s.mu_pp /= b;
  s.mu_pm /= b;
  s.mu_n /= b;
  for (const auto& q : batch) {
    s.var_pp += (q.d_rpp - s.mu_pp) * (q.d_rpp - s.mu_pp);
    s.var_pm += (q.d_rpm - s.mu_pm) * (q.d_rpm - s.mu_pm);
    s.var_n += (q.d_rn - s.mu_n) * (q.d_rn - s.mu_n);
  }
  s.var_pp /= b;
  s.var_pm /= b;
  s.var_n /= b;
  return s;
}

double global_loss(std::span<const QuadrupletDistances> batch,
                   const HyperParams& h) {
  h.validate();
  for (const auto& q : batch) check_distances(q);
  const BatchDistanceStats s = batch_stats(batch);
  return s.var_pp + s.var_pm + s.var_n +
         h.lambda_g1 * hinge(s.mu_pp - s.mu_pm + h.t1 - h.t2) +
         h.lambda_g2 * hinge(s.mu_pm - s.mu_n + h.t2);
}

double combined_loss(std::span<const QuadrupletTerm> batch,
                     const HyperParams& h) {
  require(!batch.empty(), ErrorCode::kInvalidArgument,
          "combined loss needs a non-empty batch");
  std::vector<QuadrupletDistances> dists;
  dists.reserve(batch.size());
  double total = 0.0;
  for (const auto& t : batch) {
    total += joint_loss(t.dist, t.ref_logits, t.coarse, t.fine, h);
    dists.push_back(t.dist);
  }
  if (h.eta != 0.0) total += h.eta * global_loss(dists, h);
  return total;
}

CombinedLossGradient combined_loss_grad(
    std::span<const QuadrupletEmbeddings> embeddings,
    std::span<const HeadLogits> ref_logits, std::span<const ClassLabel> labels,
    const HyperParams& h) {
  h.validate();
  const std::size_t b = embeddings.size();
  require(b > 0, ErrorCode::kInvalidArgument,
          "combined loss needs a non-empty batch");
  require(ref_logits.size() == b && labels.size() == b,
          ErrorCode::kInvalidArgument,
          "embeddings, logits and labels must have equal batch length");
  const std::size_t k = embeddings[0][0].size();
  for (const auto& q : embeddings) {
    for (const auto& e : q) {
      require(e.size() == k, ErrorCode::kInvalidArgument,
              "quadruplet members must share one embedding dimension");
    }
  }

  // Members 1..3 paired with the reference, in the order pp, pm, n.
  std::vector<std::array<double, 3>> dist(b);
  std::vector<QuadrupletDistances> qd(b);
  for (std::size_t i = 0; i < b; ++i) {
    for (int m = 0; m < 3; ++m) {
      dist[i][m] = l2_distance(embeddings[i][0], embeddings[i][m + 1]);
    }
    qd[i] = {dist[i][0], dist[i][1], dist[i][2]};
  }

  CombinedLossGradient out;
  out.per_quadruplet.resize(b);
  // dL/dd for the (pp, pm, n) distances of every quadruplet.
  std::vector<std::array<double, 3>> coef(b, {0.0, 0.0, 0.0});

  const double c1 = h.m1 - h.m2;
  for (std::size_t i = 0; i < b; ++i) {
    const double d_pp = dist[i][0], d_pm = dist[i][1], d_n = dist[i][2];
    const double den1 = d_pp + c1;
    if (d_pm < den1) {
      coef[i][1] += -1.0 / den1;
      coef[i][0] += d_pm / (den1 * den1);
    }
    const double den2 = d_pm + h.m2;
    if (d_n < den2) {
      coef[i][2] += -1.0 / den2;
      coef[i][1] += d_n / (den2 * den2);
    }

    const HeadLogits& lg = ref_logits[i];
    check_head(lg.coarse, labels[i].coarse, "coarse");
    check_head(lg.fine, labels[i].fine, "fine");
    out.loss += joint_distance_terms(qd[i], h) +
                classification_loss(lg, labels[i].coarse, labels[i].fine,
                                    h.lambda_c1, h.lambda_c2);
    out.per_quadruplet[i].ref_logits.coarse =
        cross_entropy_grad(lg.coarse, labels[i].coarse, h.lambda_c1);
    out.per_quadruplet[i].ref_logits.fine =
        cross_entropy_grad(lg.fine, labels[i].fine, h.lambda_c2);
  }

  if (h.eta != 0.0) {
    const BatchDistanceStats s = batch_stats(qd);
    out.loss += h.eta * global_loss(qd, h);
    const double inv_b = 1.0 / static_cast<double>(b);
    const double mu[3] = {s.mu_pp, s.mu_pm, s.mu_n};
    const bool g1_active = s.mu_pp - s.mu_pm + h.t1 - h.t2 > 0.0;
    const bool g2_active = s.mu_pm - s.mu_n + h.t2 > 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      std::array<double, 3> g{};
      for (int m = 0; m < 3; ++m) g[m] = 2.0 * (dist[i][m] - mu[m]) * inv_b;
      if (g1_active) {
        g[0] += h.lambda_g1 * inv_b;
        g[1] -= h.lambda_g1 * inv_b;
      }
      if (g2_active) {
        g[1] += h.lambda_g2 * inv_b;
        g[2] -= h.lambda_g2 * inv_b;
      }
      for (int m = 0; m < 3; ++m) coef[i][m] += h.eta * g[m];
    }
  }

  // Chain through d = ||r - x||: dd/dr = (r - x) / d, dd/dx = -(r - x) / d.
  for (std::size_t i = 0; i < b; ++i) {
    auto& grad = out.per_quadruplet[i].embedding;
    for (auto& g : grad) g.assign(k, 0.0);
    const auto& r = embeddings[i][0];
    for (int m = 0; m < 3; ++m) {
      const double c = coef[i][m];
      if (c == 0.0) continue;
      const double d = dist[i][m];
      if (d == 0.0) {
        ++out.singular_terms;
        continue;
      }
      const auto& x = embeddings[i][m + 1];
      for (std::size_t j = 0; j < k; ++j) {
        const double u = c * (r[j] - x[j]) / d;
        grad[0][j] += u;
        grad[m + 1][j] -= u;
      }
    }
  }
  return out;
}

}  // namespace qdml
