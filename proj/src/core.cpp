#include "qdml/core.hpp"

#include <cmath>
#include <string>

namespace qdml {

void LabelHierarchy::validate() const {
  require(k1 >= 2, ErrorCode::kInvalidArgument,
          "label hierarchy needs at least 2 coarse classes, got " +
              std::to_string(k1));
  require(k2 >= k1, ErrorCode::kInvalidArgument,
          "label hierarchy needs k2 >= k1");
  require(parent.size() == static_cast<std::size_t>(k2),
          ErrorCode::kInvalidArgument,
          "parent map must have one entry per fine class");
  for (int f = 0; f < k2; ++f) {
    int p = parent[f];
    if (p < 0 || p >= k1) {
      fail(ErrorCode::kInvalidArgument,
           "fine class " + std::to_string(f) + " has parent " +
               std::to_string(p) + " outside [0, " + std::to_string(k1) +
               ")");
    }
  }
}

bool LabelHierarchy::contains(const ClassLabel& label) const {
  return label.fine >= 0 && label.fine < k2 && label.coarse >= 0 &&
         label.coarse < k1 && parent[label.fine] == label.coarse;
}

EmbeddingSet::EmbeddingSet(std::size_t dim, Vector values,
                           std::vector<ClassLabel> labels,
                           std::vector<std::int64_t> ids)
    : dim_(dim),
      values_(std::move(values)),
      labels_(std::move(labels)),
      ids_(std::move(ids)) {
  require(!labels_.empty(), ErrorCode::kInvalidArgument,
          "embedding set must contain at least one row");
  require(dim_ >= 1, ErrorCode::kInvalidArgument,
          "embedding dimension must be positive");
  require(values_.size() == labels_.size() * dim_, ErrorCode::kInvalidArgument,
          "embedding matrix size does not match N x k");
  require(ids_.size() == labels_.size(), ErrorCode::kInvalidArgument,
          "embedding ids do not match row count");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      fail(ErrorCode::kInvalidArgument,
           "non-finite embedding value in row " + std::to_string(i / dim_));
    }
  }
}

EmbeddingSet EmbeddingSet::scaled(double c) const {
  require(c > 0.0 && std::isfinite(c), ErrorCode::kInvalidArgument,
          "scale factor must be positive");
  Vector v = values_;
  for (double& x : v) x *= c;
  return EmbeddingSet(dim_, std::move(v), labels_, ids_);
}

EmbeddingSet EmbeddingSet::l2_normalized() const {
  Vector v = values_;
  for (std::size_t i = 0; i < size(); ++i) {
    double norm = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) norm += v[i * dim_ + j] * v[i * dim_ + j];
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (std::size_t j = 0; j < dim_; ++j) v[i * dim_ + j] /= norm;
  }
  return EmbeddingSet(dim_, std::move(v), labels_, ids_);
}

bool satisfies_constraints(const QuadrupletIdx& q,
                           std::span<const ClassLabel> labels) {
  const std::size_t n = labels.size();
  if (q.r >= n || q.pp >= n || q.pm >= n || q.n >= n) return false;
  const ClassLabel& r = labels[q.r];
  const ClassLabel& pp = labels[q.pp];
  const ClassLabel& pm = labels[q.pm];
  const ClassLabel& neg = labels[q.n];
  return pp.fine == r.fine && q.pp != q.r && pm.coarse == r.coarse &&
         pm.fine != r.fine && neg.coarse != r.coarse;
}

void HyperParams::validate() const {
  const double all[] = {m1,        m2,        t1,  t2,    lambda_c1, lambda_c2,
                        lambda_g1, lambda_g2, eta, alpha, m_trip};
  for (double v : all) {
    require(std::isfinite(v) && v >= 0.0, ErrorCode::kConfig,
            "hyperparameters must be finite and nonnegative");
  }
  require(m2 > 0.0, ErrorCode::kConfig, "margin m2 must be positive");
  require(m1 > m2, ErrorCode::kConfig, "margin m1 must exceed m2");
}

double l2_distance(std::span<const double> u, std::span<const double> v) {
  require(u.size() == v.size(), ErrorCode::kInvalidArgument,
          "l2_distance: dimension mismatch (" + std::to_string(u.size()) +
              " vs " + std::to_string(v.size()) + ")");
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

DistanceMatrix::DistanceMatrix(const EmbeddingSet& s)
    : n_(s.size()), d_(s.size() * s.size(), 0.0) {
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) {
      const double d = l2_distance(s.row(i), s.row(j));
      d_[i * n_ + j] = d;
      d_[j * n_ + i] = d;
    }
  }
}

}  // namespace qdml
