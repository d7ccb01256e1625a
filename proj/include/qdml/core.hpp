#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qdml/error.hpp"

namespace qdml {

using Vector = std::vector<double>;

struct ClassLabel {
  int coarse = 0;
  int fine = 0;

  friend bool operator==(const ClassLabel&, const ClassLabel&) = default;
};

// One raw training example: feature vector plus its two-level label.
struct LabeledSample {
  std::int64_t id = 0;
  Vector x;
  int coarse = 0;
  int fine = 0;

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

// Coarse/fine label tree. parent[f] is the coarse class owning fine class f.
struct LabelHierarchy {
  int k1 = 0;
  int k2 = 0;
  std::vector<int> parent;

  // Throws ErrorCode::kInvalidArgument unless k1 >= 2, k2 >= k1 and parent
  // is a total map [0, k2) -> [0, k1).
  void validate() const;
  bool contains(const ClassLabel& label) const;

  friend bool operator==(const LabelHierarchy&, const LabelHierarchy&) = default;
};

// Immutable N x k matrix of embeddings with the labels and ids of its rows.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;

  // Validates shape, finiteness and N >= 1; throws kInvalidArgument.
  EmbeddingSet(std::size_t dim, Vector values, std::vector<ClassLabel> labels,
               std::vector<std::int64_t> ids);

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return dim_; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  const ClassLabel& label(std::size_t i) const { return labels_[i]; }
  int coarse(std::size_t i) const { return labels_[i].coarse; }
  int fine(std::size_t i) const { return labels_[i].fine; }
  std::int64_t id(std::size_t i) const { return ids_[i]; }

  const Vector& values() const noexcept { return values_; }
  const std::vector<ClassLabel>& labels() const noexcept { return labels_; }
  const std::vector<std::int64_t>& ids() const noexcept { return ids_; }

  // Copy with every row scaled by c > 0.
  EmbeddingSet scaled(double c) const;
  // Copy with every nonzero row divided by its l2 norm. Opt-in only; the
  // training and evaluation paths never normalize implicitly.
  EmbeddingSet l2_normalized() const;

  friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;

 private:
  std::size_t dim_ = 0;
  Vector values_;
  std::vector<ClassLabel> labels_;
  std::vector<std::int64_t> ids_;
};

// Row indices into an EmbeddingSet: reference, same-fine positive,
// same-coarse/different-fine positive, different-coarse negative.
struct QuadrupletIdx {
  std::size_t r = 0;
  std::size_t pp = 0;
  std::size_t pm = 0;
  std::size_t n = 0;

  friend bool operator==(const QuadrupletIdx&, const QuadrupletIdx&) = default;
};

// Structural check of the label constraints (no geometry involved).
bool satisfies_constraints(const QuadrupletIdx& q,
                           std::span<const ClassLabel> labels);

// Margins and loss weights. Defaults are the published training setup.
struct HyperParams {
  double m1 = 0.7;
  double m2 = 0.3;
  double t1 = 0.7;
  double t2 = 0.3;
  double lambda_c1 = 0.08;
  double lambda_c2 = 0.25;
  double lambda_g1 = 1.0;
  double lambda_g2 = 1.0;
  double eta = 1.0;
  double alpha = 0.5;
  double m_trip = 0.2;

  // Throws ErrorCode::kConfig unless m1 > m2 > 0 and every field is finite
  // and nonnegative.
  void validate() const;

  // Validating factory; the usual way to build a non-default set.
  static HyperParams checked(const HyperParams& h) {
    h.validate();
    return h;
  }

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

double l2_distance(std::span<const double> u, std::span<const double> v);

// Dense symmetric N x N matrix of row distances, zero on the diagonal.
class DistanceMatrix {
 public:
  explicit DistanceMatrix(const EmbeddingSet& s);

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const {
    return d_[i * n_ + j];
  }
  std::span<const double> row(std::size_t i) const {
    return {d_.data() + i * n_, n_};
  }

 private:
  std::size_t n_;
  Vector d_;
};

}  // namespace qdml
