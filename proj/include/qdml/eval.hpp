#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qdml/core.hpp"

namespace qdml {

// Fraction of rows whose K nearest other rows (l2, ties by smaller index)
// contain a row of the same fine class. Needs N >= 2.
double recall_at_k(const EmbeddingSet& s, std::size_t k);

// recall_at_k for several K values with one neighbour ranking per query.
std::vector<double> recall_at(const EmbeddingSet& s,
                              std::span<const std::size_t> ks);

struct KMeansResult {
  std::vector<int> assignment;
  Vector centers;  // k_clusters x dim, row-major
  double inertia = 0.0;
};

struct KMeansOptions {
  std::size_t max_iterations = 100;
  std::size_t restarts = 10;
};

// Seeded greedy k-means++ initialisation, Lloyd iterations, then
// single-point transfers (each followed by Lloyd again) until no move lowers
// the inertia. The restart with the lowest inertia wins. Requires
// 1 <= k_clusters <= N.
KMeansResult kmeans(const EmbeddingSet& s, std::size_t k_clusters,
                    std::uint64_t seed, const KMeansOptions& opts = {});

// I(A; L) / sqrt(H(A) H(L)). Returns 0 when I = 0 and 1 when both
// partitions are trivial.
double nmi(std::span<const int> assignment, std::span<const int> labels);

struct EvalReport {
  std::vector<std::size_t> ks;
  std::vector<double> recall;  // recall[i] is Recall@ks[i]
  double nmi = 0.0;
  std::size_t n_queries = 0;
};

EvalReport evaluate(const EmbeddingSet& s, std::span<const std::size_t> ks,
                    std::uint64_t seed);

// "method,R@1,R@2,R@4,R@8,NMI" for the given K list.
std::string eval_csv_header(std::span<const std::size_t> ks);
std::string eval_csv_row(std::string_view method, const EvalReport& report);

}  // namespace qdml
