#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qdml/core.hpp"

namespace qdml {

struct Dataset {
  std::size_t input_dim = 0;
  LabelHierarchy hierarchy;
  std::vector<LabeledSample> samples;

  // Hierarchy valid, every sample of length input_dim, finite, and labelled
  // consistently with the hierarchy. Throws kInvalidArgument.
  void validate() const;

  // Raw inputs viewed as an embedding set (used for mining/eval baselines).
  EmbeddingSet as_embeddings() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Gaussian class hierarchy: coarse centres, fine centres around them, and
// samples around the fine centres. When signal_dim is in [1, n) the class
// centres vary only in the first signal_dim coordinates while sample noise
// covers all n; signal_dim = 0 spreads centres over every coordinate.
struct SyntheticSpec {
  int k1 = 4;
  int fines_per_coarse = 3;
  int samples_per_fine = 10;
  std::size_t input_dim = 8;
  double coarse_center_scale = 4.0;
  double fine_center_scale = 1.5;
  double noise_scale = 0.5;
  std::size_t signal_dim = 0;
  std::uint64_t seed = 0;

  void validate() const;  // throws kConfig
};

// Fine ids are coarse * fines_per_coarse + j; sample ids are 0..N-1 in
// generation order.
Dataset generate_synthetic(const SyntheticSpec& spec);

struct ZeroShotSplit {
  std::vector<int> train_fine;
  std::vector<int> test_fine;
};

// First train_count ids of `ordered_fine` train, the rest test.
ZeroShotSplit split_zero_shot(const Dataset& d, std::span<const int> ordered_fine,
                              std::size_t train_count);
// Same with fine ids in natural order 0..k2-1.
ZeroShotSplit split_zero_shot(const Dataset& d, std::size_t train_count);

// Fine ids dealt round-robin across coarse classes: the first fine class of
// every coarse class (by id), then the second, and so on. Splitting this order
// keeps every coarse class on both sides when each has at least two children.
std::vector<int> round_robin_fine_order(const LabelHierarchy& h);

// Samples whose fine class is in `fine_ids`; the hierarchy is kept whole.
Dataset subset_by_fine(const Dataset& d, std::span<const int> fine_ids);

// Dataset text format:
//   qdml-dataset 1
//   n <n> k1 <k1> k2 <k2>
//   parent <parent[0]> ... <parent[k2-1]>
//   <id> <coarse> <fine> <x_1> ... <x_n>      (one line per sample)
void write_dataset(std::ostream& os, const Dataset& d);
Dataset read_dataset(std::istream& is);
void save_dataset(const std::string& path, const Dataset& d);
Dataset load_dataset(const std::string& path);

// Embedding text format:
//   qdml-embeddings 1
//   N <N> k <k>
//   <id> <coarse> <fine> <e_1> ... <e_k>      (N lines)
void write_embeddings(std::ostream& os, const EmbeddingSet& s);
EmbeddingSet read_embeddings(std::istream& is);
void save_embeddings(const std::string& path, const EmbeddingSet& s);
EmbeddingSet load_embeddings(const std::string& path);

}  // namespace qdml
