#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "qdml/core.hpp"

namespace qdml {

using Rng = std::mt19937_64;

enum class MiningKind { kRandom, kMethod1, kMethod2 };

std::string_view to_string(MiningKind kind);
// Accepts "random", "method1", "method2"; throws kConfig otherwise.
MiningKind parse_mining_kind(std::string_view name);

struct MiningStrategy {
  MiningKind kind = MiningKind::kMethod2;
  std::uint64_t rng_seed = 0;

  friend bool operator==(const MiningStrategy&, const MiningStrategy&) = default;
};

// Per-class member lists of an EmbeddingSet, built once per snapshot.
class LabelIndex {
 public:
  explicit LabelIndex(const EmbeddingSet& s);

  const std::vector<std::size_t>& fine_members(int fine) const;
  const std::vector<std::size_t>& coarse_members(int coarse) const;

  // Rows with fine == fine(r), excluding r itself.
  std::vector<std::size_t> positive_pool(std::size_t r) const;
  // Rows with coarse == coarse(r) and fine != fine(r).
  std::vector<std::size_t> semi_positive_pool(std::size_t r) const;
  // Rows with coarse != coarse(r).
  std::vector<std::size_t> negative_pool(std::size_t r) const;

 private:
  const EmbeddingSet* set_;
  std::vector<std::vector<std::size_t>> by_fine_;
  std::vector<std::vector<std::size_t>> by_coarse_;
};

struct PositivePair {
  std::size_t pp = 0;
  std::size_t pm = 0;

  friend bool operator==(const PositivePair&, const PositivePair&) = default;
};

// Closest row of a different coarse class. Ties go to the smaller index.
// Throws kDegenerate when every row shares r's coarse class.
std::size_t select_hardest_negative(std::size_t r, const EmbeddingSet& s);

// For each positive pool: among members strictly farther from r than n is,
// the one closest to n. When no member is that far out, the member farthest
// from r.
PositivePair select_positives_method1(std::size_t r, std::size_t n,
                                      const EmbeddingSet& s);

// For each positive pool: the member closest to r that lies strictly
// outside the sphere of radius d(r, n) around r; otherwise the member
// farthest from r inside it.
PositivePair select_positives_method2(std::size_t r, std::size_t n,
                                      const EmbeddingSet& s);

// pp, pm and n drawn uniformly from their pools.
QuadrupletIdx select_random_quadruplet(std::size_t r, const EmbeddingSet& s,
                                       Rng& rng);

// Full quadruplet for reference r under the given strategy.
QuadrupletIdx mine_quadruplet(std::size_t r, const EmbeddingSet& s,
                              MiningKind kind, Rng& rng);

struct QuadrupletBatch {
  std::vector<QuadrupletIdx> quads;
  std::uint64_t source = 0;  // snapshot id of the EmbeddingSet mined from
};

// A reference whose pools were empty, with the class that caused it.
struct SkippedReference {
  std::size_t r = 0;
  std::string reason;
};

// Draws b references uniformly (without replacement while b <= N) and mines
// one quadruplet per reference. Degenerate references are resampled up to
// 10 * b times before kDegenerate is thrown. Skipped references are reported
// through `skipped` when non-null.
QuadrupletBatch build_quadruplet_batch(
    const EmbeddingSet& s, std::size_t b, const MiningStrategy& strat, Rng& rng,
    std::uint64_t snapshot_id = 0,
    std::vector<SkippedReference>* skipped = nullptr);

// Audit dump: one whitespace-separated record per quadruplet.
//   qdml-quadruplets 1
//   # index r_id pp_id pm_id n_id d_rpp d_rpm d_rn d_npp d_npm
//   <records>
// Skipped references appear as "# skipped r_id=<id>: <reason>" lines.
void write_quadruplet_dump(std::ostream& os, const EmbeddingSet& s,
                           const QuadrupletBatch& batch,
                           const std::vector<SkippedReference>& skipped = {});

}  // namespace qdml
