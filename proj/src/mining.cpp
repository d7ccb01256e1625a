#include "qdml/mining.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "text_format.hpp"

namespace qdml {
namespace {

std::size_t uniform_index(Rng& rng, std::size_t n) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(rng);
}

void check_row(std::size_t i, const EmbeddingSet& s, const char* what) {
  require(i < s.size(), ErrorCode::kInvalidArgument,
          std::string(what) + " index " + std::to_string(i) +
              " out of range for " + std::to_string(s.size()) + " rows");
}

std::size_t hardest_negative(std::size_t r, const EmbeddingSet& s,
                             const std::vector<std::size_t>& pool) {
  if (pool.empty()) {
    fail(ErrorCode::kDegenerate,
         "no negative candidate outside coarse class " +
             std::to_string(s.coarse(r)));
  }
  std::size_t best = pool.front();
  double best_d = l2_distance(s.row(r), s.row(best));
  for (std::size_t j : pool) {
    const double d = l2_distance(s.row(r), s.row(j));
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

// Pool members strictly outside radius d(r, n) are ranked by distance to
// `anchor` (argmin); when none is outside, the member farthest from r wins.
// Pools are in ascending index order, so strict comparisons keep the
// smallest index on ties.
std::size_t pick_positive(std::size_t r, std::size_t n, std::size_t anchor,
                          const EmbeddingSet& s,
                          const std::vector<std::size_t>& pool) {
  const double radius = l2_distance(s.row(r), s.row(n));
  std::optional<std::size_t> outside;
  double outside_d = 0.0;
  std::size_t farthest = pool.front();
  double farthest_d = -1.0;
  for (std::size_t j : pool) {
    const double d_r = l2_distance(s.row(r), s.row(j));
    if (d_r > farthest_d) {
      farthest_d = d_r;
      farthest = j;
    }
    if (d_r > radius) {
      const double d_a = anchor == r ? d_r : l2_distance(s.row(anchor), s.row(j));
      if (!outside || d_a < outside_d) {
        outside = j;
        outside_d = d_a;
      }
    }
  }
  return outside.value_or(farthest);
}

void check_pools(std::size_t r, const EmbeddingSet& s,
                 const std::vector<std::size_t>& pp_pool,
                 const std::vector<std::size_t>& pm_pool) {
  if (pp_pool.empty()) {
    fail(ErrorCode::kDegenerate, "fine class " + std::to_string(s.fine(r)) +
                                     " has no second member");
  }
  if (pm_pool.empty()) {
    fail(ErrorCode::kDegenerate,
         "coarse class " + std::to_string(s.coarse(r)) +
             " has no fine class other than " + std::to_string(s.fine(r)));
  }
}

PositivePair select_positives(std::size_t r, std::size_t n,
                              const EmbeddingSet& s, const LabelIndex& idx,
                              MiningKind kind) {
  const auto pp_pool = idx.positive_pool(r);
  const auto pm_pool = idx.semi_positive_pool(r);
  check_pools(r, s, pp_pool, pm_pool);
  const std::size_t anchor = kind == MiningKind::kMethod1 ? n : r;
  return {pick_positive(r, n, anchor, s, pp_pool),
          pick_positive(r, n, anchor, s, pm_pool)};
}

QuadrupletIdx random_quadruplet(std::size_t r, const EmbeddingSet& s,
                                const LabelIndex& idx, Rng& rng) {
  const auto pp_pool = idx.positive_pool(r);
  const auto pm_pool = idx.semi_positive_pool(r);
  const auto n_pool = idx.negative_pool(r);
  check_pools(r, s, pp_pool, pm_pool);
  if (n_pool.empty()) {
    fail(ErrorCode::kDegenerate, "no negative candidate outside coarse class " +
                                     std::to_string(s.coarse(r)));
  }
  QuadrupletIdx q;
  q.r = r;
  q.pp = pp_pool[uniform_index(rng, pp_pool.size())];
  q.pm = pm_pool[uniform_index(rng, pm_pool.size())];
  q.n = n_pool[uniform_index(rng, n_pool.size())];
  return q;
}

QuadrupletIdx mine(std::size_t r, const EmbeddingSet& s, const LabelIndex& idx,
                   MiningKind kind, Rng& rng) {
  if (kind == MiningKind::kRandom) return random_quadruplet(r, s, idx, rng);
  const std::size_t n = hardest_negative(r, s, idx.negative_pool(r));
  const PositivePair p = select_positives(r, n, s, idx, kind);
  return {r, p.pp, p.pm, n};
}

}  // namespace

std::string_view to_string(MiningKind kind) {
  switch (kind) {
    case MiningKind::kRandom:
      return "random";
    case MiningKind::kMethod1:
      return "method1";
    case MiningKind::kMethod2:
      return "method2";
  }
  return "unknown";
}

MiningKind parse_mining_kind(std::string_view name) {
  if (name == "random") return MiningKind::kRandom;
  if (name == "method1") return MiningKind::kMethod1;
  if (name == "method2") return MiningKind::kMethod2;
  fail(ErrorCode::kConfig, "unknown mining strategy '" + std::string(name) +
                               "' (expected random, method1 or method2)");
}

LabelIndex::LabelIndex(const EmbeddingSet& s) : set_(&s) {
  int max_fine = -1, max_coarse = -1;
  for (const auto& l : s.labels()) {
    require(l.fine >= 0 && l.coarse >= 0, ErrorCode::kInvalidArgument,
            "class ids must be nonnegative");
    max_fine = std::max(max_fine, l.fine);
    max_coarse = std::max(max_coarse, l.coarse);
  }
  by_fine_.resize(static_cast<std::size_t>(max_fine + 1));
  by_coarse_.resize(static_cast<std::size_t>(max_coarse + 1));
  for (std::size_t i = 0; i < s.size(); ++i) {
    by_fine_[s.fine(i)].push_back(i);
    by_coarse_[s.coarse(i)].push_back(i);
  }
}

const std::vector<std::size_t>& LabelIndex::fine_members(int fine) const {
  return by_fine_.at(fine);
}

const std::vector<std::size_t>& LabelIndex::coarse_members(int coarse) const {
  return by_coarse_.at(coarse);
}

std::vector<std::size_t> LabelIndex::positive_pool(std::size_t r) const {
  std::vector<std::size_t> out;
  for (std::size_t j : by_fine_[set_->fine(r)]) {
    if (j != r) out.push_back(j);
  }
  return out;
}

std::vector<std::size_t> LabelIndex::semi_positive_pool(std::size_t r) const {
  std::vector<std::size_t> out;
  const int fine = set_->fine(r);
  for (std::size_t j : by_coarse_[set_->coarse(r)]) {
    if (set_->fine(j) != fine) out.push_back(j);
  }
  return out;
}

std::vector<std::size_t> LabelIndex::negative_pool(std::size_t r) const {
  std::vector<std::size_t> out;
  const int coarse = set_->coarse(r);
  for (std::size_t j = 0; j < set_->size(); ++j) {
    if (set_->coarse(j) != coarse) out.push_back(j);
  }
  return out;
}

std::size_t select_hardest_negative(std::size_t r, const EmbeddingSet& s) {
  check_row(r, s, "reference");
  return hardest_negative(r, s, LabelIndex(s).negative_pool(r));
}

PositivePair select_positives_method1(std::size_t r, std::size_t n,
                                      const EmbeddingSet& s) {
  check_row(r, s, "reference");
  check_row(n, s, "negative");
  return select_positives(r, n, s, LabelIndex(s), MiningKind::kMethod1);
}

PositivePair select_positives_method2(std::size_t r, std::size_t n,
                                      const EmbeddingSet& s) {
  check_row(r, s, "reference");
  check_row(n, s, "negative");
  return select_positives(r, n, s, LabelIndex(s), MiningKind::kMethod2);
}

QuadrupletIdx select_random_quadruplet(std::size_t r, const EmbeddingSet& s,
                                       Rng& rng) {
  check_row(r, s, "reference");
  return random_quadruplet(r, s, LabelIndex(s), rng);
}

QuadrupletIdx mine_quadruplet(std::size_t r, const EmbeddingSet& s,
                              MiningKind kind, Rng& rng) {
  check_row(r, s, "reference");
  return mine(r, s, LabelIndex(s), kind, rng);
}

QuadrupletBatch build_quadruplet_batch(const EmbeddingSet& s, std::size_t b,
                                       const MiningStrategy& strat, Rng& rng,
                                       std::uint64_t snapshot_id,
                                       std::vector<SkippedReference>* skipped) {
  require(b >= 1, ErrorCode::kInvalidArgument, "batch size must be at least 1");
  const std::size_t n_rows = s.size();
  const LabelIndex idx(s);
  const std::size_t budget = 10 * b;
  std::size_t retries = 0;

  QuadrupletBatch batch;
  batch.source = snapshot_id;
  batch.quads.reserve(b);

  const bool without_replacement = b <= n_rows;
  std::vector<std::size_t> order;
  if (without_replacement) {
    order.resize(n_rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::size_t cursor = 0;

  while (batch.quads.size() < b) {
    std::size_t r;
    if (without_replacement) {
      if (cursor == order.size()) {
        fail(ErrorCode::kDegenerate,
             "only " + std::to_string(batch.quads.size()) + " of " +
                 std::to_string(b) +
                 " references admit a valid quadruplet");
      }
      r = order[cursor++];
    } else {
      r = uniform_index(rng, n_rows);
    }
    try {
      batch.quads.push_back(mine(r, s, idx, strat.kind, rng));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerate) throw;
      if (skipped) skipped->push_back({r, e.what()});
      if (++retries > budget) {
        fail(ErrorCode::kDegenerate,
             std::string("reference resampling budget exhausted; last: ") +
                 e.what());
      }
    }
  }
  return batch;
}

void write_quadruplet_dump(std::ostream& os, const EmbeddingSet& s,
                           const QuadrupletBatch& batch,
                           const std::vector<SkippedReference>& skipped) {
  using detail::append_double;
  os << "qdml-quadruplets 1\n";
  os << "# index r_id pp_id pm_id n_id d_rpp d_rpm d_rn d_npp d_npm\n";
  for (const auto& sk : skipped) {
    os << "# skipped r_id=" << s.id(sk.r) << ": " << sk.reason << '\n';
  }
  std::string line;
  for (std::size_t i = 0; i < batch.quads.size(); ++i) {
    const QuadrupletIdx& q = batch.quads[i];
    line.clear();
    line += std::to_string(i);
    for (std::size_t m : {q.r, q.pp, q.pm, q.n}) {
      line += ' ';
      line += std::to_string(s.id(m));
    }
    const double d[] = {l2_distance(s.row(q.r), s.row(q.pp)),
                        l2_distance(s.row(q.r), s.row(q.pm)),
                        l2_distance(s.row(q.r), s.row(q.n)),
                        l2_distance(s.row(q.n), s.row(q.pp)),
                        l2_distance(s.row(q.n), s.row(q.pm))};
    for (double v : d) {
      line += ' ';
      append_double(line, v);
    }
    line += '\n';
    os << line;
  }
}

}  // namespace qdml
