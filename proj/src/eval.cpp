#include "qdml/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <utility>

namespace qdml {
namespace {

double squared_distance(std::span<const double> u, std::span<const double> v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    acc += d * d;
  }
  return acc;
}

// Rank (0-based, among the other rows) of the nearest same-fine row of
// query q under the (distance, index) order; empty when there is none.
std::optional<std::size_t> first_hit_rank(const EmbeddingSet& s, std::size_t q,
                           std::vector<double>& dist) {
  const std::size_t n = s.size();
  for (std::size_t j = 0; j < n; ++j) dist[j] = l2_distance(s.row(q), s.row(j));
  std::size_t best = n;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == q || s.fine(j) != s.fine(q)) continue;
    if (best == n || dist[j] < dist[best]) best = j;
  }
  if (best == n) return std::nullopt;
  std::size_t rank = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == q || j == best) continue;
    if (dist[j] < dist[best] || (dist[j] == dist[best] && j < best)) ++rank;
  }
  return rank;
}

struct Lloyd {
  const EmbeddingSet& s;
  std::size_t k;

  double assign(const Vector& centers, std::vector<int>& assignment) const {
    const std::size_t dim = s.dim();
    double inertia = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(
            s.row(i), std::span<const double>(centers.data() + c * dim, dim));
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      assignment[i] = best;
      inertia += best_d;
    }
    return inertia;
  }

  // Recomputes centers as member means. An empty cluster takes over the
  // point farthest from its own center among clusters with >1 member.
  void update(Vector& centers, std::vector<int>& assignment) const {
    const std::size_t dim = s.dim();
    std::vector<std::size_t> counts(k, 0);
    for (int a : assignment) ++counts[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = s.size();
      double far_d = -1.0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        const auto a = static_cast<std::size_t>(assignment[i]);
        if (counts[a] < 2) continue;
        const double d = squared_distance(
            s.row(i), std::span<const double>(centers.data() + a * dim, dim));
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == s.size()) continue;
      --counts[assignment[far]];
      assignment[far] = static_cast<int>(c);
      counts[c] = 1;
    }
    std::fill(centers.begin(), centers.end(), 0.0);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto row = s.row(i);
      double* dst = centers.data() + assignment[i] * dim;
      for (std::size_t j = 0; j < dim; ++j) dst[j] += row[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < dim; ++j) {
        centers[c * dim + j] /= static_cast<double>(counts[c]);
      }
    }
  }

  // Single-point transfers: x leaves cluster a for b whenever
  // n_b/(n_b+1)|x - c_b|^2 < n_a/(n_a-1)|x - c_a|^2, which lowers the total
  // inertia. Centers must be the member means on entry and stay so.
  // Returns the number of moves.
  std::size_t transfer(Vector& centers, std::vector<int>& assignment,
                       std::size_t max_passes) const {
    const std::size_t dim = s.dim();
    std::vector<std::size_t> counts(k, 0);
    for (int a : assignment) ++counts[a];
    auto center = [&](std::size_t c) {
      return std::span<double>(centers.data() + c * dim, dim);
    };
    std::size_t moves = 0;
    for (std::size_t pass = 0; pass < max_passes; ++pass) {
      std::size_t moved = 0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        const auto a = static_cast<std::size_t>(assignment[i]);
        if (counts[a] < 2) continue;
        const auto x = s.row(i);
        const double na = static_cast<double>(counts[a]);
        const double leave = na / (na - 1.0) * squared_distance(x, center(a));
        std::size_t to = a;
        double best = leave * (1.0 - 1e-12);
        for (std::size_t b = 0; b < k; ++b) {
          if (b == a) continue;
          const double nb = static_cast<double>(counts[b]);
          const double join = nb / (nb + 1.0) * squared_distance(x, center(b));
          if (join < best) {
            best = join;
            to = b;
          }
        }
        if (to == a) continue;
        const double nb = static_cast<double>(counts[to]);
        auto ca = center(a), cb = center(to);
        for (std::size_t j = 0; j < dim; ++j) {
          ca[j] = (na * ca[j] - x[j]) / (na - 1.0);
          cb[j] = (nb * cb[j] + x[j]) / (nb + 1.0);
        }
        --counts[a];
        ++counts[to];
        assignment[i] = static_cast<int>(to);
        ++moved;
      }
      moves += moved;
      if (moved == 0) break;
    }
    return moves;
  }

  // Lloyd iterations from the given centers until the assignment repeats.
  double converge(Vector& centers, std::vector<int>& assignment,
                  std::size_t max_iterations) const {
    double inertia = assign(centers, assignment);
    for (std::size_t it = 0; it < max_iterations; ++it) {
      std::vector<int> previous = assignment;
      update(centers, assignment);
      inertia = assign(centers, assignment);
      if (assignment == previous) break;
    }
    return inertia;
  }

  // Greedy k-means++: each new center is the best of 2 + floor(ln k)
  // D^2-weighted candidates by resulting potential.
  Vector plus_plus_init(std::mt19937_64& rng) const {
    const std::size_t n = s.size(), dim = s.dim();
    const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
    Vector centers(k * dim);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::vector<double> trial(n);
    std::size_t pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    for (std::size_t c = 0; c < k; ++c) {
      std::copy_n(s.row(pick).begin(), dim, centers.begin() + c * dim);
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        d2[i] = std::min(d2[i], squared_distance(s.row(i), s.row(pick)));
        total += d2[i];
      }
      if (c + 1 == k) break;
      if (total <= 0.0) {
        pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        continue;
      }
      std::uniform_real_distribution<double> u(0.0, total);
      double best_potential = std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < trials; ++t) {
        const double target = u(rng);
        double acc = 0.0;
        std::size_t cand = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          acc += d2[i];
          if (d2[i] > 0.0 && acc >= target) {
            cand = i;
            break;
          }
        }
        while (d2[cand] == 0.0 && cand > 0) --cand;
        double potential = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          potential += std::min(d2[i], squared_distance(s.row(i), s.row(cand)));
        }
        if (potential < best_potential) {
          best_potential = potential;
          pick = cand;
        }
      }
    }
    return centers;
  }
};

double entropy(const std::map<int, std::size_t>& counts, double n) {
  double h = 0.0;
  for (const auto& [_, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

double recall_at_k(const EmbeddingSet& s, std::size_t k) {
  const std::size_t ks[] = {k};
  return recall_at(s, ks).front();
}

std::vector<double> recall_at(const EmbeddingSet& s,
                              std::span<const std::size_t> ks) {
  require(s.size() >= 2, ErrorCode::kInvalidArgument,
          "Recall@K needs at least 2 embeddings");
  for (std::size_t k : ks) {
    require(k >= 1, ErrorCode::kInvalidArgument, "Recall@K needs K >= 1");
  }
  std::vector<std::size_t> hits(ks.size(), 0);
  std::vector<double> dist(s.size());
  for (std::size_t q = 0; q < s.size(); ++q) {
    const auto rank = first_hit_rank(s, q, dist);
    if (!rank) continue;
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (*rank < ks[i]) ++hits[i];
    }
  }
  std::vector<double> out(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    out[i] = static_cast<double>(hits[i]) / static_cast<double>(s.size());
  }
  return out;
}

KMeansResult kmeans(const EmbeddingSet& s, std::size_t k_clusters,
                    std::uint64_t seed, const KMeansOptions& opts) {
  require(k_clusters >= 1 && k_clusters <= s.size(),
          ErrorCode::kInvalidArgument,
          "k-means needs 1 <= clusters <= N (clusters=" +
              std::to_string(k_clusters) + ", N=" + std::to_string(s.size()) +
              ")");
  require(opts.restarts >= 1, ErrorCode::kInvalidArgument,
          "k-means needs at least one restart");
  const Lloyd lloyd{s, k_clusters};
  std::mt19937_64 rng(seed);

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t restart = 0; restart < opts.restarts; ++restart) {
    Vector centers = lloyd.plus_plus_init(rng);
    std::vector<int> assignment(s.size(), -1);
    double inertia = lloyd.converge(centers, assignment, opts.max_iterations);
    for (std::size_t round = 0; round < opts.max_iterations; ++round) {
      lloyd.update(centers, assignment);
      if (lloyd.transfer(centers, assignment, opts.max_iterations) == 0) break;
      inertia = lloyd.converge(centers, assignment, opts.max_iterations);
    }
    lloyd.update(centers, assignment);
    inertia = lloyd.assign(centers, assignment);
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.assignment = std::move(assignment);
      best.centers = std::move(centers);
    }
  }
  return best;
}

double nmi(std::span<const int> assignment, std::span<const int> labels) {
  require(assignment.size() == labels.size(), ErrorCode::kInvalidArgument,
          "NMI: assignment and labels differ in length");
  require(!assignment.empty(), ErrorCode::kInvalidArgument,
          "NMI needs at least one element");
  const double n = static_cast<double>(assignment.size());
  std::map<int, std::size_t> ca, cl;
  std::map<std::pair<int, int>, std::size_t> joint;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    ++ca[assignment[i]];
    ++cl[labels[i]];
    ++joint[{assignment[i], labels[i]}];
  }
  const double ha = entropy(ca, n);
  const double hl = entropy(cl, n);
  if (ha == 0.0 && hl == 0.0) return 1.0;
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    const double pij = static_cast<double>(c) / n;
    const double pi = static_cast<double>(ca[key.first]) / n;
    const double pj = static_cast<double>(cl[key.second]) / n;
    mi += pij * std::log(pij / (pi * pj));
  }
  if (mi <= 0.0 || ha == 0.0 || hl == 0.0) return 0.0;
  return std::clamp(mi / std::sqrt(ha * hl), 0.0, 1.0);
}

EvalReport evaluate(const EmbeddingSet& s, std::span<const std::size_t> ks,
                    std::uint64_t seed) {
  EvalReport report;
  report.ks.assign(ks.begin(), ks.end());
  report.recall = recall_at(s, ks);
  report.n_queries = s.size();

  std::set<int> distinct;
  std::vector<int> fine(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    fine[i] = s.fine(i);
    distinct.insert(fine[i]);
  }
  require(distinct.size() >= 2, ErrorCode::kInvalidArgument,
          "NMI needs at least 2 distinct fine classes");
  const KMeansResult km = kmeans(s, distinct.size(), seed);
  report.nmi = nmi(km.assignment, fine);
  return report;
}

std::string eval_csv_header(std::span<const std::size_t> ks) {
  std::string out = "method";
  for (std::size_t k : ks) out += ",R@" + std::to_string(k);
  out += ",NMI";
  return out;
}

std::string eval_csv_row(std::string_view method, const EvalReport& report) {
  std::string out(method);
  char buf[32];
  for (double r : report.recall) {
    std::snprintf(buf, sizeof(buf), ",%.6f", r);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), ",%.6f", report.nmi);
  out += buf;
  return out;
}

}  // namespace qdml
