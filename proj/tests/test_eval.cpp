#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qdml/eval.hpp"

using namespace qdml;

namespace {

EmbeddingSet line_set(const Vector& xs, const std::vector<int>& fine) {
  std::vector<ClassLabel> lab;
  std::vector<std::int64_t> ids;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    lab.push_back({fine[i] / 2, fine[i]});
    ids.push_back(static_cast<std::int64_t>(i));
  }
  return EmbeddingSet(1, xs, lab, ids);
}

EmbeddingSet separated_four_class(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.05);
  Vector v;
  std::vector<ClassLabel> lab;
  std::vector<std::int64_t> ids;
  const double centres[4][2] = {{0, 0}, {10, 0}, {0, 10}, {10, 10}};
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < 6; ++i) {
      v.push_back(centres[c][0] + g(rng));
      v.push_back(centres[c][1] + g(rng));
      lab.push_back({c / 2, c});
      ids.push_back(static_cast<std::int64_t>(ids.size()));
    }
  }
  return EmbeddingSet(2, v, lab, ids);
}

}  // namespace

TEST_CASE("recall hand cases") {
  CHECK(recall_at_k(line_set({0, 0.1, 5, 5.1}, {0, 0, 1, 1}), 1) == 1.0);
  CHECK(recall_at_k(line_set({0, 0.1, 5, 5.1}, {0, 1, 0, 1}), 1) == 0.0);
  CHECK(recall_at_k(line_set({0, 0.1, 5, 5.1}, {0, 1, 0, 1}), 3) == 1.0);
  // Tie at distance 1 from the query 0: index 1 (other class) ranks first.
  const EmbeddingSet tie = line_set({0, 1, -1, 7}, {0, 2, 0, 2});
  CHECK(recall_at_k(tie, 1) == doctest::Approx(oracle::recall_at_k(tie, 1)));
  CHECK_THROWS_AS(recall_at_k(line_set({0}, {0}), 1), Error);
  CHECK_THROWS_AS(recall_at_k(line_set({0, 1}, {0, 0}), 0), Error);
}

TEST_CASE("recall matches the brute-force scan") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    oracle::RandomSetSpec spec;
    spec.n_rows = 20 + 12 * seed;
    spec.dim = 1 + seed % 4;
    spec.integer_grid = seed % 2 == 0;
    const EmbeddingSet s = oracle::random_set(spec, seed);
    const std::vector<std::size_t> ks{1, 2, 4, 8, 16};
    const auto got = recall_at(s, ks);
    double prev = 0.0;
    for (std::size_t i = 0; i < ks.size(); ++i) {
      CAPTURE(seed);
      CAPTURE(ks[i]);
      CHECK(got[i] == oracle::recall_at_k(s, ks[i]));
      CHECK(got[i] >= prev);
      prev = got[i];
      // Grid sets hold exact distance ties; only power-of-two scaling keeps
      // them exact in floating point.
      CHECK(recall_at_k(s.scaled(spec.integer_grid ? 0.25 : 0.37), ks[i]) == got[i]);
    }
  }
}

TEST_CASE("recall is invariant under a rotation") {
  const EmbeddingSet s = oracle::random_set({.n_rows = 50, .dim = 2}, 8);
  const double c = std::cos(0.7), sn = std::sin(0.7);
  Vector v;
  for (std::size_t i = 0; i < s.size(); ++i) {
    v.push_back(c * s.row(i)[0] - sn * s.row(i)[1]);
    v.push_back(sn * s.row(i)[0] + c * s.row(i)[1]);
  }
  const EmbeddingSet rot(2, v, s.labels(), s.ids());
  for (std::size_t k : {1, 2, 4}) CHECK(recall_at_k(rot, k) == recall_at_k(s, k));
}

TEST_CASE("k-means hand cases") {
  const EmbeddingSet s = line_set({0, 0.1, 10, 10.1}, {0, 0, 1, 1});
  const KMeansResult r = kmeans(s, 2, 1);
  CHECK(oracle::same_partition(r.assignment, {0, 0, 1, 1}));
  Vector centres = r.centers;
  std::sort(centres.begin(), centres.end());
  CHECK(centres[0] == doctest::Approx(0.05));
  CHECK(centres[1] == doctest::Approx(10.05));

  const KMeansResult full = kmeans(s, 4, 1);
  CHECK(full.inertia == 0.0);
  CHECK(oracle::same_partition(full.assignment, {0, 1, 2, 3}));

  CHECK_THROWS_AS(kmeans(s, 0, 1), Error);
  CHECK_THROWS_AS(kmeans(s, 5, 1), Error);
}

TEST_CASE("k-means reaches the exhaustive optimum on small sets") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    CAPTURE(seed);
    const std::size_t n = 4 + seed % 5;
    const EmbeddingSet s = oracle::random_set({.k1 = 2, .fines_per_coarse = 1, .n_rows = n, .dim = 2}, seed);
    for (int k = 1; k <= 3; ++k) {
      const KMeansResult r = kmeans(s, k, seed);
      CHECK(r.inertia == doctest::Approx(oracle::best_inertia(s, k)).epsilon(1e-9));
      CHECK(oracle::inertia(s, r.assignment, k) == doctest::Approx(r.inertia).epsilon(1e-9));
    }
  }
}

TEST_CASE("k-means on duplicated points keeps duplicates together") {
  const Vector base{0, 0.4, 3, 3.2, 9};
  Vector dup;
  std::vector<int> fine;
  for (double x : base) {
    dup.push_back(x);
    dup.push_back(x);
    fine.push_back(0);
    fine.push_back(0);
  }
  const EmbeddingSet s = line_set(dup, fine);
  const KMeansResult r = kmeans(s, 3, 5);
  for (std::size_t i = 0; i < base.size(); ++i)
    CHECK(r.assignment[2 * i] == r.assignment[2 * i + 1]);
  CHECK(r.inertia == doctest::Approx(oracle::best_inertia(line_set(base, {0, 0, 0, 0, 0}), 3) * 2));
}

TEST_CASE("k-means is seed deterministic") {
  const EmbeddingSet s = oracle::random_set({.n_rows = 100, .dim = 3}, 4);
  const KMeansResult a = kmeans(s, 6, 77), b = kmeans(s, 6, 77);
  CHECK(a.assignment == b.assignment);
  CHECK(a.centers == b.centers);
}

TEST_CASE("nmi properties") {
  const std::vector<int> l{0, 0, 1, 1, 2, 2};
  CHECK(nmi(l, l) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(nmi(std::vector<int>{5, 5, 9, 9, 7, 7}, l) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(nmi(std::vector<int>{0, 1, 0, 1}, std::vector<int>{0, 0, 1, 1}) == 0.0);
  CHECK(nmi(std::vector<int>{3, 3, 3}, std::vector<int>{1, 1, 1}) == 1.0);
  CHECK(nmi(std::vector<int>{0, 0, 0, 0}, std::vector<int>{0, 0, 1, 1}) == 0.0);
  CHECK_THROWS_AS(nmi(std::vector<int>{0}, std::vector<int>{0, 1}), Error);

  std::mt19937_64 rng(12);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + t % 30;
    std::uniform_int_distribution<int> ua(0, 1 + t % 5), ul(0, 1 + t % 4);
    std::vector<int> a(n), b(n);
    for (auto& x : a) x = ua(rng);
    for (auto& x : b) x = ul(rng);
    const double v = nmi(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0 + 1e-12);
    CHECK(v == doctest::Approx(nmi(b, a)).epsilon(1e-12));
    CHECK(v == doctest::Approx(oracle::nmi(a, b)).epsilon(1e-9));
    std::vector<int> renamed(a);
    for (auto& x : renamed) x = 100 - 3 * x;
    CHECK(nmi(renamed, b) == doctest::Approx(v).epsilon(1e-12));
  }
}

TEST_CASE("evaluate") {
  const std::vector<std::size_t> ks{1, 2, 4, 8};
  const EvalReport r = evaluate(separated_four_class(1), ks, 3);
  CHECK(r.recall == std::vector<double>{1.0, 1.0, 1.0, 1.0});
  CHECK(r.nmi == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.n_queries == 24);

  SUBCASE("single shared point carries no information") {
    const EmbeddingSet flat(1, Vector(6, 2.5),
                            {{0, 0}, {0, 0}, {0, 1}, {0, 1}, {1, 2}, {1, 2}},
                            {0, 1, 2, 3, 4, 5});
    CHECK(evaluate(flat, ks, 0).nmi == 0.0);
  }
  SUBCASE("csv row") {
    CHECK(eval_csv_header(ks) == "method,R@1,R@2,R@4,R@8,NMI");
    CHECK(eval_csv_row("method2", r) ==
          "method2,1.000000,1.000000,1.000000,1.000000,1.000000");
  }
  SUBCASE("one class is rejected") {
    CHECK_THROWS_AS(evaluate(line_set({0, 1, 2}, {0, 0, 0}), ks, 0), Error);
  }
}
