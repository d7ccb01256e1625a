#include <doctest.h>

#include <cmath>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "qdml/mining.hpp"

using namespace qdml;

namespace {

// Rows: 0 r(0,0) | 1 (3,0), 2 (1,0) fine-mates | 3 (0,3) same coarse |
// 4 (2,0), 5 (0,5) other coarse.
EmbeddingSet six_points() {
  return EmbeddingSet(2, {0, 0, 3, 0, 1, 0, 0, 3, 2, 0, 0, 5},
                      {{0, 0}, {0, 0}, {0, 0}, {0, 1}, {1, 2}, {1, 2}},
                      {10, 11, 12, 13, 14, 15});
}

// Reference 0 with four members in each of its three pools.
EmbeddingSet four_per_pool() {
  Vector v;
  std::vector<ClassLabel> lab;
  std::vector<std::int64_t> ids;
  auto add = [&](double x, double y, ClassLabel l) {
    v.push_back(x);
    v.push_back(y);
    lab.push_back(l);
    ids.push_back(static_cast<std::int64_t>(ids.size()));
  };
  add(0, 0, {0, 0});
  for (int i = 1; i <= 4; ++i) add(i, 0, {0, 0});
  for (int i = 1; i <= 4; ++i) add(0, i, {0, 1});
  for (int i = 1; i <= 4; ++i) add(-i, 0, {1, 2});
  return EmbeddingSet(2, std::move(v), std::move(lab), std::move(ids));
}

std::size_t error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return static_cast<std::size_t>(e.code());
  }
  return 0;
}

}  // namespace

TEST_CASE("hardest negative on the fixture") {
  const EmbeddingSet s = six_points();
  CHECK(select_hardest_negative(0, s) == 4);

  SUBCASE("single candidate") {
    const EmbeddingSet t(1, {0, 1, 9}, {{0, 0}, {0, 0}, {1, 1}}, {0, 1, 2});
    CHECK(select_hardest_negative(0, t) == 2);
  }
  SUBCASE("equidistant negatives resolve to the smaller index") {
    const EmbeddingSet t(1, {0, 2, -2}, {{0, 0}, {1, 1}, {1, 1}}, {0, 1, 2});
    CHECK(select_hardest_negative(0, t) == 1);
  }
  SUBCASE("no negative is degenerate") {
    const EmbeddingSet t(1, {0, 1}, {{0, 0}, {0, 1}}, {0, 1});
    CHECK(error_code([&] { select_hardest_negative(0, t); }) ==
          static_cast<std::size_t>(ErrorCode::kDegenerate));
  }
}

TEST_CASE("method1 on the fixture") {
  const EmbeddingSet s = six_points();
  CHECK(select_positives_method1(0, 4, s) == PositivePair{1, 3});

  SUBCASE("all fine-mates inside fall back to the farthest") {
    // Negative at distance 5: both mates (d=3, d=1) are inside.
    CHECK(select_positives_method1(0, 5, s).pp == 1);
  }
}

TEST_CASE("method2 on the fixture") {
  const EmbeddingSet s = six_points();
  CHECK(select_positives_method2(0, 4, s) == PositivePair{1, 3});

  SUBCASE("only mate inside the sphere") {
    const EmbeddingSet t(2, {0, 0, 1, 0, 0, 3, 2, 0},
                         {{0, 0}, {0, 0}, {0, 1}, {1, 2}}, {0, 1, 2, 3});
    CHECK(select_positives_method2(0, 3, t) == PositivePair{1, 2});
  }
  SUBCASE("boundary counts as inside") {
    // Mate at exactly d(r, n) = 2 and another at 2.5: the strict rule skips 2.
    const EmbeddingSet t(1, {0, 2, 2.5, 7, -2},
                         {{0, 0}, {0, 0}, {0, 0}, {0, 1}, {1, 2}}, {0, 1, 2, 3, 4});
    CHECK(select_positives_method2(0, 4, t).pp == 2);
  }
}

TEST_CASE("empty positive pools are degenerate") {
  const EmbeddingSet s = six_points();
  const auto code = static_cast<std::size_t>(ErrorCode::kDegenerate);
  CHECK(error_code([&] { select_positives_method2(5, 0, s); }) == code);
  CHECK(error_code([&] { select_positives_method1(3, 4, s); }) == code);
  Rng rng(1);
  CHECK(error_code([&] { select_random_quadruplet(3, s, rng); }) == code);
}

TEST_CASE("strategies match the exhaustive oracle on random sets") {
  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    CAPTURE(seed);
    oracle::RandomSetSpec spec;
    spec.k1 = 4 + static_cast<int>(seed % 3);
    spec.fines_per_coarse = 3 + static_cast<int>(seed % 2);
    spec.n_rows = 40 + 7 * seed;
    spec.dim = 2 + seed % 5;
    spec.integer_grid = seed % 3 == 0;
    const EmbeddingSet s = oracle::random_set(spec, seed);
    for (std::size_t r = 0; r < s.size(); ++r) {
      const auto pp = oracle::pp_pool(s, r);
      const auto pm = oracle::pm_pool(s, r);
      const std::size_t n = oracle::hardest_negative(s, r);
      REQUIRE(select_hardest_negative(r, s) == n);
      if (pp.empty() || pm.empty()) continue;
      const PositivePair m1 = select_positives_method1(r, n, s);
      CHECK(m1.pp == oracle::method1_pick(s, r, n, pp));
      CHECK(m1.pm == oracle::method1_pick(s, r, n, pm));
      const PositivePair m2 = select_positives_method2(r, n, s);
      CHECK(m2.pp == oracle::method2_pick(s, r, n, pp));
      CHECK(m2.pm == oracle::method2_pick(s, r, n, pm));
    }
  }
}

TEST_CASE("method2 output is outside the sphere or the farthest member") {
  const EmbeddingSet s = oracle::random_set({.n_rows = 120, .dim = 3}, 99);
  for (std::size_t r = 0; r < s.size(); ++r) {
    const auto pp = oracle::pp_pool(s, r);
    const auto pm = oracle::pm_pool(s, r);
    if (pp.empty() || pm.empty()) continue;
    const std::size_t n = select_hardest_negative(r, s);
    const PositivePair p = select_positives_method2(r, n, s);
    const double radius = oracle::dist(s, r, n);
    for (auto [chosen, pool] : {std::pair{p.pp, pp}, std::pair{p.pm, pm}}) {
      const bool outside = oracle::dist(s, r, chosen) > radius;
      bool farthest = true;
      for (std::size_t j : pool)
        if (oracle::dist(s, r, j) > oracle::dist(s, r, chosen)) farthest = false;
      CHECK((outside || farthest));
    }
  }
}

TEST_CASE("selections are invariant under positive scaling") {
  const EmbeddingSet s = oracle::random_set({.n_rows = 90, .dim = 4}, 5);
  for (double c : {0.01, 0.5, 3.0, 1e4}) {
    const EmbeddingSet t = s.scaled(c);
    for (std::size_t r = 0; r < s.size(); ++r) {
      const std::size_t n = select_hardest_negative(r, s);
      CHECK(select_hardest_negative(r, t) == n);
      if (oracle::pp_pool(s, r).empty() || oracle::pm_pool(s, r).empty()) continue;
      CHECK(select_positives_method1(r, n, t) == select_positives_method1(r, n, s));
      CHECK(select_positives_method2(r, n, t) == select_positives_method2(r, n, s));
    }
  }
}

TEST_CASE("random quadruplets") {
  SUBCASE("forced choice with singleton pools") {
    const EmbeddingSet s(1, {0, 1, 2, 3}, {{0, 0}, {0, 0}, {0, 1}, {1, 2}},
                         {0, 1, 2, 3});
    Rng rng(3);
    for (int i = 0; i < 20; ++i)
      CHECK(select_random_quadruplet(0, s, rng) == QuadrupletIdx{0, 1, 2, 3});
  }
  SUBCASE("uniform over pools of four") {
    const EmbeddingSet s = four_per_pool();
    Rng rng(2024);
    const int draws = 10000;
    std::vector<int> count(s.size(), 0);
    for (int i = 0; i < draws; ++i) {
      const QuadrupletIdx q = select_random_quadruplet(0, s, rng);
      CHECK(satisfies_constraints(q, s.labels()));
      ++count[q.pp];
      ++count[q.pm];
      ++count[q.n];
    }
    const double mean = draws / 4.0;
    const double sigma = std::sqrt(draws * 0.25 * 0.75);
    for (std::size_t j = 1; j < s.size(); ++j) {
      CAPTURE(j);
      CHECK(std::abs(count[j] - mean) <= 5.0 * sigma);
    }
  }
}

TEST_CASE("batch construction") {
  const EmbeddingSet s = six_points();

  SUBCASE("b = 1 with method2 yields the fixture quadruplet for reference 0") {
    bool seen = false;
    for (std::uint64_t seed = 0; seed < 200 && !seen; ++seed) {
      Rng rng(seed);
      const QuadrupletBatch b = build_quadruplet_batch(s, 1, {MiningKind::kMethod2, 0}, rng);
      REQUIRE(b.quads.size() == 1);
      if (b.quads[0].r != 0) continue;
      seen = true;
      CHECK(b.quads[0] == QuadrupletIdx{0, 1, 3, 4});
    }
    CHECK(seen);
  }

  SUBCASE("valid, distinct references, deterministic") {
    const EmbeddingSet t = oracle::random_set({.n_rows = 80, .dim = 3}, 17);
    for (MiningKind k : {MiningKind::kRandom, MiningKind::kMethod1, MiningKind::kMethod2}) {
      Rng a(9), b(9);
      for (int rep = 0; rep < 5; ++rep) {
        const QuadrupletBatch x = build_quadruplet_batch(t, 32, {k, 0}, a, 4);
        const QuadrupletBatch y = build_quadruplet_batch(t, 32, {k, 0}, b, 4);
        CHECK(x.quads == y.quads);
        CHECK(x.source == 4);
        std::set<std::size_t> refs;
        for (const auto& q : x.quads) {
          CHECK(satisfies_constraints(q, t.labels()));
          refs.insert(q.r);
        }
        CHECK(refs.size() == 32);
      }
    }
  }

  SUBCASE("b larger than N draws with replacement") {
    const EmbeddingSet t = four_per_pool();
    Rng rng(1);
    std::vector<SkippedReference> skipped;
    const QuadrupletBatch x =
        build_quadruplet_batch(t, 40, {MiningKind::kMethod1, 0}, rng, 0, &skipped);
    CHECK(x.quads.size() == 40);
    for (const auto& q : x.quads) CHECK(satisfies_constraints(q, t.labels()));
    CHECK_FALSE(skipped.empty());
  }

  SUBCASE("no valid reference exhausts the retry budget") {
    const EmbeddingSet t(1, {0, 1, 2}, {{0, 0}, {0, 1}, {1, 2}}, {0, 1, 2});
    Rng rng(0);
    CHECK(error_code([&] { build_quadruplet_batch(t, 2, {MiningKind::kRandom, 0}, rng); }) ==
          static_cast<std::size_t>(ErrorCode::kDegenerate));
  }
}

TEST_CASE("mining kind names") {
  for (MiningKind k : {MiningKind::kRandom, MiningKind::kMethod1, MiningKind::kMethod2})
    CHECK(parse_mining_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_mining_kind("hardest"), Error);
}

TEST_CASE("quadruplet dump") {
  const EmbeddingSet s = six_points();
  QuadrupletBatch b;
  b.quads.push_back({0, 1, 3, 4});
  std::ostringstream os;
  write_quadruplet_dump(os, s, b, {{5, "no semi-positive"}});
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "qdml-quadruplets 1");
  std::getline(is, line);
  CHECK(line.rfind("# index", 0) == 0);
  bool saw_skip = false, saw_record = false;
  while (std::getline(is, line)) {
    if (line.rfind("# skipped r_id=15", 0) == 0) saw_skip = true;
    if (line.rfind("0 10 11 13 14 ", 0) == 0) {
      saw_record = true;
      std::istringstream rec(line);
      std::string tok;
      for (int i = 0; i < 5; ++i) rec >> tok;
      double d_rpp, d_rpm, d_rn, d_npp, d_npm;
      rec >> d_rpp >> d_rpm >> d_rn >> d_npp >> d_npm;
      CHECK(d_rpp == 3.0);
      CHECK(d_rpm == 3.0);
      CHECK(d_rn == 2.0);
      CHECK(d_npp == 1.0);
      CHECK(d_npm == doctest::Approx(std::sqrt(13.0)));
    }
  }
  CHECK(saw_skip);
  CHECK(saw_record);
}
