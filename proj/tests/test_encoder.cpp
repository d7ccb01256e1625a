#include <doctest.h>

#include <cmath>
#include <sstream>

#include "qdml/encoder.hpp"

using namespace qdml;

namespace {

EncoderArch small_arch() {
  EncoderArch a;
  a.input_dim = 4;
  a.hidden = {5};
  a.embedding_dim = 3;
  a.k1 = 2;
  a.k2 = 4;
  return a;
}

Dataset fixture(std::uint64_t seed) {
  SyntheticSpec s;
  s.k1 = 2;
  s.fines_per_coarse = 2;
  s.samples_per_fine = 10;
  s.input_dim = 3;
  s.seed = seed;
  return generate_synthetic(s);
}

void set_identity(EncoderParams& p, const DenseLayer& l) {
  for (std::size_t o = 0; o < l.out; ++o) p.values()[l.weight(o, o)] = 1.0;
}

std::vector<QuadrupletInput> fixed_batch(const Dataset& d, std::uint64_t seed,
                                         std::size_t b) {
  const EmbeddingSet raw = d.as_embeddings();
  Rng rng(seed);
  const QuadrupletBatch qb = build_quadruplet_batch(raw, b, {MiningKind::kRandom, 0}, rng);
  std::vector<QuadrupletInput> out;
  for (const auto& q : qb.quads) {
    const auto& s = d.samples;
    out.push_back({{s[q.r].x, s[q.pp].x, s[q.pm].x, s[q.n].x}, {s[q.r].coarse, s[q.r].fine}});
  }
  return out;
}

TrainConfig small_config(std::uint64_t seed, MiningKind kind = MiningKind::kMethod2) {
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 8;
  c.embedding_dim = 4;
  c.hidden = {6};
  c.seed = seed;
  c.strategy.kind = kind;
  return c;
}

}  // namespace

TEST_CASE("parameter layout") {
  const EncoderParams p(small_arch());
  CHECK(p.size() == (5 * 4 + 5) + (3 * 5 + 3) + (2 * 3 + 2) + (4 * 3 + 4));
  CHECK(p.trunk().size() == 2);
  CHECK(p.trunk()[1].offset == 25);
  CHECK(p.coarse_head().in == 3);
  CHECK(p.fine_head().out == 4);
  CHECK(p.fine_head().offset + p.fine_head().size() == p.size());
  for (double v : p.values()) CHECK(v == 0.0);

  EncoderArch bad = small_arch();
  bad.embedding_dim = 0;
  CHECK_THROWS_AS(EncoderParams{bad}, Error);
}

TEST_CASE("forward") {
  const EncoderParams zero(small_arch());
  const ForwardOutput z = forward(zero, Vector{1, -2, 3, 4});
  CHECK(z.embedding == Vector(3, 0.0));
  CHECK(z.logits.coarse == Vector(2, 0.0));
  CHECK(z.logits.fine == Vector(4, 0.0));
  CHECK_THROWS_AS(forward(zero, Vector{1, 2}), Error);

  SUBCASE("identity layers pass positive inputs through") {
    EncoderArch a;
    a.input_dim = 3;
    a.hidden = {3};
    a.embedding_dim = 3;
    a.k1 = 2;
    a.k2 = 2;
    EncoderParams p(a);
    for (const auto& l : p.trunk()) set_identity(p, l);
    const Vector x{0.5, 2.0, 7.25};
    CHECK(forward(p, x).embedding == x);
  }
  SUBCASE("deterministic and shared across streams") {
    const EncoderParams p = EncoderParams::initialize(small_arch(), 3);
    const Vector x{0.1, -0.4, 0.9, 2.0};
    const ForwardOutput a = forward(p, x), b = forward(p, x);
    CHECK(a.embedding == b.embedding);
    CHECK(a.logits.fine == b.logits.fine);
    CHECK(EncoderParams::initialize(small_arch(), 3) == p);
    CHECK_FALSE(EncoderParams::initialize(small_arch(), 4) == p);
    for (const auto& l : p.trunk()) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
      for (std::size_t i = 0; i < l.size(); ++i)
        CHECK(std::abs(p.values()[l.offset + i]) <= bound);
    }
  }
}

TEST_CASE("weight sharing: backward uses the same forward as embed") {
  const Dataset d = fixture(2);
  EncoderArch a = small_arch();
  a.input_dim = 3;
  const EncoderParams p = EncoderParams::initialize(a, 8);
  const EmbeddingSet e = embed(p, d);
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    const Vector f = forward(p, d.samples[i].x).embedding;
    CHECK(Vector(e.row(i).begin(), e.row(i).end()) == f);
  }
}

TEST_CASE("backward flat region is exactly zero") {
  HyperParams h;
  h.lambda_c1 = h.lambda_c2 = 0.0;
  h.eta = 0.0;
  EncoderArch a = small_arch();
  a.hidden.clear();
  a.input_dim = 2;
  a.embedding_dim = 2;
  EncoderParams p(a);
  set_identity(p, p.trunk()[0]);
  const Vector r{0, 0}, pp{0.1, 0}, pm{0, 1}, n{-3, 0};
  const std::vector<QuadrupletInput> batch{{{r, pp, pm, n}, {0, 0}}};
  const BackwardResult br = backward(p, batch, h);
  CHECK(br.loss == 0.0);
  for (double g : br.grad) CHECK(g == 0.0);
}

TEST_CASE("gradient check on small random nets") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    CAPTURE(seed);
    GradCheckProblemSpec spec;
    spec.seed = seed;
    spec.hidden_width = seed % 3 == 0 ? 0 : 5;
    const GradCheckProblem prob = make_gradcheck_problem(spec);
    const GradCheckReport r = grad_check(prob.params, prob.batch(), HyperParams{});
    CHECK(r.checked == prob.params.size());
    CHECK(r.max_rel_error <= 1e-4);

    GradCheckOptions fault;
    fault.inject_fault = true;
    CHECK(grad_check(prob.params, prob.batch(), HyperParams{}, fault).max_rel_error > 0.1);
  }
}

TEST_CASE("gradient check subsets large nets") {
  GradCheckProblemSpec spec;
  spec.hidden_width = 40;
  spec.embedding_dim = 8;
  spec.seed = 5;
  const GradCheckProblem prob = make_gradcheck_problem(spec);
  GradCheckOptions opts;
  opts.max_coords = 50;
  const GradCheckReport r = grad_check(prob.params, prob.batch(), HyperParams{}, opts);
  CHECK(r.checked == 200);
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("finite differences are exact on a quadratic") {
  const Vector x{0.3, -1.2, 2.5, 4.0};
  auto f = [](std::span<const double> v) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i + 1.0) * v[i] * v[i] + v[i];
    return s;
  };
  Vector g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = 2.0 * (i + 1.0) * x[i] + 1.0;
  CHECK(finite_difference_check(f, x, g, 1e-3).max_rel_error <= 1e-10);
  g[2] *= 2.0;
  const GradCheckReport bad = finite_difference_check(f, x, g, 1e-3);
  CHECK(bad.max_rel_error > 0.1);
  CHECK(bad.worst_index == 2);
}

TEST_CASE("fine-head bias gradient is linear in its weight") {
  const GradCheckProblem prob = make_gradcheck_problem({});
  HyperParams h;
  h.lambda_c1 = 0.0;
  h.eta = 0.0;
  const BackwardResult one = backward(prob.params, prob.batch(), h);
  h.lambda_c2 *= 2.0;
  const BackwardResult two = backward(prob.params, prob.batch(), h);
  const DenseLayer& fh = prob.params.fine_head();
  for (std::size_t o = 0; o < fh.out; ++o) {
    const double g1 = one.grad[fh.bias(o)], g2 = two.grad[fh.bias(o)];
    CHECK(g2 == doctest::Approx(2.0 * g1).epsilon(1e-13));
  }
}

TEST_CASE("sgd with momentum") {
  Vector p{1.0, -2.0}, v{0.0, 0.0};
  const Vector g{0.5, 4.0};
  sgd_momentum_step(p, g, v, 0.1, 0.9);
  CHECK(p[0] == doctest::Approx(0.95));
  CHECK(p[1] == doctest::Approx(-2.4));
  CHECK(v == g);

  const Vector zero{0.0, 0.0};
  for (int i = 1; i <= 5; ++i) {
    sgd_momentum_step(p, zero, v, 0.1, 0.9);
    CHECK(v[1] == doctest::Approx(4.0 * std::pow(0.9, i)));
  }
  const Vector before = p;
  sgd_momentum_step(p, g, v, 0.0, 0.9);
  CHECK(p == before);
  Vector shorter{1.0};
  CHECK_THROWS_AS(sgd_momentum_step(shorter, g, v, 0.1, 0.9), Error);
}

TEST_CASE("training") {
  const Dataset d = fixture(4);

  SUBCASE("zero epochs returns the initialisation") {
    TrainConfig c = small_config(9);
    c.epochs = 0;
    const TrainResult r = train(d, c);
    CHECK(r.log.empty());
    EncoderArch a{3, {6}, 4, 2, 4};
    CHECK(r.params == EncoderParams::initialize(a, 9));
  }
  SUBCASE("deterministic per seed") {
    for (MiningKind k : {MiningKind::kRandom, MiningKind::kMethod1, MiningKind::kMethod2}) {
      const TrainResult a = train(d, small_config(1, k), &d);
      const TrainResult b = train(d, small_config(1, k), &d);
      CHECK(a.params == b.params);
      std::ostringstream ca, cb;
      write_metrics_csv(ca, a.log);
      write_metrics_csv(cb, b.log);
      CHECK(ca.str() == cb.str());
    }
  }
  SUBCASE("loss decreases on the fixture for every seed") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      CAPTURE(seed);
      const Dataset ds = fixture(seed);
      TrainConfig c;
      c.epochs = 60;
      c.batch_size = 16;
      c.seed = seed;
      const auto batch = fixed_batch(ds, seed, 20);
      const TrainResult r = train(ds, c);
      EncoderArch a{3, c.hidden, c.embedding_dim, 2, 4};
      const double before = backward(EncoderParams::initialize(a, seed), batch, c.hyper).loss;
      const double after = backward(r.params, batch, c.hyper).loss;
      CHECK(after < before);
      for (double v : r.params.values()) CHECK(std::isfinite(v));
    }
  }
  SUBCASE("metrics csv") {
    TrainConfig c = small_config(2);
    c.eval_every = 2;
    const TrainResult r = train(d, c, &d);
    REQUIRE(r.log.size() == 3);
    CHECK_FALSE(r.log[0].recall_at_1.has_value());
    CHECK(r.log[1].recall_at_1.has_value());
    std::ostringstream os;
    write_metrics_csv(os, r.log);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "epoch,loss,R@1,NMI");
    std::getline(is, line);
    CHECK(line.substr(line.size() - 2) == ",,");
  }
  SUBCASE("invalid configuration") {
    TrainConfig c = small_config(1);
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(train(d, c), Error);
    c = small_config(1);
    c.momentum = 1.0;
    CHECK_THROWS_AS(train(d, c), Error);
  }
  SUBCASE("exploding step aborts as non-finite") {
    TrainConfig c = small_config(1);
    c.learning_rate = 1e200;
    c.epochs = 20;
    try {
      train(d, c);
      FAIL("training did not abort");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kNonFinite);
    }
  }
}

TEST_CASE("checkpoint round trip") {
  const Dataset d = fixture(3);
  TrainConfig c = small_config(6, MiningKind::kMethod1);
  c.hidden = {5, 4};
  c.hyper.eta = 0.5;
  c.strategy.rng_seed = 77;
  const Checkpoint ck{train(d, c).params, c};
  std::ostringstream os;
  write_checkpoint(os, ck);
  std::istringstream is(os.str());
  const Checkpoint back = read_checkpoint(is);
  CHECK(back.params == ck.params);
  CHECK(back.config == ck.config);

  std::string text = os.str();
  text.replace(text.find("params"), 6, "parms");
  std::istringstream broken(text);
  try {
    read_checkpoint(broken);
    FAIL("accepted a malformed checkpoint");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParse);
  }
}
