#include "qdml/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>

#include "qdml/eval.hpp"
#include "text_format.hpp"

namespace qdml {
namespace {

double relu(double v) { return v > 0.0 ? v : 0.0; }

// out = W in + b
Vector dense(std::span<const double> theta, const DenseLayer& l,
             std::span<const double> in) {
  Vector out(l.out);
  for (std::size_t o = 0; o < l.out; ++o) {
    double acc = theta[l.bias(o)];
    const double* w = theta.data() + l.weight(o, 0);
    for (std::size_t i = 0; i < l.in; ++i) acc += w[i] * in[i];
    out[o] = acc;
  }
  return out;
}

// Accumulates dL/dW, dL/db into grad and returns dL/d(in).
Vector dense_backward(std::span<const double> theta, const DenseLayer& l,
                      std::span<const double> in, std::span<const double> g_out,
                      std::span<double> grad) {
  Vector g_in(l.in, 0.0);
  for (std::size_t o = 0; o < l.out; ++o) {
    const double g = g_out[o];
    if (g == 0.0) continue;
    grad[l.bias(o)] += g;
    double* gw = grad.data() + l.weight(o, 0);
    const double* w = theta.data() + l.weight(o, 0);
    for (std::size_t i = 0; i < l.in; ++i) {
      gw[i] += g * in[i];
      g_in[i] += g * w[i];
    }
  }
  return g_in;
}

struct Trace {
  std::vector<Vector> inputs;  // input seen by each trunk layer
  Vector embedding;
  HeadLogits logits;
};

Trace run_forward(const EncoderParams& p, std::span<const double> x) {
  require(x.size() == p.arch().input_dim, ErrorCode::kInvalidArgument,
          "encoder input has dimension " + std::to_string(x.size()) +
              ", expected " + std::to_string(p.arch().input_dim));
  const auto theta = p.values();
  const auto& trunk = p.trunk();
  Trace t;
  t.inputs.reserve(trunk.size());
  Vector a(x.begin(), x.end());
  for (std::size_t l = 0; l < trunk.size(); ++l) {
    t.inputs.push_back(a);
    a = dense(theta, trunk[l], a);
    if (l + 1 < trunk.size()) {
      for (double& v : a) v = relu(v);
    }
  }
  t.embedding = std::move(a);
  t.logits.coarse = dense(theta, p.coarse_head(), t.embedding);
  t.logits.fine = dense(theta, p.fine_head(), t.embedding);
  return t;
}

void trunk_backward(const EncoderParams& p, const Trace& t, Vector g,
                    std::span<double> grad) {
  const auto theta = p.values();
  const auto& trunk = p.trunk();
  for (std::size_t l = trunk.size(); l-- > 0;) {
    Vector g_in = dense_backward(theta, trunk[l], t.inputs[l], g, grad);
    if (l > 0) {
      // inputs[l] = relu(pre); relu'(pre) is 1 exactly where the output is > 0.
      const Vector& act = t.inputs[l];
      for (std::size_t i = 0; i < g_in.size(); ++i) {
        if (!(act[i] > 0.0)) g_in[i] = 0.0;
      }
    }
    g = std::move(g_in);
  }
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  if (v.empty()) return "-";
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<std::size_t> parse_sizes(std::string_view s) {
  std::vector<std::size_t> out;
  if (s == "-") return out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = std::min(s.find(',', start), s.size());
    auto v = detail::parse_number<std::size_t>(s.substr(start, comma - start));
    if (!v) fail(ErrorCode::kParse, "malformed layer list '" + std::string(s) + "'");
    out.push_back(*v);
    start = comma + 1;
  }
  return out;
}

}  // namespace

void EncoderArch::validate() const {
  require(input_dim >= 1, ErrorCode::kConfig, "encoder input_dim must be positive");
  require(embedding_dim >= 1, ErrorCode::kConfig, "embedding_dim must be positive");
  require(k1 >= 1 && k2 >= 1, ErrorCode::kConfig, "head sizes must be positive");
  for (std::size_t w : hidden) {
    require(w >= 1, ErrorCode::kConfig, "hidden layer widths must be positive");
  }
}

EncoderParams::EncoderParams(EncoderArch arch) : arch_(std::move(arch)) {
  arch_.validate();
  std::size_t offset = 0;
  auto add = [&](std::size_t in, std::size_t out) {
    DenseLayer l{in, out, offset};
    offset += l.size();
    return l;
  };
  std::size_t in = arch_.input_dim;
  for (std::size_t w : arch_.hidden) {
    trunk_.push_back(add(in, w));
    in = w;
  }
  trunk_.push_back(add(in, arch_.embedding_dim));
  coarse_head_ = add(arch_.embedding_dim, static_cast<std::size_t>(arch_.k1));
  fine_head_ = add(arch_.embedding_dim, static_cast<std::size_t>(arch_.k2));
  theta_.assign(offset, 0.0);
}

EncoderParams EncoderParams::initialize(EncoderArch arch, std::uint64_t seed) {
  EncoderParams p(std::move(arch));
  std::mt19937_64 rng(seed);
  auto fill = [&](const DenseLayer& l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = 0; i < l.size(); ++i) p.theta_[l.offset + i] = u(rng);
  };
  for (const auto& l : p.trunk_) fill(l);
  fill(p.coarse_head_);
  fill(p.fine_head_);
  return p;
}

ForwardOutput forward(const EncoderParams& p, std::span<const double> x) {
  Trace t = run_forward(p, x);
  return {std::move(t.embedding), std::move(t.logits)};
}

EmbeddingSet embed(const EncoderParams& p, const Dataset& d) {
  const std::size_t k = p.arch().embedding_dim;
  Vector values;
  values.reserve(d.samples.size() * k);
  std::vector<ClassLabel> labels;
  std::vector<std::int64_t> ids;
  for (const auto& s : d.samples) {
    const Trace t = run_forward(p, s.x);
    require(all_finite(t.embedding), ErrorCode::kNonFinite,
            "embedding of sample " + std::to_string(s.id) + " is not finite");
    values.insert(values.end(), t.embedding.begin(), t.embedding.end());
    labels.push_back({s.coarse, s.fine});
    ids.push_back(s.id);
  }
  return EmbeddingSet(k, std::move(values), std::move(labels), std::move(ids));
}

BackwardResult backward(const EncoderParams& p,
                        std::span<const QuadrupletInput> batch,
                        const HyperParams& h) {
  require(!batch.empty(), ErrorCode::kInvalidArgument, "backward needs a non-empty batch");
  const std::size_t b = batch.size();
  std::vector<std::array<Trace, 4>> traces(b);
  std::vector<QuadrupletEmbeddings> emb(b);
  std::vector<HeadLogits> logits(b);
  std::vector<ClassLabel> labels(b);
  for (std::size_t i = 0; i < b; ++i) {
    for (int m = 0; m < 4; ++m) {
      traces[i][m] = run_forward(p, batch[i].x[m]);
      require(all_finite(traces[i][m].embedding) && all_finite(traces[i][m].logits.coarse) &&
                  all_finite(traces[i][m].logits.fine),
              ErrorCode::kNonFinite, "forward pass produced a non-finite value");
      emb[i][m] = traces[i][m].embedding;
    }
    logits[i] = traces[i][0].logits;
    labels[i] = batch[i].ref_label;
  }

  const CombinedLossGradient lg = combined_loss_grad(emb, logits, labels, h);

  BackwardResult out;
  out.loss = lg.loss;
  out.singular_terms = lg.singular_terms;
  out.grad.assign(p.size(), 0.0);
  const auto theta = p.values();
  for (std::size_t i = 0; i < b; ++i) {
    const QuadrupletGradient& qg = lg.per_quadruplet[i];
    for (int m = 0; m < 4; ++m) {
      Vector g = qg.embedding[m];
      if (m == 0) {
        const Trace& t = traces[i][0];
        const Vector gc = dense_backward(theta, p.coarse_head(), t.embedding,
                                         qg.ref_logits.coarse, out.grad);
        const Vector gf = dense_backward(theta, p.fine_head(), t.embedding,
                                         qg.ref_logits.fine, out.grad);
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += gc[j] + gf[j];
      }
      trunk_backward(p, traces[i][m], std::move(g), out.grad);
    }
  }
  return out;
}

void sgd_momentum_step(std::span<double> params, std::span<const double> grad,
                       std::span<double> velocity, double lr, double momentum) {
  require(params.size() == grad.size() && params.size() == velocity.size(),
          ErrorCode::kInvalidArgument, "SGD step: parameter/gradient/velocity size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grad[i];
    params[i] -= lr * velocity[i];
  }
}

void TrainConfig::validate() const {
  require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorCode::kConfig,
          "learning_rate must be positive");
  require(momentum >= 0.0 && momentum < 1.0, ErrorCode::kConfig,
          "momentum must lie in [0, 1)");
  require(batch_size >= 1, ErrorCode::kConfig, "batch_size must be at least 1");
  require(embedding_dim >= 1, ErrorCode::kConfig, "embedding_dim must be positive");
  require(snapshot_refresh_every >= 1, ErrorCode::kConfig,
          "snapshot_refresh_every must be at least 1");
  hyper.validate();
}

TrainResult train(const Dataset& train_set, const TrainConfig& cfg,
                  const Dataset* eval_set) {
  cfg.validate();
  train_set.validate();
  if (eval_set) eval_set->validate();

  EncoderArch arch;
  arch.input_dim = train_set.input_dim;
  arch.hidden = cfg.hidden;
  arch.embedding_dim = cfg.embedding_dim;
  arch.k1 = train_set.hierarchy.k1;
  arch.k2 = train_set.hierarchy.k2;

  TrainResult result{EncoderParams::initialize(arch, cfg.seed), {}};
  EncoderParams& params = result.params;
  Vector velocity(params.size(), 0.0);

  std::seed_seq mining_seed{cfg.seed, cfg.strategy.rng_seed, std::uint64_t{0x51}};
  Rng rng(mining_seed);

  const std::size_t n = train_set.samples.size();
  const std::size_t batches = cfg.batches_per_epoch
                                  ? cfg.batches_per_epoch
                                  : (n + cfg.batch_size - 1) / cfg.batch_size;

  std::optional<EmbeddingSet> snapshot;
  std::uint64_t snapshot_id = 0;
  std::vector<QuadrupletInput> inputs;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch % cfg.snapshot_refresh_every == 0) {
      snapshot = embed(params, train_set);
      ++snapshot_id;
    }
    EpochMetrics m;
    m.epoch = epoch + 1;
    double loss_sum = 0.0;
    for (std::size_t bi = 0; bi < batches; ++bi) {
      const QuadrupletBatch qb = build_quadruplet_batch(
          *snapshot, cfg.batch_size, cfg.strategy, rng, snapshot_id);
      inputs.clear();
      for (const QuadrupletIdx& q : qb.quads) {
        const auto& s = train_set.samples;
        inputs.push_back({{s[q.r].x, s[q.pp].x, s[q.pm].x, s[q.n].x},
                          {s[q.r].coarse, s[q.r].fine}});
      }
      const BackwardResult br = backward(params, inputs, cfg.hyper);
      if (!std::isfinite(br.loss) || !all_finite(br.grad)) {
        fail(ErrorCode::kNonFinite, "non-finite loss or gradient at epoch " +
                                        std::to_string(epoch + 1) + ", batch " +
                                        std::to_string(bi + 1));
      }
      sgd_momentum_step(params.values(), br.grad, velocity, cfg.learning_rate,
                        cfg.momentum);
      if (!all_finite(params.values())) {
        fail(ErrorCode::kNonFinite, "parameters became non-finite at epoch " +
                                        std::to_string(epoch + 1));
      }
      loss_sum += br.loss;
      m.singular_terms += br.singular_terms;
    }
    m.loss = loss_sum / static_cast<double>(batches);
    if (eval_set && cfg.eval_every && (epoch + 1) % cfg.eval_every == 0) {
      const std::size_t ks[] = {1};
      const EvalReport r = evaluate(embed(params, *eval_set), ks, cfg.seed);
      m.recall_at_1 = r.recall[0];
      m.nmi = r.nmi;
    }
    result.log.push_back(m);
  }
  return result;
}

void write_metrics_csv(std::ostream& os, std::span<const EpochMetrics> log) {
  os << "epoch,loss,R@1,NMI\n";
  std::string line;
  for (const auto& m : log) {
    line = std::to_string(m.epoch) + ',' + detail::format_double(m.loss) + ',';
    if (m.recall_at_1) line += detail::format_double(*m.recall_at_1);
    line += ',';
    if (m.nmi) line += detail::format_double(*m.nmi);
    line += '\n';
    os << line;
  }
}

GradCheckReport finite_difference_check(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, std::span<const double> analytic, double step,
    std::span<const std::size_t> coords) {
  require(step > 0.0, ErrorCode::kInvalidArgument, "finite-difference step must be positive");
  require(analytic.size() == x.size(), ErrorCode::kInvalidArgument,
          "analytic gradient size does not match the point");
  std::vector<std::size_t> all;
  if (coords.empty()) {
    all.resize(x.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    coords = all;
  }
  Vector probe(x.begin(), x.end());
  GradCheckReport report;
  for (std::size_t i : coords) {
    const double saved = probe[i];
    probe[i] = saved + step;
    const double up = f(probe);
    probe[i] = saved - step;
    const double down = f(probe);
    probe[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
    const double err = std::abs(a - numeric) / denom;
    if (report.checked == 0 || err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_index = i;
      report.analytic = a;
      report.numeric = numeric;
    }
    ++report.checked;
  }
  return report;
}

GradCheckReport grad_check(const EncoderParams& p,
                           std::span<const QuadrupletInput> batch,
                           const HyperParams& h, const GradCheckOptions& opts) {
  Vector analytic = backward(p, batch, h).grad;
  if (opts.inject_fault && !analytic.empty()) {
    std::size_t worst = 0;
    for (std::size_t i = 1; i < analytic.size(); ++i) {
      if (std::abs(analytic[i]) > std::abs(analytic[worst])) worst = i;
    }
    analytic[worst] *= 2.0;
  }

  std::vector<std::size_t> coords;
  if (opts.max_coords != 0 && p.size() > opts.max_coords) {
    const std::size_t count = std::max<std::size_t>(opts.max_coords, 200);
    coords.resize(p.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    std::mt19937_64 rng(opts.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(std::min(count, coords.size()));
    std::sort(coords.begin(), coords.end());
  }

  EncoderParams probe = p;
  auto loss_at = [&](std::span<const double> theta) {
    std::copy(theta.begin(), theta.end(), probe.values().begin());
    std::vector<ForwardOutput> outs(batch.size() * 4);
    std::vector<QuadrupletTerm> terms(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      for (int m = 0; m < 4; ++m) outs[i * 4 + m] = forward(probe, batch[i].x[m]);
      const auto& r = outs[i * 4].embedding;
      terms[i].dist = {l2_distance(r, outs[i * 4 + 1].embedding),
                       l2_distance(r, outs[i * 4 + 2].embedding),
                       l2_distance(r, outs[i * 4 + 3].embedding)};
      terms[i].ref_logits = outs[i * 4].logits;
      terms[i].coarse = batch[i].ref_label.coarse;
      terms[i].fine = batch[i].ref_label.fine;
    }
    return combined_loss(terms, h);
  };
  return finite_difference_check(loss_at, p.values(), analytic, opts.step, coords);
}

std::vector<QuadrupletInput> GradCheckProblem::batch() const {
  std::vector<QuadrupletInput> out;
  out.reserve(quads.size());
  const auto& s = data.samples;
  for (const QuadrupletIdx& q : quads) {
    out.push_back({{s[q.r].x, s[q.pp].x, s[q.pm].x, s[q.n].x},
                   {s[q.r].coarse, s[q.r].fine}});
  }
  return out;
}

GradCheckProblem make_gradcheck_problem(const GradCheckProblemSpec& spec) {
  require(spec.batch_size >= 1, ErrorCode::kConfig, "gradcheck batch size must be at least 1");
  require(spec.fines_per_coarse >= 2, ErrorCode::kConfig,
          "gradcheck problem needs at least 2 fine classes per coarse class");
  SyntheticSpec ds;
  ds.k1 = spec.k1;
  ds.fines_per_coarse = spec.fines_per_coarse;
  ds.samples_per_fine = 3;
  ds.input_dim = spec.input_dim;
  ds.coarse_center_scale = 1.0;
  ds.fine_center_scale = 0.5;
  ds.noise_scale = 0.3;
  ds.seed = spec.seed;

  EncoderArch arch;
  arch.input_dim = spec.input_dim;
  arch.hidden.clear();
  if (spec.hidden_width) arch.hidden.push_back(spec.hidden_width);
  arch.embedding_dim = spec.embedding_dim;
  arch.k1 = spec.k1;
  arch.k2 = spec.k1 * spec.fines_per_coarse;

  GradCheckProblem prob{EncoderParams::initialize(arch, spec.seed ^ 0x9e3779b97f4a7c15ULL),
                        generate_synthetic(ds), {}};
  const EmbeddingSet raw = prob.data.as_embeddings();
  Rng rng(spec.seed);
  for (std::size_t i = 0; i < spec.batch_size; ++i) {
    const std::size_t r = std::uniform_int_distribution<std::size_t>(0, raw.size() - 1)(rng);
    prob.quads.push_back(select_random_quadruplet(r, raw, rng));
  }
  return prob;
}

void write_checkpoint(std::ostream& os, const Checkpoint& c) {
  using detail::format_double;
  const EncoderArch& a = c.params.arch();
  const TrainConfig& t = c.config;
  const HyperParams& h = t.hyper;
  os << "qdml-checkpoint 1\n";
  os << "arch input_dim " << a.input_dim << " hidden " << join_sizes(a.hidden)
     << " embedding_dim " << a.embedding_dim << " k1 " << a.k1 << " k2 " << a.k2
     << '\n';
  os << "config learning_rate " << format_double(t.learning_rate) << " momentum "
     << format_double(t.momentum) << " epochs " << t.epochs << " batch_size "
     << t.batch_size << " embedding_dim " << t.embedding_dim << " hidden "
     << join_sizes(t.hidden) << " snapshot_refresh_every "
     << t.snapshot_refresh_every << " batches_per_epoch " << t.batches_per_epoch
     << " eval_every " << t.eval_every << " seed " << t.seed << " strategy "
     << to_string(t.strategy.kind) << " strategy_seed " << t.strategy.rng_seed
     << '\n';
  os << "hyper m1 " << format_double(h.m1) << " m2 " << format_double(h.m2)
     << " t1 " << format_double(h.t1) << " t2 " << format_double(h.t2)
     << " lambda_c1 " << format_double(h.lambda_c1) << " lambda_c2 "
     << format_double(h.lambda_c2) << " lambda_g1 " << format_double(h.lambda_g1)
     << " lambda_g2 " << format_double(h.lambda_g2) << " eta "
     << format_double(h.eta) << " alpha " << format_double(h.alpha) << " m_trip "
     << format_double(h.m_trip) << '\n';
  os << "params " << c.params.size() << '\n';
  std::string line;
  for (double v : c.params.values()) {
    line = format_double(v);
    line += '\n';
    os << line;
  }
}

namespace {

// "<tag> key value key value ..." on a single line.
class KeyValueLine {
 public:
  KeyValueLine(std::string line, std::string_view tag, std::size_t line_no)
      : line_(std::move(line)), line_no_(line_no) {
    const auto tok = detail::split_ws(line_);
    if (tok.empty() || tok[0] != tag || tok.size() % 2 != 1) {
      error("expected '" + std::string(tag) + " <key> <value> ...'");
    }
    for (std::size_t i = 1; i < tok.size(); i += 2) {
      values_[std::string(tok[i])] = std::string(tok[i + 1]);
    }
  }

  const std::string& raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) error("missing key '" + key + "'");
    return it->second;
  }

  template <typename T>
  T get(const std::string& key) const {
    auto v = detail::parse_number<T>(raw(key));
    if (!v) error("malformed value for '" + key + "'");
    return *v;
  }

  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::kParse, "checkpoint line " + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::string line_;
  std::size_t line_no_;
  std::map<std::string, std::string> values_;
};

}  // namespace

Checkpoint read_checkpoint(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> std::string {
    if (!std::getline(is, line)) {
      fail(ErrorCode::kParse, "checkpoint truncated after line " + std::to_string(line_no));
    }
    ++line_no;
    return line;
  };
  if (next() != "qdml-checkpoint 1") {
    fail(ErrorCode::kParse, "checkpoint line 1: expected header 'qdml-checkpoint 1'");
  }
  const KeyValueLine arch_line(next(), "arch", line_no);
  EncoderArch arch;
  arch.input_dim = arch_line.get<std::size_t>("input_dim");
  arch.hidden = parse_sizes(arch_line.raw("hidden"));
  arch.embedding_dim = arch_line.get<std::size_t>("embedding_dim");
  arch.k1 = arch_line.get<int>("k1");
  arch.k2 = arch_line.get<int>("k2");

  const KeyValueLine cfg_line(next(), "config", line_no);
  TrainConfig cfg;
  cfg.learning_rate = cfg_line.get<double>("learning_rate");
  cfg.momentum = cfg_line.get<double>("momentum");
  cfg.epochs = cfg_line.get<std::size_t>("epochs");
  cfg.batch_size = cfg_line.get<std::size_t>("batch_size");
  cfg.embedding_dim = cfg_line.get<std::size_t>("embedding_dim");
  cfg.hidden = parse_sizes(cfg_line.raw("hidden"));
  cfg.snapshot_refresh_every = cfg_line.get<std::size_t>("snapshot_refresh_every");
  cfg.batches_per_epoch = cfg_line.get<std::size_t>("batches_per_epoch");
  cfg.eval_every = cfg_line.get<std::size_t>("eval_every");
  cfg.seed = cfg_line.get<std::uint64_t>("seed");
  cfg.strategy.kind = parse_mining_kind(cfg_line.raw("strategy"));
  cfg.strategy.rng_seed = cfg_line.get<std::uint64_t>("strategy_seed");

  const KeyValueLine hyper_line(next(), "hyper", line_no);
  HyperParams& h = cfg.hyper;
  h.m1 = hyper_line.get<double>("m1");
  h.m2 = hyper_line.get<double>("m2");
  h.t1 = hyper_line.get<double>("t1");
  h.t2 = hyper_line.get<double>("t2");
  h.lambda_c1 = hyper_line.get<double>("lambda_c1");
  h.lambda_c2 = hyper_line.get<double>("lambda_c2");
  h.lambda_g1 = hyper_line.get<double>("lambda_g1");
  h.lambda_g2 = hyper_line.get<double>("lambda_g2");
  h.eta = hyper_line.get<double>("eta");
  h.alpha = hyper_line.get<double>("alpha");
  h.m_trip = hyper_line.get<double>("m_trip");

  EncoderParams params(arch);
  const auto tok = detail::split_ws(next());
  if (tok.size() != 2 || tok[0] != "params") {
    fail(ErrorCode::kParse, "checkpoint line " + std::to_string(line_no) +
                                ": expected 'params <count>'");
  }
  const auto count = detail::parse_number<std::size_t>(tok[1]);
  if (!count || *count != params.size()) {
    fail(ErrorCode::kParse, "checkpoint parameter count does not match the architecture");
  }
  auto theta = params.values();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const auto v = detail::parse_number<double>(next());
    if (!v || !std::isfinite(*v)) {
      fail(ErrorCode::kParse, "checkpoint line " + std::to_string(line_no) +
                                  ": malformed parameter value");
    }
    theta[i] = *v;
  }
  return {std::move(params), std::move(cfg)};
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  write_checkpoint(out, c);
  if (!out) fail(ErrorCode::kIo, "failed writing '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "' for reading");
  return read_checkpoint(in);
}

}  // namespace qdml
