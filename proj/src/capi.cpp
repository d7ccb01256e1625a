#include "qdml/qdml.h"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "qdml/data.hpp"
#include "qdml/encoder.hpp"
#include "qdml/eval.hpp"
#include "qdml/mining.hpp"

struct qdml_dataset {
  qdml::Dataset value;
};

struct qdml_embeddings {
  qdml::EmbeddingSet value;
};

struct qdml_model {
  qdml::Checkpoint checkpoint;
  std::vector<qdml::EpochMetrics> log;
};

namespace {

thread_local std::string g_last_error;

qdml_status set_error(qdml_status status, const char* what) {
  g_last_error = what;
  return status;
}

qdml_status to_status(qdml::ErrorCode code) {
  switch (code) {
    case qdml::ErrorCode::kInvalidArgument:
      return QDML_ERR_INVALID_ARGUMENT;
    case qdml::ErrorCode::kConfig:
      return QDML_ERR_CONFIG;
    case qdml::ErrorCode::kDegenerate:
      return QDML_ERR_DEGENERATE;
    case qdml::ErrorCode::kIo:
      return QDML_ERR_IO;
    case qdml::ErrorCode::kParse:
      return QDML_ERR_PARSE;
    case qdml::ErrorCode::kNonFinite:
      return QDML_ERR_NON_FINITE;
  }
  return QDML_ERR_INTERNAL;
}

template <typename F>
qdml_status guarded(F&& body) {
  try {
    body();
    return QDML_OK;
  } catch (const qdml::Error& e) {
    return set_error(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(QDML_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(QDML_ERR_INTERNAL, e.what());
  }
}

#define QDML_REQUIRE_ARG(cond)                                          \
  do {                                                                  \
    if (!(cond)) {                                                      \
      return set_error(QDML_ERR_INVALID_ARGUMENT,                       \
                       "invalid argument: " #cond);                     \
    }                                                                   \
  } while (0)

qdml::HyperParams from_c(const qdml_hyper_params& h) {
  qdml::HyperParams out;
  out.m1 = h.m1;
  out.m2 = h.m2;
  out.t1 = h.t1;
  out.t2 = h.t2;
  out.lambda_c1 = h.lambda_c1;
  out.lambda_c2 = h.lambda_c2;
  out.lambda_g1 = h.lambda_g1;
  out.lambda_g2 = h.lambda_g2;
  out.eta = h.eta;
  out.alpha = h.alpha;
  out.m_trip = h.m_trip;
  return out;
}

qdml_hyper_params to_c(const qdml::HyperParams& h) {
  return {h.m1,        h.m2,        h.t1,  h.t2,    h.lambda_c1, h.lambda_c2,
          h.lambda_g1, h.lambda_g2, h.eta, h.alpha, h.m_trip};
}

qdml::MiningKind from_c(qdml_mining_kind k) {
  switch (k) {
    case QDML_MINING_RANDOM:
      return qdml::MiningKind::kRandom;
    case QDML_MINING_METHOD1:
      return qdml::MiningKind::kMethod1;
    case QDML_MINING_METHOD2:
      return qdml::MiningKind::kMethod2;
  }
  qdml::fail(qdml::ErrorCode::kConfig, "unknown mining strategy value");
}

qdml_mining_kind to_c(qdml::MiningKind k) {
  switch (k) {
    case qdml::MiningKind::kRandom:
      return QDML_MINING_RANDOM;
    case qdml::MiningKind::kMethod1:
      return QDML_MINING_METHOD1;
    case qdml::MiningKind::kMethod2:
      return QDML_MINING_METHOD2;
  }
  return QDML_MINING_RANDOM;
}

qdml::TrainConfig from_c(const qdml_train_config& c) {
  qdml::require(c.n_hidden <= QDML_MAX_HIDDEN, qdml::ErrorCode::kConfig,
                "too many hidden layers");
  qdml::TrainConfig out;
  out.learning_rate = c.learning_rate;
  out.momentum = c.momentum;
  out.epochs = c.epochs;
  out.batch_size = c.batch_size;
  out.embedding_dim = c.embedding_dim;
  out.hidden.assign(c.hidden, c.hidden + c.n_hidden);
  out.snapshot_refresh_every = c.snapshot_refresh_every;
  out.batches_per_epoch = c.batches_per_epoch;
  out.eval_every = c.eval_every;
  out.seed = c.seed;
  out.strategy.kind = from_c(c.strategy);
  out.strategy.rng_seed = c.strategy_seed;
  out.hyper = from_c(c.hyper);
  return out;
}

qdml_train_config to_c(const qdml::TrainConfig& c) {
  qdml_train_config out{};
  out.learning_rate = c.learning_rate;
  out.momentum = c.momentum;
  out.epochs = c.epochs;
  out.batch_size = c.batch_size;
  out.embedding_dim = c.embedding_dim;
  out.n_hidden = std::min<std::size_t>(c.hidden.size(), QDML_MAX_HIDDEN);
  for (std::size_t i = 0; i < out.n_hidden; ++i) out.hidden[i] = c.hidden[i];
  out.snapshot_refresh_every = c.snapshot_refresh_every;
  out.batches_per_epoch = c.batches_per_epoch;
  out.eval_every = c.eval_every;
  out.seed = c.seed;
  out.strategy = to_c(c.strategy.kind);
  out.strategy_seed = c.strategy.rng_seed;
  out.hyper = to_c(c.hyper);
  return out;
}

qdml::QuadrupletBatch mine(const qdml::EmbeddingSet& s, qdml_mining_kind kind,
                           uint64_t seed, std::size_t count,
                           std::vector<qdml::SkippedReference>* skipped) {
  qdml::MiningStrategy strat{from_c(kind), seed};
  qdml::Rng rng(seed);
  return qdml::build_quadruplet_batch(s, count, strat, rng, 0, skipped);
}

std::size_t copy_text(const std::string& text, char* buf, std::size_t len) {
  if (buf && len > 0) {
    const std::size_t n = std::min(text.size(), len - 1);
    std::memcpy(buf, text.data(), n);
    buf[n] = '\0';
  }
  return text.size();
}

}  // namespace

extern "C" {

QDML_API const char* qdml_version(void) { return "0.1.0"; }

QDML_API const char* qdml_status_name(qdml_status status) {
  switch (status) {
    case QDML_OK:
      return "ok";
    case QDML_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case QDML_ERR_CONFIG:
      return "configuration error";
    case QDML_ERR_DEGENERATE:
      return "degenerate dataset";
    case QDML_ERR_IO:
      return "i/o error";
    case QDML_ERR_PARSE:
      return "parse error";
    case QDML_ERR_NON_FINITE:
      return "non-finite value";
    case QDML_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

QDML_API const char* qdml_last_error(void) { return g_last_error.c_str(); }

QDML_API qdml_status qdml_mining_kind_parse(const char* name, qdml_mining_kind* out) {
  QDML_REQUIRE_ARG(name && out);
  return guarded([&] { *out = to_c(qdml::parse_mining_kind(name)); });
}

QDML_API const char* qdml_mining_kind_name(qdml_mining_kind kind) {
  switch (kind) {
    case QDML_MINING_RANDOM:
      return "random";
    case QDML_MINING_METHOD1:
      return "method1";
    case QDML_MINING_METHOD2:
      return "method2";
  }
  return "unknown";
}

QDML_API void qdml_hyper_params_default(qdml_hyper_params* out) {
  if (out) *out = to_c(qdml::HyperParams{});
}

QDML_API qdml_status qdml_hyper_params_validate(const qdml_hyper_params* h) {
  QDML_REQUIRE_ARG(h);
  return guarded([&] { from_c(*h).validate(); });
}

QDML_API void qdml_synthetic_spec_default(qdml_synthetic_spec* out) {
  if (!out) return;
  const qdml::SyntheticSpec s;
  *out = {s.k1,
          s.fines_per_coarse,
          s.samples_per_fine,
          s.input_dim,
          s.coarse_center_scale,
          s.fine_center_scale,
          s.noise_scale,
          s.signal_dim,
          s.seed};
}

QDML_API qdml_status qdml_dataset_generate(const qdml_synthetic_spec* spec,
                                           qdml_dataset** out) {
  QDML_REQUIRE_ARG(spec && out);
  return guarded([&] {
    qdml::SyntheticSpec s;
    s.k1 = spec->k1;
    s.fines_per_coarse = spec->fines_per_coarse;
    s.samples_per_fine = spec->samples_per_fine;
    s.input_dim = spec->input_dim;
    s.coarse_center_scale = spec->coarse_center_scale;
    s.fine_center_scale = spec->fine_center_scale;
    s.noise_scale = spec->noise_scale;
    s.signal_dim = spec->signal_dim;
    s.seed = spec->seed;
    *out = new qdml_dataset{qdml::generate_synthetic(s)};
  });
}

QDML_API qdml_status qdml_dataset_load(const char* path, qdml_dataset** out) {
  QDML_REQUIRE_ARG(path && out);
  return guarded([&] { *out = new qdml_dataset{qdml::load_dataset(path)}; });
}

QDML_API qdml_status qdml_dataset_save(const qdml_dataset* d, const char* path) {
  QDML_REQUIRE_ARG(d && path);
  return guarded([&] { qdml::save_dataset(path, d->value); });
}

QDML_API qdml_status qdml_dataset_get_info(const qdml_dataset* d,
                                           qdml_dataset_info* out) {
  QDML_REQUIRE_ARG(d && out);
  *out = {d->value.samples.size(), d->value.input_dim, d->value.hierarchy.k1,
          d->value.hierarchy.k2};
  return QDML_OK;
}

QDML_API qdml_status qdml_dataset_split_zero_shot(const qdml_dataset* d,
                                                  size_t train_count,
                                                  qdml_dataset** train,
                                                  qdml_dataset** test) {
  QDML_REQUIRE_ARG(d && train && test);
  return guarded([&] {
    const qdml::ZeroShotSplit split = qdml::split_zero_shot(d->value, train_count);
    auto tr = std::make_unique<qdml_dataset>(
        qdml_dataset{qdml::subset_by_fine(d->value, split.train_fine)});
    auto te = std::make_unique<qdml_dataset>(
        qdml_dataset{qdml::subset_by_fine(d->value, split.test_fine)});
    *train = tr.release();
    *test = te.release();
  });
}

QDML_API qdml_status qdml_dataset_split_zero_shot_ordered(const qdml_dataset* d,
                                                          const int* ordered,
                                                          size_t n_ordered,
                                                          size_t train_count,
                                                          qdml_dataset** train,
                                                          qdml_dataset** test) {
  QDML_REQUIRE_ARG(d && ordered && train && test);
  return guarded([&] {
    const qdml::ZeroShotSplit split = qdml::split_zero_shot(
        d->value, std::span<const int>(ordered, n_ordered), train_count);
    auto tr = std::make_unique<qdml_dataset>(
        qdml_dataset{qdml::subset_by_fine(d->value, split.train_fine)});
    auto te = std::make_unique<qdml_dataset>(
        qdml_dataset{qdml::subset_by_fine(d->value, split.test_fine)});
    *train = tr.release();
    *test = te.release();
  });
}

QDML_API qdml_status qdml_dataset_round_robin_order(const qdml_dataset* d, int* out,
                                                    size_t capacity) {
  QDML_REQUIRE_ARG(d && out);
  return guarded([&] {
    const std::vector<int> order = qdml::round_robin_fine_order(d->value.hierarchy);
    qdml::require(capacity >= order.size(), qdml::ErrorCode::kInvalidArgument,
                  "order buffer holds " + std::to_string(capacity) + " ids, need " +
                      std::to_string(order.size()));
    std::copy(order.begin(), order.end(), out);
  });
}

QDML_API qdml_status qdml_dataset_as_embeddings(const qdml_dataset* d,
                                                qdml_embeddings** out) {
  QDML_REQUIRE_ARG(d && out);
  return guarded([&] { *out = new qdml_embeddings{d->value.as_embeddings()}; });
}

QDML_API void qdml_dataset_free(qdml_dataset* d) { delete d; }

QDML_API qdml_status qdml_embeddings_load(const char* path, qdml_embeddings** out) {
  QDML_REQUIRE_ARG(path && out);
  return guarded([&] { *out = new qdml_embeddings{qdml::load_embeddings(path)}; });
}

QDML_API qdml_status qdml_embeddings_save(const qdml_embeddings* e, const char* path) {
  QDML_REQUIRE_ARG(e && path);
  return guarded([&] { qdml::save_embeddings(path, e->value); });
}

QDML_API qdml_status qdml_embeddings_get_info(const qdml_embeddings* e,
                                              size_t* n_rows, size_t* dim) {
  QDML_REQUIRE_ARG(e);
  if (n_rows) *n_rows = e->value.size();
  if (dim) *dim = e->value.dim();
  return QDML_OK;
}

QDML_API void qdml_embeddings_free(qdml_embeddings* e) { delete e; }

QDML_API void qdml_train_config_default(qdml_train_config* out) {
  if (out) *out = to_c(qdml::TrainConfig{});
}

QDML_API qdml_status qdml_train(const qdml_dataset* train, const qdml_dataset* eval,
                                const qdml_train_config* config, qdml_model** out) {
  QDML_REQUIRE_ARG(train && config && out);
  return guarded([&] {
    const qdml::TrainConfig cfg = from_c(*config);
    qdml::TrainResult r = qdml::train(train->value, cfg, eval ? &eval->value : nullptr);
    *out = new qdml_model{{std::move(r.params), cfg}, std::move(r.log)};
  });
}

QDML_API qdml_status qdml_model_save_checkpoint(const qdml_model* m, const char* path) {
  QDML_REQUIRE_ARG(m && path);
  return guarded([&] { qdml::save_checkpoint(path, m->checkpoint); });
}

QDML_API qdml_status qdml_model_load_checkpoint(const char* path, qdml_model** out) {
  QDML_REQUIRE_ARG(path && out);
  return guarded([&] { *out = new qdml_model{qdml::load_checkpoint(path), {}}; });
}

QDML_API qdml_status qdml_model_write_metrics(const qdml_model* m, const char* path) {
  QDML_REQUIRE_ARG(m && path);
  return guarded([&] {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) qdml::fail(qdml::ErrorCode::kIo, std::string("cannot open '") + path + "' for writing");
    qdml::write_metrics_csv(os, m->log);
    if (!os) qdml::fail(qdml::ErrorCode::kIo, std::string("failed writing '") + path + "'");
  });
}

QDML_API qdml_status qdml_model_get_config(const qdml_model* m, qdml_train_config* out) {
  QDML_REQUIRE_ARG(m && out);
  *out = to_c(m->checkpoint.config);
  return QDML_OK;
}

QDML_API size_t qdml_model_param_count(const qdml_model* m) {
  return m ? m->checkpoint.params.size() : 0;
}

QDML_API size_t qdml_model_copy_params(const qdml_model* m, double* buf, size_t len) {
  if (!m) return 0;
  const auto theta = m->checkpoint.params.values();
  if (buf) std::copy_n(theta.begin(), std::min(len, theta.size()), buf);
  return theta.size();
}

QDML_API qdml_status qdml_model_embed(const qdml_model* m, const qdml_dataset* d,
                                      qdml_embeddings** out) {
  QDML_REQUIRE_ARG(m && d && out);
  return guarded([&] {
    *out = new qdml_embeddings{qdml::embed(m->checkpoint.params, d->value)};
  });
}

QDML_API void qdml_model_free(qdml_model* m) { delete m; }

QDML_API qdml_status qdml_evaluate(const qdml_embeddings* e, const size_t* ks,
                                   size_t n_ks, uint64_t seed, qdml_eval_report* out) {
  QDML_REQUIRE_ARG(e && ks && out);
  QDML_REQUIRE_ARG(n_ks >= 1 && n_ks <= QDML_MAX_KS);
  return guarded([&] {
    const qdml::EvalReport r = qdml::evaluate(e->value, {ks, n_ks}, seed);
    *out = qdml_eval_report{};
    out->n_ks = n_ks;
    for (std::size_t i = 0; i < n_ks; ++i) {
      out->ks[i] = r.ks[i];
      out->recall[i] = r.recall[i];
    }
    out->nmi = r.nmi;
    out->n_queries = r.n_queries;
  });
}

QDML_API size_t qdml_format_eval_header(const qdml_eval_report* r, char* buf, size_t len) {
  if (!r || r->n_ks > QDML_MAX_KS) return 0;
  return copy_text(qdml::eval_csv_header({r->ks, r->n_ks}), buf, len);
}

QDML_API size_t qdml_format_eval_row(const qdml_eval_report* r, const char* method,
                                     char* buf, size_t len) {
  if (!r || r->n_ks > QDML_MAX_KS) return 0;
  qdml::EvalReport rep;
  rep.ks.assign(r->ks, r->ks + r->n_ks);
  rep.recall.assign(r->recall, r->recall + r->n_ks);
  rep.nmi = r->nmi;
  rep.n_queries = r->n_queries;
  return copy_text(qdml::eval_csv_row(method ? method : "", rep), buf, len);
}

QDML_API qdml_status qdml_mine_batch(const qdml_embeddings* e, qdml_mining_kind kind,
                                     uint64_t seed, size_t count, qdml_quadruplet* out) {
  QDML_REQUIRE_ARG(e && out && count >= 1);
  return guarded([&] {
    const qdml::QuadrupletBatch b = mine(e->value, kind, seed, count, nullptr);
    for (std::size_t i = 0; i < b.quads.size(); ++i) {
      out[i] = {b.quads[i].r, b.quads[i].pp, b.quads[i].pm, b.quads[i].n};
    }
  });
}

QDML_API qdml_status qdml_mine_audit(const qdml_embeddings* e, qdml_mining_kind kind,
                                     uint64_t seed, size_t count, const char* path,
                                     size_t* n_skipped) {
  QDML_REQUIRE_ARG(e && path && count >= 1);
  return guarded([&] {
    std::vector<qdml::SkippedReference> skipped;
    const qdml::QuadrupletBatch b = mine(e->value, kind, seed, count, &skipped);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) qdml::fail(qdml::ErrorCode::kIo, std::string("cannot open '") + path + "' for writing");
    qdml::write_quadruplet_dump(os, e->value, b, skipped);
    if (!os) qdml::fail(qdml::ErrorCode::kIo, std::string("failed writing '") + path + "'");
    if (n_skipped) *n_skipped = skipped.size();
  });
}

QDML_API void qdml_gradcheck_config_default(qdml_gradcheck_config* out) {
  if (!out) return;
  const qdml::GradCheckProblemSpec p;
  const qdml::GradCheckOptions o;
  *out = qdml_gradcheck_config{};
  out->input_dim = p.input_dim;
  out->embedding_dim = p.embedding_dim;
  out->hidden_width = p.hidden_width;
  out->k1 = p.k1;
  out->fines_per_coarse = p.fines_per_coarse;
  out->batch_size = p.batch_size;
  out->step = o.step;
  out->seed = p.seed;
  out->inject_fault = 0;
  out->hyper = to_c(qdml::HyperParams{});
}

QDML_API qdml_status qdml_gradcheck(const qdml_gradcheck_config* config,
                                    qdml_gradcheck_report* out) {
  QDML_REQUIRE_ARG(config && out);
  return guarded([&] {
    qdml::GradCheckProblemSpec spec;
    spec.input_dim = config->input_dim;
    spec.embedding_dim = config->embedding_dim;
    spec.hidden_width = config->hidden_width;
    spec.k1 = config->k1;
    spec.fines_per_coarse = config->fines_per_coarse;
    spec.batch_size = config->batch_size;
    spec.seed = config->seed;
    const qdml::GradCheckProblem prob = qdml::make_gradcheck_problem(spec);
    qdml::GradCheckOptions opts;
    opts.step = config->step;
    opts.seed = config->seed;
    opts.inject_fault = config->inject_fault != 0;
    const auto batch = prob.batch();
    const qdml::GradCheckReport r =
        qdml::grad_check(prob.params, batch, qdml::HyperParams::checked(from_c(config->hyper)), opts);
    *out = {r.max_rel_error, r.worst_index, r.analytic, r.numeric, r.checked};
  });
}

}  // extern "C"
