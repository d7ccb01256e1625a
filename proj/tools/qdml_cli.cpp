// qdml command-line experiment runner. Links only the C API.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qdml/qdml.h"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitThreshold = 1;
constexpr int kExitInput = 2;

struct CliError {
  int exit_code;
  std::string message;
};

[[noreturn]] void fail_input(const std::string& msg) { throw CliError{kExitInput, msg}; }

int exit_code_for(qdml_status s) {
  switch (s) {
    case QDML_OK:
      return kExitOk;
    case QDML_ERR_INVALID_ARGUMENT:
    case QDML_ERR_CONFIG:
    case QDML_ERR_DEGENERATE:
    case QDML_ERR_IO:
    case QDML_ERR_PARSE:
      return kExitInput;
    default:
      return kExitThreshold;
  }
}

void check(qdml_status s, const std::string& what) {
  if (s != QDML_OK) {
    throw CliError{exit_code_for(s),
                   what + ": " + qdml_status_name(s) + ": " + qdml_last_error()};
  }
}

struct DatasetDel {
  void operator()(qdml_dataset* p) const { qdml_dataset_free(p); }
};
struct EmbeddingsDel {
  void operator()(qdml_embeddings* p) const { qdml_embeddings_free(p); }
};
struct ModelDel {
  void operator()(qdml_model* p) const { qdml_model_free(p); }
};
using DatasetPtr = std::unique_ptr<qdml_dataset, DatasetDel>;
using EmbeddingsPtr = std::unique_ptr<qdml_embeddings, EmbeddingsDel>;
using ModelPtr = std::unique_ptr<qdml_model, ModelDel>;

// ---- config ----------------------------------------------------------------

// Reads keys out of one JSON object and rejects any it did not consume.
class Section {
 public:
  Section(const json& obj, std::string name) : name_(std::move(name)) {
    if (!obj.is_null() && !obj.is_object()) fail_input("'" + name_ + "' must be an object");
    if (obj.is_object()) obj_ = &obj;
  }

  template <class T>
  bool get(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return false;
    try {
      out = obj_->at(key).get<T>();
    } catch (const json::exception&) {
      fail_input("'" + name_ + "." + key + "' has the wrong type");
    }
    return true;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return nullptr;
    return &obj_->at(key);
  }

  void finish() const {
    if (!obj_) return;
    for (const auto& [k, v] : obj_->items()) {
      if (!seen_.count(k)) fail_input("unknown key '" + name_ + "." + k + "'");
    }
  }

 private:
  std::string name_;
  const json* obj_ = nullptr;
  std::set<std::string> seen_;
};

const json& or_null(const json* j) {
  static const json null_json;
  return j ? *j : null_json;
}

enum class Source { kNone, kSynthetic, kDataset, kEmbeddings };

struct Experiment {
  std::string raw_text;  // config bytes as read, echoed verbatim
  uint64_t seed = 0;
  Source source = Source::kNone;
  qdml_synthetic_spec synthetic{};
  std::string data_path;
  size_t train_count = 0;  // 0 = half of the fine classes
  std::string order = "natural";
  qdml_train_config train{};
  std::vector<size_t> ks{1, 2, 4, 8};
  std::string method;  // empty = strategy name
  size_t audit_count = 100;
  qdml_gradcheck_config gradcheck{};
  double threshold = 1e-4;
};

void read_hyper(const json* obj, qdml_hyper_params& h) {
  Section s(or_null(obj), "train.hyper");
  s.get("m1", h.m1);
  s.get("m2", h.m2);
  s.get("t1", h.t1);
  s.get("t2", h.t2);
  s.get("lambda_c1", h.lambda_c1);
  s.get("lambda_c2", h.lambda_c2);
  s.get("lambda_g1", h.lambda_g1);
  s.get("lambda_g2", h.lambda_g2);
  s.get("eta", h.eta);
  s.get("alpha", h.alpha);
  s.get("m_trip", h.m_trip);
  s.finish();
}

qdml_mining_kind parse_strategy(const std::string& name) {
  qdml_mining_kind k;
  if (qdml_mining_kind_parse(name.c_str(), &k) != QDML_OK) {
    fail_input("unknown strategy '" + name + "' (random, method1, method2)");
  }
  return k;
}

std::string resolve_path(const std::string& p, const fs::path& base) {
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal().string();
}

Experiment load_experiment(const std::string& config_path, std::optional<uint64_t> seed_flag) {
  Experiment ex;
  qdml_synthetic_spec_default(&ex.synthetic);
  qdml_train_config_default(&ex.train);
  qdml_gradcheck_config_default(&ex.gradcheck);

  json root = json::object();
  fs::path base = fs::current_path();
  if (!config_path.empty()) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) fail_input("cannot open config '" + config_path + "'");
    ex.raw_text.assign(std::istreambuf_iterator<char>(in), {});
    try {
      root = json::parse(ex.raw_text);
    } catch (const json::parse_error& e) {
      fail_input("config '" + config_path + "' is not valid JSON: " + e.what());
    }
    base = fs::absolute(config_path).parent_path();
  }

  Section top(root, "config");
  top.get("seed", ex.seed);
  if (seed_flag) ex.seed = *seed_flag;
  ex.synthetic.seed = ex.seed;
  ex.train.seed = ex.seed;
  ex.train.strategy_seed = ex.seed;
  ex.gradcheck.seed = ex.seed;

  if (const json* data = top.child("data")) {
    Section s(*data, "data");
    int sources = 0;
    if (const json* syn = s.child("synthetic")) {
      ++sources;
      ex.source = Source::kSynthetic;
      Section ss(*syn, "data.synthetic");
      auto& sp = ex.synthetic;
      ss.get("k1", sp.k1);
      ss.get("fines_per_coarse", sp.fines_per_coarse);
      ss.get("samples_per_fine", sp.samples_per_fine);
      ss.get("input_dim", sp.input_dim);
      ss.get("coarse_center_scale", sp.coarse_center_scale);
      ss.get("fine_center_scale", sp.fine_center_scale);
      ss.get("noise_scale", sp.noise_scale);
      ss.get("signal_dim", sp.signal_dim);
      ss.get("seed", sp.seed);
      ss.finish();
    }
    std::string path;
    if (s.get("dataset", path)) {
      ++sources;
      ex.source = Source::kDataset;
      ex.data_path = resolve_path(path, base);
    }
    if (s.get("embeddings", path)) {
      ++sources;
      ex.source = Source::kEmbeddings;
      ex.data_path = resolve_path(path, base);
    }
    s.finish();
    if (sources != 1) fail_input("'data' must name exactly one of synthetic, dataset, embeddings");
  }

  if (const json* split = top.child("split")) {
    Section s(*split, "split");
    s.get("train_count", ex.train_count);
    s.get("order", ex.order);
    s.finish();
    if (ex.order != "natural" && ex.order != "round_robin") {
      fail_input("'split.order' must be natural or round_robin");
    }
  }

  {
    Section s(or_null(top.child("train")), "train");
    auto& c = ex.train;
    s.get("learning_rate", c.learning_rate);
    s.get("momentum", c.momentum);
    s.get("epochs", c.epochs);
    s.get("batch_size", c.batch_size);
    s.get("embedding_dim", c.embedding_dim);
    std::vector<size_t> hidden;
    if (s.get("hidden", hidden)) {
      if (hidden.size() > QDML_MAX_HIDDEN) fail_input("'train.hidden' lists too many layers");
      c.n_hidden = hidden.size();
      std::copy(hidden.begin(), hidden.end(), c.hidden);
    }
    s.get("snapshot_refresh_every", c.snapshot_refresh_every);
    s.get("batches_per_epoch", c.batches_per_epoch);
    s.get("eval_every", c.eval_every);
    s.get("seed", c.seed);
    std::string strategy;
    if (s.get("strategy", strategy)) c.strategy = parse_strategy(strategy);
    s.get("strategy_seed", c.strategy_seed);
    read_hyper(s.child("hyper"), c.hyper);
    s.finish();
  }
  ex.gradcheck.hyper = ex.train.hyper;

  if (const json* ev = top.child("eval")) {
    Section s(*ev, "eval");
    s.get("ks", ex.ks);
    s.get("method", ex.method);
    s.finish();
  }
  if (const json* ma = top.child("mine_audit")) {
    Section s(*ma, "mine_audit");
    s.get("count", ex.audit_count);
    s.finish();
  }
  if (const json* gc = top.child("gradcheck")) {
    Section s(*gc, "gradcheck");
    auto& g = ex.gradcheck;
    s.get("input_dim", g.input_dim);
    s.get("embedding_dim", g.embedding_dim);
    s.get("hidden_width", g.hidden_width);
    s.get("k1", g.k1);
    s.get("fines_per_coarse", g.fines_per_coarse);
    s.get("batch_size", g.batch_size);
    s.get("step", g.step);
    s.get("seed", g.seed);
    s.get("threshold", ex.threshold);
    s.finish();
  }
  top.finish();

  check(qdml_hyper_params_validate(&ex.train.hyper), "hyper-parameters");
  if (ex.ks.empty() || ex.ks.size() > QDML_MAX_KS) fail_input("'eval.ks' must list 1..16 values");
  return ex;
}

json hyper_json(const qdml_hyper_params& h) {
  return {{"m1", h.m1},
          {"m2", h.m2},
          {"t1", h.t1},
          {"t2", h.t2},
          {"lambda_c1", h.lambda_c1},
          {"lambda_c2", h.lambda_c2},
          {"lambda_g1", h.lambda_g1},
          {"lambda_g2", h.lambda_g2},
          {"eta", h.eta},
          {"alpha", h.alpha},
          {"m_trip", h.m_trip}};
}

// Every value the run used, defaults included.
json resolved_json(const Experiment& ex) {
  json j;
  j["seed"] = ex.seed;
  const auto& sp = ex.synthetic;
  switch (ex.source) {
    case Source::kSynthetic:
      j["data"]["synthetic"] = {{"k1", sp.k1},
                                {"fines_per_coarse", sp.fines_per_coarse},
                                {"samples_per_fine", sp.samples_per_fine},
                                {"input_dim", sp.input_dim},
                                {"coarse_center_scale", sp.coarse_center_scale},
                                {"fine_center_scale", sp.fine_center_scale},
                                {"noise_scale", sp.noise_scale},
                                {"signal_dim", sp.signal_dim},
                                {"seed", sp.seed}};
      break;
    case Source::kDataset:
      j["data"]["dataset"] = ex.data_path;
      break;
    case Source::kEmbeddings:
      j["data"]["embeddings"] = ex.data_path;
      break;
    case Source::kNone:
      break;
  }
  j["split"] = {{"train_count", ex.train_count}, {"order", ex.order}};
  const auto& c = ex.train;
  j["train"] = {{"learning_rate", c.learning_rate},
                {"momentum", c.momentum},
                {"epochs", c.epochs},
                {"batch_size", c.batch_size},
                {"embedding_dim", c.embedding_dim},
                {"hidden", std::vector<size_t>(c.hidden, c.hidden + c.n_hidden)},
                {"snapshot_refresh_every", c.snapshot_refresh_every},
                {"batches_per_epoch", c.batches_per_epoch},
                {"eval_every", c.eval_every},
                {"seed", c.seed},
                {"strategy", qdml_mining_kind_name(c.strategy)},
                {"strategy_seed", c.strategy_seed},
                {"hyper", hyper_json(c.hyper)}};
  j["eval"] = {{"ks", ex.ks}, {"method", ex.method}};
  j["mine_audit"] = {{"count", ex.audit_count}};
  const auto& g = ex.gradcheck;
  j["gradcheck"] = {{"input_dim", g.input_dim},
                    {"embedding_dim", g.embedding_dim},
                    {"hidden_width", g.hidden_width},
                    {"k1", g.k1},
                    {"fines_per_coarse", g.fines_per_coarse},
                    {"batch_size", g.batch_size},
                    {"step", g.step},
                    {"seed", g.seed},
                    {"threshold", ex.threshold}};
  return j;
}

// ---- output helpers ----------------------------------------------------------

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) fail_input("cannot write '" + p.string() + "'");
}

fs::path prepare_out(const std::string& out, const Experiment& ex) {
  if (out.empty()) fail_input("--out is required");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) fail_input("cannot create output directory '" + out + "': " + ec.message());
  const fs::path dir(out);
  if (!ex.raw_text.empty()) write_text(dir / "config.json", ex.raw_text);
  write_text(dir / "resolved_config.json", resolved_json(ex).dump(2) + "\n");
  return dir;
}

std::string format_eval(const qdml_eval_report& r, const char* method, bool header) {
  const size_t n = header ? qdml_format_eval_header(&r, nullptr, 0)
                          : qdml_format_eval_row(&r, method, nullptr, 0);
  std::string s(n + 1, '\0');
  if (header) {
    qdml_format_eval_header(&r, s.data(), s.size());
  } else {
    qdml_format_eval_row(&r, method, s.data(), s.size());
  }
  s.resize(n);
  return s;
}

// Appends one row, writing the header first for a new file. A file whose
// header names different columns is rejected.
void append_eval_row(const fs::path& p, const qdml_eval_report& r, const std::string& method) {
  const std::string header = format_eval(r, nullptr, true);
  if (fs::exists(p)) {
    std::ifstream in(p);
    std::string first;
    std::getline(in, first);
    if (first != header) {
      fail_input("'" + p.string() + "' has columns '" + first + "', expected '" + header + "'");
    }
  } else {
    write_text(p, header + "\n");
  }
  std::ofstream out(p, std::ios::binary | std::ios::app);
  out << format_eval(r, method.c_str(), false) << '\n';
  if (!out) fail_input("cannot append to '" + p.string() + "'");
}

DatasetPtr load_dataset(const std::string& path) {
  qdml_dataset* d = nullptr;
  check(qdml_dataset_load(path.c_str(), &d), "loading dataset '" + path + "'");
  return DatasetPtr(d);
}

EmbeddingsPtr load_embeddings(const std::string& path) {
  qdml_embeddings* e = nullptr;
  check(qdml_embeddings_load(path.c_str(), &e), "loading embeddings '" + path + "'");
  return EmbeddingsPtr(e);
}

ModelPtr load_model(const std::string& path) {
  qdml_model* m = nullptr;
  check(qdml_model_load_checkpoint(path.c_str(), &m), "loading checkpoint '" + path + "'");
  return ModelPtr(m);
}

EmbeddingsPtr embed(const qdml_model* m, const qdml_dataset* d) {
  qdml_embeddings* e = nullptr;
  check(qdml_model_embed(m, d, &e), "embedding dataset");
  return EmbeddingsPtr(e);
}

DatasetPtr dataset_from(const Experiment& ex) {
  if (ex.source == Source::kSynthetic) {
    qdml_dataset* d = nullptr;
    check(qdml_dataset_generate(&ex.synthetic, &d), "generating dataset");
    return DatasetPtr(d);
  }
  if (ex.source == Source::kDataset) return load_dataset(ex.data_path);
  fail_input("this command needs a synthetic or dataset data source");
}

qdml_eval_report run_eval(const qdml_embeddings* e, const Experiment& ex) {
  qdml_eval_report r;
  check(qdml_evaluate(e, ex.ks.data(), ex.ks.size(), ex.seed, &r), "evaluation");
  return r;
}

// ---- commands ----------------------------------------------------------------

struct Common {
  std::string config;
  std::string out;
  std::optional<uint64_t> seed;
};

int cmd_gen(const Common& o) {
  const Experiment ex = load_experiment(o.config, o.seed);
  if (ex.source != Source::kSynthetic) fail_input("gen needs a 'data.synthetic' section");
  const DatasetPtr d = dataset_from(ex);
  const fs::path dir = prepare_out(o.out, ex);
  const fs::path file = dir / "dataset.txt";
  check(qdml_dataset_save(d.get(), file.string().c_str()), "saving dataset");
  qdml_dataset_info info;
  check(qdml_dataset_get_info(d.get(), &info), "dataset info");
  std::printf("wrote %s: %zu samples, input_dim %zu, %d coarse, %d fine\n",
              file.string().c_str(), info.n_samples, info.input_dim, info.k1, info.k2);
  return kExitOk;
}

int cmd_train(const Common& o) {
  const Experiment ex = load_experiment(o.config, o.seed);
  const DatasetPtr all = dataset_from(ex);
  qdml_dataset_info info;
  check(qdml_dataset_get_info(all.get(), &info), "dataset info");

  std::vector<int> order(static_cast<size_t>(info.k2));
  if (ex.order == "round_robin") {
    check(qdml_dataset_round_robin_order(all.get(), order.data(), order.size()), "fine order");
  } else {
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  }
  const size_t train_count = ex.train_count ? ex.train_count : order.size() / 2;
  qdml_dataset *tr = nullptr, *te = nullptr;
  check(qdml_dataset_split_zero_shot_ordered(all.get(), order.data(), order.size(),
                                             train_count, &tr, &te),
        "zero-shot split");
  const DatasetPtr train(tr), test(te);

  const fs::path dir = prepare_out(o.out, ex);
  qdml_model* raw = nullptr;
  check(qdml_train(train.get(), ex.train.eval_every ? test.get() : nullptr, &ex.train, &raw),
        "training");
  const ModelPtr model(raw);
  check(qdml_model_write_metrics(model.get(), (dir / "metrics.csv").string().c_str()),
        "writing metrics");
  check(qdml_model_save_checkpoint(model.get(), (dir / "checkpoint.txt").string().c_str()),
        "writing checkpoint");

  const EmbeddingsPtr e = embed(model.get(), test.get());
  const qdml_eval_report r = run_eval(e.get(), ex);
  const std::string method =
      ex.method.empty() ? qdml_mining_kind_name(ex.train.strategy) : ex.method;
  append_eval_row(dir / "eval.csv", r, method);
  std::printf("%s\n%s\n", format_eval(r, nullptr, true).c_str(),
              format_eval(r, method.c_str(), false).c_str());
  return kExitOk;
}

struct EvalFlags {
  std::string embeddings, dataset, checkpoint, method;
};

int cmd_eval(const Common& o, const EvalFlags& f) {
  Experiment ex = load_experiment(o.config, o.seed);
  if (!f.embeddings.empty()) {
    ex.source = Source::kEmbeddings;
    ex.data_path = f.embeddings;
  } else if (!f.dataset.empty()) {
    ex.source = Source::kDataset;
    ex.data_path = f.dataset;
  }
  if (!f.method.empty()) ex.method = f.method;

  EmbeddingsPtr e;
  if (ex.source == Source::kEmbeddings) {
    if (!f.checkpoint.empty()) fail_input("--checkpoint applies to a dataset, not embeddings");
    e = load_embeddings(ex.data_path);
  } else {
    if (f.checkpoint.empty()) fail_input("eval needs embeddings, or a checkpoint and a dataset");
    const DatasetPtr d = dataset_from(ex);
    const ModelPtr m = load_model(f.checkpoint);
    e = embed(m.get(), d.get());
  }
  const qdml_eval_report r = run_eval(e.get(), ex);
  const std::string method = ex.method.empty() ? "eval" : ex.method;
  if (!o.out.empty()) append_eval_row(prepare_out(o.out, ex) / "eval.csv", r, method);
  std::printf("%s\n%s\n", format_eval(r, nullptr, true).c_str(),
              format_eval(r, method.c_str(), false).c_str());
  return kExitOk;
}

struct AuditFlags {
  std::string checkpoint, strategy;
  std::optional<size_t> count;
};

int cmd_mine_audit(const Common& o, const AuditFlags& f) {
  Experiment ex = load_experiment(o.config, o.seed);
  if (!f.strategy.empty()) ex.train.strategy = parse_strategy(f.strategy);
  if (f.count) ex.audit_count = *f.count;

  EmbeddingsPtr e;
  if (ex.source == Source::kEmbeddings) {
    if (!f.checkpoint.empty()) fail_input("--checkpoint applies to a dataset, not embeddings");
    e = load_embeddings(ex.data_path);
  } else {
    const DatasetPtr d = dataset_from(ex);
    if (f.checkpoint.empty()) {
      qdml_embeddings* raw = nullptr;
      check(qdml_dataset_as_embeddings(d.get(), &raw), "dataset as embeddings");
      e.reset(raw);
    } else {
      const ModelPtr m = load_model(f.checkpoint);
      e = embed(m.get(), d.get());
    }
  }
  const fs::path dir = prepare_out(o.out, ex);
  const fs::path file = dir / "quadruplets.txt";
  size_t skipped = 0;
  check(qdml_mine_audit(e.get(), ex.train.strategy, ex.train.strategy_seed, ex.audit_count,
                        file.string().c_str(), &skipped),
        "mining audit");
  std::printf("wrote %s: %zu quadruplets (%s), %zu degenerate references skipped\n",
              file.string().c_str(), ex.audit_count, qdml_mining_kind_name(ex.train.strategy),
              skipped);
  return kExitOk;
}

struct GradFlags {
  std::optional<double> threshold;
  bool inject_fault = false;
};

int cmd_gradcheck(const Common& o, const GradFlags& f) {
  Experiment ex = load_experiment(o.config, o.seed);
  if (f.threshold) ex.threshold = *f.threshold;
  ex.gradcheck.inject_fault = f.inject_fault ? 1 : 0;
  qdml_gradcheck_report r;
  check(qdml_gradcheck(&ex.gradcheck, &r), "gradient check");
  const bool pass = r.max_rel_error <= ex.threshold;
  char line[512];
  std::snprintf(line, sizeof line,
                "max_rel_error %.3e over %zu coordinates (threshold %.3e): %s\n"
                "worst coordinate %zu: analytic %.17g numeric %.17g\n",
                r.max_rel_error, r.checked, ex.threshold, pass ? "ok" : "FAILED",
                r.worst_index, r.analytic, r.numeric);
  std::fputs(line, stdout);
  if (!o.out.empty()) write_text(prepare_out(o.out, ex) / "gradcheck.txt", line);
  return pass ? kExitOk : kExitThreshold;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qdml: quadruplet deep metric learning experiments"};
  app.require_subcommand(1);
  Common common;
  uint64_t seed_value = 0;

  auto add_common = [&](CLI::App* sub, bool out_required) {
    sub->add_option("--config", common.config, "JSON experiment config");
    auto* out = sub->add_option("--out", common.out, "output directory");
    if (out_required) out->required();
    sub->add_option("--seed", seed_value, "overrides the config's top-level seed");
  };

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  add_common(gen, true);

  auto* train = app.add_subcommand("train", "train on the split's seen classes");
  add_common(train, true);

  EvalFlags eval_flags;
  auto* eval = app.add_subcommand("eval", "Recall@K and NMI of embeddings");
  add_common(eval, false);
  eval->add_option("--embeddings", eval_flags.embeddings, "embedding file");
  eval->add_option("--dataset", eval_flags.dataset, "dataset file (with --checkpoint)");
  eval->add_option("--checkpoint", eval_flags.checkpoint, "model checkpoint");
  eval->add_option("--method", eval_flags.method, "row label");

  AuditFlags audit_flags;
  size_t count_value = 0;
  auto* audit = app.add_subcommand("mine-audit", "dump mined quadruplets with distances");
  add_common(audit, true);
  audit->add_option("--checkpoint", audit_flags.checkpoint, "embed the dataset first");
  audit->add_option("--strategy", audit_flags.strategy, "random, method1 or method2");
  auto* count_opt = audit->add_option("--count", count_value, "number of quadruplets");

  GradFlags grad_flags;
  double threshold_value = 0.0;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient check");
  add_common(grad, false);
  auto* threshold_opt =
      grad->add_option("--threshold", threshold_value, "maximum relative error");
  grad->add_flag("--inject-fault", grad_flags.inject_fault,
                 "double the largest analytic coordinate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }

  for (CLI::App* sub : {gen, train, eval, audit, grad}) {
    if (sub->parsed() && sub->count("--seed")) common.seed = seed_value;
  }
  if (count_opt->count()) audit_flags.count = count_value;
  if (threshold_opt->count()) grad_flags.threshold = threshold_value;

  try {
    if (gen->parsed()) return cmd_gen(common);
    if (train->parsed()) return cmd_train(common);
    if (eval->parsed()) return cmd_eval(common, eval_flags);
    if (audit->parsed()) return cmd_mine_audit(common, audit_flags);
    return cmd_gradcheck(common, grad_flags);
  } catch (const CliError& e) {
    std::cerr << "qdml: " << e.message << '\n';
    return e.exit_code;
  }
}
