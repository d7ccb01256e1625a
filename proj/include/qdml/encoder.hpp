#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qdml/core.hpp"
#include "qdml/data.hpp"
#include "qdml/losses.hpp"
#include "qdml/mining.hpp"

namespace qdml {

// Shape of the shared encoder: ReLU hidden layers, a linear embedding layer
// and two linear classification heads reading the embedding.
struct EncoderArch {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden{64};
  std::size_t embedding_dim = 32;
  int k1 = 2;
  int k2 = 2;

  void validate() const;  // throws kConfig

  friend bool operator==(const EncoderArch&, const EncoderArch&) = default;
};

// Location of one fully connected layer inside the flat parameter vector:
// weights are out x in row-major, followed by out biases.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t offset = 0;

  std::size_t weight(std::size_t o, std::size_t i) const {
    return offset + o * in + i;
  }
  std::size_t bias(std::size_t o) const { return offset + out * in + o; }
  std::size_t size() const { return out * in + out; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// The single parameter store shared by all four quadruplet streams.
class EncoderParams {
 public:
  explicit EncoderParams(EncoderArch arch);  // all zeros

  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
  static EncoderParams initialize(EncoderArch arch, std::uint64_t seed);

  const EncoderArch& arch() const noexcept { return arch_; }
  std::size_t size() const noexcept { return theta_.size(); }
  std::span<const double> values() const noexcept { return theta_; }
  std::span<double> values() noexcept { return theta_; }

  // Hidden layers followed by the embedding layer.
  const std::vector<DenseLayer>& trunk() const noexcept { return trunk_; }
  const DenseLayer& coarse_head() const noexcept { return coarse_head_; }
  const DenseLayer& fine_head() const noexcept { return fine_head_; }

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;

 private:
  EncoderArch arch_;
  std::vector<DenseLayer> trunk_;
  DenseLayer coarse_head_;
  DenseLayer fine_head_;
  Vector theta_;
};

struct ForwardOutput {
  Vector embedding;
  HeadLogits logits;
};

ForwardOutput forward(const EncoderParams& p, std::span<const double> x);

// Embeds every sample of a dataset (labels and ids carried over).
EmbeddingSet embed(const EncoderParams& p, const Dataset& d);

// Raw inputs of one quadruplet (r, pp, pm, n) and the reference's labels.
struct QuadrupletInput {
  std::array<std::span<const double>, 4> x;
  ClassLabel ref_label;
};

struct BackwardResult {
  double loss = 0.0;
  Vector grad;  // same layout as EncoderParams::values()
  std::size_t singular_terms = 0;
};

// Combined loss of the batch and its gradient with respect to every
// parameter.
BackwardResult backward(const EncoderParams& p,
                        std::span<const QuadrupletInput> batch,
                        const HyperParams& h);

// Classic momentum: v <- momentum * v + g; theta <- theta - lr * v.
void sgd_momentum_step(std::span<double> params, std::span<const double> grad,
                       std::span<double> velocity, double lr, double momentum);

struct TrainConfig {
  double learning_rate = 0.0003;
  double momentum = 0.9;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::size_t embedding_dim = 32;
  std::vector<std::size_t> hidden{64};
  // Embedding snapshot used for mining is recomputed every this many epochs.
  std::size_t snapshot_refresh_every = 1;
  // 0 means ceil(N / batch_size).
  std::size_t batches_per_epoch = 0;
  // Evaluate on the held-out set every this many epochs (0 = never).
  std::size_t eval_every = 0;
  std::uint64_t seed = 0;
  MiningStrategy strategy;
  HyperParams hyper;

  void validate() const;  // throws kConfig

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;  // mean combined loss over the epoch's batches
  std::optional<double> recall_at_1;
  std::optional<double> nmi;
  std::size_t singular_terms = 0;
};

struct TrainResult {
  EncoderParams params;
  std::vector<EpochMetrics> log;
};

// Deterministic given cfg.seed. `eval_set` (optional) is embedded and
// scored every cfg.eval_every epochs. Throws kDegenerate from mining and
// kNonFinite when the loss or parameters stop being finite.
TrainResult train(const Dataset& train_set, const TrainConfig& cfg,
                  const Dataset* eval_set = nullptr);

// "epoch,loss,R@1,NMI" with empty cells for epochs that were not evaluated.
void write_metrics_csv(std::ostream& os, std::span<const EpochMetrics> log);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;   // at worst_index
  std::size_t checked = 0;
};

// Per-coordinate |a - n| / max(|a|, |n|, kGradCheckFloor), with n the
// central difference of f at x. Checks `coords`, or every coordinate when
// empty.
inline constexpr double kGradCheckFloor = 1e-6;
GradCheckReport finite_difference_check(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, std::span<const double> analytic, double step,
    std::span<const std::size_t> coords = {});

struct GradCheckOptions {
  double step = 1e-5;
  // Nets larger than this are checked on a seeded subset of this many
  // coordinates (never fewer than 200). 0 checks everything.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
  // Doubles the largest-magnitude analytic coordinate before comparing.
  bool inject_fault = false;
};

GradCheckReport grad_check(const EncoderParams& p,
                           std::span<const QuadrupletInput> batch,
                           const HyperParams& h,
                           const GradCheckOptions& opts = {});

// Small seeded instance for gradient verification: a synthetic dataset,
// randomly initialised parameters and valid random quadruplets over it.
struct GradCheckProblemSpec {
  std::size_t input_dim = 4;
  std::size_t embedding_dim = 3;
  std::size_t hidden_width = 5;  // 0 = no hidden layer
  int k1 = 2;
  int fines_per_coarse = 2;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
};

struct GradCheckProblem {
  EncoderParams params;
  Dataset data;
  std::vector<QuadrupletIdx> quads;

  // Views into `data`; valid while this object is alive and unmodified.
  std::vector<QuadrupletInput> batch() const;
};

GradCheckProblem make_gradcheck_problem(const GradCheckProblemSpec& spec);

// Checkpoint text format:
//   qdml-checkpoint 1
//   arch input_dim <n> hidden <h1,h2,...|-> embedding_dim <k> k1 <k1> k2 <k2>
//   config <key> <value> ...            (TrainConfig echo, fixed key order)
//   hyper <key> <value> ...             (HyperParams echo, fixed key order)
//   params <count>
//   <one parameter per line, layer order, weights then biases>
struct Checkpoint {
  EncoderParams params;
  TrainConfig config;
};

void write_checkpoint(std::ostream& os, const Checkpoint& c);
Checkpoint read_checkpoint(std::istream& is);
void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace qdml
