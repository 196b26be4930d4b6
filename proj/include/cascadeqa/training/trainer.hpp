#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cascadeqa/autodiff/parameters.hpp"
#include "cascadeqa/autodiff/tape.hpp"
#include "cascadeqa/corpus/example.hpp"
#include "cascadeqa/embeddings/embedding_table.hpp"
#include "cascadeqa/model/cascade.hpp"

namespace cascadeqa {

// lambda_1..lambda_4 for phi1 (M1 or combined level 1), phi2 (M2), phi3, phi4.
struct LossWeights {
  std::array<double, 4> lambda{0.35, 0.35, 0.2, 0.1};

  double operator[](std::size_t k) const { return lambda[k]; }
  // Nonnegative, finite, summing to 1 within 1e-9. Throws UsageError.
  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

// -log of the probability mass a softmax over `phi` puts on `gold`, computed as
// logsumexp(phi) - logsumexp(phi[gold]).
NodeId gold_nll(Tape& tape, NodeId phi, const std::vector<std::size_t>& gold);

// sum_k lambda_k * gold_nll(phi_k). Terms with lambda_k = 0 are not recorded, so
// their score heads get exactly zero gradient. Throws EmptyCandidateError when
// the example has no gold span, and ContractError when a weighted level is
// missing from the graph.
NodeId multi_loss(Tape& tape, const CascadeGraph& graph, const PreparedExample& ex, const LossWeights& weights);

class AdagradState {
 public:
  AdagradState(const ParameterStore& params, double learning_rate = 0.05, double initial_accumulator = 0.1);

  // acc += g^2; theta -= lr * g / sqrt(acc). Checks every gradient first and
  // throws NumericError naming the parameter if any entry is not finite.
  void step(ParameterStore& params, const Gradients& grads);

  double learning_rate() const { return learning_rate_; }
  const Tensor& accumulator(ParamId id) const { return acc_.at(id); }

 private:
  double learning_rate_;
  std::vector<Tensor> acc_;
};

enum class Level1Choice { Both, QuestionSpan, SpanContext };

struct TrainConfig {
  std::string ablation = "full";
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  double dropout = 0.1;
  LossWeights weights;
  bool single_loss = false;
  bool drop_level2 = false;
  bool drop_level3 = false;
  bool combined_level1 = false;
  Level1Choice level1 = Level1Choice::Both;
  double learning_rate = 0.05;
  double initial_accumulator = 0.1;
  std::size_t hidden = 300;
  std::size_t depth = 2;
  std::size_t context = 1;
  std::uint64_t embedding_seed = EmbeddingTable::kDefaultSeed;
  PreprocessConfig preprocess;
  std::size_t workers = 1;

  // UsageError on inconsistent flags or weights.
  void validate() const;
};

const std::vector<std::string>& ablation_names();
// UsageError listing the valid names when `name` is unknown.
TrainConfig ablation_config(const std::string& name);
// Sets the ablation's flags and loss weights, keeping every other field.
void apply_ablation(TrainConfig& config, const std::string& name);

CascadeLayout layout_for(const TrainConfig& config);
ModelConfig model_config(const TrainConfig& config, std::size_t embedding_dim);

// key = value lines; '#' starts a comment. UsageError naming an unknown key or
// a bad value.
void apply_setting(TrainConfig& config, const std::string& key, const std::string& value);
void read_config(std::istream& in, TrainConfig& config);
void read_config_file(const std::string& path, TrainConfig& config);
// Resolved config in the same key = value format.
std::string format_config(const TrainConfig& config);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double train_em = 0.0;
  std::size_t trained = 0;
  std::size_t skipped = 0;
  double seconds = 0.0;
};

struct TrainOptions {
  // When set, <out_dir>/model.ckpt is rewritten after every epoch and one
  // metrics line per epoch is appended to <out_dir>/metrics.jsonl.
  std::optional<std::string> out_dir;
  // Return false to stop after this epoch.
  std::function<bool(const EpochMetrics&, const CascadeModel&)> on_epoch;
  WorkerPool* pool = nullptr;
};

struct TrainResult {
  CascadeModel model;
  std::vector<EpochMetrics> epochs;
};

// Batch size 1 over examples with at least one gold span, in a seeded order
// reshuffled every epoch. Throws NoTrainableDataError when no example has a
// gold span.
TrainResult train(const std::vector<PreparedExample>& corpus, const EmbeddingTable& table,
                  const TrainConfig& config, const TrainOptions& options = {});

// One optimization step on a single example; returns the loss.
double train_step(CascadeModel& model, AdagradState& opt, const PreparedExample& ex, const EncodedExample& enc,
                  const LossWeights& weights, const DropoutState& dropout);

// Loss and analytic gradients with dropout off (gradient checks).
double loss_and_gradients(const CascadeModel& model, const ParameterStore& params, const PreparedExample& ex,
                          const EncodedExample& enc, const LossWeights& weights, Gradients* grads);

}  // namespace cascadeqa
