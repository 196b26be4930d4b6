#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cascadeqa/autodiff/ops.hpp"
#include "cascadeqa/autodiff/parameters.hpp"
#include "cascadeqa/autodiff/tape.hpp"
#include "cascadeqa/corpus/example.hpp"
#include "cascadeqa/embeddings/embedding_table.hpp"

namespace cascadeqa {

class WorkerPool;

// Which submodels exist. The full cascade has all of them except `combined`,
// which replaces the two level-1 submodels with one network.
struct CascadeLayout {
  bool question_span = true;  // M1
  bool span_context = true;   // M2
  bool combined = false;      // single level-1 net over question, span and context
  bool level2 = true;         // M3 with sentence attention
  bool level3 = true;         // M4 mention aggregation

  bool uses_question_vector() const { return question_span || combined; }
  friend bool operator==(const CascadeLayout&, const CascadeLayout&) = default;
};

struct ModelConfig {
  std::size_t embedding_dim = 300;
  std::size_t hidden = 300;
  std::size_t depth = 2;
  std::size_t context = 1;  // K
  std::size_t max_span_length = 5;
  std::uint64_t seed = 1;
  std::uint64_t embedding_seed = EmbeddingTable::kDefaultSeed;
  CascadeLayout layout;

  // Throws ContractError on zero sizes or an inconsistent layout.
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Networks grouped by submodel. Absent submodels keep default (empty) params.
struct CascadeParams {
  FfnnParams ffnn_q;
  LinearParams linear_q;
  FfnnParams ffnn_qs;
  LinearParams linear_qs;
  FfnnParams ffnn_c;
  LinearParams linear_c;
  FfnnParams ffnn_comb;
  LinearParams linear_comb;
  FfnnParams ffnn_att1;
  FfnnParams ffnn_att2;
  FfnnParams ffnn_l2;
  LinearParams linear_l2;
  FfnnParams ffnn_agg;
  FfnnParams ffnn_l3;
  LinearParams linear_l3;
};

// Row-major (length x dim) embedding matrix. Length may be zero.
struct EmbeddedSequence {
  std::size_t length = 0;
  std::size_t dim = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  Tensor rows(std::size_t begin, std::size_t end) const;
};

struct EncodedExample {
  EmbeddedSequence question;
  std::vector<EmbeddedSequence> documents;
};

EncodedExample encode(const PreparedExample& ex, const EmbeddingTable& table);

// Model-independent inputs of one span.
struct SpanFeatures {
  Tensor average;  // mean of the span's token embeddings
  Tensor left;     // c^L
  Tensor right;    // c^R
  double gamma = 0.0;
};

SpanFeatures span_features(const EncodedExample& enc, const SpanCandidate& span, double gamma,
                           std::size_t context);

// A submodel's hidden vector and scalar score.
struct LevelOutput {
  NodeId h = 0;
  NodeId phi = 0;
};

// Question-side tensors shared by every sentence.
struct QuestionNodes {
  std::vector<NodeId> tokens;           // q_i
  NodeId matrix = 0;                    // Q, m x E
  std::optional<NodeId> weights;        // softmax(delta)
  std::optional<NodeId> vector;         // q~
  std::optional<NodeId> attend;         // rows ffnn_att1(q_i), m x H
};

struct SentenceAttention {
  NodeId question_summary = 0;  // q-bar
  NodeId sentence_summary = 0;  // g-bar
  NodeId eta = 0;               // m x G logits
  NodeId alpha = 0;             // m x G, rows sum to 1
  NodeId beta = 0;              // G x m, rows sum to 1
};

// Node ids of one example's forward pass on a single tape.
struct CascadeGraph {
  std::optional<NodeId> phi1;  // per span: M1, or the combined level-1 net
  std::optional<NodeId> phi2;  // per span: M2
  std::optional<NodeId> phi3;  // per span
  std::optional<NodeId> phi4;  // per unique candidate
  std::optional<NodeId> question_weights;
  std::vector<SentenceAttention> attention;
};

struct CascadeScores {
  std::vector<double> phi1, phi2, phi3, phi4;
};

// Process-wide count of sentence attention evaluations.
std::uint64_t attention_count();
void reset_attention_count();

class CascadeModel {
 public:
  // Parameters drawn from config.seed.
  explicit CascadeModel(const ModelConfig& config);
  // Adopts existing parameters (checkpoint load); names and shapes must match
  // the layout implied by config.
  CascadeModel(const ModelConfig& config, ParameterStore params);

  const ModelConfig& config() const { return config_; }
  const CascadeParams& nets() const { return nets_; }
  const ParameterStore& parameters() const { return params_; }
  ParameterStore& parameters() { return params_; }

  // Building blocks. Inputs are tape nodes; gamma is a constant.
  QuestionNodes question(Tape& tape, const EmbeddedSequence& q, const DropoutState& dropout) const;
  NodeId span_tilde(Tape& tape, const SpanFeatures& f) const;
  LevelOutput level1_question_span(Tape& tape, NodeId s_tilde, NodeId q_tilde, double gamma,
                                   const DropoutState& dropout) const;
  LevelOutput level1_span_context(Tape& tape, const SpanFeatures& f, const DropoutState& dropout) const;
  LevelOutput level1_combined(Tape& tape, NodeId s_tilde, NodeId q_tilde, const SpanFeatures& f,
                              const DropoutState& dropout) const;
  SentenceAttention sentence_attention(Tape& tape, const QuestionNodes& q, const Tensor& sentence,
                                       const DropoutState& dropout) const;
  // level1 holds h1, h2 (or the combined h) in order.
  LevelOutput level2(Tape& tape, std::span<const NodeId> level1, const SentenceAttention& att, double gamma,
                     const DropoutState& dropout) const;
  NodeId mention_vector(Tape& tape, NodeId h3, double gamma, const DropoutState& dropout) const;
  // Sums mention vectors in the given order. Throws ContractError when empty.
  // forward() passes them in increasing span index.
  LevelOutput level3(Tape& tape, std::span<const NodeId> mentions, const DropoutState& dropout) const;

  // Whole example on one tape (training, gradient checks).
  CascadeGraph forward(Tape& tape, const EncodedExample& enc, const PreparedExample& ex,
                       const DropoutState& dropout) const;

  // Inference without gradients: one short-lived tape per sentence, sentences
  // spread over the pool, mention sums folded in span order. Bitwise equal to
  // forward() with dropout off.
  CascadeScores score(const EncodedExample& enc, const PreparedExample& ex, WorkerPool* pool = nullptr) const;

 private:
  void build(Rng& rng);

  ModelConfig config_;
  ParameterStore params_;
  CascadeParams nets_;
};

// softmax over each present level.
struct CascadeDistributions {
  std::vector<double> p1, p2, p3, p4;
};
CascadeDistributions distributions(const CascadeScores& scores);
std::vector<double> softmax_values(std::span<const double> scores);

// Per-unique ranking score of the highest level present: phi4, else the max
// over mentions of phi3, else of phi1 + phi2 (either one when only one exists).
std::vector<double> candidate_scores(const CascadeScores& scores, const PreparedExample& ex,
                                     const CascadeLayout& layout);

// Index of the maximum; ties go to the lowest index. nullopt when empty.
std::optional<std::size_t> argmax(std::span<const double> scores);
// Indices of the k best, best first, ties by lower index.
std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k);

struct Prediction {
  bool answerable = false;
  std::size_t unique = 0;
  std::string text;
  double score = 0.0;
  std::size_t mentions = 0;
};

Prediction predict(const CascadeScores& scores, const PreparedExample& ex, const CascadeLayout& layout);

}  // namespace cascadeqa
