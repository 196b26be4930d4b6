#include "cascadeqa/model/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cascadeqa/util/error.hpp"
#include "cascadeqa/util/random.hpp"

namespace cascadeqa {
namespace {

std::atomic<std::uint64_t> g_attention_count{0};

NodeId scalar_const(Tape& tape, double v) { return tape.constant(Tensor::scalar(v)); }

}  // namespace

std::uint64_t attention_count() { return g_attention_count.load(std::memory_order_relaxed); }
void reset_attention_count() { g_attention_count.store(0, std::memory_order_relaxed); }

void ModelConfig::validate() const {
  if (embedding_dim == 0 || hidden == 0 || depth == 0) throw ContractError("model sizes must be positive");
  if (context == 0) throw ContractError("context size K must be >= 1");
  if (max_span_length == 0) throw ContractError("maximum span length must be >= 1");
  const auto& l = layout;
  if (l.combined && (l.question_span || l.span_context))
    throw ContractError("the combined level-1 net replaces both level-1 submodels");
  if (!l.question_span && !l.span_context && !l.combined) throw ContractError("no level-1 submodel enabled");
  if (l.level3 && !l.level2) throw ContractError("level 3 requires level 2");
}

Tensor EmbeddedSequence::rows(std::size_t begin, std::size_t end) const {
  return Tensor::matrix(end - begin, dim,
                        std::vector<double>(data.begin() + static_cast<std::ptrdiff_t>(begin * dim),
                                            data.begin() + static_cast<std::ptrdiff_t>(end * dim)));
}

namespace {

EmbeddedSequence embed(const EmbeddingTable& table, std::span<const std::string> tokens) {
  EmbeddedSequence seq{tokens.size(), table.dimension(), {}};
  seq.data.reserve(tokens.size() * table.dimension());
  for (const auto& t : tokens) {
    auto v = table.lookup(t);
    seq.data.insert(seq.data.end(), v.begin(), v.end());
  }
  return seq;
}

}  // namespace

EncodedExample encode(const PreparedExample& ex, const EmbeddingTable& table) {
  EncodedExample enc;
  enc.question = embed(table, ex.question);
  for (const auto& doc : ex.documents) {
    std::vector<std::string> toks;
    toks.reserve(doc.tokens.size());
    for (const auto& t : doc.tokens) toks.push_back(t.text);
    enc.documents.push_back(embed(table, toks));
  }
  return enc;
}

SpanFeatures span_features(const EncodedExample& enc, const SpanCandidate& span, double gamma,
                           std::size_t context) {
  const EmbeddedSequence& doc = enc.documents.at(span.document);
  const std::size_t dim = doc.dim;
  SpanFeatures f{Tensor::zeros(dim), Tensor::zeros(dim), Tensor::zeros(dim), gamma};
  for (std::size_t t = span.begin; t < span.end; ++t) {
    auto r = doc.row(t);
    for (std::size_t k = 0; k < dim; ++k) f.average[k] += r[k];
  }
  const double inv = 1.0 / static_cast<double>(span.length());
  for (double& v : f.average.values()) v *= inv;

  const double kinv = 1.0 / static_cast<double>(context);
  for (std::size_t c = 1; c <= context; ++c) {
    if (span.begin >= c) {
      auto r = doc.row(span.begin - c);
      for (std::size_t k = 0; k < dim; ++k) f.left[k] += r[k];
    }
    if (span.end - 1 + c < doc.length) {
      auto r = doc.row(span.end - 1 + c);
      for (std::size_t k = 0; k < dim; ++k) f.right[k] += r[k];
    }
  }
  for (double& v : f.left.values()) v *= kinv;
  for (double& v : f.right.values()) v *= kinv;
  return f;
}

CascadeModel::CascadeModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  Rng rng(config_.seed);
  build(rng);
}

CascadeModel::CascadeModel(const ModelConfig& config, ParameterStore params) : config_(config) {
  config_.validate();
  Rng rng(config_.seed);
  build(rng);
  if (params.size() != params_.size())
    throw VersionError("checkpoint has " + std::to_string(params.size()) + " parameters, layout expects " +
                       std::to_string(params_.size()));
  for (ParamId id = 0; id < params_.size(); ++id) {
    if (params.name(id) != params_.name(id) || !params.value(id).same_shape(params_.value(id))) {
      throw VersionError("checkpoint parameter " + params.name(id) + " " + params.value(id).shape_string() +
                         " does not match expected " + params_.name(id) + " " +
                         params_.value(id).shape_string());
    }
  }
  params_ = std::move(params);
}

void CascadeModel::build(Rng& rng) {
  const std::size_t e = config_.embedding_dim;
  const std::size_t h = config_.hidden;
  const std::size_t d = config_.depth;
  const auto& l = config_.layout;
  auto& s = params_;
  if (l.uses_question_vector()) {
    nets_.ffnn_q = make_ffnn(s, "question.ffnn", e, h, d, rng);
    nets_.linear_q = make_linear(s, "question.linear", h, rng);
  }
  if (l.question_span) {
    nets_.ffnn_qs = make_ffnn(s, "m1.ffnn", 2 * e + 2, h, d, rng);
    nets_.linear_qs = make_linear(s, "m1.linear", h, rng);
  }
  if (l.span_context) {
    nets_.ffnn_c = make_ffnn(s, "m2.ffnn", 3 * e + 1, h, d, rng);
    nets_.linear_c = make_linear(s, "m2.linear", h, rng);
  }
  if (l.combined) {
    nets_.ffnn_comb = make_ffnn(s, "combined.ffnn", 4 * e + 2, h, d, rng);
    nets_.linear_comb = make_linear(s, "combined.linear", h, rng);
  }
  if (l.level2) {
    const std::size_t n1 = (l.question_span ? 1 : 0) + (l.span_context ? 1 : 0) + (l.combined ? 1 : 0);
    nets_.ffnn_att1 = make_ffnn(s, "attention.ffnn1", e, h, d, rng);
    nets_.ffnn_att2 = make_ffnn(s, "attention.ffnn2", 2 * e, h, d, rng);
    nets_.ffnn_l2 = make_ffnn(s, "m3.ffnn", n1 * h + 2 * h + 1, h, d, rng);
    nets_.linear_l2 = make_linear(s, "m3.linear", h, rng);
  }
  if (l.level3) {
    nets_.ffnn_agg = make_ffnn(s, "m4.agg", h + 1, h, d, rng);
    nets_.ffnn_l3 = make_ffnn(s, "m4.ffnn", h, h, d, rng);
    nets_.linear_l3 = make_linear(s, "m4.linear", h, rng);
  }
}

QuestionNodes CascadeModel::question(Tape& tape, const EmbeddedSequence& q, const DropoutState& dropout) const {
  if (q.length == 0) throw ContractError("empty question");
  if (q.dim != config_.embedding_dim)
    throw DimensionError("question embeddings have dimension " + std::to_string(q.dim) + ", model expects " +
                         std::to_string(config_.embedding_dim));
  QuestionNodes out;
  out.matrix = tape.constant(q.rows(0, q.length));
  for (std::size_t i = 0; i < q.length; ++i) {
    auto r = q.row(i);
    out.tokens.push_back(tape.constant(Tensor::vector(std::vector<double>(r.begin(), r.end()))));
  }
  const auto& l = config_.layout;
  if (l.uses_question_vector()) {
    std::vector<NodeId> deltas;
    for (NodeId qi : out.tokens) deltas.push_back(linear(tape, nets_.linear_q, ffnn(tape, nets_.ffnn_q, qi, dropout)));
    out.weights = tape.softmax(tape.concat(deltas));
    out.vector = tape.matvec(tape.transpose(out.matrix), *out.weights);
  }
  if (l.level2) {
    std::vector<NodeId> rows;
    for (NodeId qi : out.tokens) rows.push_back(ffnn(tape, nets_.ffnn_att1, qi, dropout));
    out.attend = tape.stack(rows);
  }
  return out;
}

NodeId CascadeModel::span_tilde(Tape& tape, const SpanFeatures& f) const {
  std::vector<double> v(f.average.storage());
  v.push_back(f.gamma);
  return tape.constant(Tensor::vector(std::move(v)));
}

LevelOutput CascadeModel::level1_question_span(Tape& tape, NodeId s_tilde, NodeId q_tilde, double gamma,
                                               const DropoutState& dropout) const {
  const NodeId parts[] = {s_tilde, q_tilde, scalar_const(tape, gamma)};
  const NodeId h = ffnn(tape, nets_.ffnn_qs, tape.concat(parts), dropout);
  return {h, linear(tape, nets_.linear_qs, h)};
}

LevelOutput CascadeModel::level1_span_context(Tape& tape, const SpanFeatures& f, const DropoutState& dropout) const {
  std::vector<double> x(f.average.storage());
  x.insert(x.end(), f.left.storage().begin(), f.left.storage().end());
  x.insert(x.end(), f.right.storage().begin(), f.right.storage().end());
  x.push_back(f.gamma);
  const NodeId h = ffnn(tape, nets_.ffnn_c, tape.constant(Tensor::vector(std::move(x))), dropout);
  return {h, linear(tape, nets_.linear_c, h)};
}

LevelOutput CascadeModel::level1_combined(Tape& tape, NodeId s_tilde, NodeId q_tilde, const SpanFeatures& f,
                                          const DropoutState& dropout) const {
  const NodeId parts[] = {s_tilde, q_tilde, tape.constant(f.left), tape.constant(f.right),
                          scalar_const(tape, f.gamma)};
  const NodeId h = ffnn(tape, nets_.ffnn_comb, tape.concat(parts), dropout);
  return {h, linear(tape, nets_.linear_comb, h)};
}

SentenceAttention CascadeModel::sentence_attention(Tape& tape, const QuestionNodes& q, const Tensor& sentence,
                                                   const DropoutState& dropout) const {
  if (!q.attend) throw ContractError("sentence attention needs the question attention rows");
  if (!sentence.is_matrix() || sentence.cols() != config_.embedding_dim)
    throw DimensionError("sentence embeddings " + sentence.shape_string() + " do not match dimension " +
                         std::to_string(config_.embedding_dim));
  g_attention_count.fetch_add(1, std::memory_order_relaxed);
  const std::size_t g = sentence.rows();
  const NodeId d = tape.constant(sentence);
  std::vector<NodeId> tokens, rows;
  for (std::size_t j = 0; j < g; ++j) {
    auto r = sentence.row(j);
    tokens.push_back(tape.constant(Tensor::vector(std::vector<double>(r.begin(), r.end()))));
    rows.push_back(ffnn(tape, nets_.ffnn_att1, tokens.back(), dropout));
  }
  SentenceAttention out;
  const NodeId eta = tape.matmul_nt(*q.attend, tape.stack(rows));
  out.eta = eta;
  out.alpha = tape.softmax_rows(eta);
  out.beta = tape.softmax_rows(tape.transpose(eta));
  const NodeId q_att = tape.matmul(out.alpha, d);         // m x E
  const NodeId d_att = tape.matmul(out.beta, q.matrix);   // G x E

  std::vector<NodeId> compared;
  for (std::size_t i = 0; i < q.tokens.size(); ++i) {
    const NodeId parts[] = {q.tokens[i], tape.row(q_att, i)};
    compared.push_back(ffnn(tape, nets_.ffnn_att2, tape.concat(parts), dropout));
  }
  out.question_summary = sum(tape, compared);
  compared.clear();
  for (std::size_t j = 0; j < g; ++j) {
    const NodeId parts[] = {tokens[j], tape.row(d_att, j)};
    compared.push_back(ffnn(tape, nets_.ffnn_att2, tape.concat(parts), dropout));
  }
  out.sentence_summary = sum(tape, compared);
  return out;
}

LevelOutput CascadeModel::level2(Tape& tape, std::span<const NodeId> level1, const SentenceAttention& att,
                                 double gamma, const DropoutState& dropout) const {
  std::vector<NodeId> parts(level1.begin(), level1.end());
  parts.push_back(att.question_summary);
  parts.push_back(att.sentence_summary);
  parts.push_back(scalar_const(tape, gamma));
  const NodeId h = ffnn(tape, nets_.ffnn_l2, tape.concat(parts), dropout);
  return {h, linear(tape, nets_.linear_l2, h)};
}

NodeId CascadeModel::mention_vector(Tape& tape, NodeId h3, double gamma, const DropoutState& dropout) const {
  const NodeId parts[] = {h3, scalar_const(tape, gamma)};
  return ffnn(tape, nets_.ffnn_agg, tape.concat(parts), dropout);
}

LevelOutput CascadeModel::level3(Tape& tape, std::span<const NodeId> mentions, const DropoutState& dropout) const {
  if (mentions.empty()) throw ContractError("level 3 needs at least one mention");
  const NodeId h = ffnn(tape, nets_.ffnn_l3, sum(tape, mentions), dropout);
  return {h, linear(tape, nets_.linear_l3, h)};
}

CascadeGraph CascadeModel::forward(Tape& tape, const EncodedExample& enc, const PreparedExample& ex,
                                   const DropoutState& dropout) const {
  if (ex.spans.empty()) throw EmptyCandidateError("example '" + ex.id + "' has no candidate spans");
  const auto& l = config_.layout;
  CascadeGraph graph;
  const QuestionNodes q = question(tape, enc.question, dropout);
  graph.question_weights = q.weights;

  if (l.level2) {
    for (const auto& s : ex.sentences)
      graph.attention.push_back(
          sentence_attention(tape, q, enc.documents[s.document].rows(s.range.begin, s.range.end), dropout));
  }

  std::vector<NodeId> phi1, phi2, phi3, mention;
  for (std::size_t i = 0; i < ex.spans.size(); ++i) {
    const SpanCandidate& sp = ex.spans[i];
    const double gamma = ex.gamma[i];
    const SpanFeatures f = span_features(enc, sp, gamma, config_.context);
    std::vector<NodeId> hidden;
    if (l.question_span || l.combined) {
      const NodeId st = span_tilde(tape, f);
      const LevelOutput o = l.combined ? level1_combined(tape, st, *q.vector, f, dropout)
                                       : level1_question_span(tape, st, *q.vector, gamma, dropout);
      hidden.push_back(o.h);
      phi1.push_back(o.phi);
    }
    if (l.span_context) {
      const LevelOutput o = level1_span_context(tape, f, dropout);
      hidden.push_back(o.h);
      phi2.push_back(o.phi);
    }
    if (l.level2) {
      const LevelOutput o = level2(tape, hidden, graph.attention[ex.global_sentence(sp)], gamma, dropout);
      phi3.push_back(o.phi);
      if (l.level3) mention.push_back(mention_vector(tape, o.h, gamma, dropout));
    }
  }
  if (!phi1.empty()) graph.phi1 = tape.concat(phi1);
  if (!phi2.empty()) graph.phi2 = tape.concat(phi2);
  if (!phi3.empty()) graph.phi3 = tape.concat(phi3);
  if (l.level3) {
    std::vector<NodeId> phi4, ms;
    std::vector<std::size_t> order;
    for (const auto& u : ex.uniques) {
      order = u.mentions;
      std::sort(order.begin(), order.end());
      ms.clear();
      for (std::size_t m : order) ms.push_back(mention[m]);
      phi4.push_back(level3(tape, ms, dropout).phi);
    }
    graph.phi4 = tape.concat(phi4);
  }
  return graph;
}

std::vector<double> softmax_values(std::span<const double> scores) {
  if (scores.empty()) throw EmptyCandidateError("softmax over an empty candidate set");
  const double mx = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - mx);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

CascadeDistributions distributions(const CascadeScores& scores) {
  CascadeDistributions d;
  if (!scores.phi1.empty()) d.p1 = softmax_values(scores.phi1);
  if (!scores.phi2.empty()) d.p2 = softmax_values(scores.phi2);
  if (!scores.phi3.empty()) d.p3 = softmax_values(scores.phi3);
  if (!scores.phi4.empty()) d.p4 = softmax_values(scores.phi4);
  if (d.p1.empty() && d.p2.empty() && d.p3.empty() && d.p4.empty())
    throw EmptyCandidateError("no candidate scores");
  return d;
}

std::vector<double> candidate_scores(const CascadeScores& scores, const PreparedExample& ex,
                                     const CascadeLayout& layout) {
  if (layout.level3) return scores.phi4;
  std::vector<double> span_score;
  if (layout.level2) {
    span_score = scores.phi3;
  } else if (!scores.phi1.empty() && !scores.phi2.empty()) {
    span_score.resize(scores.phi1.size());
    for (std::size_t i = 0; i < span_score.size(); ++i) span_score[i] = scores.phi1[i] + scores.phi2[i];
  } else {
    span_score = scores.phi1.empty() ? scores.phi2 : scores.phi1;
  }
  std::vector<double> out(ex.uniques.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t u = 0; u < ex.uniques.size(); ++u)
    for (std::size_t m : ex.uniques[u].mentions) out[u] = std::max(out[u], span_score[m]);
  return out;
}

std::optional<std::size_t> argmax(std::span<const double> scores) {
  if (scores.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
  idx.resize(k);
  return idx;
}

Prediction predict(const CascadeScores& scores, const PreparedExample& ex, const CascadeLayout& layout) {
  Prediction p;
  if (ex.uniques.empty()) return p;
  const auto cs = candidate_scores(scores, ex, layout);
  const std::size_t u = *argmax(cs);
  p.answerable = true;
  p.unique = u;
  p.text = ex.unique_text(u);
  p.score = cs[u];
  p.mentions = ex.uniques[u].mentions.size();
  return p;
}

}  // namespace cascadeqa
