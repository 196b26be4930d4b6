#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "cascadeqa/model/cascade.hpp"
#include "cascadeqa/model/checkpoint.hpp"
#include "cascadeqa/training/trainer.hpp"
#include "cascadeqa/util/error.hpp"
#include "cascadeqa/util/random.hpp"
#include "cascadeqa/util/thread_pool.hpp"
#include "fixtures.hpp"

namespace cascadeqa {
namespace {

using fixtures::prepare_one;
using fixtures::random_table;
using fixtures::small_config;

EmbeddedSequence sequence(Rng& rng, std::size_t n, std::size_t dim) {
  EmbeddedSequence s{n, dim, std::vector<double>(n * dim)};
  for (double& v : s.data) v = rng.uniform(-1.0, 1.0);
  return s;
}

void zero_all(CascadeModel& m) {
  for (ParamId id = 0; id < m.parameters().size(); ++id) m.parameters().value(id).fill(0.0);
}

TEST(QuestionVector, SingleTokenIsIdentity) {
  CascadeModel m(small_config(5, 4));
  Rng rng(1);
  auto q = sequence(rng, 1, 5);
  Tape t(m.parameters());
  auto nodes = m.question(t, q, DropoutState::off());
  const Tensor qt = t.value(*nodes.vector);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(qt[k], q.data[k]);
}

TEST(QuestionVector, EqualLogitsGiveMean) {
  CascadeModel m(small_config(5, 4));
  m.parameters().value(m.nets().linear_q.w).fill(0.0);
  Rng rng(2);
  auto q = sequence(rng, 4, 5);
  Tape t(m.parameters());
  auto nodes = m.question(t, q, DropoutState::off());
  const Tensor qt = t.value(*nodes.vector);
  for (std::size_t k = 0; k < 5; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 4; ++i) mean += q.row(i)[k];
    EXPECT_NEAR(qt[k], mean / 4.0, 1e-15);
  }
}

TEST(QuestionVector, WeightsSumToOne) {
  CascadeModel m(small_config(6, 5));
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto q = sequence(rng, 1 + rng.below(12), 6);
    Tape t(m.parameters());
    auto nodes = m.question(t, q, DropoutState::off());
    const Tensor w = t.value(*nodes.weights);
    double total = 0.0;
    for (double v : w.values()) {
      EXPECT_GE(v, 0.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(QuestionVector, EmptyQuestionRejected) {
  CascadeModel m(small_config(3, 3));
  Tape t(m.parameters());
  EXPECT_THROW(m.question(t, EmbeddedSequence{0, 3, {}}, DropoutState::off()), ContractError);
}

TEST(QuestionVector, WrongDimensionNamed) {
  CascadeModel m(small_config(3, 3));
  Tape t(m.parameters());
  EXPECT_THROW(m.question(t, EmbeddedSequence{1, 4, {1, 2, 3, 4}}, DropoutState::off()), DimensionError);
}

EncodedExample doc_encoding(std::vector<std::vector<double>> rows) {
  EncodedExample enc;
  enc.documents.push_back({rows.size(), rows[0].size(), {}});
  for (auto& r : rows) enc.documents[0].data.insert(enc.documents[0].data.end(), r.begin(), r.end());
  return enc;
}

TEST(SpanFeatures, SingleTokenAndGamma) {
  auto enc = doc_encoding({{1, 2}, {3, 4}, {5, 6}});
  CascadeModel m(small_config(2, 3));
  auto f = span_features(enc, {.begin = 1, .end = 2}, 1.0, 1);
  Tape t(m.parameters());
  const Tensor st = t.value(m.span_tilde(t, f));
  EXPECT_EQ(st, Tensor::vector({3, 4, 1}));
  auto f0 = span_features(enc, {.begin = 1, .end = 2}, 0.0, 1);
  EXPECT_EQ(t.value(m.span_tilde(t, f0))[2], 0.0);
}

TEST(SpanFeatures, IdenticalTokensAverageToEither) {
  auto enc = doc_encoding({{0.3, -0.7}, {0.3, -0.7}});
  auto f = span_features(enc, {.begin = 0, .end = 2}, 0.0, 1);
  EXPECT_EQ(f.average, Tensor::vector({0.3, -0.7}));
}

TEST(SpanFeatures, ContextPadding) {
  auto enc = doc_encoding({{1, 2}, {3, 4}, {5, 6}});
  auto start = span_features(enc, {.begin = 0, .end = 1}, 0.0, 1);
  EXPECT_EQ(start.left, Tensor::vector({0, 0}));
  EXPECT_EQ(start.right, Tensor::vector({3, 4}));
  auto mid = span_features(enc, {.begin = 1, .end = 2}, 0.0, 1);
  EXPECT_EQ(mid.left, Tensor::vector({1, 2}));
  auto end = span_features(enc, {.begin = 1, .end = 3}, 0.0, 1);
  EXPECT_EQ(end.right, Tensor::vector({0, 0}));
  // K=2 averages two positions, the missing one counting as zero.
  auto k2 = span_features(enc, {.begin = 1, .end = 2}, 0.0, 2);
  EXPECT_EQ(k2.left, Tensor::vector({0.5, 1.0}));
}

TEST(Level1, ZeroParamsGiveBias) {
  CascadeModel m(small_config(3, 4));
  zero_all(m);
  m.parameters().value(m.nets().linear_qs.z)[0] = 0.7;
  m.parameters().value(m.nets().linear_c.z)[0] = -1.5;
  Tape t(m.parameters());
  auto enc = doc_encoding({{1, 2, 3}, {4, 5, 6}});
  auto f = span_features(enc, {.begin = 0, .end = 1}, 1.0, 1);
  const NodeId q = t.constant(Tensor::vector({0.1, 0.2, 0.3}));
  EXPECT_EQ(t.value(m.level1_question_span(t, m.span_tilde(t, f), q, 1.0, DropoutState::off()).phi).item(), 0.7);
  EXPECT_EQ(t.value(m.level1_span_context(t, f, DropoutState::off()).phi).item(), -1.5);
}

TEST(Level1, IdenticalSpansScoreIdentically) {
  CascadeModel m(small_config(3, 4));
  Tape t(m.parameters());
  auto enc = doc_encoding({{1, 2, 3}, {-1, 0, 2}, {1, 2, 3}});
  const NodeId q = t.constant(Tensor::vector({0.1, 0.2, 0.3}));
  auto a = span_features(enc, {.begin = 0, .end = 1}, 1.0, 1);
  auto b = span_features(enc, {.begin = 2, .end = 3}, 1.0, 1);
  const double pa = t.value(m.level1_question_span(t, m.span_tilde(t, a), q, 1.0, DropoutState::off()).phi).item();
  const double pb = t.value(m.level1_question_span(t, m.span_tilde(t, b), q, 1.0, DropoutState::off()).phi).item();
  EXPECT_EQ(pa, pb);
}

TEST(Level1, NoGradientIntoAttention) {
  CascadeModel m(small_config(3, 4));
  Tape t(m.parameters());
  Rng rng(4);
  auto q = sequence(rng, 3, 3);
  auto nodes = m.question(t, q, DropoutState::off());
  auto enc = doc_encoding({{1, 2, 3}, {-1, 0, 2}});
  auto f = span_features(enc, {.begin = 0, .end = 2}, 0.0, 1);
  auto out = m.level1_question_span(t, m.span_tilde(t, f), *nodes.vector, 0.0, DropoutState::off());
  auto g = backward(t, out.phi);
  for (const auto& layer : m.nets().ffnn_att1.layers) {
    for (double v : g[layer.weight].values()) EXPECT_EQ(v, 0.0);
    for (double v : g[layer.bias].values()) EXPECT_EQ(v, 0.0);
  }
  double mass = 0.0;
  for (double v : g[m.nets().ffnn_q.layers[0].weight].values()) mass += std::abs(v);
  EXPECT_GT(mass, 0.0);
}

// Independent forward of a plain ffnn on raw vectors.
std::vector<double> ffnn_oracle(const ParameterStore& s, const FfnnParams& p, std::vector<double> x) {
  for (const auto& layer : p.layers) {
    const Tensor& w = s.value(layer.weight);
    const Tensor& b = s.value(layer.bias);
    std::vector<double> y(w.rows());
    for (std::size_t r = 0; r < w.rows(); ++r) {
      double acc = b[r];
      for (std::size_t c = 0; c < w.cols(); ++c) acc += w.at(r, c) * x[c];
      y[r] = std::max(0.0, acc);
    }
    x = std::move(y);
  }
  return x;
}

TEST(Attention, SingletonWeightsAreOne) {
  CascadeModel m(small_config(3, 4));
  Rng rng(5);
  auto q = sequence(rng, 1, 3);
  auto d = sequence(rng, 1, 3);
  Tape t(m.parameters());
  auto nodes = m.question(t, q, DropoutState::off());
  auto att = m.sentence_attention(t, nodes, d.rows(0, 1), DropoutState::off());
  EXPECT_EQ(t.value(att.alpha).item(), 1.0);
  EXPECT_EQ(t.value(att.beta).item(), 1.0);
  std::vector<double> qd(q.data), dq(d.data);
  qd.insert(qd.end(), d.data.begin(), d.data.end());
  dq.insert(dq.end(), q.data.begin(), q.data.end());
  const auto qbar = ffnn_oracle(m.parameters(), m.nets().ffnn_att2, qd);
  const auto gbar = ffnn_oracle(m.parameters(), m.nets().ffnn_att2, dq);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_NEAR(t.value(att.question_summary)[k], qbar[k], 1e-12);
    EXPECT_NEAR(t.value(att.sentence_summary)[k], gbar[k], 1e-12);
  }
}

TEST(Attention, SymmetricWhenQuestionEqualsSentence) {
  CascadeModel m(small_config(4, 5));
  Rng rng(6);
  auto q = sequence(rng, 4, 4);
  Tape t(m.parameters());
  auto nodes = m.question(t, q, DropoutState::off());
  auto att = m.sentence_attention(t, nodes, q.rows(0, 4), DropoutState::off());
  const Tensor eta = t.value(att.eta);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(eta.at(i, j), eta.at(j, i));
}

TEST(Attention, PermutingSentencePermutesColumns) {
  CascadeModel m(small_config(4, 5));
  Rng rng(7);
  auto q = sequence(rng, 2, 4);
  auto d = sequence(rng, 3, 4);
  const std::size_t perm[3] = {2, 0, 1};
  EmbeddedSequence dp{3, 4, {}};
  for (std::size_t j : perm) dp.data.insert(dp.data.end(), d.row(j).begin(), d.row(j).end());

  Tape t(m.parameters());
  auto nodes = m.question(t, q, DropoutState::off());
  auto a = m.sentence_attention(t, nodes, d.rows(0, 3), DropoutState::off());
  auto b = m.sentence_attention(t, nodes, dp.rows(0, 3), DropoutState::off());
  const Tensor ea = t.value(a.eta), eb = t.value(b.eta);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(eb.at(i, j), ea.at(i, perm[j]));
  const Tensor qa = t.value(a.question_summary), qb = t.value(b.question_summary);
  const Tensor ga = t.value(a.sentence_summary), gb = t.value(b.sentence_summary);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_NEAR(qa[k], qb[k], 1e-12);
    EXPECT_NEAR(ga[k], gb[k], 1e-12);
  }
}

TEST(Attention, RowsAndColumnsAreDistributions) {
  CascadeModel m(small_config(4, 5));
  Rng rng(8);
  auto q = sequence(rng, 5, 4);
  auto d = sequence(rng, 7, 4);
  Tape t(m.parameters());
  auto nodes = m.question(t, q, DropoutState::off());
  auto att = m.sentence_attention(t, nodes, d.rows(0, 7), DropoutState::off());
  for (NodeId id : {att.alpha, att.beta}) {
    const Tensor w = t.value(id);
    for (std::size_t r = 0; r < w.rows(); ++r) {
      auto row = w.row(r);
      EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-12);
    }
  }
}

TEST(Level2, SameSentenceSameInputsSameScore) {
  CascadeModel m(small_config(3, 4));
  Rng rng(9);
  auto q = sequence(rng, 2, 3);
  auto d = sequence(rng, 4, 3);
  Tape t(m.parameters());
  auto nodes = m.question(t, q, DropoutState::off());
  auto att = m.sentence_attention(t, nodes, d.rows(0, 4), DropoutState::off());
  const NodeId h1 = t.constant(Tensor::vector({0.5, 0.1, 0.0, 0.3}));
  const NodeId h2 = t.constant(Tensor::vector({0.2, 0.0, 0.9, 0.4}));
  const NodeId hs[] = {h1, h2};
  const double a = t.value(m.level2(t, hs, att, 1.0, DropoutState::off()).phi).item();
  const double b = t.value(m.level2(t, hs, att, 1.0, DropoutState::off()).phi).item();
  EXPECT_EQ(a, b);
  const double c = t.value(m.level2(t, hs, att, 0.0, DropoutState::off()).phi).item();
  EXPECT_NE(a, c);
}

TEST(Level2, ZeroParamsGiveBias) {
  CascadeModel m(small_config(3, 4));
  zero_all(m);
  m.parameters().value(m.nets().linear_l2.z)[0] = 2.25;
  Rng rng(10);
  auto q = sequence(rng, 2, 3);
  auto d = sequence(rng, 2, 3);
  Tape t(m.parameters());
  auto nodes = m.question(t, q, DropoutState::off());
  auto att = m.sentence_attention(t, nodes, d.rows(0, 2), DropoutState::off());
  const NodeId hs[] = {t.constant(Tensor::zeros(4)), t.constant(Tensor::zeros(4))};
  EXPECT_EQ(t.value(m.level2(t, hs, att, 1.0, DropoutState::off()).phi).item(), 2.25);
}

TEST(Level2, GradientReachesLevel1) {
  CascadeModel m(small_config(3, 4, 21));
  auto table = random_table({"pollock", "painted", "works", "krasner", "married", "who", "?", "."}, 3, 5);
  auto p = prepare_one(fixtures::toy_example(), table);
  // phi3 of the first span as a function of the parameters.
  auto phi3 = [&](const ParameterStore& s, Gradients* g) {
    Tape t(s);
    auto graph = m.forward(t, p.encoded, p.example, DropoutState::off());
    const NodeId root = t.gather(*graph.phi3, {0});
    if (g) {
      t.backward(root);
      *g = t.parameter_gradients();
    }
    return t.value(root).item();
  };
  Gradients g;
  phi3(m.parameters(), &g);
  const ParamId w = m.nets().ffnn_qs.layers[0].weight;
  double mass = 0.0;
  for (double v : g[w].values()) mass += std::abs(v);
  EXPECT_GT(mass, 0.0);
  // Analytic entry against a central difference.
  std::size_t k = 0;
  for (; k < g[w].size(); ++k)
    if (std::abs(g[w][k]) > 1e-6) break;
  ASSERT_LT(k, g[w].size());
  double& theta = m.parameters().value(w)[k];
  const double saved = theta;
  theta = saved + 1e-5;
  const double up = phi3(m.parameters(), nullptr);
  theta = saved - 1e-5;
  const double down = phi3(m.parameters(), nullptr);
  theta = saved;
  EXPECT_NEAR(g[w][k], (up - down) / 2e-5, 1e-6 + 1e-4 * std::abs(g[w][k]));
}

TEST(Level3, SingletonComposition) {
  CascadeModel m(small_config(3, 4));
  Tape t(m.parameters());
  const std::vector<double> h3{0.4, 0.0, 1.2, 0.7};
  const NodeId mv = m.mention_vector(t, t.constant(Tensor::vector(h3)), 1.0, DropoutState::off());
  const NodeId ms[] = {mv};
  auto out = m.level3(t, ms, DropoutState::off());
  std::vector<double> x = h3;
  x.push_back(1.0);
  const auto h4 = ffnn_oracle(m.parameters(), m.nets().ffnn_l3, ffnn_oracle(m.parameters(), m.nets().ffnn_agg, x));
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(t.value(out.h)[k], h4[k], 1e-12);
}

TEST(Level3, EmptyMentionsRejected) {
  CascadeModel m(small_config(3, 4));
  Tape t(m.parameters());
  EXPECT_THROW(m.level3(t, {}, DropoutState::off()), ContractError);
}

TEST(Level3, DuplicateMentionChangesScore) {
  CascadeModel m(small_config(3, 4, 3));
  Tape t(m.parameters());
  const NodeId mv = m.mention_vector(t, t.constant(Tensor::vector({0.4, 0.3, 1.2, 0.7})), 1.0, DropoutState::off());
  const NodeId one[] = {mv};
  const NodeId two[] = {mv, mv};
  EXPECT_NE(t.value(m.level3(t, one, DropoutState::off()).phi).item(),
            t.value(m.level3(t, two, DropoutState::off()).phi).item());
}

TEST(Level3, MentionPermutationIsBitwiseInvariant) {
  auto corpus = fixtures::multi_mention_corpus(3, 17, false);
  auto table = random_table(fixtures::vocabulary(corpus), 6, 3);
  CascadeModel m(small_config(6, 5));
  for (const auto& ex : corpus) {
    auto p = prepare_one(ex, table);
    Tape t1(m.parameters());
    const Tensor base = t1.value(*m.forward(t1, p.encoded, p.example, DropoutState::off()).phi4);
    Rng rng(1);
    for (auto& u : p.example.uniques) rng.shuffle(u.mentions);
    Tape t2(m.parameters());
    EXPECT_EQ(t2.value(*m.forward(t2, p.encoded, p.example, DropoutState::off()).phi4), base);
    EXPECT_EQ(m.score(p.encoded, p.example).phi4, base.storage());
  }
}

TEST(Distributions, UniformAndSingleton) {
  CascadeScores s;
  s.phi1 = {2.0, 2.0, 2.0, 2.0};
  s.phi4 = {7.0};
  auto d = distributions(s);
  for (double p : d.p1) EXPECT_EQ(p, 0.25);
  EXPECT_EQ(d.p4, std::vector<double>{1.0});
  EXPECT_THROW(distributions(CascadeScores{}), EmptyCandidateError);
}

TEST(Distributions, ShiftInvariant) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    CascadeScores a, b;
    const double c = rng.uniform(-50, 50);
    for (std::size_t i = 0, n = 1 + rng.below(30); i < n; ++i) {
      a.phi4.push_back(rng.uniform(-5, 5));
      b.phi4.push_back(a.phi4.back() + c);
    }
    auto pa = distributions(a).p4, pb = distributions(b).p4;
    EXPECT_NEAR(std::accumulate(pa.begin(), pa.end(), 0.0), 1.0, 1e-12);
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_NEAR(pa[i], pb[i], 1e-12);
    EXPECT_EQ(argmax(a.phi4), argmax(b.phi4));
  }
}

TEST(Predict, ArgmaxAndTies) {
  EXPECT_EQ(argmax(std::vector<double>{1, 5, 2}), 1u);
  EXPECT_EQ(argmax(std::vector<double>{3, 1, 3}), 0u);
  EXPECT_EQ(argmax(std::vector<double>{4}), 0u);
  EXPECT_FALSE(argmax(std::vector<double>{}).has_value());
  EXPECT_EQ(top_k(std::vector<double>{1, 5, 2, 5}, 3), (std::vector<std::size_t>{1, 3, 2}));
}

TEST(Predict, UsesHighestLevel) {
  auto ex = prepare_example({"p", "Who ?", {"a b a ."}, {"b"}}, {}).at(0);
  std::size_t ua = 0, ub = 0;
  for (std::size_t u = 0; u < ex.uniques.size(); ++u) {
    if (ex.unique_text(u) == "a") ua = u;
    if (ex.unique_text(u) == "b") ub = u;
  }
  ASSERT_NE(ua, ub);
  CascadeScores s;
  s.phi4.assign(ex.uniques.size(), 0.0);
  s.phi4[ub] = 3.0;
  CascadeLayout full;
  auto p = predict(s, ex, full);
  EXPECT_TRUE(p.answerable);
  EXPECT_EQ(p.text, "b");
  EXPECT_EQ(p.score, 3.0);

  CascadeLayout l12;
  l12.level3 = false;
  s.phi3.assign(ex.spans.size(), -1.0);
  s.phi3[ex.uniques[ua].mentions.back()] = 9.0;
  auto q = predict(s, ex, l12);
  EXPECT_EQ(q.text, "a");
  EXPECT_EQ(q.mentions, 2u);
  EXPECT_EQ(q.score, 9.0);
}

TEST(Predict, NoCandidatesIsUnanswerable) {
  PreparedExample empty;
  EXPECT_FALSE(predict(CascadeScores{}, empty, CascadeLayout{}).answerable);
}

TEST(Cascade, ScoreMatchesTapeForwardBitwise) {
  auto corpus = fixtures::keyed_corpus(4, 3, false);
  auto table = random_table(fixtures::vocabulary(corpus), 6, 9);
  WorkerPool pool(3);
  for (const auto& name : ablation_names()) {
    TrainConfig tc = ablation_config(name);
    tc.hidden = 5;
    CascadeModel m(model_config(tc, 6));
    for (const auto& ex : corpus) {
      auto p = prepare_one(ex, table);
      Tape t(m.parameters());
      auto g = m.forward(t, p.encoded, p.example, DropoutState::off());
      auto s = m.score(p.encoded, p.example);
      auto sp = m.score(p.encoded, p.example, &pool);
      const std::optional<NodeId> nodes[4] = {g.phi1, g.phi2, g.phi3, g.phi4};
      const std::vector<double>* vals[4] = {&s.phi1, &s.phi2, &s.phi3, &s.phi4};
      const std::vector<double>* pvals[4] = {&sp.phi1, &sp.phi2, &sp.phi3, &sp.phi4};
      for (int k = 0; k < 4; ++k) {
        if (!nodes[k]) {
          EXPECT_TRUE(vals[k]->empty()) << name;
          continue;
        }
        EXPECT_EQ(t.value(*nodes[k]).storage(), *vals[k]) << name << " level " << k + 1;
        EXPECT_EQ(*pvals[k], *vals[k]) << name << " level " << k + 1;
      }
    }
  }
}

TEST(Cascade, LocalityOfLevel1Scores) {
  auto table = random_table({"a", "b", "c", "d", "e", "f", "g", "h", "x", "y", "who", "?", "."}, 5, 2);
  CascadeModel m(small_config(5, 4));
  auto p1 = prepare_one({"l", "who ?", {"a b c . d e f . g h ."}, {"a"}}, table);
  auto p2 = prepare_one({"l", "who ?", {"a b c . d e f . x y ."}, {"a"}}, table);
  auto s1 = m.score(p1.encoded, p1.example);
  auto s2 = m.score(p2.encoded, p2.example);
  // Spans of the first sentence are far from the edit.
  for (std::size_t i = 0; i < p1.example.spans.size(); ++i) {
    if (p1.example.spans[i].sentence != 0) continue;
    EXPECT_EQ(s1.phi1[i], s2.phi1[i]);
    EXPECT_EQ(s1.phi2[i], s2.phi2[i]);
  }
}

TEST(Cascade, AttentionCountEqualsSentenceCount) {
  CascadeModel m(small_config(4, 3));
  auto table = random_table({"w", "v", "q", "."}, 4, 1);
  for (std::size_t n_sent : {1u, 7u, 1000u}) {
    std::string doc;
    for (std::size_t s = 0; s < n_sent; ++s) doc += s % 2 ? "w v w . " : "v w .  ";
    auto p = prepare_one({"a", "q ?", {doc}, {"w"}}, table);
    ASSERT_EQ(p.example.sentences.size(), n_sent);
    reset_attention_count();
    m.score(p.encoded, p.example);
    EXPECT_EQ(attention_count(), n_sent);
    EXPECT_GT(p.example.spans.size(), n_sent);
    if (n_sent <= 7) {
      reset_attention_count();
      Tape t(m.parameters());
      m.forward(t, p.encoded, p.example, DropoutState::off());
      EXPECT_EQ(attention_count(), n_sent);
    }
  }
}

TEST(Cascade, FullLossGradientCheck) {
  auto ex = fixtures::toy_example();
  auto table = random_table(fixtures::vocabulary({ex}), 6, 12);
  auto p = prepare_one(ex, table);
  ASSERT_EQ(p.example.gold_span_count, 2u);
  ASSERT_EQ(p.example.sentences.size(), 3u);
  for (const auto& name : ablation_names()) {
    TrainConfig tc = ablation_config(name);
    tc.hidden = 5;
    tc.seed = 31;
    CascadeModel m(model_config(tc, 6));
    LossFunction fn = [&](const ParameterStore& s, Gradients* g) {
      return loss_and_gradients(m, s, p.example, p.encoded, tc.weights, g);
    };
    auto r = finite_difference_check(fn, m.parameters(), 1e-5);
    EXPECT_LT(r.max_relative_error, 1e-3) << name << " worst " << r.worst_parameter << "[" << r.worst_index << "]";
    EXPECT_EQ(r.checked, m.parameters().scalar_count());
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  ModelConfig c = small_config(4, 3, 99);
  c.layout.level3 = false;
  c.context = 2;
  CascadeModel m(c);
  std::stringstream ss;
  write_checkpoint(ss, m);
  const std::string bytes = ss.str();
  auto back = read_checkpoint(ss);
  EXPECT_EQ(back.config(), m.config());
  EXPECT_EQ(back.parameters(), m.parameters());
  std::stringstream again;
  write_checkpoint(again, back);
  EXPECT_EQ(again.str(), bytes);
}

TEST(Checkpoint, AtomicSaveAndLoad) {
  const auto dir = std::filesystem::temp_directory_path() / "cascadeqa_ckpt_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "m.ckpt").string();
  CascadeModel m(small_config(3, 2));
  save_checkpoint(path, m);
  EXPECT_FALSE(std::filesystem::exists(path + ".tmp"));
  EXPECT_EQ(load_checkpoint(path).parameters(), m.parameters());
  std::filesystem::remove_all(dir);
  EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST(Checkpoint, VersionAndMagicChecked) {
  CascadeModel m(small_config(3, 2));
  std::stringstream ss;
  write_checkpoint(ss, m);
  std::string bytes = ss.str();
  std::string bad_version = bytes;
  bad_version[8] = 7;
  std::istringstream a(bad_version);
  EXPECT_THROW(read_checkpoint(a), VersionError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::istringstream b(bad_magic);
  EXPECT_THROW(read_checkpoint(b), VersionError);
  std::istringstream c(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(read_checkpoint(c), ParseError);
}

TEST(Checkpoint, LayoutMismatchIsVersionError) {
  CascadeModel m(small_config(3, 2));
  ModelConfig other = m.config();
  other.hidden = 3;
  EXPECT_THROW(CascadeModel(other, m.parameters()), VersionError);
}

}  // namespace
}  // namespace cascadeqa
