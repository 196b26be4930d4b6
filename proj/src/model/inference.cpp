#include <algorithm>
#include <cmath>

#include "cascadeqa/model/cascade.hpp"
#include "cascadeqa/kernels/kernels.hpp"
#include "cascadeqa/util/error.hpp"
#include "cascadeqa/util/thread_pool.hpp"

namespace cascadeqa {
namespace {

void run(WorkerPool* pool, std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
  if (pool) {
    pool->parallel_for(n, body);
  } else {
    for (std::size_t i = 0; i < n; ++i) body(i, 0);
  }
}

// Question-side values copied into each sentence tape as constants.
struct QuestionValues {
  Tensor vector;
  Tensor attend;
};

void require_finite(const char* op, std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite value in forward pass");
}

// Inference-only ffnn followed by linear, using the same kernels in the same
// order as the tape so the result is bitwise equal. `x` is overwritten.
double ffnn_linear(const ParameterStore& ps, const FfnnParams& f, const LinearParams& lin, std::vector<double>& x,
                   std::vector<double>& y) {
  for (const DenseLayer& layer : f.layers) {
    const Tensor& w = ps.value(layer.weight);
    const Tensor& b = ps.value(layer.bias);
    y.assign(w.rows(), 0.0);
    kernels::gemv(w.data(), w.rows(), w.cols(), x.data(), y.data());
    require_finite("matvec", y);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
    require_finite("add", y);
    for (double& v : y) v = v > 0.0 ? v : 0.0;
    std::swap(x, y);
  }
  const Tensor& w = ps.value(lin.w);
  double phi = kernels::dot(w.data(), x.data(), x.size());
  require_finite("dot", std::span<const double>(&phi, 1));
  phi += ps.value(lin.z)[0];
  require_finite("add", std::span<const double>(&phi, 1));
  return phi;
}

}  // namespace

CascadeScores CascadeModel::score(const EncodedExample& enc, const PreparedExample& ex, WorkerPool* pool) const {
  if (ex.spans.empty()) throw EmptyCandidateError("example '" + ex.id + "' has no candidate spans");
  const auto& l = config_.layout;
  const DropoutState off = DropoutState::off();
  const std::size_t n_spans = ex.spans.size();

  QuestionValues qv;
  {
    Tape qt(params_);
    const QuestionNodes q = question(qt, enc.question, off);
    if (q.vector) qv.vector = qt.value(*q.vector);
    if (q.attend) qv.attend = qt.value(*q.attend);
  }

  CascadeScores out;
  if (l.question_span || l.combined) out.phi1.resize(n_spans);
  if (l.span_context) out.phi2.resize(n_spans);
  if (l.level2) out.phi3.resize(n_spans);
  if (l.level3) out.phi4.resize(ex.uniques.size());

  // Spans are ordered by sentence, so each sentence owns a contiguous range.
  const std::size_t n_sent = ex.sentences.size();
  std::vector<std::size_t> first(n_sent + 1, n_spans);
  for (std::size_t i = n_spans; i-- > 0;) first[ex.global_sentence(ex.spans[i])] = i;
  for (std::size_t s = n_sent; s-- > 0;) first[s] = std::min(first[s], first[s + 1]);

  const std::size_t width = config_.hidden;
  auto score_sentence = [&](std::size_t s, double* mentions, std::size_t base) {
    Tape t(params_);
    QuestionNodes q;
    std::optional<NodeId> q_tilde;
    if (qv.vector.size() > 0) q_tilde = t.constant(qv.vector);
    std::optional<SentenceAttention> att;
    if (l.level2) {
      q.matrix = t.constant(enc.question.rows(0, enc.question.length));
      for (std::size_t i = 0; i < enc.question.length; ++i) {
        auto r = enc.question.row(i);
        q.tokens.push_back(t.constant(Tensor::vector(std::vector<double>(r.begin(), r.end()))));
      }
      q.attend = t.constant(qv.attend);
      const auto& ref = ex.sentences[s];
      att = sentence_attention(t, q, enc.documents[ref.document].rows(ref.range.begin, ref.range.end), off);
    }
    for (std::size_t i = first[s]; i < first[s + 1]; ++i) {
      const SpanCandidate& sp = ex.spans[i];
      const double gamma = ex.gamma[i];
      const SpanFeatures f = span_features(enc, sp, gamma, config_.context);
      NodeId hidden[2];
      std::size_t nh = 0;
      if (l.question_span || l.combined) {
        const NodeId st = span_tilde(t, f);
        const LevelOutput o = l.combined ? level1_combined(t, st, *q_tilde, f, off)
                                         : level1_question_span(t, st, *q_tilde, gamma, off);
        hidden[nh++] = o.h;
        out.phi1[i] = t.value(o.phi).item();
      }
      if (l.span_context) {
        const LevelOutput o = level1_span_context(t, f, off);
        hidden[nh++] = o.h;
        out.phi2[i] = t.value(o.phi).item();
      }
      if (l.level2) {
        const LevelOutput o = level2(t, std::span<const NodeId>(hidden, nh), *att, gamma, off);
        out.phi3[i] = t.value(o.phi).item();
        if (l.level3) {
          const Tensor& m = t.value(mention_vector(t, o.h, gamma, off));
          std::copy(m.data(), m.data() + width, mentions + (i - base) * width);
        }
      }
    }
  };

  if (!l.level3) {
    run(pool, n_sent, [&](std::size_t s, std::size_t) {
      score_sentence(s, nullptr, 0);
    });
    return out;
  }

  // Level 3 sums each candidate's mention vectors left to right in span order,
  // matching the tape's sum. Sentences are scored in blocks so only a block's
  // mention vectors and the still-open candidate sums are held in memory. Open
  // sums live in reusable slots of one flat buffer.
  constexpr std::size_t kNoSlot = static_cast<std::size_t>(-1);
  std::vector<std::size_t> last_mention(ex.uniques.size());
  for (std::size_t u = 0; u < ex.uniques.size(); ++u) {
    const auto& m = ex.uniques[u].mentions;
    last_mention[u] = *std::max_element(m.begin(), m.end());
  }
  std::vector<std::size_t> slot(ex.uniques.size(), kNoSlot);
  std::vector<std::size_t> free_slots;
  std::vector<double> sums;
  const std::size_t block = std::max<std::size_t>(64, 8 * (pool ? pool->size() : 1));
  std::vector<double> mentions;
  std::vector<std::size_t> ready;
  const std::size_t workers = pool ? pool->size() : 1;
  std::vector<std::vector<double>> scratch_x(workers), scratch_y(workers);
  for (std::size_t s0 = 0; s0 < n_sent; s0 += block) {
    const std::size_t s1 = std::min(n_sent, s0 + block);
    const std::size_t base = first[s0];
    mentions.resize((first[s1] - base) * width);
    run(pool, s1 - s0, [&](std::size_t k, std::size_t) { score_sentence(s0 + k, mentions.data(), base); });

    ready.clear();
    for (std::size_t i = base; i < first[s1]; ++i) {
      const std::size_t u = ex.spans[i].unique_id;
      const double* m = mentions.data() + (i - base) * width;
      if (slot[u] == kNoSlot) {
        if (free_slots.empty()) {
          slot[u] = sums.size() / width;
          sums.resize(sums.size() + width);
        } else {
          slot[u] = free_slots.back();
          free_slots.pop_back();
        }
        std::copy(m, m + width, sums.begin() + slot[u] * width);
      } else {
        double* a = sums.data() + slot[u] * width;
        for (std::size_t k = 0; k < width; ++k) a[k] += m[k];
      }
      if (last_mention[u] == i) ready.push_back(u);
    }
    run(pool, ready.size(), [&](std::size_t k, std::size_t w) {
      const std::size_t u = ready[k];
      const auto a = sums.begin() + slot[u] * width;
      std::vector<double>& x = scratch_x[w];
      x.assign(a, a + width);
      require_finite("constant", x);
      out.phi4[u] = ffnn_linear(params_, nets_.ffnn_l3, nets_.linear_l3, x, scratch_y[w]);
    });
    for (std::size_t u : ready) free_slots.push_back(slot[u]);
  }
  return out;
}

}  // namespace cascadeqa
