// Runs every acceptance criterion once and prints one PASS/FAIL line each.
// Exit status is the number of failing criteria (capped at 100).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "cascadeqa/bench/benchmark.hpp"
#include "cascadeqa/corpus/candidates.hpp"
#include "cascadeqa/eval/evaluate.hpp"
#include "cascadeqa/eval/metrics.hpp"
#include "cascadeqa/model/cascade.hpp"
#include "cascadeqa/training/gradcheck.hpp"
#include "cascadeqa/training/trainer.hpp"
#include "cascadeqa/util/random.hpp"
#include "fixtures.hpp"

namespace cascadeqa {
namespace {

namespace fs = std::filesystem;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::vector<std::string>> random_sentences(Rng& rng, std::size_t n, std::size_t max_len,
                                                       std::size_t vocab) {
  std::vector<std::vector<std::string>> s(n);
  for (auto& sent : s) {
    const std::size_t g = 1 + rng.below(max_len);
    for (std::size_t i = 0; i < g; ++i) sent.push_back("w" + std::to_string(rng.below(vocab)));
  }
  return s;
}

Verdict check_gradient_oracle() {
  GradcheckOptions opt;
  const auto r = run_gradcheck(opt);
  const bool toy = r.sentences == 3 && r.tokens == 12 && r.gold_spans == 2;
  std::ostringstream d;
  d << "max rel err " << r.result.max_relative_error << " over " << r.result.checked << " entries ("
    << r.result.worst_parameter << "), " << fmt("%.2f s", r.seconds) << ", toy " << r.sentences << "/" << r.tokens
    << "/" << r.gold_spans;
  return {toy && r.result.max_relative_error < 1e-3 && r.seconds < 30.0, d.str()};
}

Verdict check_normalization() {
  Rng rng(77);
  double worst = 0.0;
  std::size_t checked = 0;
  auto track = [&](std::span<const double> p) {
    worst = std::max(worst, std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0));
    ++checked;
  };
  const std::size_t dim = 6;
  for (int inst = 0; inst < 100; ++inst) {
    std::vector<std::string> q;
    for (std::size_t i = 0, m = 1 + rng.below(8); i < m; ++i) q.push_back("w" + std::to_string(rng.below(30)));
    Document doc = make_document(random_sentences(rng, 1 + rng.below(5), 15, 30));
    PreparedExample ex = prepare_instance("n" + std::to_string(inst), q, {doc}, {"w1"}, 5);
    EmbeddingTable table(dim, 1 + rng.below(1000));
    const EncodedExample enc = encode(ex, table);
    ModelConfig mc = fixtures::small_config(dim, 5, 1 + rng.below(1000));
    CascadeModel m(mc);

    Tape t(m.parameters());
    const QuestionNodes qn = m.question(t, enc.question, DropoutState::off());
    track(t.value(*qn.weights).values());
    for (const auto& ref : ex.sentences) {
      const auto att = m.sentence_attention(t, qn, enc.documents[ref.document].rows(ref.range.begin, ref.range.end),
                                            DropoutState::off());
      for (NodeId id : {att.alpha, att.beta}) {
        const Tensor& w = t.value(id);
        for (std::size_t r = 0; r < w.rows(); ++r) track(w.row(r));
      }
    }
    const auto dist = distributions(m.score(enc, ex));
    for (const auto* p : {&dist.p1, &dist.p2, &dist.p3, &dist.p4}) {
      if (p->empty()) return {false, "missing distribution in instance " + std::to_string(inst)};
      track(*p);
    }
  }
  std::ostringstream d;
  d << checked << " distributions, worst |sum-1| = " << worst;
  return {worst <= 1e-12, d.str()};
}

Verdict check_span_oracle() {
  Rng rng(2024);
  std::size_t total = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Document doc = make_document(random_sentences(rng, 1 + rng.below(6), 60, 25));
    const auto spans = generate_spans(doc, 5);
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> expected;
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
      const auto r = doc.sentences[s];
      for (std::size_t i = r.begin; i < r.end; ++i)
        for (std::size_t len = 1; len <= 5 && i + len <= r.end; ++len) expected.emplace_back(s, i, i + len);
    }
    std::sort(expected.begin(), expected.end());
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> got;
    for (const auto& sp : spans) got.emplace_back(sp.sentence, sp.begin, sp.end);
    std::sort(got.begin(), got.end());
    if (got != expected) return {false, "mismatch on document " + std::to_string(trial)};
    total += spans.size();
  }
  const std::size_t ten = generate_spans(make_document({std::vector<std::string>(10, "a")}), 5).size();
  return {ten == 40, std::to_string(total) + " spans over 100 documents; G=10 gives " + std::to_string(ten)};
}

Verdict check_aggregation() {
  auto corpus = fixtures::multi_mention_corpus(5, 17, false);
  auto table = fixtures::random_table(fixtures::vocabulary(corpus), 6, 3);
  CascadeModel m(fixtures::small_config(6, 5));
  std::size_t shuffled = 0;
  for (const auto& raw : corpus) {
    auto p = fixtures::prepare_one(raw, table);
    Tape t1(m.parameters());
    const Tensor base = t1.value(*m.forward(t1, p.encoded, p.example, DropoutState::off()).phi4);
    Rng rng(shuffled + 1);
    for (int round = 0; round < 5; ++round) {
      for (auto& u : p.example.uniques) rng.shuffle(u.mentions);
      Tape t2(m.parameters());
      if (t2.value(*m.forward(t2, p.encoded, p.example, DropoutState::off()).phi4) != base)
        return {false, "tape phi4 changed under mention permutation"};
      if (m.score(p.encoded, p.example).phi4 != base.storage())
        return {false, "scored phi4 changed under mention permutation"};
      ++shuffled;
    }
  }
  Tape t(m.parameters());
  const NodeId mv =
      m.mention_vector(t, t.constant(Tensor::vector({0.4, 0.3, 1.2, 0.7, 0.1})), 1.0, DropoutState::off());
  const NodeId one[] = {mv};
  const NodeId two[] = {mv, mv};
  const double a = t.value(m.level3(t, one, DropoutState::off()).phi).item();
  const double b = t.value(m.level3(t, two, DropoutState::off()).phi).item();
  std::ostringstream d;
  d << shuffled << " permutations bitwise equal; duplicate mention moves phi4 by " << std::abs(a - b);
  return {a != b, d.str()};
}

Verdict check_attention_count() {
  Rng rng(5);
  CascadeModel m(fixtures::small_config(4, 3));
  EmbeddingTable table(4);
  std::string detail;
  for (std::size_t n : {1u, 10u, 100u, 500u, 1000u}) {
    const Document doc = make_document(random_sentences(rng, n, 12, 50));
    const PreparedExample ex = prepare_instance("a", {"w1", "w2"}, {doc}, {"w3"}, 5);
    const EncodedExample enc = encode(ex, table);
    reset_attention_count();
    m.score(enc, ex);
    const std::uint64_t c = attention_count();
    detail += (detail.empty() ? "" : ", ") + std::to_string(n) + " sent/" + std::to_string(ex.spans.size()) +
              " spans -> " + std::to_string(c);
    if (c != ex.sentences.size() || ex.sentences.size() != n) return {false, detail};
  }
  return {true, detail};
}

struct Trained {
  std::size_t reached = 0;  // first epoch with train EM >= 0.95, 0 if never
  double train_em = 0.0;
  double heldout_em = 0.0;
  double seconds = 0.0;
};

Trained train_and_score(const std::string& ablation, const std::vector<PreparedExample>& train_set,
                        const std::vector<PreparedExample>& heldout, const EmbeddingTable& table, std::size_t hidden,
                        std::size_t epochs) {
  TrainConfig c = ablation_config(ablation);
  c.hidden = hidden;
  c.epochs = epochs;
  c.seed = 1;
  Trained out;
  TrainOptions opt;
  opt.on_epoch = [&](const EpochMetrics& e, const CascadeModel&) {
    if (!out.reached && e.train_em >= 0.95) out.reached = e.epoch;
    return true;
  };
  const auto t0 = std::chrono::steady_clock::now();
  auto r = train(train_set, table, c, opt);
  out.seconds = seconds_since(t0);
  out.train_em = r.epochs.back().train_em;
  out.heldout_em = evaluate(r.model, heldout, table, 1).em;
  return out;
}

struct Split {
  std::vector<PreparedExample> train, heldout;
  EmbeddingTable table;
};

Split make_split(const std::vector<QAExample>& tr, const std::vector<QAExample>& ho, std::size_t dim) {
  auto all = tr;
  all.insert(all.end(), ho.begin(), ho.end());
  return {prepare_corpus(tr, {}), prepare_corpus(ho, {}), fixtures::random_table(fixtures::vocabulary(all), dim, 5)};
}

Verdict check_overfit() {
  const Split s = make_split(fixtures::keyed_corpus(50, 101, false), fixtures::keyed_corpus(50, 202, true), 16);
  const auto full = train_and_score("full", s.train, s.heldout, s.table, 16, 200);
  const auto qs = train_and_score("level1_qs_only", s.train, s.heldout, s.table, 16, 200);
  const auto sc = train_and_score("level1_sc_only", s.train, s.heldout, s.table, 16, 200);
  std::ostringstream d;
  d << "full reaches 0.95 at epoch " << full.reached << " (" << fmt("%.1f s", full.seconds) << ", final train EM "
    << full.train_em << "); held-out EM full " << full.heldout_em << ", level1_qs_only " << qs.heldout_em
    << ", level1_sc_only " << sc.heldout_em;
  const bool pass = full.reached > 0 && full.seconds < 600.0 && qs.heldout_em < full.heldout_em &&
                    sc.heldout_em < full.heldout_em;
  return {pass, d.str()};
}

Verdict check_multi_mention() {
  const Split s =
      make_split(fixtures::multi_mention_corpus(50, 101, false), fixtures::multi_mention_corpus(50, 202, true), 16);
  const auto full = train_and_score("full", s.train, s.heldout, s.table, 16, 100);
  const auto l12 = train_and_score("level12_only", s.train, s.heldout, s.table, 16, 100);
  std::ostringstream d;
  d << "held-out EM full " << full.heldout_em << ", level12_only " << l12.heldout_em << " (gap "
    << fmt("%.0f", 100.0 * (full.heldout_em - l12.heldout_em)) << " points)";
  return {full.heldout_em - l12.heldout_em >= 0.10 - 1e-12, d.str()};
}

Verdict check_adagrad_unit() {
  ParameterStore s;
  const ParamId id = s.add("theta", Tensor::vector({1.0}));
  AdagradState opt(s, 0.05, 0.1);
  Gradients g(s);
  g[id][0] = 1.0;
  opt.step(s, g);
  const double err = std::abs(s.value(id)[0] - (1.0 - 0.05 / std::sqrt(1.1)));
  return {err <= 1e-12, "theta' = " + fmt("%.15f", s.value(id)[0]) + ", |err| = " + fmt("%.3g", err)};
}

Verdict check_metric_units() {
  const std::vector<std::string> aliases{"Jackson Pollock", "Pollock", "Pollock, Jackson"};
  const std::vector<std::string> just_pollock{"pollock"};
  const std::vector<std::string> one_alias{"Krasner"};
  bool ok = exact_match("Jackson Pollock", aliases) == 1 && exact_match("pollock", aliases) == 1 &&
            exact_match("Krasner", aliases) == 0;
  ok = ok && std::abs(token_f1("jackson pollock", just_pollock) - 2.0 / 3.0) <= 1e-12;
  ok = ok && std::abs(token_f1("jackson pollock", aliases) - 1.0) <= 1e-12;
  ok = ok && token_f1("Krasner", one_alias) == 1.0 && token_f1("Pollock", one_alias) == 0.0;
  ok = ok && normalize_answer("The Catalysts.") == "catalysts" && normalize_answer("Jackson  Pollock") == "jackson pollock";
  if (!ok) return {false, "hand EM/F1 case mismatch"};

  auto raw = fixtures::keyed_corpus(20, 9, false);
  auto table = fixtures::random_table(fixtures::vocabulary(raw), 6, 2);
  CascadeModel m(fixtures::small_config(6, 5));
  const auto r = evaluate(m, prepare_corpus(raw, {}), table, 10);
  for (std::size_t k = 1; k < r.topk.size(); ++k)
    if (r.topk[k] < r.topk[k - 1]) return {false, "top-k not monotone at k=" + std::to_string(k + 1)};
  std::ostringstream d;
  d << "hand cases exact; top-k " << r.topk.front() << " .. " << r.topk.back() << " monotone over k=1..10";
  return {true, d.str()};
}

Verdict check_throughput() {
  BenchConfig trend;
  trend.lengths = {200, 10000};
  trend.workers = 4;
  trend.reps = 5;
  trend.dim = 50;
  trend.hidden = 50;
  const auto t = run_benchmark(trend);
  BenchConfig work = trend;
  work.lengths = {2000, 4000};
  work.reps = 1;
  const auto w = run_benchmark(work);
  const double mac_ratio =
      static_cast<double>(w.rows[1].cascade_macs) / static_cast<double>(w.rows[0].cascade_macs);
  const double s200 = t.rows[0].speedup, s10k = t.rows[1].speedup;
  std::ostringstream d;
  d << "speedup n=200 " << fmt("%.4f", s200) << ", n=10000 " << fmt("%.4f", s10k) << " (4 workers); MAC ratio 4000/2000 "
    << fmt("%.3f", mac_ratio);
  return {s10k > s200 && std::abs(mac_ratio - 2.0) <= 0.2, d.str()};
}

Verdict check_reproducibility() {
  auto raw = fixtures::keyed_corpus(8, 21, false);
  auto table = fixtures::random_table(fixtures::vocabulary(raw), 8, 5);
  const auto corpus = prepare_corpus(raw, {});
  const fs::path base = fs::temp_directory_path() / "cascadeqa_acceptance_repro";
  fs::remove_all(base);
  TrainConfig c;
  c.hidden = 8;
  c.epochs = 5;
  c.seed = 3;
  std::vector<std::string> bytes;
  for (const char* run : {"a", "b"}) {
    TrainOptions opt;
    opt.out_dir = (base / run).string();
    train(corpus, table, c, opt);
    std::ifstream in(base / run / "model.ckpt", std::ios::binary);
    bytes.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  fs::remove_all(base);
  const bool same = !bytes[0].empty() && bytes[0] == bytes[1];
  return {same, std::to_string(bytes[0].size()) + "-byte checkpoints " + (same ? "identical" : "differ")};
}

}  // namespace
}  // namespace cascadeqa

int main() {
  using namespace cascadeqa;
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"gradient-oracle", check_gradient_oracle},
      {"normalization", check_normalization},
      {"span-enumeration-oracle", check_span_oracle},
      {"aggregation-invariance", check_aggregation},
      {"attention-count", check_attention_count},
      {"overfit", check_overfit},
      {"multi-mention-advantage", check_multi_mention},
      {"adagrad-unit-value", check_adagrad_unit},
      {"metric-units", check_metric_units},
      {"throughput-trend", check_throughput},
      {"reproducibility", check_reproducibility},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
    std::fflush(stdout);
  }
  return std::min(failed, 100);
}
