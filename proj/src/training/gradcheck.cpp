#include "cascadeqa/training/gradcheck.hpp"

#include <chrono>
#include <set>

#include "cascadeqa/model/cascade.hpp"
#include "cascadeqa/training/trainer.hpp"
#include "cascadeqa/util/random.hpp"

namespace cascadeqa {

QAExample toy_gradcheck_example() {
  return {"toy",
          "Who married Krasner ?",
          {"Pollock painted works . Krasner married Pollock early . They left ."},
          {"Jackson Pollock", "Pollock"}};
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  TrainConfig tc = ablation_config(options.ablation);
  tc.hidden = options.hidden;
  tc.seed = options.seed;
  tc.dropout = 0.0;

  const QAExample raw = toy_gradcheck_example();
  const PreparedExample ex = prepare_example(raw, tc.preprocess).at(0);
  std::set<std::string> words;
  for (const auto& t : ex.question) words.insert(ascii_lower(t));
  for (const auto& d : ex.documents)
    for (const auto& t : d.tokens) words.insert(ascii_lower(t.text));
  EmbeddingTable table(options.dim, tc.embedding_seed);
  Rng rng(mix_seed(options.seed, 0x544f59));
  std::vector<double> v(options.dim);
  for (const auto& w : words) {
    for (double& x : v) x = rng.normal();
    table.add(w, v);
  }
  const EncodedExample enc = encode(ex, table);
  CascadeModel model(model_config(tc, options.dim));

  LossFunction fn = [&](const ParameterStore& s, Gradients* g) {
    return loss_and_gradients(model, s, ex, enc, tc.weights, g);
  };
  GradcheckReport r;
  r.result = finite_difference_check(fn, model.parameters(), options.epsilon);
  r.sentences = ex.sentences.size();
  for (const auto& d : ex.documents) r.tokens += d.tokens.size();
  r.gold_spans = ex.gold_span_count;
  r.parameters = model.parameters().scalar_count();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace cascadeqa
