#include "cascadeqa/training/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cascadeqa/eval/metrics.hpp"
#include "cascadeqa/kernels/kernels.hpp"
#include "cascadeqa/model/checkpoint.hpp"
#include "cascadeqa/util/error.hpp"
#include "cascadeqa/util/random.hpp"
#include "json.hpp"

namespace cascadeqa {

void LossWeights::validate() const {
  double total = 0.0;
  for (double l : lambda) {
    if (!std::isfinite(l) || l < 0.0) throw UsageError("loss weights must be finite and nonnegative");
    total += l;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    std::ostringstream os;
    os.precision(17);
    os << "loss weights must sum to 1 (got " << total << ")";
    throw UsageError(os.str());
  }
}

NodeId gold_nll(Tape& tape, NodeId phi, const std::vector<std::size_t>& gold) {
  if (gold.empty()) throw EmptyCandidateError("no gold candidates");
  const NodeId all = tape.log_sum_exp(phi);
  const NodeId good = tape.log_sum_exp(tape.gather(phi, gold));
  return tape.add(all, tape.scale(good, -1.0));
}

NodeId multi_loss(Tape& tape, const CascadeGraph& graph, const PreparedExample& ex, const LossWeights& weights) {
  const auto gold_spans = ex.gold_spans();
  if (gold_spans.empty()) throw EmptyCandidateError("example '" + ex.id + "' has no gold span");
  const std::optional<NodeId> phis[4] = {graph.phi1, graph.phi2, graph.phi3, graph.phi4};
  std::vector<NodeId> terms;
  for (std::size_t k = 0; k < 4; ++k) {
    if (weights[k] == 0.0) continue;
    if (!phis[k]) throw ContractError("loss weight " + std::to_string(k + 1) + " is set but that level is absent");
    const NodeId nll = gold_nll(tape, *phis[k], k == 3 ? ex.gold_uniques() : gold_spans);
    terms.push_back(weights[k] == 1.0 ? nll : tape.scale(nll, weights[k]));
  }
  if (terms.empty()) throw ContractError("all loss weights are zero");
  return terms.size() == 1 ? terms[0] : tape.sum(terms);
}

AdagradState::AdagradState(const ParameterStore& params, double learning_rate, double initial_accumulator)
    : learning_rate_(learning_rate) {
  if (!(learning_rate > 0.0) || !(initial_accumulator > 0.0))
    throw UsageError("learning rate and initial accumulator must be positive");
  acc_.reserve(params.size());
  for (ParamId id = 0; id < params.size(); ++id) {
    Tensor a(params.value(id).shape());
    a.fill(initial_accumulator);
    acc_.push_back(std::move(a));
  }
}

void AdagradState::step(ParameterStore& params, const Gradients& grads) {
  if (grads.size() != params.size() || acc_.size() != params.size())
    throw ContractError("gradient set does not match the parameters");
  for (ParamId id = 0; id < params.size(); ++id) {
    const Tensor& g = grads[id];
    if (!g.same_shape(params.value(id))) throw DimensionError("gradient shape mismatch for " + params.name(id));
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        std::ostringstream os;
        os << "non-finite gradient " << g[i] << " for parameter " << params.name(id) << " at index " << i;
        throw NumericError(os.str());
      }
    }
  }
  for (ParamId id = 0; id < params.size(); ++id) {
    Tensor& theta = params.value(id);
    kernels::adagrad_update(theta.data(), acc_[id].data(), grads[id].data(), theta.size(), learning_rate_);
  }
}

void TrainConfig::validate() const {
  weights.validate();
  if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("dropout must be in [0, 1)");
  if (hidden == 0 || depth == 0) throw UsageError("hidden and depth must be positive");
  if (context == 0) throw UsageError("context must be >= 1");
  if (preprocess.max_span_length == 0) throw UsageError("max_span_length must be >= 1");
  if (workers == 0) throw UsageError("workers must be >= 1");
  if (single_loss && (weights[0] != 0.0 || weights[1] != 0.0 || weights[2] != 0.0 || weights[3] != 1.0))
    throw UsageError("single_loss requires lambda = (0, 0, 0, 1)");
  if (single_loss && drop_level3) throw UsageError("single_loss needs level 3");
  if (combined_level1 && level1 != Level1Choice::Both)
    throw UsageError("combined_level1 cannot be restricted to one level-1 submodel");
  if (level1 != Level1Choice::Both && !drop_level2)
    throw UsageError("a single level-1 submodel is only supported without level 2");
  const CascadeLayout l = layout_for(*this);
  const bool present[4] = {l.question_span || l.combined, l.span_context, l.level2, l.level3};
  for (std::size_t k = 0; k < 4; ++k) {
    if (weights[k] != 0.0 && !present[k])
      throw UsageError("lambda" + std::to_string(k + 1) + " is nonzero but that level is disabled");
  }
}

const std::vector<std::string>& ablation_names() {
  static const std::vector<std::string> names{"full",          "single_loss",    "combined_level1",
                                              "level12_only",  "level1_sc_only", "level1_qs_only"};
  return names;
}

void apply_ablation(TrainConfig& c, const std::string& name) {
  c.single_loss = c.drop_level2 = c.drop_level3 = c.combined_level1 = false;
  c.level1 = Level1Choice::Both;
  if (name == "full") {
    c.weights = LossWeights{};
  } else if (name == "single_loss") {
    c.single_loss = true;
    c.weights.lambda = {0.0, 0.0, 0.0, 1.0};
  } else if (name == "combined_level1") {
    c.combined_level1 = true;
    c.weights.lambda = {0.7, 0.0, 0.2, 0.1};
  } else if (name == "level12_only") {
    c.drop_level3 = true;
    c.weights.lambda = {0.35 / 0.9, 0.35 / 0.9, 0.2 / 0.9, 0.0};
  } else if (name == "level1_sc_only") {
    c.drop_level2 = c.drop_level3 = true;
    c.level1 = Level1Choice::SpanContext;
    c.weights.lambda = {0.0, 1.0, 0.0, 0.0};
  } else if (name == "level1_qs_only") {
    c.drop_level2 = c.drop_level3 = true;
    c.level1 = Level1Choice::QuestionSpan;
    c.weights.lambda = {1.0, 0.0, 0.0, 0.0};
  } else {
    std::string valid;
    for (const auto& n : ablation_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw UsageError("unknown ablation '" + name + "' (valid: " + valid + ")");
  }
  c.ablation = name;
}

TrainConfig ablation_config(const std::string& name) {
  TrainConfig c;
  apply_ablation(c, name);
  return c;
}

CascadeLayout layout_for(const TrainConfig& c) {
  CascadeLayout l;
  l.combined = c.combined_level1;
  l.question_span = !c.combined_level1 && c.level1 != Level1Choice::SpanContext;
  l.span_context = !c.combined_level1 && c.level1 != Level1Choice::QuestionSpan;
  l.level2 = !c.drop_level2;
  l.level3 = !c.drop_level2 && !c.drop_level3;
  return l;
}

ModelConfig model_config(const TrainConfig& c, std::size_t embedding_dim) {
  ModelConfig m;
  m.embedding_dim = embedding_dim;
  m.hidden = c.hidden;
  m.depth = c.depth;
  m.context = c.context;
  m.max_span_length = c.preprocess.max_span_length;
  m.seed = c.seed;
  m.embedding_seed = c.embedding_seed;
  m.layout = layout_for(c);
  return m;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T v{};
  is >> v;
  if (!is || !is.eof()) throw UsageError("bad value for " + key + ": '" + value + "'");
  return v;
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  if (!value.empty() && value[0] == '-') throw UsageError("bad value for " + key + ": '" + value + "'");
  return parse_number<std::size_t>(key, value);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw UsageError("bad value for " + key + ": '" + value + "' (expected true or false)");
}

}  // namespace

void apply_setting(TrainConfig& c, const std::string& key, const std::string& value) {
  if (key == "ablation") {
    apply_ablation(c, value);
  } else if (key == "epochs") {
    c.epochs = parse_count(key, value);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "dropout") {
    c.dropout = parse_number<double>(key, value);
  } else if (key == "lambda1" || key == "lambda2" || key == "lambda3" || key == "lambda4") {
    c.weights.lambda[static_cast<std::size_t>(key.back() - '1')] = parse_number<double>(key, value);
  } else if (key == "single_loss") {
    c.single_loss = parse_bool(key, value);
  } else if (key == "drop_level2") {
    c.drop_level2 = parse_bool(key, value);
  } else if (key == "drop_level3") {
    c.drop_level3 = parse_bool(key, value);
  } else if (key == "combined_level1") {
    c.combined_level1 = parse_bool(key, value);
  } else if (key == "level1") {
    if (value == "both") c.level1 = Level1Choice::Both;
    else if (value == "question_span") c.level1 = Level1Choice::QuestionSpan;
    else if (value == "span_context") c.level1 = Level1Choice::SpanContext;
    else throw UsageError("bad value for level1: '" + value + "' (both, question_span, span_context)");
  } else if (key == "learning_rate") {
    c.learning_rate = parse_number<double>(key, value);
  } else if (key == "initial_accumulator") {
    c.initial_accumulator = parse_number<double>(key, value);
  } else if (key == "hidden") {
    c.hidden = parse_count(key, value);
  } else if (key == "depth") {
    c.depth = parse_count(key, value);
  } else if (key == "context") {
    c.context = parse_count(key, value);
  } else if (key == "max_span_length") {
    c.preprocess.max_span_length = parse_count(key, value);
  } else if (key == "max_tokens") {
    c.preprocess.limits.max_tokens = parse_count(key, value);
  } else if (key == "max_sentences") {
    c.preprocess.limits.max_sentences = parse_count(key, value);
  } else if (key == "max_sentence_length") {
    c.preprocess.limits.max_sentence_length = parse_count(key, value);
  } else if (key == "instance_mode") {
    if (value == "per_question") c.preprocess.mode = InstanceMode::PerQuestion;
    else if (value == "per_document") c.preprocess.mode = InstanceMode::PerDocument;
    else throw UsageError("bad value for instance_mode: '" + value + "' (per_question, per_document)");
  } else if (key == "embedding_seed") {
    c.embedding_seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "workers") {
    c.workers = parse_count(key, value);
  } else {
    throw UsageError("unknown config key '" + key + "'");
  }
}

void read_config(std::istream& in, TrainConfig& c) {
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError("config line " + std::to_string(no) + ": expected key = value");
    apply_setting(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void read_config_file(const std::string& path, TrainConfig& c) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  read_config(in, c);
}

std::string format_config(const TrainConfig& c) {
  std::ostringstream os;
  os.precision(17);
  const char* level1 = c.level1 == Level1Choice::Both           ? "both"
                       : c.level1 == Level1Choice::QuestionSpan ? "question_span"
                                                                : "span_context";
  os << "ablation = " << c.ablation << '\n'
     << "epochs = " << c.epochs << '\n'
     << "seed = " << c.seed << '\n'
     << "dropout = " << c.dropout << '\n';
  for (std::size_t k = 0; k < 4; ++k) os << "lambda" << k + 1 << " = " << c.weights[k] << '\n';
  os << std::boolalpha << "single_loss = " << c.single_loss << '\n'
     << "drop_level2 = " << c.drop_level2 << '\n'
     << "drop_level3 = " << c.drop_level3 << '\n'
     << "combined_level1 = " << c.combined_level1 << '\n'
     << "level1 = " << level1 << '\n'
     << "learning_rate = " << c.learning_rate << '\n'
     << "initial_accumulator = " << c.initial_accumulator << '\n'
     << "hidden = " << c.hidden << '\n'
     << "depth = " << c.depth << '\n'
     << "context = " << c.context << '\n'
     << "max_span_length = " << c.preprocess.max_span_length << '\n'
     << "max_tokens = " << c.preprocess.limits.max_tokens << '\n'
     << "max_sentences = " << c.preprocess.limits.max_sentences << '\n'
     << "max_sentence_length = " << c.preprocess.limits.max_sentence_length << '\n'
     << "instance_mode = " << (c.preprocess.mode == InstanceMode::PerQuestion ? "per_question" : "per_document") << '\n'
     << "embedding_seed = " << c.embedding_seed << '\n'
     << "workers = " << c.workers << '\n';
  return os.str();
}

double loss_and_gradients(const CascadeModel& model, const ParameterStore& params, const PreparedExample& ex,
                          const EncodedExample& enc, const LossWeights& weights, Gradients* grads) {
  Tape tape(params);
  const CascadeGraph graph = model.forward(tape, enc, ex, DropoutState::off());
  const NodeId loss = multi_loss(tape, graph, ex, weights);
  const double value = tape.value(loss).item();
  if (grads) {
    tape.backward(loss);
    *grads = tape.parameter_gradients();
  }
  return value;
}

double train_step(CascadeModel& model, AdagradState& opt, const PreparedExample& ex, const EncodedExample& enc,
                  const LossWeights& weights, const DropoutState& dropout) {
  Gradients grads;
  double value;
  {
    Tape tape(model.parameters());
    const CascadeGraph graph = model.forward(tape, enc, ex, dropout);
    const NodeId loss = multi_loss(tape, graph, ex, weights);
    value = tape.value(loss).item();
    tape.backward(loss);
    grads = tape.parameter_gradients();
  }
  opt.step(model.parameters(), grads);
  return value;
}

TrainResult train(const std::vector<PreparedExample>& corpus, const EmbeddingTable& table,
                  const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  if (table.seed() != config.embedding_seed)
    throw ContractError("embedding table seed does not match the configured embedding_seed");
  std::vector<std::size_t> trainable;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (corpus[i].has_gold()) trainable.push_back(i);
  if (trainable.empty()) throw NoTrainableDataError("no training example has a candidate span matching its answers");
  const std::size_t skipped = corpus.size() - trainable.size();

  std::vector<EncodedExample> encoded(corpus.size());
  for (std::size_t i : trainable) encoded[i] = encode(corpus[i], table);

  TrainResult result{CascadeModel(model_config(config, table.dimension())), {}};
  CascadeModel& model = result.model;
  AdagradState opt(model.parameters(), config.learning_rate, config.initial_accumulator);

  std::optional<std::ofstream> metrics;
  std::string ckpt_path;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    ckpt_path = (std::filesystem::path(*options.out_dir) / "model.ckpt").string();
    const std::string metrics_path = (std::filesystem::path(*options.out_dir) / "metrics.jsonl").string();
    metrics.emplace(metrics_path, std::ios::trunc);
    if (!*metrics) throw IoError("cannot write metrics file: " + metrics_path);
    save_checkpoint(ckpt_path, model);
  }

  std::vector<std::size_t> order = trainable;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    Rng shuffle_rng(mix_seed(config.seed, 0x5348554646ULL, epoch));
    order = trainable;
    shuffle_rng.shuffle(order);

    double total = 0.0;
    for (std::size_t step = 0; step < order.size(); ++step) {
      const std::size_t i = order[step];
      Rng drop_rng(mix_seed(config.seed, epoch, step + 1));
      const DropoutState dropout{config.dropout, true, &drop_rng};
      total += train_step(model, opt, corpus[i], encoded[i], config.weights, dropout);
    }

    double em = 0.0;
    for (std::size_t i : trainable) {
      const auto p = predict(model.score(encoded[i], corpus[i], options.pool), corpus[i], model.config().layout);
      em += p.answerable ? exact_match(p.text, corpus[i].answers) : 0;
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.mean_loss = total / static_cast<double>(order.size());
    m.train_em = em / static_cast<double>(trainable.size());
    m.trained = order.size();
    m.skipped = skipped;
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.epochs.push_back(m);

    if (options.out_dir) {
      save_checkpoint(ckpt_path, model);
      nlohmann::json j = {{"epoch", m.epoch},     {"loss", m.mean_loss}, {"train_em", m.train_em},
                          {"trained", m.trained}, {"skipped", m.skipped}, {"seconds", m.seconds}};
      *metrics << j.dump() << '\n';
      metrics->flush();
    }
    if (options.on_epoch && !options.on_epoch(m, model)) break;
  }
  return result;
}

}  // namespace cascadeqa
