#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cascadeqa/bench/benchmark.hpp"
#include "cascadeqa/corpus/example.hpp"
#include "cascadeqa/embeddings/embedding_table.hpp"
#include "cascadeqa/eval/evaluate.hpp"
#include "cascadeqa/model/cascade.hpp"
#include "cascadeqa/model/checkpoint.hpp"
#include "cascadeqa/training/gradcheck.hpp"
#include "cascadeqa/training/trainer.hpp"
#include "cascadeqa/util/error.hpp"
#include "cascadeqa/util/thread_pool.hpp"

namespace cq = cascadeqa;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kNumeric = 3, kUnanswerable = 4 };

int exit_code(const cq::Error& e) {
  switch (e.kind()) {
    case cq::ErrorKind::Io:
    case cq::ErrorKind::Parse:
    case cq::ErrorKind::Data:
    case cq::ErrorKind::Version:
    case cq::ErrorKind::NoTrainableData:
      return kIo;
    case cq::ErrorKind::Numeric:
      return kNumeric;
    default:
      return kUsage;
  }
}

std::vector<std::size_t> parse_list(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != item.size() || item[0] == '-') {
      throw cq::UsageError(std::string("bad ") + what + " list entry '" + item + "'");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw cq::UsageError(std::string("empty ") + what + " list");
  return out;
}

cq::EmbeddingTable load_table(const std::string& path, std::size_t dim, std::uint64_t seed) {
  if (!std::filesystem::exists(path)) throw cq::IoError("embeddings file not found: " + path);
  if (dim == 0) dim = cq::sniff_embedding_dimension(path);
  return cq::load_embeddings_file(path, dim, seed);
}

void echo(const std::string& title, const std::string& settings) {
  std::cerr << "# " << title << '\n';
  std::istringstream in(settings);
  for (std::string line; std::getline(in, line);) std::cerr << "#   " << line << '\n';
}

std::unique_ptr<cq::WorkerPool> make_pool(std::size_t workers) {
  if (workers < 1) throw cq::UsageError("workers must be >= 1");
  if (workers == 1) return nullptr;
  return std::make_unique<cq::WorkerPool>(workers);
}

struct TrainArgs {
  std::string data, embeddings, out, config;
  std::optional<std::string> ablation;
  std::vector<std::string> settings;
  std::optional<std::size_t> epochs, workers, truncate;
  std::optional<std::uint64_t> seed;
  std::size_t dim = 0;
};

int cmd_train(const TrainArgs& a) {
  cq::TrainConfig cfg;
  if (!a.config.empty()) cq::read_config_file(a.config, cfg);
  if (a.ablation) cq::apply_ablation(cfg, *a.ablation);
  for (const auto& kv : a.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw cq::UsageError("--set expects key=value, got '" + kv + "'");
    cq::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.seed) cfg.seed = *a.seed;
  if (a.workers) cfg.workers = *a.workers;
  if (a.truncate) cfg.preprocess.limits.max_tokens = *a.truncate;
  cfg.validate();
  echo("resolved config", cq::format_config(cfg));

  const auto raw = cq::read_jsonl_file(a.data);
  if (raw.empty()) throw cq::UsageError("training corpus is empty: " + a.data);
  const auto table = load_table(a.embeddings, a.dim, cfg.embedding_seed);
  const auto corpus = cq::prepare_corpus(raw, cfg.preprocess);

  std::filesystem::create_directories(a.out);
  {
    std::ofstream resolved(std::filesystem::path(a.out) / "config.txt");
    if (!resolved) throw cq::IoError("cannot write " + a.out + "/config.txt");
    resolved << cq::format_config(cfg);
  }
  auto pool = make_pool(cfg.workers);
  cq::TrainOptions opt;
  opt.out_dir = a.out;
  opt.pool = pool.get();
  opt.on_epoch = [](const cq::EpochMetrics& m, const cq::CascadeModel&) {
    std::cout << "epoch " << m.epoch << " loss " << std::setprecision(6) << m.mean_loss << " train_em " << m.train_em
              << " trained " << m.trained << " skipped " << m.skipped << " seconds " << m.seconds << std::endl;
    return true;
  };
  cq::train(corpus, table, cfg, opt);
  std::cout << "checkpoint " << (std::filesystem::path(a.out) / "model.ckpt").string() << '\n';
  return kOk;
}

struct EvalArgs {
  std::string checkpoint, data, embeddings, out, config, sweep;
  std::size_t topk = 10;
  std::size_t truncate = 6000;
  std::size_t workers = 1;
};

int cmd_eval(const EvalArgs& a) {
  cq::TrainConfig cfg;
  if (!a.config.empty()) cq::read_config_file(a.config, cfg);
  cfg.preprocess.limits.max_tokens = a.truncate;
  const cq::CascadeModel model = cq::load_checkpoint(a.checkpoint);
  std::ostringstream settings;
  settings << "checkpoint = " << a.checkpoint << "\ntopk = " << a.topk << "\nmax_tokens = " << a.truncate
           << "\nworkers = " << a.workers << "\nembedding_seed = " << model.config().embedding_seed << '\n';
  echo("resolved eval settings", settings.str());

  const auto raw = cq::read_jsonl_file(a.data);
  if (raw.empty()) throw cq::UsageError("evaluation corpus is empty: " + a.data);
  const auto table = load_table(a.embeddings, 0, model.config().embedding_seed);
  auto pool = make_pool(a.workers);

  if (!a.sweep.empty()) {
    const auto rows = cq::truncation_sweep(model, raw, table, cfg.preprocess, parse_list(a.sweep, "sweep"), pool.get());
    cq::write_sweep_csv(std::cout, rows);
    if (!a.out.empty()) {
      std::filesystem::create_directories(a.out);
      std::ofstream f(std::filesystem::path(a.out) / "sweep.csv");
      if (!f) throw cq::IoError("cannot write " + a.out + "/sweep.csv");
      cq::write_sweep_csv(f, rows);
    }
    return kOk;
  }

  const auto report = cq::evaluate(model, cq::prepare_corpus(raw, cfg.preprocess), table, a.topk, pool.get());
  std::cout << std::fixed << std::setprecision(3) << "EM " << report.em << " F1 " << report.f1 << " examples "
            << report.records.size() << '\n';
  if (!a.out.empty()) cq::write_report_files(a.out, report);
  return kOk;
}

struct PredictArgs {
  std::string checkpoint, embeddings, question, document;
  std::size_t truncate = 6000;
  std::size_t topk = 1;
  std::size_t workers = 1;
};

int cmd_predict(const PredictArgs& a) {
  const cq::CascadeModel model = cq::load_checkpoint(a.checkpoint);
  std::ifstream in(a.document);
  if (!in) throw cq::IoError("cannot read document: " + a.document);
  std::stringstream text;
  text << in.rdbuf();
  std::ostringstream settings;
  settings << "checkpoint = " << a.checkpoint << "\nmax_tokens = " << a.truncate << "\nworkers = " << a.workers << '\n';
  echo("resolved predict settings", settings.str());

  auto question = cq::tokenize_question(a.question);
  if (question.empty()) throw cq::UsageError("question is empty");
  cq::TruncationLimits limits;
  limits.max_tokens = a.truncate;
  std::vector<cq::Document> docs{cq::truncate(cq::tokenize(text.str()), limits)};
  const cq::PreparedExample ex =
      cq::prepare_instance("predict", std::move(question), std::move(docs), {}, model.config().max_span_length);
  if (!ex.has_candidates()) {
    std::cout << "unanswerable\n";
    return kUnanswerable;
  }
  const auto table = load_table(a.embeddings, 0, model.config().embedding_seed);
  if (table.dimension() != model.config().embedding_dim)
    throw cq::VersionError("embedding dimension does not match the checkpoint");
  auto pool = make_pool(a.workers);
  const auto scores = model.score(cq::encode(ex, table), ex, pool.get());
  const auto p = cq::predict(scores, ex, model.config().layout);
  std::cout << "answer\t" << p.text << "\nscore\t" << std::setprecision(17) << p.score << "\nmentions\t" << p.mentions
            << '\n';
  if (a.topk > 1) {
    const auto ranked = cq::candidate_scores(scores, ex, model.config().layout);
    std::size_t rank = 1;
    for (std::size_t u : cq::top_k(ranked, a.topk)) {
      std::cout << "top" << rank++ << '\t' << ex.unique_text(u) << '\t' << ranked[u] << '\t'
                << ex.uniques[u].mentions.size() << '\n';
    }
  }
  return kOk;
}

struct BenchArgs {
  std::string lengths = "200,1000,2000,5000,10000";
  std::string out;
  cq::BenchConfig config;
};

int cmd_bench(BenchArgs a) {
  a.config.lengths = parse_list(a.lengths, "length");
  a.config.validate();
  std::ostringstream settings;
  settings << "lengths = " << a.lengths << "\nworkers = " << a.config.workers << "\nreps = " << a.config.reps
           << "\ndim = " << a.config.dim << "\nhidden = " << a.config.hidden << "\nstate = " << a.config.state
           << "\nseed = " << a.config.seed << '\n';
  echo("resolved bench settings", settings.str());
  const auto result = cq::run_benchmark(a.config);
  cq::write_bench_csv(std::cout, result);
  for (const auto& r : result.rows) {
    std::cerr << "# n=" << r.n << " sentences=" << r.sentences << " spans=" << r.spans
              << " cascade_macs=" << r.cascade_macs << " baseline_macs=" << r.baseline_macs << '\n';
  }
  if (!a.out.empty()) {
    std::ofstream f(a.out);
    if (!f) throw cq::IoError("cannot write " + a.out);
    cq::write_bench_csv(f, result);
  }
  return kOk;
}

struct GradcheckArgs {
  cq::GradcheckOptions options;
  double threshold = 1e-3;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  cq::ablation_config(a.options.ablation);
  std::ostringstream settings;
  settings << "ablation = " << a.options.ablation << "\ndim = " << a.options.dim << "\nhidden = " << a.options.hidden
           << "\nseed = " << a.options.seed << "\nepsilon = " << a.options.epsilon << "\nthreshold = " << a.threshold
           << '\n';
  echo("resolved gradcheck settings", settings.str());
  const auto r = cq::run_gradcheck(a.options);
  std::cout << "toy document: " << r.sentences << " sentences, " << r.tokens << " tokens, " << r.gold_spans
            << " gold mentions\n"
            << "checked " << r.result.checked << " parameters in " << std::setprecision(3) << r.seconds << " s\n"
            << "max relative error " << std::setprecision(6) << std::scientific << r.result.max_relative_error
            << " at " << r.result.worst_parameter << "[" << r.result.worst_index << "] (analytic "
            << r.result.worst_analytic << ", numeric " << r.result.worst_numeric << ")\n";
  if (!(r.result.max_relative_error < a.threshold)) {
    std::cerr << "gradcheck failed: " << r.result.worst_parameter << " exceeds threshold " << a.threshold << '\n';
    return kNumeric;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cascaded span scoring for evidence-based question answering"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model and write checkpoints and metrics");
  train->add_option("--data", ta.data, "Training corpus (JSON lines)")->required();
  train->add_option("--embeddings", ta.embeddings, "Word vector text file")->required();
  train->add_option("--out", ta.out, "Output directory")->required();
  train->add_option("--config", ta.config, "key = value config file");
  train->add_option("--ablation", ta.ablation, "Named ablation");
  train->add_option("--set", ta.settings, "Config override key=value (repeatable)");
  train->add_option("--epochs", ta.epochs, "Epochs");
  train->add_option("--seed", ta.seed, "Seed");
  train->add_option("--workers", ta.workers, "Worker threads");
  train->add_option("--truncate", ta.truncate, "Maximum tokens per document");
  train->add_option("--dim", ta.dim, "Embedding dimension (default: read from the file)");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", ea.checkpoint, "Checkpoint file")->required();
  eval->add_option("--data", ea.data, "Evaluation corpus (JSON lines)")->required();
  eval->add_option("--embeddings", ea.embeddings, "Word vector text file")->required();
  eval->add_option("--out", ea.out, "Report directory");
  eval->add_option("--config", ea.config, "Config file (preprocessing keys)");
  eval->add_option("--topk", ea.topk, "Top-k table size")->capture_default_str();
  eval->add_option("--truncate", ea.truncate, "Maximum tokens per document")->capture_default_str();
  eval->add_option("--sweep", ea.sweep, "Comma-separated truncation limits");
  eval->add_option("--workers", ea.workers, "Worker threads")->capture_default_str();

  PredictArgs pa;
  auto* pred = app.add_subcommand("predict", "Answer one question from one document");
  pred->add_option("--checkpoint", pa.checkpoint, "Checkpoint file")->required();
  pred->add_option("--embeddings", pa.embeddings, "Word vector text file")->required();
  pred->add_option("--question", pa.question, "Question text")->required();
  pred->add_option("--document", pa.document, "Document text file")->required();
  pred->add_option("--truncate", pa.truncate, "Maximum tokens")->capture_default_str();
  pred->add_option("--topk", pa.topk, "Also list the k best candidates")->capture_default_str();
  pred->add_option("--workers", pa.workers, "Worker threads")->capture_default_str();

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Throughput against a sequential BiLSTM baseline");
  bench->add_option("--lengths", ba.lengths, "Comma-separated document lengths")->capture_default_str();
  bench->add_option("--workers", ba.config.workers, "Worker threads")->capture_default_str();
  bench->add_option("--reps", ba.config.reps, "Timed repetitions")->capture_default_str();
  bench->add_option("--dim", ba.config.dim, "Embedding dimension")->capture_default_str();
  bench->add_option("--hidden", ba.config.hidden, "Hidden width")->capture_default_str();
  bench->add_option("--seed", ba.config.seed, "Seed")->capture_default_str();
  bench->add_option("--out", ba.out, "CSV output file");

  GradcheckArgs ga;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the full loss on a toy document");
  grad->add_option("--ablation", ga.options.ablation, "Named ablation")->capture_default_str();
  grad->add_option("--dim", ga.options.dim, "Embedding dimension")->capture_default_str();
  grad->add_option("--hidden", ga.options.hidden, "Hidden width")->capture_default_str();
  grad->add_option("--seed", ga.options.seed, "Seed")->capture_default_str();
  grad->add_option("--epsilon", ga.options.epsilon, "Central difference step")->capture_default_str();
  grad->add_option("--threshold", ga.threshold, "Maximum relative error")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return cmd_train(ta);
    if (*eval) return cmd_eval(ea);
    if (*pred) return cmd_predict(pa);
    if (*bench) return cmd_bench(ba);
    if (*grad) return cmd_gradcheck(ga);
  } catch (const cq::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
