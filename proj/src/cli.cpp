#include "fraudlens/cli.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <pthread.h>

#include "fraudlens/annotation.hpp"
#include "fraudlens/classifiers.hpp"
#include "fraudlens/corpus.hpp"
#include "fraudlens/error.hpp"
#include "fraudlens/llm_backend.hpp"
#include "fraudlens/metrics.hpp"
#include "fraudlens/service.hpp"

namespace fraudlens::cli {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const std::vector<std::string> kSubcommands = {"train", "eval",     "compare",     "serve",
                                               "annotate", "kappa", "audit-filter"};

// JSON config file for CLI11. Top-level scalars set global flags; the object
// named after the active subcommand sets that subcommand's flags. The serve
// section is resolved by the service config loader instead, so that
// environment variables can override it.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(std::string active) : active_(std::move(active)) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      j = json::parse(input);
    } catch (const json::parse_error& e) {
      throw CLI::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConfigError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    for (auto& [key, value] : j.items()) {
      if (value.is_object()) {
        if (key != active_ || key == "serve") continue;
        for (auto& [k, v] : value.items()) items.push_back(item({key}, k, v));
      } else {
        items.push_back(item({}, key, value));
      }
    }
    return items;
  }

 private:
  static CLI::ConfigItem item(std::vector<std::string> parents, const std::string& name, const json& v) {
    CLI::ConfigItem it;
    it.parents = std::move(parents);
    it.name = name;
    auto scalar = [](const json& x) { return x.is_string() ? x.get<std::string>() : x.dump(); };
    if (v.is_array()) {
      for (const auto& x : v) it.inputs.push_back(scalar(x));
    } else {
      it.inputs.push_back(scalar(v));
    }
    return it;
  }

  std::string active_;
};

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string piece;
  while (std::getline(ss, piece, ',')) {
    auto t = trim(piece);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

std::vector<LabeledComment> load_labeled(const std::string& path, std::ostream& err) {
  auto parsed = load_corpus_file(path);
  for (const auto& r : parsed.rejected) {
    err << "warning: " << path << ":" << r.line << ": " << r.message << "\n";
  }
  auto labeled = parsed.labeled();
  if (labeled.size() != parsed.records.size()) {
    err << "warning: skipped " << parsed.records.size() - labeled.size() << " unlabeled records\n";
  }
  if (labeled.empty()) throw Error(Errc::EmptyInput, "corpus '" + path + "' has no labeled records");
  return labeled;
}

ordered_json split_to_json(const SplitSpec& s) {
  ordered_json j;
  j["train"] = s.train_fraction;
  j["val"] = s.val_fraction;
  j["test"] = s.test_fraction;
  j["seed"] = s.seed;
  j["stratified"] = s.stratified;
  return j;
}

std::optional<SplitSpec> split_from_provenance(const ClassifierModel& m) {
  if (!m.provenance.is_object() || !m.provenance.contains("split")) return std::nullopt;
  const auto& j = m.provenance["split"];
  SplitSpec s;
  s.train_fraction = j.value("train", s.train_fraction);
  s.val_fraction = j.value("val", s.val_fraction);
  s.test_fraction = j.value("test", s.test_fraction);
  s.seed = j.value("seed", s.seed);
  s.stratified = j.value("stratified", s.stratified);
  s.validate();
  return s;
}

std::vector<LabeledComment> select_part(const std::vector<LabeledComment>& items, const SplitSpec& spec,
                                        const std::string& part) {
  if (part == "all") return items;
  auto split = split_dataset(items, spec);
  switch (*parse_split_part(part)) {
    case SplitPart::train: return split.train;
    case SplitPart::val: return split.val;
    case SplitPart::test: return split.test;
  }
  return split.test;
}

struct Evaluation {
  ConfusionMatrix matrix;
  MetricSet metrics;
  std::size_t unmappable = 0;
};

// Unmappable remote replies count as genuine and are tallied separately.
Evaluation evaluate_backend(const Backend& backend, const std::vector<LabeledComment>& items) {
  std::vector<BinaryLabel> pred, gold;
  std::vector<double> scores;
  Evaluation ev;
  for (const auto& it : items) {
    Prediction p;
    try {
      p = backend.classify(it.comment.text);
    } catch (const Error& e) {
      if (e.code() != Errc::UnmappableReply) throw;
      ++ev.unmappable;
    }
    pred.push_back(p.label);
    scores.push_back(p.score);
    gold.push_back(it.binary());
  }
  ev.matrix = confusion(pred, gold);
  ev.metrics = derive_metrics(ev.matrix);
  if (ev.matrix.positives() > 0 && ev.matrix.negatives() > 0) ev.metrics.roc_auc = roc_auc(scores, gold);
  return ev;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write '" + path + "'");
  out << content;
}

std::shared_ptr<Transport> make_llm_transport(const LlmConfig& cfg, const std::string& fixture,
                                              const std::string& record, std::unique_ptr<std::ofstream>& sink) {
  if (!fixture.empty()) return ReplayTransport::from_file(fixture);
  std::shared_ptr<Transport> live = std::make_shared<HttpTransport>(cfg.api_base_url);
  if (record.empty()) return live;
  sink = std::make_unique<std::ofstream>(record, std::ios::app);
  if (!*sink) throw Error(Errc::Io, "cannot open '" + record + "'");
  return std::make_shared<RecordingTransport>(live, *sink);
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string model, corpus, out, split = "0.8,0.1,0.1", name;
  bool no_stratify = false, tune_threshold = false, no_bootstrap = false;
  TrainConfig cfg;
  std::optional<double> feature_subsample;
  std::size_t min_df = 2, max_vocab = 50'000;
};

int cmd_train(const TrainArgs& a, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  SplitSpec spec = parse_split_fractions(a.split);
  spec.seed = seed;
  spec.stratified = !a.no_stratify;
  TrainConfig cfg = a.cfg;
  cfg.seed = seed;
  cfg.bootstrap = !a.no_bootstrap;
  cfg.feature_subsample = a.feature_subsample;
  cfg.vocabulary = {a.min_df, a.max_vocab};
  cfg.validate();
  const auto kind = *parse_model_kind(a.model);

  const auto items = load_labeled(a.corpus, err);
  const auto split = split_dataset(items, spec);
  auto model = train_model(kind, split.train, cfg);
  if (!a.name.empty()) model.name = a.name;
  if (a.tune_threshold) {
    std::vector<double> scores;
    std::vector<BinaryLabel> gold;
    for (const auto& it : split.val) {
      scores.push_back(score_features(model, featurize(model, it.comment.text)));
      gold.push_back(it.binary());
    }
    model.threshold = tune_threshold(scores, gold);
  }
  model.provenance["split"] = split_to_json(spec);
  save_model_file(model, a.out);
  out << "trained " << to_string(kind) << " '" << model.name << "' on " << split.train.size() << " comments ("
      << model.features->dims() << " terms, threshold " << format_metric(model.threshold) << ") -> " << a.out
      << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string model, corpus, part = "test", split, csv;
  bool no_stratify = false;
};

int cmd_eval(const EvalArgs& a, std::uint64_t seed, bool seed_given, std::ostream& out, std::ostream& err) {
  if (a.part != "all" && !parse_split_part(a.part)) throw Error(Errc::InvalidArgument, "bad split part");
  std::optional<SplitSpec> override;
  if (!a.split.empty()) override = parse_split_fractions(a.split);

  const auto model = load_model_file(a.model);
  SplitSpec spec = override ? *override : split_from_provenance(model).value_or(SplitSpec{});
  if (override || seed_given) spec.seed = seed;
  if (override || a.no_stratify) spec.stratified = !a.no_stratify;

  const auto items = select_part(load_labeled(a.corpus, err), spec, a.part);
  const auto backend = open_backend(model);
  const auto ev = evaluate_backend(*backend, items);
  const auto report = render_report({{model.name, ev.metrics}});
  out << report.text;
  if (ev.unmappable) out << "unmappable replies: " << ev.unmappable << "\n";
  if (!a.csv.empty()) write_text_file(a.csv, report.csv);
  return kExitOk;
}

struct CompareArgs {
  std::string models, corpus, part = "test", split, csv, llm, fixture, record;
  std::uint32_t runs = 1;
  bool no_stratify = false;
};

int cmd_compare(const CompareArgs& a, std::uint64_t seed, bool seed_given, std::ostream& out, std::ostream& err) {
  if (a.part != "all" && !parse_split_part(a.part)) throw Error(Errc::InvalidArgument, "bad split part");
  const auto paths = split_csv(a.models);
  if (paths.empty() && a.llm.empty()) throw Error(Errc::InvalidArgument, "nothing to compare");
  if (a.runs == 0) throw Error(Errc::InvalidArgument, "--runs must be positive");
  std::optional<SplitSpec> override;
  if (!a.split.empty()) override = parse_split_fractions(a.split);

  std::vector<ClassifierModel> models;
  for (const auto& p : paths) models.push_back(load_model_file(p));
  std::optional<LlmConfig> llm;
  if (!a.llm.empty()) llm = LlmConfig::from_file(a.llm);

  SplitSpec spec = override ? *override : SplitSpec{};
  if (!override && !models.empty()) spec = split_from_provenance(models.front()).value_or(SplitSpec{});
  if (override || seed_given) spec.seed = seed;
  if (override || a.no_stratify) spec.stratified = !a.no_stratify;
  const auto items = select_part(load_labeled(a.corpus, err), spec, a.part);

  std::vector<ReportRow> rows;
  std::vector<std::pair<std::string, std::size_t>> unmappable;
  for (const auto& m : models) {
    const auto backend = open_backend(m);
    const std::uint32_t runs = is_native(m.kind) ? 1 : a.runs;
    for (std::uint32_t r = 0; r < runs; ++r) {
      const auto ev = evaluate_backend(*backend, items);
      const auto name = runs > 1 ? m.name + " #" + std::to_string(r + 1) : m.name;
      rows.push_back({name, ev.metrics});
      if (!is_native(m.kind)) unmappable.emplace_back(name, ev.unmappable);
    }
  }
  if (llm) {
    std::unique_ptr<std::ofstream> sink;
    auto transport = make_llm_transport(*llm, a.fixture, a.record, sink);
    const auto results = evaluate_llm(items, *llm, *transport, a.runs);
    for (std::size_t r = 0; r < results.size(); ++r) {
      const auto name = a.runs > 1 ? llm->model_name + " #" + std::to_string(r + 1) : llm->model_name;
      rows.push_back({name, results[r].metrics});
      unmappable.emplace_back(name, results[r].unmappable);
    }
  }
  const auto report = render_report(rows);
  out << report.text;
  for (const auto& [name, n] : unmappable) out << "unmappable replies (" << name << "): " << n << "\n";
  if (!a.csv.empty()) write_text_file(a.csv, report.csv);
  return kExitOk;
}

struct ServeArgs {
  std::string model, host, reports, cors;
  int port = 8080;
  double rate = 10.0, burst = 10.0;
  bool test_mode = false;
};

int cmd_serve(const ServeArgs& a, CLI::App& sub, const std::string& config_path, std::ostream& out,
              std::ostream& err) {
  ServiceConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    const auto j = json::parse(in, nullptr, false);
    if (j.is_object() && j.contains("serve")) cfg.merge_json(j["serve"]);
  }
  cfg.apply_env(process_env);
  if (sub.count("--model")) cfg.model_path = a.model;
  if (sub.count("--port")) cfg.port = a.port;
  if (sub.count("--host")) cfg.host = a.host;
  if (sub.count("--reports")) cfg.report_path = a.reports;
  if (sub.count("--rate-limit")) cfg.rate_limit.requests_per_second = a.rate;
  if (sub.count("--rate-burst")) cfg.rate_limit.burst = a.burst;
  if (sub.count("--cors-origins")) cfg.cors_origins = split_csv(a.cors);
  if (sub.count("--test-mode")) cfg.test_mode = a.test_mode;
  if (cfg.model_path.empty()) throw Error(Errc::InvalidArgument, "no model given (--model or FRAUDLENS_MODEL)");

  // Signals are taken synchronously on this thread; workers inherit the mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  sigset_t previous;
  pthread_sigmask(SIG_BLOCK, &signals, &previous);
  struct RestoreMask {
    sigset_t mask;
    ~RestoreMask() { pthread_sigmask(SIG_SETMASK, &mask, nullptr); }
  } restore{previous};

  auto service = std::make_shared<ClassificationService>(std::make_shared<ReportStore>(cfg.report_path));
  HttpServer server(*service, cfg);
  const int port = server.bind();
  server.start();
  out << "listening on " << cfg.host << ":" << port << "\n" << std::flush;
  try {
    std::shared_ptr<const Backend> backend = open_backend(load_model_file(cfg.model_path));
    service->set_backend(backend);
    out << "model '" << backend->name() << "' (" << backend->kind() << ") loaded\n" << std::flush;
  } catch (const std::exception& e) {
    server.stop();
    err << "error: model load failed: " << e.what() << "\n";
    return kExitError;
  }
  int sig = 0;
  sigwait(&signals, &sig);
  server.stop();
  out << "stopped\n";
  return kExitOk;
}

std::optional<RawLabel> label_from_answer(std::string_view answer) {
  if (answer == "g" || answer == "genuine") return RawLabel::genuine;
  if (answer == "s" || answer == "spam") return RawLabel::spam;
  if (answer == "c" || answer == "scam") return RawLabel::scam;
  return std::nullopt;
}

struct AnnotateArgs {
  std::string session, rater, group = "unspecified", import;
};

int cmd_annotate(const AnnotateArgs& a, std::ostream& out, std::ostream& err, std::istream& in) {
  const auto group = parse_rater_group(a.group);
  SessionLog log(a.session);
  log.register_rater({a.rater, *group});
  if (!a.import.empty()) {
    auto parsed = load_corpus_file(a.import);
    for (const auto& r : parsed.rejected) err << "warning: " << a.import << ":" << r.line << ": " << r.message << "\n";
    std::size_t added = 0;
    for (const auto& rec : parsed.records) {
      if (log.session().find_item(rec.comment.id)) continue;
      log.add_item(rec.comment);
      ++added;
    }
    out << "imported " << added << " items\n";
  }
  std::size_t rated = 0;
  const std::size_t total = log.session().items.size();
  while (auto item = next_item(log.session(), a.rater)) {
    std::size_t done = 0;
    for (const auto& it : log.session().items) done += log.session().ratings.contains({a.rater, it.id}) ? 1 : 0;
    out << "[" << done + 1 << "/" << total << "] " << item->id << ": " << item->text << "\n"
        << "label (g=genuine, s=spam, c=scam, q=quit): " << std::flush;
    std::string line;
    if (!std::getline(in, line)) break;
    const auto answer = std::string(trim(line));
    if (answer == "q" || answer == "quit") break;
    const auto label = label_from_answer(answer);
    if (!label) {
      out << "unrecognized answer '" << answer << "'\n";
      continue;
    }
    log.record_rating(a.rater, item->id, *label);
    ++rated;
  }
  const bool finished = !next_item(log.session(), a.rater);
  out << "rated " << rated << " items" << (finished ? "; all items done" : "") << "\n";
  return kExitOk;
}

int cmd_kappa(const std::string& session_path, const std::string& scheme, std::ostream& out) {
  std::ifstream in(session_path);
  if (!in) throw Error(Errc::Io, "cannot open session '" + session_path + "'");
  const auto session = replay_session(in);
  std::vector<RatingScheme> schemes;
  if (scheme == "three" || scheme == "both") schemes.push_back(RatingScheme::three_way);
  if (scheme == "binary" || scheme == "both") schemes.push_back(RatingScheme::binary);

  for (auto s : schemes) {
    out << "scheme " << to_string(s) << "\n";
    try {
      const auto build = build_rating_matrix(session, s);
      out << "  all raters: kappa " << format_metric(fleiss_kappa(build.matrix)) << " (raters " << build.raters
          << ", items " << build.item_ids.size() << ", excluded " << build.excluded.size() << ")\n";
    } catch (const Error& e) {
      out << "  all raters: n/a (" << e.what() << ")\n";
    }
    for (const auto& g : agreement_by_group(session, s)) {
      out << "  " << to_string(g.group) << ": ";
      if (g.kappa) {
        out << "kappa " << format_metric(*g.kappa) << " (raters " << g.raters << ", items " << g.items_used
            << ", excluded " << g.items_excluded << ")\n";
      } else {
        out << "n/a (" << g.message << ")\n";
      }
    }
  }
  return kExitOk;
}

std::vector<ConfusionMatrix> read_matrices(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open '" + path + "'");
  std::vector<ConfusionMatrix> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (auto colon = t.rfind(':'); colon != std::string_view::npos) t = t.substr(colon + 1);
    const auto cells = split_csv(std::string(t));
    std::vector<std::uint64_t> v;
    try {
      for (const auto& c : cells) {
        std::size_t used = 0;
        if (c.front() == '-') throw std::invalid_argument(c);
        v.push_back(std::stoull(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      }
    } catch (const std::exception&) {
      v.clear();
    }
    if (v.size() != 4) {
      throw Error(Errc::MalformedLine, path + ":" + std::to_string(line_no) + ": expected tp,fp,fn,tn");
    }
    out.push_back({v[0], v[1], v[2], v[3]});
  }
  return out;
}

int cmd_audit(const std::string& path, std::ostream& out) {
  const auto matrices = read_matrices(path);
  const auto sum = aggregate(matrices);
  const auto m = derive_metrics(sum);
  const double npv = sum.tn + sum.fp ? static_cast<double>(sum.tn) / static_cast<double>(sum.tn + sum.fp) : 0.0;
  out << "posts: " << matrices.size() << "\n"
      << "aggregate (tp,fp,fn,tn): " << sum.tp << "," << sum.fp << "," << sum.fn << "," << sum.tn << "\n"
      << "recall tp/(tp+fn): " << format_metric(m.recall) << "\n"
      << "precision tp/(tp+fp): " << format_metric(m.precision) << "\n"
      << "tn/(tn+fp): " << format_metric(npv) << "\n"
      << "accuracy: " << format_metric(*m.accuracy) << "\n"
      << "f1: " << format_metric(m.f1) << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::istream& in) {
  std::string active;
  for (const auto& a : args) {
    if (std::find(kSubcommands.begin(), kSubcommands.end(), a) != kSubcommands.end()) {
      active = a;
      break;
    }
  }

  CLI::App app{"Comment fraud classification toolkit", "fraudlens"};
  app.require_subcommand(1);
  std::uint64_t seed = 42;
  auto* seed_opt = app.add_option("--seed", seed, "Seed for splits, forests and LLM requests");
  auto* config_opt =
      app.set_config("--config", "", "JSON config; keys mirror flag names, one object per subcommand");
  app.config_formatter(std::make_shared<JsonConfig>(active));

  const auto model_kinds = std::vector<std::string>{"nb", "lr", "tree", "forest"};
  const auto parts = std::vector<std::string>{"train", "val", "test", "all"};

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a native classifier on the train part of a corpus");
  t->add_option("--model", train.model, "Classifier kind")->required()->check(CLI::IsMember(model_kinds));
  t->add_option("--corpus", train.corpus, "Labeled JSONL corpus")->required();
  t->add_option("--out", train.out, "Model file to write")->required();
  t->add_option("--split", train.split, "train,val,test fractions")->capture_default_str();
  t->add_flag("--no-stratify", train.no_stratify, "Split without class stratification");
  t->add_flag("--tune-threshold", train.tune_threshold, "Pick the F1-optimal threshold on the val part");
  t->add_option("--name", train.name, "Model identifier reported by the service");
  t->add_option("--epochs", train.cfg.epochs)->capture_default_str();
  t->add_option("--learning-rate", train.cfg.learning_rate)->capture_default_str();
  t->add_option("--l2", train.cfg.l2)->capture_default_str();
  t->add_option("--alpha", train.cfg.alpha, "Naive Bayes smoothing")->capture_default_str();
  t->add_option("--max-depth", train.cfg.max_depth)->capture_default_str();
  t->add_option("--min-leaf", train.cfg.min_leaf)->capture_default_str();
  t->add_option("--trees", train.cfg.n_trees)->capture_default_str();
  t->add_option("--feature-subsample", train.feature_subsample, "Forest split feature fraction (default sqrt)");
  t->add_flag("--no-bootstrap", train.no_bootstrap, "Train forest trees on the full train part");
  t->add_option("--min-df", train.min_df)->capture_default_str();
  t->add_option("--max-vocab", train.max_vocab)->capture_default_str();

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Evaluate a model on one part of a corpus");
  e->add_option("--model", eval.model, "Model file")->required();
  e->add_option("--corpus", eval.corpus, "Labeled JSONL corpus")->required();
  e->add_option("--split-part", eval.part, "Part to evaluate")->check(CLI::IsMember(parts))->capture_default_str();
  e->add_option("--split", eval.split, "Override the split recorded in the model");
  e->add_flag("--no-stratify", eval.no_stratify);
  e->add_option("--csv", eval.csv, "Also write the report as CSV");

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "Compare several models (and optionally an LLM) on one corpus part");
  c->add_option("--models", cmp.models, "Comma-separated model files");
  c->add_option("--corpus", cmp.corpus, "Labeled JSONL corpus")->required();
  c->add_option("--split-part", cmp.part)->check(CLI::IsMember(parts))->capture_default_str();
  c->add_option("--split", cmp.split, "Override the split recorded in the first model");
  c->add_flag("--no-stratify", cmp.no_stratify);
  c->add_option("--llm", cmp.llm, "LLM config JSON for zero-shot classification");
  c->add_option("--runs", cmp.runs, "Runs per nondeterministic backend")->capture_default_str();
  c->add_option("--llm-fixture", cmp.fixture, "Replay LLM answers from a fixture instead of the network");
  c->add_option("--record-fixture", cmp.record, "Append live LLM exchanges to a fixture");
  c->add_option("--csv", cmp.csv, "Also write the report as CSV");

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "Serve verdicts over HTTP");
  s->add_option("--model", serve.model, "Model file");
  s->add_option("--port", serve.port, "Port (0 picks a free one)");
  s->add_option("--host", serve.host, "Listen address");
  s->add_option("--reports", serve.reports, "Report store (JSONL)");
  s->add_option("--rate-limit", serve.rate, "Requests per second per client");
  s->add_option("--rate-burst", serve.burst, "Token bucket size");
  s->add_option("--cors-origins", serve.cors, "Comma-separated allowed origins, * for any");
  s->add_flag("--test-mode", serve.test_mode, "Disable rate limiting");

  AnnotateArgs ann;
  auto* an = app.add_subcommand("annotate", "Label comments in an annotation session");
  an->add_option("--session", ann.session, "Session log (JSONL)")->required();
  an->add_option("--rater", ann.rater, "Rater id")->required();
  an->add_option("--group", ann.group)
      ->check(CLI::IsMember({"expert", "amateur", "unspecified"}))
      ->capture_default_str();
  an->add_option("--import", ann.import, "Add the comments of a JSONL corpus to the session");

  std::string kappa_session, scheme = "both";
  auto* k = app.add_subcommand("kappa", "Fleiss kappa of an annotation session");
  k->add_option("--session", kappa_session, "Session log (JSONL)")->required();
  k->add_option("--scheme", scheme)->check(CLI::IsMember({"binary", "three", "both"}))->capture_default_str();

  std::string matrices;
  auto* af = app.add_subcommand("audit-filter", "Aggregate per-post confusion matrices of an existing filter");
  af->add_option("--matrices", matrices, "File with one tp,fp,fn,tn line per post")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const bool seed_given = seed_opt->count() > 0;
    if (t->parsed()) return cmd_train(train, seed, out, err);
    if (e->parsed()) return cmd_eval(eval, seed, seed_given, out, err);
    if (c->parsed()) return cmd_compare(cmp, seed, seed_given, out, err);
    if (s->parsed()) {
      const std::string config_path = config_opt->count() ? config_opt->results().front() : std::string();
      return cmd_serve(serve, *s, config_path, out, err);
    }
    if (an->parsed()) return cmd_annotate(ann, out, err, in);
    if (k->parsed()) return cmd_kappa(kappa_session, scheme, out);
    if (af->parsed()) return cmd_audit(matrices, out);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitError;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr, std::cin);
}

}  // namespace fraudlens::cli
