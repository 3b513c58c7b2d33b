#include "c2f/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "c2f/embedding_store.hpp"
#include "c2f/error.hpp"
#include "c2f/log.hpp"

namespace c2f {
namespace {

using nlohmann::json;

std::string_view to_string(CsLosses v) { return v == CsLosses::local_only ? "local-only" : "local-and-global"; }
std::string_view to_string(SignConvention v) { return v == SignConvention::paper_literal ? "paper-literal" : "intent"; }
std::string_view to_string(ExclusiveScope v) { return v == ExclusiveScope::all ? "all" : "candidates"; }
std::string_view to_string(BetaCheck v) { return v == BetaCheck::error ? "error" : "warn"; }

template <class Enum>
Enum parse_choice(std::string_view key, std::string_view value, std::initializer_list<Enum> options) {
  for (Enum e : options) {
    if (to_string(e) == value) return e;
  }
  std::string msg = "invalid value '" + std::string(value) + "' for " + std::string(key) + " (expected";
  for (Enum e : options) msg += " " + std::string(to_string(e));
  throw Error("cli", msg + ")");
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cli", "cannot write " + path.string());
  return out;
}

void require_file(const std::filesystem::path& path, std::string_view what) {
  if (path.empty()) throw Error("cli", std::string(what) + " path is not set");
  if (!std::filesystem::is_regular_file(path)) {
    throw Error("cli", std::string(what) + " file not found: " + path.string());
  }
}

void check_id_hash(const std::filesystem::path& path, std::span<const std::string> keys, std::string_view kind) {
  const auto manifest = read_manifest(path);
  if (!manifest) return;
  if (const auto k = manifest->get("kind"); k && *k != kind) {
    throw Error("embedding_store", path.string() + ": manifest kind is '" + *k + "', expected '" + std::string(kind) + "'");
  }
  const auto recorded = manifest->get("id_hash");
  if (!recorded) return;
  const std::string expected = id_hash(keys);
  if (*recorded != expected) {
    throw Error("embedding_store", path.string() + ": id_hash " + *recorded + " does not match the " +
                                       std::string(kind) + " keys (" + expected + "); rows are misaligned");
  }
}

Matrix load_unit_matrix(const std::filesystem::path& path, EmbeddingKind kind) {
  return to_matrix(l2_normalize(read_embeddings(path, kind)));
}

std::string sanitize(std::string name) {
  for (char& ch : name) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
  }
  return name;
}

json beta_json(double beta) { return std::isfinite(beta) ? json(beta) : json(nullptr); }

}  // namespace

// --- RunConfig ---------------------------------------------------------------------

void RunConfig::validate() const {
  require_file(taxonomy, "taxonomy");
  require_file(corpus, "corpus");
  require_file(passages, "passage embedding");
  if (no_gloss) {
    require_file(prototypes_no_gloss, "surface-name prototype embedding");
  } else {
    require_file(prototypes, "prototype embedding");
  }
  if (output_dir.empty()) throw Error("cli", "output directory is not set");
  if (k == 0) throw Error("cli", "K must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw Error("cli", "lr must be positive");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw Error("cli", "weight decay must be nonnegative");
  if (batch_size == 0) throw Error("cli", "batch size must be positive");
  if (r && (*r < 0 || *r > 100)) throw Error("cli", "r must be in [0, 100] or auto");
  if (!(gamma >= 0.0) || !(sigma >= 0.0)) throw Error("cli", "margins must be nonnegative");
}

std::string RunConfig::to_json() const {
  json j;
  j["taxonomy"] = taxonomy.string();
  j["corpus"] = corpus.string();
  j["passages"] = passages.string();
  j["prototypes"] = prototypes.string();
  j["prototypes_no_gloss"] = prototypes_no_gloss.string();
  j["output_dir"] = output_dir.string();
  j["metric"] = std::string(c2f::to_string(metric));
  j["k"] = k;
  j["gamma"] = gamma;
  j["sigma"] = sigma;
  j["lr"] = lr;
  j["weight_decay"] = weight_decay;
  j["batch_size"] = batch_size;
  j["r"] = r ? json(*r) : json("auto");
  j["warmup_epochs"] = warmup_epochs;
  j["bootstrap_epochs"] = bootstrap_epochs;
  j["seed"] = seed;
  j["mapping_free"] = mapping_free;
  j["no_select"] = no_select;
  j["no_bootstrap"] = no_bootstrap;
  j["no_gloss"] = no_gloss;
  j["cs_losses"] = std::string(to_string(cs_losses));
  j["sign"] = std::string(to_string(sign));
  j["exclusive_scope"] = std::string(to_string(exclusive_scope));
  j["beta_check"] = std::string(to_string(beta_check));
  j["emit_confusion"] = emit_confusion;
  return j.dump(2) + "\n";
}

RunConfig run_config_from_json(std::string_view text, const RunConfig& defaults) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error("cli", std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error("cli", "config must be a JSON object");
  RunConfig c = defaults;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "taxonomy") c.taxonomy = value.get<std::string>();
      else if (key == "corpus") c.corpus = value.get<std::string>();
      else if (key == "passages") c.passages = value.get<std::string>();
      else if (key == "prototypes") c.prototypes = value.get<std::string>();
      else if (key == "prototypes_no_gloss") c.prototypes_no_gloss = value.get<std::string>();
      else if (key == "output_dir") c.output_dir = value.get<std::string>();
      else if (key == "metric") c.metric = parse_metric(value.get<std::string>());
      else if (key == "k") c.k = value.get<std::size_t>();
      else if (key == "gamma") c.gamma = value.get<double>();
      else if (key == "sigma") c.sigma = value.get<double>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "weight_decay") c.weight_decay = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "r") {
        if (value.is_string() && value.get<std::string>() == "auto") c.r.reset();
        else c.r = value.get<int>();
      }
      else if (key == "warmup_epochs") c.warmup_epochs = value.get<std::size_t>();
      else if (key == "bootstrap_epochs") c.bootstrap_epochs = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "mapping_free") c.mapping_free = value.get<bool>();
      else if (key == "no_select") c.no_select = value.get<bool>();
      else if (key == "no_bootstrap") c.no_bootstrap = value.get<bool>();
      else if (key == "no_gloss") c.no_gloss = value.get<bool>();
      else if (key == "cs_losses")
        c.cs_losses = parse_choice(key, value.get<std::string>(), {CsLosses::local_and_global, CsLosses::local_only});
      else if (key == "sign")
        c.sign = parse_choice(key, value.get<std::string>(), {SignConvention::intent, SignConvention::paper_literal});
      else if (key == "exclusive_scope")
        c.exclusive_scope =
            parse_choice(key, value.get<std::string>(), {ExclusiveScope::candidates, ExclusiveScope::all});
      else if (key == "beta_check")
        c.beta_check = parse_choice(key, value.get<std::string>(), {BetaCheck::warn, BetaCheck::error});
      else if (key == "emit_confusion") c.emit_confusion = value.get<bool>();
      else throw Error("cli", "unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error("cli", std::string("config has a value of the wrong type: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& defaults) {
  std::ifstream in(path);
  if (!in) throw Error("cli", "cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return run_config_from_json(text.str(), defaults);
}

TrainConfig RunConfig::train_config(int r_percent) const {
  TrainConfig t;
  t.loss.gamma = gamma;
  t.loss.sigma = sigma;
  t.loss.batch_size = batch_size;
  t.loss.sign = sign;
  t.loss.optimizer.lr = lr;
  t.loss.optimizer.weight_decay = weight_decay;
  t.similarity.metric = metric;
  t.similarity.k = k;
  t.schedule.warmup_epochs = warmup_epochs;
  t.schedule.bootstrap_epochs = no_bootstrap ? 0 : bootstrap_epochs;
  t.r_percent = r_percent;
  t.no_select = no_select;
  t.mapping_free = mapping_free;
  t.cs_losses = cs_losses;
  t.beta_check = beta_check;
  t.seed = seed;
  return t;
}

std::filesystem::path default_output_root() {
  if (const char* root = std::getenv("C2F_OUTPUT_ROOT"); root != nullptr && *root != '\0') return root;
  return "runs";
}

// --- loading and running -------------------------------------------------------------

RunInputs load_inputs(const RunConfig& config) {
  Taxonomy taxonomy = load_taxonomy(config.taxonomy);
  LoadedCorpus loaded = load_corpus(config.corpus, taxonomy);

  std::vector<std::string> passage_keys;
  passage_keys.reserve(loaded.passages.size());
  for (const Passage& p : loaded.passages) passage_keys.push_back(std::to_string(p.id));
  Matrix passages = load_unit_matrix(config.passages, EmbeddingKind::passage);
  if (passages.rows() != loaded.passages.size()) {
    throw Error("embedding_store", config.passages.string() + " has " + std::to_string(passages.rows()) +
                                       " rows but the corpus has " + std::to_string(loaded.passages.size()) +
                                       " passages");
  }
  check_id_hash(config.passages, passage_keys, "passage");

  const std::filesystem::path proto_path = config.prototype_path();
  Matrix bank = load_unit_matrix(proto_path, EmbeddingKind::prototype);
  std::vector<std::string> proto_keys;
  for (const FineLabel& f : taxonomy.fine_labels()) proto_keys.push_back(f.surface_name);
  if (bank.rows() == taxonomy.fine_count() + taxonomy.coarse_count()) {
    for (const CoarseLabel& c : taxonomy.coarse_labels()) proto_keys.push_back(c.surface_name);
  } else if (bank.rows() != taxonomy.fine_count()) {
    throw Error("embedding_store", proto_path.string() + " has " + std::to_string(bank.rows()) +
                                       " rows; expected one per fine label (" +
                                       std::to_string(taxonomy.fine_count()) + "), optionally followed by one per "
                                       "coarse label");
  }
  check_id_hash(proto_path, proto_keys, "prototype");
  if (bank.cols() != passages.cols()) {
    throw Error("embedding_store", "prototype dimension " + std::to_string(bank.cols()) +
                                       " differs from passage dimension " + std::to_string(passages.cols()));
  }
  return RunInputs{std::move(taxonomy), std::move(loaded.passages), std::move(loaded.gold), std::move(passages),
                   std::move(bank)};
}

RunOutcome execute(const RunConfig& config, RunInputs& inputs) {
  for (Passage& p : inputs.corpus) {
    p.state = Unlabeled{};
    p.weak_seed.reset();
  }
  RunOutcome outcome;
  outcome.seed_count = seed_weak_supervision(inputs.corpus, inputs.taxonomy, config.exclusive_scope);
  if (outcome.seed_count == 0) log::warn("no passage received a weak seed; the local loss never fires in warm-up");
  outcome.r_percent = config.r ? *config.r : select_r(seed_ratios(inputs.corpus, inputs.taxonomy));

  outcome.model = ModelState::initial(inputs.passages.cols(), config.seed);
  BootstrapEngine engine(inputs.taxonomy, inputs.corpus, inputs.passages, inputs.bank,
                         config.train_config(outcome.r_percent));
  outcome.result = engine.run(outcome.model);

  const bool has_gold = std::any_of(inputs.gold.begin(), inputs.gold.end(), [](const auto& g) { return g.has_value(); });
  if (has_gold) {
    std::vector<FineId> labels;
    labels.reserve(outcome.result.predictions.size());
    for (const Prediction& p : outcome.result.predictions) labels.push_back(p.label);
    outcome.report = evaluate(labels, inputs.gold, inputs.taxonomy);
  }
  return outcome;
}

void write_predictions(std::ostream& out, const Corpus& corpus, std::span<const Prediction> predictions,
                       const Taxonomy& taxonomy) {
  if (predictions.size() != corpus.size()) throw Error("cli", "prediction count differs from corpus size");
  out << "id\tfine\tscore\n";
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    out << corpus[i].id << '\t' << taxonomy.fine(predictions[i].label).surface_name << '\t'
        << fixed(predictions[i].score, 6) << '\n';
  }
}

std::vector<FineId> read_predictions(const std::filesystem::path& path, const Corpus& corpus,
                                     const Taxonomy& taxonomy) {
  std::ifstream in(path);
  if (!in) throw Error("evaluation", "cannot open predictions " + path.string());
  std::vector<FineId> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (line_no == 1 && line.rfind("id\t", 0) == 0)) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos) throw Error("evaluation", where + ": expected id<TAB>fine[<TAB>score]");
    const std::string id = line.substr(0, t1);
    const std::string fine = line.substr(t1 + 1, t2 == std::string::npos ? std::string::npos : t2 - t1 - 1);
    const std::size_t row = out.size();
    if (row >= corpus.size()) throw Error("evaluation", where + ": more predictions than passages");
    if (id != std::to_string(corpus[row].id)) {
      throw Error("evaluation", where + ": id " + id + " does not match passage " + std::to_string(corpus[row].id));
    }
    const auto label = taxonomy.find_fine(fine);
    if (!label) throw Error("evaluation", where + ": unknown fine label '" + fine + "'");
    out.push_back(*label);
  }
  if (out.size() != corpus.size()) {
    throw Error("evaluation", path.string() + ": " + std::to_string(out.size()) + " predictions for " +
                                  std::to_string(corpus.size()) + " passages");
  }
  return out;
}

void write_outputs(const RunConfig& config, const RunInputs& inputs, const RunOutcome& outcome) {
  const auto& dir = config.output_dir;
  std::filesystem::create_directories(dir);
  const std::string config_json = config.to_json();
  open_output(dir / "config.json") << config_json;

  {
    std::ofstream log_out = open_output(dir / "run_log.jsonl");
    json start{{"event", "seeding"}, {"weak_seeds", outcome.seed_count}, {"r_percent", outcome.r_percent}};
    log_out << start.dump() << '\n';
    for (const EpochLog& e : outcome.result.log) {
      json rec{{"event", "epoch"},
               {"epoch", e.epoch},
               {"phase", e.phase},
               {"steps", e.steps},
               {"examples", e.losses.examples},
               {"loss_global", e.losses.global},
               {"loss_local", e.losses.local},
               {"loss_coarse_global", e.losses.coarse_global},
               {"loss_total", e.losses.total()}};
      if (e.cs_size) {
        rec["cs_size"] = *e.cs_size;
        rec["beta"] = beta_json(e.beta);
        json per = json::object();
        for (std::size_t c = 0; c < e.cs_per_coarse.size(); ++c) {
          per[inputs.taxonomy.coarse(coarse_id(c)).surface_name] = e.cs_per_coarse[c];
        }
        rec["cs_per_coarse"] = per;
      }
      log_out << rec.dump() << '\n';
    }
    json done{{"event", "final"}};
    if (outcome.report) {
      done["micro_f1"] = outcome.report->micro_f1;
      done["macro_f1"] = outcome.report->macro_f1;
    }
    log_out << done.dump() << '\n';
  }

  write_checkpoint(dir / "checkpoint.c2fm", outcome.model, config_json);
  {
    std::ofstream out = open_output(dir / "predictions.tsv");
    write_predictions(out, inputs.corpus, outcome.result.predictions, inputs.taxonomy);
  }
  if (outcome.report) {
    {
      std::ofstream out = open_output(dir / "report.txt");
      write_report(out, *outcome.report, inputs.taxonomy);
    }
    std::vector<FineId> all;
    for (const FineLabel& f : inputs.taxonomy.fine_labels()) all.push_back(f.id);
    {
      std::ofstream out = open_output(dir / "confusion.tsv");
      write_confusion_table(out, outcome.report->confusion, all, inputs.taxonomy);
    }
    if (config.emit_confusion) {
      for (const CoarseLabel& c : inputs.taxonomy.coarse_labels()) {
        std::ofstream out = open_output(dir / ("confusion_" + sanitize(c.surface_name) + ".tsv"));
        write_confusion_table(out, confusion_by_coarse(*outcome.report, inputs.taxonomy, c.id), c.children,
                              inputs.taxonomy);
      }
    }
  }
}

RunOutcome run_pipeline(const RunConfig& config) {
  config.validate();
  RunInputs inputs = load_inputs(config);
  RunOutcome outcome = execute(config, inputs);
  write_outputs(config, inputs, outcome);
  return outcome;
}

// --- ablations ---------------------------------------------------------------------------

namespace {
constexpr Variant kAllVariants[] = {Variant::fine,       Variant::bootstrap, Variant::gloss,    Variant::select,
                                    Variant::similarity, Variant::manhattan, Variant::euclidean};
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::fine: return "fine";
    case Variant::bootstrap: return "bootstrap";
    case Variant::gloss: return "gloss";
    case Variant::select: return "select";
    case Variant::similarity: return "similarity";
    case Variant::manhattan: return "manhattan";
    case Variant::euclidean: return "euclidean";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants) {
    if (to_string(v) == name) return v;
  }
  throw Error("cli", "unknown ablation variant '" + std::string(name) +
                         "' (expected fine, bootstrap, gloss, select, similarity, manhattan or euclidean)");
}

std::string_view variant_label(Variant v) {
  switch (v) {
    case Variant::fine: return "w/o fine";
    case Variant::bootstrap: return "w/o bootstrap";
    case Variant::gloss: return "w/o gloss";
    case Variant::select: return "w/o select";
    case Variant::similarity: return "w/o similarity";
    case Variant::manhattan: return "w/ Manhattan similarity";
    case Variant::euclidean: return "w/ Euclidean similarity";
  }
  return "?";
}

RunConfig apply_variant(RunConfig config, Variant v) {
  switch (v) {
    case Variant::fine: config.mapping_free = true; break;
    case Variant::bootstrap: config.no_bootstrap = true; break;
    case Variant::gloss: config.no_gloss = true; break;
    case Variant::select: config.no_select = true; break;
    case Variant::similarity: config.metric = Metric::cosine; break;
    case Variant::manhattan: config.metric = Metric::manhattan; break;
    case Variant::euclidean: config.metric = Metric::euclidean; break;
  }
  return config;
}

AblationTable run_ablation(const RunConfig& config, std::span<const Variant> variants) {
  const auto scores = [](const RunOutcome& o, std::string label) {
    if (!o.report) throw Error("evaluation", "ablation needs gold labels in the corpus");
    return AblationRow{std::move(label), o.report->micro_f1, o.report->macro_f1};
  };
  AblationTable table;
  RunConfig base = config;
  base.output_dir = config.output_dir / "base";
  table.base = scores(run_pipeline(base), "Ours");
  for (Variant v : variants) {
    RunConfig vc = apply_variant(config, v);
    vc.output_dir = config.output_dir / std::string(to_string(v));
    table.variants.push_back(scores(run_pipeline(vc), std::string(variant_label(v))));
  }
  std::ofstream out = open_output(config.output_dir / "ablation.tsv");
  write_ablation_table(out, table);
  return table;
}

void write_ablation_table(std::ostream& out, const AblationTable& table) {
  const auto pct = [](double v) { return fixed(100.0 * v, 2); };
  const auto delta = [](double v) {
    const double d = 100.0 * v;
    return (d >= 0.0 ? "+" : "") + fixed(d, 2);
  };
  out << "method\tMi-F1\tdelta_Mi\tMa-F1\tdelta_Ma\n";
  out << table.base.label << '\t' << pct(table.base.micro_f1) << "\t-\t" << pct(table.base.macro_f1) << "\t-\n";
  for (const AblationRow& row : table.variants) {
    out << row.label << '\t' << pct(row.micro_f1) << '\t' << delta(row.micro_f1 - table.base.micro_f1) << '\t'
        << pct(row.macro_f1) << '\t' << delta(row.macro_f1 - table.base.macro_f1) << '\n';
  }
}

}  // namespace c2f
