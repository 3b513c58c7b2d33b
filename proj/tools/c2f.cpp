// c2f: command-line front end for coarse-to-fine label refinement.
//
//   c2f run                 seed, train, select, predict and evaluate one configuration
//   c2f ablate              base run plus one run per ablation variant, with a delta table
//   c2f gen-synthetic       write a synthetic hierarchical corpus with embeddings
//   c2f evaluate            score a predictions file against gold labels
//   c2f inspect-embeddings  summarize a C2FE file and check its manifest
//
// Failures print one JSON error record on stderr and exit with status 2.

#include <cmath>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "c2f/embedding_store.hpp"
#include "c2f/error.hpp"
#include "c2f/evaluation.hpp"
#include "c2f/pipeline.hpp"
#include "c2f/simd/kernels.hpp"
#include "c2f/synthetic.hpp"

namespace {

using nlohmann::json;

// Flags given on the command line override values from --config; each
// registered option applies its value only when it was actually passed.
class RunOptions {
 public:
  void attach(CLI::App& app) {
    app.add_option("--config", config_file_, "JSON run configuration; command-line flags override it");
    path(app, "--taxonomy", &c2f::RunConfig::taxonomy, "Taxonomy TSV (coarse<TAB>fine[<TAB>gloss])");
    path(app, "--corpus", &c2f::RunConfig::corpus, "Corpus TSV (id<TAB>coarse<TAB>text[<TAB>gold])");
    path(app, "--passages", &c2f::RunConfig::passages, "Passage embeddings (C2FE)");
    path(app, "--prototypes", &c2f::RunConfig::prototypes, "Gloss-augmented prototype embeddings (C2FE)");
    path(app, "--prototypes-no-gloss", &c2f::RunConfig::prototypes_no_gloss,
         "Surface-name-only prototype embeddings (C2FE)");
    path(app, "--out", &c2f::RunConfig::output_dir, "Output directory (default: $C2F_OUTPUT_ROOT/run or runs/run)");

    value<std::string>(app, "--metric", "csls | cosine | manhattan | euclidean",
                       [](c2f::RunConfig& c, const std::string& v) { c.metric = c2f::parse_metric(v); });
    value<std::size_t>(app, "--k", "Neighbourhood size of the KNN correction",
                       [](c2f::RunConfig& c, std::size_t v) { c.k = v; });
    value<double>(app, "--gamma", "Global margin", [](c2f::RunConfig& c, double v) { c.gamma = v; });
    value<double>(app, "--sigma", "Local margin", [](c2f::RunConfig& c, double v) { c.sigma = v; });
    value<double>(app, "--lr", "AdamW learning rate", [](c2f::RunConfig& c, double v) { c.lr = v; });
    value<double>(app, "--weight-decay", "AdamW decoupled weight decay",
                  [](c2f::RunConfig& c, double v) { c.weight_decay = v; });
    value<std::size_t>(app, "--batch-size", "Mini-batch size",
                       [](c2f::RunConfig& c, std::size_t v) { c.batch_size = v; });
    value<std::string>(app, "--r", "Confident-set percentage, or 'auto' to derive it from seed ratios",
                       [](c2f::RunConfig& c, const std::string& v) {
                         if (v == "auto") {
                           c.r.reset();
                           return;
                         }
                         try {
                           std::size_t used = 0;
                           const int r = std::stoi(v, &used);
                           if (used != v.size()) throw std::invalid_argument(v);
                           c.r = r;
                         } catch (const std::exception&) {
                           throw c2f::Error("cli", "--r expects an integer or 'auto', got '" + v + "'");
                         }
                       });
    value<std::size_t>(app, "--warmup-epochs", "Warm-up epochs",
                       [](c2f::RunConfig& c, std::size_t v) { c.warmup_epochs = v; });
    value<std::size_t>(app, "--bootstrap-epochs", "Bootstrapping epochs",
                       [](c2f::RunConfig& c, std::size_t v) { c.bootstrap_epochs = v; });
    value<std::uint64_t>(app, "--seed", "Random seed", [](c2f::RunConfig& c, std::uint64_t v) { c.seed = v; });
    value<std::string>(app, "--cs-losses", "local-and-global | local-only",
                       [](c2f::RunConfig& c, const std::string& v) {
                         if (v == "local-and-global") c.cs_losses = c2f::CsLosses::local_and_global;
                         else if (v == "local-only") c.cs_losses = c2f::CsLosses::local_only;
                         else throw c2f::Error("cli", "--cs-losses expects local-and-global or local-only");
                       });
    value<std::string>(app, "--exclusive-scope", "candidates | all",
                       [](c2f::RunConfig& c, const std::string& v) {
                         if (v == "candidates") c.exclusive_scope = c2f::ExclusiveScope::candidates;
                         else if (v == "all") c.exclusive_scope = c2f::ExclusiveScope::all;
                         else throw c2f::Error("cli", "--exclusive-scope expects candidates or all");
                       });

    flag(app, "--mapping-free", "Replace the fine global loss with the coarse-level loss",
         [](c2f::RunConfig& c) { c.mapping_free = true; });
    flag(app, "--no-select", "Train on the weak seeds instead of a selected confident set",
         [](c2f::RunConfig& c) { c.no_select = true; });
    flag(app, "--no-bootstrap", "Stop after warm-up", [](c2f::RunConfig& c) { c.no_bootstrap = true; });
    flag(app, "--no-gloss", "Use the surface-name-only prototypes", [](c2f::RunConfig& c) { c.no_gloss = true; });
    flag(app, "--paper-literal-sign", "Use the printed orientation of the global hinge",
         [](c2f::RunConfig& c) { c.sign = c2f::SignConvention::paper_literal; });
    flag(app, "--strict-beta", "Fail when the selection threshold decreases",
         [](c2f::RunConfig& c) { c.beta_check = c2f::BetaCheck::error; });
    flag(app, "--emit-confusion", "Also write one confusion table per coarse label",
         [](c2f::RunConfig& c) { c.emit_confusion = true; });
  }

  c2f::RunConfig resolve(const std::string& default_leaf) const {
    c2f::RunConfig config = config_file_.empty() ? c2f::RunConfig{} : c2f::load_run_config(config_file_);
    for (const auto& apply : appliers_) apply(config);
    if (config.output_dir.empty()) config.output_dir = c2f::default_output_root() / default_leaf;
    return config;
  }

 private:
  using Applier = std::function<void(c2f::RunConfig&)>;

  void path(CLI::App& app, const std::string& name, std::filesystem::path c2f::RunConfig::*field,
            const std::string& help) {
    auto holder = std::make_shared<std::string>();
    CLI::Option* opt = app.add_option(name, *holder, help);
    appliers_.push_back([opt, holder, field](c2f::RunConfig& c) {
      if (opt->count() > 0) c.*field = *holder;
    });
  }

  template <class T, class F>
  void value(CLI::App& app, const std::string& name, const std::string& help, F apply) {
    auto holder = std::make_shared<T>();
    CLI::Option* opt = app.add_option(name, *holder, help);
    appliers_.push_back([opt, holder, apply](c2f::RunConfig& c) {
      if (opt->count() > 0) apply(c, *holder);
    });
  }

  template <class F>
  void flag(CLI::App& app, const std::string& name, const std::string& help, F apply) {
    CLI::Option* opt = app.add_flag(name, help);
    appliers_.push_back([opt, apply](c2f::RunConfig& c) {
      if (opt->count() > 0) apply(c);
    });
  }

  std::string config_file_;
  std::vector<Applier> appliers_;
};

void print_summary(const c2f::RunConfig& config, const c2f::RunOutcome& outcome) {
  json j{{"output_dir", config.output_dir.string()},
         {"weak_seeds", outcome.seed_count},
         {"r_percent", outcome.r_percent}};
  if (outcome.report) {
    j["micro_f1"] = outcome.report->micro_f1;
    j["macro_f1"] = outcome.report->macro_f1;
  }
  std::cout << j.dump() << '\n';
}

int cmd_inspect(const std::string& file, const std::string& taxonomy_path, const std::string& corpus_path) {
  const c2f::EmbeddingMatrix m = c2f::read_embeddings(std::filesystem::path(file));
  double min_norm = std::numeric_limits<double>::infinity();
  double max_norm = 0.0;
  for (std::size_t r = 0; r < m.n_rows; ++r) {
    double s = 0.0;
    for (float v : m.row(r)) s += static_cast<double>(v) * static_cast<double>(v);
    min_norm = std::min(min_norm, std::sqrt(s));
    max_norm = std::max(max_norm, std::sqrt(s));
  }
  json j{{"path", file}, {"format_version", c2f::kEmbeddingFormatVersion}, {"rows", m.n_rows}, {"dim", m.dim}};
  if (m.n_rows > 0) {
    j["min_norm"] = min_norm;
    j["max_norm"] = max_norm;
  }
  const auto manifest = c2f::read_manifest(file);
  if (manifest) {
    j["manifest"] = manifest->fields;
  } else {
    j["manifest"] = nullptr;
  }

  // With a taxonomy (and, for passages, a corpus) the recorded id_hash is recomputed.
  if (!taxonomy_path.empty()) {
    const c2f::Taxonomy taxonomy = c2f::load_taxonomy(taxonomy_path);
    std::vector<std::string> keys;
    if (!corpus_path.empty()) {
      for (const c2f::Passage& p : c2f::load_corpus(corpus_path, taxonomy).passages) keys.push_back(std::to_string(p.id));
    } else {
      for (const c2f::FineLabel& f : taxonomy.fine_labels()) keys.push_back(f.surface_name);
      if (m.n_rows == taxonomy.fine_count() + taxonomy.coarse_count()) {
        for (const c2f::CoarseLabel& c : taxonomy.coarse_labels()) keys.push_back(c.surface_name);
      }
    }
    const std::string expected = c2f::id_hash(keys);
    j["expected_id_hash"] = expected;
    j["expected_rows"] = keys.size();
    const auto recorded = manifest ? manifest->get("id_hash") : std::nullopt;
    const bool ok = keys.size() == m.n_rows && recorded && *recorded == expected;
    j["id_hash_match"] = ok;
    std::cout << j.dump(2) << '\n';
    return ok ? 0 : 1;
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coarse-to-fine label refinement"};
  app.require_subcommand(1);
  std::string simd_backend;
  app.add_option("--simd", simd_backend, "Kernel backend: scalar | avx2 | neon | auto (also $C2F_SIMD)");

  RunOptions run_opts;
  CLI::App* run = app.add_subcommand("run", "Train and predict one configuration");
  run_opts.attach(*run);

  RunOptions ablate_opts;
  std::vector<std::string> variant_names;
  CLI::App* ablate = app.add_subcommand("ablate", "Run the base configuration and ablation variants");
  ablate_opts.attach(*ablate);
  ablate->add_option("--variants", variant_names,
                     "Any of fine, bootstrap, gloss, select, similarity, manhattan, euclidean")
      ->delimiter(',');

  c2f::SyntheticSpec spec;
  std::string synth_out;
  CLI::App* gen = app.add_subcommand("gen-synthetic", "Write a synthetic corpus, taxonomy and embeddings");
  gen->add_option("--out", synth_out, "Output directory")->required();
  gen->add_option("--coarse", spec.coarse, "Coarse labels")->capture_default_str();
  gen->add_option("--fine-per-coarse", spec.fine_per_coarse, "Fine labels per coarse label")->capture_default_str();
  gen->add_option("--passages-per-fine", spec.passages_per_fine, "Passages per fine label")->capture_default_str();
  gen->add_option("--dim", spec.dim, "Embedding dimension")->capture_default_str();
  gen->add_option("--separation", spec.separation, "Sibling centroid distance in cluster radii")->capture_default_str();
  gen->add_option("--coarse-separation", spec.coarse_separation, "Coarse centroid distance, multiple of separation")
      ->capture_default_str();
  gen->add_option("--shared-component", spec.shared_component, "Length of the component common to all embeddings")
      ->capture_default_str();
  gen->add_option("--skew", spec.skew, "Fraction of passages in the first coarse label (0 = balanced)")
      ->capture_default_str();
  gen->add_option("--sibling-spread", spec.sibling_spread, "Extra spread toward sibling centroids")
      ->capture_default_str();
  gen->add_option("--seed-fraction", spec.seed_fraction, "Fraction of passages naming their label")
      ->capture_default_str();
  gen->add_option("--seed-bias", spec.seed_bias, "Shift of seed passages toward their gloss prototype")
      ->capture_default_str();
  gen->add_option("--ambiguous-fraction", spec.ambiguous_fraction, "Fraction naming two sibling labels")
      ->capture_default_str();
  gen->add_option("--prototype-offset", spec.prototype_offset, "Gloss prototype offset from its centroid")
      ->capture_default_str();
  gen->add_option("--prototype-offset-no-gloss", spec.prototype_offset_no_gloss,
                  "Surface-name prototype offset from its centroid")
      ->capture_default_str();
  gen->add_option("--prototype-confusion", spec.prototype_confusion,
                  "Share of the prototype offset pointing toward sibling centroids")
      ->capture_default_str();
  gen->add_flag("--hub", spec.hub, "Place one fine prototype near the global passage mean");
  gen->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();

  std::string eval_taxonomy, eval_corpus, eval_predictions;
  CLI::App* eval = app.add_subcommand("evaluate", "Score a predictions file against gold labels");
  eval->add_option("--taxonomy", eval_taxonomy, "Taxonomy TSV")->required();
  eval->add_option("--corpus", eval_corpus, "Corpus TSV with gold labels")->required();
  eval->add_option("--predictions", eval_predictions, "predictions.tsv from a run")->required();

  std::string inspect_file, inspect_taxonomy, inspect_corpus;
  CLI::App* inspect = app.add_subcommand("inspect-embeddings", "Summarize a C2FE file and its manifest");
  inspect->add_option("file", inspect_file, "C2FE file")->required();
  inspect->add_option("--taxonomy", inspect_taxonomy, "Recompute the prototype id_hash from this taxonomy");
  inspect->add_option("--corpus", inspect_corpus, "Recompute the passage id_hash from this corpus (needs --taxonomy)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (!simd_backend.empty() && simd_backend != "auto") c2f::simd::set_backend(c2f::simd::parse_backend(simd_backend));

    if (*run) {
      const c2f::RunConfig config = run_opts.resolve("run");
      print_summary(config, c2f::run_pipeline(config));
    } else if (*ablate) {
      const c2f::RunConfig config = ablate_opts.resolve("ablate");
      std::vector<c2f::Variant> variants;
      for (const std::string& name : variant_names) variants.push_back(c2f::parse_variant(name));
      c2f::write_ablation_table(std::cout, c2f::run_ablation(config, variants));
    } else if (*gen) {
      const c2f::SyntheticPaths paths = c2f::write_synthetic(c2f::generate_synthetic(spec), synth_out);
      json j{{"taxonomy", paths.taxonomy.string()},
             {"corpus", paths.corpus.string()},
             {"passages", paths.passages.string()},
             {"prototypes", paths.prototypes.string()},
             {"prototypes_no_gloss", paths.prototypes_no_gloss.string()}};
      std::cout << j.dump(2) << '\n';
    } else if (*eval) {
      const c2f::Taxonomy taxonomy = c2f::load_taxonomy(eval_taxonomy);
      const c2f::LoadedCorpus corpus = c2f::load_corpus(eval_corpus, taxonomy);
      const auto predictions = c2f::read_predictions(eval_predictions, corpus.passages, taxonomy);
      c2f::write_report(std::cout, c2f::evaluate(predictions, corpus.gold, taxonomy), taxonomy);
    } else if (*inspect) {
      if (!inspect_corpus.empty() && inspect_taxonomy.empty()) {
        throw c2f::Error("cli", "--corpus needs --taxonomy to parse the corpus");
      }
      return cmd_inspect(inspect_file, inspect_taxonomy, inspect_corpus);
    }
  } catch (const c2f::Error& e) {
    std::cerr << json{{"error", {{"module", e.module()}, {"message", e.what()}}}}.dump() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"module", "cli"}, {"message", e.what()}}}}.dump() << '\n';
    return 2;
  }
  return 0;
}
