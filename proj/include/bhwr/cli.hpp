#pragma once

#include <CLI11.hpp>

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bhwr/evaluation.hpp"
#include "bhwr/io.hpp"
#include "bhwr/model.hpp"
#include "bhwr/pairs.hpp"
#include "bhwr/predictive.hpp"
#include "bhwr/sgns.hpp"
#include "bhwr/taxonomy.hpp"
#include "bhwr/vb.hpp"
#include "bhwr/vocabulary.hpp"

namespace bhwr::cli {

namespace detail {

// Either of the two trained-model kinds, behind one scoring interface so
// eval/score/nn work on whichever file they are given.
struct AnyModel {
  std::optional<LoadedModel> posterior;
  std::optional<LoadedSgModel> point;

  const Vocabulary& vocab() const {
    return posterior ? posterior->vocab : point->vocab;
  }
  double similarity(std::uint32_t i, std::uint32_t j) const {
    return posterior ? pair_similarity(posterior->state, i, j)
                     : sg_similarity(point->emb, i, j);
  }
};

inline AnyModel load_any_model(const std::string& path) {
  AnyModel m;
  switch (detect_model_file(path)) {
    case ModelFileKind::posterior:
      m.posterior = load_model(path);
      return m;
    case ModelFileKind::point:
      m.point = load_sg_model(path);
      return m;
    case ModelFileKind::pair_cache:
      throw std::runtime_error(path + ": this is a pair cache, not a model");
    default:
      throw std::runtime_error(path + ": not a recognized model file");
  }
}

inline std::uint32_t require_word(const CaseFoldedLookup& lookup,
                                  const std::string& word) {
  const auto idx = lookup.find(word);
  if (!idx) throw std::runtime_error("word not in vocabulary: " + word);
  return *idx;
}

inline int env_thread_cap() {
  const char* raw = std::getenv("BHWR_THREADS");
  if (raw == nullptr) return 1;
  try {
    const int n = std::stoi(raw);
    return n >= 1 ? n : 1;
  } catch (const std::exception&) {
    return 1;
  }
}

struct BuildPairsArgs {
  std::string corpus;
  std::string out;
  SamplerConfig config;
};

inline void run_build_pairs(const BuildPairsArgs& args) {
  const std::vector<std::string> tokens = read_corpus_tokens(args.corpus);
  const Vocabulary vocab = build_vocabulary(tokens, args.config.min_count);
  const PairDataset dataset = build_pair_dataset(tokens, vocab, args.config);
  save_pair_cache(dataset, vocab, args.out);
  std::cout << "vocabulary: " << vocab.size() << " words, "
            << vocab.kept_tokens() << " kept tokens\n"
            << "pairs: " << dataset.records.size() << " records, "
            << dataset.total_pos << " positives, " << dataset.total_neg
            << " negatives, " << dataset.oov_skipped << " tokens skipped\n"
            << "wrote " << args.out << '\n';
}

struct TrainArgs {
  std::string pairs;
  std::string taxonomy;  // empty = no taxonomy (zero-mean priors)
  std::string out;
  TrainConfig config;
  Hyperparams hyper;
  std::string oov_policy = "extend";
};

inline void run_train(const TrainArgs& args) {
  auto [dataset, vocab] = load_pair_cache(args.pairs);
  Taxonomy taxonomy;
  if (!args.taxonomy.empty()) {
    const OovPolicy policy = args.oov_policy == "drop" ? OovPolicy::drop_edge
                                                       : OovPolicy::extend_vocab;
    std::uint64_t dropped_edges = 0;
    taxonomy = load_taxonomy(read_taxonomy_edges(args.taxonomy), vocab, policy,
                             &dropped_edges);
    std::cout << "taxonomy: " << taxonomy.edge_count() << " edges";
    if (dropped_edges > 0) {
      std::cout << " (" << dropped_edges << " dropped, out-of-vocabulary)";
    }
    std::cout << '\n';
  } else {
    taxonomy = empty_taxonomy(vocab.size());
  }

  ModelState state = init_state(vocab.size(), args.config, args.hyper);
  TrainResult result = train(std::move(state), dataset, taxonomy, args.config);
  for (std::size_t s = 0; s < result.elbo_trace.size(); ++s) {
    std::cout << "sweep " << s << "  elbo " << std::setprecision(12)
              << result.elbo_trace[s] << '\n';
  }
  std::cout << "converged after " << result.state.sweeps_run << " sweeps\n";
  save_model(result.state, vocab, taxonomy, args.out);
  std::cout << "wrote " << args.out << '\n';
}

struct TrainSgArgs {
  std::string pairs;
  std::string out;
  SgnsConfig config;
};

inline void run_train_sg(const TrainSgArgs& args) {
  auto [dataset, vocab] = load_pair_cache(args.pairs);
  const PointEmbeddings emb = train_sgns(dataset, vocab, args.config);
  std::cout << "final loss " << std::setprecision(12) << sgns_loss(emb, dataset)
            << '\n';
  save_sg_model(emb, vocab, args.out);
  std::cout << "wrote " << args.out << '\n';
}

struct EvalArgs {
  std::string model;
  std::vector<std::string> datasets;
  std::optional<std::uint64_t> rare_max;
  std::string rare_mode = "any";
  std::string format = "table";
};

inline void run_eval(const EvalArgs& args) {
  const AnyModel model = load_any_model(args.model);
  const Vocabulary& vocab = model.vocab();
  const RareMode mode = args.rare_mode == "both" ? RareMode::both_members
                                                 : RareMode::any_member;

  struct PerDataset {
    std::string name;
    EvalCell all;
    EvalCell rare;
  };
  std::vector<PerDataset> results(args.datasets.size());
  const auto worker = [&](std::size_t d) {
    const SimilarityDataset dataset =
        load_similarity_dataset_auto(args.datasets[d]);
    results[d].name = dataset.name;
    const auto scorer = [&](std::uint32_t i, std::uint32_t j) {
      return model.similarity(i, j);
    };
    results[d].all = evaluate(scorer, dataset, vocab);
    if (args.rare_max) {
      results[d].rare = evaluate(scorer, dataset, vocab, args.rare_max, mode);
    }
  };

  const int cap = env_thread_cap();
  if (cap > 1 && args.datasets.size() > 1) {
    std::vector<std::thread> pool;
    const std::size_t width =
        std::min<std::size_t>(static_cast<std::size_t>(cap),
                              args.datasets.size());
    // Static round-robin assignment keeps the run deterministic.
    for (std::size_t w = 0; w < width; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t d = w; d < args.datasets.size(); d += width) worker(d);
      });
    }
    for (auto& t : pool) t.join();
  } else {
    for (std::size_t d = 0; d < args.datasets.size(); ++d) worker(d);
  }

  EvalReport report;
  for (const PerDataset& r : results) {
    report.rows.push_back({r.name, "all", r.all});
  }
  if (args.rare_max) {
    const std::string slice = "rare<=" + std::to_string(*args.rare_max);
    for (const PerDataset& r : results) {
      report.rows.push_back({r.name, slice, r.rare});
    }
  }
  std::cout << (args.format == "csv" ? render_csv(report)
                                     : render_table(report));
}

struct ScoreArgs {
  std::string model;
  std::string w1;
  std::string w2;
};

inline void run_score(const ScoreArgs& args) {
  const AnyModel model = load_any_model(args.model);
  const CaseFoldedLookup lookup(model.vocab());
  const std::uint32_t i = require_word(lookup, args.w1);
  const std::uint32_t j = require_word(lookup, args.w2);
  std::cout << std::setprecision(9) << model.similarity(i, j) << '\n';
}

struct NnArgs {
  std::string model;
  std::string word;
  std::size_t top = 10;
};

inline void run_nn(const NnArgs& args) {
  const AnyModel model = load_any_model(args.model);
  const Vocabulary& vocab = model.vocab();
  const CaseFoldedLookup lookup(vocab);
  const std::uint32_t query = require_word(lookup, args.word);

  std::vector<std::pair<std::uint32_t, double>> rows;
  if (model.posterior) {
    for (const Neighbor& n :
         nearest_neighbors(model.posterior->state, query, args.top)) {
      rows.emplace_back(n.index, n.score);
    }
  } else {
    for (const SgNeighbor& n :
         sg_nearest_neighbors(model.point->emb, query, args.top)) {
      rows.emplace_back(n.index, n.score);
    }
  }
  std::size_t width = 4;
  for (const auto& [idx, score] : rows) {
    width = std::max(width, vocab.words[idx].size());
  }
  for (const auto& [idx, score] : rows) {
    std::cout << std::left << std::setw(static_cast<int>(width) + 2)
              << vocab.words[idx] << std::right << std::fixed
              << std::setprecision(6) << score << '\n';
  }
}

struct ExportArgs {
  std::string model;
  std::string out;
  std::string which;
};

inline void run_export(const ExportArgs& args) {
  const AnyModel model = load_any_model(args.model);
  const ExportSide side = args.which == "v" ? ExportSide::v : ExportSide::u;
  if (model.posterior) {
    export_word2vec_text(model.posterior->state, model.posterior->vocab, side,
                         args.out);
  } else {
    export_word2vec_text(model.point->emb, model.point->vocab, side, args.out);
  }
  std::cout << "wrote " << args.out << '\n';
}

}  // namespace detail

// Builds the subcommand tree and runs one command. Flags override config-file
// values, which override the built-in defaults.
inline int cli_dispatch(int argc, const char* const* argv) {
  CLI::App app{
      "Gaussian word representations with taxonomy priors: pair extraction, "
      "variational training, a point-estimate skip-gram baseline, and "
      "word-similarity evaluation"};
  app.require_subcommand(1);

  detail::BuildPairsArgs bp;
  CLI::App* build_pairs = app.add_subcommand(
      "build-pairs", "Extract counted training pairs from a plain-text corpus");
  build_pairs->add_option("--corpus", bp.corpus, "Whitespace-tokenized text file")
      ->required()
      ->check(CLI::ExistingFile);
  build_pairs->add_option("--out", bp.out, "Output pair-cache path")->required();
  build_pairs->add_option("--c-max", bp.config.c_max,
                          "Maximum window radius (window drawn per center)")
      ->capture_default_str();
  build_pairs->add_option("--subsample", bp.config.subsample_t,
                          "Frequent-word subsampling threshold t (0 = off)")
      ->capture_default_str();
  build_pairs->add_option("--neg-ratio", bp.config.neg_ratio,
                          "Negatives per positive")
      ->capture_default_str();
  build_pairs->add_option("--min-count", bp.config.min_count,
                          "Drop words rarer than this")
      ->capture_default_str();
  build_pairs->add_option("--unigram-power", bp.config.unigram_power,
                          "Exponent of the negative-sampling distribution")
      ->capture_default_str();
  build_pairs->add_option("--seed", bp.config.seed, "RNG seed")
      ->capture_default_str();
  build_pairs->callback([&bp] { detail::run_build_pairs(bp); });

  detail::TrainArgs tr;
  std::string xi_mode = "exact";
  CLI::App* train_cmd = app.add_subcommand(
      "train", "Fit the Gaussian posterior by full-batch coordinate ascent");
  train_cmd->add_option("--pairs", tr.pairs, "Pair cache from build-pairs")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--taxonomy", tr.taxonomy,
                        "child<TAB>parent edge list; omit for flat priors")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tr.out, "Output model path")->required();
  train_cmd->add_option("--k", tr.config.k, "Embedding dimension")
      ->capture_default_str();
  train_cmd->add_option("--tau-u", tr.hyper.tau_u, "Context leaf precision")
      ->capture_default_str();
  train_cmd->add_option("--tau-v", tr.hyper.tau_v, "Target leaf precision")
      ->capture_default_str();
  train_cmd->add_option("--tau-hu", tr.hyper.tau_hu, "Context node precision")
      ->capture_default_str();
  train_cmd->add_option("--tau-hv", tr.hyper.tau_hv, "Target node precision")
      ->capture_default_str();
  train_cmd->add_option("--max-sweeps", tr.config.max_sweeps, "Sweep budget")
      ->capture_default_str();
  train_cmd->add_option("--tol", tr.config.rel_elbo_tol,
                        "Relative bound-change convergence threshold")
      ->capture_default_str();
  train_cmd
      ->add_option("--xi-mode", xi_mode,
                   "Linearization point: coordinate-wise 'paper' formula or "
                   "the 'exact' second moment")
      ->check(CLI::IsMember({"paper", "exact"}))
      ->capture_default_str();
  train_cmd->add_option("--seed", tr.config.seed, "RNG seed")
      ->capture_default_str();
  train_cmd
      ->add_option("--oov-policy", tr.oov_policy,
                   "Taxonomy words missing from the corpus: extend the "
                   "vocabulary or drop the edge")
      ->check(CLI::IsMember({"extend", "drop"}))
      ->capture_default_str();
  train_cmd
      ->add_option("--jacobi-threads", tr.config.jacobi_threads,
                   "0 = sequential sweeps; >=1 = snapshot-parallel updates")
      ->capture_default_str();
  train_cmd->callback([&tr, &xi_mode] {
    tr.config.xi_mode = xi_mode == "paper" ? XiMode::paper : XiMode::exact;
    detail::run_train(tr);
  });

  detail::TrainSgArgs sg;
  CLI::App* train_sg = app.add_subcommand(
      "train-sg", "Fit the point-estimate skip-gram baseline");
  train_sg->add_option("--pairs", sg.pairs, "Pair cache from build-pairs")
      ->required()
      ->check(CLI::ExistingFile);
  train_sg->add_option("--out", sg.out, "Output model path")->required();
  train_sg->add_option("--k", sg.config.k, "Embedding dimension")
      ->capture_default_str();
  train_sg->add_option("--lr", sg.config.learning_rate,
                       "Initial learning rate (decays linearly)")
      ->capture_default_str();
  train_sg->add_option("--epochs", sg.config.epochs, "Training epochs")
      ->capture_default_str();
  train_sg->add_option("--seed", sg.config.seed, "RNG seed")
      ->capture_default_str();
  train_sg->add_flag("--resample-negatives", sg.config.resample_negatives,
                     "Redraw negative samples before each epoch after the first");
  train_sg->callback([&sg] { detail::run_train_sg(sg); });

  detail::EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand(
      "eval", "Score word-similarity benchmarks and report Spearman rho x100");
  eval_cmd->add_option("--model", ev.model, "Trained model file")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd
      ->add_option("--datasets", ev.datasets,
                   "Comma-separated benchmark files (word1, word2, score)")
      ->required()
      ->delimiter(',');
  std::uint64_t rare_max = 0;
  CLI::Option* rare_opt =
      eval_cmd->add_option("--rare-max", rare_max,
                           "Also report the slice of pairs with a word of "
                           "corpus count <= this");
  eval_cmd
      ->add_option("--rare-mode", ev.rare_mode,
                   "Rare slice keeps pairs where any/both members are rare")
      ->check(CLI::IsMember({"any", "both"}))
      ->capture_default_str();
  eval_cmd
      ->add_option("--format", ev.format, "Report rendering: table or csv")
      ->check(CLI::IsMember({"table", "csv"}))
      ->capture_default_str();
  eval_cmd->callback([&ev, &rare_max, rare_opt] {
    if (rare_opt->count() > 0) ev.rare_max = rare_max;
    detail::run_eval(ev);
  });

  detail::ScoreArgs sc;
  CLI::App* score_cmd =
      app.add_subcommand("score", "Similarity of one word pair");
  score_cmd->add_option("--model", sc.model, "Trained model file")
      ->required()
      ->check(CLI::ExistingFile);
  score_cmd->add_option("--w1", sc.w1, "First word")->required();
  score_cmd->add_option("--w2", sc.w2, "Second word")->required();
  score_cmd->callback([&sc] { detail::run_score(sc); });

  detail::NnArgs nn;
  CLI::App* nn_cmd = app.add_subcommand("nn", "Nearest neighbors of a word");
  nn_cmd->add_option("--model", nn.model, "Trained model file")
      ->required()
      ->check(CLI::ExistingFile);
  nn_cmd->add_option("--word", nn.word, "Query word")->required();
  nn_cmd->add_option("--top", nn.top, "Number of neighbors")
      ->capture_default_str();
  nn_cmd->callback([&nn] { detail::run_nn(nn); });

  detail::ExportArgs ex;
  CLI::App* export_cmd = app.add_subcommand(
      "export", "Write embeddings as word2vec-style text");
  export_cmd->add_option("--model", ex.model, "Trained model file")
      ->required()
      ->check(CLI::ExistingFile);
  export_cmd->add_option("--out", ex.out, "Output text path")->required();
  export_cmd->add_option("--which", ex.which, "Context (u) or target (v) side")
      ->required()
      ->check(CLI::IsMember({"u", "v"}));
  export_cmd->callback([&ex] { detail::run_export(ex); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace bhwr::cli
