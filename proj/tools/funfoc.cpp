// funfoc: gold / fit / score / evaluate / synth / report.
// Exit codes: 0 success, 1 input or schema error, 2 internal error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "funfoc/funfoc.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string variant;
  std::string transcripts;
  std::string judgments;
  std::vector<std::string> predictions;
  std::optional<long long> min_count;
  std::optional<double> threshold;
  std::optional<std::size_t> min_term_freq;
  std::optional<std::size_t> svd_dim;
  bool exact_p = false;
  std::optional<std::size_t> n_exchanges;
};

funfoc::RunConfig resolve(const Flags& f) {
  funfoc::RunConfig cfg = f.config.empty() ? funfoc::RunConfig{} : funfoc::RunConfig::load(f.config);
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (f.seed) cfg.seed = *f.seed;
  if (!f.variant.empty()) {
    auto v = funfoc::parse_variant(f.variant);
    if (!v) throw funfoc::InputError("--variant: expected unfiltered or filtered");
    cfg.variant = *v;
  }
  if (!f.transcripts.empty()) cfg.transcripts = f.transcripts;
  if (!f.judgments.empty()) cfg.judgments = f.judgments;
  for (const auto& p : f.predictions) cfg.predictions.emplace_back(p);
  if (f.min_count) cfg.phrase_min_count = *f.min_count;
  if (f.threshold) cfg.phrase_threshold = *f.threshold;
  if (f.min_term_freq) cfg.min_term_freq = *f.min_term_freq;
  if (f.svd_dim) cfg.svd_dim = *f.svd_dim;
  if (f.exact_p) cfg.exact_p = true;
  if (f.n_exchanges) cfg.synth.n_exchanges = *f.n_exchanges;
  cfg.validate_params();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Funneling and focusing measures for classroom transcripts"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "JSON run config")->check(CLI::ExistingFile);
  app.add_option("--out", f.out, "Output directory (default: out)");
  app.add_option("--seed", f.seed, "Seed for every random draw");
  app.add_option("--variant", f.variant, "Gold variant")
      ->check(CLI::IsMember({"unfiltered", "filtered"}, CLI::ignore_case));
  app.add_option("--transcripts", f.transcripts, "Transcript JSONL (default: <out>/transcripts.jsonl)");
  app.add_option("--judgments", f.judgments, "Judgment CSV (default: <out>/judgments.csv)");
  app.add_option("--predictions", f.predictions, "predictions/1 JSONL file(s) to evaluate");
  app.add_option("--min-count", f.min_count, "Phrase discount (min_count)");
  app.add_option("--threshold", f.threshold, "Phrase acceptance threshold");
  app.add_option("--min-term-freq", f.min_term_freq, "Minimum observations per range term");
  app.add_option("--svd-dim", f.svd_dim, "Project reply vectors to this many latent dimensions");
  app.add_flag("--exact-p", f.exact_p, "Permutation p-values for n <= 10");
  app.add_option("--n-exchanges", f.n_exchanges, "Synthetic corpus size");

  auto* gold = app.add_subcommand("gold", "Aggregate judgments into gold scores");
  auto* fit = app.add_subcommand("fit", "Fit phrase, TF-IDF and forwards-range models");
  auto* score = app.add_subcommand("score", "Score every exchange");
  auto* evaluate = app.add_subcommand("evaluate", "Correlate measures with gold and outcomes");
  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic corpus");
  auto* report = app.add_subcommand("report", "Print the last evaluation report");
  for (auto* s : {gold, fit, score, evaluate, synth, report}) s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  return funfoc::run_guarded([&] {
    const auto cfg = resolve(f);
    if (synth->parsed()) {
      auto s = funfoc::run_synth(cfg);
      std::cout << "synth: " << s.transcripts << " transcripts, " << s.exchanges << " exchanges, "
                << s.judgments << " judgments -> " << cfg.out_dir.string() << "\n";
    } else if (gold->parsed()) {
      std::cout << funfoc::run_gold(cfg).to_json();
    } else if (fit->parsed()) {
      auto s = funfoc::run_fit(cfg);
      std::cout << "fit: " << s.reply_pairs << " reply pairs, " << s.accepted_phrases << "/"
                << s.phrase_types << " phrases accepted, " << s.reply_terms << " reply terms, "
                << s.range_terms << " range terms, fallback " << funfoc::io::format_fixed(s.fallback, 4)
                << "\n";
    } else if (score->parsed()) {
      auto t = funfoc::run_score(cfg);
      std::size_t covered = 0;
      for (bool c : t.covered) covered += c;
      std::cout << "score: " << t.exchange_ids.size() << " exchanges (" << covered << " covered) -> "
                << cfg.scores_path().string() << "\n";
    } else if (evaluate->parsed()) {
      auto rep = funfoc::run_evaluate(cfg);
      std::cout << rep.to_text();
      for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
    } else if (report->parsed()) {
      std::cout << funfoc::load_report(cfg).to_text();
    }
  }, std::cerr);
}
