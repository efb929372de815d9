#pragma once

// Reproducible pipeline runs: gold -> fit -> score -> evaluate, all
// reading and writing under one output directory.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "funfoc/corpus.hpp"
#include "funfoc/error.hpp"
#include "funfoc/eval_stats.hpp"
#include "funfoc/forwards_range.hpp"
#include "funfoc/io.hpp"
#include "funfoc/lexical_features.hpp"
#include "funfoc/phrase_miner.hpp"
#include "funfoc/synth.hpp"
#include "funfoc/textprep.hpp"

namespace funfoc {

namespace fs = std::filesystem;

struct RunConfig {
  // inputs; empty transcripts/judgments mean <out_dir>/transcripts.jsonl
  // and <out_dir>/judgments.csv
  fs::path transcripts;
  fs::path judgments;
  std::optional<fs::path> noun_lexicon;
  std::optional<fs::path> number_lexicon;
  std::optional<fs::path> feature_lexicon;
  std::vector<fs::path> predictions;
  fs::path out_dir = "out";

  PhraseModel::Count phrase_min_count = 500;
  double phrase_threshold = 1.0;
  std::size_t min_term_freq = 25;
  std::optional<std::size_t> svd_dim;
  Variant variant = Variant::unfiltered;
  std::uint64_t seed = 0;
  bool exact_p = false;
  SynthOptions synth;

  fs::path transcripts_path() const {
    return transcripts.empty() ? out_dir / "transcripts.jsonl" : transcripts;
  }
  fs::path judgments_path() const {
    return judgments.empty() ? out_dir / "judgments.csv" : judgments;
  }
  fs::path models_dir() const { return out_dir / "models"; }
  fs::path gold_path(Variant v) const {
    return out_dir / (v == Variant::unfiltered ? "gold_unfiltered.csv" : "gold_filtered.csv");
  }
  fs::path scores_path() const { return out_dir / "scores.csv"; }

  /// Relative paths inside the document resolve against base_dir.
  static RunConfig from_json(const nlohmann::json& j, const fs::path& base_dir,
                             const std::string& source = "<config>") {
    if (!j.is_object()) throw InputError(source + ": config must be a JSON object");
    RunConfig c;
    auto fail = [&](const std::string& key, const std::string& why) {
      throw InputError(source + ": " + key + ": " + why);
    };
    auto path_of = [&](const nlohmann::json& v, const std::string& key) {
      if (!v.is_string()) fail(key, "expected a path string");
      fs::path p = v.get<std::string>();
      return p.is_absolute() ? p : base_dir / p;
    };
    auto uint_of = [&](const nlohmann::json& v, const std::string& key) -> std::uint64_t {
      if (!v.is_number_integer() || v.get<long long>() < 0) fail(key, "expected a non-negative integer");
      return v.get<std::uint64_t>();
    };
    auto num_of = [&](const nlohmann::json& v, const std::string& key) {
      if (!v.is_number()) fail(key, "expected a number");
      return v.get<double>();
    };
    for (const auto& [key, v] : j.items()) {
      if (key == "transcripts") c.transcripts = path_of(v, key);
      else if (key == "judgments") c.judgments = path_of(v, key);
      else if (key == "noun_lexicon") c.noun_lexicon = path_of(v, key);
      else if (key == "number_lexicon") c.number_lexicon = path_of(v, key);
      else if (key == "feature_lexicon") c.feature_lexicon = path_of(v, key);
      else if (key == "out_dir") c.out_dir = path_of(v, key);
      else if (key == "predictions") {
        if (!v.is_array()) fail(key, "expected an array of paths");
        for (const auto& p : v) c.predictions.push_back(path_of(p, key));
      } else if (key == "seed") c.seed = uint_of(v, key);
      else if (key == "exact_p") {
        if (!v.is_boolean()) fail(key, "expected true or false");
        c.exact_p = v.get<bool>();
      } else if (key == "variant") {
        auto parsed = v.is_string() ? parse_variant(v.get<std::string>()) : std::nullopt;
        if (!parsed) fail(key, "expected unfiltered or filtered");
        c.variant = *parsed;
      } else if (key == "phrase") {
        if (!v.is_object()) fail(key, "expected an object");
        for (const auto& [k, x] : v.items()) {
          if (k == "min_count") c.phrase_min_count = static_cast<PhraseModel::Count>(uint_of(x, "phrase.min_count"));
          else if (k == "threshold") c.phrase_threshold = num_of(x, "phrase.threshold");
          else fail("phrase." + k, "unknown key");
        }
      } else if (key == "range") {
        if (!v.is_object()) fail(key, "expected an object");
        for (const auto& [k, x] : v.items()) {
          if (k == "min_term_freq") c.min_term_freq = uint_of(x, "range.min_term_freq");
          else if (k == "svd_dim") {
            if (!x.is_null()) c.svd_dim = uint_of(x, "range.svd_dim");
          } else fail("range." + k, "unknown key");
        }
      } else if (key == "synth") {
        if (!v.is_object()) fail(key, "expected an object");
        auto& s = c.synth;
        for (const auto& [k, x] : v.items()) {
          const std::string name = "synth." + k;
          if (k == "n_exchanges") s.n_exchanges = uint_of(x, name);
          else if (k == "exchanges_per_transcript") s.exchanges_per_transcript = uint_of(x, name);
          else if (k == "transcripts_per_teacher") s.transcripts_per_teacher = uint_of(x, name);
          else if (k == "focus_templates") s.focus_templates = uint_of(x, name);
          else if (k == "n_raters") s.n_raters = uint_of(x, name);
          else if (k == "raters_per_exchange") s.raters_per_exchange = uint_of(x, name);
          else if (k == "not_applicable_rate") s.not_applicable_rate = num_of(x, name);
          else if (k == "label_noise") s.label_noise = num_of(x, name);
          else fail(name, "unknown key");
        }
      } else {
        fail(key, "unknown key");
      }
    }
    c.validate_params();
    return c;
  }

  static RunConfig load(const fs::path& path) {
    std::string text = io::read_file(path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(path.string() + ": malformed JSON: " + e.what());
    }
    return from_json(j, path.parent_path(), path.string());
  }

  void validate_params() const {
    if (phrase_min_count < 1) throw InputError("phrase.min_count must be >= 1");
    if (!(phrase_threshold > 0.0) || !std::isfinite(phrase_threshold))
      throw InputError("phrase.threshold must be > 0");
    if (min_term_freq < 1) throw InputError("range.min_term_freq must be >= 1");
    if (svd_dim && *svd_dim < 1) throw InputError("range.svd_dim must be >= 1");
    if (!(synth.not_applicable_rate >= 0.0 && synth.not_applicable_rate < 1.0))
      throw InputError("synth.not_applicable_rate must lie in [0, 1)");
    if (!(synth.label_noise >= 0.0 && synth.label_noise <= 1.0))
      throw InputError("synth.label_noise must lie in [0, 1]");
  }

  static void require(const fs::path& p, const char* what) {
    if (!fs::exists(p)) throw InputError(std::string(what) + " not found: " + p.string());
  }

  void require_lexicons() const {
    if (noun_lexicon) require(*noun_lexicon, "noun lexicon");
    if (number_lexicon) require(*number_lexicon, "number lexicon");
    if (feature_lexicon) require(*feature_lexicon, "feature lexicon");
  }

  Tagger tagger() const { return Tagger::from_files(noun_lexicon, number_lexicon); }
  Lexicon lexicon() const { return feature_lexicon ? Lexicon::load(*feature_lexicon) : Lexicon::defaults(); }
};

// ---------------------------------------------------------------------------
// synth

struct SynthSummary {
  std::size_t transcripts = 0;
  std::size_t exchanges = 0;
  std::size_t judgments = 0;
};

inline SynthSummary run_synth(const RunConfig& cfg) {
  SynthOptions opt = cfg.synth;
  opt.seed = cfg.seed;
  auto s = generate_synthetic(opt);
  fs::create_directories(cfg.out_dir);
  io::write_file_atomic(cfg.out_dir / "transcripts.jsonl", s.transcripts_jsonl());
  io::write_file_atomic(cfg.out_dir / "judgments.csv", s.judgments_csv());
  io::write_file_atomic(cfg.out_dir / "truth.csv", s.truth_csv());
  return {s.corpus.size(), s.truth.size(), s.judgments.size()};
}

// ---------------------------------------------------------------------------
// gold

struct GoldSummary {
  std::size_t judgments = 0;
  std::size_t raters = 0;
  std::size_t unfiltered = 0;
  std::size_t filtered = 0;

  std::string to_json() const {
    nlohmann::ordered_json j = {{"judgments", judgments},
                                {"raters", raters},
                                {"UNFILTERED", unfiltered},
                                {"FILTERED", filtered}};
    return j.dump(2) + "\n";
  }
};

inline GoldSummary run_gold(const RunConfig& cfg) {
  RunConfig::require(cfg.judgments_path(), "judgments");
  auto judgments = load_judgments(cfg.judgments_path());
  if (!cfg.transcripts.empty() || fs::exists(cfg.transcripts_path())) {
    RunConfig::require(cfg.transcripts_path(), "transcripts");
    auto corpus = load_transcripts(cfg.transcripts_path());
    std::set<std::string> known;
    for (const auto& e : extract_exchanges(corpus)) known.insert(e.exchange_id);
    for (const auto& j : judgments)
      if (!known.contains(j.exchange_id))
        throw InputError(cfg.judgments_path().string() + ": judgment for unknown exchange " +
                         j.exchange_id);
  }
  GoldSummary sum;
  sum.judgments = judgments.size();
  std::set<std::string> raters;
  for (const auto& j : judgments) raters.insert(j.rater_id);
  sum.raters = raters.size();
  auto un = aggregate_gold(judgments, Variant::unfiltered);
  auto fi = aggregate_gold(judgments, Variant::filtered);
  sum.unfiltered = un.size();
  sum.filtered = fi.size();
  fs::create_directories(cfg.out_dir);
  io::write_file_atomic(cfg.gold_path(Variant::unfiltered), gold_csv(un));
  io::write_file_atomic(cfg.gold_path(Variant::filtered), gold_csv(fi));
  io::write_file_atomic(cfg.out_dir / "gold_summary.json", sum.to_json());
  return sum;
}

// ---------------------------------------------------------------------------
// fit

struct FitSummary {
  std::size_t reply_pairs = 0;
  std::size_t phrase_types = 0;
  std::size_t accepted_phrases = 0;
  std::size_t reply_terms = 0;
  std::size_t range_terms = 0;
  double fallback = 0.0;
};

namespace pipeline_detail {

inline nlohmann::ordered_json input_digests(const RunConfig& cfg) {
  nlohmann::ordered_json d;
  d["transcripts"] = io::sha256_file(cfg.transcripts_path());
  d["noun_lexicon"] = cfg.noun_lexicon ? io::sha256_file(*cfg.noun_lexicon) : "default";
  d["number_lexicon"] = cfg.number_lexicon ? io::sha256_file(*cfg.number_lexicon) : "default";
  return d;
}

inline std::string read_manifest_text(const RunConfig& cfg) {
  auto p = cfg.models_dir() / "manifest.json";
  RunConfig::require(p, "fit manifest");
  return io::read_file(p);
}

template <typename Model>
Model load_model(const fs::path& p) {
  RunConfig::require(p, "model file");
  std::ifstream in(p);
  if (!in) throw InputError("cannot open " + p.string());
  return Model::from_csv(in, p.string());
}

}  // namespace pipeline_detail

inline FitSummary run_fit(const RunConfig& cfg) {
  cfg.validate_params();
  RunConfig::require(cfg.transcripts_path(), "transcripts");
  cfg.require_lexicons();
  auto corpus = load_transcripts(cfg.transcripts_path());
  if (corpus.empty()) throw InputError(cfg.transcripts_path().string() + ": empty corpus");
  const auto tagger = cfg.tagger();

  std::vector<TokenSeq> teacher_raw;
  for (const auto& t : corpus.transcripts())
    for (const auto& u : t.turns)
      if (u.role == SpeakerRole::teacher) teacher_raw.push_back(preprocess_teacher(u.text, tagger));
  if (teacher_raw.empty()) throw InputError(cfg.transcripts_path().string() + ": no teacher utterances");
  auto phrases = PhraseModel::fit(teacher_raw, cfg.phrase_min_count, cfg.phrase_threshold);

  auto pairs = extract_reply_pairs(corpus);
  if (pairs.empty())
    throw InputError(cfg.transcripts_path().string() + ": no teacher turn is followed by a student reply");
  std::vector<TokenSeq> replies;
  replies.reserve(pairs.size());
  for (const auto& p : pairs) replies.push_back(preprocess_reply(p.reply_text, tagger));
  auto tfidf = TfIdfModel::fit(replies);

  std::vector<ReplyVector> vectors;
  vectors.reserve(replies.size());
  for (const auto& r : replies) vectors.push_back(tfidf.vectorize(r));
  if (cfg.svd_dim) {
    auto proj = LatentProjection::fit(vectors, tfidf.size(), *cfg.svd_dim, cfg.seed);
    for (auto& v : vectors) v = proj.project(v);
  }

  std::vector<RangeObservation> obs;
  obs.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i)
    obs.push_back({preprocess_teacher(pairs[i].teacher_text, tagger, &phrases), std::move(vectors[i])});
  auto ranges = ForwardsRangeModel::fit(obs, cfg.min_term_freq);

  const auto dir = cfg.models_dir();
  fs::create_directories(dir);
  const std::string phrases_csv = phrases.to_csv();
  const std::string tfidf_csv = tfidf.to_csv();
  const std::string ranges_csv = ranges.to_csv();
  io::write_file_atomic(dir / "phrases.csv", phrases_csv);
  io::write_file_atomic(dir / "tfidf.csv", tfidf_csv);
  io::write_file_atomic(dir / "ranges.csv", ranges_csv);

  nlohmann::ordered_json manifest;
  manifest["schema"] = "fit-manifest/1";
  manifest["params"] = {{"phrase_min_count", cfg.phrase_min_count},
                        {"phrase_threshold", cfg.phrase_threshold},
                        {"min_term_freq", cfg.min_term_freq},
                        {"svd_dim", cfg.svd_dim ? nlohmann::ordered_json(*cfg.svd_dim) : nlohmann::ordered_json(nullptr)},
                        {"seed", cfg.seed}};
  manifest["inputs"] = pipeline_detail::input_digests(cfg);
  manifest["outputs"] = {{"phrases.csv", io::sha256_hex(phrases_csv)},
                         {"tfidf.csv", io::sha256_hex(tfidf_csv)},
                         {"ranges.csv", io::sha256_hex(ranges_csv)}};
  io::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");

  FitSummary s;
  s.reply_pairs = pairs.size();
  s.phrase_types = phrases.bigram_types();
  for (const auto& e : phrases.entries()) s.accepted_phrases += e.accepted;
  s.reply_terms = tfidf.size();
  s.range_terms = ranges.terms().size();
  s.fallback = ranges.fallback();
  return s;
}

// ---------------------------------------------------------------------------
// score

struct ScoreTable {
  std::vector<std::string> columns;  // measure columns in file order
  std::vector<std::string> exchange_ids;
  std::vector<std::string> transcript_ids;
  std::vector<bool> covered;
  std::vector<std::vector<double>> values;  // per row, aligned with columns

  std::string to_csv() const {
    std::string out = "exchange_id,transcript_id,forwards_range,covered";
    for (std::size_t k = 1; k < columns.size(); ++k) out += "," + io::csv_field(columns[k]);
    out += "\n";
    for (std::size_t i = 0; i < exchange_ids.size(); ++i) {
      out += io::csv_field(exchange_ids[i]) + "," + io::csv_field(transcript_ids[i]) + "," +
             io::format_double(values[i][0]) + "," + (covered[i] ? "true" : "false");
      for (std::size_t k = 1; k < columns.size(); ++k) out += "," + io::format_double(values[i][k]);
      out += "\n";
    }
    return out;
  }

  static ScoreTable from_csv(std::istream& in, const std::string& source = "<scores>") {
    ScoreTable t;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
      ++lineno;
      io::strip_cr(line);
      if (line.empty()) continue;
      auto f = io::split_csv(line);
      if (!header) {
        if (f.size() < 4 || f[0] != "exchange_id" || f[1] != "transcript_id" ||
            f[2] != "forwards_range" || f[3] != "covered")
          throw InputError(source, lineno, "expected header exchange_id,transcript_id,forwards_range,covered,...");
        t.columns.push_back("forwards_range");
        for (std::size_t k = 4; k < f.size(); ++k) t.columns.push_back(f[k]);
        header = true;
        continue;
      }
      if (f.size() != t.columns.size() + 3) throw InputError(source, lineno, "wrong number of fields");
      if (f[3] != "true" && f[3] != "false") throw InputError(source, lineno, "covered must be true or false");
      std::vector<double> row;
      for (std::size_t k = 0; k < t.columns.size(); ++k) {
        const auto& cell = f[k == 0 ? 2 : k + 3];
        auto v = io::parse_double(cell);
        if (!v) throw InputError(source, lineno, "non-numeric value in column " + t.columns[k]);
        row.push_back(*v);
      }
      t.exchange_ids.push_back(f[0]);
      t.transcript_ids.push_back(f[1]);
      t.covered.push_back(f[3] == "true");
      t.values.push_back(std::move(row));
    }
    if (!header) throw InputError(source + ": missing header");
    return t;
  }

  std::vector<ScoreSeries> series() const {
    std::vector<ScoreSeries> out;
    for (std::size_t k = 0; k < columns.size(); ++k) {
      ScoreSeries s{columns[k], {}};
      for (std::size_t i = 0; i < exchange_ids.size(); ++i) s.values[exchange_ids[i]] = values[i][k];
      out.push_back(std::move(s));
    }
    return out;
  }
};

inline ScoreTable run_score(const RunConfig& cfg) {
  RunConfig::require(cfg.transcripts_path(), "transcripts");
  cfg.require_lexicons();
  auto manifest = nlohmann::json::parse(pipeline_detail::read_manifest_text(cfg));
  auto now = pipeline_detail::input_digests(cfg);
  for (const auto& [key, digest] : now.items()) {
    if (!manifest.contains("inputs") || manifest["inputs"].value(key, std::string()) != digest.get<std::string>())
      throw InputError("digest mismatch for " + key + ": models in " + cfg.models_dir().string() +
                       " were fitted on different inputs; rerun fit");
  }
  for (const char* name : {"phrases.csv", "tfidf.csv", "ranges.csv"}) {
    auto p = cfg.models_dir() / name;
    RunConfig::require(p, "model file");
    if (manifest["outputs"].value(name, std::string()) != io::sha256_file(p))
      throw InputError("digest mismatch for " + p.string() + ": model file changed since fit");
  }
  auto phrases = pipeline_detail::load_model<PhraseModel>(cfg.models_dir() / "phrases.csv");
  auto ranges = pipeline_detail::load_model<ForwardsRangeModel>(cfg.models_dir() / "ranges.csv");
  auto corpus = load_transcripts(cfg.transcripts_path());
  const auto tagger = cfg.tagger();
  const auto lex = cfg.lexicon();
  const auto feature_cols = feature_columns(lex);

  ScoreTable t;
  t.columns.push_back("forwards_range");
  t.columns.push_back("length");
  for (const auto& c : feature_cols) t.columns.push_back(c);
  for (const auto& e : extract_exchanges(corpus)) {
    auto sc = ranges.score(preprocess_teacher(e.teacher_utt.text, tagger, &phrases));
    auto fv = featurize(e.exchange_id, e.teacher_utt.text, lex);
    std::vector<double> row = {sc.value, static_cast<double>(fv.length)};
    for (const auto& c : feature_cols) row.push_back(static_cast<double>(fv.at(c)));
    t.exchange_ids.push_back(e.exchange_id);
    t.transcript_ids.push_back(e.transcript_id);
    t.covered.push_back(sc.covered);
    t.values.push_back(std::move(row));
  }
  fs::create_directories(cfg.out_dir);
  io::write_file_atomic(cfg.scores_path(), t.to_csv());
  return t;
}

// ---------------------------------------------------------------------------
// evaluate

inline std::string gold_name(Variant v) {
  return v == Variant::unfiltered ? "gold_unfiltered" : "gold_filtered";
}

inline EvaluationReport run_evaluate(const RunConfig& cfg) {
  RunConfig::require(cfg.gold_path(cfg.variant), "gold file");
  RunConfig::require(cfg.scores_path(), "scores file");
  for (const auto& p : cfg.predictions) RunConfig::require(p, "predictions file");

  EvaluationInputs in;
  in.gold.name = gold_name(cfg.variant);
  in.spearman_opts.exact_p = cfg.exact_p;
  for (const auto& g : load_gold(cfg.gold_path(cfg.variant))) in.gold.values[g.exchange_id] = g.score;

  std::ifstream sin(cfg.scores_path());
  if (!sin) throw InputError("cannot open " + cfg.scores_path().string());
  auto table = ScoreTable::from_csv(sin, cfg.scores_path().string());
  in.measures = table.series();
  for (const auto& p : cfg.predictions) {
    auto s = load_predictions(p);
    for (const auto& m : in.measures)
      if (m.name == s.name) throw InputError(p.string() + ": model name " + s.name + " clashes with a measure");
    in.measures.push_back(std::move(s));
  }

  std::optional<Corpus> corpus;
  if (fs::exists(cfg.transcripts_path())) {
    corpus = load_transcripts(cfg.transcripts_path());
    in.corpus = &*corpus;
  }
  std::vector<std::string> agreement_warnings;
  if (fs::exists(cfg.judgments_path())) {
    auto judgments = load_judgments(cfg.judgments_path());
    if (!judgments.empty()) {
      try {
        in.irr = leave_out_irr(zscores_by_rater(judgments, cfg.variant));
      } catch (const StatsError& e) {
        agreement_warnings.push_back(std::string("interrater: ") + e.what());
      }
      try {
        in.kappa = fleiss_kappa(judgments, cfg.variant);
      } catch (const StatsError& e) {
        agreement_warnings.push_back(std::string("interrater: ") + e.what());
      }
    }
  }

  auto rep = evaluate(in);
  rep.warnings.insert(rep.warnings.end(), agreement_warnings.begin(), agreement_warnings.end());
  fs::create_directories(cfg.out_dir);
  io::write_file_atomic(cfg.out_dir / "report.csv", rep.to_csv());
  std::string text = rep.to_text();
  if (!rep.warnings.empty()) {
    text += "\nwarnings:\n";
    for (const auto& w : rep.warnings) text += "  " + w + "\n";
  }
  io::write_file_atomic(cfg.out_dir / "report.txt", text);
  return rep;
}

inline EvaluationReport load_report(const RunConfig& cfg) {
  auto p = cfg.out_dir / "report.csv";
  RunConfig::require(p, "report");
  std::ifstream in(p);
  return EvaluationReport::from_csv(in, p.string());
}

}  // namespace funfoc
