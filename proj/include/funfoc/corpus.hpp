#pragma once

// Transcript, exchange and rater-judgment data model, plus the conversion
// of categorical judgments into per-exchange gold scores.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "funfoc/error.hpp"
#include "funfoc/io.hpp"

namespace funfoc {

enum class SpeakerRole { teacher, student, other };
enum class Label { not_applicable, funneling, focusing };
enum class Variant { unfiltered, filtered };

inline std::optional<SpeakerRole> parse_role(std::string_view s) {
  if (s == "teacher") return SpeakerRole::teacher;
  if (s == "student") return SpeakerRole::student;
  if (s == "other") return SpeakerRole::other;
  return std::nullopt;
}

inline std::string_view to_string(SpeakerRole r) {
  switch (r) {
    case SpeakerRole::teacher: return "teacher";
    case SpeakerRole::student: return "student";
    case SpeakerRole::other: return "other";
  }
  return "other";
}

inline std::optional<Label> parse_label(std::string_view s) {
  if (s == "not_applicable") return Label::not_applicable;
  if (s == "funneling") return Label::funneling;
  if (s == "focusing") return Label::focusing;
  return std::nullopt;
}

inline std::string_view to_string(Label l) {
  switch (l) {
    case Label::not_applicable: return "not_applicable";
    case Label::funneling: return "funneling";
    case Label::focusing: return "focusing";
  }
  return "not_applicable";
}

/// Accepts "unfiltered"/"filtered" in any letter case.
inline std::optional<Variant> parse_variant(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "unfiltered") return Variant::unfiltered;
  if (lower == "filtered") return Variant::filtered;
  return std::nullopt;
}

inline std::string_view to_string(Variant v) {
  return v == Variant::unfiltered ? "UNFILTERED" : "FILTERED";
}

struct Utterance {
  std::string transcript_id;
  std::int64_t turn_index = 0;
  SpeakerRole role = SpeakerRole::other;
  std::string text;
};

struct TranscriptMeta {
  std::string transcript_id;
  std::string teacher_id;
  std::size_t n_exchanges = 0;
  std::optional<int> mqi5;           // 1..5
  std::optional<int> participation;  // 1..4
  std::optional<int> explanations;   // 1..4
  std::optional<double> value_added;
  std::optional<std::string> lesson_topic;
};

struct Transcript {
  TranscriptMeta meta;
  std::vector<Utterance> turns;  // ascending turn_index
};

/// Immutable collection of transcripts ordered by transcript id.
class Corpus {
 public:
  Corpus() = default;

  explicit Corpus(std::vector<Transcript> transcripts) : transcripts_(std::move(transcripts)) {
    std::sort(transcripts_.begin(), transcripts_.end(),
              [](const Transcript& a, const Transcript& b) {
                return a.meta.transcript_id < b.meta.transcript_id;
              });
    for (std::size_t i = 1; i < transcripts_.size(); ++i) {
      if (transcripts_[i].meta.transcript_id == transcripts_[i - 1].meta.transcript_id)
        throw InputError("duplicate transcript " + transcripts_[i].meta.transcript_id);
    }
    for (auto& t : transcripts_) {
      std::sort(t.turns.begin(), t.turns.end(),
                [](const Utterance& a, const Utterance& b) { return a.turn_index < b.turn_index; });
      for (std::size_t i = 1; i < t.turns.size(); ++i) {
        if (t.turns[i].turn_index == t.turns[i - 1].turn_index)
          throw InputError("duplicate turn_index " + std::to_string(t.turns[i].turn_index) +
                           " in transcript " + t.meta.transcript_id);
      }
      std::size_t pairs = 0;
      for (std::size_t i = 1; i < t.turns.size(); ++i) {
        if (t.turns[i - 1].role == SpeakerRole::student && t.turns[i].role == SpeakerRole::teacher)
          ++pairs;
      }
      t.meta.n_exchanges = pairs;
    }
  }

  const std::vector<Transcript>& transcripts() const { return transcripts_; }
  bool empty() const { return transcripts_.empty(); }
  std::size_t size() const { return transcripts_.size(); }

  const Transcript* find(std::string_view id) const {
    auto it = std::lower_bound(
        transcripts_.begin(), transcripts_.end(), id,
        [](const Transcript& t, std::string_view key) { return t.meta.transcript_id < key; });
    if (it == transcripts_.end() || it->meta.transcript_id != id) return nullptr;
    return &*it;
  }

 private:
  std::vector<Transcript> transcripts_;
};

namespace detail {

inline std::optional<int> ordinal_field(const nlohmann::json& obj, const char* key, int lo, int hi,
                                        const std::string& src, std::size_t line) {
  if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
  const auto& v = obj[key];
  if (!v.is_number_integer()) throw InputError(src, line, std::string(key) + " must be an integer");
  auto x = v.get<long long>();
  if (x < lo || x > hi)
    throw InputError(src, line,
                     std::string(key) + " out of range [" + std::to_string(lo) + "," +
                         std::to_string(hi) + "]");
  return static_cast<int>(x);
}

inline std::string string_field(const nlohmann::json& obj, const char* key, const std::string& src,
                                std::size_t line) {
  if (!obj.contains(key)) throw InputError(src, line, std::string("missing field ") + key);
  const auto& v = obj[key];
  if (!v.is_string()) throw InputError(src, line, std::string(key) + " must be a string");
  return v.get<std::string>();
}

}  // namespace detail

/// Parses the transcript JSON Lines format. Utterance records carry
/// turn_index/speaker_role/text; metadata records carry teacher_id and
/// the optional outcome fields.
inline Corpus parse_transcripts(std::istream& in, const std::string& source = "<transcripts>") {
  std::map<std::string, Transcript> by_id;
  std::set<std::string> has_meta;
  std::map<std::pair<std::string, std::int64_t>, std::size_t> seen_turns;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    io::strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(source, lineno, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) throw InputError(source, lineno, "record is not a JSON object");
    std::string tid = detail::string_field(obj, "transcript_id", source, lineno);
    Transcript& t = by_id[tid];
    t.meta.transcript_id = tid;

    if (!obj.contains("turn_index")) {
      if (!obj.contains("teacher_id"))
        throw InputError(source, lineno, "record is neither an utterance nor transcript metadata");
      if (!has_meta.insert(tid).second)
        throw InputError(source, lineno, "duplicate metadata for transcript " + tid);
      t.meta.teacher_id = detail::string_field(obj, "teacher_id", source, lineno);
      t.meta.mqi5 = detail::ordinal_field(obj, "mqi5", 1, 5, source, lineno);
      t.meta.participation = detail::ordinal_field(obj, "participation", 1, 4, source, lineno);
      t.meta.explanations = detail::ordinal_field(obj, "explanations", 1, 4, source, lineno);
      if (obj.contains("value_added") && !obj["value_added"].is_null()) {
        if (!obj["value_added"].is_number())
          throw InputError(source, lineno, "value_added must be a number");
        double va = obj["value_added"].get<double>();
        if (!std::isfinite(va)) throw InputError(source, lineno, "value_added must be finite");
        t.meta.value_added = va;
      }
      if (obj.contains("lesson_topic") && obj["lesson_topic"].is_string())
        t.meta.lesson_topic = obj["lesson_topic"].get<std::string>();
      continue;
    }

    const auto& ti = obj["turn_index"];
    if (!ti.is_number_integer() || ti.get<long long>() < 0)
      throw InputError(source, lineno, "turn_index must be a non-negative integer");
    Utterance u;
    u.transcript_id = tid;
    u.turn_index = ti.get<std::int64_t>();
    std::string role = detail::string_field(obj, "speaker_role", source, lineno);
    auto parsed = parse_role(role);
    if (!parsed) throw InputError(source, lineno, "unknown speaker_role \"" + role + "\"");
    u.role = *parsed;
    u.text = detail::string_field(obj, "text", source, lineno);
    if (u.text.empty() && u.role != SpeakerRole::other)
      throw InputError(source, lineno, "empty text for a " + role + " utterance");
    auto [it, inserted] = seen_turns.emplace(std::make_pair(tid, u.turn_index), lineno);
    if (!inserted)
      throw InputError(source, lineno,
                       "duplicate (transcript_id, turn_index) = (" + tid + ", " +
                           std::to_string(u.turn_index) + "), first seen on line " +
                           std::to_string(it->second));
    t.turns.push_back(std::move(u));
  }
  std::vector<Transcript> out;
  out.reserve(by_id.size());
  for (auto& [id, t] : by_id) out.push_back(std::move(t));
  return Corpus(std::move(out));
}

inline Corpus load_transcripts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open transcripts file " + path.string());
  return parse_transcripts(in, path.string());
}

struct Exchange {
  std::string exchange_id;
  std::string transcript_id;
  Utterance student_utt;
  Utterance teacher_utt;
  std::vector<Utterance> context;  // at most two, oldest first
  std::optional<std::string> lesson_topic;
};

inline std::string make_exchange_id(std::string_view transcript_id, std::int64_t teacher_turn) {
  return std::string(transcript_id) + ":" + std::to_string(teacher_turn);
}

/// One exchange per student turn immediately followed by a teacher turn.
inline std::vector<Exchange> extract_exchanges(const Corpus& corpus) {
  std::vector<Exchange> out;
  for (const auto& t : corpus.transcripts()) {
    const auto& turns = t.turns;
    for (std::size_t i = 1; i < turns.size(); ++i) {
      if (turns[i - 1].role != SpeakerRole::student || turns[i].role != SpeakerRole::teacher)
        continue;
      Exchange ex;
      ex.exchange_id = make_exchange_id(t.meta.transcript_id, turns[i].turn_index);
      ex.transcript_id = t.meta.transcript_id;
      ex.student_utt = turns[i - 1];
      ex.teacher_utt = turns[i];
      std::size_t s = i - 1;
      for (std::size_t k = (s >= 2 ? s - 2 : 0); k < s; ++k) ex.context.push_back(turns[k]);
      ex.lesson_topic = t.meta.lesson_topic;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

/// A teacher utterance and the student turn that directly answers it.
struct ReplyPair {
  std::string transcript_id;
  std::string teacher_text;
  std::string reply_text;
};

inline std::vector<ReplyPair> extract_reply_pairs(const Corpus& corpus) {
  std::vector<ReplyPair> out;
  for (const auto& t : corpus.transcripts()) {
    for (std::size_t i = 1; i < t.turns.size(); ++i) {
      if (t.turns[i - 1].role == SpeakerRole::teacher && t.turns[i].role == SpeakerRole::student)
        out.push_back({t.meta.transcript_id, t.turns[i - 1].text, t.turns[i].text});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Judgments and gold scores

struct RaterJudgment {
  std::string rater_id;
  std::string exchange_id;
  Label label = Label::not_applicable;
};

struct GoldLabel {
  std::string exchange_id;
  Variant variant = Variant::unfiltered;
  double score = 0.0;
  std::size_t n_raters = 0;
};

/// UNFILTERED: n/a=0, funneling=1, focusing=2.
/// FILTERED:   n/a=missing, funneling=0, focusing=1.
inline std::optional<double> map_label(Label label, Variant variant) {
  if (variant == Variant::unfiltered) {
    switch (label) {
      case Label::not_applicable: return 0.0;
      case Label::funneling: return 1.0;
      case Label::focusing: return 2.0;
    }
  }
  switch (label) {
    case Label::not_applicable: return std::nullopt;
    case Label::funneling: return 0.0;
    case Label::focusing: return 1.0;
  }
  return std::nullopt;
}

inline std::vector<RaterJudgment> parse_judgments(std::istream& in,
                                                  const std::string& source = "<judgments>") {
  std::vector<RaterJudgment> out;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    io::strip_cr(line);
    if (line.empty()) continue;
    auto fields = io::split_csv(line);
    if (!header) {
      if (fields != std::vector<std::string>{"rater_id", "exchange_id", "label"})
        throw InputError(source, lineno, "expected header rater_id,exchange_id,label");
      header = true;
      continue;
    }
    if (fields.size() != 3) throw InputError(source, lineno, "expected 3 fields");
    auto label = parse_label(fields[2]);
    if (!label) throw InputError(source, lineno, "unknown label \"" + fields[2] + "\"");
    if (fields[0].empty() || fields[1].empty())
      throw InputError(source, lineno, "empty rater_id or exchange_id");
    if (!seen.emplace(fields[0], fields[1]).second)
      throw InputError(source, lineno,
                       "duplicate judgment for rater " + fields[0] + " on " + fields[1]);
    out.push_back({fields[0], fields[1], *label});
  }
  return out;
}

inline std::vector<RaterJudgment> load_judgments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open judgments file " + path.string());
  return parse_judgments(in, path.string());
}

/// Z-scores one rater's mapped labels (sample standard deviation).
/// Missing values are dropped; fewer than two values or zero spread
/// gives z = 0 for every present value.
inline std::map<std::string, double> zscore_rater(std::span<const RaterJudgment> judgments,
                                                  Variant variant) {
  std::vector<std::pair<std::string, double>> values;
  for (const auto& j : judgments) {
    if (auto v = map_label(j.label, variant)) values.emplace_back(j.exchange_id, *v);
  }
  // Fixed summation order keeps the result independent of input order.
  std::sort(values.begin(), values.end());
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i].first == values[i - 1].first)
      throw InputError("duplicate judgment on " + values[i].first);
  }
  std::map<std::string, double> out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (const auto& [id, v] : values) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (const auto& [id, v] : values) ss += (v - mean) * (v - mean);
  const double sd = values.size() >= 2 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  for (const auto& [id, v] : values) out.emplace(id, sd > 0.0 ? (v - mean) / sd : 0.0);
  return out;
}

/// rater_id -> (exchange_id -> z).
inline std::map<std::string, std::map<std::string, double>> zscores_by_rater(
    std::span<const RaterJudgment> judgments, Variant variant) {
  std::map<std::string, std::vector<RaterJudgment>> grouped;
  for (const auto& j : judgments) grouped[j.rater_id].push_back(j);
  std::map<std::string, std::map<std::string, double>> out;
  for (const auto& [rater, js] : grouped) {
    auto z = zscore_rater(js, variant);
    if (!z.empty()) out.emplace(rater, std::move(z));
  }
  return out;
}

/// Mean rater z-score per exchange; exchanges with no usable judgment
/// under the variant are left out. Sorted by exchange id.
inline std::vector<GoldLabel> aggregate_gold(std::span<const RaterJudgment> judgments,
                                             Variant variant) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& [rater, zs] : zscores_by_rater(judgments, variant)) {
    for (const auto& [ex, z] : zs) {
      auto& slot = acc[ex];
      slot.first += z;
      ++slot.second;
    }
  }
  std::vector<GoldLabel> out;
  out.reserve(acc.size());
  for (const auto& [ex, s] : acc) {
    double score = s.first / static_cast<double>(s.second);
    if (!std::isfinite(score)) throw InvariantError("non-finite gold score for " + ex);
    out.push_back({ex, variant, score, s.second});
  }
  return out;
}

inline std::string gold_csv(std::span<const GoldLabel> gold) {
  std::string out = "exchange_id,variant,score,n_raters\n";
  for (const auto& g : gold) {
    out += io::csv_field(g.exchange_id);
    out += ',';
    out += to_string(g.variant);
    out += ',';
    out += io::format_double(g.score);
    out += ',';
    out += std::to_string(g.n_raters);
    out += '\n';
  }
  return out;
}

inline std::vector<GoldLabel> parse_gold(std::istream& in, const std::string& source = "<gold>") {
  std::vector<GoldLabel> out;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    io::strip_cr(line);
    if (line.empty()) continue;
    auto f = io::split_csv(line);
    if (!header) {
      if (f != std::vector<std::string>{"exchange_id", "variant", "score", "n_raters"})
        throw InputError(source, lineno, "expected header exchange_id,variant,score,n_raters");
      header = true;
      continue;
    }
    if (f.size() != 4) throw InputError(source, lineno, "expected 4 fields");
    auto variant = parse_variant(f[1]);
    auto score = io::parse_double(f[2]);
    auto n = io::parse_int(f[3]);
    if (!variant || !score || !std::isfinite(*score) || !n || *n < 1)
      throw InputError(source, lineno, "malformed gold record");
    out.push_back({f[0], *variant, *score, static_cast<std::size_t>(*n)});
  }
  return out;
}

inline std::vector<GoldLabel> load_gold(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open gold file " + path.string());
  return parse_gold(in, path.string());
}

}  // namespace funfoc
