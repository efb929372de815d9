#pragma once

// Seeded synthetic classroom corpus with known question styles.
//
// Funneling teacher turns draw their words from a funneling-only pool and
// are always answered with a bare number (one reply template after
// delexicalization). Focusing turns draw from a focusing-only pool and are
// answered with one of k mutually orthogonal reply templates. Off-task
// turns use a third pool. Each exchange gets labels from a subset of
// simulated raters who report the true style with probability 1 - noise.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "funfoc/corpus.hpp"
#include "funfoc/error.hpp"
#include "funfoc/io.hpp"

namespace funfoc {

enum class Style { not_applicable, funneling, focusing };

inline std::string_view to_string(Style s) {
  switch (s) {
    case Style::not_applicable: return "not_applicable";
    case Style::funneling: return "funneling";
    case Style::focusing: return "focusing";
  }
  return "not_applicable";
}

struct SynthOptions {
  std::size_t n_exchanges = 2000;
  std::size_t exchanges_per_transcript = 20;
  std::size_t transcripts_per_teacher = 3;
  std::size_t focus_templates = 8;
  std::size_t n_raters = 6;
  std::size_t raters_per_exchange = 3;
  double not_applicable_rate = 0.2;
  double label_noise = 0.1;
  std::uint64_t seed = 1;
};

struct SynthCorpus {
  Corpus corpus;
  std::vector<RaterJudgment> judgments;
  std::map<std::string, Style> truth;  // exchange_id -> style

  std::string transcripts_jsonl() const {
    std::string out;
    for (const auto& t : corpus.transcripts()) {
      nlohmann::json meta = {{"transcript_id", t.meta.transcript_id},
                             {"teacher_id", t.meta.teacher_id}};
      meta["mqi5"] = t.meta.mqi5 ? nlohmann::json(*t.meta.mqi5) : nlohmann::json(nullptr);
      meta["participation"] =
          t.meta.participation ? nlohmann::json(*t.meta.participation) : nlohmann::json(nullptr);
      meta["explanations"] =
          t.meta.explanations ? nlohmann::json(*t.meta.explanations) : nlohmann::json(nullptr);
      meta["value_added"] =
          t.meta.value_added ? nlohmann::json(*t.meta.value_added) : nlohmann::json(nullptr);
      out += meta.dump() + "\n";
      for (const auto& u : t.turns) {
        nlohmann::json j = {{"transcript_id", u.transcript_id},
                            {"turn_index", u.turn_index},
                            {"speaker_role", std::string(to_string(u.role))},
                            {"text", u.text}};
        out += j.dump() + "\n";
      }
    }
    return out;
  }

  std::string judgments_csv() const {
    std::string out = "rater_id,exchange_id,label\n";
    for (const auto& j : judgments)
      out += io::csv_field(j.rater_id) + "," + io::csv_field(j.exchange_id) + "," +
             std::string(to_string(j.label)) + "\n";
    return out;
  }

  std::string truth_csv() const {
    std::string out = "exchange_id,style\n";
    for (const auto& [id, s] : truth) out += io::csv_field(id) + "," + std::string(to_string(s)) + "\n";
    return out;
  }
};

namespace synth_detail {

inline const std::vector<std::string>& funneling_words() {
  static const std::vector<std::string> w = {"what", "what is", "tell", "me", "finish", "compute",
                                             "write", "say", "check", "count", "add", "subtract",
                                             "equals", "then", "quickly"};
  return w;
}

inline const std::vector<std::string>& focusing_words() {
  static const std::vector<std::string> w = {"why", "how do", "you", "know", "explain", "think",
                                             "describe", "justify", "convince", "wonder", "notice",
                                             "reasoning", "agree", "realize", "disagree"};
  return w;
}

inline const std::vector<std::string>& off_task_words() {
  static const std::vector<std::string> w = {"sit", "down", "please", "quiet", "line", "up",
                                             "hands", "eyes", "here", "everybody"};
  return w;
}

inline const std::vector<std::string>& number_replies() {
  static const std::vector<std::string> w = {"Twelve.", "7", "45", "3/4", "Sixteen",
                                             "100.", "0.5", "Nine?"};
  return w;
}

inline std::vector<std::string> focus_templates(std::size_t k) {
  std::vector<std::string> t = {"I think it doubles.",         "Maybe we could split them evenly.",
                                "Because you keep adding more.", "She said hers grows faster.",
                                "My way works backwards.",     "They both look alike.",
                                "Wait, no, its bigger.",       "He just guessed randomly."};
  for (std::size_t j = t.size(); j < k; ++j)
    t.push_back("option" + std::to_string(j) + " reply" + std::to_string(j));
  t.resize(k);
  return t;
}

inline const std::vector<std::string>& off_task_replies() {
  static const std::vector<std::string> w = {"Okay.", "Yes.", "Sure thing."};
  return w;
}

inline std::string padded(std::size_t i, std::size_t width) {
  std::string s = std::to_string(i);
  if (s.size() < width) s.insert(0, width - s.size(), '0');
  return s;
}

}  // namespace synth_detail

inline SynthCorpus generate_synthetic(const SynthOptions& opt) {
  using namespace synth_detail;
  if (opt.n_exchanges == 0 || opt.exchanges_per_transcript == 0 || opt.transcripts_per_teacher == 0)
    throw InputError("synthetic corpus sizes must be positive");
  if (opt.focus_templates < 1) throw InputError("need at least one focusing reply template");
  if (opt.raters_per_exchange < 1 || opt.raters_per_exchange > opt.n_raters)
    throw InputError("raters_per_exchange must lie in [1, n_raters]");

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto pick = [&](const std::vector<std::string>& pool) -> const std::string& {
    return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
  };
  auto sentence = [&](const std::vector<std::string>& pool, std::size_t lo, std::size_t hi,
                      char end) {
    std::size_t n = std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
      if (i) s += ' ';
      s += pick(pool);
    }
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    s += end;
    return s;
  };
  const auto templates = focus_templates(opt.focus_templates);

  // Transcript lengths vary around exchanges_per_transcript; the last one
  // takes whatever is left.
  const std::size_t per = opt.exchanges_per_transcript;
  std::vector<std::size_t> sizes;
  for (std::size_t left = opt.n_exchanges; left > 0;) {
    std::size_t m = std::uniform_int_distribution<std::size_t>(per - per / 2, per + per / 2)(rng);
    m = std::max<std::size_t>(1, std::min(m, left));
    sizes.push_back(m);
    left -= m;
  }
  const std::size_t n_transcripts = sizes.size();
  const std::size_t n_teachers =
      (n_transcripts + opt.transcripts_per_teacher - 1) / opt.transcripts_per_teacher;
  const std::size_t id_width = std::to_string(n_transcripts).size() + 1;

  std::vector<double> propensity(n_teachers);
  std::vector<double> value_added(n_teachers);
  for (std::size_t t = 0; t < n_teachers; ++t) {
    propensity[t] = 0.2 + 0.6 * unit(rng);
    value_added[t] = 2.0 * (propensity[t] - 0.5) + 0.5 * gauss(rng);
  }

  SynthCorpus out;
  std::vector<Transcript> transcripts;
  for (std::size_t ti = 0; ti < n_transcripts; ++ti) {
    const std::size_t teacher = ti / opt.transcripts_per_teacher;
    const double q = propensity[teacher];
    Transcript tr;
    tr.meta.transcript_id = "T" + padded(ti + 1, id_width);
    tr.meta.teacher_id = "teacher" + padded(teacher + 1, id_width);
    auto ordinal = [&](double center, int lo, int hi) {
      return std::clamp(static_cast<int>(std::lround(center + 0.6 * gauss(rng))), lo, hi);
    };
    tr.meta.mqi5 = ordinal(1.0 + 4.0 * q, 1, 5);
    tr.meta.participation = ordinal(1.0 + 3.0 * q, 1, 4);
    if (unit(rng) > 0.2) tr.meta.explanations = ordinal(1.0 + 3.0 * q, 1, 4);
    tr.meta.value_added = std::round(value_added[teacher] * 1e6) / 1e6;

    std::int64_t turn = 0;
    auto add = [&](SpeakerRole role, std::string text) {
      tr.turns.push_back({tr.meta.transcript_id, turn++, role, std::move(text)});
    };
    add(SpeakerRole::other, "");
    add(SpeakerRole::student, pick(off_task_replies()));
    const std::size_t m = sizes[ti];
    for (std::size_t e = 0; e < m; ++e) {
      Style style;
      if (unit(rng) < opt.not_applicable_rate)
        style = Style::not_applicable;
      else
        style = unit(rng) < q ? Style::focusing : Style::funneling;
      std::string reply;
      switch (style) {
        case Style::funneling:
          add(SpeakerRole::teacher, sentence(funneling_words(), 2, 4, '?'));
          reply = pick(number_replies());
          break;
        case Style::focusing:
          add(SpeakerRole::teacher, sentence(focusing_words(), 3, 6, '?'));
          reply = pick(templates);
          break;
        case Style::not_applicable:
          add(SpeakerRole::teacher, sentence(off_task_words(), 2, 4, '.'));
          reply = pick(off_task_replies());
          break;
      }
      out.truth.emplace(make_exchange_id(tr.meta.transcript_id, turn - 1), style);
      add(SpeakerRole::student, std::move(reply));
    }
    transcripts.push_back(std::move(tr));
  }
  out.corpus = Corpus(std::move(transcripts));

  // Judgments: a rotating subset of raters per exchange.
  std::vector<std::string> raters;
  for (std::size_t r = 0; r < opt.n_raters; ++r) raters.push_back("rater" + padded(r + 1, 2));
  for (const auto& [id, style] : out.truth) {
    std::vector<std::size_t> idx(opt.n_raters);
    for (std::size_t r = 0; r < idx.size(); ++r) idx[r] = r;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(opt.raters_per_exchange);
    std::sort(idx.begin(), idx.end());
    for (auto r : idx) {
      Label label = style == Style::focusing   ? Label::focusing
                    : style == Style::funneling ? Label::funneling
                                                : Label::not_applicable;
      if (unit(rng) < opt.label_noise) {
        auto shift = std::uniform_int_distribution<int>(1, 2)(rng);
        label = static_cast<Label>((static_cast<int>(label) + shift) % 3);
      }
      out.judgments.push_back({raters[r], id, label});
    }
  }
  return out;
}

}  // namespace funfoc
