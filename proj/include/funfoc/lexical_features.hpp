#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "funfoc/error.hpp"
#include "funfoc/io.hpp"
#include "funfoc/textprep.hpp"

namespace funfoc {

/// Word lists for the count features. Entries are lowercase and may span
/// several words ("figure out", "how many").
struct Lexicon {
  std::vector<std::string> cognitive_verbs;
  std::vector<std::string> question_unigrams;
  std::vector<std::string> question_bigrams;

  static Lexicon defaults() {
    return {
        {"understand", "think", "know", "believe", "figure out", "find out", "deduce", "remember",
         "imagine", "realize", "discover"},
        {"who", "what", "when", "where", "how", "why", "which"},
        {"how many", "how do", "what is", "what's", "what else"},
    };
  }

  /// Sections [cognitive_verbs], [question_unigrams], [question_bigrams];
  /// one entry per line, '#' comments.
  static Lexicon parse(std::istream& in, const std::string& source = "<lexicon>") {
    Lexicon lex;
    std::vector<std::string>* section = nullptr;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      auto b = line.find_first_not_of(" \t\r");
      if (b == std::string::npos) continue;
      auto e = line.find_last_not_of(" \t\r");
      line = line.substr(b, e - b + 1);
      if (line.front() == '[') {
        if (line == "[cognitive_verbs]") section = &lex.cognitive_verbs;
        else if (line == "[question_unigrams]") section = &lex.question_unigrams;
        else if (line == "[question_bigrams]") section = &lex.question_bigrams;
        else throw InputError(source, lineno, "unknown section " + line);
        continue;
      }
      if (!section) throw InputError(source, lineno, "entry outside of a section");
      std::string entry = normalize(line);
      if (std::find(section->begin(), section->end(), entry) == section->end())
        section->push_back(entry);
    }
    return lex;
  }

  static Lexicon load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open lexicon " + path.string());
    return parse(in, path.string());
  }

  /// Lowercase, with typographic apostrophes folded to '\''.
  static std::string normalize(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.compare(i, 3, "\xE2\x80\x99") == 0 || s.compare(i, 3, "\xE2\x80\x98") == 0) {
        out.push_back('\'');
        i += 2;
        continue;
      }
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s[i]))));
    }
    return out;
  }
};

namespace lexical {

/// Word sequence of a normalized text: runs of letters, digits and
/// apostrophes (edge apostrophes dropped), everything else separates.
inline std::vector<std::string> words(std::string_view normalized) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    auto b = cur.find_first_not_of('\'');
    if (b != std::string::npos) {
      auto e = cur.find_last_not_of('\'');
      out.push_back(cur.substr(b, e - b + 1));
    }
    cur.clear();
  };
  for (std::size_t i = 0; i < normalized.size();) {
    auto c = static_cast<unsigned char>(normalized[i]);
    bool word_char = c == '\'' || std::isalnum(c) || (c >= 0x80 && !text::punct_len_at(normalized, i));
    if (word_char) {
      cur.push_back(static_cast<char>(c));
      ++i;
    } else {
      flush();
      i += std::max<std::size_t>(1, text::punct_len_at(normalized, i));
    }
  }
  flush();
  return out;
}

/// Column name for an entry: spaces become '_', apostrophes vanish.
inline std::string feature_name(std::string_view entry) {
  std::string out;
  for (char c : entry) {
    if (c == ' ') out.push_back('_');
    else if (c != '\'') out.push_back(c);
  }
  return out;
}

}  // namespace lexical

/// Whitespace-token count of the raw text.
inline std::size_t utterance_length(std::string_view raw) { return tokenize(raw).size(); }

inline std::size_t count_in_words(std::span<const std::string> words,
                                  std::span<const std::string> entry) {
  if (entry.empty() || words.size() < entry.size()) return 0;
  std::size_t n = 0;
  std::size_t i = 0;
  while (i + entry.size() <= words.size()) {
    if (std::equal(entry.begin(), entry.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) {
      ++n;
      i += entry.size();
    } else {
      ++i;
    }
  }
  return n;
}

/// Non-overlapping whole-word occurrences of the entry in the text.
inline std::size_t count_entry(std::string_view text, std::string_view entry) {
  auto w = lexical::words(Lexicon::normalize(text));
  auto e = lexical::words(Lexicon::normalize(entry));
  return count_in_words(w, e);
}

inline constexpr std::string_view kCognitiveVerbs = "cognitive_verbs";

struct FeatureVector {
  std::string exchange_id;
  std::size_t length = 0;
  /// One key per question entry, "cognitive_verbs" for the summed verb
  /// count and "cognitive_verbs/<verb>" per verb.
  std::map<std::string, std::size_t> counts;

  std::size_t at(std::string_view name) const {
    auto it = counts.find(std::string(name));
    return it == counts.end() ? 0 : it->second;
  }
};

inline FeatureVector featurize(std::string_view exchange_id, std::string_view teacher_text,
                               const Lexicon& lex) {
  FeatureVector fv;
  fv.exchange_id = std::string(exchange_id);
  fv.length = utterance_length(teacher_text);
  auto w = lexical::words(Lexicon::normalize(teacher_text));
  auto add = [&](const std::string& entry) {
    return count_in_words(w, lexical::words(entry));
  };
  for (const auto& e : lex.question_unigrams) fv.counts[lexical::feature_name(e)] = add(e);
  for (const auto& e : lex.question_bigrams) fv.counts[lexical::feature_name(e)] = add(e);
  std::size_t verbs = 0;
  for (const auto& e : lex.cognitive_verbs) {
    auto c = add(e);
    fv.counts[std::string(kCognitiveVerbs) + "/" + lexical::feature_name(e)] = c;
    verbs += c;
  }
  fv.counts[std::string(kCognitiveVerbs)] = verbs;
  return fv;
}

/// Output column order: the fixed feature set first, then any additional
/// question entries configured in the lexicon.
inline std::vector<std::string> feature_columns(const Lexicon& lex) {
  std::vector<std::string> cols = {"who",     "what",    "when",  "where",     "how",
                                   "why",     "which",   "how_many", "how_do", "what_is",
                                   "whats",   "what_else"};
  auto extra = [&](const std::vector<std::string>& entries) {
    for (const auto& e : entries) {
      auto name = lexical::feature_name(e);
      if (std::find(cols.begin(), cols.end(), name) == cols.end()) cols.push_back(name);
    }
  };
  extra(lex.question_unigrams);
  extra(lex.question_bigrams);
  // cognitive_verbs goes after the question columns
  cols.push_back(std::string(kCognitiveVerbs));
  return cols;
}

}  // namespace funfoc
