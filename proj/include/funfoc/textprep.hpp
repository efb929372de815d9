#pragma once

// Preprocessing for the forwards-range measure: delexicalize nouns and
// numbers, keep the tail of long teacher turns, strip punctuation and
// case, tokenize, and optionally merge mined bigrams.

#include <algorithm>
#include <cctype>
#include <concepts>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "funfoc/error.hpp"
#include "funfoc/io.hpp"

namespace funfoc {

/// Whitespace-free, non-empty tokens.
using TokenSeq = std::vector<std::string>;

inline constexpr std::string_view kNounToken = "[NOUN]";
inline constexpr std::string_view kNumberToken = "[NUMBER]";

namespace text {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

/// Byte length of a punctuation code point starting at s[i], 0 if none.
/// Covers ASCII punctuation other than '_' and the typographic quotes,
/// dashes and ellipsis that transcripts commonly contain.
inline std::size_t punct_len_at(std::string_view s, std::size_t i) {
  auto c = static_cast<unsigned char>(s[i]);
  if (c < 0x80) return (std::ispunct(c) && c != '_') ? 1 : 0;
  if (c == 0xE2 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x80) {
    switch (static_cast<unsigned char>(s[i + 2])) {
      case 0x93: case 0x94:              // en/em dash
      case 0x98: case 0x99:              // single quotes
      case 0x9C: case 0x9D:              // double quotes
      case 0xA6:                         // ellipsis
        return 3;
      default: break;
    }
  }
  return 0;
}

/// Byte length of a punctuation code point ending just before s[end].
inline std::size_t punct_len_before(std::string_view s, std::size_t end) {
  if (end == 0) return 0;
  if (end >= 3 && punct_len_at(s, end - 3) == 3) return 3;
  return punct_len_at(s, end - 1) == 1 ? 1 : 0;
}

inline bool has_placeholder(std::string_view tok) {
  return tok.find(kNounToken) != std::string_view::npos ||
         tok.find(kNumberToken) != std::string_view::npos;
}

/// Lowercased token with all punctuation removed; used for lexicon lookups
/// so that a token classifies the same way before and after cleaning.
inline std::string lookup_key(std::string_view tok) {
  std::string key;
  for (std::size_t i = 0; i < tok.size();) {
    if (auto n = punct_len_at(tok, i)) {
      i += n;
      continue;
    }
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(tok[i]))));
    ++i;
  }
  return key;
}

inline std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::string join(std::span<const std::string> toks, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out += sep;
    out += toks[i];
  }
  return out;
}

}  // namespace text

inline TokenSeq tokenize(std::string_view s) {
  TokenSeq out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && text::is_space(s[i])) ++i;
    std::size_t b = i;
    while (i < s.size() && !text::is_space(s[i])) ++i;
    if (i > b) out.emplace_back(s.substr(b, i - b));
  }
  return out;
}

/// Splits after '.', '!' or '?' when followed by whitespace or the end of
/// the text; the terminator stays with its sentence.
inline std::vector<std::string> split_sentences(std::string_view s) {
  std::vector<std::string> out;
  auto push = [&](std::string_view piece) {
    auto b = piece.find_first_not_of(" \t\n\r\f\v");
    if (b == std::string_view::npos) return;
    auto e = piece.find_last_not_of(" \t\n\r\f\v");
    out.emplace_back(piece.substr(b, e - b + 1));
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == s.size() || text::is_space(s[i + 1]))) {
      push(s.substr(start, i + 1 - start));
      start = i + 1;
    }
  }
  if (start < s.size()) push(s.substr(start));
  return out;
}

namespace lexicon_defaults {

inline const std::vector<std::string>& nouns() {
  static const std::vector<std::string> words = {
      "angle", "angles", "answer", "answers", "area", "areas", "array", "arrays", "bar", "bars",
      "base", "block", "blocks", "board", "book", "books", "box", "boxes", "calculator",
      "centimeter", "centimeters", "chart", "circle", "circles", "class", "cm", "column",
      "columns", "cube", "cubes", "data", "decimal", "decimals", "degree", "degrees",
      "denominator", "denominators", "diagram", "difference", "digit", "digits", "dollar",
      "dollars", "dot", "dots", "equation", "equations", "example", "examples", "expression",
      "factor", "factors", "feet", "foot", "fraction", "fractions", "gallon", "gallons",
      "gram", "grams", "graph", "graphs", "grid", "group", "groups", "height", "hexagon",
      "hexagons", "hour", "hours", "inch", "inches", "kilogram", "kilograms", "length",
      "line", "lines", "liter", "liters", "meter", "meters", "mile", "miles", "minute",
      "minutes", "model", "models", "money", "multiple", "multiples", "number", "numbers",
      "numerator", "numerators", "ounce", "ounces", "page", "pages", "paper", "parallelogram",
      "pattern", "patterns", "pencil", "pencils", "pentagon", "percent", "perimeter", "piece",
      "pieces", "pizza", "place", "point", "points", "polygon", "polygons", "pound", "pounds",
      "problem", "problems", "product", "quadrilateral", "quotient", "rectangle", "rectangles",
      "remainder", "rhombus", "row", "rows", "ruler", "rule", "shape", "shapes", "side",
      "sides", "slope", "square", "squares", "strategy", "student", "students", "sum",
      "table", "teacher", "total", "trapezoid", "trapezoids", "triangle", "triangles", "unit",
      "units", "value", "values", "volume", "week", "weeks", "width", "word", "words",
      "worksheet", "yard", "yards", "year", "years"};
  return words;
}

inline const std::vector<std::string>& number_words() {
  static const std::vector<std::string> words = {
      "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
      "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
      "nineteen", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
      "hundred", "hundreds", "thousand", "thousands", "million", "millions", "half", "halves",
      "third", "thirds", "fourth", "fourths", "quarter", "quarters", "fifth", "fifths", "sixth",
      "sixths", "seventh", "sevenths", "eighth", "eighths", "ninth", "ninths", "tenth",
      "tenths", "eleventh", "elevenths", "twelfth", "twelfths", "hundredth", "hundredths",
      "thousandth", "thousandths"};
  return words;
}

/// Words that never count as nouns even directly after "a/an/the".
inline const std::vector<std::string>& non_nouns() {
  static const std::vector<std::string> words = {
      "a", "about", "all", "an", "and", "another", "any", "are", "as", "at", "be", "best",
      "big", "bigger", "biggest", "both", "but", "by", "can", "correct", "could", "different",
      "do", "does", "each", "easy", "easier", "equal", "every", "exact", "few", "first",
      "for", "from", "good", "great", "had", "has", "have", "he", "her", "his", "how", "i",
      "if", "in", "is", "it", "its", "just", "large", "larger", "largest", "last", "least",
      "left", "less", "little", "long", "longer", "longest", "many", "more", "most", "much",
      "my", "new", "next", "no", "not", "of", "old", "on", "one", "only", "or", "other",
      "our", "own", "right", "same", "second", "she", "short", "shorter", "shortest", "small",
      "smaller", "smallest", "so", "some", "that", "the", "their", "them", "these", "they",
      "this", "those", "to", "very", "was", "we", "were", "what", "when", "where", "which",
      "who", "whole", "why", "will", "with", "would", "wrong", "you", "your"};
  return words;
}

}  // namespace lexicon_defaults

/// Deterministic rule-based noun/number classifier. Rules, in order:
/// tokens already holding a placeholder or an underscore are left alone;
/// numeric literals ("12", "3.5", "3/4", "1,000", "4th") and spelled
/// number words are numbers; lexicon nouns are nouns; a word directly
/// after "a"/"an"/"the" that is not in the non-noun list is a noun.
class Tagger {
 public:
  enum class Tag { none, noun, number };

  Tagger()
      : Tagger(lexicon_defaults::nouns(), lexicon_defaults::number_words(),
               lexicon_defaults::non_nouns()) {}

  Tagger(std::span<const std::string> nouns, std::span<const std::string> number_words,
         std::span<const std::string> non_nouns) {
    for (const auto& w : nouns) nouns_.insert(text::lookup_key(w));
    for (const auto& w : number_words) numbers_.insert(text::lookup_key(w));
    for (const auto& w : non_nouns) non_nouns_.insert(text::lookup_key(w));
  }

  /// Lexicon files are plain word lists; a missing path keeps the default.
  static Tagger from_files(const std::optional<std::filesystem::path>& nouns_path,
                           const std::optional<std::filesystem::path>& numbers_path) {
    auto load = [](const std::optional<std::filesystem::path>& p,
                   const std::vector<std::string>& fallback) {
      if (!p) return fallback;
      std::ifstream in(*p);
      if (!in) throw InputError("cannot open lexicon " + p->string());
      return io::read_word_list(in);
    };
    return Tagger(load(nouns_path, lexicon_defaults::nouns()),
                  load(numbers_path, lexicon_defaults::number_words()),
                  lexicon_defaults::non_nouns());
  }

  Tag classify(std::span<const std::string> tokens, std::size_t i) const {
    const std::string& tok = tokens[i];
    if (text::has_placeholder(tok) || tok.find('_') != std::string::npos) return Tag::none;
    auto [b, e] = core_bounds(tok);
    std::string_view core(tok.data() + b, e - b);
    if (core.empty()) return Tag::none;
    if (is_numeric_literal(core) || is_number_word(core)) return Tag::number;
    std::string key = text::lookup_key(core);
    if (key.empty()) return Tag::none;
    if (nouns_.contains(key)) return Tag::noun;
    if (follows_article(tokens, i) && is_alpha(key) && !non_nouns_.contains(key) &&
        !numbers_.contains(key))
      return Tag::noun;
    return Tag::none;
  }

  /// [first, last) byte range of the token without edge punctuation.
  static std::pair<std::size_t, std::size_t> core_bounds(std::string_view tok) {
    std::size_t b = 0;
    std::size_t e = tok.size();
    while (b < e) {
      auto n = text::punct_len_at(tok, b);
      if (!n) break;
      b += n;
    }
    while (e > b) {
      auto n = text::punct_len_before(tok, e);
      if (!n) break;
      e -= n;
    }
    return {b, e};
  }

  /// Digits once punctuation is ignored ("12", "3.5", "3/4", "1,000"),
  /// optionally with an ordinal suffix ("4th").
  static bool is_numeric_literal(std::string_view core) {
    auto key = text::lookup_key(core);
    std::size_t i = 0;
    while (i < key.size() && std::isdigit(static_cast<unsigned char>(key[i]))) ++i;
    if (i == 0) return false;
    auto rest = std::string_view(key).substr(i);
    return rest.empty() || rest == "st" || rest == "nd" || rest == "rd" || rest == "th";
  }

  bool is_number_word(std::string_view core) const {
    if (numbers_.contains(text::lookup_key(core))) return true;
    if (core.find('-') == std::string_view::npos) return false;
    // twenty-five, one-half
    std::size_t start = 0;
    while (start <= core.size()) {
      auto dash = core.find('-', start);
      auto part = core.substr(start, dash == std::string_view::npos ? core.npos : dash - start);
      if (part.empty() || !numbers_.contains(text::lookup_key(part))) return false;
      if (dash == std::string_view::npos) break;
      start = dash + 1;
    }
    return true;
  }

 private:
  static bool is_alpha(std::string_view key) {
    return std::all_of(key.begin(), key.end(),
                       [](char c) { return std::isalpha(static_cast<unsigned char>(c)); });
  }

  // Skips tokens that are pure punctuation, since cleaning removes them.
  static bool follows_article(std::span<const std::string> tokens, std::size_t i) {
    while (i > 0) {
      --i;
      if (text::has_placeholder(tokens[i])) return false;
      std::string key = text::lookup_key(tokens[i]);
      if (key.empty()) continue;
      return key == "a" || key == "an" || key == "the";
    }
    return false;
  }

  std::unordered_set<std::string> nouns_;
  std::unordered_set<std::string> numbers_;
  std::unordered_set<std::string> non_nouns_;
};

/// Replaces the word part of noun/number tokens with "[NOUN]"/"[NUMBER]",
/// keeping edge punctuation so sentence boundaries survive.
inline TokenSeq delexicalize(std::span<const std::string> tokens, const Tagger& tagger) {
  TokenSeq out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto tag = tagger.classify(tokens, i);
    if (tag == Tagger::Tag::none) {
      out.push_back(tokens[i]);
      continue;
    }
    const std::string& tok = tokens[i];
    auto [b, e] = Tagger::core_bounds(tok);
    std::string replaced = tok.substr(0, b);
    replaced += tag == Tagger::Tag::noun ? kNounToken : kNumberToken;
    replaced += tok.substr(e);
    out.push_back(std::move(replaced));
  }
  return out;
}

inline constexpr std::size_t kTailTokens = 20;
inline constexpr std::size_t kTailSentences = 2;

/// Keeps whichever of the last two sentences or the last twenty tokens is
/// longer (in tokens); ties go to the sentence cut.
inline std::string truncate_tail(std::string_view s) {
  auto toks = tokenize(s);
  auto sents = split_sentences(s);
  if (toks.size() <= kTailTokens && sents.size() <= kTailSentences) return std::string(s);

  std::vector<std::string> by_sentence;
  std::size_t from = sents.size() > kTailSentences ? sents.size() - kTailSentences : 0;
  for (std::size_t i = from; i < sents.size(); ++i) {
    auto st = tokenize(sents[i]);
    by_sentence.insert(by_sentence.end(), st.begin(), st.end());
  }
  std::size_t tail_n = std::min(kTailTokens, toks.size());
  if (by_sentence.size() >= tail_n) return text::join(by_sentence);
  return text::join(std::span<const std::string>(toks).last(tail_n));
}

/// Lowercases, drops punctuation (placeholder brackets and underscores
/// survive) and collapses whitespace.
inline std::string clean(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  auto emit = [&](std::string_view piece) {
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out += piece;
  };
  for (std::size_t i = 0; i < s.size();) {
    if (s.compare(i, kNounToken.size(), kNounToken) == 0) {
      emit(kNounToken);
      i += kNounToken.size();
      continue;
    }
    if (s.compare(i, kNumberToken.size(), kNumberToken) == 0) {
      emit(kNumberToken);
      i += kNumberToken.size();
      continue;
    }
    if (text::is_space(s[i])) {
      pending_space = true;
      ++i;
      continue;
    }
    if (auto n = text::punct_len_at(s, i)) {
      i += n;
      continue;
    }
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(s[i])));
    emit(std::string_view(&c, 1));
    ++i;
  }
  return out;
}

template <typename M>
concept PhraseMerger = requires(const M& m, std::span<const std::string> toks) {
  { m.merge(toks) } -> std::convertible_to<TokenSeq>;
};

/// Teacher side: delexicalize, keep the tail, clean, tokenize, merge.
template <PhraseMerger M>
TokenSeq preprocess_teacher(std::string_view utterance, const Tagger& tagger, const M* phrases) {
  auto delex = delexicalize(tokenize(utterance), tagger);
  auto toks = tokenize(clean(truncate_tail(text::join(delex))));
  if (phrases) return phrases->merge(toks);
  return toks;
}

inline TokenSeq preprocess_teacher(std::string_view utterance, const Tagger& tagger) {
  auto delex = delexicalize(tokenize(utterance), tagger);
  return tokenize(clean(truncate_tail(text::join(delex))));
}

/// Reply side: same as the teacher side without truncation or merging.
inline TokenSeq preprocess_reply(std::string_view reply, const Tagger& tagger) {
  auto delex = delexicalize(tokenize(reply), tagger);
  return tokenize(clean(text::join(delex)));
}

}  // namespace funfoc
