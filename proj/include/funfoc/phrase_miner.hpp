#pragma once

// Bigram collocation mining with the count-discounted PMI-style scorer
//   score(a,b) = (count(a,b) - min_count) * N / (count(a) * count(b))
// where N is the number of distinct unigrams. Accepted pairs are joined
// with '_' in a single greedy left-to-right pass.

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "funfoc/error.hpp"
#include "funfoc/io.hpp"
#include "funfoc/textprep.hpp"

namespace funfoc {

class PhraseModel {
 public:
  using Count = long long;

  PhraseModel() = default;

  static PhraseModel fit(std::span<const TokenSeq> corpus, Count min_count, double threshold) {
    if (min_count < 1) throw InputError("phrase min_count must be >= 1");
    if (!std::isfinite(threshold)) throw InputError("phrase threshold must be finite");
    PhraseModel m;
    m.min_count_ = min_count;
    m.threshold_ = threshold;
    for (const auto& seq : corpus) {
      for (std::size_t i = 0; i < seq.size(); ++i) {
        ++m.unigrams_[seq[i]];
        if (i + 1 < seq.size()) ++m.bigrams_[pair_key(seq[i], seq[i + 1])];
      }
    }
    return m;
  }

  Count unigram_count(std::string_view w) const {
    auto it = unigrams_.find(std::string(w));
    return it == unigrams_.end() ? 0 : it->second;
  }

  Count bigram_count(std::string_view a, std::string_view b) const {
    auto it = bigrams_.find(pair_key(a, b));
    return it == bigrams_.end() ? 0 : it->second;
  }

  std::size_t vocab_size() const { return unigrams_.size(); }
  Count min_count() const { return min_count_; }
  double threshold() const { return threshold_; }
  std::size_t bigram_types() const { return bigrams_.size(); }

  /// -inf when either word is unseen.
  double score(std::string_view a, std::string_view b) const {
    Count ca = unigram_count(a);
    Count cb = unigram_count(b);
    if (ca == 0 || cb == 0) return -std::numeric_limits<double>::infinity();
    return score_from_counts(bigram_count(a, b), ca, cb, vocab_size(), min_count_);
  }

  static double score_from_counts(Count ab, Count a, Count b, std::size_t n, Count min_count) {
    return static_cast<double>(ab - min_count) * static_cast<double>(n) /
           (static_cast<double>(a) * static_cast<double>(b));
  }

  bool accepted(std::string_view a, std::string_view b) const {
    return score(a, b) > threshold_;
  }

  TokenSeq merge(std::span<const std::string> tokens) const {
    TokenSeq out;
    out.reserve(tokens.size());
    std::size_t i = 0;
    while (i < tokens.size()) {
      if (i + 1 < tokens.size() && accepted(tokens[i], tokens[i + 1])) {
        out.push_back(tokens[i] + "_" + tokens[i + 1]);
        i += 2;
      } else {
        out.push_back(tokens[i]);
        ++i;
      }
    }
    return out;
  }

  /// Every counted bigram with its score and accept decision, sorted.
  struct Entry {
    std::string a;
    std::string b;
    Count count;
    double score;
    bool accepted;
  };

  std::vector<Entry> entries() const {
    std::vector<Entry> out;
    out.reserve(bigrams_.size());
    for (const auto& [key, c] : bigrams_) {
      auto sp = key.find(' ');
      std::string a = key.substr(0, sp);
      std::string b = key.substr(sp + 1);
      double s = score(a, b);
      out.push_back({std::move(a), std::move(b), c, s, s > threshold_});
    }
    std::sort(out.begin(), out.end(),
              [](const Entry& x, const Entry& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
    return out;
  }

  /// Header block with N, min_count and threshold, then rows
  /// token_a,token_b,count. Unigram rows leave token_b empty.
  std::string to_csv() const {
    std::string out;
    out += "# N=" + std::to_string(vocab_size()) + "\n";
    out += "# min_count=" + std::to_string(min_count_) + "\n";
    out += "# threshold=" + io::format_double(threshold_) + "\n";
    out += "token_a,token_b,count\n";
    std::map<std::string, Count> uni(unigrams_.begin(), unigrams_.end());
    for (const auto& [w, c] : uni) out += io::csv_field(w) + ",," + std::to_string(c) + "\n";
    for (const auto& e : entries())
      out += io::csv_field(e.a) + "," + io::csv_field(e.b) + "," + std::to_string(e.count) + "\n";
    return out;
  }

  static PhraseModel from_csv(std::istream& in, const std::string& source = "<phrases>") {
    PhraseModel m;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    long long declared_n = -1;
    bool have_min = false;
    bool have_thr = false;
    while (std::getline(in, line)) {
      ++lineno;
      io::strip_cr(line);
      if (line.empty()) continue;
      if (line.rfind("# ", 0) == 0) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(2, eq - 2);
        std::string val = line.substr(eq + 1);
        if (key == "N") {
          auto v = io::parse_int(val);
          if (!v) throw InputError(source, lineno, "bad N");
          declared_n = *v;
        } else if (key == "min_count") {
          auto v = io::parse_int(val);
          if (!v || *v < 1) throw InputError(source, lineno, "bad min_count");
          m.min_count_ = *v;
          have_min = true;
        } else if (key == "threshold") {
          auto v = io::parse_double(val);
          if (!v) throw InputError(source, lineno, "bad threshold");
          m.threshold_ = *v;
          have_thr = true;
        }
        continue;
      }
      auto f = io::split_csv(line);
      if (!header) {
        if (f != std::vector<std::string>{"token_a", "token_b", "count"})
          throw InputError(source, lineno, "expected header token_a,token_b,count");
        header = true;
        continue;
      }
      if (f.size() != 3) throw InputError(source, lineno, "expected 3 fields");
      auto c = io::parse_int(f[2]);
      if (!c || *c < 1 || f[0].empty()) throw InputError(source, lineno, "malformed count row");
      if (f[1].empty())
        m.unigrams_[f[0]] = *c;
      else
        m.bigrams_[pair_key(f[0], f[1])] = *c;
    }
    if (!have_min || !have_thr) throw InputError(source + ": missing min_count/threshold header");
    if (declared_n >= 0 && static_cast<std::size_t>(declared_n) != m.unigrams_.size())
      throw InputError(source + ": N does not match the number of unigram rows");
    return m;
  }

 private:
  static std::string pair_key(std::string_view a, std::string_view b) {
    std::string k;
    k.reserve(a.size() + b.size() + 1);
    k += a;
    k += ' ';
    k += b;
    return k;
  }

  std::unordered_map<std::string, Count> unigrams_;
  std::unordered_map<std::string, Count> bigrams_;  // "a b" -> count
  Count min_count_ = 1;
  double threshold_ = 1.0;
};

static_assert(PhraseMerger<PhraseModel>);

}  // namespace funfoc
