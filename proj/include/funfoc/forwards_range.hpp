#pragma once

// Forwards-range: how spread out the replies to a teacher-side term are.
// Replies become L2-normalized TF-IDF vectors; a term's central point is
// the mean of the vectors of replies to utterances containing the term,
// and its range is the mean cosine distance of those replies from it.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "funfoc/error.hpp"
#include "funfoc/io.hpp"
#include "funfoc/textprep.hpp"

namespace funfoc {

/// Sparse non-negative vector, entries sorted by column.
struct ReplyVector {
  std::vector<std::pair<std::size_t, double>> entries;

  bool empty() const { return entries.empty(); }
  std::size_t nnz() const { return entries.size(); }

  double norm() const {
    double s = 0.0;
    for (const auto& [i, w] : entries) s += w * w;
    return std::sqrt(s);
  }

  double dot(const ReplyVector& o) const {
    double s = 0.0;
    std::size_t a = 0;
    std::size_t b = 0;
    while (a < entries.size() && b < o.entries.size()) {
      if (entries[a].first < o.entries[b].first) {
        ++a;
      } else if (entries[a].first > o.entries[b].first) {
        ++b;
      } else {
        s += entries[a].second * o.entries[b].second;
        ++a;
        ++b;
      }
    }
    return s;
  }

  bool operator==(const ReplyVector&) const = default;
};

class TfIdfModel {
 public:
  TfIdfModel() = default;

  /// Smoothed idf: ln((1 + D) / (1 + df)) + 1. Columns follow
  /// lexicographic term order.
  static TfIdfModel fit(std::span<const TokenSeq> replies) {
    std::map<std::string, std::size_t> df;
    bool any = false;
    for (const auto& doc : replies) {
      if (!doc.empty()) any = true;
      std::set<std::string_view> seen(doc.begin(), doc.end());
      for (auto t : seen) ++df[std::string(t)];
    }
    if (!any) throw InputError("cannot fit TF-IDF: every reply is empty");
    TfIdfModel m;
    m.docs_ = replies.size();
    for (const auto& [term, n] : df) {
      m.vocab_.emplace(term, m.terms_.size());
      m.terms_.push_back(term);
      m.df_.push_back(n);
      m.idf_.push_back(idf_value(m.docs_, n));
    }
    return m;
  }

  static double idf_value(std::size_t docs, std::size_t df) {
    return std::log((1.0 + static_cast<double>(docs)) / (1.0 + static_cast<double>(df))) + 1.0;
  }

  /// count * idf per in-vocabulary term, L2-normalized.
  ReplyVector vectorize(std::span<const std::string> tokens) const {
    std::map<std::size_t, double> counts;
    for (const auto& t : tokens) {
      auto it = vocab_.find(t);
      if (it != vocab_.end()) counts[it->second] += 1.0;
    }
    ReplyVector v;
    v.entries.reserve(counts.size());
    double ss = 0.0;
    for (const auto& [col, c] : counts) {
      double w = c * idf_[col];
      v.entries.emplace_back(col, w);
      ss += w * w;
    }
    if (ss > 0.0) {
      double inv = 1.0 / std::sqrt(ss);
      for (auto& e : v.entries) e.second *= inv;
    }
    return v;
  }

  std::size_t doc_count() const { return docs_; }
  std::size_t size() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }

  std::optional<std::size_t> column(std::string_view term) const {
    auto it = vocab_.find(std::string(term));
    if (it == vocab_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<double> idf(std::string_view term) const {
    auto c = column(term);
    if (!c) return std::nullopt;
    return idf_[*c];
  }

  std::string to_csv() const {
    std::string out = "# doc_count=" + std::to_string(docs_) + "\nterm,df,idf\n";
    for (std::size_t i = 0; i < terms_.size(); ++i)
      out += io::csv_field(terms_[i]) + "," + std::to_string(df_[i]) + "," +
             io::format_double(idf_[i]) + "\n";
    return out;
  }

  static TfIdfModel from_csv(std::istream& in, const std::string& source = "<tfidf>") {
    TfIdfModel m;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
      ++lineno;
      io::strip_cr(line);
      if (line.empty()) continue;
      if (line.rfind("# doc_count=", 0) == 0) {
        auto v = io::parse_int(std::string_view(line).substr(12));
        if (!v || *v < 1) throw InputError(source, lineno, "bad doc_count");
        m.docs_ = static_cast<std::size_t>(*v);
        continue;
      }
      auto f = io::split_csv(line);
      if (!header) {
        if (f != std::vector<std::string>{"term", "df", "idf"})
          throw InputError(source, lineno, "expected header term,df,idf");
        header = true;
        continue;
      }
      auto df = f.size() == 3 ? io::parse_int(f[1]) : std::nullopt;
      auto idf = f.size() == 3 ? io::parse_double(f[2]) : std::nullopt;
      if (!df || !idf || f[0].empty()) throw InputError(source, lineno, "malformed tfidf row");
      if (!m.terms_.empty() && f[0] <= m.terms_.back())
        throw InputError(source, lineno, "terms must be strictly sorted");
      m.vocab_.emplace(f[0], m.terms_.size());
      m.terms_.push_back(f[0]);
      m.df_.push_back(static_cast<std::size_t>(*df));
      m.idf_.push_back(*idf);
    }
    if (m.docs_ == 0) throw InputError(source + ": missing doc_count header");
    return m;
  }

 private:
  std::map<std::string, std::size_t> vocab_;
  std::vector<std::string> terms_;
  std::vector<std::size_t> df_;
  std::vector<double> idf_;
  std::size_t docs_ = 0;
};

/// Optional truncated-SVD projection of reply vectors (randomized range
/// finder with power iterations). Projected vectors are re-normalized;
/// they can have negative coordinates, so ranges in this space lie in
/// [0, 2] instead of [0, 1].
class LatentProjection {
 public:
  static LatentProjection fit(std::span<const ReplyVector> rows, std::size_t n_cols,
                              std::size_t dim, std::uint64_t seed, int power_iters = 4,
                              std::size_t oversample = 10) {
    if (dim == 0) throw InputError("svd dimension must be >= 1");
    using Mat = Eigen::MatrixXd;
    const auto n_rows = static_cast<Eigen::Index>(rows.size());
    const auto cols = static_cast<Eigen::Index>(n_cols);
    const auto l = static_cast<Eigen::Index>(std::min<std::size_t>(dim + oversample, n_cols));
    if (n_rows == 0 || cols == 0) throw InputError("cannot fit projection on an empty matrix");

    // X * M and X^T * M for sparse rows without materializing X.
    auto times = [&](const Mat& m) {
      Mat out = Mat::Zero(n_rows, m.cols());
      for (Eigen::Index r = 0; r < n_rows; ++r)
        for (const auto& [c, w] : rows[static_cast<std::size_t>(r)].entries)
          out.row(r) += w * m.row(static_cast<Eigen::Index>(c));
      return out;
    };
    auto times_t = [&](const Mat& m) {
      Mat out = Mat::Zero(cols, m.cols());
      for (Eigen::Index r = 0; r < n_rows; ++r)
        for (const auto& [c, w] : rows[static_cast<std::size_t>(r)].entries)
          out.row(static_cast<Eigen::Index>(c)) += w * m.row(r);
      return out;
    };
    auto orth = [](const Mat& m) {
      Eigen::HouseholderQR<Mat> qr(m);
      return Mat(qr.householderQ() * Mat::Identity(m.rows(), std::min(m.rows(), m.cols())));
    };

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat omega(cols, l);
    for (Eigen::Index j = 0; j < l; ++j)
      for (Eigen::Index i = 0; i < cols; ++i) omega(i, j) = gauss(rng);

    Mat q = orth(times(omega));
    for (int it = 0; it < power_iters; ++it) {
      Mat z = orth(times_t(q));
      q = orth(times(z));
    }
    Mat b = times_t(q).transpose();  // (l x cols) = Q^T X
    Eigen::JacobiSVD<Mat> svd(b, Eigen::ComputeThinV);
    const auto k = std::min<Eigen::Index>(static_cast<Eigen::Index>(dim), svd.matrixV().cols());
    LatentProjection p;
    p.basis_ = svd.matrixV().leftCols(k);
    return p;
  }

  std::size_t dim() const { return static_cast<std::size_t>(basis_.cols()); }

  ReplyVector project(const ReplyVector& v) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(basis_.cols());
    for (const auto& [c, w] : v.entries) {
      if (static_cast<Eigen::Index>(c) < basis_.rows())
        out += w * basis_.row(static_cast<Eigen::Index>(c)).transpose();
    }
    ReplyVector r;
    double n = out.norm();
    if (n == 0.0) return r;
    for (Eigen::Index i = 0; i < out.size(); ++i)
      r.entries.emplace_back(static_cast<std::size_t>(i), out(i) / n);
    return r;
  }

 private:
  Eigen::MatrixXd basis_;  // n_cols x dim
};

/// A preprocessed teacher utterance with the vector of its reply.
struct RangeObservation {
  TokenSeq teacher;
  ReplyVector reply;
};

class ForwardsRangeModel {
 public:
  struct TermStat {
    std::size_t frequency = 0;  // observations with a non-empty reply
    double range = 0.0;
  };

  struct Score {
    double value = 0.0;
    bool covered = false;
  };

  ForwardsRangeModel() = default;

  /// Keeps terms seen in at least min_term_freq observations whose reply
  /// vector is non-empty.
  static ForwardsRangeModel fit(std::span<const RangeObservation> obs, std::size_t min_term_freq) {
    if (min_term_freq < 1) throw InputError("min_term_freq must be >= 1");
    std::map<std::string, std::vector<std::size_t>> postings;
    std::size_t dim = 0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const auto& o = obs[i];
      if (o.reply.empty()) continue;
      dim = std::max(dim, o.reply.entries.back().first + 1);
      std::set<std::string_view> distinct(o.teacher.begin(), o.teacher.end());
      for (auto t : distinct) postings[std::string(t)].push_back(i);
    }

    ForwardsRangeModel m;
    m.min_term_freq_ = min_term_freq;
    std::vector<double> centroid(dim, 0.0);
    std::vector<std::size_t> touched;
    for (const auto& [term, ids] : postings) {
      if (ids.size() < min_term_freq) continue;
      touched.clear();
      for (auto i : ids) {
        for (const auto& [c, w] : obs[i].reply.entries) {
          if (centroid[c] == 0.0) touched.push_back(c);
          centroid[c] += w;
        }
      }
      double cnorm = 0.0;
      std::sort(touched.begin(), touched.end());
      touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
      for (auto c : touched) cnorm += centroid[c] * centroid[c];
      cnorm = std::sqrt(cnorm);
      double dist = 0.0;
      for (auto i : ids) {
        const auto& v = obs[i].reply;
        double d = 0.0;
        for (const auto& [c, w] : v.entries) d += w * centroid[c];
        double denom = v.norm() * cnorm;
        double cos = denom > 0.0 ? d / denom : 0.0;
        dist += 1.0 - std::clamp(cos, -1.0, 1.0);
      }
      for (auto c : touched) centroid[c] = 0.0;
      double range = std::max(0.0, dist / static_cast<double>(ids.size()));
      m.terms_.emplace(term, TermStat{ids.size(), range});
    }
    if (m.terms_.empty())
      throw InputError("no teacher term occurs in " + std::to_string(min_term_freq) +
                       " or more exchanges with a non-empty reply; lower min_term_freq");
    m.recompute_fallback();
    return m;
  }

  /// Mean range over the distinct in-model terms; the corpus fallback
  /// when none are covered.
  Score score(std::span<const std::string> teacher_tokens) const {
    std::set<std::string_view> distinct(teacher_tokens.begin(), teacher_tokens.end());
    double sum = 0.0;
    std::size_t n = 0;
    for (auto t : distinct) {
      auto it = terms_.find(t);
      if (it == terms_.end()) continue;
      sum += it->second.range;
      ++n;
    }
    if (n == 0) return {fallback_, false};
    return {sum / static_cast<double>(n), true};
  }

  std::optional<double> range(std::string_view term) const {
    auto it = terms_.find(term);
    if (it == terms_.end()) return std::nullopt;
    return it->second.range;
  }

  const std::map<std::string, TermStat, std::less<>>& terms() const { return terms_; }
  double fallback() const { return fallback_; }
  std::size_t min_term_freq() const { return min_term_freq_; }

  std::string to_csv() const {
    std::string out = "# min_term_freq=" + std::to_string(min_term_freq_) + "\n";
    out += "# fallback=" + io::format_double(fallback_) + "\n";
    out += "term,frequency,range\n";
    for (const auto& [t, s] : terms_)
      out += io::csv_field(t) + "," + std::to_string(s.frequency) + "," +
             io::format_double(s.range) + "\n";
    return out;
  }

  static ForwardsRangeModel from_csv(std::istream& in, const std::string& source = "<ranges>") {
    ForwardsRangeModel m;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    bool have_fallback = false;
    while (std::getline(in, line)) {
      ++lineno;
      io::strip_cr(line);
      if (line.empty()) continue;
      if (line.rfind("# min_term_freq=", 0) == 0) {
        auto v = io::parse_int(std::string_view(line).substr(16));
        if (!v || *v < 1) throw InputError(source, lineno, "bad min_term_freq");
        m.min_term_freq_ = static_cast<std::size_t>(*v);
        continue;
      }
      if (line.rfind("# fallback=", 0) == 0) {
        auto v = io::parse_double(std::string_view(line).substr(11));
        if (!v) throw InputError(source, lineno, "bad fallback");
        m.fallback_ = *v;
        have_fallback = true;
        continue;
      }
      auto f = io::split_csv(line);
      if (!header) {
        if (f != std::vector<std::string>{"term", "frequency", "range"})
          throw InputError(source, lineno, "expected header term,frequency,range");
        header = true;
        continue;
      }
      auto freq = f.size() == 3 ? io::parse_int(f[1]) : std::nullopt;
      auto range = f.size() == 3 ? io::parse_double(f[2]) : std::nullopt;
      if (!freq || !range || f[0].empty()) throw InputError(source, lineno, "malformed range row");
      if (static_cast<std::size_t>(*freq) < m.min_term_freq_)
        throw InputError(source, lineno, "term frequency below min_term_freq");
      m.terms_.emplace(f[0], TermStat{static_cast<std::size_t>(*freq), *range});
    }
    if (!have_fallback) throw InputError(source + ": missing fallback header");
    return m;
  }

 private:
  void recompute_fallback() {
    double s = 0.0;
    for (const auto& [t, st] : terms_) s += st.range;
    fallback_ = terms_.empty() ? 0.0 : s / static_cast<double>(terms_.size());
  }

  std::map<std::string, TermStat, std::less<>> terms_;
  std::size_t min_term_freq_ = 1;
  double fallback_ = 0.0;
};

}  // namespace funfoc
