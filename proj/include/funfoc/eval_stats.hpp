#pragma once

// Evaluation statistics: Spearman correlation with significance, leave-
// one-rater-out agreement, Fleiss' kappa, group mean aggregation and
// standardized OLS with controls. Missing values are NaN.

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "funfoc/corpus.hpp"
#include "funfoc/error.hpp"
#include "funfoc/io.hpp"

namespace funfoc {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

enum class Stars { none, dagger, one, two, three };

/// dagger < 0.1, * < 0.05, ** < 0.01, *** < 0.001.
inline Stars stars_for(double p) {
  if (std::isnan(p)) return Stars::none;
  if (p < 0.001) return Stars::three;
  if (p < 0.01) return Stars::two;
  if (p < 0.05) return Stars::one;
  if (p < 0.1) return Stars::dagger;
  return Stars::none;
}

inline std::string_view to_string(Stars s) {
  switch (s) {
    case Stars::none: return "";
    case Stars::dagger: return "\xE2\x80\xA0";  // dagger
    case Stars::one: return "*";
    case Stars::two: return "**";
    case Stars::three: return "***";
  }
  return "";
}

/// Named per-exchange scores; absent ids are missing.
struct ScoreSeries {
  std::string name;
  std::map<std::string, double> values;
};

struct CorrelationResult {
  double rho = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  Stars stars = Stars::none;
};

struct RegressionResult {
  double beta = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  std::vector<std::string> controls;  // controls actually in the model
  std::vector<std::string> warnings;
  Stars stars = Stars::none;
};

struct IrrResult {
  double mean_rho = 0.0;
  std::map<std::string, double> per_rater;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::string> warnings;
};

struct FleissResult {
  double kappa = 0.0;
  std::size_t n_items = 0;
  std::size_t raters_per_item = 0;
  std::size_t excluded_items = 0;
};

namespace stats {

/// 1-based ranks, ties get the average of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Throws StatsError when either side has zero variance.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw StatsError("pearson: need >= 2 paired values");
  double mx = mean(x);
  double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dx = x[i] - mx;
    double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw StatsError("undefined correlation: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Two-sided p-value of a Student-t statistic.
inline double t_two_sided_p(double t, double df) {
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))));
}

/// Exact two-sided permutation p-value of a rank correlation (n <= 10).
inline double permutation_p(std::span<const double> rx, std::span<const double> ry, double rho) {
  const std::size_t n = rx.size();
  if (n > 10) throw StatsError("exact permutation p-value is limited to n <= 10");
  std::vector<double> perm(ry.begin(), ry.end());
  std::sort(perm.begin(), perm.end());
  std::size_t hits = 0;
  std::size_t total = 0;
  const double target = std::fabs(rho) - 1e-12;
  do {
    ++total;
    double r;
    try {
      r = pearson(rx, perm);
    } catch (const StatsError&) {
      r = 0.0;
    }
    if (std::fabs(r) >= target) ++hits;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace stats

struct SpearmanOptions {
  bool exact_p = false;  // permutation p-value, only for n <= 10
};

/// Pairs where either value is NaN are dropped. Needs >= 3 pairs and
/// non-constant ranks on both sides.
inline CorrelationResult spearman(std::span<const double> x, std::span<const double> y,
                                  SpearmanOptions opts = {}) {
  if (x.size() != y.size()) throw InvariantError("spearman: length mismatch");
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) continue;
    xs.push_back(x[i]);
    ys.push_back(y[i]);
  }
  CorrelationResult r;
  r.n = xs.size();
  if (r.n < 3) throw StatsError("undefined correlation: fewer than 3 complete pairs");
  auto rx = stats::average_ranks(xs);
  auto ry = stats::average_ranks(ys);
  r.rho = stats::pearson(rx, ry);
  if (opts.exact_p && r.n <= 10) {
    r.p_value = stats::permutation_p(rx, ry, r.rho);
  } else if (std::fabs(r.rho) >= 1.0) {
    r.p_value = 0.0;
  } else {
    double df = static_cast<double>(r.n) - 2.0;
    double t = r.rho * std::sqrt(df / (1.0 - r.rho * r.rho));
    r.p_value = stats::t_two_sided_p(t, df);
  }
  r.stars = stars_for(r.p_value);
  return r;
}

/// Correlates two series over their shared exchange ids.
inline CorrelationResult spearman(const ScoreSeries& a, const ScoreSeries& b,
                                  SpearmanOptions opts = {}) {
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& [id, v] : a.values) {
    auto it = b.values.find(id);
    if (it == b.values.end()) continue;
    x.push_back(v);
    y.push_back(it->second);
  }
  return spearman(x, y, opts);
}

/// Each rater's z-scores against the mean z of the other raters on the
/// items they share. Raters with fewer than 3 shared items, or with a
/// constant rank vector, are skipped with a warning.
inline IrrResult leave_out_irr(const std::map<std::string, std::map<std::string, double>>& z) {
  IrrResult out;
  std::map<std::string, std::vector<std::pair<const std::string*, double>>> by_item;
  for (const auto& [rater, zs] : z)
    for (const auto& [ex, v] : zs) by_item[ex].emplace_back(&rater, v);
  for (const auto& [rater, zs] : z) {
    std::vector<double> own;
    std::vector<double> others;
    for (const auto& [ex, v] : zs) {
      const auto& item = by_item.at(ex);
      if (item.size() < 2) continue;
      double sum = 0.0;
      for (const auto& [who, zv] : item)
        if (*who != rater) sum += zv;
      own.push_back(v);
      others.push_back(sum / static_cast<double>(item.size() - 1));
    }
    if (own.size() < 3) {
      out.warnings.push_back("rater " + rater + " skipped: " + std::to_string(own.size()) +
                             " overlapping items");
      continue;
    }
    try {
      out.per_rater.emplace(rater, spearman(own, others).rho);
    } catch (const StatsError& e) {
      out.warnings.push_back("rater " + rater + " skipped: " + e.what());
    }
  }
  if (out.per_rater.empty()) throw StatsError("leave-out agreement undefined: no rater qualifies");
  double s = 0.0;
  out.lo = std::numeric_limits<double>::infinity();
  out.hi = -std::numeric_limits<double>::infinity();
  for (const auto& [r, v] : out.per_rater) {
    s += v;
    out.lo = std::min(out.lo, v);
    out.hi = std::max(out.hi, v);
  }
  out.mean_rho = s / static_cast<double>(out.per_rater.size());
  return out;
}

/// Fleiss' kappa over items rated by exactly the modal number of raters
/// (ties between modes go to the larger count).
inline FleissResult fleiss_kappa(const std::map<std::string, std::vector<std::string>>& ratings,
                                 std::span<const std::string> categories) {
  std::map<std::string, std::size_t> cat_index;
  for (const auto& c : categories) cat_index.emplace(c, cat_index.size());
  std::map<std::size_t, std::size_t> size_freq;
  for (const auto& [item, rs] : ratings) ++size_freq[rs.size()];
  std::size_t m = 0;
  std::size_t best = 0;
  for (const auto& [sz, f] : size_freq) {
    if (f >= best) {
      best = f;
      m = sz;
    }
  }
  if (m < 2) throw StatsError("fleiss kappa needs at least 2 ratings per item");

  FleissResult out;
  out.raters_per_item = m;
  std::vector<double> col_totals(categories.size(), 0.0);
  double p_bar = 0.0;
  std::vector<std::size_t> counts(categories.size());
  for (const auto& [item, rs] : ratings) {
    if (rs.size() != m) {
      ++out.excluded_items;
      continue;
    }
    std::fill(counts.begin(), counts.end(), 0);
    for (const auto& r : rs) {
      auto it = cat_index.find(r);
      if (it == cat_index.end()) throw InputError("unknown category \"" + r + "\" on item " + item);
      ++counts[it->second];
    }
    double agree = 0.0;
    for (std::size_t j = 0; j < counts.size(); ++j) {
      auto c = static_cast<double>(counts[j]);
      agree += c * (c - 1.0);
      col_totals[j] += c;
    }
    p_bar += agree / (static_cast<double>(m) * static_cast<double>(m - 1));
    ++out.n_items;
  }
  if (out.n_items == 0) throw StatsError("fleiss kappa: no items with the modal rating count");
  const double n_items = static_cast<double>(out.n_items);
  p_bar /= n_items;
  double p_e = 0.0;
  for (double t : col_totals) {
    double pj = t / (n_items * static_cast<double>(m));
    p_e += pj * pj;
  }
  if (p_e >= 1.0) {
    out.kappa = 1.0;
    return out;
  }
  out.kappa = (p_bar - p_e) / (1.0 - p_e);
  return out;
}

/// Kappa over raw judgments. UNFILTERED uses all three categories;
/// FILTERED drops not_applicable ratings and uses the remaining two.
inline FleissResult fleiss_kappa(std::span<const RaterJudgment> judgments, Variant variant) {
  std::map<std::string, std::vector<std::string>> items;
  for (const auto& j : judgments) {
    if (variant == Variant::filtered && j.label == Label::not_applicable) continue;
    items[j.exchange_id].emplace_back(to_string(j.label));
  }
  std::vector<std::string> cats;
  if (variant == Variant::unfiltered) cats.emplace_back(to_string(Label::not_applicable));
  cats.emplace_back(to_string(Label::funneling));
  cats.emplace_back(to_string(Label::focusing));
  return fleiss_kappa(items, cats);
}

/// Mean of the present values in each group; groups without values are
/// omitted. Exchanges without a group are ignored.
inline std::map<std::string, double> mean_aggregate(
    const ScoreSeries& series, const std::map<std::string, std::string>& group) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& [id, v] : series.values) {
    if (std::isnan(v)) continue;
    auto g = group.find(id);
    if (g == group.end()) continue;
    auto& slot = acc[g->second];
    slot.first += v;
    ++slot.second;
  }
  std::map<std::string, double> out;
  for (const auto& [g, s] : acc) out.emplace(g, s.first / static_cast<double>(s.second));
  return out;
}

struct NamedColumn {
  std::string name;
  std::vector<double> values;
};

namespace stats {

inline std::vector<double> zscore(std::span<const double> v) {
  double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - m) / sd;
  return out;
}

inline bool has_variance(std::span<const double> v) {
  return std::any_of(v.begin(), v.end(), [&](double x) { return x != v.front(); });
}

}  // namespace stats

/// Standardizes outcome, predictor and controls, fits OLS with an
/// intercept and returns the predictor's coefficient with its two-sided
/// t-test p-value. Rows with any NaN are dropped.
inline RegressionResult ols_standardized(std::span<const double> outcome,
                                         std::span<const double> predictor,
                                         std::span<const NamedColumn> controls = {}) {
  const std::size_t rows = outcome.size();
  if (predictor.size() != rows) throw InvariantError("ols: predictor length mismatch");
  for (const auto& c : controls)
    if (c.values.size() != rows) throw InvariantError("ols: control " + c.name + " length mismatch");

  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < rows; ++i) {
    bool ok = !std::isnan(outcome[i]) && !std::isnan(predictor[i]);
    for (const auto& c : controls) ok = ok && !std::isnan(c.values[i]);
    if (ok) keep.push_back(i);
  }
  auto pick = [&](std::span<const double> v) {
    std::vector<double> out;
    out.reserve(keep.size());
    for (auto i : keep) out.push_back(v[i]);
    return out;
  };

  RegressionResult res;
  res.n = keep.size();
  auto y = pick(outcome);
  auto x = pick(predictor);
  std::vector<NamedColumn> ctl;
  for (const auto& c : controls) {
    auto v = pick(c.values);
    if (v.size() >= 2 && !stats::has_variance(v)) {
      res.warnings.push_back("control " + c.name + " dropped: zero variance");
      continue;
    }
    ctl.push_back({c.name, std::move(v)});
  }
  const std::size_t p = 2 + ctl.size();  // intercept + predictor + controls
  if (res.n <= ctl.size() + 2)
    throw StatsError("ols: need n > number of predictors + 1 (n = " + std::to_string(res.n) + ")");
  if (!stats::has_variance(y)) throw StatsError("ols: outcome has zero variance");
  if (!stats::has_variance(x)) throw StatsError("ols: predictor has zero variance");

  const auto n = static_cast<Eigen::Index>(res.n);
  Eigen::MatrixXd design(n, static_cast<Eigen::Index>(p));
  Eigen::VectorXd target(n);
  auto yz = stats::zscore(y);
  auto xz = stats::zscore(x);
  std::vector<std::string> names = {"intercept", "predictor"};
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = xz[static_cast<std::size_t>(i)];
    target(i) = yz[static_cast<std::size_t>(i)];
  }
  for (std::size_t k = 0; k < ctl.size(); ++k) {
    auto cz = stats::zscore(ctl[k].values);
    for (Eigen::Index i = 0; i < n; ++i)
      design(i, static_cast<Eigen::Index>(k + 2)) = cz[static_cast<std::size_t>(i)];
    names.push_back(ctl[k].name);
    res.controls.push_back(ctl[k].name);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < design.cols()) {
    std::string cols;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < design.cols(); ++k) {
      if (!cols.empty()) cols += ", ";
      cols += names[static_cast<std::size_t>(perm(k))];
    }
    throw StatsError("ols: singular design matrix; collinear column(s): " + cols);
  }
  Eigen::VectorXd coef = qr.solve(target);
  Eigen::VectorXd resid = target - design * coef;
  const double dof = static_cast<double>(res.n) - static_cast<double>(p);
  const double sigma2 = resid.squaredNorm() / dof;
  Eigen::MatrixXd xtx = design.transpose() * design;
  Eigen::MatrixXd cov = xtx.ldlt().solve(Eigen::MatrixXd::Identity(xtx.rows(), xtx.cols()));
  res.beta = coef(1);
  const double se = std::sqrt(std::max(0.0, sigma2 * cov(1, 1)));
  if (se == 0.0 || se < 1e-14 * std::fabs(res.beta)) {
    res.p_value = res.beta == 0.0 ? 1.0 : 0.0;
  } else {
    res.p_value = stats::t_two_sided_p(res.beta / se, dof);
  }
  res.stars = stars_for(res.p_value);
  return res;
}

// ---------------------------------------------------------------------------
// Predictions bridge

inline constexpr std::string_view kPredictionsSchema = "predictions/1";

/// JSON Lines: a header {"schema":"predictions/1","name":...} followed by
/// {"exchange_id":...,"score":...} records.
inline ScoreSeries parse_predictions(std::istream& in, const std::string& source = "<predictions>") {
  ScoreSeries s;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
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
    if (!header) {
      if (!obj.contains("schema") || !obj["schema"].is_string())
        throw InputError(source, lineno, "missing predictions header");
      auto schema = obj["schema"].get<std::string>();
      if (schema != kPredictionsSchema) {
        if (schema.rfind("predictions/", 0) == 0)
          throw InputError(source, lineno,
                           "predictions schema version mismatch: got " + schema + ", expected " +
                               std::string(kPredictionsSchema));
        throw InputError(source, lineno, "not a predictions file (schema " + schema + ")");
      }
      if (!obj.contains("name") || !obj["name"].is_string())
        throw InputError(source, lineno, "predictions header needs a string name");
      s.name = obj["name"].get<std::string>();
      header = true;
      continue;
    }
    if (!obj.contains("exchange_id") || !obj["exchange_id"].is_string())
      throw InputError(source, lineno, "exchange_id must be a string");
    if (!obj.contains("score") || !obj["score"].is_number())
      throw InputError(source, lineno, "score must be numeric");
    auto id = obj["exchange_id"].get<std::string>();
    double v = obj["score"].get<double>();
    if (!std::isfinite(v)) throw InputError(source, lineno, "score must be finite");
    if (!s.values.emplace(id, v).second)
      throw InputError(source, lineno, "duplicate exchange_id " + id);
  }
  if (!header) throw InputError(source + ": missing predictions header");
  return s;
}

inline ScoreSeries load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open predictions file " + path.string());
  return parse_predictions(in, path.string());
}

inline std::string predictions_jsonl(const ScoreSeries& s) {
  nlohmann::json header = {{"schema", kPredictionsSchema}, {"name", s.name}};
  std::string out = header.dump() + "\n";
  for (const auto& [id, v] : s.values) {
    nlohmann::json row = {{"exchange_id", id}, {"score", v}};
    out += row.dump() + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report assembly

struct ReportRow {
  std::string measure;
  std::string target;
  std::string stat;
  double value = kMissing;
  double p_value = kMissing;
  std::size_t n = 0;
  std::string flag;  // significance stars, or a reason when value is NA
};

struct EvaluationReport {
  std::vector<ReportRow> rows;
  std::vector<std::string> warnings;

  std::string to_csv() const {
    std::string out = "measure,target,stat,value,p,n,stars\n";
    for (const auto& r : rows) {
      out += io::csv_field(r.measure) + "," + io::csv_field(r.target) + "," +
             io::csv_field(r.stat) + "," + io::format_double(r.value) + "," +
             io::format_double(r.p_value) + "," + std::to_string(r.n) + "," +
             io::csv_field(r.flag) + "\n";
    }
    return out;
  }

  static EvaluationReport from_csv(std::istream& in, const std::string& source = "<report>") {
    EvaluationReport rep;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
      ++lineno;
      io::strip_cr(line);
      if (line.empty()) continue;
      auto f = io::split_csv(line);
      if (!header) {
        if (f != std::vector<std::string>{"measure", "target", "stat", "value", "p", "n", "stars"})
          throw InputError(source, lineno, "expected report header");
        header = true;
        continue;
      }
      if (f.size() != 7) throw InputError(source, lineno, "expected 7 fields");
      ReportRow r{f[0], f[1], f[2], kMissing, kMissing, 0, f[6]};
      if (f[3] != "NA") {
        auto v = io::parse_double(f[3]);
        if (!v) throw InputError(source, lineno, "bad value");
        r.value = *v;
      }
      if (f[4] != "NA") {
        auto v = io::parse_double(f[4]);
        if (!v) throw InputError(source, lineno, "bad p");
        r.p_value = *v;
      }
      auto n = io::parse_int(f[5]);
      if (!n || *n < 0) throw InputError(source, lineno, "bad n");
      r.n = static_cast<std::size_t>(*n);
      rep.rows.push_back(std::move(r));
    }
    return rep;
  }

  /// Aligned plain-text table with three decimals.
  std::string to_text() const {
    std::vector<std::array<std::string, 6>> cells;
    cells.push_back({"measure", "target", "stat", "value", "p", "n"});
    for (const auto& r : rows) {
      std::string v = io::format_fixed(r.value, 3) + r.flag;
      if (std::isnan(r.value) && !r.flag.empty()) v = "NA (" + r.flag + ")";
      cells.push_back({r.measure, r.target, r.stat, v, io::format_sci(r.p_value, 2),
                       std::to_string(r.n)});
    }
    std::array<std::size_t, 6> width{};
    auto display_width = [](const std::string& s) {
      std::size_t w = 0;
      for (unsigned char c : s) w += (c & 0xC0) != 0x80;  // count code points
      return w;
    };
    for (const auto& row : cells)
      for (std::size_t k = 0; k < row.size(); ++k) width[k] = std::max(width[k], display_width(row[k]));
    std::string out;
    for (const auto& row : cells) {
      std::string line;
      for (std::size_t k = 0; k < row.size(); ++k) {
        if (k) line += "  ";
        line += row[k];
        if (k + 1 < row.size()) line.append(width[k] - display_width(row[k]), ' ');
      }
      out += line + "\n";
    }
    return out;
  }
};

struct EvaluationInputs {
  ScoreSeries gold;
  std::vector<ScoreSeries> measures;
  const Corpus* corpus = nullptr;  // outcomes, grouping and exchange counts
  std::optional<IrrResult> irr;
  std::optional<FleissResult> kappa;
  SpearmanOptions spearman_opts;
};

/// Per measure: Spearman against gold, then transcript-level standardized
/// OLS against each observation outcome (exchange count as control), then
/// the teacher-level association with value-added.
inline EvaluationReport evaluate(const EvaluationInputs& in) {
  EvaluationReport rep;

  std::map<std::string, std::string> ex_transcript;
  std::map<std::string, std::string> ex_teacher;
  std::map<std::string, double> teacher_va;
  std::vector<const TranscriptMeta*> metas;
  if (in.corpus) {
    for (const auto& t : in.corpus->transcripts()) {
      metas.push_back(&t.meta);
      for (std::size_t i = 1; i < t.turns.size(); ++i) {
        if (t.turns[i - 1].role != SpeakerRole::student || t.turns[i].role != SpeakerRole::teacher)
          continue;
        auto id = make_exchange_id(t.meta.transcript_id, t.turns[i].turn_index);
        ex_transcript.emplace(id, t.meta.transcript_id);
        if (!t.meta.teacher_id.empty()) ex_teacher.emplace(id, t.meta.teacher_id);
      }
      if (t.meta.value_added && !t.meta.teacher_id.empty()) {
        auto [it, inserted] = teacher_va.emplace(t.meta.teacher_id, *t.meta.value_added);
        if (!inserted && std::fabs(it->second - *t.meta.value_added) > 1e-12)
          throw InputError("conflicting value_added for teacher " + t.meta.teacher_id);
      }
    }
  }

  auto na_row = [](std::string m, std::string t, std::string s, std::size_t n, std::string why) {
    return ReportRow{std::move(m), std::move(t), std::move(s), kMissing, kMissing, n, std::move(why)};
  };

  struct Outcome {
    const char* name;
    std::optional<int> TranscriptMeta::*field;
  };
  const Outcome outcomes[] = {{"mqi5", &TranscriptMeta::mqi5},
                              {"participation", &TranscriptMeta::participation},
                              {"explanations", &TranscriptMeta::explanations}};

  for (const auto& m : in.measures) {
    // agreement with gold
    std::size_t overlap = 0;
    for (const auto& [id, v] : m.values)
      if (in.gold.values.contains(id) && !std::isnan(v)) ++overlap;
    if (overlap < 3) {
      rep.rows.push_back(na_row(m.name, in.gold.name, "spearman", overlap, "insufficient n"));
    } else {
      try {
        auto c = spearman(m, in.gold, in.spearman_opts);
        rep.rows.push_back({m.name, in.gold.name, "spearman", c.rho, c.p_value, c.n,
                            std::string(to_string(c.stars))});
      } catch (const StatsError& e) {
        rep.rows.push_back(na_row(m.name, in.gold.name, "spearman", overlap, "undefined"));
        rep.warnings.push_back(m.name + " vs gold: " + e.what());
      }
    }
    if (!in.corpus) continue;

    auto per_transcript = mean_aggregate(m, ex_transcript);
    for (const auto& oc : outcomes) {
      std::vector<double> y;
      std::vector<double> x;
      NamedColumn ctl{"n_exchanges", {}};
      for (const auto* meta : metas) {
        auto it = per_transcript.find(meta->transcript_id);
        const auto& val = meta->*(oc.field);
        if (it == per_transcript.end() || !val) continue;
        y.push_back(static_cast<double>(*val));
        x.push_back(it->second);
        ctl.values.push_back(static_cast<double>(meta->n_exchanges));
      }
      const std::string target = std::string(oc.name) + " (transcript)";
      try {
        auto r = ols_standardized(y, x, std::span<const NamedColumn>(&ctl, 1));
        rep.rows.push_back({m.name, target, "beta", r.beta, r.p_value, r.n,
                            std::string(to_string(r.stars))});
        for (const auto& w : r.warnings) rep.warnings.push_back(m.name + " / " + target + ": " + w);
      } catch (const StatsError& e) {
        rep.rows.push_back(na_row(m.name, target, "beta", y.size(),
                                  y.size() < 4 ? "insufficient n" : "undefined"));
        rep.warnings.push_back(m.name + " / " + target + ": " + e.what());
      }
    }

    auto per_teacher = mean_aggregate(m, ex_teacher);
    std::vector<double> y;
    std::vector<double> x;
    for (const auto& [teacher, va] : teacher_va) {
      auto it = per_teacher.find(teacher);
      if (it == per_teacher.end()) continue;
      y.push_back(va);
      x.push_back(it->second);
    }
    const std::string target = "value_added (teacher)";
    try {
      auto r = ols_standardized(y, x);
      rep.rows.push_back(
          {m.name, target, "beta", r.beta, r.p_value, r.n, std::string(to_string(r.stars))});
    } catch (const StatsError& e) {
      rep.rows.push_back(
          na_row(m.name, target, "beta", y.size(), y.size() < 3 ? "insufficient n" : "undefined"));
      rep.warnings.push_back(m.name + " / " + target + ": " + e.what());
    }
  }

  if (in.irr) {
    const auto n = in.irr->per_rater.size();
    rep.rows.push_back({"interrater", in.gold.name, "leave_out_rho", in.irr->mean_rho, kMissing, n, ""});
    rep.rows.push_back({"interrater", in.gold.name, "leave_out_lo", in.irr->lo, kMissing, n, ""});
    rep.rows.push_back({"interrater", in.gold.name, "leave_out_hi", in.irr->hi, kMissing, n, ""});
    for (const auto& w : in.irr->warnings) rep.warnings.push_back("interrater: " + w);
  }
  if (in.kappa) {
    rep.rows.push_back(
        {"interrater", in.gold.name, "fleiss_kappa", in.kappa->kappa, kMissing, in.kappa->n_items, ""});
  }
  return rep;
}

}  // namespace funfoc
