#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "funfoc/eval_stats.hpp"
#include "funfoc/synth.hpp"
#include "oracles.hpp"

using namespace funfoc;

namespace {

std::vector<double> increasing_transform(const std::vector<double>& v) {
  std::vector<double> out;
  for (double x : v) out.push_back(std::exp(x / 4.0) * 3.0 - 1.0);
  return out;
}

std::vector<double> negated(std::vector<double> v) {
  for (auto& x : v) x = -x;
  return v;
}

}  // namespace

TEST(Spearman, ContractExamples) {
  std::vector<double> x = {1, 2, 3};
  EXPECT_EQ(spearman(x, std::vector<double>{10, 20, 30}).rho, 1.0);
  EXPECT_EQ(spearman(x, std::vector<double>{10, 20, 30}).p_value, 0.0);
  EXPECT_EQ(spearman(x, std::vector<double>{3, 2, 1}).rho, -1.0);
  std::vector<double> tx = {1, 1, 2, 3};
  std::vector<double> ty = {2, 1, 4, 3};
  EXPECT_NEAR(spearman(tx, ty).rho, oracle::spearman(tx, ty), 1e-12);
  EXPECT_NEAR(spearman(tx, ty).rho, 0.7378647873726218, 1e-12);
}

TEST(Spearman, AverageRanks) {
  std::vector<double> v = {3, 1, 3, 2, 3};
  EXPECT_EQ(stats::average_ranks(v), (std::vector<double>{4, 1, 4, 2, 4}));
}

TEST(Spearman, Errors) {
  EXPECT_THROW(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}), StatsError);
  EXPECT_THROW(spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), StatsError);
  EXPECT_THROW(spearman(std::vector<double>{1, 2, 3, kMissing}, std::vector<double>{1, kMissing, 3, 4}),
               StatsError);
  EXPECT_THROW(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2}), InvariantError);
}

TEST(Spearman, DropsIncompletePairs) {
  std::vector<double> x = {1, 2, kMissing, 4, 5};
  std::vector<double> y = {2, 1, 9, 4, kMissing};
  auto r = spearman(x, y);
  EXPECT_EQ(r.n, 3u);
  EXPECT_NEAR(r.rho, oracle::spearman({1, 2, 4}, {2, 1, 4}), 1e-15);
}

TEST(Spearman, PValueFromStudentT) {
  // rho = 0.5, n = 12: t = 0.5 * sqrt(10 / 0.75)
  std::vector<double> x(12);
  for (int i = 0; i < 12; ++i) x[i] = i;
  std::vector<double> y = {2, 0, 1, 5, 3, 4, 8, 6, 7, 11, 9, 10};
  auto r = spearman(x, y);
  double t = r.rho * std::sqrt(10.0 / (1.0 - r.rho * r.rho));
  boost::math::students_t dist(10.0);
  EXPECT_NEAR(r.p_value, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))), 1e-15);
  EXPECT_GT(r.p_value, 0.0);
  EXPECT_LT(r.p_value, 0.001);
}

TEST(Spearman, ExactPermutationPValue) {
  std::vector<double> x = {1, 2, 3, 4};
  std::vector<double> y = {1, 2, 3, 4};
  auto r = spearman(x, y, {.exact_p = true});
  EXPECT_NEAR(r.p_value, 2.0 / 24.0, 1e-15);
  std::vector<double> big(11);
  for (int i = 0; i < 11; ++i) big[i] = i;
  auto approx = spearman(big, big, {.exact_p = true});
  EXPECT_EQ(approx.p_value, 0.0);  // n > 10 falls back to the t approximation
}

TEST(Spearman, MatchesCountingOracleOnTiedVectors) {
  oracle::Rng rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 3 + rng.index(200);
    auto x = oracle::tied_vector(rng, n);
    auto y = oracle::tied_vector(rng, n);
    double want;
    try {
      auto rx = oracle::count_ranks(x);
      auto ry = oracle::count_ranks(y);
      if (std::all_of(rx.begin(), rx.end(), [&](long double r) { return r == rx[0]; }) ||
          std::all_of(ry.begin(), ry.end(), [&](long double r) { return r == ry[0]; })) {
        EXPECT_THROW(spearman(x, y), StatsError);
        continue;
      }
      want = oracle::spearman(x, y);
    } catch (...) {
      FAIL();
    }
    EXPECT_NEAR(spearman(x, y).rho, want, 1e-12) << "trial " << trial;
  }
}

TEST(Spearman, Invariances) {
  oracle::Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 5 + rng.index(60);
    auto x = oracle::tied_vector(rng, n);
    auto y = oracle::tied_vector(rng, n);
    if (!stats::has_variance(x) || !stats::has_variance(y)) continue;
    const double r = spearman(x, y).rho;
    EXPECT_NEAR(spearman(increasing_transform(x), y).rho, r, 1e-12);
    EXPECT_NEAR(spearman(x, increasing_transform(y)).rho, r, 1e-12);
    EXPECT_NEAR(spearman(y, x).rho, r, 1e-12);
    EXPECT_NEAR(spearman(negated(x), y).rho, -r, 1e-12);
    EXPECT_GE(r, -1.0);
    EXPECT_LE(r, 1.0);
  }
}

TEST(Stars, Thresholds) {
  EXPECT_EQ(stars_for(0.0005), Stars::three);
  EXPECT_EQ(stars_for(0.001), Stars::two);
  EXPECT_EQ(stars_for(0.005), Stars::two);
  EXPECT_EQ(stars_for(0.01), Stars::one);
  EXPECT_EQ(stars_for(0.049), Stars::one);
  EXPECT_EQ(stars_for(0.05), Stars::dagger);
  EXPECT_EQ(stars_for(0.099), Stars::dagger);
  EXPECT_EQ(stars_for(0.1), Stars::none);
  EXPECT_EQ(stars_for(0.7), Stars::none);
  EXPECT_EQ(stars_for(kMissing), Stars::none);
  EXPECT_EQ(to_string(Stars::three), "***");
  EXPECT_EQ(to_string(Stars::dagger), "\xE2\x80\xA0");
}

TEST(Stars, PureFunctionOfP) {
  oracle::Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    double p = rng.uniform(0.0, 0.2);
    Stars want = p < 0.001 ? Stars::three : p < 0.01 ? Stars::two : p < 0.05 ? Stars::one
               : p < 0.1   ? Stars::dagger : Stars::none;
    EXPECT_EQ(stars_for(p), want);
  }
}

TEST(LeaveOutIrr, IdenticalRatersGiveOne) {
  std::map<std::string, std::map<std::string, double>> z;
  for (int i = 0; i < 5; ++i) {
    z["r1"]["e" + std::to_string(i)] = i * 0.5 - 1.0;
    z["r2"]["e" + std::to_string(i)] = i * 0.5 - 1.0;
  }
  auto r = leave_out_irr(z);
  EXPECT_EQ(r.mean_rho, 1.0);
  EXPECT_EQ(r.lo, 1.0);
  EXPECT_EQ(r.hi, 1.0);
}

TEST(LeaveOutIrr, AntiCorrelatedRaterIsNegative) {
  std::map<std::string, std::map<std::string, double>> z;
  std::vector<double> base = {0.1, -1.2, 0.7, 2.0, -0.3, 0.9};
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto id = "e" + std::to_string(i);
    z["a"][id] = base[i];
    z["b"][id] = base[i] * 1.1 + 0.01;
    z["c"][id] = -0.8 * base[i];
  }
  auto r = leave_out_irr(z);
  // brute force: c against mean(a, b)
  std::vector<double> own;
  std::vector<double> others;
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto id = "e" + std::to_string(i);
    own.push_back(z["c"][id]);
    others.push_back((z["a"][id] + z["b"][id]) / 2.0);
  }
  EXPECT_NEAR(r.per_rater.at("c"), oracle::spearman(own, others), 1e-12);
  EXPECT_LT(r.per_rater.at("c"), 0.0);
  EXPECT_EQ(r.lo, r.per_rater.at("c"));
  EXPECT_NEAR(r.mean_rho, (r.per_rater.at("a") + r.per_rater.at("b") + r.per_rater.at("c")) / 3.0, 1e-15);
}

TEST(LeaveOutIrr, SparseRaterSkippedWithWarning) {
  std::map<std::string, std::map<std::string, double>> z;
  for (int i = 0; i < 6; ++i) {
    z["a"]["e" + std::to_string(i)] = i;
    z["b"]["e" + std::to_string(i)] = i % 3;
  }
  z["c"]["e0"] = 1.0;
  z["c"]["e1"] = -1.0;
  auto r = leave_out_irr(z);
  EXPECT_FALSE(r.per_rater.contains("c"));
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("rater c"), std::string::npos);
  std::map<std::string, std::map<std::string, double>> lonely = {{"x", {{"e0", 1.0}}}};
  EXPECT_THROW(leave_out_irr(lonely), StatsError);
}

TEST(Fleiss, ContractExamples) {
  std::vector<std::string> cats = {"A", "B", "C"};
  std::map<std::string, std::vector<std::string>> perfect = {
      {"i1", {"A", "A", "A"}}, {"i2", {"B", "B", "B"}}, {"i3", {"C", "C", "C"}}};
  EXPECT_EQ(fleiss_kappa(perfect, cats).kappa, 1.0);

  std::map<std::string, std::vector<std::string>> hand = {{"i1", {"A", "A"}}, {"i2", {"A", "B"}}};
  EXPECT_NEAR(fleiss_kappa(hand, cats).kappa, -1.0 / 3.0, 1e-15);

  std::map<std::string, std::vector<std::string>> one_cat = {{"i1", {"A", "A"}}, {"i2", {"A", "A"}}};
  EXPECT_EQ(fleiss_kappa(one_cat, cats).kappa, 1.0);
}

TEST(Fleiss, RandomRatingsNearZero) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    oracle::Rng rng(seed);
    std::vector<std::string> cats = {"A", "B", "C"};
    std::map<std::string, std::vector<std::string>> items;
    for (int i = 0; i < 1000; ++i)
      for (int r = 0; r < 3; ++r) items["i" + std::to_string(i)].push_back(cats[rng.index(3)]);
    EXPECT_LT(std::fabs(fleiss_kappa(items, cats).kappa), 0.05) << seed;
  }
}

TEST(Fleiss, ModalRaterCountAndRelabeling) {
  oracle::Rng rng(9);
  std::vector<std::string> cats = {"A", "B", "C"};
  std::map<std::string, std::vector<std::string>> items;
  for (int i = 0; i < 200; ++i) {
    int base = static_cast<int>(rng.index(3));
    std::size_t m = i % 10 == 0 ? 2 : 3;
    for (std::size_t r = 0; r < m; ++r)
      items["i" + std::to_string(i)].push_back(cats[rng.coin(0.7) ? base : rng.index(3)]);
  }
  auto k = fleiss_kappa(items, cats);
  EXPECT_EQ(k.raters_per_item, 3u);
  EXPECT_EQ(k.excluded_items, 20u);
  EXPECT_EQ(k.n_items, 180u);

  std::map<std::string, std::string> relabel = {{"A", "C"}, {"B", "A"}, {"C", "B"}};
  auto moved = items;
  for (auto& [id, rs] : moved)
    for (auto& r : rs) r = relabel[r];
  EXPECT_NEAR(fleiss_kappa(moved, cats).kappa, k.kappa, 1e-12);

  std::map<std::string, std::vector<std::string>> unknown = {{"i", {"A", "Z"}}};
  EXPECT_THROW(fleiss_kappa(unknown, cats), InputError);
  std::map<std::string, std::vector<std::string>> single = {{"i", {"A"}}};
  EXPECT_THROW(fleiss_kappa(single, cats), StatsError);
}

TEST(Fleiss, VariantsOnJudgments) {
  std::vector<RaterJudgment> js = {{"r1", "e1", Label::focusing},       {"r2", "e1", Label::focusing},
                                   {"r1", "e2", Label::funneling},      {"r2", "e2", Label::funneling},
                                   {"r1", "e3", Label::not_applicable}, {"r2", "e3", Label::not_applicable}};
  EXPECT_EQ(fleiss_kappa(js, Variant::unfiltered).kappa, 1.0);
  auto f = fleiss_kappa(js, Variant::filtered);
  EXPECT_EQ(f.kappa, 1.0);
  EXPECT_EQ(f.n_items, 2u);
}

TEST(MeanAggregate, Examples) {
  ScoreSeries s{"m", {{"a", 0.2}, {"b", 0.4}, {"c", 1.0}, {"d", kMissing}, {"x", 5.0}}};
  std::map<std::string, std::string> g = {{"a", "g1"}, {"b", "g1"}, {"c", "g2"}, {"d", "g3"}};
  auto out = mean_aggregate(s, g);
  EXPECT_NEAR(out.at("g1"), 0.3, 1e-15);
  EXPECT_EQ(out.at("g2"), 1.0);
  EXPECT_FALSE(out.contains("g3"));
  EXPECT_EQ(out.size(), 2u);
  std::map<std::string, std::string> ident = {{"a", "a"}, {"b", "b"}, {"c", "c"}};
  auto id = mean_aggregate(s, ident);
  for (const auto& [k, v] : id) EXPECT_EQ(v, s.values.at(k));
}

TEST(Ols, PerfectLinearRelation) {
  std::vector<double> x;
  std::vector<double> y;
  for (int i = 0; i < 20; ++i) {
    x.push_back(i * 0.37 - 2.0 + (i % 3));
    y.push_back(2.0 * x.back() + 3.0);
  }
  auto r = ols_standardized(y, x);
  EXPECT_NEAR(r.beta, 1.0, 1e-12);
  EXPECT_LT(r.p_value, 0.001);
  EXPECT_EQ(r.stars, Stars::three);
  EXPECT_EQ(r.n, 20u);
}

TEST(Ols, MatchesNormalEquationsWithControls) {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    oracle::Rng rng(seed);
    const std::size_t n = 10 + rng.index(100);
    const std::size_t k = rng.index(3);
    std::vector<double> x(n);
    std::vector<double> y(n);
    std::vector<std::vector<double>> cs(k, std::vector<double>(n));
    std::vector<NamedColumn> controls;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = 0.5 * x[i] + rng.normal();
      for (auto& c : cs) {
        c[i] = rng.normal() + 0.3 * x[i];
        y[i] += 0.2 * c[i];
      }
    }
    for (std::size_t j = 0; j < k; ++j) controls.push_back({"c" + std::to_string(j), cs[j]});
    std::vector<std::vector<double>> preds = {x};
    preds.insert(preds.end(), cs.begin(), cs.end());
    auto want = oracle::normal_equations(y, preds);
    auto got = ols_standardized(y, x, controls);
    EXPECT_NEAR(got.beta, want[1], 1e-9) << seed;
    EXPECT_EQ(got.controls.size(), k);
  }
}

TEST(Ols, NoControlsEqualsPearson) {
  oracle::Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 5 + rng.index(80);
    std::vector<double> x(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = rng.uniform(-1, 1) * x[i] + rng.normal();
    }
    auto r = ols_standardized(y, x);
    EXPECT_NEAR(r.beta, oracle::pearson(x, y), 1e-9);
    EXPECT_LE(std::fabs(r.beta), 1.0 + 1e-9);
  }
}

TEST(Ols, IndependentDataRarelySignificant) {
  int ok = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    oracle::Rng rng(seed);
    std::vector<double> x(200);
    std::vector<double> y(200);
    for (std::size_t i = 0; i < 200; ++i) {
      x[i] = rng.normal();
      y[i] = rng.normal();
    }
    auto r = ols_standardized(y, x);
    ok += std::fabs(r.beta) < 0.2 && r.p_value > 0.001;
  }
  EXPECT_GE(ok, 95);
}

TEST(Ols, ControlOrthogonalToPredictor) {
  // y = x + c with c orthogonal to x: the partial coefficient equals the
  // normal-equation solution
  std::vector<double> x = {-3, -1, 1, 3, -3, -1, 1, 3};
  std::vector<double> c = {1, -1, -1, 1, 1, -1, -1, 1};
  std::vector<double> y(8);
  for (int i = 0; i < 8; ++i) y[i] = x[i] + c[i] + (i == 2 ? 0.3 : 0.0);
  std::vector<NamedColumn> ctl = {{"c", c}};
  auto want = oracle::normal_equations(y, {x, c});
  EXPECT_NEAR(ols_standardized(y, x, ctl).beta, want[1], 1e-9);
}

TEST(Ols, ErrorsAndDegenerateControls) {
  std::vector<double> x = {1, 2, 3, 4, 5};
  std::vector<double> y = {2, 1, 4, 3, 5};
  std::vector<NamedColumn> dup = {{"copy", {2, 4, 6, 8, 10}}};
  try {
    ols_standardized(y, x, dup);
    FAIL();
  } catch (const StatsError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("collinear"), std::string::npos);
    EXPECT_TRUE(msg.find("copy") != std::string::npos || msg.find("predictor") != std::string::npos) << msg;
  }
  std::vector<NamedColumn> flat = {{"flat", {1, 1, 1, 1, 1}}};
  auto r = ols_standardized(y, x, flat);
  EXPECT_TRUE(r.controls.empty());
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NEAR(r.beta, oracle::pearson(x, y), 1e-12);

  EXPECT_THROW(ols_standardized(std::vector<double>{1, 2}, std::vector<double>{1, 2}), StatsError);
  EXPECT_THROW(ols_standardized(std::vector<double>{1, 1, 1, 1}, std::vector<double>{1, 2, 3, 4}), StatsError);
  EXPECT_THROW(ols_standardized(std::vector<double>{1, 2, 3, 4}, std::vector<double>{2, 2, 2, 2}), StatsError);

  std::vector<double> xm = {1, 2, kMissing, 4, 5, 6};
  std::vector<double> ym = {1, 3, 2, kMissing, 4, 6};
  EXPECT_EQ(ols_standardized(ym, xm).n, 4u);
}

TEST(Predictions, ParseExamples) {
  std::istringstream empty("{\"schema\":\"predictions/1\",\"name\":\"roberta\"}\n");
  auto e = parse_predictions(empty);
  EXPECT_EQ(e.name, "roberta");
  EXPECT_TRUE(e.values.empty());

  std::istringstream three(
      "{\"schema\":\"predictions/1\",\"name\":\"m\"}\n{\"exchange_id\":\"a\",\"score\":0.5}\r\n"
      "\n{\"exchange_id\":\"b\",\"score\":-1}\n{\"exchange_id\":\"c\",\"score\":2e-3}\n");
  auto s = parse_predictions(three);
  ASSERT_EQ(s.values.size(), 3u);
  EXPECT_EQ(s.values.at("b"), -1.0);
  EXPECT_EQ(s.values.at("c"), 0.002);

  std::istringstream back(predictions_jsonl(s));
  auto rt = parse_predictions(back);
  EXPECT_EQ(rt.values, s.values);
  EXPECT_EQ(rt.name, s.name);
}

TEST(Predictions, Errors) {
  auto fails = [](const std::string& body, const std::string& needle) {
    std::istringstream in(body);
    try {
      parse_predictions(in, "p.jsonl");
    } catch (const InputError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
      return;
    }
    ADD_FAILURE() << "no error for " << body;
  };
  const std::string h = "{\"schema\":\"predictions/1\",\"name\":\"m\"}\n";
  fails(h + "{\"exchange_id\":\"dup\",\"score\":1}\n{\"exchange_id\":\"dup\",\"score\":2}\n", "dup");
  fails(h + "{\"exchange_id\":\"a\",\"score\":\"high\"}\n", "numeric");
  fails(h + "{\"exchange_id\":\"a\",\"score\":null}\n", "numeric");
  fails("{\"schema\":\"predictions/2\",\"name\":\"m\"}\n", "version mismatch");
  fails("{\"exchange_id\":\"a\",\"score\":1}\n", "header");
  fails("", "header");
  fails(h + "{not json\n", "p.jsonl:2");
  fails(h + "{\"exchange_id\":3,\"score\":1}\n", "exchange_id");
  EXPECT_THROW(load_predictions("/nonexistent/p.jsonl"), InputError);
}

TEST(Report, CsvRoundTripAndText) {
  EvaluationReport rep;
  rep.rows.push_back({"forwards_range", "gold_unfiltered", "spearman", 0.1234567, 0.0004, 2348, "***"});
  rep.rows.push_back({"who", "gold, \"quoted\"", "spearman", kMissing, kMissing, 2, "insufficient n"});
  std::istringstream in(rep.to_csv());
  auto back = EvaluationReport::from_csv(in);
  EXPECT_EQ(back.to_csv(), rep.to_csv());
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_TRUE(std::isnan(back.rows[1].value));
  auto text = rep.to_text();
  EXPECT_NE(text.find("0.123***"), std::string::npos) << text;
  EXPECT_NE(text.find("NA (insufficient n)"), std::string::npos) << text;
  std::istringstream bad("measure,target\n");
  EXPECT_THROW(EvaluationReport::from_csv(bad), InputError);
}

namespace {

struct Fixture {
  SynthCorpus synth;
  ScoreSeries gold;
};

Fixture fixture() {
  SynthOptions opt;
  opt.n_exchanges = 400;
  opt.seed = 5;
  Fixture f{generate_synthetic(opt), {}};
  f.gold.name = "gold_unfiltered";
  for (const auto& g : aggregate_gold(f.synth.judgments, Variant::unfiltered))
    f.gold.values[g.exchange_id] = g.score;
  return f;
}

const ReportRow* find(const EvaluationReport& r, std::string_view measure, std::string_view target,
                      std::string_view stat = "") {
  for (const auto& row : r.rows)
    if (row.measure == measure && row.target.rfind(target, 0) == 0 && (stat.empty() || row.stat == stat))
      return &row;
  return nullptr;
}

}  // namespace

TEST(Evaluate, GoldAsMeasure) {
  auto f = fixture();
  ScoreSeries same = f.gold;
  same.name = "same";
  ScoreSeries neg = f.gold;
  neg.name = "neg";
  for (auto& [k, v] : neg.values) v = -v;
  EvaluationInputs in{f.gold, {same, neg}, &f.synth.corpus, std::nullopt, std::nullopt, {}};
  auto rep = evaluate(in);
  EXPECT_NEAR(find(rep, "same", "gold", "spearman")->value, 1.0, 1e-12);
  EXPECT_NEAR(find(rep, "neg", "gold", "spearman")->value, -1.0, 1e-12);
  ASSERT_NE(find(rep, "same", "mqi5"), nullptr);
  ASSERT_NE(find(rep, "same", "participation"), nullptr);
  ASSERT_NE(find(rep, "same", "explanations"), nullptr);
  const auto* va = find(rep, "same", "value_added");
  ASSERT_NE(va, nullptr);
  EXPECT_EQ(va->n, (f.synth.corpus.transcripts().size() + 2) / 3);
  // explanations is missing for some transcripts: pairwise deletion
  EXPECT_LT(find(rep, "same", "explanations")->n, find(rep, "same", "mqi5")->n);
  EXPECT_EQ(evaluate(in).to_csv(), rep.to_csv());
}

TEST(Evaluate, InsufficientOverlap) {
  auto f = fixture();
  ScoreSeries tiny{"tiny", {}};
  auto it = f.gold.values.begin();
  tiny.values[it->first] = 1.0;
  tiny.values[(++it)->first] = 2.0;
  EvaluationInputs in{f.gold, {tiny}, nullptr, std::nullopt, std::nullopt, {}};
  auto rep = evaluate(in);
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_EQ(rep.rows[0].flag, "insufficient n");
  EXPECT_EQ(rep.rows[0].n, 2u);
  EXPECT_TRUE(std::isnan(rep.rows[0].value));
}

TEST(Evaluate, WithinGroupOrderDoesNotMatter) {
  auto f = fixture();
  ScoreSeries m{"m", {}};
  oracle::Rng rng(1);
  for (const auto& [id, v] : f.gold.values) m.values[id] = v + rng.normal();
  // same multiset of values per transcript, permuted within each transcript
  std::map<std::string, std::vector<std::string>> by_tr;
  for (const auto& ex : extract_exchanges(f.synth.corpus))
    if (m.values.contains(ex.exchange_id)) by_tr[ex.transcript_id].push_back(ex.exchange_id);
  ScoreSeries p{"m", {}};
  for (auto& [tr, ids] : by_tr) {
    auto perm = ids;
    std::shuffle(perm.begin(), perm.end(), rng.eng);
    for (std::size_t i = 0; i < ids.size(); ++i) p.values[ids[i]] = m.values.at(perm[i]);
  }
  EvaluationInputs a{f.gold, {m}, &f.synth.corpus, std::nullopt, std::nullopt, {}};
  EvaluationInputs b{f.gold, {p}, &f.synth.corpus, std::nullopt, std::nullopt, {}};
  auto ra = evaluate(a);
  auto rb = evaluate(b);
  for (std::size_t i = 1; i < ra.rows.size(); ++i) {
    EXPECT_NEAR(ra.rows[i].value, rb.rows[i].value, 1e-12) << ra.rows[i].target;
    EXPECT_EQ(ra.rows[i].n, rb.rows[i].n);
  }
}

TEST(Evaluate, InterraterRows) {
  auto f = fixture();
  auto irr = leave_out_irr(zscores_by_rater(f.synth.judgments, Variant::unfiltered));
  auto kappa = fleiss_kappa(f.synth.judgments, Variant::unfiltered);
  EvaluationInputs in{f.gold, {}, nullptr, irr, kappa, {}};
  auto rep = evaluate(in);
  ASSERT_EQ(rep.rows.size(), 4u);
  EXPECT_EQ(rep.rows[0].stat, "leave_out_rho");
  EXPECT_EQ(rep.rows[0].value, irr.mean_rho);
  EXPECT_EQ(rep.rows[1].value, irr.lo);
  EXPECT_EQ(rep.rows[2].value, irr.hi);
  EXPECT_EQ(rep.rows[3].stat, "fleiss_kappa");
  EXPECT_GT(kappa.kappa, 0.5);
  EXPECT_GT(irr.mean_rho, 0.5);
}
