#pragma once

// Pipeline fixtures shared by the unit tests and the acceptance binary.

#include <map>
#include <string>
#include <vector>

#include "funfoc/funfoc.hpp"
#include "test_util.hpp"

namespace fixture {

struct Directional {
  double rho = 0.0;
  std::size_t n = 0;
  std::size_t covered = 0;
  double mean_focusing = 0.0;
  double mean_funneling = 0.0;
};

/// Writes a synthetic corpus, fits and scores it through the pipeline, then
/// correlates each exchange's forwards-range score with its true style
/// (focusing 1, funneling 0; off-task exchanges left out).
inline Directional directional(std::uint64_t seed, std::size_t n_exchanges, std::size_t templates) {
  testutil::TempDir dir;
  funfoc::RunConfig cfg;
  cfg.out_dir = dir.path();
  cfg.seed = seed;
  cfg.synth.n_exchanges = n_exchanges;
  cfg.synth.focus_templates = templates;
  cfg.phrase_min_count = 20;
  funfoc::run_synth(cfg);
  funfoc::run_fit(cfg);
  auto table = funfoc::run_score(cfg);

  std::map<std::string, funfoc::Style> truth;
  {
    std::ifstream in(dir / "truth.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      auto f = funfoc::io::split_csv(line);
      truth[f[0]] = f[1] == "focusing" ? funfoc::Style::focusing
                    : f[1] == "funneling" ? funfoc::Style::funneling
                                          : funfoc::Style::not_applicable;
    }
  }
  std::vector<double> score;
  std::vector<double> style;
  Directional out;
  double sf = 0, sn = 0;
  std::size_t nf = 0, nn = 0;
  for (std::size_t i = 0; i < table.exchange_ids.size(); ++i) {
    auto s = truth.at(table.exchange_ids[i]);
    if (s == funfoc::Style::not_applicable) continue;
    const double v = table.values[i][0];
    score.push_back(v);
    style.push_back(s == funfoc::Style::focusing ? 1.0 : 0.0);
    out.covered += table.covered[i];
    if (s == funfoc::Style::focusing) sf += v, ++nf;
    else sn += v, ++nn;
  }
  out.n = score.size();
  out.rho = funfoc::spearman(score, style).rho;
  out.mean_focusing = nf ? sf / static_cast<double>(nf) : 0.0;
  out.mean_funneling = nn ? sn / static_cast<double>(nn) : 0.0;
  return out;
}

}  // namespace fixture
