// Scratch calibration driver (not installed): prints study metrics for the
// canonical designs so defaults can be tuned.
#include "gcwm/simgen.hpp"

#include <chrono>
#include <cstdio>

using namespace gcwm;

int main(int argc, char** argv) {
  std::string mode = argc > 1 ? argv[1] : "zip";
  int runs = argc > 2 ? std::atoi(argv[2]) : 5;
  int npc = argc > 3 ? std::atoi(argv[3]) : 0;
  int restarts = argc > 4 ? std::atoi(argv[4]) : 4;

  auto t0 = std::chrono::steady_clock::now();
  StudyOptions opt;
  opt.n_runs = runs;
  opt.seed = 20240817;
  opt.fit.random_starts = restarts;

  double sdscale = argc > 5 ? std::atof(argv[5]) : 1.0;

  SimDesign zipd =
      mode == "part" ? zip_comparison_design() : zip_study_design();
  if (npc > 0) zipd.n_per_component = npc;
  if (sdscale != 1.0)
    for (auto& comp : zipd.components)
      for (auto& cov : comp.covariates) cov.scale *= sdscale;

  if (mode == "zip") {
    auto rep = run_zip_classification_study(zipd, ZipCondition::normal, opt);
    std::printf("runs=%d failures=%d\n", rep.runs, rep.failures);
    std::printf("misclass mean=%.4f median=%.4f sd=%.4f\n",
                mean_of(rep.misclassification),
                median_of(rep.misclassification),
                sd_of(rep.misclassification));
    std::printf("purity   mean=%.4f median=%.4f\n", mean_of(rep.purity),
                median_of(rep.purity));
    std::printf("ari      mean=%.4f median=%.4f\n", mean_of(rep.ari),
                median_of(rep.ari));
  } else if (mode == "part") {
    for (auto cond : {ZipCondition::normal, ZipCondition::close}) {
      auto rep = run_partition_study(zipd, cond, opt);
      std::printf("condition=%s\n", zip_condition_name(cond));
      for (const auto& m : rep.methods)
        std::printf(
            "  %-10s fail=%d misclass=%.4f purity=%.4f (sd %.4f) ari=%.4f\n",
            m.method.c_str(), m.failures, mean_of(m.misclassification),
            mean_of(m.purity), sd_of(m.purity), mean_of(m.ari));
      // Paired per-run purity differences: combined minus each single stage.
      const auto& pp = rep.methods[0].purity;
      const auto& bp = rep.methods[1].purity;
      const auto& cp = rep.methods[2].purity;
      auto paired = [&](const std::vector<double>& a) {
        std::vector<double> d;
        for (std::size_t i = 0; i < cp.size() && i < a.size(); ++i)
          d.push_back(cp[i] - a[i]);
        int wins = 0;
        for (double v : d)
          if (v >= 0.0) ++wins;
        std::printf("    diff mean=%+.5f sd=%.5f nonneg=%d/%zu\n", mean_of(d),
                    sd_of(d), wins, d.size());
      };
      std::printf("  combined-poisson:\n");
      paired(pp);
      std::printf("  combined-bernoulli:\n");
      paired(bp);
    }
  } else if (mode == "one") {
    // Perfect-recovery probe: tiny response noise, one run per seed.
    SimDesign d = severity_study_design();
    d.noise_fraction = 1e-3;
    opt.n_runs = 1;
    for (std::uint64_t s = 1; s <= 40; ++s) {
      opt.seed = s;
      auto rep = run_gcwm_study(d, opt);
      double worst_g = 1.0, worst_c = 1.0, max_rel = 0.0;
      for (std::size_t k = 0; k < rep.gcwm.size(); ++k)
        for (std::size_t j = 0; j < rep.gcwm[k].size(); ++j) {
          worst_g = std::min(worst_g, rep.gcwm[k][j].coverage);
          worst_c = std::min(worst_c, rep.cwm[k][j].coverage);
          double scale = std::max(std::abs(rep.gcwm[k][j].true_value), 1.0);
          max_rel = std::max(max_rel,
                             std::sqrt(rep.gcwm[k][j].mse) / scale);
        }
      std::printf("seed=%llu both_ok=%d gcov_min=%.0f ccov_min=%.0f max_rel=%.2e\n",
                  static_cast<unsigned long long>(s), rep.both_ok, worst_g,
                  worst_c, max_rel);
    }
  } else if (mode == "sev") {
    auto rep = run_gcwm_study(severity_study_design(), opt);
    std::printf("runs=%d gcwm_ok=%d cwm_ok=%d both=%d bic_wins=%d\n", rep.runs,
                rep.gcwm_ok, rep.cwm_ok, rep.both_ok, rep.gcwm_bic_wins);
    double cov_sum = 0.0;
    int cov_n = 0;
    for (std::size_t k = 0; k < rep.gcwm.size(); ++k) {
      std::printf("comp %zu:", k);
      for (const auto& cell : rep.gcwm[k]) {
        std::printf(" cov=%.2f%s mse=%.3g |", cell.coverage,
                    cell.zeroed ? "(z)" : "", cell.mse);
        if (!cell.zeroed) {
          cov_sum += cell.coverage;
          cov_n += 1;
        }
      }
      std::printf("\n");
    }
    std::printf("mean non-zeroed coverage=%.4f\n", cov_sum / cov_n);
  }
  auto dt = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - t0)
                .count();
  std::printf("wall=%lld ms (%.1f ms/run)\n", static_cast<long long>(dt),
              static_cast<double>(dt) / runs);
  return 0;
}
