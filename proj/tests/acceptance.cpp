// Acceptance run: prints one PASS/FAIL line per criterion. Exits non-zero only
// when the harness itself breaks, or with --strict when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "bodymap/experiment.hpp"
#include "oracles.hpp"

using namespace bodymap;

namespace {

struct Verdict {
  int id;
  bool pass;
  std::string detail;
};

std::vector<Verdict> verdicts;

void report(int id, bool pass, const std::string& detail) {
  verdicts.push_back({id, pass, detail});
  std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

constexpr std::uint64_t kSeed = 2024;

using Key = std::tuple<std::size_t, double, Mapper>;
std::map<Key, AggregateRecord> index_aggregates(const SweepResult& r) {
  std::map<Key, AggregateRecord> out;
  for (const auto& a : r.aggregates) out[{a.size, a.noise, a.mapper}] = a;
  return out;
}

double mean_of(const std::map<Key, AggregateRecord>& m, std::size_t size, double noise, Mapper mapper) {
  return m.at({size, noise, mapper}).accuracy.mean;
}

void print_table(const SweepResult& r) {
  std::printf("  %6s %5s %-10s %8s %8s %5s\n", "size", "noise", "mapper", "mean", "sd", "fail");
  for (const auto& a : r.aggregates) {
    std::printf("  %6zu %5.2f %-10s %8.4f %8.4f %5zu\n", a.size, a.noise, std::string(token(a.mapper)).c_str(),
                a.accuracy.mean, a.accuracy.stddev, a.failures);
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Criteria 1-3 share one grid.
void grid_criteria() {
  SweepConfig cfg;
  cfg.seed = kSeed;
  cfg.sizes = {638, 3190, 6381};
  cfg.noise_levels = {0.0, 0.2, 0.4, 0.6, 0.8};
  cfg.repetitions = 20;
  cfg.pipeline.surrogate.overlap = 0.1;
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = run_sweep(cfg);
  std::printf("grid: %zu records in %.1f s\n", result.records.size(), seconds_since(t0));
  print_table(result);
  const auto m = index_aggregates(result);

  std::size_t cells = 0, dominated = 0, strict = 0;
  for (auto size : cfg.sizes) {
    for (auto p : cfg.noise_levels) {
      const double one = mean_of(m, size, p, Mapper::one_step);
      const double seq = mean_of(m, size, p, Mapper::sequential);
      ++cells;
      dominated += seq >= one;
      strict += seq > one;
    }
  }
  const std::size_t need = (cells * 6 + 9) / 10;
  report(1, dominated == cells && strict >= need,
         fmt("sequential >= one-step in %zu/%zu cells, strictly better in %zu (need %zu)", dominated, cells, strict,
             need));

  const double s0 = mean_of(m, 3190, 0.0, Mapper::sequential), s4 = mean_of(m, 3190, 0.4, Mapper::sequential);
  const double o0 = mean_of(m, 3190, 0.0, Mapper::one_step), o4 = mean_of(m, 3190, 0.4, Mapper::one_step);
  const double seq_drop = s0 - s4, one_drop = o0 - o4;
  const bool robust = seq_drop < 0.5 * s0;
  report(2, robust && one_drop > seq_drop,
         fmt("size 3190, noise 0 -> 0.4: sequential %.4f -> %.4f (drop %.4f, limit %.4f), one-step %.4f -> %.4f "
             "(drop %.4f, must exceed sequential drop)",
             s0, s4, seq_drop, 0.5 * s0, o0, o4, one_drop));

  const double small = mean_of(m, 638, 0.0, Mapper::sequential) - mean_of(m, 638, 0.6, Mapper::sequential);
  const double large = mean_of(m, 6381, 0.0, Mapper::sequential) - mean_of(m, 6381, 0.6, Mapper::sequential);
  report(3, small > large,
         fmt("sequential decline noise 0 -> 0.6: size 638 %.4f, size 6381 %.4f", small, large));
}

void per_part_criterion() {
  SweepConfig cfg;
  cfg.seed = kSeed + 1;
  cfg.sizes = {3190};
  cfg.noise_levels = {0.2};
  cfg.repetitions = 40;
  cfg.mapper = MapperSelection::both;
  const auto result = run_sweep(cfg);
  bool pass = true;
  std::string detail;
  for (const auto& a : result.aggregates) {
    std::printf("  %-10s", std::string(token(a.mapper)).c_str());
    for (auto p : kAllBodyParts) std::printf(" %s %.3f", std::string(token(p)).c_str(), a.parts[index_of(p)].mean);
    std::printf("\n");
    if (a.mapper != Mapper::sequential) continue;
    double weakest_large = 1.0, strongest_finger = 0.0;
    for (auto p : kAllBodyParts) {
      const double v = a.parts[index_of(p)].mean;
      if (is_fingertip(p)) {
        strongest_finger = std::max(strongest_finger, v);
      } else if (p != BodyPart::palm) {
        weakest_large = std::min(weakest_large, v);
      }
    }
    pass = strongest_finger < weakest_large;
    detail = fmt("sequential, size 3190, noise 0.2, 40 runs: best fingertip %.4f < worst of torso/arm parts %.4f",
                 strongest_finger, weakest_large);
  }
  report(4, pass, detail);
}

void separable_criterion() {
  SweepConfig cfg;
  cfg.seed = kSeed + 2;
  cfg.sizes = {3190};
  cfg.noise_levels = {0.0};
  cfg.repetitions = 20;
  cfg.mapper = MapperSelection::sequential;
  cfg.pipeline.surrogate.overlap = 0.0;
  const auto result = run_sweep(cfg);
  std::size_t good = 0, flagged = 0;
  std::printf("  accuracies:");
  for (const auto& r : result.records) {
    std::printf(" %.3f", r.accuracy);
    flagged += r.flags != kFlagNone;
    good += r.accuracy >= 0.95;  // NaN (failed fit) never counts
  }
  std::printf("\n");
  report(5, good * 5 >= result.records.size() * 4,
         fmt("overlap 0, size 3190: %zu/%zu runs >= 0.95 (need 16), %zu flagged", good, result.records.size(),
             flagged));
}

oracle::Matrix to_rows(const Eigen::MatrixXd& m) {
  oracle::Matrix out(static_cast<std::size_t>(m.rows()), oracle::Vector(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  }
  return out;
}

oracle::Vector to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void oracle_criterion() {
  Rng rng(kSeed + 3);
  std::size_t accumulate_bad = 0, one_step_bad = 0;
  double worst_posterior = 0.0;

  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = 1 + uniform_index(rng, 9), cols = 1 + uniform_index(rng, 9);
    const std::size_t n = uniform_index(rng, 80);
    const auto decay = trial % 2 ? Decay::geometric(0.9) : Decay::constant();
    std::vector<std::size_t> w, o;
    std::vector<Trial> t;
    oracle::Vector eta;
    for (std::size_t k = 0; k < n; ++k) {
      w.push_back(uniform_index(rng, rows));
      o.push_back(uniform_index(rng, cols));
      t.push_back({w.back(), o.back()});
      eta.push_back(decay.eta(k + 1, n));
    }
    const auto a = accumulate(t, rows, cols, decay);
    const auto ref = oracle::cooccurrence(w, o, rows, cols, eta);
    if (to_rows(a.strength) != ref) ++accumulate_bad;

    const auto map = one_step_map(a);
    for (std::size_t i = 0; i < rows; ++i) {
      double best = 0.0;
      std::optional<std::size_t> arg;
      for (std::size_t j = 0; j < cols; ++j) {
        if (ref[i][j] > best) {
          best = ref[i][j];
          arg = j;
        }
      }
      if (map.assignment[i] != arg) ++one_step_bad;
    }
  }

  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + uniform_index(rng, 4), j = 1 + uniform_index(rng, 4);
    std::vector<double> r(j);
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
    double total = 0.0;
    for (auto& x : r) total += (x = 0.1 + uniform01(rng));
    for (auto& x : r) x /= total;
    for (std::size_t k = 0; k < j; ++k) {
      Eigen::VectorXd m(d);
      Eigen::MatrixXd b(d, d);
      for (std::size_t a = 0; a < d; ++a) m(a) = 4.0 * uniform01(rng) - 2.0;
      for (std::size_t a = 0; a < d * d; ++a) b.data()[a] = uniform01(rng) - 0.5;
      means.push_back(m);
      covs.push_back(b * b.transpose() + 0.3 * Eigen::MatrixXd::Identity(d, d));
    }
    const GmmModel model(r, means, covs, CovarianceType::full);
    std::vector<oracle::Vector> om;
    std::vector<oracle::Matrix> oc;
    for (std::size_t k = 0; k < j; ++k) {
      om.push_back(to_vec(means[k]));
      oc.push_back(to_rows(covs[k]));
    }
    Eigen::VectorXd x(d);
    for (std::size_t a = 0; a < d; ++a) x(a) = 4.0 * uniform01(rng) - 2.0;
    const auto got = posteriors(model, x);
    const auto ref = oracle::posteriors(r, om, oc, to_vec(x));
    for (std::size_t k = 0; k < j; ++k) worst_posterior = std::max(worst_posterior, std::fabs(got(k) - ref[k]));
  }

  // Handcrafted set: clusters of 5, 4 and 3 points, ground truth word = cluster.
  const std::vector<std::size_t> cluster{0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2};
  const std::vector<std::size_t> words{0, 0, 0, 1, 1, 1, 1, 2, 0, 2, 2, 2};
  std::vector<Eigen::VectorXd> pts;
  for (std::size_t n = 0; n < cluster.size(); ++n) {
    pts.push_back(Eigen::Vector2d(30.0 * static_cast<double>(cluster[n]) + 0.3 * static_cast<double>(n % 3),
                                  0.2 * static_cast<double>(n % 2)));
  }
  std::vector<std::size_t> perm{0, 1, 2};
  std::size_t brute = 0;
  do {
    std::size_t ok = 0;
    for (std::size_t n = 0; n < 12; ++n) {
      ok += perm[cluster[n]] == cluster[n];
    }
    brute = std::max(brute, ok);
  } while (std::next_permutation(perm.begin(), perm.end()));
  bool sequential_ok = true;
  std::size_t seq_correct = 0;
  for (bool exclusive : {true, false}) {
    SequentialConfig sc;
    sc.exclusive_words = exclusive;
    Rng fit(5);
    const auto res = sequential_map(pts, words, 3, 3, sc, fit);
    const auto ref = oracle::greedy_labels(cluster, words, 3, 3, exclusive);
    std::size_t correct = 0;
    for (std::size_t n = 0; n < 12; ++n) {
      sequential_ok = sequential_ok && res.per_point_label[n] == ref[n];
      correct += res.per_point_label[n] == cluster[n];
    }
    if (exclusive) {
      sequential_ok = sequential_ok && correct == brute;
      seq_correct = correct;
    }
  }

  const bool pass = accumulate_bad == 0 && one_step_bad == 0 && worst_posterior <= 1e-9 && sequential_ok;
  report(6, pass,
         fmt("accumulate mismatches %zu/200, one-step row-max mismatches %zu, max posterior error %.2e, "
             "sequential %zu/12 vs enumeration %zu/12 and greedy oracle %s",
             accumulate_bad, one_step_bad, worst_posterior, seq_correct, brute, sequential_ok ? "agree" : "disagree"));
}

void invariant_criterion() {
  Rng rng(kSeed + 4);
  std::size_t non_monotone = 0, fits = 0;
  double worst_norm = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + uniform_index(rng, 5), j = 2 + uniform_index(rng, 3);
    const std::size_t n = 40 + uniform_index(rng, 160);
    std::vector<Eigen::VectorXd> centres, data;
    for (std::size_t k = 0; k < j; ++k) centres.push_back(Eigen::VectorXd::NullaryExpr(d, [&] { return 10.0 * uniform01(rng); }));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t k = 0; k < n; ++k) {
      data.push_back(centres[uniform_index(rng, j)] + Eigen::VectorXd::NullaryExpr(d, [&] { return gauss(rng); }));
    }
    EmConfig cfg;
    cfg.covariance = trial % 2 ? CovarianceType::full : CovarianceType::diagonal;
    cfg.n_init = 1;
    try {
      const auto model = fit_em(data, j, cfg, rng);
      ++fits;
      const auto& ll = model.info.log_likelihoods;
      for (std::size_t t = 1; t < ll.size(); ++t) {
        if (ll[t] - ll[t - 1] < -1e-9 * std::fabs(ll[t - 1])) {
          ++non_monotone;
          break;
        }
      }
      for (const auto& x : data) worst_norm = std::max(worst_norm, std::fabs(posteriors(model, x).sum() - 1.0));
    } catch (const std::exception& e) {
      std::printf("  fit %d failed: %s\n", trial, e.what());
    }
  }

  SweepConfig cfg;
  cfg.seed = kSeed + 5;
  const auto ctx = make_context(cfg);
  CellDetail detail;
  run_cell_detailed(ctx, 3190, 0.2, 0, Mapper::sequential, detail);
  const auto bp = back_project(detail.activations, detail.predicted);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(bp.strength.rows());
  for (std::size_t n = 0; n < detail.activations.size(); ++n) {
    if (detail.predicted[n]) total += detail.activations[n];
  }
  double worst_cons = 0.0;
  for (Eigen::Index i = 0; i < total.size(); ++i) {
    worst_cons = std::max(worst_cons, std::fabs(bp.strength.row(i).sum() - total(i)) / std::max(1.0, total(i)));
  }
  report(7, fits == 100 && non_monotone == 0 && worst_norm <= 1e-9 && worst_cons <= 1e-9,
         fmt("%zu/100 fits, %zu with a log-likelihood decrease, max |sum y - 1| %.2e, max relative "
             "back-projection error %.2e",
             fits, non_monotone, worst_norm, worst_cons));
}

std::string sweep_csv(std::size_t threads) {
  SweepConfig cfg;
  cfg.seed = kSeed + 6;
  cfg.sizes = {300, 638};
  cfg.noise_levels = {0.0, 0.5};
  cfg.repetitions = 3;
  cfg.threads = threads;
  const auto r = run_sweep(cfg);
  std::ostringstream out;
  write_sweep_csv(out, r.records);
  write_aggregate_csv(out, r.aggregates);
  return out.str();
}

void determinism_criterion() {
  const auto a = sweep_csv(0), b = sweep_csv(0), c = sweep_csv(1);
  report(8, a == b && a == c,
         fmt("two runs %s, parallel vs single thread %s (%zu bytes)", a == b ? "identical" : "differ",
             a == c ? "identical" : "differ", a.size()));
}

void full_scale_criterion() {
  SweepConfig cfg;
  cfg.seed = kSeed + 7;
  cfg.sizes = {63806};
  cfg.noise_levels = {0.0, 0.5};
  cfg.repetitions = 5;
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = run_sweep(cfg);
  const double secs = seconds_since(t0);
  print_table(result);
  const auto m = index_aggregates(result);
  bool dominant = true;
  for (auto p : cfg.noise_levels) {
    dominant = dominant && mean_of(m, 63806, p, Mapper::sequential) >= mean_of(m, 63806, p, Mapper::one_step);
  }
  report(9, secs < 3600.0 && dominant,
         fmt("size 63806, noise {0, 0.5}, 5 runs: %.1f s, sequential >= one-step in both cells: %s", secs,
             dominant ? "yes" : "no"));
}

}  // namespace

int main(int argc, char** argv) {
  const bool strict = argc > 1 && std::strcmp(argv[1], "--strict") == 0;
  try {
    grid_criteria();
    per_part_criterion();
    separable_criterion();
    oracle_criterion();
    invariant_criterion();
    determinism_criterion();
    full_scale_criterion();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance run aborted: %s\n", e.what());
    return 2;
  }
  std::size_t passed = 0;
  for (const auto& v : verdicts) passed += v.pass;
  std::printf("%zu/%zu criteria pass\n", passed, verdicts.size());
  return strict && passed != verdicts.size() ? 1 : 0;
}
