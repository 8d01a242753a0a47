#include <algorithm>
#include <set>
#include <sstream>

#include "bodymap/mapping.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bodymap;

namespace {

std::vector<Trial> trials_of(std::initializer_list<std::pair<std::size_t, std::size_t>> pairs) {
  std::vector<Trial> out;
  for (auto [w, o] : pairs) out.push_back({w, o});
  return out;
}

// Well separated 2-D blobs; point n sits in cluster[n].
std::vector<Eigen::VectorXd> blob_points(const std::vector<std::size_t>& cluster) {
  const double centres[4][2] = {{0, 0}, {30, 0}, {0, 30}, {30, 30}};
  std::vector<Eigen::VectorXd> out;
  for (std::size_t n = 0; n < cluster.size(); ++n) {
    const auto c = cluster[n];
    out.push_back(Eigen::Vector2d(centres[c][0] + 0.3 * static_cast<double>(n % 3),
                                  centres[c][1] + 0.2 * static_cast<double>(n % 2)));
  }
  return out;
}

SequentialConfig seq_config(bool exclusive) {
  SequentialConfig cfg;
  cfg.exclusive_words = exclusive;
  return cfg;
}

}  // namespace

TEST_CASE("accumulate examples") {
  auto a = accumulate(trials_of({{0, 0}, {0, 0}, {1, 1}}), 2, 2);
  CHECK(a.strength == (Eigen::Matrix2d() << 2, 0, 0, 1).finished());
  CHECK(accumulate({}, 3, 4).strength == Eigen::MatrixXd::Zero(3, 4));
  auto g = accumulate(trials_of({{0, 0}, {0, 0}}), 1, 1, Decay::geometric(0.5));
  CHECK(g(0, 0) == 1.5);
  CHECK_THROWS_AS(accumulate(trials_of({{2, 0}}), 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(accumulate(trials_of({{0, 2}}), 2, 2), std::invalid_argument);
}

TEST_CASE("accumulate equals the triple loop") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t rows = 1 + uniform_index(rng, 5), cols = 1 + uniform_index(rng, 6);
    const std::size_t r = uniform_index(rng, 60);
    std::vector<std::size_t> w, o;
    std::vector<Trial> t;
    for (std::size_t k = 0; k < r; ++k) {
      w.push_back(uniform_index(rng, rows));
      o.push_back(uniform_index(rng, cols));
      t.push_back({w.back(), o.back()});
    }
    const auto decay = trial % 2 ? Decay::geometric(0.9) : Decay::constant();
    std::vector<double> eta;
    for (std::size_t k = 1; k <= r; ++k) eta.push_back(decay.eta(k, r));
    const auto ref = oracle::cooccurrence(w, o, rows, cols, eta);
    const auto a = accumulate(t, rows, cols, decay);
    double total = 0.0, eta_sum = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        CHECK(a(i, j) == ref[i][j]);
        total += a(i, j);
      }
    }
    for (auto e : eta) eta_sum += e;
    CHECK(total == doctest::Approx(eta_sum));
  }
}

TEST_CASE("one-step mapping examples") {
  CooccurrenceMatrix a{(Eigen::Matrix2d() << 2, 0, 0, 1).finished(), {}};
  auto r = one_step_map(a);
  CHECK(r.assignment[0] == 0u);
  CHECK(r.assignment[1] == 1u);

  CooccurrenceMatrix tie{(Eigen::MatrixXd(1, 2) << 1, 1).finished(), {}};
  CHECK(one_step_map(tie).assignment[0] == 0u);

  CooccurrenceMatrix clash{(Eigen::Matrix2d() << 3, 0, 2, 0).finished(), {}};
  const auto c = one_step_map(clash);
  CHECK(c.assignment[0] == 0u);
  CHECK(c.assignment[1] == 0u);
  CHECK(c.tactile_owner[0] == 0u);
  CHECK_FALSE(c.tactile_owner[1].has_value());
  const std::vector<std::size_t> comps{0, 1, 0};
  const auto labels = predict_labels(c, comps);
  CHECK(labels[0] == 0u);
  CHECK_FALSE(labels[1].has_value());

  CooccurrenceMatrix zero_row{(Eigen::Matrix2d() << 1, 0, 0, 0).finished(), {}};
  CHECK_FALSE(one_step_map(zero_row).assignment[1].has_value());
}

TEST_CASE("one-step mapping equals exhaustive row maxima and is scale free") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd m(4, 5);
    for (Eigen::Index i = 0; i < 4; ++i) {
      for (Eigen::Index j = 0; j < 5; ++j) m(i, j) = static_cast<double>(uniform_index(rng, 4));
    }
    const auto r = one_step_map({m, {}});
    for (Eigen::Index i = 0; i < 4; ++i) {
      std::optional<std::size_t> best;
      for (Eigen::Index j = 0; j < 5; ++j) {
        bool is_max = m(i, j) > 0;
        for (Eigen::Index k = 0; k < 5; ++k) is_max = is_max && (m(i, j) > m(i, k) || (m(i, j) == m(i, k) && j <= k));
        if (is_max) best = static_cast<std::size_t>(j);
      }
      CHECK(r.assignment[static_cast<std::size_t>(i)] == best);
    }
    CHECK(one_step_map({m * 3.7, {}}).assignment == r.assignment);
  }
}

TEST_CASE("sequential mapping on a separable two-cluster set") {
  const std::vector<std::size_t> cluster{0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  const auto pts = blob_points(cluster);
  const std::vector<std::size_t> words = cluster;
  for (bool exclusive : {true, false}) {
    Rng rng(1);
    const auto r = sequential_map(pts, words, 2, 2, seq_config(exclusive), rng);
    CHECK(r.iterations.size() == 2);
    CHECK_FALSE(r.partial);
    for (std::size_t n = 0; n < words.size(); ++n) CHECK(r.per_point_label[n] == words[n]);

    // Same labels as the one-step route.
    EmConfig cfg;
    Rng fit_rng(1);
    const auto model = fit_em(pts, 2, cfg, fit_rng);
    const auto comps = assign_hard(model, pts);
    std::vector<Trial> t;
    for (std::size_t n = 0; n < words.size(); ++n) t.push_back({words[n], comps[n]});
    const auto one = predict_labels(one_step_map(accumulate(t, 2, 2)), comps);
    for (std::size_t n = 0; n < words.size(); ++n) CHECK(one[n] == r.per_point_label[n]);
  }
}

TEST_CASE("sequential mapping resolves a one-step collision") {
  // Clusters of 5, 4 and 3 points; ground truth word = cluster index.
  const std::vector<std::size_t> cluster{0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2};
  const std::vector<std::size_t> words{0, 0, 0, 1, 1, 1, 1, 2, 0, 2, 2, 2};
  const auto pts = blob_points(cluster);

  // One-step: word 1 ties clusters 0 and 1 and falls on cluster 0 next to
  // word 0, so cluster 1 stays unowned.
  std::vector<Trial> t;
  for (std::size_t n = 0; n < 12; ++n) t.push_back({words[n], cluster[n]});
  const auto one = one_step_map(accumulate(t, 3, 3));
  CHECK(one.assignment[0] == 0u);
  CHECK(one.assignment[1] == 0u);
  const auto one_labels = predict_labels(one, cluster);
  std::size_t one_correct = 0;
  for (std::size_t n = 0; n < 12; ++n) one_correct += one_labels[n] == cluster[n];

  // Best achievable injective assignment, by enumeration of all 3! maps.
  std::vector<std::size_t> perm{0, 1, 2};
  std::size_t best = 0;
  do {
    std::size_t ok = 0;
    for (std::size_t n = 0; n < 12; ++n) ok += perm[cluster[n]] == cluster[n];
    best = std::max(best, ok);
  } while (std::next_permutation(perm.begin(), perm.end()));
  CHECK(best == 12);

  for (bool exclusive : {true, false}) {
    Rng rng(2);
    const auto r = sequential_map(pts, words, 3, 3, seq_config(exclusive), rng);
    const auto ref = oracle::greedy_labels(cluster, words, 3, 3, exclusive);
    std::size_t correct = 0;
    for (std::size_t n = 0; n < 12; ++n) {
      CHECK(r.per_point_label[n] == ref[n]);
      correct += r.per_point_label[n] == cluster[n];
    }
    CHECK(correct > one_correct);
    if (exclusive) CHECK(correct == best);
    // Every iteration takes a different tactile model and removes points.
    for (const auto& it : r.iterations) CHECK(it.points_removed >= 1);
    CHECK(r.iterations.size() <= 3);
  }
}

TEST_CASE("sequential mapping agrees with the greedy oracle on random labellings") {
  Rng gen(9);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::size_t> cluster, words;
    for (std::size_t c = 0; c < 4; ++c) {
      const auto size = 3 + uniform_index(gen, 5);
      for (std::size_t k = 0; k < size; ++k) {
        cluster.push_back(c);
        words.push_back(uniform01(gen) < 0.7 ? c : uniform_index(gen, 4));
      }
    }
    const auto pts = blob_points(cluster);
    for (bool exclusive : {true, false}) {
      Rng rng(static_cast<std::uint64_t>(trial));
      const auto r = sequential_map(pts, words, 4, 4, seq_config(exclusive), rng);
      const auto ref = oracle::greedy_labels(cluster, words, 4, 4, exclusive);
      // The oracle's tie rule sees fixed cluster indices; refits renumber
      // components, so compare only trials whose counts have no ties.
      bool comparable = true;
      {
        std::vector<bool> alive(cluster.size(), true);
        std::vector<bool> wu(4, false), cu(4, false);
        for (int step = 0; step < 4 && comparable; ++step) {
          std::vector<double> vals;
          double best = 0;
          std::size_t bi = 0, bj = 0;
          for (std::size_t i = 0; i < 4; ++i) {
            if (exclusive && wu[i]) continue;
            for (std::size_t j = 0; j < 4; ++j) {
              if (cu[j]) continue;
              double c = 0;
              for (std::size_t d = 0; d < cluster.size(); ++d) c += alive[d] && words[d] == i && cluster[d] == j;
              if (c > 0) vals.push_back(c);
              if (c > best) best = c, bi = i, bj = j;
            }
          }
          if (best == 0) break;
          if (std::count(vals.begin(), vals.end(), best) > 1) comparable = false;
          for (std::size_t d = 0; d < cluster.size(); ++d) {
            if (cluster[d] == bj) alive[d] = false;
          }
          wu[bi] = cu[bj] = true;
        }
      }
      if (!comparable) continue;
      for (std::size_t n = 0; n < cluster.size(); ++n) CHECK(r.per_point_label[n] == ref[n]);
    }
  }
}

TEST_CASE("sequential mapping edge cases") {
  const std::vector<std::size_t> cluster{0, 0, 0, 0};
  const auto pts = blob_points(cluster);
  Rng rng(1);
  const auto r = sequential_map(pts, cluster, 1, 1, SequentialConfig{}, rng);
  CHECK(r.iterations.size() == 1);
  CHECK(r.assignment[0] == 0u);
  for (auto& l : r.per_point_label) CHECK(l == 0u);

  const std::vector<std::size_t> short_words{0, 0};
  CHECK_THROWS_AS(sequential_map(pts, short_words, 1, 1, SequentialConfig{}, rng), std::invalid_argument);
  const std::vector<std::size_t> bad_words{0, 0, 0, 5};
  CHECK_THROWS_AS(sequential_map(pts, bad_words, 2, 1, SequentialConfig{}, rng), std::invalid_argument);
}

TEST_CASE("sequential mapping invariants on noisy data") {
  const std::vector<std::size_t> cluster{0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3};
  const std::vector<std::size_t> words{0, 1, 0, 0, 2, 0, 1, 1, 3, 1, 1, 2, 2, 0, 2, 3, 3, 1};
  const auto pts = blob_points(cluster);
  for (auto removal : {RemovalRule::matched, RemovalRule::claimed}) {
    for (bool refit : {true, false}) {
      for (bool exclusive : {true, false}) {
        SequentialConfig cfg;
        cfg.removal = removal;
        cfg.refit = refit;
        cfg.exclusive_words = exclusive;
        Rng rng(3);
        const auto r = sequential_map(pts, words, 4, 4, cfg, rng);
        CHECK(r.iterations.size() <= 4);
        std::size_t before = cluster.size() + 1;
        for (const auto& it : r.iterations) {
          CHECK(it.points_before < before);
          CHECK(it.points_removed >= 1);
          before = it.points_before;
        }
        // Each inhibition ties the chosen tactile model to every other word.
        CHECK(r.inhibited.size() == 3 * r.iterations.size());
        if (!refit) {
          std::set<std::size_t> used;
          for (const auto& it : r.iterations) CHECK(used.insert(it.tactile).second);
        }
        if (exclusive) {
          std::set<std::size_t> used;
          for (const auto& it : r.iterations) CHECK(used.insert(it.language).second);
        }
      }
    }
  }
}

TEST_CASE("mapping report") {
  const std::vector<std::size_t> cluster{0, 0, 1, 1};
  const auto pts = blob_points(cluster);
  Rng rng(1);
  const auto r = sequential_map(pts, cluster, 2, 2, SequentialConfig{}, rng);
  std::ostringstream out;
  write_mapping_report(out, r);
  CHECK(out.str().find("iterations 2") != std::string::npos);
  CHECK(out.str().find("inhibited 2") != std::string::npos);
}
