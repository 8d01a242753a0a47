#include "bodymap/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

namespace bodymap {

double Decay::eta(std::size_t t, std::size_t trials) const {
  if (kind == Kind::constant) return value;
  return std::pow(value, static_cast<double>(trials - t));
}

CooccurrenceMatrix accumulate(std::span<const Trial> trials, std::size_t language_models,
                              std::size_t tactile_models, Decay decay) {
  CooccurrenceMatrix a{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(language_models),
                                             static_cast<Eigen::Index>(tactile_models)),
                       decay};
  const auto r = trials.size();
  for (std::size_t t = 0; t < r; ++t) {
    const auto& trial = trials[t];
    if (trial.word >= language_models || trial.referent >= tactile_models) {
      throw std::invalid_argument("trial " + std::to_string(t) + " has a model index out of range");
    }
    a.strength(static_cast<Eigen::Index>(trial.word), static_cast<Eigen::Index>(trial.referent)) +=
        decay.eta(t + 1, r);
  }
  return a;
}

MappingResult one_step_map(const CooccurrenceMatrix& a) {
  const auto rows = a.language_models();
  const auto cols = a.tactile_models();
  MappingResult result;
  result.assignment.assign(rows, std::nullopt);
  result.tactile_owner.assign(cols, std::nullopt);
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < cols; ++j) {
      if (a(i, j) > a(i, best)) best = j;
    }
    if (cols == 0 || !(a(i, best) > 0.0)) continue;
    result.assignment[i] = best;
    auto& owner = result.tactile_owner[best];
    if (!owner || a(i, best) > a(*owner, best)) owner = i;
  }
  return result;
}

std::vector<std::optional<std::size_t>> predict_labels(const MappingResult& result,
                                                        std::span<const std::size_t> tactile_assignments) {
  std::vector<std::optional<std::size_t>> out;
  out.reserve(tactile_assignments.size());
  for (auto j : tactile_assignments) {
    out.push_back(j < result.tactile_owner.size() ? result.tactile_owner[j] : std::nullopt);
  }
  return out;
}

MappingResult sequential_map(std::span<const Eigen::VectorXd> tactile, std::span<const std::size_t> words,
                             std::size_t language_models, std::size_t components,
                             const SequentialConfig& config, Rng& rng) {
  if (tactile.size() != words.size()) {
    throw std::invalid_argument("sequential_map: tactile and language streams differ in length (" +
                                std::to_string(tactile.size()) + " vs " + std::to_string(words.size()) + ")");
  }
  if (components == 0 || language_models == 0) {
    throw std::invalid_argument("sequential_map: need at least one tactile and one language model");
  }
  for (auto w : words) {
    if (w >= language_models) throw std::invalid_argument("sequential_map: word index out of range");
  }

  const auto n = tactile.size();
  const auto distinct = deduplicate(tactile);
  const auto n_distinct = distinct.points.size();

  MappingResult result;
  result.assignment.assign(language_models, std::nullopt);
  result.per_point_label.assign(n, std::nullopt);
  if (!config.refit) result.tactile_owner.assign(components, std::nullopt);

  std::vector<bool> alive(n, true);
  std::vector<bool> word_used(language_models, false);
  std::vector<bool> tactile_used(components, false);  // reuse mode only
  std::optional<GmmModel> fixed_model;
  std::vector<std::size_t> fixed_assign;

  for (std::size_t iteration = 0;; ++iteration) {
    const auto n_alive = static_cast<std::size_t>(std::count(alive.begin(), alive.end(), true));
    const auto used = result.iterations.size();
    if (n_alive == 0 || (config.shrink_components && used >= components)) break;
    if (config.exclusive_words && used >= language_models) break;

    // Hard assignment of every distinct point for this iteration.
    std::vector<std::size_t> point_component(n_distinct, 0);
    std::size_t k = components;
    if (config.refit || !fixed_model) {
      std::vector<double> counts(n_distinct, 0.0);
      for (std::size_t d = 0; d < n; ++d) {
        if (alive[d]) counts[distinct.source[d]] += 1.0;
      }
      std::vector<Eigen::VectorXd> pts;
      std::vector<double> wts;
      std::vector<std::size_t> which;
      for (std::size_t p = 0; p < n_distinct; ++p) {
        if (counts[p] > 0.0) {
          pts.push_back(distinct.points[p]);
          wts.push_back(counts[p]);
          which.push_back(p);
        }
      }
      k = config.refit ? std::min(config.shrink_components ? components - used : components, pts.size())
                       : components;
      auto model = fit_em_weighted(pts, wts, k, config.gmm, rng);
      const auto labels = assign_hard(model, pts);
      for (std::size_t q = 0; q < which.size(); ++q) point_component[which[q]] = labels[q];
      if (!config.refit) {
        // Every distinct point gets a component so later iterations can reuse it.
        fixed_assign = assign_hard(model, distinct.points);
        fixed_model = std::move(model);
      }
    }
    if (!config.refit) point_component = fixed_assign;

    std::vector<Trial> trials;
    trials.reserve(n_alive);
    for (std::size_t d = 0; d < n; ++d) {
      if (alive[d]) trials.push_back({words[d], point_component[distinct.source[d]]});
    }
    auto a = accumulate(trials, language_models, k, config.decay);
    for (std::size_t i = 0; i < language_models; ++i) {
      if (config.exclusive_words && word_used[i]) a.strength.row(static_cast<Eigen::Index>(i)).setZero();
    }
    if (!config.refit) {
      for (std::size_t j = 0; j < k; ++j) {
        if (tactile_used[j]) a.strength.col(static_cast<Eigen::Index>(j)).setZero();
      }
    }

    std::size_t im = 0, jm = 0;
    for (std::size_t i = 0; i < language_models; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        if (a(i, j) > a(im, jm)) {
          im = i;
          jm = j;
        }
      }
    }
    if (!(a(im, jm) > 0.0)) {
      result.partial = true;
      break;
    }

    IterationRecord rec{im, jm, a(im, jm), k, n_alive, 0, 0};
    for (std::size_t d = 0; d < n; ++d) {
      if (!alive[d] || point_component[distinct.source[d]] != jm) continue;
      if (!result.per_point_label[d]) {
        result.per_point_label[d] = im;
        ++rec.points_claimed;
      }
      if (config.removal == RemovalRule::claimed || words[d] == im) {
        alive[d] = false;
        ++rec.points_removed;
      }
    }
    for (std::size_t i = 0; i < language_models; ++i) {
      if (i != im) result.inhibited.push_back({iteration, jm, i});
    }
    if (!result.assignment[im]) result.assignment[im] = jm;
    word_used[im] = true;
    if (!config.refit) {
      tactile_used[jm] = true;
      result.tactile_owner[jm] = im;
    }
    result.iterations.push_back(rec);
  }
  return result;
}

MappingResult sequential_map(std::span<const Eigen::VectorXd> tactile, std::span<const LabeledUtterance> utterances,
                             std::size_t components, const SequentialConfig& config, Rng& rng) {
  std::vector<std::size_t> words;
  words.reserve(utterances.size());
  for (const auto& u : utterances) words.push_back(index_of(u.label));
  return sequential_map(tactile, words, kBodyPartCount, components, config, rng);
}

void write_mapping_report(std::ostream& out, const MappingResult& result) {
  out << "# bodymap-mapping v1\n";
  out << "iterations " << result.iterations.size() << (result.partial ? " partial" : "") << '\n';
  for (std::size_t t = 0; t < result.iterations.size(); ++t) {
    const auto& r = result.iterations[t];
    out << "iteration " << t << " language " << r.language << " tactile " << r.tactile << " strength "
        << r.strength << " components " << r.components << " points " << r.points_before << " removed "
        << r.points_removed << " claimed " << r.points_claimed << '\n';
  }
  out << "assignment\n";
  for (std::size_t i = 0; i < result.assignment.size(); ++i) {
    out << "  language " << i << " -> ";
    if (result.assignment[i]) {
      out << "tactile " << *result.assignment[i] << '\n';
    } else {
      out << "unassigned\n";
    }
  }
  out << "inhibited " << result.inhibited.size() << '\n';
  for (const auto& inh : result.inhibited) {
    out << "  iteration " << inh.iteration << " tactile " << inh.tactile << " language " << inh.language << '\n';
  }
}

}  // namespace bodymap
