#pragma once

// Cross-situational association between language models (word identities)
// and tactile models (mixture components): co-occurrence accumulation,
// one-step argmax mapping and sequential mapping with mutual-exclusivity
// inhibition.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bodymap/gmm.hpp"
#include "bodymap/lexicon.hpp"
#include "bodymap/random.hpp"

namespace bodymap {

/// Gain eta(t) of trial t (1-based) out of R trials.
struct Decay {
  enum class Kind { constant, geometric };
  Kind kind = Kind::constant;
  double value = 1.0;  // constant gain, or the ratio gamma: eta(t) = gamma^(R - t)

  static Decay constant(double gain = 1.0) { return {Kind::constant, gain}; }
  static Decay geometric(double gamma) { return {Kind::geometric, gamma}; }

  double eta(std::size_t t, std::size_t trials) const;
};

/// One attended (word, referent) pair per trial, 0-based model indices.
struct Trial {
  std::size_t word = 0;
  std::size_t referent = 0;
};

struct CooccurrenceMatrix {
  Eigen::MatrixXd strength;  // language models x tactile models
  Decay decay;

  std::size_t language_models() const { return static_cast<std::size_t>(strength.rows()); }
  std::size_t tactile_models() const { return static_cast<std::size_t>(strength.cols()); }
  double operator()(std::size_t i, std::size_t j) const {
    return strength(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
};

/// A(i, j) = sum_t eta(t) [w_t = i][o_t = j]. Throws std::invalid_argument for
/// an index outside [0, language_models) x [0, tactile_models).
CooccurrenceMatrix accumulate(std::span<const Trial> trials, std::size_t language_models,
                              std::size_t tactile_models, Decay decay = Decay::constant());

struct Inhibition {
  std::size_t iteration = 0;
  std::size_t tactile = 0;
  std::size_t language = 0;
};

struct IterationRecord {
  std::size_t language = 0;      // im
  std::size_t tactile = 0;       // m(im), index within this iteration's mixture
  double strength = 0.0;         // A(im, m(im))
  std::size_t components = 0;    // mixture size used in this iteration
  std::size_t points_before = 0;
  std::size_t points_removed = 0;
  std::size_t points_claimed = 0;
};

struct MappingResult {
  /// m(i) per language model; nullopt when never assigned. In refit mode the
  /// index refers to the mixture of the iteration that made the assignment.
  std::vector<std::optional<std::size_t>> assignment;
  /// Language model owning each tactile model of the (single) mixture.
  /// Empty for sequential runs that refit per iteration.
  std::vector<std::optional<std::size_t>> tactile_owner;
  std::vector<Inhibition> inhibited;
  std::vector<IterationRecord> iterations;
  /// Language model per data point (sequential runs only).
  std::vector<std::optional<std::size_t>> per_point_label;
  /// Stopped on an all-zero co-occurrence matrix with models left unassigned.
  bool partial = false;
};

/// m(i) = argmax_j A(i, j), ties to the lowest j; rows without any
/// co-occurrence stay unassigned. Several words may share a tactile model;
/// that model is owned by the word with the larger A(i, j) (ties: lower i).
MappingResult one_step_map(const CooccurrenceMatrix& a);

/// Label of the word owning each point's tactile model; nullopt ("unmapped")
/// for unowned or out-of-range models.
std::vector<std::optional<std::size_t>> predict_labels(const MappingResult& result,
                                                        std::span<const std::size_t> tactile_assignments);

/// Which points leave the data set after an assignment (T, L).
enum class RemovalRule {
  matched,  // points in both T and L, as in the step description
  claimed,  // every point of T: points already labelled are not re-clustered
};

struct SequentialConfig {
  EmConfig gmm;
  bool refit = true;  // re-cluster the remaining data each iteration instead of reusing the first fit
  RemovalRule removal = RemovalRule::claimed;
  // When false a word stays in the competition after its first assignment and
  // may take further tactile models; tactile models stay exclusive either way.
  bool exclusive_words = false;
  // Refit with J - #assigned components; when false every refit uses J.
  bool shrink_components = true;
  Decay decay = Decay::constant();
};

/// Sequential mapping. Each iteration clusters the remaining tactile data,
/// hard-assigns points, builds A over the remaining points, takes the global
/// maximum (ties: lowest word, then lowest tactile model), inhibits that
/// tactile model against every other word and drops the handled points.
/// A point is labelled by the first iteration whose chosen tactile model
/// contains it. Stops when no data is left, every component is used (every
/// word too with exclusive_words), or A has no positive entry (partial). Throws std::invalid_argument on
/// misaligned inputs or a word index >= language_models.
MappingResult sequential_map(std::span<const Eigen::VectorXd> tactile, std::span<const std::size_t> words,
                             std::size_t language_models, std::size_t components,
                             const SequentialConfig& config, Rng& rng);

/// Word identities taken from the utterance labels (BodyPart order).
MappingResult sequential_map(std::span<const Eigen::VectorXd> tactile, std::span<const LabeledUtterance> utterances,
                             std::size_t components, const SequentialConfig& config, Rng& rng);

/// Text report: iteration log, final assignment table, inhibition list.
void write_mapping_report(std::ostream& out, const MappingResult& result);

}  // namespace bodymap
