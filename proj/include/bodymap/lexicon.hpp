#pragma once

// Linguistic channel: one body-part utterance per tactile sample, with
// controlled label noise.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "bodymap/body_part.hpp"
#include "bodymap/random.hpp"
#include "bodymap/skin_sim.hpp"

namespace bodymap {

struct LabeledUtterance {
  BodyPart label;         // what was "heard", possibly corrupted
  BodyPart ground_truth;  // label before noise
  std::size_t sample_index = 0;
  friend bool operator==(const LabeledUtterance&, const LabeledUtterance&) = default;
};

std::vector<LabeledUtterance> utterances_from_dataset(std::span<const TaxelSample> data);
std::vector<LabeledUtterance> utterances_from_labels(std::span<const BodyPart> labels);

enum class NoiseMode {
  permute,   // shuffle the labels of the selected utterances among themselves
  resample,  // give every selected utterance a uniformly drawn label
};

/// Number of utterances corrupted in a class of n: round-half-up of p * n.
std::size_t corrupted_count(double p, std::size_t n);

/// Selects corrupted_count(p, n_c) utterances of every class c (by current
/// label) and, in permute mode, shuffles the labels of the pooled selection.
/// ground_truth is never touched. Throws std::invalid_argument unless
/// 0 <= p <= 1.
std::vector<LabeledUtterance> inject_noise(std::span<const LabeledUtterance> utterances, double p, Rng& rng,
                                           NoiseMode mode = NoiseMode::permute);

/// `sample_index label ground_truth` per line after a one-line header.
void write_utterances(std::ostream& out, std::span<const LabeledUtterance> utterances);

}  // namespace bodymap
