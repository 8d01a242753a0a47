#pragma once

// First tactile layer: projection of taxel activations onto a 7 x 24 sheet of
// neurons, x_i = u_i . a, plus a generator for surrogate receptive fields.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bodymap/body_part.hpp"
#include "bodymap/random.hpp"
#include "bodymap/skin_sim.hpp"

namespace bodymap {

inline constexpr std::size_t kGridRows = 7;
inline constexpr std::size_t kGridCols = 24;
inline constexpr std::size_t kNeuronCount = kGridRows * kGridCols;  // 168

using ActivationVector = Eigen::VectorXd;

struct HomunculusWeights {
  Eigen::MatrixXd weights;  // neurons x taxels, row i is u_i
  std::size_t grid_rows = kGridRows;
  std::size_t grid_cols = kGridCols;
  std::uint64_t seed = 0;
  double overlap = 0.0;

  std::size_t neurons() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t taxels() const { return static_cast<std::size_t>(weights.cols()); }

  /// Non-negative entries, no all-zero row, rows == grid_rows * grid_cols.
  void validate() const;
};

/// Throws std::invalid_argument if an active taxel is beyond the weight columns.
ActivationVector project(const HomunculusWeights& w, const TaxelSample& sample);

/// Dense binary input; throws std::invalid_argument on a length mismatch.
ActivationVector project(const HomunculusWeights& w, std::span<const std::uint8_t> activation);

struct ProjectedSample {
  ActivationVector x;
  BodyPart label;
};

std::vector<ProjectedSample> batch_project(const HomunculusWeights& w, std::span<const TaxelSample> data);

/// Neurons per fine body part. Entries are in BodyPart order.
using NeuronAllocation = std::array<std::size_t, kBodyPartCount>;

/// Skin-part totals proportional to taxel counts (largest remainder, summing
/// to `neurons`): torso 64, upper arm 55, forearm 34, hand 15 for the default
/// layout. Inside a multi-label skin part every smaller label gets its
/// rounded proportional share and the largest label takes the rest, so the
/// hand becomes palm 5 + 2 per fingertip.
NeuronAllocation default_allocation(const SkinLayout& layout, std::size_t neurons = kNeuronCount);

/// Sums the fine allocation back to skin parts.
std::array<std::size_t, kSkinPartCount> skin_part_totals(const SkinLayout& layout,
                                                         const NeuronAllocation& allocation);

enum class FieldShape {
  local,      // contiguous run of the part's taxels, runs spread along the part
  scattered,  // random subset of the part's taxels
};

struct SurrogateConfig {
  NeuronAllocation allocation{};  // all zeros: use default_allocation
  double overlap = 0.1;           // probability that a neuron's field spills into a neighbour
  double field_fraction = 0.5;    // field size as a fraction of the owning part's taxels
  FieldShape shape = FieldShape::local;
  double spill_fraction = 0.3;    // share of a spilled field taken from the neighbour
};

/// Body parts that touch on the skin: torso - upper arm - forearm - palm -
/// each fingertip.
std::vector<BodyPart> adjacent_parts(BodyPart p);

/// Synthesizes part-local receptive fields with uniform weights 1/|field|.
/// Fields hold field_fraction of their part's taxels, laid out per `shape`;
/// with probability `overlap` a share of the field moves into an adjacent
/// part (a contiguous run there too for local fields). Every taxel is covered by at least one neuron. Throws std::invalid_argument
/// if the allocation does not sum to kNeuronCount or overlap is outside [0, 1).
HomunculusWeights surrogate_weights(const SkinLayout& layout, const SurrogateConfig& config, Rng& rng);

/// Fine body part owning most of a neuron's weight mass (ties: lower label).
BodyPart dominant_part(const SkinLayout& layout, const HomunculusWeights& w, std::size_t neuron);

/// Dense text matrix with a header (rows, cols, grid, seed, overlap).
void write_weights(std::ostream& out, const HomunculusWeights& w);
HomunculusWeights read_weights(std::istream& in);

}  // namespace bodymap
