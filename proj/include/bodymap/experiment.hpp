#pragma once

// Evaluation and the experiment harness: accuracy, per-part accuracy,
// back-projection of predicted labels onto the homunculus, single pipeline
// runs ("cells") and the full size x noise x mapper x repetition sweep.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "bodymap/body_part.hpp"
#include "bodymap/gmm.hpp"
#include "bodymap/homunculus.hpp"
#include "bodymap/lexicon.hpp"
#include "bodymap/mapping.hpp"
#include "bodymap/skin_sim.hpp"

namespace bodymap {

/// Predicted label of a data point; nullopt means "unmapped" and always counts
/// as wrong.
using Prediction = std::optional<BodyPart>;

/// TP / N against the pre-noise ground truth. Throws std::invalid_argument on
/// empty or misaligned input.
double accuracy(std::span<const Prediction> predicted, std::span<const BodyPart> ground_truth);

/// Accuracy restricted to each ground-truth class; nullopt for absent classes.
using PartAccuracy = std::array<std::optional<double>, kBodyPartCount>;
PartAccuracy per_part_accuracy(std::span<const Prediction> predicted, std::span<const BodyPart> ground_truth);

struct BackProjection {
  Eigen::MatrixXd strength;                    // neurons x labels, n_i^k
  std::vector<std::optional<BodyPart>> dominant;  // argmax_k n_i^k; nullopt for a silent neuron
};

/// n_i^k = sum of x_i over the points predicted as k. Unmapped points add
/// nothing, so each row sums to the neuron's activation over labelled points.
BackProjection back_project(std::span<const Eigen::VectorXd> activations, std::span<const Prediction> predicted);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

using Palette = std::array<Rgb, kBodyPartCount>;
Palette default_palette();

struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Rgb> pixels;  // row-major

  const Rgb& at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

inline constexpr Rgb kBackground{255, 255, 255};

/// grid_rows*scale x grid_cols*scale image; neuron i sits at (i / cols, i % cols).
/// Each cell blends the background towards its dominant label's colour by
/// n_i^dominant / max over neurons.
Image render_heatmap(const BackProjection& bp, const Palette& palette, std::size_t scale = 10,
                     std::size_t grid_rows = kGridRows, std::size_t grid_cols = kGridCols);

/// Binary portable pixmap (P6).
void write_ppm(std::ostream& out, const Image& image);

enum class Mapper { one_step, sequential };
enum class MapperSelection { one_step, sequential, both };

std::string_view token(Mapper m);
MapperSelection parse_mapper_selection(std::string_view text);
std::vector<Mapper> mappers_of(MapperSelection selection);

struct PipelineConfig {
  SurrogateConfig surrogate;
  EmConfig gmm;
  bool refit = true;
  RemovalRule removal = RemovalRule::claimed;
  bool exclusive_words = false;
  bool shrink_components = true;
  NoiseMode noise_mode = NoiseMode::permute;
  std::size_t components = kBodyPartCount;
  std::size_t samples_per_stimulation = kDefaultSamplesPerStimulation;
  std::size_t corpus_stimulations = 2000;  // ~100 minutes of 3 s contacts
};

struct SweepConfig {
  std::vector<std::size_t> sizes{64, 638, 3190, 6381, 31903, 63806};
  std::vector<double> noise_levels{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::size_t repetitions = 20;
  std::uint64_t seed = 1;
  MapperSelection mapper = MapperSelection::both;
  PipelineConfig pipeline;
  std::size_t threads = 0;  // 0: hardware concurrency

  /// Throws std::invalid_argument for sizes below the component count, noise
  /// outside [0, 1] or zero repetitions.
  void validate() const;
};

/// Fixed ingredients shared by every cell of a sweep.
struct ExperimentContext {
  SweepConfig config;
  SkinLayout layout;
  HomunculusWeights weights;
};

/// Builds the layout and the surrogate weights (seeded from config.seed).
ExperimentContext make_context(const SweepConfig& config);

enum CellFlag : unsigned {
  kFlagNone = 0,
  kFlagFitFailed = 1u << 0,
  kFlagPartial = 1u << 1,
  kFlagLabelIncomplete = 1u << 2,
  kFlagUnmapped = 1u << 3,
};

std::string format_flags(unsigned flags);

struct CellRecord {
  std::size_t size = 0;
  double noise = 0.0;
  Mapper mapper = Mapper::one_step;
  std::size_t repetition = 0;
  double accuracy = 0.0;  // NaN when the fit failed
  PartAccuracy part_accuracy{};
  std::size_t iterations = 0;
  unsigned flags = kFlagNone;
  std::string error;
  double seconds = 0.0;  // wall time; not written to the CSV
};

/// Everything one pipeline run produces, for callers that need more than the
/// summary record (the CLI `map` and `render` commands).
struct CellDetail {
  std::vector<TaxelSample> samples;
  std::vector<Eigen::VectorXd> activations;
  std::vector<LabeledUtterance> utterances;
  std::vector<BodyPart> ground_truth;
  std::vector<Prediction> predicted;
  MappingResult mapping;
};

/// Seeds of one cell, one tagged stream per module. Corpus depends on the
/// repetition only, subset and mixture seeds on (size, repetition), and the
/// noise seed on (size, noise, repetition), so every noise level of a
/// repetition clusters the same data from the same start.
struct CellSeeds {
  std::uint64_t corpus = 0;
  std::uint64_t subset = 0;
  std::uint64_t noise = 0;
  std::uint64_t gmm = 0;
};
CellSeeds cell_seeds(std::uint64_t base, std::size_t size, double noise, std::size_t repetition);

/// generate corpus -> subsample -> project -> inject noise -> fit + map ->
/// evaluate. Both mappers share data, noise and the initial mixture seed.
/// Fit failures are recorded in the returned records, not thrown.
std::vector<CellRecord> run_cell(const ExperimentContext& context, std::size_t size, double noise,
                                 std::size_t repetition, MapperSelection mapper);

/// Single mapper with the intermediate products kept.
CellRecord run_cell_detailed(const ExperimentContext& context, std::size_t size, double noise,
                             std::size_t repetition, Mapper mapper, CellDetail& detail);

struct Summary {
  std::size_t count = 0;  // runs contributing
  double mean = std::numeric_limits<double>::quiet_NaN();
  double stddev = std::numeric_limits<double>::quiet_NaN();  // sample standard deviation, 0 for one run
};

Summary summarize(std::span<const double> values);

struct AggregateRecord {
  std::size_t size = 0;
  double noise = 0.0;
  Mapper mapper = Mapper::one_step;
  std::size_t runs = 0;
  std::size_t failures = 0;
  Summary accuracy;
  std::array<Summary, kBodyPartCount> parts;
};

struct SweepResult {
  std::vector<CellRecord> records;  // sorted by size, noise, mapper, repetition
  std::vector<AggregateRecord> aggregates;
};

std::vector<AggregateRecord> aggregate(std::span<const CellRecord> records);

/// Runs every cell (in parallel when threads allow) and aggregates.
SweepResult run_sweep(const SweepConfig& config);
SweepResult run_sweep(const ExperimentContext& context);

void write_sweep_csv(std::ostream& out, std::span<const CellRecord> records);
void write_aggregate_csv(std::ostream& out, std::span<const AggregateRecord> aggregates);

}  // namespace bodymap
