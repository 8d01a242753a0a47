#pragma once

// Synthetic tactile stimulation of the robot's right upper-body skin: a
// 1154-taxel surface split into torso, upper arm, forearm and hand, stimulated
// one small region at a time.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "bodymap/body_part.hpp"
#include "bodymap/random.hpp"

namespace bodymap {

/// Coarse skin parts used by the stimulation generator. The hand is a single
/// skin part even though it carries six fine-grained labels.
enum class SkinPart : std::uint8_t { torso, upper_arm, forearm, hand };
inline constexpr std::size_t kSkinPartCount = 4;

std::string_view token(SkinPart p);

/// Half-open taxel index interval [begin, end).
struct TaxelRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool contains(std::size_t taxel) const { return taxel >= begin && taxel < end; }
  friend bool operator==(const TaxelRange&, const TaxelRange&) = default;
};

/// A set of taxels that are switched on together by one stimulation event.
struct StimulationRegion {
  BodyPart label;
  SkinPart part;
  std::vector<std::uint16_t> taxels;  // sorted
};

struct SkinLayout {
  struct Part {
    SkinPart part;
    TaxelRange range;
    std::vector<std::size_t> regions;  // indices into SkinLayout::regions
  };

  std::size_t taxel_count = 0;
  std::vector<Part> parts;               // ordered torso, upper arm, forearm, hand
  std::vector<StimulationRegion> regions;

  const Part& part(SkinPart p) const { return parts[static_cast<std::size_t>(p)]; }

  /// Smallest range holding every region carrying `label`.
  TaxelRange label_range(BodyPart label) const;

  /// Throws std::invalid_argument when part ranges do not tile
  /// [0, taxel_count) or a region leaves its part.
  void validate() const;

  /// FNV-1a over the part ranges and region contents; stored in dataset
  /// headers so files generated with a different layout are rejected.
  std::uint64_t hash() const;
};

inline constexpr std::size_t kDefaultTaxelCount = 1154;

/// Canonical layout: torso 440, upper arm 380 and forearm 230 taxels cut into
/// consecutive 10-taxel modules; hand 104 taxels = palm 44 (subregions of
/// 9,9,9,9,8) followed by five 12-taxel fingertips (little .. thumb).
SkinLayout default_layout();

struct StimulationEvent {
  std::size_t region = 0;  // index into SkinLayout::regions
  BodyPart label = BodyPart::torso;
};

/// Picks a skin part uniformly, then a region uniformly within it.
StimulationEvent generate_stimulation(const SkinLayout& layout, Rng& rng);

struct TaxelSample {
  std::vector<std::uint16_t> active;  // sorted indices of taxels that are on
  BodyPart label = BodyPart::torso;
  std::uint32_t stimulation_id = 0;

  /// Binary activation vector of length `taxel_count`.
  std::vector<std::uint8_t> dense(std::size_t taxel_count) const;
  friend bool operator==(const TaxelSample&, const TaxelSample&) = default;
};

inline constexpr std::size_t kDefaultSamplesPerStimulation = 30;  // 3 s at 10 Hz

/// n_stimulations events, each repeated samples_per_stimulation times.
/// Throws std::invalid_argument when either count is zero.
std::vector<TaxelSample> generate_dataset(const SkinLayout& layout, std::size_t n_stimulations,
                                          std::size_t samples_per_stimulation, Rng& rng);

/// Sorted uniform random subset of {0, .., population-1} of size n.
std::vector<std::size_t> subsample_indices(std::size_t population, std::size_t n, Rng& rng);

/// Order-preserving uniform subset of size n; throws std::invalid_argument
/// unless 1 <= n <= data.size().
std::vector<TaxelSample> subsample(std::span<const TaxelSample> data, std::size_t n, Rng& rng);

template <typename T>
std::vector<T> select(std::span<const T> items, std::span<const std::size_t> indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(items[i]);
  return out;
}

struct DatasetHeader {
  std::size_t taxel_count = kDefaultTaxelCount;
  std::uint64_t layout_hash = 0;
  std::uint64_t seed = 0;
};

struct DatasetFile {
  DatasetHeader header;
  std::vector<TaxelSample> samples;
};

/// Text format: a few "# key value" header lines, then one record per line:
/// `stimulation_id label taxel,taxel,...`.
void write_dataset(std::ostream& out, const DatasetHeader& header, std::span<const TaxelSample> data);
DatasetFile read_dataset(std::istream& in);

}  // namespace bodymap
