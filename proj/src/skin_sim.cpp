#include "bodymap/skin_sim.hpp"

#include <algorithm>
#include <array>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "text_io.hpp"

namespace bodymap {
namespace {

constexpr std::size_t kModuleTaxels = 10;
constexpr std::array<std::size_t, 5> kPalmRegionSizes = {9, 9, 9, 9, 8};
constexpr std::size_t kFingertipTaxels = 12;

void add_region(SkinLayout& layout, SkinLayout::Part& part, BodyPart label, std::size_t begin,
                std::size_t size) {
  StimulationRegion region{label, part.part, {}};
  region.taxels.resize(size);
  std::iota(region.taxels.begin(), region.taxels.end(), static_cast<std::uint16_t>(begin));
  part.regions.push_back(layout.regions.size());
  layout.regions.push_back(std::move(region));
}

}  // namespace

std::string_view token(SkinPart p) {
  static constexpr std::array<std::string_view, kSkinPartCount> names = {"torso", "upper_arm",
                                                                          "forearm", "hand"};
  return names[static_cast<std::size_t>(p)];
}

TaxelRange SkinLayout::label_range(BodyPart label) const {
  TaxelRange r{taxel_count, 0};
  for (const auto& region : regions) {
    if (region.label != label || region.taxels.empty()) continue;
    r.begin = std::min<std::size_t>(r.begin, region.taxels.front());
    r.end = std::max<std::size_t>(r.end, region.taxels.back() + 1u);
  }
  if (r.end == 0) return {0, 0};
  return r;
}

void SkinLayout::validate() const {
  if (parts.size() != kSkinPartCount) throw std::invalid_argument("layout must have 4 skin parts");
  std::size_t expected = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& p = parts[i];
    if (static_cast<std::size_t>(p.part) != i) throw std::invalid_argument("skin parts out of order");
    if (p.range.begin != expected || p.range.end <= p.range.begin) {
      throw std::invalid_argument("skin part ranges must tile the taxel index space");
    }
    expected = p.range.end;
    if (p.regions.empty()) throw std::invalid_argument("skin part without stimulation regions");
    for (auto ri : p.regions) {
      if (ri >= regions.size()) throw std::invalid_argument("region index out of range");
      const auto& r = regions[ri];
      if (r.part != p.part || r.taxels.empty()) throw std::invalid_argument("malformed region");
      for (auto t : r.taxels) {
        if (!p.range.contains(t)) throw std::invalid_argument("region leaves its skin part");
      }
    }
  }
  if (expected != taxel_count) throw std::invalid_argument("skin parts do not cover every taxel");
}

std::uint64_t SkinLayout::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  };
  mix(taxel_count);
  for (const auto& p : parts) {
    mix(static_cast<std::uint64_t>(p.part));
    mix(p.range.begin);
    mix(p.range.end);
    mix(p.regions.size());
  }
  for (const auto& r : regions) {
    mix(index_of(r.label));
    mix(r.taxels.size());
    for (auto t : r.taxels) mix(t);
  }
  return h;
}

SkinLayout default_layout() {
  SkinLayout layout;
  layout.taxel_count = kDefaultTaxelCount;

  constexpr std::array<std::pair<SkinPart, std::size_t>, 3> modular = {{
      {SkinPart::torso, 440},
      {SkinPart::upper_arm, 380},
      {SkinPart::forearm, 230},
  }};
  constexpr std::array<BodyPart, 3> modular_labels = {BodyPart::torso, BodyPart::upper_arm,
                                                      BodyPart::forearm};
  std::size_t next = 0;
  for (std::size_t i = 0; i < modular.size(); ++i) {
    SkinLayout::Part part{modular[i].first, {next, next + modular[i].second}, {}};
    for (std::size_t t = part.range.begin; t < part.range.end; t += kModuleTaxels) {
      add_region(layout, part, modular_labels[i], t, kModuleTaxels);
    }
    next = part.range.end;
    layout.parts.push_back(std::move(part));
  }

  constexpr std::size_t hand_size =
      44 + kFingertipTaxels * 5;  // palm + fingertips
  SkinLayout::Part hand{SkinPart::hand, {next, next + hand_size}, {}};
  for (auto size : kPalmRegionSizes) {
    add_region(layout, hand, BodyPart::palm, next, size);
    next += size;
  }
  for (auto finger : {BodyPart::little_finger, BodyPart::ring_finger, BodyPart::middle_finger,
                      BodyPart::index_finger, BodyPart::thumb}) {
    add_region(layout, hand, finger, next, kFingertipTaxels);
    next += kFingertipTaxels;
  }
  layout.parts.push_back(std::move(hand));
  layout.validate();
  return layout;
}

StimulationEvent generate_stimulation(const SkinLayout& layout, Rng& rng) {
  const auto& part = layout.parts[uniform_index(rng, layout.parts.size())];
  const auto region = part.regions[uniform_index(rng, part.regions.size())];
  return {region, layout.regions[region].label};
}

std::vector<std::uint8_t> TaxelSample::dense(std::size_t taxel_count) const {
  std::vector<std::uint8_t> a(taxel_count, 0);
  for (auto t : active) {
    if (t >= taxel_count) throw std::invalid_argument("active taxel beyond taxel count");
    a[t] = 1;
  }
  return a;
}

std::vector<TaxelSample> generate_dataset(const SkinLayout& layout, std::size_t n_stimulations,
                                          std::size_t samples_per_stimulation, Rng& rng) {
  if (n_stimulations == 0) throw std::invalid_argument("n_stimulations must be >= 1");
  if (samples_per_stimulation == 0) throw std::invalid_argument("samples_per_stimulation must be >= 1");
  std::vector<TaxelSample> data;
  data.reserve(n_stimulations * samples_per_stimulation);
  for (std::size_t s = 0; s < n_stimulations; ++s) {
    const auto event = generate_stimulation(layout, rng);
    TaxelSample sample{layout.regions[event.region].taxels, event.label,
                       static_cast<std::uint32_t>(s)};
    for (std::size_t k = 0; k < samples_per_stimulation; ++k) data.push_back(sample);
  }
  return data;
}

std::vector<std::size_t> subsample_indices(std::size_t population, std::size_t n, Rng& rng) {
  if (n == 0 || n > population) {
    throw std::invalid_argument("subsample size " + std::to_string(n) + " not in [1, " +
                                std::to_string(population) + "]");
  }
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates: the first n slots end up a uniform n-subset.
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(rng, population - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<TaxelSample> subsample(std::span<const TaxelSample> data, std::size_t n, Rng& rng) {
  const auto idx = subsample_indices(data.size(), n, rng);
  return select(data, std::span<const std::size_t>(idx));
}

void write_dataset(std::ostream& out, const DatasetHeader& header, std::span<const TaxelSample> data) {
  out << "# bodymap-dataset v1\n";
  out << "# taxels " << header.taxel_count << '\n';
  out << "# layout_hash " << detail::hex(header.layout_hash) << '\n';
  out << "# seed " << header.seed << '\n';
  out << "# samples " << data.size() << '\n';
  for (const auto& s : data) {
    out << s.stimulation_id << ' ' << token(s.label) << ' ';
    for (std::size_t i = 0; i < s.active.size(); ++i) {
      if (i) out << ',';
      out << s.active[i];
    }
    out << '\n';
  }
}

DatasetFile read_dataset(std::istream& in) {
  DatasetFile file;
  std::string line;
  std::size_t line_no = 0;
  bool saw_magic = false;
  std::size_t declared = 0;
  bool has_declared = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string key;
      hs >> key;
      if (key == "bodymap-dataset") {
        saw_magic = true;
      } else if (key == "taxels") {
        hs >> file.header.taxel_count;
      } else if (key == "layout_hash") {
        std::string v;
        hs >> v;
        file.header.layout_hash = detail::parse_hex(v);
      } else if (key == "seed") {
        hs >> file.header.seed;
      } else if (key == "samples") {
        hs >> declared;
        has_declared = true;
      }
      if (hs.fail()) detail::parse_error("dataset", line_no, "bad header line");
      continue;
    }
    if (!saw_magic) detail::parse_error("dataset", line_no, "missing '# bodymap-dataset' header");
    std::istringstream rs(line);
    TaxelSample s;
    std::string label, taxels;
    if (!(rs >> s.stimulation_id >> label >> taxels)) detail::parse_error("dataset", line_no, "bad record");
    try {
      s.label = parse_body_part(label);
    } catch (const std::invalid_argument& e) {
      detail::parse_error("dataset", line_no, e.what());
    }
    for (auto field : detail::split(taxels, ',')) {
      const auto t = detail::parse_unsigned(field, "dataset", line_no);
      if (t >= file.header.taxel_count) detail::parse_error("dataset", line_no, "taxel index out of range");
      s.active.push_back(static_cast<std::uint16_t>(t));
    }
    std::sort(s.active.begin(), s.active.end());
    file.samples.push_back(std::move(s));
  }
  if (!saw_magic) detail::parse_error("dataset", line_no, "empty or foreign file");
  if (has_declared && declared != file.samples.size()) {
    detail::parse_error("dataset", line_no, "sample count does not match header");
  }
  return file;
}

}  // namespace bodymap
