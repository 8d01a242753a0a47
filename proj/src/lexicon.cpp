#include "bodymap/lexicon.hpp"

#include <array>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace bodymap {

std::vector<LabeledUtterance> utterances_from_dataset(std::span<const TaxelSample> data) {
  std::vector<LabeledUtterance> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back({data[i].label, data[i].label, i});
  return out;
}

std::vector<LabeledUtterance> utterances_from_labels(std::span<const BodyPart> labels) {
  std::vector<LabeledUtterance> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out.push_back({labels[i], labels[i], i});
  return out;
}

std::size_t corrupted_count(double p, std::size_t n) {
  // The small slack keeps products such as 0.3 * 5 = 1.4999999999999998 on
  // the intended side of the half.
  const double k = std::floor(p * static_cast<double>(n) + 0.5 + 1e-9);
  return std::min(n, static_cast<std::size_t>(std::max(0.0, k)));
}

std::vector<LabeledUtterance> inject_noise(std::span<const LabeledUtterance> utterances, double p, Rng& rng,
                                           NoiseMode mode) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("noise level must lie in [0, 1]");
  std::vector<LabeledUtterance> out(utterances.begin(), utterances.end());
  if (p == 0.0) return out;

  std::array<std::vector<std::size_t>, kBodyPartCount> by_class;
  for (std::size_t i = 0; i < out.size(); ++i) by_class[index_of(out[i].label)].push_back(i);

  std::vector<std::size_t> selected;
  for (const auto& members : by_class) {
    const auto k = corrupted_count(p, members.size());
    if (k == 0) continue;
    for (auto pick : subsample_indices(members.size(), k, rng)) selected.push_back(members[pick]);
  }

  if (mode == NoiseMode::permute) {
    std::vector<BodyPart> pool;
    pool.reserve(selected.size());
    for (auto i : selected) pool.push_back(out[i].label);
    shuffle(std::span<BodyPart>(pool), rng);
    for (std::size_t k = 0; k < selected.size(); ++k) out[selected[k]].label = pool[k];
  } else {
    for (auto i : selected) out[i].label = kAllBodyParts[uniform_index(rng, kBodyPartCount)];
  }
  return out;
}

void write_utterances(std::ostream& out, std::span<const LabeledUtterance> utterances) {
  out << "# bodymap-utterances v1\n";
  for (const auto& u : utterances) {
    out << u.sample_index << ' ' << token(u.label) << ' ' << token(u.ground_truth) << '\n';
  }
}

}  // namespace bodymap
