#include "bodymap/homunculus.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "text_io.hpp"

namespace bodymap {

void HomunculusWeights::validate() const {
  if (neurons() != grid_rows * grid_cols) {
    throw std::invalid_argument("weight rows do not match the neuron grid");
  }
  if ((weights.array() < 0.0).any()) throw std::invalid_argument("weights must be non-negative");
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    if (!(weights.row(i).array() > 0.0).any()) {
      throw std::invalid_argument("neuron " + std::to_string(i) + " has an empty receptive field");
    }
  }
}

ActivationVector project(const HomunculusWeights& w, const TaxelSample& sample) {
  ActivationVector x = ActivationVector::Zero(w.weights.rows());
  for (auto t : sample.active) {
    if (t >= w.weights.cols()) throw std::invalid_argument("active taxel beyond weight matrix");
    x += w.weights.col(t);
  }
  return x;
}

ActivationVector project(const HomunculusWeights& w, std::span<const std::uint8_t> activation) {
  if (activation.size() != w.taxels()) {
    throw std::invalid_argument("activation length " + std::to_string(activation.size()) +
                                " does not match " + std::to_string(w.taxels()) + " taxels");
  }
  ActivationVector x = ActivationVector::Zero(w.weights.rows());
  for (std::size_t t = 0; t < activation.size(); ++t) {
    if (activation[t]) x += w.weights.col(static_cast<Eigen::Index>(t));
  }
  return x;
}

std::vector<ProjectedSample> batch_project(const HomunculusWeights& w, std::span<const TaxelSample> data) {
  std::vector<ProjectedSample> out;
  out.reserve(data.size());
  for (const auto& s : data) out.push_back({project(w, s), s.label});
  return out;
}

namespace {

std::array<std::vector<std::size_t>, kSkinPartCount> labels_per_skin_part(const SkinLayout& layout) {
  std::array<std::vector<std::size_t>, kSkinPartCount> out;
  for (const auto& r : layout.regions) {
    auto& v = out[static_cast<std::size_t>(r.part)];
    if (std::find(v.begin(), v.end(), index_of(r.label)) == v.end()) v.push_back(index_of(r.label));
  }
  return out;
}

std::vector<std::size_t> largest_remainder(std::span<const double> shares, std::size_t total) {
  std::vector<std::size_t> out(shares.size());
  std::vector<double> rem(shares.size());
  std::size_t used = 0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    out[i] = static_cast<std::size_t>(std::floor(shares[i]));
    rem[i] = shares[i] - static_cast<double>(out[i]);
    used += out[i];
  }
  std::vector<std::size_t> order(shares.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; used < total; ++k, ++used) ++out[order[k % order.size()]];
  return out;
}

}  // namespace

NeuronAllocation default_allocation(const SkinLayout& layout, std::size_t neurons) {
  std::vector<double> shares;
  for (const auto& p : layout.parts) {
    shares.push_back(static_cast<double>(p.range.size()) * static_cast<double>(neurons) /
                     static_cast<double>(layout.taxel_count));
  }
  const auto per_part = largest_remainder(shares, neurons);

  NeuronAllocation alloc{};
  const auto labels = labels_per_skin_part(layout);
  for (std::size_t p = 0; p < kSkinPartCount; ++p) {
    const auto& ls = labels[p];
    if (ls.empty()) continue;
    const double part_size = static_cast<double>(layout.parts[p].range.size());
    std::size_t largest = ls.front();
    for (auto l : ls) {
      if (layout.label_range(body_part_at(l)).size() > layout.label_range(body_part_at(largest)).size()) {
        largest = l;
      }
    }
    std::size_t given = 0;
    for (auto l : ls) {
      if (l == largest) continue;
      const double share = static_cast<double>(layout.label_range(body_part_at(l)).size()) *
                           static_cast<double>(per_part[p]) / part_size;
      alloc[l] = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(share + 0.5)));
      given += alloc[l];
    }
    if (given >= per_part[p]) throw std::invalid_argument("too few neurons to split skin part");
    alloc[largest] = per_part[p] - given;
  }
  return alloc;
}

std::array<std::size_t, kSkinPartCount> skin_part_totals(const SkinLayout& layout,
                                                         const NeuronAllocation& allocation) {
  std::array<std::size_t, kSkinPartCount> totals{};
  const auto labels = labels_per_skin_part(layout);
  for (std::size_t p = 0; p < kSkinPartCount; ++p) {
    for (auto l : labels[p]) totals[p] += allocation[l];
  }
  return totals;
}

std::vector<BodyPart> adjacent_parts(BodyPart p) {
  using enum BodyPart;
  switch (p) {
    case torso: return {upper_arm};
    case upper_arm: return {torso, forearm};
    case forearm: return {upper_arm, palm};
    case palm: return {forearm, little_finger, ring_finger, middle_finger, index_finger, thumb};
    default: return {palm};
  }
}

HomunculusWeights surrogate_weights(const SkinLayout& layout, const SurrogateConfig& config, Rng& rng) {
  if (!(config.overlap >= 0.0 && config.overlap < 1.0)) {
    throw std::invalid_argument("overlap must lie in [0, 1)");
  }
  if (!(config.field_fraction > 0.0 && config.field_fraction <= 1.0)) {
    throw std::invalid_argument("field_fraction must lie in (0, 1]");
  }
  if (!(config.spill_fraction > 0.0 && config.spill_fraction < 1.0)) {
    throw std::invalid_argument("spill_fraction must lie in (0, 1)");
  }
  const bool use_default = std::all_of(config.allocation.begin(), config.allocation.end(),
                                       [](auto n) { return n == 0; });
  const auto alloc = use_default ? default_allocation(layout) : config.allocation;
  const auto total = std::accumulate(alloc.begin(), alloc.end(), std::size_t{0});
  if (total != kNeuronCount) {
    throw std::invalid_argument("neuron allocation sums to " + std::to_string(total) + ", expected " +
                                std::to_string(kNeuronCount));
  }

  std::array<std::vector<std::size_t>, kBodyPartCount> pools;
  for (auto part : kAllBodyParts) {
    const auto r = layout.label_range(part);
    for (auto t = r.begin; t < r.end; ++t) pools[index_of(part)].push_back(t);
  }

  // Draws k distinct taxels from a pool.
  auto draw = [&rng](const std::vector<std::size_t>& pool, std::size_t k) {
    std::vector<std::size_t> copy = pool;
    k = std::min(k, copy.size());
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(copy[i], copy[i + uniform_index(rng, copy.size() - i)]);
    }
    copy.resize(k);
    return copy;
  };

  // Contiguous run of k taxels for the n-th of m neurons, spread evenly over
  // the pool with a jitter of up to half a spacing.
  auto window = [&rng](const std::vector<std::size_t>& pool, std::size_t k, std::size_t n, std::size_t m) {
    k = std::min(k, pool.size());
    const double room = static_cast<double>(pool.size() - k);
    const double spacing = m > 1 ? room / static_cast<double>(m - 1) : 0.0;
    const double centre = m > 1 ? spacing * static_cast<double>(n) : room / 2.0;
    const double start = std::clamp(centre + (uniform01(rng) - 0.5) * spacing, 0.0, room);
    const auto s = static_cast<std::size_t>(std::lround(start));
    return std::vector<std::size_t>(pool.begin() + static_cast<std::ptrdiff_t>(s),
                                    pool.begin() + static_cast<std::ptrdiff_t>(s + k));
  };

  std::vector<std::vector<std::size_t>> fields;
  std::vector<BodyPart> owner;
  for (auto part : kAllBodyParts) {
    const auto& pool = pools[index_of(part)];
    if (alloc[index_of(part)] > 0 && pool.empty()) {
      throw std::invalid_argument("neurons allocated to a part without taxels");
    }
    const auto field_size = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(config.field_fraction * static_cast<double>(pool.size()))));
    const auto m = alloc[index_of(part)];
    for (std::size_t n = 0; n < m; ++n) {
      auto field = config.shape == FieldShape::local ? window(pool, field_size, n, m) : draw(pool, field_size);
      if (uniform01(rng) < config.overlap) {
        const auto neighbours = adjacent_parts(part);
        const auto other = neighbours[uniform_index(rng, neighbours.size())];
        const auto k = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::lround(config.spill_fraction * static_cast<double>(field.size()))), 1,
            field.size());
        field.resize(field.size() - std::min(k, field.size() - 1));
        const auto& spill_pool = pools[index_of(other)];
        const auto spill = config.shape == FieldShape::local
                               ? window(spill_pool, k, uniform_index(rng, spill_pool.size()), spill_pool.size())
                               : draw(spill_pool, k);
        for (auto t : spill) field.push_back(t);
      }
      fields.push_back(std::move(field));
      owner.push_back(part);
    }
  }

  std::vector<std::size_t> coverage(layout.taxel_count, 0);
  for (const auto& f : fields) {
    for (auto t : f) ++coverage[t];
  }
  for (auto part : kAllBodyParts) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < owner.size(); ++i) {
      if (owner[i] == part) candidates.push_back(i);
    }
    for (auto t : pools[index_of(part)]) {
      if (coverage[t] > 0) continue;
      if (candidates.empty()) throw std::invalid_argument("taxels of a part without neurons");
      fields[candidates[uniform_index(rng, candidates.size())]].push_back(t);
      ++coverage[t];
    }
  }

  HomunculusWeights w;
  w.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(kNeuronCount),
                                    static_cast<Eigen::Index>(layout.taxel_count));
  for (std::size_t i = 0; i < fields.size(); ++i) {
    auto& f = fields[i];
    std::sort(f.begin(), f.end());
    f.erase(std::unique(f.begin(), f.end()), f.end());
    const double v = 1.0 / static_cast<double>(f.size());
    for (auto t : f) w.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = v;
  }
  w.overlap = config.overlap;
  w.validate();
  return w;
}

BodyPart dominant_part(const SkinLayout& layout, const HomunculusWeights& w, std::size_t neuron) {
  BodyPart best = BodyPart::torso;
  double best_mass = -1.0;
  for (auto part : kAllBodyParts) {
    const auto r = layout.label_range(part);
    if (r.size() == 0) continue;
    const double mass = w.weights.row(static_cast<Eigen::Index>(neuron))
                            .segment(static_cast<Eigen::Index>(r.begin), static_cast<Eigen::Index>(r.size()))
                            .sum();
    if (mass > best_mass) {
      best_mass = mass;
      best = part;
    }
  }
  return best;
}

void write_weights(std::ostream& out, const HomunculusWeights& w) {
  out << "# bodymap-weights v1\n";
  out << "# rows " << w.neurons() << '\n';
  out << "# cols " << w.taxels() << '\n';
  out << "# grid " << w.grid_rows << ' ' << w.grid_cols << '\n';
  out << "# seed " << w.seed << '\n';
  out << "# overlap " << detail::format_double(w.overlap) << '\n';
  for (Eigen::Index i = 0; i < w.weights.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.weights.cols(); ++j) {
      if (j) out << ' ';
      const double v = w.weights(i, j);
      if (v == 0.0) {
        out << '0';
      } else {
        out << detail::format_double(v);
      }
    }
    out << '\n';
  }
}

HomunculusWeights read_weights(std::istream& in) {
  HomunculusWeights w;
  std::size_t rows = 0, cols = 0;
  bool saw_magic = false;
  std::string line;
  std::size_t line_no = 0;
  Eigen::Index row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string key;
      hs >> key;
      if (key == "bodymap-weights") {
        saw_magic = true;
      } else if (key == "rows") {
        hs >> rows;
      } else if (key == "cols") {
        hs >> cols;
      } else if (key == "grid") {
        hs >> w.grid_rows >> w.grid_cols;
      } else if (key == "seed") {
        hs >> w.seed;
      } else if (key == "overlap") {
        hs >> w.overlap;
      }
      if (hs.fail()) detail::parse_error("weights", line_no, "bad header line");
      continue;
    }
    if (!saw_magic || rows == 0 || cols == 0) detail::parse_error("weights", line_no, "header incomplete");
    if (w.weights.size() == 0) {
      w.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    }
    if (row >= w.weights.rows()) detail::parse_error("weights", line_no, "too many rows");
    const auto fields = detail::split(detail::trim(line), ' ');
    if (fields.size() != cols) detail::parse_error("weights", line_no, "wrong number of columns");
    for (std::size_t j = 0; j < cols; ++j) {
      w.weights(row, static_cast<Eigen::Index>(j)) = detail::parse_double(fields[j], "weights", line_no);
    }
    ++row;
  }
  if (!saw_magic) detail::parse_error("weights", line_no, "empty or foreign file");
  if (row != static_cast<Eigen::Index>(rows)) detail::parse_error("weights", line_no, "too few rows");
  try {
    w.validate();
  } catch (const std::invalid_argument& e) {
    detail::parse_error("weights", line_no, e.what());
  }
  return w;
}

}  // namespace bodymap
