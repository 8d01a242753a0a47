#include "bodymap/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "bodymap/errors.hpp"
#include "text_io.hpp"

namespace bodymap {

double accuracy(std::span<const Prediction> predicted, std::span<const BodyPart> ground_truth) {
  if (predicted.size() != ground_truth.size()) {
    throw std::invalid_argument("accuracy: predictions and ground truth differ in length");
  }
  if (predicted.empty()) throw std::invalid_argument("accuracy: empty input");
  std::size_t tp = 0;
  for (std::size_t n = 0; n < predicted.size(); ++n) {
    if (predicted[n] && *predicted[n] == ground_truth[n]) ++tp;
  }
  return static_cast<double>(tp) / static_cast<double>(predicted.size());
}

PartAccuracy per_part_accuracy(std::span<const Prediction> predicted, std::span<const BodyPart> ground_truth) {
  if (predicted.size() != ground_truth.size()) {
    throw std::invalid_argument("per_part_accuracy: predictions and ground truth differ in length");
  }
  std::array<std::size_t, kBodyPartCount> total{}, correct{};
  for (std::size_t n = 0; n < predicted.size(); ++n) {
    const auto k = index_of(ground_truth[n]);
    ++total[k];
    if (predicted[n] && *predicted[n] == ground_truth[n]) ++correct[k];
  }
  PartAccuracy out{};
  for (std::size_t k = 0; k < kBodyPartCount; ++k) {
    if (total[k] > 0) out[k] = static_cast<double>(correct[k]) / static_cast<double>(total[k]);
  }
  return out;
}

BackProjection back_project(std::span<const Eigen::VectorXd> activations, std::span<const Prediction> predicted) {
  if (activations.size() != predicted.size()) {
    throw std::invalid_argument("back_project: activations and labels differ in length");
  }
  const Eigen::Index neurons = activations.empty() ? static_cast<Eigen::Index>(kNeuronCount) : activations.front().size();
  BackProjection bp;
  bp.strength = Eigen::MatrixXd::Zero(neurons, static_cast<Eigen::Index>(kBodyPartCount));
  for (std::size_t n = 0; n < activations.size(); ++n) {
    if (!predicted[n]) continue;
    if (activations[n].size() != neurons) throw std::invalid_argument("back_project: ragged activations");
    bp.strength.col(static_cast<Eigen::Index>(index_of(*predicted[n]))) += activations[n];
  }
  bp.dominant.assign(static_cast<std::size_t>(neurons), std::nullopt);
  for (Eigen::Index i = 0; i < neurons; ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < bp.strength.cols(); ++k) {
      if (bp.strength(i, k) > bp.strength(i, best)) best = k;
    }
    if (bp.strength(i, best) > 0.0) bp.dominant[static_cast<std::size_t>(i)] = body_part_at(static_cast<std::size_t>(best));
  }
  return bp;
}

Palette default_palette() {
  return {{
      {230, 159, 0},    // torso
      {86, 180, 233},   // upper arm
      {0, 158, 115},    // forearm
      {213, 94, 0},     // palm
      {204, 121, 167},  // little
      {0, 114, 178},    // ring
      {240, 228, 66},   // middle
      {120, 60, 160},   // index
      {90, 90, 90},     // thumb
  }};
}

Image render_heatmap(const BackProjection& bp, const Palette& palette, std::size_t scale, std::size_t grid_rows,
                     std::size_t grid_cols) {
  if (scale == 0) throw std::invalid_argument("render_heatmap: scale must be positive");
  if (static_cast<std::size_t>(bp.strength.rows()) > grid_rows * grid_cols) {
    throw std::invalid_argument("render_heatmap: more neurons than grid cells");
  }
  Image img{grid_cols * scale, grid_rows * scale, {}};
  img.pixels.assign(img.width * img.height, kBackground);

  double peak = 0.0;
  for (Eigen::Index i = 0; i < bp.strength.rows(); ++i) {
    if (bp.dominant[static_cast<std::size_t>(i)]) {
      peak = std::max(peak, bp.strength(i, static_cast<Eigen::Index>(index_of(*bp.dominant[static_cast<std::size_t>(i)]))));
    }
  }
  for (std::size_t i = 0; i < static_cast<std::size_t>(bp.strength.rows()); ++i) {
    if (!bp.dominant[i] || peak <= 0.0) continue;
    const auto k = index_of(*bp.dominant[i]);
    const double t = bp.strength(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) / peak;
    const auto blend = [t](std::uint8_t bg, std::uint8_t fg) {
      return static_cast<std::uint8_t>(std::lround(bg + (static_cast<double>(fg) - bg) * t));
    };
    const Rgb c{blend(kBackground.r, palette[k].r), blend(kBackground.g, palette[k].g),
                blend(kBackground.b, palette[k].b)};
    const auto row0 = (i / grid_cols) * scale;
    const auto col0 = (i % grid_cols) * scale;
    for (std::size_t r = row0; r < row0 + scale; ++r) {
      for (std::size_t col = col0; col < col0 + scale; ++col) img.pixels[r * img.width + col] = c;
    }
  }
  return img;
}

void write_ppm(std::ostream& out, const Image& image) {
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  for (const auto& p : image.pixels) {
    const char rgb[3] = {static_cast<char>(p.r), static_cast<char>(p.g), static_cast<char>(p.b)};
    out.write(rgb, 3);
  }
}

std::string_view token(Mapper m) { return m == Mapper::one_step ? "onestep" : "sequential"; }

MapperSelection parse_mapper_selection(std::string_view text) {
  if (text == "onestep" || text == "one-step" || text == "one_step") return MapperSelection::one_step;
  if (text == "sequential") return MapperSelection::sequential;
  if (text == "both") return MapperSelection::both;
  throw std::invalid_argument("unknown mapper '" + std::string(text) + "' (onestep|sequential|both)");
}

std::vector<Mapper> mappers_of(MapperSelection selection) {
  switch (selection) {
    case MapperSelection::one_step: return {Mapper::one_step};
    case MapperSelection::sequential: return {Mapper::sequential};
    default: return {Mapper::one_step, Mapper::sequential};
  }
}

void SweepConfig::validate() const {
  if (sizes.empty() || noise_levels.empty()) throw std::invalid_argument("sweep needs sizes and noise levels");
  for (auto s : sizes) {
    if (s < pipeline.components) {
      throw std::invalid_argument("dataset size " + std::to_string(s) + " is below the component count");
    }
  }
  for (auto p : noise_levels) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("noise levels must lie in [0, 1]");
  }
  if (repetitions == 0) throw std::invalid_argument("repetitions must be >= 1");
  if (pipeline.components == 0) throw std::invalid_argument("components must be >= 1");
  if (pipeline.samples_per_stimulation == 0 || pipeline.corpus_stimulations == 0) {
    throw std::invalid_argument("corpus sizes must be positive");
  }
}

ExperimentContext make_context(const SweepConfig& config) {
  config.validate();
  ExperimentContext ctx{config, default_layout(), {}};
  const auto seed = derive_seed(config.seed, {0x77});
  Rng rng(seed);
  ctx.weights = surrogate_weights(ctx.layout, config.pipeline.surrogate, rng);
  ctx.weights.seed = seed;
  return ctx;
}

std::string format_flags(unsigned flags) {
  std::string out;
  auto add = [&out](std::string_view s) {
    if (!out.empty()) out += ';';
    out += s;
  };
  if (flags & kFlagFitFailed) add("fit_failed");
  if (flags & kFlagPartial) add("partial");
  if (flags & kFlagLabelIncomplete) add("label_incomplete");
  if (flags & kFlagUnmapped) add("unmapped");
  return out;
}

CellSeeds cell_seeds(std::uint64_t base, std::size_t size, double noise, std::size_t repetition) {
  const auto noise_key = static_cast<std::uint64_t>(std::llround(noise * 1e6));
  return {
      derive_seed(base, {1, repetition}),
      derive_seed(base, {2, size, repetition}),
      derive_seed(base, {3, size, noise_key, repetition}),
      derive_seed(base, {4, size, repetition}),
  };
}

namespace {

void prepare_cell(const ExperimentContext& ctx, std::size_t size, double noise, std::size_t repetition,
                  CellDetail& detail) {
  const auto& pipe = ctx.config.pipeline;
  const auto seeds = cell_seeds(ctx.config.seed, size, noise, repetition);
  const auto spp = pipe.samples_per_stimulation;
  const auto n_stim = std::max(pipe.corpus_stimulations, (size + spp - 1) / spp);

  Rng corpus_rng(seeds.corpus);
  const auto corpus = generate_dataset(ctx.layout, n_stim, spp, corpus_rng);
  Rng subset_rng(seeds.subset);
  detail.samples = subsample(corpus, size, subset_rng);

  // Samples of one stimulation share their activation; project each once.
  detail.activations.clear();
  detail.activations.reserve(detail.samples.size());
  std::uint32_t last_id = 0;
  bool have_last = false;
  for (const auto& s : detail.samples) {
    if (have_last && s.stimulation_id == last_id) {
      detail.activations.push_back(detail.activations.back());
    } else {
      detail.activations.push_back(project(ctx.weights, s));
    }
    last_id = s.stimulation_id;
    have_last = true;
  }

  detail.ground_truth.clear();
  for (const auto& s : detail.samples) detail.ground_truth.push_back(s.label);
  Rng noise_rng(seeds.noise);
  detail.utterances = inject_noise(utterances_from_dataset(detail.samples), noise, noise_rng, pipe.noise_mode);
}

void evaluate_mapper(const ExperimentContext& ctx, std::size_t size, double noise, std::size_t repetition,
                     Mapper mapper, CellDetail& detail, CellRecord& rec) {
  const auto& pipe = ctx.config.pipeline;
  const auto start = std::chrono::steady_clock::now();
  rec.size = size;
  rec.noise = noise;
  rec.mapper = mapper;
  rec.repetition = repetition;

  std::array<bool, kBodyPartCount> present{};
  for (auto g : detail.ground_truth) present[index_of(g)] = true;
  if (std::find(present.begin(), present.end(), false) != present.end()) rec.flags |= kFlagLabelIncomplete;

  Rng gmm_rng(cell_seeds(ctx.config.seed, size, noise, repetition).gmm);
  detail.predicted.assign(detail.samples.size(), std::nullopt);
  try {
    std::vector<std::size_t> words;
    words.reserve(detail.utterances.size());
    for (const auto& u : detail.utterances) words.push_back(index_of(u.label));

    if (mapper == Mapper::one_step) {
      const auto model = fit_em(detail.activations, pipe.components, pipe.gmm, gmm_rng);
      const auto comps = assign_hard(model, detail.activations);
      std::vector<Trial> trials(words.size());
      for (std::size_t n = 0; n < words.size(); ++n) trials[n] = {words[n], comps[n]};
      detail.mapping = one_step_map(accumulate(trials, kBodyPartCount, pipe.components));
      const auto labels = predict_labels(detail.mapping, comps);
      for (std::size_t n = 0; n < labels.size(); ++n) {
        if (labels[n]) detail.predicted[n] = body_part_at(*labels[n]);
      }
      rec.iterations = 1;
    } else {
      SequentialConfig seq{pipe.gmm, pipe.refit, pipe.removal, pipe.exclusive_words, pipe.shrink_components,
                           Decay::constant()};
      detail.mapping = sequential_map(detail.activations, words, kBodyPartCount, pipe.components, seq, gmm_rng);
      for (std::size_t n = 0; n < detail.mapping.per_point_label.size(); ++n) {
        if (const auto& l = detail.mapping.per_point_label[n]) detail.predicted[n] = body_part_at(*l);
      }
      rec.iterations = detail.mapping.iterations.size();
      if (detail.mapping.partial) rec.flags |= kFlagPartial;
    }
    rec.accuracy = accuracy(detail.predicted, detail.ground_truth);
    rec.part_accuracy = per_part_accuracy(detail.predicted, detail.ground_truth);
    if (std::any_of(detail.predicted.begin(), detail.predicted.end(), [](const auto& p) { return !p; })) {
      rec.flags |= kFlagUnmapped;
    }
  } catch (const FitError& e) {
    rec.flags |= kFlagFitFailed;
    rec.error = e.what();
  } catch (const NumericalError& e) {
    rec.flags |= kFlagFitFailed;
    rec.error = e.what();
  }
  if (rec.flags & kFlagFitFailed) {
    rec.accuracy = std::numeric_limits<double>::quiet_NaN();
    rec.part_accuracy = {};
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

CellRecord run_cell_detailed(const ExperimentContext& context, std::size_t size, double noise,
                             std::size_t repetition, Mapper mapper, CellDetail& detail) {
  prepare_cell(context, size, noise, repetition, detail);
  CellRecord rec;
  evaluate_mapper(context, size, noise, repetition, mapper, detail, rec);
  return rec;
}

std::vector<CellRecord> run_cell(const ExperimentContext& context, std::size_t size, double noise,
                                 std::size_t repetition, MapperSelection mapper) {
  if (size < context.config.pipeline.components) {
    throw std::invalid_argument("run_cell: size below the component count");
  }
  if (!(noise >= 0.0 && noise <= 1.0)) throw std::invalid_argument("run_cell: noise outside [0, 1]");
  CellDetail detail;
  prepare_cell(context, size, noise, repetition, detail);
  std::vector<CellRecord> out;
  for (auto m : mappers_of(mapper)) {
    CellRecord rec;
    evaluate_mapper(context, size, noise, repetition, m, detail, rec);
    out.push_back(std::move(rec));
  }
  return out;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  double sum = 0.0;
  for (auto v : values) {
    if (std::isnan(v)) continue;
    sum += v;
    ++s.count;
  }
  if (s.count == 0) return s;
  s.mean = sum / static_cast<double>(s.count);
  double ss = 0.0;
  for (auto v : values) {
    if (!std::isnan(v)) ss += (v - s.mean) * (v - s.mean);
  }
  s.stddev = s.count > 1 ? std::sqrt(ss / static_cast<double>(s.count - 1)) : 0.0;
  return s;
}

namespace {

bool record_less(const CellRecord& a, const CellRecord& b) {
  if (a.size != b.size) return a.size < b.size;
  if (a.noise != b.noise) return a.noise < b.noise;
  if (a.mapper != b.mapper) return a.mapper < b.mapper;
  return a.repetition < b.repetition;
}

}  // namespace

std::vector<AggregateRecord> aggregate(std::span<const CellRecord> records) {
  std::vector<CellRecord> sorted(records.begin(), records.end());
  std::stable_sort(sorted.begin(), sorted.end(), record_less);
  std::vector<AggregateRecord> out;
  for (std::size_t b = 0; b < sorted.size();) {
    std::size_t e = b;
    while (e < sorted.size() && sorted[e].size == sorted[b].size && sorted[e].noise == sorted[b].noise &&
           sorted[e].mapper == sorted[b].mapper) {
      ++e;
    }
    AggregateRecord agg{sorted[b].size, sorted[b].noise, sorted[b].mapper, e - b, 0, {}, {}};
    std::vector<double> acc;
    std::array<std::vector<double>, kBodyPartCount> parts;
    for (std::size_t i = b; i < e; ++i) {
      if (sorted[i].flags & kFlagFitFailed) ++agg.failures;
      acc.push_back(sorted[i].accuracy);
      for (std::size_t k = 0; k < kBodyPartCount; ++k) {
        if (sorted[i].part_accuracy[k]) parts[k].push_back(*sorted[i].part_accuracy[k]);
      }
    }
    agg.accuracy = summarize(acc);
    for (std::size_t k = 0; k < kBodyPartCount; ++k) agg.parts[k] = summarize(parts[k]);
    out.push_back(std::move(agg));
    b = e;
  }
  return out;
}

SweepResult run_sweep(const SweepConfig& config) { return run_sweep(make_context(config)); }

SweepResult run_sweep(const ExperimentContext& context) {
  const auto& cfg = context.config;
  cfg.validate();
  struct Cell {
    std::size_t size;
    double noise;
    std::size_t rep;
  };
  std::vector<Cell> cells;
  for (auto s : cfg.sizes) {
    for (auto p : cfg.noise_levels) {
      for (std::size_t r = 0; r < cfg.repetitions; ++r) cells.push_back({s, p, r});
    }
  }
  std::vector<std::vector<CellRecord>> results(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) {
      try {
        results[i] = run_cell(context, cells[i].size, cells[i].noise, cells[i].rep, cfg.mapper);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const auto threads = std::min(cells.size(), cfg.threads == 0 ? hw : cfg.threads);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  SweepResult out;
  for (auto& r : results) {
    for (auto& rec : r) out.records.push_back(std::move(rec));
  }
  std::stable_sort(out.records.begin(), out.records.end(), record_less);
  out.aggregates = aggregate(out.records);
  return out;
}

namespace {

std::string format_noise(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", p);
  return buf;
}

std::string format_optional(const std::optional<double>& v) {
  return v ? detail::format_fixed(*v, 6) : std::string("nan");
}

}  // namespace

void write_sweep_csv(std::ostream& out, std::span<const CellRecord> records) {
  out << "size,noise,mapper,repetition,accuracy";
  for (auto p : kAllBodyParts) out << ",acc_" << csv_key(p);
  out << ",iterations,flags\n";
  for (const auto& r : records) {
    out << r.size << ',' << format_noise(r.noise) << ',' << token(r.mapper) << ',' << r.repetition << ','
        << detail::format_fixed(r.accuracy, 6);
    for (const auto& pa : r.part_accuracy) out << ',' << format_optional(pa);
    out << ',' << r.iterations << ',' << format_flags(r.flags) << '\n';
  }
}

void write_aggregate_csv(std::ostream& out, std::span<const AggregateRecord> aggregates) {
  out << "size,noise,mapper,runs,failures,mean_accuracy,std_accuracy";
  for (auto p : kAllBodyParts) out << ",mean_acc_" << csv_key(p) << ",std_acc_" << csv_key(p);
  out << '\n';
  for (const auto& a : aggregates) {
    out << a.size << ',' << format_noise(a.noise) << ',' << token(a.mapper) << ',' << a.runs << ',' << a.failures
        << ',' << detail::format_fixed(a.accuracy.mean, 6) << ',' << detail::format_fixed(a.accuracy.stddev, 6);
    for (const auto& s : a.parts) {
      out << ',' << detail::format_fixed(s.mean, 6) << ',' << detail::format_fixed(s.stddev, 6);
    }
    out << '\n';
  }
}

}  // namespace bodymap
