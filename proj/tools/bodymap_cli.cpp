// bodymap: command line front end for the body-part mapping pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bodymap/errors.hpp"
#include "bodymap/experiment.hpp"

namespace fs = std::filesystem;
using namespace bodymap;

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Flat `key = value` file; keys are long flag names without the dashes.
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

// Values from the file fill options the command line left unset.
void apply_config(CLI::App& cmd, const std::string& path) {
  for (const auto& [key, value] : read_config(path)) {
    auto* opt = cmd.get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") {
      throw UsageError("unknown key '" + key + "' in " + path + " for command " + cmd.get_name());
    }
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  return in;
}

struct Options {
  std::string config;
  std::uint64_t seed = 1;
  std::size_t size = 3190;
  std::vector<std::size_t> sizes;
  double noise = 0.0;
  std::vector<double> noises;
  std::size_t reps = 0;
  std::size_t rep = 0;
  std::string mapper = "both";
  double overlap = 0.1;
  double field_fraction = 0.5;
  std::string field_shape = "local";
  std::string out;
  std::string out_dir = ".";
  std::string data;
  std::string weights;
  std::size_t stimulations = 2000;
  std::size_t samples_per_stimulation = kDefaultSamplesPerStimulation;
  std::size_t components = kBodyPartCount;
  std::string covariance = "diagonal";
  double reg_scale = EmConfig{}.reg_scale;
  std::size_t n_init = EmConfig{}.n_init;
  std::size_t max_iters = EmConfig{}.max_iters;
  double tol = EmConfig{}.tol;
  std::string removal = "claimed";
  bool reuse = false;
  bool exclusive_words = false;
  std::string noise_mode = "permute";
  std::size_t threads = 0;
  std::size_t scale = 10;
};

void add_model_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--overlap", o.overlap, "probability that a receptive field spills into a neighbouring part")
      ->capture_default_str();
  cmd->add_option("--field-fraction", o.field_fraction, "receptive field size relative to its part")
      ->capture_default_str();
  cmd->add_option("--field-shape", o.field_shape, "local | scattered")->capture_default_str();
  cmd->add_option("--components", o.components, "mixture components")->capture_default_str();
  cmd->add_option("--covariance", o.covariance, "diagonal | full")->capture_default_str();
  cmd->add_option("--reg-scale", o.reg_scale, "covariance floor relative to the mean data variance")
      ->capture_default_str();
  cmd->add_option("--n-init", o.n_init, "EM restarts")->capture_default_str();
  cmd->add_option("--max-iters", o.max_iters, "EM iteration cap")->capture_default_str();
  cmd->add_option("--tol", o.tol, "relative log-likelihood tolerance")->capture_default_str();
}

void add_pipeline_options(CLI::App* cmd, Options& o) {
  add_model_options(cmd, o);
  cmd->add_option("--mapper", o.mapper, "onestep | sequential | both")->capture_default_str();
  cmd->add_option("--removal", o.removal, "claimed | matched")->capture_default_str();
  cmd->add_flag("--reuse", o.reuse, "sequential: keep the first mixture instead of refitting");
  cmd->add_flag("--exclusive-words", o.exclusive_words, "sequential: a word maps to one tactile model at most");
  cmd->add_option("--noise-mode", o.noise_mode, "permute | resample")->capture_default_str();
  cmd->add_option("--stimulations", o.stimulations, "minimum corpus size in stimulations")->capture_default_str();
}

SurrogateConfig surrogate_of(const Options& o) {
  SurrogateConfig s;
  s.overlap = o.overlap;
  s.field_fraction = o.field_fraction;
  if (o.field_shape == "local") {
    s.shape = FieldShape::local;
  } else if (o.field_shape == "scattered") {
    s.shape = FieldShape::scattered;
  } else {
    throw UsageError("--field-shape must be local or scattered");
  }
  return s;
}

EmConfig em_of(const Options& o) {
  EmConfig e;
  if (o.covariance == "full") {
    e.covariance = CovarianceType::full;
  } else if (o.covariance == "diagonal") {
    e.covariance = CovarianceType::diagonal;
  } else {
    throw UsageError("--covariance must be diagonal or full");
  }
  e.reg_scale = o.reg_scale;
  e.n_init = o.n_init;
  e.max_iters = o.max_iters;
  e.tol = o.tol;
  if (!(e.reg_scale > 0.0) || e.n_init == 0 || e.max_iters == 0 || !(e.tol >= 0.0)) {
    throw UsageError("EM settings must be positive");
  }
  return e;
}

SweepConfig sweep_of(const Options& o) {
  SweepConfig c;
  c.seed = o.seed;
  c.mapper = parse_mapper_selection(o.mapper);
  c.threads = o.threads;
  auto& p = c.pipeline;
  p.surrogate = surrogate_of(o);
  p.gmm = em_of(o);
  p.components = o.components;
  p.corpus_stimulations = o.stimulations;
  p.refit = !o.reuse;
  p.exclusive_words = o.exclusive_words;
  if (o.removal == "claimed") {
    p.removal = RemovalRule::claimed;
  } else if (o.removal == "matched") {
    p.removal = RemovalRule::matched;
  } else {
    throw UsageError("--removal must be claimed or matched");
  }
  if (o.noise_mode == "permute") {
    p.noise_mode = NoiseMode::permute;
  } else if (o.noise_mode == "resample") {
    p.noise_mode = NoiseMode::resample;
  } else {
    throw UsageError("--noise-mode must be permute or resample");
  }
  return c;
}

HomunculusWeights load_or_make_weights(const Options& o, const SkinLayout& layout) {
  if (!o.weights.empty()) {
    auto in = open_in(o.weights);
    auto w = read_weights(in);
    if (w.taxels() != layout.taxel_count) throw UsageError("weights do not match the skin layout");
    return w;
  }
  SweepConfig c;
  c.seed = o.seed;
  c.pipeline.surrogate = surrogate_of(o);
  return make_context(c).weights;
}

void print_record(const CellRecord& r) {
  std::printf("%-10s size %zu noise %.3g rep %zu accuracy %.4f iterations %zu%s%s\n",
              std::string(token(r.mapper)).c_str(), r.size, r.noise, r.repetition, r.accuracy, r.iterations,
              r.flags ? " flags " : "", format_flags(r.flags).c_str());
  if (!r.error.empty()) std::fprintf(stderr, "  %s\n", r.error.c_str());
}

int cmd_generate(const Options& o) {
  const auto layout = default_layout();
  Rng rng(derive_seed(o.seed, {1, 0}));
  auto data = generate_dataset(layout, o.stimulations, o.samples_per_stimulation, rng);
  if (o.size > 0 && o.size < data.size()) {
    Rng pick(derive_seed(o.seed, {2, o.size, 0}));
    data = subsample(data, o.size, pick);
  }
  auto out = open_out(o.out);
  write_dataset(out, {layout.taxel_count, layout.hash(), o.seed}, data);
  std::printf("wrote %zu samples to %s\n", data.size(), o.out.c_str());
  return 0;
}

int cmd_weights(const Options& o) {
  const auto w = load_or_make_weights(o, default_layout());
  auto out = open_out(o.out);
  write_weights(out, w);
  std::printf("wrote %zux%zu weights to %s\n", w.neurons(), w.taxels(), o.out.c_str());
  return 0;
}

int cmd_fit(const Options& o) {
  if (o.data.empty()) throw UsageError("fit needs --data");
  auto in = open_in(o.data);
  const auto file = read_dataset(in);
  const auto layout = default_layout();
  if (file.header.taxel_count != layout.taxel_count) throw UsageError("dataset does not match the skin layout");
  const auto w = load_or_make_weights(o, layout);
  std::vector<Eigen::VectorXd> xs;
  xs.reserve(file.samples.size());
  for (const auto& s : file.samples) xs.push_back(project(w, s));
  Rng rng(derive_seed(o.seed, {4, 0}));
  const auto model = fit_em(xs, o.components, em_of(o), rng);
  auto out = open_out(o.out);
  write_model(out, model);
  std::printf("fitted %zu components on %zu points: log-likelihood %.6g after %zu iterations\n", model.components(),
              xs.size(), model.info.log_likelihood, model.info.iterations);
  return 0;
}

ExperimentContext context_of(const Options& o) {
  auto cfg = sweep_of(o);
  cfg.sizes = {o.size};
  cfg.noise_levels = {o.noise};
  cfg.repetitions = 1;
  auto ctx = make_context(cfg);
  if (!o.weights.empty()) ctx.weights = load_or_make_weights(o, ctx.layout);
  return ctx;
}

int cmd_map(const Options& o) {
  const auto ctx = context_of(o);
  const fs::path dir(o.out_dir);
  std::vector<CellRecord> records;
  bool failed = false;
  for (auto m : mappers_of(ctx.config.mapper)) {
    CellDetail detail;
    auto rec = run_cell_detailed(ctx, o.size, o.noise, o.rep, m, detail);
    print_record(rec);
    failed = failed || (rec.flags & kFlagFitFailed);
    auto report = open_out(dir / ("mapping_" + std::string(token(m)) + ".txt"));
    write_mapping_report(report, detail.mapping);
    if (m == Mapper::sequential || ctx.config.mapper == MapperSelection::one_step) {
      auto utt = open_out(dir / "utterances.txt");
      write_utterances(utt, detail.utterances);
    }
    records.push_back(std::move(rec));
  }
  auto csv = open_out(dir / "map.csv");
  write_sweep_csv(csv, records);
  return failed ? 2 : 0;
}

int cmd_sweep(Options o) {
  auto cfg = sweep_of(o);
  if (!o.sizes.empty()) cfg.sizes = o.sizes;
  if (!o.noises.empty()) cfg.noise_levels = o.noises;
  if (o.reps > 0) cfg.repetitions = o.reps;
  auto ctx = make_context(cfg);
  if (!o.weights.empty()) ctx.weights = load_or_make_weights(o, ctx.layout);
  const auto result = run_sweep(ctx);

  const fs::path dir(o.out_dir);
  auto csv = open_out(dir / "sweep.csv");
  write_sweep_csv(csv, result.records);
  auto agg = open_out(dir / "aggregate.csv");
  write_aggregate_csv(agg, result.aggregates);
  auto fail = open_out(dir / "failures.csv");
  fail << "size,noise,mapper,repetition,flags,error\n";
  std::size_t failures = 0;
  for (const auto& r : result.records) {
    if (!(r.flags & kFlagFitFailed)) continue;
    ++failures;
    fail << r.size << ',' << r.noise << ',' << token(r.mapper) << ',' << r.repetition << ','
         << format_flags(r.flags) << ",\"" << r.error << "\"\n";
  }
  for (const auto& a : result.aggregates) {
    std::printf("%6zu %4.2f %-10s mean %.4f sd %.4f runs %zu\n", a.size, a.noise,
                std::string(token(a.mapper)).c_str(), a.accuracy.mean, a.accuracy.stddev, a.runs);
  }
  std::printf("%zu records, %zu fit failures, written to %s\n", result.records.size(), failures,
              dir.string().c_str());
  return failures == result.records.size() ? 2 : 0;
}

int cmd_render(const Options& o) {
  const auto ctx = context_of(o);
  const auto mapper = ctx.config.mapper == MapperSelection::one_step ? Mapper::one_step : Mapper::sequential;
  CellDetail detail;
  const auto rec = run_cell_detailed(ctx, o.size, o.noise, o.rep, mapper, detail);
  print_record(rec);
  if (rec.flags & kFlagFitFailed) return 2;
  const auto bp = back_project(detail.activations, detail.predicted);
  const auto img = render_heatmap(bp, default_palette(), o.scale, ctx.weights.grid_rows, ctx.weights.grid_cols);
  auto out = open_out(o.out, std::ios::out | std::ios::binary);
  write_ppm(out, img);
  std::printf("wrote %zux%zu heatmap to %s\n", img.width, img.height, o.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maps body-part words to tactile clusters from simulated skin contact."};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "flat key = value file; command line flags take precedence");
    cmd->add_option("--seed", o.seed, "base random seed")->capture_default_str();
  };

  auto* gen = app.add_subcommand("generate", "simulate tactile stimulations and write a dataset file");
  common(gen);
  gen->add_option("--stimulations", o.stimulations, "number of stimulations")->capture_default_str();
  gen->add_option("--samples-per-stimulation", o.samples_per_stimulation)->capture_default_str();
  gen->add_option("--size", o.size, "subsample to this many samples (0: keep all)");
  gen->add_option("--out", o.out, "output file")->required();

  auto* wts = app.add_subcommand("weights", "write surrogate homunculus weights");
  common(wts);
  wts->add_option("--overlap", o.overlap)->capture_default_str();
  wts->add_option("--field-fraction", o.field_fraction)->capture_default_str();
  wts->add_option("--field-shape", o.field_shape, "local | scattered")->capture_default_str();
  wts->add_option("--out", o.out, "output file")->required();

  auto* fit = app.add_subcommand("fit", "fit a Gaussian mixture to a projected dataset");
  common(fit);
  add_model_options(fit, o);
  fit->add_option("--data", o.data, "dataset file from `generate`")->required();
  fit->add_option("--weights", o.weights, "weights file (default: surrogate from --seed)");
  fit->add_option("--out", o.out, "model file")->required();

  auto* map = app.add_subcommand("map", "run one data set through one or both mappers");
  common(map);
  add_pipeline_options(map, o);
  map->add_option("--size", o.size)->capture_default_str();
  map->add_option("--noise", o.noise)->capture_default_str();
  map->add_option("--rep", o.rep, "repetition index")->capture_default_str();
  map->add_option("--weights", o.weights, "weights file (default: surrogate from --seed)");
  map->add_option("--out-dir", o.out_dir)->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "size x noise x mapper x repetition grid");
  common(sweep);
  add_pipeline_options(sweep, o);
  sweep->add_option("--sizes", o.sizes, "data set sizes")->delimiter(',');
  sweep->add_option("--noises", o.noises, "label noise levels in [0, 1]")->delimiter(',');
  sweep->add_option("--reps", o.reps, "repetitions per cell");
  sweep->add_option("--threads", o.threads, "worker threads (0: all cores)")->capture_default_str();
  sweep->add_option("--weights", o.weights, "weights file (default: surrogate from --seed)");
  sweep->add_option("--out-dir", o.out_dir)->capture_default_str();

  auto* render = app.add_subcommand("render", "back-project one run onto the neuron grid as a PPM image");
  common(render);
  add_pipeline_options(render, o);
  render->add_option("--size", o.size)->capture_default_str();
  render->add_option("--noise", o.noise)->capture_default_str();
  render->add_option("--rep", o.rep)->capture_default_str();
  render->add_option("--scale", o.scale, "pixels per neuron")->capture_default_str();
  render->add_option("--weights", o.weights, "weights file (default: surrogate from --seed)");
  render->add_option("--out", o.out, "output image")->required();
  render->get_option("--mapper")->default_str("sequential");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    auto* cmd = app.get_subcommands().front();
    if (!o.config.empty()) apply_config(*cmd, o.config);
    if (cmd == render && render->get_option("--mapper")->count() == 0) o.mapper = "sequential";
    if (cmd == gen) return cmd_generate(o);
    if (cmd == wts) return cmd_weights(o);
    if (cmd == fit) return cmd_fit(o);
    if (cmd == map) return cmd_map(o);
    if (cmd == sweep) return cmd_sweep(o);
    if (cmd == render) return cmd_render(o);
  } catch (const CLI::ParseError& e) {
    std::cerr << "bodymap: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "bodymap: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "bodymap: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
