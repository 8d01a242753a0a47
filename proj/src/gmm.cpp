#include "bodymap/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "bodymap/errors.hpp"
#include "text_io.hpp"

namespace bodymap {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Eigen::MatrixXd stack_columns(std::span<const Eigen::VectorXd> points) {
  if (points.empty()) return {};
  const auto d = points.front().size();
  Eigen::MatrixXd x(d, static_cast<Eigen::Index>(points.size()));
  for (std::size_t n = 0; n < points.size(); ++n) {
    if (points[n].size() != d) throw std::invalid_argument("points differ in dimension");
    x.col(static_cast<Eigen::Index>(n)) = points[n];
  }
  return x;
}

std::uint64_t hash_vector(const Eigen::VectorXd& v) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    double d = v[i];
    if (d == 0.0) d = 0.0;  // fold -0.0 onto +0.0
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    h ^= bits;
    h *= 0x100000001b3ULL;
    h ^= h >> 29;
  }
  return h;
}

// First mean drawn by weight, the rest with probability proportional to
// weight times squared distance to the nearest mean already chosen.
std::vector<Eigen::VectorXd> kmeanspp_seeds(const Eigen::MatrixXd& x, const Eigen::VectorXd& w,
                                            std::size_t k, Rng& rng) {
  const auto n = x.cols();
  auto sample = [&](const Eigen::VectorXd& mass) {
    double target = uniform01(rng) * mass.sum();
    Eigen::Index last = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (mass[i] <= 0.0) continue;
      last = i;
      target -= mass[i];
      if (target < 0.0) return i;
    }
    return last;
  };

  std::vector<Eigen::VectorXd> seeds;
  seeds.push_back(x.col(sample(w)));
  Eigen::VectorXd d2 = (x.colwise() - seeds.back()).colwise().squaredNorm().transpose();
  while (seeds.size() < k) {
    const Eigen::VectorXd mass = w.cwiseProduct(d2);
    const auto pick = mass.sum() > 0.0 ? sample(mass) : sample(w);
    seeds.push_back(x.col(pick));
    d2 = d2.cwiseMin((x.colwise() - seeds.back()).colwise().squaredNorm().transpose());
  }
  return seeds;
}

Eigen::VectorXd column_log_sum_exp(const Eigen::MatrixXd& l) {
  Eigen::VectorXd out(l.cols());
  for (Eigen::Index c = 0; c < l.cols(); ++c) out[c] = log_sum_exp(l.col(c));
  return out;
}

struct RestartResult {
  GmmModel model;
  std::vector<double> trace;
};

// Maximum-likelihood EM under the constraint that every covariance eigenvalue
// is at least `reg`. The constrained M-step optimum clips the eigenvalues of
// the weighted sample covariance (per-dimension variances when diagonal), so
// the log-likelihood never decreases.
RestartResult run_em(const Eigen::MatrixXd& x, const Eigen::VectorXd& w, std::size_t k,
                     const Eigen::MatrixXd& global_cov, double reg, const EmConfig& config, Rng& rng) {
  const double total = w.sum();
  const bool diagonal = config.covariance == CovarianceType::diagonal;

  auto means = kmeanspp_seeds(x, w, k, rng);
  Eigen::MatrixXd start = diagonal ? Eigen::MatrixXd(global_cov.diagonal().asDiagonal()) : global_cov;
  start.diagonal().array() += reg;
  std::vector<Eigen::MatrixXd> covs(k, start);
  std::vector<double> mix(k, 1.0 / static_cast<double>(k));

  RestartResult out;
  double prev = kNegInf;
  for (std::size_t it = 1;; ++it) {
    GmmModel model(mix, means, covs, config.covariance);
    const Eigen::MatrixXd l = model.weighted_log_densities_columns(x);
    const Eigen::VectorXd lse = column_log_sum_exp(l);
    if (!lse.allFinite()) throw NumericalError("EM: a point has zero density under every component");
    const double ll = w.dot(lse);
    out.trace.push_back(ll);
    const bool converged = it > 1 && ll - prev < config.tol * std::abs(prev);
    if (converged || it >= config.max_iters) {
      out.model = std::move(model);
      return out;
    }
    prev = ll;

    // M-step on responsibility-weighted sufficient statistics.
    const Eigen::MatrixXd resp = l.rowwise() - lse.transpose();  // log responsibilities
    for (std::size_t j = 0; j < k; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const Eigen::VectorXd rw = resp.row(jj).transpose().array().exp().matrix().cwiseProduct(w);
      const double nk = rw.sum();
      mix[j] = nk / total;
      if (!(nk > 0.0)) continue;  // empty component keeps its shape, weight 0
      means[j] = x * rw / nk;
      const Eigen::MatrixXd centered = x.colwise() - means[j];
      if (diagonal) {
        Eigen::VectorXd var = centered.array().square().matrix() * rw / nk;
        covs[j] = var.cwiseMax(reg).asDiagonal();
      } else {
        Eigen::MatrixXd s = centered * rw.asDiagonal() * centered.transpose() / nk;
        s = 0.5 * (s + s.transpose());
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
        const Eigen::MatrixXd& u = eig.eigenvectors();
        s = u * eig.eigenvalues().cwiseMax(reg).asDiagonal() * u.transpose();
        covs[j] = 0.5 * (s + s.transpose());
      }
    }
    double mix_sum = 0.0;
    for (auto r : mix) mix_sum += r;
    for (auto& r : mix) r /= mix_sum;
  }
}

}  // namespace

GmmModel::GmmModel(std::vector<double> weights, std::vector<Eigen::VectorXd> means,
                   std::vector<Eigen::MatrixXd> covariances, CovarianceType type)
    : weights_(std::move(weights)), means_(std::move(means)), covariances_(std::move(covariances)), type_(type) {
  const auto k = weights_.size();
  if (k == 0) throw std::invalid_argument("GMM needs at least one component");
  if (means_.size() != k || covariances_.size() != k) {
    throw std::invalid_argument("GMM weights, means and covariances differ in count");
  }
  double sum = 0.0;
  for (auto r : weights_) {
    if (!(r >= 0.0)) throw std::invalid_argument("mixture weights must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("mixture weights must sum to 1");

  const auto d = means_.front().size();
  if (d == 0) throw std::invalid_argument("GMM dimension must be positive");
  factors_.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    const auto& s = covariances_[j];
    if (means_[j].size() != d || s.rows() != d || s.cols() != d) {
      throw std::invalid_argument("GMM component " + std::to_string(j) + " has the wrong dimension");
    }
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, s.cwiseAbs().maxCoeff())) {
      throw std::invalid_argument("covariance " + std::to_string(j) + " is not symmetric");
    }
    auto& f = factors_[j];
    double log_det = 0.0;
    if (type_ == CovarianceType::diagonal) {
      const Eigen::VectorXd diag = s.diagonal();
      if ((s - Eigen::MatrixXd(diag.asDiagonal())).cwiseAbs().maxCoeff() > 0.0) {
        throw std::invalid_argument("diagonal GMM with off-diagonal covariance entries");
      }
      if (!(diag.array() > 0.0).all() || !diag.allFinite()) {
        throw NumericalError("covariance " + std::to_string(j) + " is not positive definite");
      }
      f.inv_sd = diag.array().sqrt().inverse();
      log_det = diag.array().log().sum();
    } else {
      Eigen::LLT<Eigen::MatrixXd> llt(s);
      if (llt.info() != Eigen::Success) {
        throw NumericalError("covariance " + std::to_string(j) + " is not positive definite");
      }
      f.chol = llt.matrixL();
      if (!(f.chol.diagonal().array() > 0.0).all()) {
        throw NumericalError("covariance " + std::to_string(j) + " is singular");
      }
      log_det = 2.0 * f.chol.diagonal().array().log().sum();
    }
    f.log_norm = -0.5 * (static_cast<double>(d) * kLog2Pi + log_det);
  }
}

Eigen::MatrixXd GmmModel::weighted_log_densities_columns(const Eigen::MatrixXd& points) const {
  const auto k = static_cast<Eigen::Index>(components());
  if (points.cols() > 0 && points.rows() != static_cast<Eigen::Index>(dim())) {
    throw std::invalid_argument("point dimension does not match the model");
  }
  Eigen::MatrixXd l(k, points.cols());
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& f = factors_[static_cast<std::size_t>(j)];
    const Eigen::MatrixXd centered = points.colwise() - means_[static_cast<std::size_t>(j)];
    Eigen::RowVectorXd maha;
    if (type_ == CovarianceType::diagonal) {
      maha = (centered.array().colwise() * f.inv_sd.array()).square().colwise().sum();
    } else {
      maha = f.chol.triangularView<Eigen::Lower>().solve(centered).colwise().squaredNorm();
    }
    const double r = weights_[static_cast<std::size_t>(j)];
    const double log_r = r > 0.0 ? std::log(r) : kNegInf;
    l.row(j) = ((-0.5 * maha.array()) + (f.log_norm + log_r)).matrix();
  }
  return l;
}

Eigen::VectorXd GmmModel::weighted_log_densities(const Eigen::VectorXd& x) const {
  return weighted_log_densities_columns(x).col(0);
}

Eigen::MatrixXd GmmModel::weighted_log_densities(std::span<const Eigen::VectorXd> points) const {
  return weighted_log_densities_columns(stack_columns(points));
}

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() == 0) return kNegInf;
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

double gaussian_logdensity(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                           const Eigen::MatrixXd& covariance) {
  const auto d = x.size();
  if (mean.size() != d || covariance.rows() != d || covariance.cols() != d) {
    throw std::invalid_argument("gaussian_logdensity: dimension mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) throw NumericalError("covariance is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  if (!(l.diagonal().array() > 0.0).all()) throw NumericalError("covariance is singular");
  const Eigen::VectorXd z = l.triangularView<Eigen::Lower>().solve(x - mean);
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(d) * kLog2Pi + log_det + z.squaredNorm());
}

Eigen::VectorXd posteriors(const GmmModel& model, const Eigen::VectorXd& x) {
  const Eigen::VectorXd l = model.weighted_log_densities(x);
  const double lse = log_sum_exp(l);
  if (!std::isfinite(lse)) {
    throw NumericalError("posteriors: every component density underflows (max weighted log density " +
                         detail::format_double(l.maxCoeff()) + ")");
  }
  return (l.array() - lse).exp();
}

double log_likelihood(const GmmModel& model, std::span<const Eigen::VectorXd> points,
                      std::span<const double> weights) {
  if (!weights.empty() && weights.size() != points.size()) {
    throw std::invalid_argument("log_likelihood: weights and points differ in length");
  }
  const Eigen::VectorXd lse = column_log_sum_exp(model.weighted_log_densities(points));
  double ll = 0.0;
  for (Eigen::Index n = 0; n < lse.size(); ++n) {
    ll += (weights.empty() ? 1.0 : weights[static_cast<std::size_t>(n)]) * lse[n];
  }
  return ll;
}

DistinctPoints deduplicate(std::span<const Eigen::VectorXd> data) {
  DistinctPoints out;
  out.source.reserve(data.size());
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
  for (const auto& x : data) {
    auto& bucket = buckets[hash_vector(x)];
    std::size_t found = out.points.size();
    for (auto idx : bucket) {
      if (out.points[idx] == x) {
        found = idx;
        break;
      }
    }
    if (found == out.points.size()) {
      bucket.push_back(found);
      out.points.push_back(x);
      out.counts.push_back(0.0);
    }
    out.counts[found] += 1.0;
    out.source.push_back(found);
  }
  return out;
}

GmmModel fit_em_weighted(std::span<const Eigen::VectorXd> points, std::span<const double> weights,
                         std::size_t components, const EmConfig& config, Rng& rng) {
  if (components == 0) throw std::invalid_argument("fit_em: need at least one component");
  if (points.empty() || points.size() != weights.size()) {
    throw std::invalid_argument("fit_em: points and weights must be non-empty and aligned");
  }
  if (config.n_init == 0 || config.max_iters == 0) {
    throw std::invalid_argument("fit_em: n_init and max_iters must be positive");
  }
  const Eigen::MatrixXd x = stack_columns(points);
  Eigen::VectorXd w(static_cast<Eigen::Index>(weights.size()));
  for (std::size_t n = 0; n < weights.size(); ++n) {
    if (!(weights[n] >= 0.0)) throw std::invalid_argument("fit_em: negative weight");
    w[static_cast<Eigen::Index>(n)] = weights[n];
  }
  const double total = w.sum();
  if (total < static_cast<double>(components)) {
    throw std::invalid_argument("fit_em: fewer data points than components");
  }

  const auto d = x.rows();
  const Eigen::VectorXd mean = x * w / total;
  const Eigen::MatrixXd centered = x.colwise() - mean;
  Eigen::MatrixXd cov = centered * w.asDiagonal() * centered.transpose() / total;
  cov = 0.5 * (cov + cov.transpose());
  double reg = config.reg_scale * cov.trace() / static_cast<double>(d);
  if (!(reg > 1e-12)) reg = 1e-12;  // all points identical

  std::optional<RestartResult> best;
  std::size_t best_restart = 0;
  std::string last_error;
  for (std::size_t r = 0; r < config.n_init; ++r) {
    try {
      auto result = run_em(x, w, components, cov, reg, config, rng);
      if (!best || result.trace.back() > best->trace.back()) {
        best = std::move(result);
        best_restart = r;
      }
    } catch (const NumericalError& e) {
      last_error = e.what();
    }
  }
  if (!best) throw FitError("EM failed on all " + std::to_string(config.n_init) + " restarts: " + last_error);

  GmmModel model = std::move(best->model);
  model.info.log_likelihood = best->trace.back();
  model.info.iterations = best->trace.size();
  model.info.regularization = reg;
  model.info.restart = best_restart;
  model.info.log_likelihoods = std::move(best->trace);
  return model;
}

GmmModel fit_em(std::span<const Eigen::VectorXd> data, std::size_t components, const EmConfig& config,
                Rng& rng) {
  if (components == 0) throw std::invalid_argument("fit_em: need at least one component");
  if (data.size() < components) throw std::invalid_argument("fit_em: fewer data points than components");
  const auto distinct = deduplicate(data);
  return fit_em_weighted(distinct.points, distinct.counts, components, config, rng);
}

std::vector<std::size_t> assign_hard(const GmmModel& model, std::span<const Eigen::VectorXd> data) {
  const auto distinct = deduplicate(data);
  const Eigen::MatrixXd l = model.weighted_log_densities(distinct.points);
  std::vector<std::size_t> best(distinct.points.size(), 0);
  for (Eigen::Index n = 0; n < l.cols(); ++n) {
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < l.rows(); ++j) {
      if (l(j, n) > l(arg, n)) arg = j;
    }
    best[static_cast<std::size_t>(n)] = static_cast<std::size_t>(arg);
  }
  std::vector<std::size_t> out(data.size());
  for (std::size_t n = 0; n < data.size(); ++n) out[n] = best[distinct.source[n]];
  return out;
}

void write_model(std::ostream& out, const GmmModel& model) {
  const auto d = static_cast<Eigen::Index>(model.dim());
  out << "# bodymap-gmm v1\n";
  out << "# components " << model.components() << '\n';
  out << "# dim " << model.dim() << '\n';
  out << "# covariance " << (model.covariance_type() == CovarianceType::full ? "full" : "diagonal") << '\n';
  out << "# seed " << model.info.seed << '\n';
  out << "# log_likelihood " << detail::format_double(model.info.log_likelihood) << '\n';
  out << "# iterations " << model.info.iterations << '\n';
  out << "weights";
  for (auto r : model.weights()) out << ' ' << detail::format_double(r);
  out << '\n';
  for (std::size_t j = 0; j < model.components(); ++j) {
    out << "mean " << j;
    for (Eigen::Index i = 0; i < d; ++i) out << ' ' << detail::format_double(model.means()[j][i]);
    out << '\n';
    out << "cov " << j << '\n';
    const auto& s = model.covariances()[j];
    for (Eigen::Index r = 0; r < d; ++r) {
      for (Eigen::Index c = 0; c < d; ++c) {
        if (c) out << ' ';
        out << (s(r, c) == 0.0 ? std::string("0") : detail::format_double(s(r, c)));
      }
      out << '\n';
    }
  }
}

GmmModel read_model(std::istream& in) {
  std::size_t k = 0, d = 0;
  CovarianceType type = CovarianceType::full;
  FitInfo info;
  bool saw_magic = false;
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covs;
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::string& {
    if (!std::getline(in, line)) detail::parse_error("model", line_no, "unexpected end of file");
    ++line_no;
    return line;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "#") {
      ls >> key;
      if (key == "bodymap-gmm") {
        saw_magic = true;
      } else if (key == "components") {
        ls >> k;
      } else if (key == "dim") {
        ls >> d;
      } else if (key == "covariance") {
        std::string t;
        ls >> t;
        if (t == "full") {
          type = CovarianceType::full;
        } else if (t == "diagonal") {
          type = CovarianceType::diagonal;
        } else {
          detail::parse_error("model", line_no, "unknown covariance type '" + t + "'");
        }
      } else if (key == "seed") {
        ls >> info.seed;
      } else if (key == "log_likelihood") {
        std::string v;
        ls >> v;
        info.log_likelihood = detail::parse_double(v, "model", line_no);
      } else if (key == "iterations") {
        ls >> info.iterations;
      }
      if (ls.fail()) detail::parse_error("model", line_no, "bad header line");
      continue;
    }
    if (!saw_magic || k == 0 || d == 0) detail::parse_error("model", line_no, "header incomplete");
    const auto fields = detail::split(detail::trim(line), ' ');
    if (key == "weights") {
      if (fields.size() != k + 1) detail::parse_error("model", line_no, "wrong number of weights");
      for (std::size_t j = 0; j < k; ++j) weights.push_back(detail::parse_double(fields[j + 1], "model", line_no));
    } else if (key == "mean") {
      if (fields.size() != d + 2) detail::parse_error("model", line_no, "wrong mean length");
      Eigen::VectorXd m(static_cast<Eigen::Index>(d));
      for (std::size_t i = 0; i < d; ++i) m[static_cast<Eigen::Index>(i)] = detail::parse_double(fields[i + 2], "model", line_no);
      means.push_back(std::move(m));
    } else if (key == "cov") {
      Eigen::MatrixXd s(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
      for (std::size_t r = 0; r < d; ++r) {
        const auto row = detail::split(detail::trim(next_line()), ' ');
        if (row.size() != d) detail::parse_error("model", line_no, "wrong covariance row length");
        for (std::size_t c = 0; c < d; ++c) {
          s(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = detail::parse_double(row[c], "model", line_no);
        }
      }
      covs.push_back(std::move(s));
    } else {
      detail::parse_error("model", line_no, "unknown record '" + key + "'");
    }
  }
  if (!saw_magic) detail::parse_error("model", line_no, "empty or foreign file");
  if (weights.size() != k || means.size() != k || covs.size() != k) {
    detail::parse_error("model", line_no, "component count does not match header");
  }
  GmmModel model(std::move(weights), std::move(means), std::move(covs), type);
  model.info = std::move(info);
  return model;
}

}  // namespace bodymap
