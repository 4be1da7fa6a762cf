#pragma once

// Two-phase hyperparameter search: seeded uniform exploration, then
// Gaussian-process Bayesian optimization with the Expected Improvement
// acquisition. Everything works in the unit cube; SearchSpace maps points to
// (learning rate, LSTM units, dropout rate).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "format.hpp"
#include "rng.hpp"

namespace sentiscore::hypertune {

struct HyperConfig {
  double learning_rate = 1e-3;
  std::size_t lstm_units = 64;
  double dropout_rate = 0.3;

  friend bool operator==(const HyperConfig&, const HyperConfig&) = default;
};

struct SearchSpace {
  double lr_min = 1e-4;
  double lr_max = 1e-2;
  std::size_t units_min = 32;
  std::size_t units_max = 128;
  double dropout_min = 0.2;
  double dropout_max = 0.6;

  static constexpr std::size_t kDims = 3;

  void validate() const {
    if (!(lr_min > 0 && lr_min < lr_max) || !(units_min >= 1 && units_min < units_max) ||
        !(dropout_min >= 0 && dropout_min < dropout_max && dropout_max < 1)) {
      throw PreconditionError("invalid search space bounds");
    }
  }

  bool contains(const HyperConfig& c) const noexcept {
    return c.learning_rate >= lr_min && c.learning_rate <= lr_max && c.lstm_units >= units_min &&
           c.lstm_units <= units_max && c.dropout_rate >= dropout_min && c.dropout_rate <= dropout_max;
  }

  // Learning rate on a log10 scale, units and dropout linear.
  std::array<double, kDims> normalize(const HyperConfig& c) const {
    if (!contains(c)) throw PreconditionError("hyperparameter configuration outside the search space");
    return {(std::log10(c.learning_rate) - std::log10(lr_min)) / (std::log10(lr_max) - std::log10(lr_min)),
            static_cast<double>(c.lstm_units - units_min) / static_cast<double>(units_max - units_min),
            (c.dropout_rate - dropout_min) / (dropout_max - dropout_min)};
  }

  HyperConfig denormalize(std::span<const double> x) const {
    if (x.size() != kDims) throw PreconditionError("search point must have 3 coordinates");
    for (double v : x) {
      if (!(v >= 0.0 && v <= 1.0)) throw PreconditionError("search point outside the unit cube");
    }
    const double log_lr = std::log10(lr_min) + x[0] * (std::log10(lr_max) - std::log10(lr_min));
    const double units = static_cast<double>(units_min) + x[1] * static_cast<double>(units_max - units_min);
    return {std::pow(10.0, log_lr), static_cast<std::size_t>(std::llround(units)),
            dropout_min + x[2] * (dropout_max - dropout_min)};
  }
};

// ---------------------------------------------------------------------------
// Gaussian process surrogate

struct GpHyper {
  std::vector<double> lengthscales;
  double signal_var = 1.0;
  double jitter = 1e-6;
};

struct Surrogate {
  std::size_t dim = 0;
  std::vector<double> X;  // n x dim
  std::vector<double> y;  // standardized targets
  double y_mean = 0.0;
  double y_scale = 1.0;
  double best_observed = 0.0;  // min of the raw targets
  GpHyper hyper;
  std::vector<double> chol;   // lower triangle, n x n
  std::vector<double> alpha;  // K^-1 y
  double log_marginal_likelihood = 0.0;

  std::size_t size() const noexcept { return y.size(); }
  std::span<const double> point(std::size_t i) const { return {&X[i * dim], dim}; }
};

constexpr double kInitialJitter = 1e-6;
constexpr double kMaxJitter = 1e-2;
constexpr std::array<double, 4> kLengthscaleGrid = {0.1, 0.2, 0.5, 1.0};
constexpr std::array<double, 3> kSignalVarGrid = {0.5, 1.0, 2.0};

inline double se_kernel(std::span<const double> a, std::span<const double> b, const GpHyper& h) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = (a[i] - b[i]) / h.lengthscales[i];
    s += d * d;
  }
  return h.signal_var * std::exp(-0.5 * s);
}

namespace detail {

// In-place Cholesky of an n x n symmetric matrix (lower triangle used).
inline bool cholesky(std::vector<double>& a, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0.0)) return false;
    d = std::sqrt(d);
    a[j * n + j] = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / d;
    }
    for (std::size_t i = 0; i < j; ++i) a[i * n + j] = 0.0;
  }
  return true;
}

// Solves L z = b.
inline std::vector<double> forward_solve(const std::vector<double>& L, std::size_t n, std::span<const double> b) {
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= L[i * n + k] * z[k];
    z[i] = s / L[i * n + i];
  }
  return z;
}

// Solves L^T x = z.
inline std::vector<double> backward_solve(const std::vector<double>& L, std::size_t n, std::span<const double> z) {
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = z[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= L[k * n + i] * x[k];
    x[i] = s / L[i * n + i];
  }
  return x;
}

inline void check_points(std::span<const double> X, std::span<const double> y, std::size_t dim) {
  if (dim == 0 || X.size() != y.size() * dim) throw PreconditionError("gp_fit: X must be n x dim with n = len(y)");
  for (double v : y) {
    if (!std::isfinite(v)) throw PreconditionError("gp_fit: targets must be finite");
  }
  const std::size_t n = y.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::equal(&X[i * dim], &X[i * dim] + dim, &X[j * dim])) {
        throw PreconditionError("gp_fit: duplicate points " + std::to_string(i) + " and " + std::to_string(j));
      }
    }
  }
}

// Factorizes with the given hyperparameters, escalating jitter by 10x up to
// kMaxJitter. Returns false if the matrix never factorizes.
inline bool factorize(Surrogate& s) {
  const std::size_t n = s.size();
  for (double jitter = s.hyper.jitter; jitter <= kMaxJitter * (1 + 1e-9); jitter *= 10.0) {
    std::vector<double> K(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        const double k = se_kernel(s.point(i), s.point(j), s.hyper);
        K[i * n + j] = k;
        K[j * n + i] = k;
      }
      K[i * n + i] += jitter;
    }
    if (!cholesky(K, n)) continue;
    s.hyper.jitter = jitter;
    s.chol = std::move(K);
    s.alpha = backward_solve(s.chol, n, forward_solve(s.chol, n, s.y));
    double quad = 0.0, logdet = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      quad += s.y[i] * s.alpha[i];
      logdet += std::log(s.chol[i * n + i]);
    }
    s.log_marginal_likelihood =
        -0.5 * quad - logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    return true;
  }
  return false;
}

inline Surrogate make_surrogate(std::span<const double> X, std::span<const double> y, std::size_t dim,
                                bool standardize) {
  Surrogate s;
  s.dim = dim;
  s.X.assign(X.begin(), X.end());
  s.best_observed = *std::min_element(y.begin(), y.end());
  const auto n = static_cast<double>(y.size());
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  if (standardize) {
    s.y_mean = mean;
    // constant targets: center only, so the posterior mean is the constant
    s.y_scale = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 1.0;
  }
  s.y.reserve(y.size());
  for (double v : y) s.y.push_back((v - s.y_mean) / s.y_scale);
  return s;
}

}  // namespace detail

// Fits with fixed kernel hyperparameters. Allows a single point.
inline Surrogate gp_fit_fixed(std::span<const double> X, std::span<const double> y, std::size_t dim,
                              const GpHyper& hyper, bool standardize = true) {
  if (y.empty()) throw PreconditionError("gp_fit needs at least one point");
  detail::check_points(X, y, dim);
  if (hyper.lengthscales.size() != dim) throw PreconditionError("gp_fit: one lengthscale per dimension required");
  auto s = detail::make_surrogate(X, y, dim, standardize);
  s.hyper = hyper;
  if (!detail::factorize(s)) throw NumericError("gp_fit: kernel matrix is not positive definite even with jitter");
  return s;
}

// Standardizes y, then picks lengthscales and signal variance from a fixed
// grid by maximum log marginal likelihood (first maximum wins).
inline Surrogate gp_fit(std::span<const double> X, std::span<const double> y, std::size_t dim) {
  if (y.size() < 2) throw PreconditionError("gp_fit needs at least two points");
  detail::check_points(X, y, dim);
  const auto base = detail::make_surrogate(X, y, dim, true);
  std::optional<Surrogate> best;
  std::vector<std::size_t> idx(dim, 0);
  const std::size_t combos = static_cast<std::size_t>(std::pow(kLengthscaleGrid.size(), dim));
  for (std::size_t c = 0; c < combos; ++c) {
    GpHyper h;
    std::size_t rest = c;
    for (std::size_t d = 0; d < dim; ++d) {
      h.lengthscales.push_back(kLengthscaleGrid[rest % kLengthscaleGrid.size()]);
      rest /= kLengthscaleGrid.size();
    }
    for (double sv : kSignalVarGrid) {
      Surrogate s = base;
      h.signal_var = sv;
      h.jitter = kInitialJitter;
      s.hyper = h;
      if (!detail::factorize(s)) continue;
      if (!best || s.log_marginal_likelihood > best->log_marginal_likelihood) best = std::move(s);
    }
  }
  if (!best) throw NumericError("gp_fit: Cholesky failed for every grid setting even at jitter 1e-2");
  return *best;
}

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;  // floored at zero
};

// Posterior in the units of the original targets.
inline GpPrediction gp_predict(const Surrogate& s, std::span<const double> x) {
  if (x.size() != s.dim) throw PreconditionError("gp_predict: point has the wrong dimension");
  const std::size_t n = s.size();
  std::vector<double> k(n);
  for (std::size_t i = 0; i < n; ++i) k[i] = se_kernel(x, s.point(i), s.hyper);
  double mu = 0.0;
  for (std::size_t i = 0; i < n; ++i) mu += k[i] * s.alpha[i];
  const auto v = detail::forward_solve(s.chol, n, k);
  double reduce = 0.0;
  for (double e : v) reduce += e * e;
  const double var = std::max(0.0, s.hyper.signal_var - reduce);
  return {s.y_mean + s.y_scale * mu, s.y_scale * s.y_scale * var};
}

inline double normal_pdf(double z) noexcept { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Expected improvement below `best` (minimization).
inline double expected_improvement(double mean, double variance, double best) {
  if (variance < 0.0) throw PreconditionError("expected_improvement: negative variance");
  const double sigma = std::sqrt(variance);
  const double gain = best - mean;
  if (sigma <= 0.0) return std::max(gain, 0.0);
  const double z = gain / sigma;
  return std::max(0.0, gain * normal_cdf(z) + sigma * normal_pdf(z));
}

constexpr std::size_t kQuasiRandomCandidates = 1024;
constexpr double kPerturbSigma = 0.05;

inline double radical_inverse(std::uint64_t i, std::uint32_t base) noexcept {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

// Halton points with a seeded random shift (mod 1), followed by one Gaussian
// perturbation of every observed point clipped to the cube.
inline std::vector<double> candidate_points(const Surrogate& s, Xoshiro256pp& rng) {
  static constexpr std::uint32_t kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  if (s.dim > std::size(kPrimes)) throw PreconditionError("candidate_points supports at most 12 dimensions");
  std::vector<double> shift(s.dim);
  for (auto& v : shift) v = rng.uniform();
  std::vector<double> out;
  out.reserve((kQuasiRandomCandidates + s.size()) * s.dim);
  for (std::size_t i = 0; i < kQuasiRandomCandidates; ++i) {
    for (std::size_t d = 0; d < s.dim; ++d) {
      double v = radical_inverse(i + 1, kPrimes[d]) + shift[d];
      out.push_back(v >= 1.0 ? v - 1.0 : v);
    }
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t d = 0; d < s.dim; ++d) {
      out.push_back(std::clamp(s.X[i * s.dim + d] + kPerturbSigma * rng.normal(), 0.0, 1.0));
    }
  }
  return out;
}

struct Proposal {
  std::vector<double> point;
  std::size_t candidate_index = 0;
  double ei = 0.0;
};

// Argmax of EI over the candidates; ties go to the lowest index. Candidates
// that coincide with an observed point are skipped.
inline Proposal propose_from_candidates(const Surrogate& s, std::span<const double> candidates) {
  const std::size_t count = candidates.size() / s.dim;
  std::optional<Proposal> best;
  for (std::size_t c = 0; c < count; ++c) {
    const auto x = candidates.subspan(c * s.dim, s.dim);
    bool observed = false;
    for (std::size_t i = 0; i < s.size() && !observed; ++i) {
      observed = std::equal(x.begin(), x.end(), s.point(i).begin());
    }
    if (observed) continue;
    const auto pred = gp_predict(s, x);
    const double ei = expected_improvement(pred.mean, pred.variance, s.best_observed);
    if (!best || ei > best->ei) best = Proposal{{x.begin(), x.end()}, c, ei};
  }
  if (!best) throw PreconditionError("propose: every candidate coincides with an observed point");
  return *best;
}

inline Proposal propose_next(const Surrogate& s, Xoshiro256pp& rng) {
  return propose_from_candidates(s, candidate_points(s, rng));
}

// ---------------------------------------------------------------------------
// Optimization loop

enum class Phase { random, bayes };

inline const char* phase_name(Phase p) { return p == Phase::random ? "random" : "bayes"; }

struct Trial {
  std::size_t index = 0;
  std::vector<double> point;  // unit cube
  double objective = 0.0;     // penalty value when failed
  Phase phase = Phase::random;
  bool failed = false;
};

struct OptimizeResult {
  std::size_t best = 0;  // index into trials
  std::vector<Trial> trials;

  const Trial& best_trial() const { return trials.at(best); }
};

using Objective = std::function<double(std::span<const double>)>;

// n_random seeded uniform points, then n_bayes rounds of fit -> propose ->
// evaluate. A non-finite objective is recorded as failed with a penalty of
// twice the worst finite value seen so far.
inline OptimizeResult optimize(const Objective& objective, std::size_t dim, std::size_t n_random,
                               std::size_t n_bayes, std::uint64_t seed,
                               const std::function<void(const Trial&)>& on_trial = {}) {
  if (n_random < 2) throw PreconditionError("optimize needs at least two random trials");
  if (dim == 0) throw PreconditionError("optimize needs a positive dimension");
  Xoshiro256pp rng(seed);
  OptimizeResult result;
  auto evaluate = [&](std::vector<double> x, Phase phase) {
    Trial t;
    t.index = result.trials.size();
    t.phase = phase;
    double value = objective(x);
    if (!std::isfinite(value)) {
      double worst = -std::numeric_limits<double>::infinity();
      for (const auto& prev : result.trials) {
        if (!prev.failed) worst = std::max(worst, prev.objective);
      }
      value = !std::isfinite(worst) ? 1.0 : (worst > 0.0 ? 2.0 * worst : worst + 1.0);
      t.failed = true;
    }
    t.point = std::move(x);
    t.objective = value;
    result.trials.push_back(t);
    if (on_trial) on_trial(result.trials.back());
  };
  for (std::size_t i = 0; i < n_random; ++i) {
    std::vector<double> x(dim);
    for (auto& v : x) v = rng.uniform();
    evaluate(std::move(x), Phase::random);
  }
  for (std::size_t i = 0; i < n_bayes; ++i) {
    std::vector<double> X, y;
    for (const auto& t : result.trials) {
      bool duplicate = false;
      for (std::size_t j = 0; j < y.size() && !duplicate; ++j) {
        duplicate = std::equal(t.point.begin(), t.point.end(), &X[j * dim]);
      }
      if (duplicate) continue;
      X.insert(X.end(), t.point.begin(), t.point.end());
      y.push_back(t.objective);
    }
    const auto surrogate = gp_fit(X, y, dim);
    evaluate(propose_next(surrogate, rng).point, Phase::bayes);
  }
  std::optional<std::size_t> best;
  for (const auto& t : result.trials) {
    if (t.failed) continue;
    if (!best || t.objective < result.trials[*best].objective) best = t.index;
  }
  result.best = best.value_or(0);
  return result;
}

// Appends one CSV row per trial and flushes, so partial runs leave a usable
// ledger behind.
class TrialLedger {
 public:
  explicit TrialLedger(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot write trial ledger", path.string());
    out_ << "trial,phase,learning_rate,lstm_units,dropout_rate,val_mae\n";
    out_.flush();
  }

  void append(const Trial& t, const HyperConfig& c) {
    out_ << t.index << ',' << phase_name(t.phase) << ',' << format_double(c.learning_rate) << ',' << c.lstm_units
         << ',' << format_double(c.dropout_rate) << ',' << format_double(t.objective) << '\n';
    out_.flush();
    if (!out_) throw IoError("write failed", path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

struct HyperTrial {
  Trial trial;
  HyperConfig config;
};

struct HyperSearchResult {
  HyperTrial best;
  std::vector<HyperTrial> trials;
};

// Runs optimize() over the search space, evaluating configurations instead
// of raw unit-cube points.
inline HyperSearchResult optimize_hyperparameters(const SearchSpace& space,
                                                  const std::function<double(const HyperConfig&)>& objective,
                                                  std::size_t n_random, std::size_t n_bayes, std::uint64_t seed,
                                                  const std::function<void(const HyperTrial&)>& on_trial = {}) {
  space.validate();
  auto result = optimize(
      [&](std::span<const double> x) { return objective(space.denormalize(x)); }, SearchSpace::kDims, n_random,
      n_bayes, seed, [&](const Trial& t) {
        if (on_trial) on_trial({t, space.denormalize(t.point)});
      });
  HyperSearchResult out;
  for (const auto& t : result.trials) out.trials.push_back({t, space.denormalize(t.point)});
  out.best = out.trials.at(result.best);
  return out;
}

}  // namespace sentiscore::hypertune
