#pragma once

// Regression statistics for comparing predicted and true 0-5 scores, plus
// fixed-width histograms of score distributions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "format.hpp"

namespace sentiscore {

constexpr double kMapeMinTarget = 1e-8;

struct MetricsReport {
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  double mape = 0.0;  // fraction, not percent
  double msle = 0.0;
  double medae = 0.0;
  std::optional<double> r2;   // empty when y_true has no variance
  std::optional<double> evs;  // same
  std::size_t n = 0;
  std::size_t n_excluded_mape = 0;
};

inline MetricsReport compute_metrics(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) throw PreconditionError("compute_metrics: length mismatch");
  if (y_true.size() < 2) throw PreconditionError("compute_metrics needs at least two samples");
  const std::size_t n = y_true.size();
  const auto nd = static_cast<double>(n);
  MetricsReport r;
  r.n = n;

  double y_mean = 0.0, e_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y_mean += y_true[i];
    e_mean += y_true[i] - y_pred[i];
  }
  y_mean /= nd;
  e_mean /= nd;

  double sse = 0.0, sae = 0.0, ape = 0.0, sle = 0.0, sst = 0.0, e_var = 0.0;
  std::size_t mape_count = 0;
  std::vector<double> abs_err(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y_true[i] - y_pred[i];
    sse += e * e;
    sae += std::abs(e);
    abs_err[i] = std::abs(e);
    if (y_true[i] > kMapeMinTarget) {
      ape += std::abs(e) / y_true[i];
      ++mape_count;
    }
    const double le = std::log1p(y_true[i]) - std::log1p(std::max(y_pred[i], 0.0));
    sle += le * le;
    sst += (y_true[i] - y_mean) * (y_true[i] - y_mean);
    e_var += (e - e_mean) * (e - e_mean);
  }
  r.mse = sse / nd;
  r.rmse = std::sqrt(r.mse);
  r.mae = sae / nd;
  r.n_excluded_mape = n - mape_count;
  r.mape = mape_count ? ape / static_cast<double>(mape_count) : 0.0;
  r.msle = sle / nd;

  std::sort(abs_err.begin(), abs_err.end());
  r.medae = n % 2 ? abs_err[n / 2] : 0.5 * (abs_err[n / 2 - 1] + abs_err[n / 2]);

  if (sst > 0.0) {
    r.r2 = 1.0 - sse / sst;
    r.evs = 1.0 - (e_var / nd) / (sst / nd);
  }
  return r;
}

// Table-style text export, one `name: value` per line.
inline std::string format_report(const MetricsReport& r, const std::string& label = {}) {
  std::ostringstream out;
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("undefined"); };
  if (!label.empty()) out << "[" << label << "]\n";
  out << "n: " << r.n << '\n'
      << "mse: " << format_double(r.mse) << '\n'
      << "rmse: " << format_double(r.rmse) << '\n'
      << "mae: " << format_double(r.mae) << '\n'
      << "mape: " << format_double(r.mape) << '\n'
      << "n_excluded_mape: " << r.n_excluded_mape << '\n'
      << "msle: " << format_double(r.msle) << '\n'
      << "medae: " << format_double(r.medae) << '\n'
      << "r2: " << opt(r.r2) << '\n'
      << "evs: " << opt(r.evs) << '\n';
  return out.str();
}

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::uint64_t> counts;
  std::uint64_t underflow = 0;
  std::uint64_t overflow = 0;

  double bin_width() const noexcept { return (hi - lo) / static_cast<double>(counts.size()); }
  std::uint64_t total() const noexcept {
    std::uint64_t t = underflow + overflow;
    for (auto c : counts) t += c;
    return t;
  }
};

// Equal-width bins over [lo, hi]; bin i holds lo + i*w <= v < lo + (i+1)*w,
// and hi itself goes to the last bin. NaN counts as overflow.
inline Histogram histogram(std::span<const double> values, std::size_t bins, double lo, double hi) {
  if (bins < 1) throw PreconditionError("histogram needs at least one bin");
  if (!(lo < hi)) throw PreconditionError("histogram range must satisfy lo < hi");
  Histogram h{lo, hi, std::vector<std::uint64_t>(bins, 0), 0, 0};
  const double w = h.bin_width();
  for (double v : values) {
    if (v < lo) {
      ++h.underflow;
    } else if (v > hi || std::isnan(v)) {
      ++h.overflow;
    } else if (v == hi) {
      ++h.counts.back();
    } else {
      auto i = static_cast<std::size_t>((v - lo) / w);
      // guard the floating-point edge where (v - lo) / w rounds onto a boundary
      if (i >= bins) i = bins - 1;
      if (i > 0 && v < lo + static_cast<double>(i) * w) --i;
      else if (i + 1 < bins && v >= lo + static_cast<double>(i + 1) * w) ++i;
      ++h.counts[i];
    }
  }
  return h;
}

inline std::string format_histogram(const Histogram& h) {
  std::ostringstream out;
  out << "bin_lo,bin_hi,count\n";
  const double w = h.bin_width();
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double a = h.lo + static_cast<double>(i) * w;
    const double b = i + 1 == h.counts.size() ? h.hi : h.lo + static_cast<double>(i + 1) * w;
    out << format_double(a) << ',' << format_double(b) << ',' << h.counts[i] << '\n';
  }
  out << "-inf," << format_double(h.lo) << ',' << h.underflow << '\n';
  out << format_double(h.hi) << ",inf," << h.overflow << '\n';
  return out.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file", path.string());
  out << text;
  if (!out) throw IoError("write failed", path.string());
}

}  // namespace sentiscore
