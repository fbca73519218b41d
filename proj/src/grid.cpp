#include "sguide/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace sguide {

namespace {

// Below this many multiply-adds a kernel runs serially; thread start-up
// dominates otherwise.
constexpr long kParallelWorkThreshold = 1L << 18;

void require_same_shape(const ScalarGrid& a, const ScalarGrid& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch (" +
                                std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                                " vs " + std::to_string(b.height()) + "x" +
                                std::to_string(b.width()) + ")");
  }
}

void check_template(const ScalarGrid& input, int t_height, int t_width) {
  if (t_height <= 0 || t_width <= 0 || t_height % 2 == 0 || t_width % 2 == 0) {
    throw std::invalid_argument("cross_correlate: template sides must be odd, got " +
                                std::to_string(t_height) + "x" + std::to_string(t_width));
  }
  if (t_height > input.height() || t_width > input.width()) {
    throw std::invalid_argument("cross_correlate: template " + std::to_string(t_height) + "x" +
                                std::to_string(t_width) + " exceeds input " +
                                std::to_string(input.height()) + "x" +
                                std::to_string(input.width()));
  }
}

}  // namespace

ScalarGrid::ScalarGrid(int height, int width, double fill)
    : height_(height), width_(width) {
  if (height <= 0 || width <= 0) {
    throw std::invalid_argument("ScalarGrid: dimensions must be positive");
  }
  values_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
}

ScalarGrid::ScalarGrid(int height, int width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (height <= 0 || width <= 0) {
    throw std::invalid_argument("ScalarGrid: dimensions must be positive");
  }
  if (values_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw std::invalid_argument("ScalarGrid: expected " + std::to_string(height * width) +
                                " values, got " + std::to_string(values_.size()));
  }
}

double ScalarGrid::sum() const {
  double total = 0.0;
  for (double v : values_) total += v;
  return total;
}

double ScalarGrid::max() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

double ScalarGrid::min() const {
  return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end());
}

double ScalarGrid::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

bool ScalarGrid::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

bool ScalarGrid::is_distribution(double tolerance) const {
  if (values_.empty() || !all_finite()) return false;
  if (std::any_of(values_.begin(), values_.end(), [](double v) { return v < 0.0; })) {
    return false;
  }
  return std::abs(sum() - 1.0) <= tolerance;
}

ScalarGrid& ScalarGrid::operator+=(const ScalarGrid& other) {
  require_same_shape(*this, other, "ScalarGrid::operator+=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

ScalarGrid& ScalarGrid::operator-=(const ScalarGrid& other) {
  require_same_shape(*this, other, "ScalarGrid::operator-=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

ScalarGrid& ScalarGrid::operator*=(double scale) {
  for (double& v : values_) v *= scale;
  return *this;
}

void ScalarGrid::axpy(double scale, const ScalarGrid& other) {
  require_same_shape(*this, other, "ScalarGrid::axpy");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += scale * other.values_[i];
}

ScalarGrid operator+(ScalarGrid lhs, const ScalarGrid& rhs) { return lhs += rhs; }
ScalarGrid operator-(ScalarGrid lhs, const ScalarGrid& rhs) { return lhs -= rhs; }
ScalarGrid operator*(double scale, ScalarGrid grid) { return grid *= scale; }

Latent::Latent(int channels, int height, int width, double fill) {
  if (channels <= 0) throw std::invalid_argument("Latent: channel count must be positive");
  channels_.assign(static_cast<std::size_t>(channels), ScalarGrid(height, width, fill));
}

Latent::Latent(std::vector<ScalarGrid> channels) : channels_(std::move(channels)) {
  if (channels_.empty()) throw std::invalid_argument("Latent: channel count must be positive");
  for (const auto& c : channels_) require_same_shape(channels_.front(), c, "Latent");
}

Latent::Latent(ScalarGrid single_channel) { channels_.push_back(std::move(single_channel)); }

bool Latent::same_shape(const Latent& other) const {
  return channels() == other.channels() && height() == other.height() &&
         width() == other.width();
}

bool Latent::all_finite() const {
  return std::all_of(channels_.begin(), channels_.end(),
                     [](const ScalarGrid& g) { return g.all_finite(); });
}

double Latent::max_abs() const {
  double m = 0.0;
  for (const auto& c : channels_) m = std::max(m, c.max_abs());
  return m;
}

double Latent::norm() const {
  double s = 0.0;
  for (const auto& c : channels_)
    for (double v : c.values()) s += v * v;
  return std::sqrt(s);
}

ScalarGrid Latent::channel_mean() const {
  if (channels_.size() == 1) return channels_.front();
  ScalarGrid mean(height(), width());
  for (const auto& c : channels_) mean += c;
  mean *= 1.0 / static_cast<double>(channels_.size());
  return mean;
}

Latent& Latent::operator+=(const Latent& other) {
  if (!same_shape(other)) throw std::invalid_argument("Latent::operator+=: shape mismatch");
  for (std::size_t c = 0; c < channels_.size(); ++c) channels_[c] += other.channels_[c];
  return *this;
}

Latent& Latent::operator*=(double scale) {
  for (auto& c : channels_) c *= scale;
  return *this;
}

void Latent::axpy(double scale, const Latent& other) {
  if (!same_shape(other)) throw std::invalid_argument("Latent::axpy: shape mismatch");
  for (std::size_t c = 0; c < channels_.size(); ++c) channels_[c].axpy(scale, other.channels_[c]);
}

ScalarGrid cross_correlate(const ScalarGrid& input, const ScalarGrid& templ) {
  check_template(input, templ.height(), templ.width());
  const int height = input.height();
  const int width = input.width();
  const int ch = templ.height() / 2;
  const int cw = templ.width() / 2;
  ScalarGrid out(height, width);
  const long work = static_cast<long>(input.size()) * static_cast<long>(templ.size());

#pragma omp parallel for schedule(static) if (work >= kParallelWorkThreshold)
  for (int h = 0; h < height; ++h) {
    const int i_lo = std::max(0, ch - h);
    const int i_hi = std::min(templ.height(), height - h + ch);
    for (int w = 0; w < width; ++w) {
      const int j_lo = std::max(0, cw - w);
      const int j_hi = std::min(templ.width(), width - w + cw);
      double acc = 0.0;
      for (int i = i_lo; i < i_hi; ++i) {
        const int y = h + i - ch;
        for (int j = j_lo; j < j_hi; ++j) acc += input(y, w + j - cw) * templ(i, j);
      }
      out(h, w) = acc;
    }
  }
  return out;
}

ScalarGrid cross_correlate_separable(const ScalarGrid& input, std::span<const double> column,
                                     std::span<const double> row) {
  check_template(input, static_cast<int>(column.size()), static_cast<int>(row.size()));
  const int height = input.height();
  const int width = input.width();
  const int ch = static_cast<int>(column.size()) / 2;
  const int cw = static_cast<int>(row.size()) / 2;
  const long work = static_cast<long>(input.size()) * static_cast<long>(row.size() + column.size());

  // Horizontal pass, then vertical pass; zero padding in both.
  ScalarGrid horizontal(height, width);
#pragma omp parallel for schedule(static) if (work >= kParallelWorkThreshold)
  for (int h = 0; h < height; ++h) {
    for (int w = 0; w < width; ++w) {
      const int j_lo = std::max(0, cw - w);
      const int j_hi = std::min(static_cast<int>(row.size()), width - w + cw);
      double acc = 0.0;
      for (int j = j_lo; j < j_hi; ++j) acc += input(h, w + j - cw) * row[j];
      horizontal(h, w) = acc;
    }
  }
  ScalarGrid out(height, width);
#pragma omp parallel for schedule(static) if (work >= kParallelWorkThreshold)
  for (int h = 0; h < height; ++h) {
    const int i_lo = std::max(0, ch - h);
    const int i_hi = std::min(static_cast<int>(column.size()), height - h + ch);
    for (int w = 0; w < width; ++w) {
      double acc = 0.0;
      for (int i = i_lo; i < i_hi; ++i) acc += horizontal(h + i - ch, w) * column[i];
      out(h, w) = acc;
    }
  }
  return out;
}

ScalarGrid downsample_avg(const ScalarGrid& input, int factor) {
  if (factor <= 0 || input.height() % factor != 0 || input.width() % factor != 0) {
    throw std::invalid_argument("downsample_avg: factor " + std::to_string(factor) +
                                " does not divide " + std::to_string(input.height()) + "x" +
                                std::to_string(input.width()));
  }
  if (factor == 1) return input;
  const int out_h = input.height() / factor;
  const int out_w = input.width() / factor;
  const double inv = 1.0 / static_cast<double>(factor * factor);
  ScalarGrid out(out_h, out_w);
  for (int h = 0; h < input.height(); ++h)
    for (int w = 0; w < input.width(); ++w) out(h / factor, w / factor) += input(h, w);
  out *= inv;
  return out;
}

ScalarGrid upsample_adjoint(const ScalarGrid& coarse, int factor) {
  if (factor <= 0) throw std::invalid_argument("upsample_adjoint: factor must be positive");
  if (factor == 1) return coarse;
  const double inv = 1.0 / static_cast<double>(factor * factor);
  ScalarGrid out(coarse.height() * factor, coarse.width() * factor);
  for (int h = 0; h < out.height(); ++h)
    for (int w = 0; w < out.width(); ++w) out(h, w) = coarse(h / factor, w / factor) * inv;
  return out;
}

ScalarGrid spatial_softmax(const ScalarGrid& input, double temperature) {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("spatial_softmax: temperature must be positive");
  }
  const double peak = input.max();
  ScalarGrid out(input.height(), input.width());
  auto src = input.values();
  auto dst = out.values();
  double total = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = std::exp((src[i] - peak) / temperature);
    total += dst[i];
  }
  const double inv = 1.0 / total;
  for (double& v : dst) v *= inv;
  return out;
}

ScalarGrid spatial_softmax_backward(const ScalarGrid& output, const ScalarGrid& upstream,
                                    double temperature) {
  require_same_shape(output, upstream, "spatial_softmax_backward");
  auto p = output.values();
  auto g = upstream.values();
  double dot = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) dot += p[i] * g[i];
  ScalarGrid grad(output.height(), output.width());
  auto dst = grad.values();
  const double inv_t = 1.0 / temperature;
  for (std::size_t i = 0; i < p.size(); ++i) dst[i] = p[i] * (g[i] - dot) * inv_t;
  return grad;
}

std::vector<double> gaussian_kernel_1d(int side, double sigma) {
  if (side <= 0 || side % 2 == 0) {
    throw std::invalid_argument("gaussian template side must be odd and positive, got " +
                                std::to_string(side));
  }
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian template sigma must be positive");
  const int c = side / 2;
  std::vector<double> k(static_cast<std::size_t>(side));
  for (int i = 0; i < side; ++i) {
    const double d = static_cast<double>(i - c);
    k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
  }
  return k;
}

ScalarGrid gaussian_template(int side, double sigma) {
  const auto k = gaussian_kernel_1d(side, sigma);
  ScalarGrid t(side, side);
  const int c = side / 2;
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      const double di = static_cast<double>(i - c);
      const double dj = static_cast<double>(j - c);
      t(i, j) = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
    }
  }
  // The centre is exp(0) = 1 already; rescaling keeps the unit-peak contract
  // explicit.
  t *= 1.0 / t(c, c);
  return t;
}

}  // namespace sguide
