#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sguide {

// Dense row-major H x W field of doubles. Documentation uses 1-based (h, w)
// with the origin at the top-left; accessors are 0-based.
class ScalarGrid {
 public:
  ScalarGrid() = default;
  ScalarGrid(int height, int width, double fill = 0.0);
  ScalarGrid(int height, int width, std::vector<double> values);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(int h, int w) { return values_[index(h, w)]; }
  double operator()(int h, int w) const { return values_[index(h, w)]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool same_shape(const ScalarGrid& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  double sum() const;
  double max() const;
  double min() const;
  double max_abs() const;
  bool all_finite() const;

  // Distribution grids: all entries >= 0 and total mass 1 within tolerance.
  bool is_distribution(double tolerance = 1e-9) const;

  ScalarGrid& operator+=(const ScalarGrid& other);
  ScalarGrid& operator-=(const ScalarGrid& other);
  ScalarGrid& operator*=(double scale);

  // this += scale * other
  void axpy(double scale, const ScalarGrid& other);

  friend bool operator==(const ScalarGrid&, const ScalarGrid&) = default;

 private:
  std::size_t index(int h, int w) const {
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(w);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

ScalarGrid operator+(ScalarGrid lhs, const ScalarGrid& rhs);
ScalarGrid operator-(ScalarGrid lhs, const ScalarGrid& rhs);
ScalarGrid operator*(double scale, ScalarGrid grid);

// C x H x W field; every channel shares one shape.
class Latent {
 public:
  Latent() = default;
  Latent(int channels, int height, int width, double fill = 0.0);
  explicit Latent(std::vector<ScalarGrid> channels);
  explicit Latent(ScalarGrid single_channel);

  int channels() const { return static_cast<int>(channels_.size()); }
  int height() const { return channels_.empty() ? 0 : channels_.front().height(); }
  int width() const { return channels_.empty() ? 0 : channels_.front().width(); }

  ScalarGrid& channel(int c) { return channels_[static_cast<std::size_t>(c)]; }
  const ScalarGrid& channel(int c) const { return channels_[static_cast<std::size_t>(c)]; }

  bool same_shape(const Latent& other) const;
  bool all_finite() const;
  double max_abs() const;
  double norm() const;

  ScalarGrid channel_mean() const;

  Latent& operator+=(const Latent& other);
  Latent& operator*=(double scale);
  void axpy(double scale, const Latent& other);

  friend bool operator==(const Latent&, const Latent&) = default;

 private:
  std::vector<ScalarGrid> channels_;
};

// Zero-padded 2D cross-correlation with the template centred on each output
// cell. Template sides must be odd and no larger than the input.
// Rows are distributed over OpenMP threads when the grid is large enough.
ScalarGrid cross_correlate(const ScalarGrid& input, const ScalarGrid& templ);

// Same operation for a separable template templ[i][j] = column[i] * row[j].
ScalarGrid cross_correlate_separable(const ScalarGrid& input,
                                     std::span<const double> column,
                                     std::span<const double> row);

// Mean over non-overlapping factor x factor blocks.
ScalarGrid downsample_avg(const ScalarGrid& input, int factor);

// Adjoint of downsample_avg: each coarse cell spreads value / factor^2 over
// its block.
ScalarGrid upsample_adjoint(const ScalarGrid& coarse, int factor);

// exp(x / temperature) normalised over the whole grid (max-subtracted).
ScalarGrid spatial_softmax(const ScalarGrid& input, double temperature);

// Vector-Jacobian product of spatial_softmax: given the forward output and
// dL/d(output), returns dL/d(input).
ScalarGrid spatial_softmax_backward(const ScalarGrid& output,
                                    const ScalarGrid& upstream,
                                    double temperature);

// Unit-peak Gaussian bump on an odd side x side grid.
ScalarGrid gaussian_template(int side, double sigma);

// 1D factor of gaussian_template: gaussian_template(s, sigma)[i][j] equals
// k[i] * k[j] for k = gaussian_kernel_1d(s, sigma).
std::vector<double> gaussian_kernel_1d(int side, double sigma);

// Serial kernels kept as the ground truth for tests and benchmarks.
namespace reference {

ScalarGrid cross_correlate(const ScalarGrid& input, const ScalarGrid& templ);
ScalarGrid downsample_avg(const ScalarGrid& input, int factor);
ScalarGrid spatial_softmax(const ScalarGrid& input, double temperature);

}  // namespace reference

}  // namespace sguide
