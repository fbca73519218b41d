// Straightforward serial versions of the grid kernels. They read the formulas
// directly and are used as oracles in tests and as the baseline in benchmarks.

#include <cmath>
#include <stdexcept>

#include "sguide/grid.hpp"

namespace sguide::reference {

ScalarGrid cross_correlate(const ScalarGrid& input, const ScalarGrid& templ) {
  if (templ.height() % 2 == 0 || templ.width() % 2 == 0 || templ.height() > input.height() ||
      templ.width() > input.width()) {
    throw std::invalid_argument("reference::cross_correlate: bad template shape");
  }
  const int ch = templ.height() / 2;
  const int cw = templ.width() / 2;
  ScalarGrid out(input.height(), input.width());
  for (int h = 0; h < input.height(); ++h) {
    for (int w = 0; w < input.width(); ++w) {
      double acc = 0.0;
      for (int i = 0; i < templ.height(); ++i) {
        for (int j = 0; j < templ.width(); ++j) {
          const int y = h + i - ch;
          const int x = w + j - cw;
          if (y < 0 || y >= input.height() || x < 0 || x >= input.width()) continue;
          acc += input(y, x) * templ(i, j);
        }
      }
      out(h, w) = acc;
    }
  }
  return out;
}

ScalarGrid downsample_avg(const ScalarGrid& input, int factor) {
  if (factor <= 0 || input.height() % factor != 0 || input.width() % factor != 0) {
    throw std::invalid_argument("reference::downsample_avg: factor does not divide grid");
  }
  ScalarGrid out(input.height() / factor, input.width() / factor);
  for (int h = 0; h < out.height(); ++h) {
    for (int w = 0; w < out.width(); ++w) {
      double acc = 0.0;
      for (int i = 0; i < factor; ++i)
        for (int j = 0; j < factor; ++j) acc += input(h * factor + i, w * factor + j);
      out(h, w) = acc / static_cast<double>(factor * factor);
    }
  }
  return out;
}

ScalarGrid spatial_softmax(const ScalarGrid& input, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("reference::spatial_softmax");
  ScalarGrid out(input.height(), input.width());
  double peak = input(0, 0);
  for (double v : input.values()) peak = v > peak ? v : peak;
  double total = 0.0;
  for (int h = 0; h < input.height(); ++h)
    for (int w = 0; w < input.width(); ++w) total += std::exp((input(h, w) - peak) / temperature);
  for (int h = 0; h < input.height(); ++h)
    for (int w = 0; w < input.width(); ++w)
      out(h, w) = std::exp((input(h, w) - peak) / temperature) / total;
  return out;
}

}  // namespace sguide::reference
