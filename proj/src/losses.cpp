#include "sguide/losses.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sguide {

void LossConfig::validate(bool allow_all_off) const {
  if (!(alpha > 0.0)) throw std::invalid_argument("loss: alpha must be > 0");
  if (!(margin >= 0.0 && margin <= 1.0)) throw std::invalid_argument("loss: margin must be in [0,1]");
  if (!(lambda_spatial >= 0.0) || !(lambda_presence >= 0.0) || !(lambda_balance >= 0.0)) {
    throw std::invalid_argument("loss: lambdas must be >= 0");
  }
  if (!allow_all_off && all_off()) {
    throw std::invalid_argument("loss: at least one lambda must be > 0");
  }
}

double gelu(double x) {
  // erfc keeps full relative precision in the negative tail.
  return x * 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double gelu_derivative(double x) {
  const double cdf = 0.5 * std::erfc(-x / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

double spatial_loss(double delta, const LossConfig& cfg) {
  return gelu(cfg.alpha * (cfg.margin - delta));
}

double spatial_loss_derivative(double delta, const LossConfig& cfg) {
  return -cfg.alpha * gelu_derivative(cfg.alpha * (cfg.margin - delta));
}

double presence_loss(double var_a, double var_b) { return var_a + var_b; }

double balance_loss(double var_a, double var_b) { return std::abs(var_a - var_b); }

LossBreakdown compound_loss(const TokenStats& a, const TokenStats& b, Relation relation,
                            const LossConfig& cfg) {
  for (Level level : {Level::Coarse, Level::Mid}) {
    if (!a.has(level) || !b.has(level)) {
      throw std::invalid_argument(std::string("compound_loss: missing ") + level_name(level) +
                                  " statistics");
    }
  }
  LossBreakdown out;
  for (Level level : {Level::Coarse, Level::Mid}) {
    for (int layer = 0; layer < kLayersPerLevel; ++layer) {
      const auto& sa = a.at(level, layer);
      const auto& sb = b.at(level, layer);
      out.spatial += spatial_loss(relation_delta(sa.centroid, sb.centroid, relation), cfg);
      if (level == Level::Coarse) out.presence += presence_loss(sa.variance, sb.variance);
      else out.balance += balance_loss(sa.variance, sb.variance);
    }
  }
  out.spatial /= 2.0 * kLayersPerLevel;
  out.presence /= kLayersPerLevel;
  out.balance /= kLayersPerLevel;
  out.total = cfg.lambda_spatial * out.spatial + cfg.lambda_presence * out.presence +
              cfg.lambda_balance * out.balance;
  return out;
}

}  // namespace sguide
