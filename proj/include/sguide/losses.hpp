#pragma once

#include "sguide/prompt.hpp"
#include "sguide/spatial_stats.hpp"

namespace sguide {

enum class Activation { GeluExact };

struct LossConfig {
  double alpha = 1.5;
  double margin = 0.25;
  double lambda_spatial = 0.5;
  double lambda_presence = 1.0;
  double lambda_balance = 0.5;
  Activation activation = Activation::GeluExact;

  // alpha > 0, margin in [0,1], lambdas >= 0. An all-zero lambda set is
  // allowed only through allow_all_off (ablation rows switch every term off).
  void validate(bool allow_all_off = false) const;
  bool all_off() const {
    return lambda_spatial == 0.0 && lambda_presence == 0.0 && lambda_balance == 0.0;
  }
};

struct LossBreakdown {
  double spatial = 0.0;
  double presence = 0.0;
  double balance = 0.0;
  double total = 0.0;
};

// x * Phi(x) with Phi from erfc.
double gelu(double x);
// Phi(x) + x * phi(x)
double gelu_derivative(double x);

double spatial_loss(double delta, const LossConfig& cfg);
double spatial_loss_derivative(double delta, const LossConfig& cfg);  // d/d(delta)

double presence_loss(double var_a, double var_b);
double balance_loss(double var_a, double var_b);

// Spatial term: mean over coarse and mid layers. Presence: mean over coarse
// layers. Balance: mean over mid layers.
LossBreakdown compound_loss(const TokenStats& a, const TokenStats& b, Relation relation,
                            const LossConfig& cfg);

}  // namespace sguide
