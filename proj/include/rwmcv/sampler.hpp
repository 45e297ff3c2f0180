#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "rwmcv/rng.hpp"
#include "rwmcv/targets.hpp"

namespace rwmcv {

struct RWMConfig {
  int d = 1;             // dimension
  double l = 2.38;       // proposal scale; proposal covariance is l^2/d * I
  int T = 1;             // stored chain length (T-1 transitions)
  std::uint64_t seed = 0;
};

/// One RWM trajectory. Row n of states is X_{n+1}; row 0 is an exact
/// stationary draw and accepted[0] is true by convention, so a chain of
/// length T holds T-1 kernel transitions.
struct ChainSample {
  Eigen::MatrixXd states;            // T x d
  std::vector<std::uint8_t> accepted;
  RWMConfig config;

  int length() const { return static_cast<int>(states.rows()); }
};

struct StepResult {
  Eigen::VectorXd new_state;
  bool accepted = false;
  Eigen::VectorXd proposal;
};

/// One Metropolis transition from `state`: proposal Y ~ N(state, l^2/d I),
/// accepted with probability 1 ^ exp(log rho_d(Y) - log rho_d(state)).
/// Proposal coordinates are drawn from the stream in index order, then the
/// acceptance uniform, so the draw pattern is reproducible.
StepResult rwm_step(const TargetDistribution& target,
                    const Eigen::VectorXd& state, double l, RngStream& rng);

/// Runs a chain of config.T states started from an exact stationary draw.
/// Deterministic given config.seed.
ChainSample rwm_run(const TargetDistribution& target, const RWMConfig& config);

/// Fraction of accepted transitions (the conventional accepted[0] flag is
/// not counted). Returns 1 for a single-state chain.
double empirical_acceptance(const ChainSample& chain);

/// argmax over l > 0 of h(l) = 2 l^2 Phi(-l sqrt(J)/2); equals c_hat/sqrt(J)
/// where c_hat is the universal maximizer found once by golden-section
/// search (c_hat ~ 2.38).
double optimal_l(double J);

/// Trajectory dump, header `step,accepted,x1,...,xd`. Refuses d > 50.
void write_chain_csv(const ChainSample& chain, const std::string& path);

}  // namespace rwmcv
