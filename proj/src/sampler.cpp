#include "rwmcv/sampler.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "rwmcv/numerics.hpp"

namespace rwmcv {

StepResult rwm_step(const TargetDistribution& target,
                    const Eigen::VectorXd& state, double l, RngStream& rng) {
  const int d = target.dimension();
  if (state.size() != d) throw std::invalid_argument("rwm_step: dim mismatch");
  const double scale = l / std::sqrt(static_cast<double>(d));

  StepResult r;
  r.proposal.resize(d);
  for (int i = 0; i < d; ++i) r.proposal(i) = state(i) + scale * rng.normal();

  const double log_ratio =
      target.log_density(r.proposal) - target.log_density(state);
  // log-space acceptance; the uniform is drawn unconditionally to keep the
  // stream consumption pattern fixed.
  const double log_u = std::log(rng.uniform());
  r.accepted = log_ratio >= 0.0 || log_u < log_ratio;
  r.new_state = r.accepted ? r.proposal : state;
  return r;
}

ChainSample rwm_run(const TargetDistribution& target, const RWMConfig& config) {
  if (config.d != target.dimension())
    throw std::invalid_argument("rwm_run: config.d does not match target");
  if (config.T < 1) throw std::invalid_argument("rwm_run: T must be >= 1");
  if (!(config.l > 0.0)) throw std::invalid_argument("rwm_run: l must be > 0");

  ChainSample chain;
  chain.config = config;
  chain.states.resize(config.T, config.d);
  chain.accepted.assign(config.T, 0);

  RngStream rng(config.seed);
  Eigen::VectorXd x = target.sample(rng);
  chain.states.row(0) = x.transpose();
  chain.accepted[0] = 1;  // stationary draw, by convention

  double log_rho_x = target.log_density(x);
  const double scale = config.l / std::sqrt(static_cast<double>(config.d));
  Eigen::VectorXd proposal(config.d);
  for (int n = 1; n < config.T; ++n) {
    for (int i = 0; i < config.d; ++i)
      proposal(i) = x(i) + scale * rng.normal();
    const double log_rho_y = target.log_density(proposal);
    const double log_u = std::log(rng.uniform());
    const bool accept = log_rho_y - log_rho_x >= 0.0 || log_u < log_rho_y - log_rho_x;
    if (accept) {
      x = proposal;
      log_rho_x = log_rho_y;
    }
    chain.states.row(n) = x.transpose();
    chain.accepted[n] = accept ? 1 : 0;
  }
  return chain;
}

double empirical_acceptance(const ChainSample& chain) {
  const int T = chain.length();
  if (T < 1) throw std::invalid_argument("empirical_acceptance: empty chain");
  if (T == 1) return 1.0;
  long accepted = 0;
  for (int n = 1; n < T; ++n) accepted += chain.accepted[n] ? 1 : 0;
  return static_cast<double>(accepted) / static_cast<double>(T - 1);
}

double optimal_l(double J) {
  if (!(J > 0.0)) throw std::invalid_argument("optimal_l: J must be > 0");
  // h(l; J) = h(l sqrt(J); 1) / J, so the maximizer scales as 1/sqrt(J).
  static const double c_hat = golden_section_max(
      [](double l) { return 2.0 * l * l * normal_cdf(-0.5 * l); }, 1e-8, 12.0,
      1e-13);
  return c_hat / std::sqrt(J);
}

void write_chain_csv(const ChainSample& chain, const std::string& path) {
  const int d = static_cast<int>(chain.states.cols());
  if (d > 50)
    throw std::invalid_argument("write_chain_csv: coordinate dump capped at d <= 50");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_chain_csv: cannot open " + path);
  out << "step,accepted";
  for (int i = 1; i <= d; ++i) out << ",x" << i;
  out << "\n";
  char buf[32];
  for (int n = 0; n < chain.length(); ++n) {
    out << (n + 1) << ',' << (chain.accepted[n] ? 1 : 0);
    for (int i = 0; i < d; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", chain.states(n, i));
      out << ',' << buf;
    }
    out << "\n";
  }
}

}  // namespace rwmcv
