#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "posl/error.hpp"
#include "posl/paneldata.hpp"

namespace posl {

void SimulationConfig::validate() const {
  if (n_individuals < 1) throw ConfigError("simulation: n_individuals must be >= 1");
  if (min_sessions < 1 || max_sessions < min_sessions)
    throw ConfigError("simulation: need 1 <= min_sessions <= max_sessions");
  if (n_predictors < 1) throw ConfigError("simulation: n_predictors must be >= 1");
  if (!(individual_effect_sd >= 0.0) || !(noise_sd >= 0.0))
    throw ConfigError("simulation: standard deviations must be >= 0");
  if (!(missing_rate >= 0.0 && missing_rate <= 1.0))
    throw ConfigError("simulation: missing_rate must lie in [0,1]");
  if (!(covariate_autocorrelation >= 0.0 && covariate_autocorrelation < 1.0))
    throw ConfigError("simulation: covariate_autocorrelation must lie in [0,1)");
  if (!(outcome_lo < outcome_hi)) throw ConfigError("simulation: outcome bounds need lo < hi");
  if (!std::isfinite(intercept) || !std::isfinite(drift_slope))
    throw ConfigError("simulation: intercept and drift must be finite");
}

double simulated_covariate_effect(int j) {
  const double magnitude = 2.0 / (1.0 + j);
  return j % 2 == 0 ? magnitude : -magnitude;
}

double simulated_linear_predictor(const SimulationConfig& config, double age, double site,
                                  double random_effect, int t,
                                  const std::vector<double>& previous_covariates) {
  double eta = config.intercept + random_effect + kSimulatedAgeEffect * age +
               kSimulatedSiteEffects[static_cast<int>(site) - 1] + config.drift_slope * t;
  for (std::size_t j = 0; j < previous_covariates.size(); ++j)
    eta += simulated_covariate_effect(static_cast<int>(j)) * previous_covariates[j];
  return eta;
}

PanelDataset simulate_panel(const SimulationConfig& config) { return simulate_panel(config, nullptr); }

PanelDataset simulate_panel(const SimulationConfig& config, SimulationTruth* truth) {
  config.validate();
  const int P = config.n_predictors;

  PanelDataset ds;
  ds.schema.columns.push_back({"age", ColumnKind::continuous, ColumnRole::baseline, {}});
  ds.schema.columns.push_back({"site", ColumnKind::categorical, ColumnRole::baseline, {1.0, 2.0, 3.0}});
  for (int j = 0; j < P; ++j) {
    const bool binary = P >= 3 && j == P - 1;
    ds.schema.columns.push_back({"x" + std::to_string(j + 1),
                                 binary ? ColumnKind::binary : ColumnKind::continuous,
                                 ColumnRole::session,
                                 {}});
  }

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> length(config.min_sessions, config.max_sessions);
  std::uniform_int_distribution<int> site_draw(1, 3);
  const double rho = config.covariate_autocorrelation;
  const double innovation = std::sqrt(1.0 - rho * rho);
  auto missing = [&] { return unif(rng) < config.missing_rate; };

  const int width = std::max(3, static_cast<int>(std::to_string(config.n_individuals).size()));
  for (int i = 0; i < config.n_individuals; ++i) {
    std::string num = std::to_string(i + 1);
    IndividualSeries s;
    s.id = "P" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num;
    const int T = length(rng);
    const double age = normal(rng);
    const double site = site_draw(rng);
    const double b = config.individual_effect_sd * normal(rng);
    s.baseline = {missing() ? MaybeReal{} : MaybeReal{age}, site};

    std::vector<double> latent(static_cast<std::size_t>(P)), prev;
    std::vector<std::vector<double>> path;
    for (int t = 1; t <= T; ++t) {
      std::vector<double> current(static_cast<std::size_t>(P));
      for (int j = 0; j < P; ++j) {
        auto& z = latent[static_cast<std::size_t>(j)];
        z = t == 1 ? normal(rng) : rho * z + innovation * normal(rng);
        const bool binary = P >= 3 && j == P - 1;
        current[static_cast<std::size_t>(j)] = binary ? (z > 0.0 ? 1.0 : 0.0) : z;
      }
      const double eta = simulated_linear_predictor(config, age, site, b, t, prev);
      const double y = std::clamp(eta + config.noise_sd * normal(rng), config.outcome_lo, config.outcome_hi);

      SessionRecord rec;
      rec.session_index = t;
      rec.outcome = missing() ? MaybeReal{} : MaybeReal{y};
      for (int j = 0; j < P; ++j)
        rec.covariates.push_back(missing() ? MaybeReal{} : MaybeReal{current[static_cast<std::size_t>(j)]});
      s.sessions.push_back(std::move(rec));
      path.push_back(current);
      prev = std::move(current);
    }
    if (truth) {
      truth->random_effects.push_back(b);
      truth->ages.push_back(age);
      truth->sites.push_back(site);
      truth->covariates.push_back(std::move(path));
    }
    ds.individuals.push_back(std::move(s));
  }
  return ds;
}

}  // namespace posl
