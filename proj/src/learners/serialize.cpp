#include <cmath>
#include <limits>

#include "posl/error.hpp"
#include "posl/learners.hpp"

namespace posl {

using nlohmann::json;

namespace {

// JSON has no NaN; non-finite parameters of failed fits become null.
json real(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double real_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json reals(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(real(x));
  return a;
}

std::vector<double> reals_from(const json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(real_from(x));
  return v;
}

}  // namespace

json to_json(const LearnerSpec& spec) {
  json h = json::object();
  for (const auto& [k, v] : spec.hyper) h[k] = v;
  return {{"family", to_string(spec.family)},
          {"scope", to_string(spec.scope)},
          {"cv_scheme", to_string(spec.cv_scheme)},
          {"outcome_mode", to_string(spec.outcome_mode)},
          {"screened", spec.screened},
          {"hyperparameters", h}};
}

LearnerSpec spec_from_json(const json& j) {
  try {
    LearnerSpec s;
    s.family = parse_family(j.at("family").get<std::string>());
    const auto scope = j.value("scope", std::string("individual"));
    if (scope == "individual")
      s.scope = Scope::individual;
    else if (scope == "historical")
      s.scope = Scope::historical;
    else
      throw ConfigError("unknown scope '" + scope + "'");
    s.cv_scheme = parse_cv_scheme(j.value("cv_scheme", std::string("rocv")));
    s.outcome_mode = parse_outcome_mode(j.value("outcome_mode", std::string("continuous")));
    s.screened = j.value("screened", false);
    if (j.contains("hyperparameters"))
      for (const auto& [k, v] : j.at("hyperparameters").items()) s.hyper[k] = v.get<double>();
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("learner spec: ") + e.what());
  }
}

json to_json(const FittedLearner& f) {
  json basis = json::array();
  for (const auto& b : f.basis) basis.push_back({b.variable, real(b.knot), b.direction});
  json trees = json::array();
  for (const auto& t : f.trees) {
    json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
         value = json::array();
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(real(n.threshold));
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(real(n.value));
    }
    trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right},
                     {"value", value}});
  }
  return {{"spec", to_json(f.spec)},
          {"n_features", f.n_features},
          {"selected_features", f.selected_features},
          {"intercept", real(f.intercept)},
          {"coefficients", reals(f.coefficients)},
          {"basis", basis},
          {"trees", trees},
          {"shrinkage", real(f.shrinkage)},
          {"converged", f.converged}};
}

FittedLearner learner_from_json(const json& j) {
  try {
    FittedLearner f;
    f.spec = spec_from_json(j.at("spec"));
    f.n_features = j.at("n_features").get<int>();
    f.selected_features = j.at("selected_features").get<std::vector<int>>();
    f.intercept = real_from(j.at("intercept"));
    f.coefficients = reals_from(j.at("coefficients"));
    for (const auto& b : j.at("basis"))
      f.basis.push_back({b.at(0).get<int>(), real_from(b.at(1)), b.at(2).get<int>()});
    for (const auto& t : j.at("trees")) {
      RegressionTree tree;
      const auto& feature = t.at("feature");
      for (std::size_t k = 0; k < feature.size(); ++k)
        tree.nodes.push_back({feature.at(k).get<int>(), real_from(t.at("threshold").at(k)),
                              t.at("left").at(k).get<int>(), t.at("right").at(k).get<int>(),
                              real_from(t.at("value").at(k))});
      f.trees.push_back(std::move(tree));
    }
    f.shrinkage = real_from(j.at("shrinkage"));
    f.converged = j.at("converged").get<bool>();
    return f;
  } catch (const json::exception& e) {
    throw DataError(std::string("fitted learner: ") + e.what());
  }
}

}  // namespace posl
