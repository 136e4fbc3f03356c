#include <algorithm>
#include <cmath>

#include "posl/detail/kernels.hpp"
#include "posl/error.hpp"
#include "posl/learners.hpp"

namespace posl {

const char* to_string(Family f) {
  switch (f) {
    case Family::mean: return "mean";
    case Family::linear: return "linear";
    case Family::ridge: return "ridge";
    case Family::lasso: return "lasso";
    case Family::hinge_spline: return "hinge_spline";
    case Family::gbt: return "gbt";
  }
  return "mean";
}

const char* to_string(Scope s) { return s == Scope::individual ? "individual" : "historical"; }
const char* to_string(CvScheme s) { return s == CvScheme::rocv ? "rocv" : "rwcv"; }

Family parse_family(const std::string& s) {
  for (Family f : {Family::mean, Family::linear, Family::ridge, Family::lasso, Family::hinge_spline,
                   Family::gbt})
    if (s == to_string(f)) return f;
  throw ConfigError("unknown learner family '" + s + "'");
}

CvScheme parse_cv_scheme(const std::string& s) {
  if (s == "rocv") return CvScheme::rocv;
  if (s == "rwcv") return CvScheme::rwcv;
  throw ConfigError("unknown cv scheme '" + s + "'");
}

Hyperparameters default_hyperparameters(Family f) {
  Hyperparameters h{{"screen_k", 5}, {"rf_trees", 200}, {"rf_min_leaf", 5},
                    {"rf_mtry", 0},  {"rf_permutation", 0}, {"seed", 1}};
  switch (f) {
    case Family::mean:
    case Family::linear: break;
    case Family::ridge:
      h["lambda"] = 1.0;
      h["max_iter"] = 100;
      break;
    case Family::lasso:
      h["lambda"] = 0.1;
      h["max_iter"] = 10000;
      h["tol"] = 1e-10;
      break;
    case Family::hinge_spline:
      h["max_terms"] = 11;
      h["min_span"] = 5;
      h["max_knots"] = 20;
      h["gcv_penalty"] = 2;
      break;
    case Family::gbt:
      h["rounds"] = 50;
      h["max_depth"] = 3;
      h["shrinkage"] = 0.1;
      h["min_leaf"] = 5;
      break;
  }
  return h;
}

double LearnerSpec::param(const std::string& key) const {
  const auto defaults = default_hyperparameters(family);
  auto d = defaults.find(key);
  if (d == defaults.end())
    throw ConfigError(std::string("hyperparameter '") + key + "' is not defined for " + to_string(family));
  auto it = hyper.find(key);
  return it != hyper.end() ? it->second : d->second;
}

int LearnerSpec::int_param(const std::string& key) const {
  return static_cast<int>(std::lround(param(key)));
}

std::string LearnerSpec::id() const {
  std::string s = scope == Scope::individual ? "ind_" : "hist_";
  s += to_string(family);
  if (screened) s += "_rf";
  if (scope == Scope::individual) s += std::string("_") + to_string(cv_scheme);
  return s;
}

void LearnerSpec::validate() const {
  const auto defaults = default_hyperparameters(family);
  for (const auto& [key, value] : hyper) {
    if (!defaults.count(key))
      throw ConfigError(std::string("hyperparameter '") + key + "' is not defined for " + to_string(family));
    if (!std::isfinite(value)) throw ConfigError("hyperparameter '" + key + "' must be finite");
  }
  auto require = [&](bool ok, const char* what) {
    if (!ok) throw ConfigError(id() + ": " + what);
  };
  if (family == Family::ridge || family == Family::lasso) require(param("lambda") >= 0, "lambda must be >= 0");
  if (family == Family::ridge || family == Family::lasso) require(param("max_iter") >= 1, "max_iter must be >= 1");
  if (family == Family::lasso) require(param("tol") > 0, "tol must be > 0");
  if (family == Family::hinge_spline) {
    require(param("max_terms") >= 1, "max_terms must be >= 1");
    require(param("min_span") >= 1, "min_span must be >= 1");
    require(param("max_knots") >= 1, "max_knots must be >= 1");
    require(param("gcv_penalty") >= 0, "gcv_penalty must be >= 0");
  }
  if (family == Family::gbt) {
    require(param("rounds") >= 0, "rounds must be >= 0");
    require(param("max_depth") >= 1, "max_depth must be >= 1");
    require(param("shrinkage") > 0, "shrinkage must be > 0");
    require(param("min_leaf") >= 1, "min_leaf must be >= 1");
  }
  if (screened) {
    require(param("screen_k") >= 1, "screen_k must be >= 1");
    require(param("rf_trees") >= 1, "rf_trees must be >= 1");
    require(param("rf_min_leaf") >= 1, "rf_min_leaf must be >= 1");
    require(param("rf_mtry") >= 0, "rf_mtry must be >= 0");
  }
}

ScreeningReport screen_for(const LearnerSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x,
                           std::span<const double> y) {
  ForestOptions options;
  options.min_leaf = spec.int_param("rf_min_leaf");
  options.mtry = spec.int_param("rf_mtry");
  options.permutation_importance = spec.param("rf_permutation") != 0.0;
  return rf_importance_screen(x, y, spec.int_param("screen_k"), spec.int_param("rf_trees"),
                              static_cast<std::uint64_t>(spec.param("seed")), options);
}

namespace {

Eigen::MatrixXd select_columns(const Eigen::Ref<const Eigen::MatrixXd>& x, const std::vector<int>& cols) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = x.col(cols[k]);
  return out;
}

void store_linear(FittedLearner& f, const detail::LinearFit& lf) {
  f.intercept = lf.intercept;
  f.coefficients.assign(lf.beta.data(), lf.beta.data() + lf.beta.size());
  f.converged = lf.converged;
}

bool finite_parameters(const FittedLearner& f) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::isfinite(f.intercept)) return false;
  if (!std::all_of(f.coefficients.begin(), f.coefficients.end(), finite)) return false;
  for (const auto& t : f.trees)
    for (const auto& n : t.nodes)
      if (!std::isfinite(n.value) || !std::isfinite(n.threshold)) return false;
  return true;
}

Eigen::MatrixXd rows_to_matrix(const std::vector<FeatureRow>& rows) {
  if (rows.empty()) return {};
  const auto p = rows.front().design().size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto d = rows[i].design();
    if (d.size() != p) throw ArgumentError("feature rows differ in arity");
    for (std::size_t j = 0; j < p; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d[j];
  }
  return x;
}

}  // namespace

FittedLearner fit(const LearnerSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x,
                  std::span<const double> y, std::span<const double> w, const ScreeningReport* screening) {
  const Eigen::Index n = x.rows();
  if (n == 0) throw ArgumentError("fit: empty input");
  if (static_cast<std::size_t>(n) != y.size()) throw ArgumentError("fit: rows and targets differ in length");
  if (!w.empty() && w.size() != y.size()) throw ArgumentError("fit: weights and targets differ in length");
  const bool binary = spec.outcome_mode == OutcomeMode::binary;
  for (double v : y) {
    if (!std::isfinite(v)) throw ArgumentError("fit: non-finite target");
    if (binary && v != 0.0 && v != 1.0) throw ArgumentError("fit: binary mode needs 0/1 targets");
  }
  for (double v : w)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError("fit: weights must be finite and >= 0");

  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  const Eigen::VectorXd wv =
      w.empty() ? Eigen::VectorXd::Ones(n) : Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(w.data(), n));
  if (!(wv.sum() > 0.0)) throw ArgumentError("fit: weights sum to zero");

  FittedLearner f;
  f.spec = spec;
  f.n_features = static_cast<int>(x.cols());
  Eigen::MatrixXd xs;
  if (spec.screened) {
    const ScreeningReport own = screening ? ScreeningReport{} : screen_for(spec, x, y);
    const ScreeningReport& report = screening ? *screening : own;
    f.selected_features = report.selected;
    std::sort(f.selected_features.begin(), f.selected_features.end());
    for (int c : f.selected_features)
      if (c < 0 || c >= f.n_features) throw ArgumentError("fit: screening index out of range");
    xs = select_columns(x, f.selected_features);
  } else {
    xs = x;
  }

  using detail::Penalty;
  switch (spec.family) {
    case Family::mean:
      f.intercept = wv.dot(yv) / wv.sum();
      break;
    case Family::linear:
      store_linear(f, binary ? detail::logistic(xs, yv, wv, Penalty::none, 0.0)
                             : detail::weighted_least_squares(xs, yv, wv));
      break;
    case Family::ridge: {
      const double lambda = spec.param("lambda");
      store_linear(f, binary ? detail::logistic(xs, yv, wv, Penalty::ridge, lambda, spec.int_param("max_iter"))
                             : detail::ridge(xs, yv, wv, lambda));
      break;
    }
    case Family::lasso: {
      const double lambda = spec.param("lambda");
      if (lambda == 0.0)  // the unpenalized problem, solved directly
        store_linear(f, binary ? detail::logistic(xs, yv, wv, Penalty::none, 0.0)
                               : detail::weighted_least_squares(xs, yv, wv));
      else
        store_linear(f, binary ? detail::logistic(xs, yv, wv, Penalty::lasso, lambda)
                               : detail::lasso(xs, yv, wv, lambda, spec.int_param("max_iter"), spec.param("tol")));
      break;
    }
    case Family::hinge_spline: {
      detail::HingeOptions o;
      o.max_terms = spec.int_param("max_terms");
      o.min_span = spec.int_param("min_span");
      o.max_knots = spec.int_param("max_knots");
      o.gcv_penalty = spec.param("gcv_penalty");
      auto hm = detail::hinge_spline(xs, yv, wv, o);
      f.basis = hm.basis;
      if (binary) {
        store_linear(f, detail::logistic(detail::hinge_design(xs, f.basis), yv, wv, Penalty::none, 0.0));
      } else {
        f.intercept = hm.intercept;
        f.coefficients = hm.coefficients;
        f.converged = hm.converged;
      }
      break;
    }
    case Family::gbt: {
      detail::TreeOptions o;
      o.max_depth = spec.int_param("max_depth");
      o.min_leaf = spec.int_param("min_leaf");
      auto bm = detail::gradient_boost(xs, yv, wv, spec.outcome_mode, spec.int_param("rounds"),
                                       spec.param("shrinkage"), o);
      f.intercept = bm.base_score;
      f.shrinkage = bm.shrinkage;
      f.trees = std::move(bm.trees);
      break;
    }
  }
  f.converged = f.converged && finite_parameters(f);
  return f;
}

FittedLearner fit(const LearnerSpec& spec, const std::vector<FeatureRow>& rows, std::span<const double> y,
                  std::span<const double> w) {
  if (rows.empty()) throw ArgumentError("fit: empty input");
  const Eigen::MatrixXd x = rows_to_matrix(rows);
  return fit(spec, x, y, w);
}

Eigen::VectorXd predict(const FittedLearner& fitted, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  if (!fitted.converged) throw Error(ErrorCategory::runtime, fitted.spec.id() + ": learner did not converge");
  if (x.cols() != fitted.n_features)
    throw ArgumentError("predict: expected " + std::to_string(fitted.n_features) + " features, got " +
                        std::to_string(x.cols()));
  const Eigen::Index n = x.rows();
  const bool screened = fitted.spec.screened;
  auto col = [&](Eigen::Index i, int j) {
    return x(i, screened ? fitted.selected_features[static_cast<std::size_t>(j)] : j);
  };
  Eigen::VectorXd out(n);
  const Family family = fitted.spec.family;
  for (Eigen::Index i = 0; i < n; ++i) {
    double eta = fitted.intercept;
    switch (family) {
      case Family::mean: break;
      case Family::linear:
      case Family::ridge:
      case Family::lasso:
        for (std::size_t j = 0; j < fitted.coefficients.size(); ++j)
          eta += fitted.coefficients[j] * col(i, static_cast<int>(j));
        break;
      case Family::hinge_spline:
        for (std::size_t k = 0; k < fitted.basis.size(); ++k)
          eta += fitted.coefficients[k] * fitted.basis[k].eval(col(i, fitted.basis[k].variable));
        break;
      case Family::gbt: {
        auto row = [&](int j) { return col(i, j); };
        double s = 0.0;
        for (const auto& t : fitted.trees) s += t.predict(row);
        eta += fitted.shrinkage * s;
        break;
      }
    }
    out(i) = fitted.spec.outcome_mode == OutcomeMode::binary && family != Family::mean ? detail::sigmoid(eta) : eta;
  }
  return out;
}

std::vector<double> predict(const FittedLearner& fitted, const std::vector<FeatureRow>& rows) {
  if (rows.empty()) return {};
  const Eigen::VectorXd p = predict(fitted, rows_to_matrix(rows));
  return {p.data(), p.data() + p.size()};
}

}  // namespace posl
