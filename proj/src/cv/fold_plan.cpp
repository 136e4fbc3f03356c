#include <algorithm>
#include <numeric>

#include "posl/cv.hpp"
#include "posl/error.hpp"

namespace posl {

const char* to_string(PlanScheme s) {
  switch (s) {
    case PlanScheme::rocv: return "rocv";
    case PlanScheme::rwcv: return "rwcv";
    case PlanScheme::forward: return "forward";
  }
  return "rocv";
}

namespace {

std::vector<int> range(int first, int last) {
  std::vector<int> v(static_cast<std::size_t>(last - first + 1));
  std::iota(v.begin(), v.end(), first);
  return v;
}

void check_horizon(int horizon) {
  if (horizon < 1) throw ArgumentError("horizon must be >= 1");
}

}  // namespace

FoldPlan make_rocv(int n_sessions, int initial_size, int horizon) {
  check_horizon(horizon);
  if (initial_size < 1) throw ArgumentError("rocv: initial size must be >= 1");
  if (n_sessions < initial_size + horizon)
    throw ArgumentError("rocv: series of " + std::to_string(n_sessions) + " sessions leaves nothing to validate");
  FoldPlan plan{PlanScheme::rocv, {}, initial_size, horizon};
  for (int end = initial_size; end + horizon <= n_sessions; ++end)
    plan.folds.push_back({range(1, end), {end + horizon}});
  return plan;
}

FoldPlan make_rwcv(int n_sessions, int window_size, int horizon) {
  check_horizon(horizon);
  if (window_size < 1) throw ArgumentError("rwcv: window size must be >= 1");
  if (n_sessions < window_size + horizon)
    throw ArgumentError("rwcv: series of " + std::to_string(n_sessions) + " sessions leaves nothing to validate");
  FoldPlan plan{PlanScheme::rwcv, {}, window_size, horizon};
  for (int end = window_size; end + horizon <= n_sessions; ++end)
    plan.folds.push_back({range(end - window_size + 1, end), {end + horizon}});
  return plan;
}

FoldPlan make_forward_plan(int n_sessions, int first_prediction) {
  if (first_prediction < 2) throw ArgumentError("forward plan: first prediction must be >= 2");
  if (n_sessions < first_prediction) throw ArgumentError("series too short");
  FoldPlan plan{PlanScheme::forward, {}, first_prediction, 1};
  for (int v = first_prediction; v <= n_sessions; ++v) plan.folds.push_back({range(1, v - 1), {v}});
  return plan;
}

FoldPlan make_rwcv_aligned(int n_sessions, int initial_size, int window_size) {
  if (window_size < 1) throw ArgumentError("rwcv: window size must be >= 1");
  FoldPlan plan = make_rocv(n_sessions, initial_size);
  plan.scheme = PlanScheme::rwcv;
  plan.size = window_size;
  for (auto& f : plan.folds) {
    const int v = f.validate.front();
    f.train = range(std::max(1, v - window_size), v - 1);
  }
  return plan;
}

std::string fold_plan_csv(const FoldPlan& plan) {
  std::string out = "fold,role,session_index\n";
  for (std::size_t k = 0; k < plan.folds.size(); ++k) {
    const auto fold = std::to_string(k + 1);
    for (int t : plan.folds[k].train) out += fold + ",train," + std::to_string(t) + "\n";
    for (int t : plan.folds[k].validate) out += fold + ",validate," + std::to_string(t) + "\n";
  }
  return out;
}

}  // namespace posl
