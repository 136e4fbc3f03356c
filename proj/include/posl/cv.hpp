#pragma once

#include <string>
#include <vector>

namespace posl {

/// Session positions are 1-based.
struct Fold {
  std::vector<int> train;
  std::vector<int> validate;
};

enum class PlanScheme { rocv, rwcv, forward };
const char* to_string(PlanScheme s);

struct FoldPlan {
  PlanScheme scheme = PlanScheme::rocv;
  std::vector<Fold> folds;
  int size = 0;  // initial size, window size or first prediction
  int horizon = 1;
};

/// Fold v trains on 1..initial_size+v-1 and validates initial_size+v-1+horizon.
FoldPlan make_rocv(int n_sessions, int initial_size, int horizon = 1);
/// Fold v trains on v..window_size+v-1 and validates window_size+v-1+horizon.
FoldPlan make_rwcv(int n_sessions, int window_size, int horizon = 1);
/// One fold per predicted session first_prediction..n_sessions, trained on the full prefix.
FoldPlan make_forward_plan(int n_sessions, int first_prediction = 12);

/// Inner plan of a sliding-window learner that validates the same sessions
/// as make_rocv(n_sessions, initial_size): fold for session v trains on
/// max(1, v - window_size)..v-1, so early windows are shorter.
FoldPlan make_rwcv_aligned(int n_sessions, int initial_size, int window_size);

/// fold,role,session_index rows (role is train or validate), with header.
std::string fold_plan_csv(const FoldPlan& plan);

}  // namespace posl
