#pragma once

namespace satsync {

/// Offsets into the stacked closed-loop state
/// [x_1 .. x_N | x_r | chi_1 .. chi_N | xhat_1 .. xhat_N (partial kinds)].
struct StackedLayout {
  int agents = 0;
  int n = 0;
  int m = 0;
  bool partial = false;

  int dim() const { return agents * n + n + agents * n + (partial ? agents * n : 0); }
  int x(int i) const { return i * n; }
  int xr() const { return agents * n; }
  int chi(int i) const { return agents * n + n + i * n; }
  int xhat(int i) const { return 2 * agents * n + n + i * n; }
};

}  // namespace satsync
