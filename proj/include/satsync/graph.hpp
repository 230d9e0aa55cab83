#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "satsync/model.hpp"
#include "satsync/types.hpp"

namespace satsync {

/// Positivity threshold separating a structural zero eigenvalue of the
/// expanded Laplacian from round-off.
inline constexpr double kLaplacianPositivity = 1e-9;

/// Weighted digraph: a(i, j) > 0 is an edge j -> i (agent i receives from j).
/// The root indicator marks agents that see their output relative to the
/// exosystem.
class Network {
 public:
  /// Throws ValidationError on a non-square adjacency, negative weights,
  /// self-loops, or an indicator of the wrong size.
  Network(Matrix adjacency, std::vector<bool> roots);

  int size() const noexcept { return static_cast<int>(adjacency_.rows()); }
  const Matrix& adjacency() const noexcept { return adjacency_; }
  const std::vector<bool>& roots() const noexcept { return roots_; }
  bool is_root(int i) const { return roots_.at(static_cast<std::size_t>(i)); }
  /// Root indicator as a 0/1 vector.
  Vector iota() const;

  /// Relabel agents: new agent k is old agent perm[k].
  Network permuted(const std::vector<int>& perm) const;

 private:
  Matrix adjacency_;
  std::vector<bool> roots_;
};

struct ExpandedLaplacian {
  Matrix matrix;
  ComplexVector spectrum;

  double min_real_part() const { return spectrum.real().minCoeff(); }
};

struct RootedCheck {
  bool member = false;
  std::vector<int> unreachable;  // agents with no path from the root set
  std::string diagnostic;
};

/// Row i: sum_k a_ik on the diagonal, -a_ij off it.
Matrix laplacian(const Network& net);

/// L + diag(iota) together with its eigenvalues.
ExpandedLaplacian expanded_laplacian(const Network& net);

/// Reachability of every agent from the root set along edges j -> i.
RootedCheck check_rooted_family(const Network& net);
bool in_rooted_family(const Network& net);

/// True iff A - lambda I is Hurwitz for every eigenvalue lambda of the
/// expanded Laplacian. Uses Re(mu_A) - Re(lambda) < 0 over both spectra.
/// Throws ValidationError when the model fails its structural assumption.
bool target_dynamics_stable(const Network& net, const AgentModel& model);

/// Direct check on the eigenvalues of I (x) A - L~ (x) I; used to cross-check
/// target_dynamics_stable.
bool target_dynamics_stable_direct(const Network& net, const AgentModel& model);

/// Random member of the rooted family: a random spanning arborescence grown
/// from a root-set member, plus random extra edges. Weights are uniform in
/// [min_weight, max_weight].
struct RandomNetworkOptions {
  int num_roots = 1;
  double extra_edge_probability = 0.2;
  double min_weight = 0.1;
  double max_weight = 2.0;
};
Network random_rooted_network(int n, std::mt19937_64& rng,
                              const RandomNetworkOptions& options = {});

}  // namespace satsync
