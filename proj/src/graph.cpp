#include "satsync/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "satsync/linalg.hpp"

namespace satsync {

Network::Network(Matrix adjacency, std::vector<bool> roots)
    : adjacency_(std::move(adjacency)), roots_(std::move(roots)) {
  if (adjacency_.rows() != adjacency_.cols())
    throw ValidationError("adjacency", "must be square");
  if (static_cast<Eigen::Index>(roots_.size()) != adjacency_.rows())
    throw ValidationError("roots", "indicator length must equal the number of agents");
  for (Eigen::Index i = 0; i < adjacency_.rows(); ++i) {
    for (Eigen::Index j = 0; j < adjacency_.cols(); ++j) {
      const double w = adjacency_(i, j);
      const std::string where =
          "adjacency[" + std::to_string(i) + "][" + std::to_string(j) + "]";
      if (!std::isfinite(w) || w < 0.0) throw ValidationError(where, "weights must be nonnegative");
      if (i == j && w != 0.0) throw ValidationError(where, "self-loops are not allowed");
    }
  }
}

Vector Network::iota() const {
  Vector v(size());
  for (int i = 0; i < size(); ++i) v[i] = roots_[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  return v;
}

Network Network::permuted(const std::vector<int>& perm) const {
  const int n = size();
  Matrix adj(n, n);
  std::vector<bool> roots(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    roots[static_cast<std::size_t>(i)] = roots_[static_cast<std::size_t>(perm[i])];
    for (int j = 0; j < n; ++j) adj(i, j) = adjacency_(perm[i], perm[j]);
  }
  return Network(std::move(adj), std::move(roots));
}

Matrix laplacian(const Network& net) {
  Matrix l = -net.adjacency();
  l.diagonal() = net.adjacency().rowwise().sum();
  return l;
}

ExpandedLaplacian expanded_laplacian(const Network& net) {
  ExpandedLaplacian out;
  out.matrix = laplacian(net);
  out.matrix.diagonal() += net.iota();
  out.spectrum = linalg::eigenvalues(out.matrix);
  return out;
}

RootedCheck check_rooted_family(const Network& net) {
  RootedCheck check;
  const int n = net.size();
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::deque<int> frontier;
  for (int i = 0; i < n; ++i) {
    if (net.is_root(i)) {
      seen[static_cast<std::size_t>(i)] = true;
      frontier.push_back(i);
    }
  }
  if (frontier.empty()) {
    check.diagnostic = "root set is empty";
    for (int i = 0; i < n; ++i) check.unreachable.push_back(i);
    return check;
  }
  while (!frontier.empty()) {
    const int j = frontier.front();
    frontier.pop_front();
    for (int i = 0; i < n; ++i) {
      if (net.adjacency()(i, j) > 0.0 && !seen[static_cast<std::size_t>(i)]) {
        seen[static_cast<std::size_t>(i)] = true;
        frontier.push_back(i);
      }
    }
  }
  for (int i = 0; i < n; ++i)
    if (!seen[static_cast<std::size_t>(i)]) check.unreachable.push_back(i);
  check.member = check.unreachable.empty();
  if (!check.member) {
    check.diagnostic = "agents not reachable from the root set:";
    for (int i : check.unreachable) check.diagnostic += " " + std::to_string(i);
  }
  return check;
}

bool in_rooted_family(const Network& net) { return check_rooted_family(net).member; }

namespace {

void require_assumption(const AgentModel& model) {
  const AssumptionReport report = check_assumption(model);
  if (!report.pass)
    throw ValidationError("model", "agent model violates the closed-left-half-plane/stabilizability/"
                                   "detectability assumption");
}

}  // namespace

bool target_dynamics_stable(const Network& net, const AgentModel& model) {
  require_assumption(model);
  const ComplexVector lap = expanded_laplacian(net).spectrum;
  const ComplexVector eig_a = linalg::eigenvalues(model.a());
  for (Eigen::Index i = 0; i < lap.size(); ++i)
    for (Eigen::Index k = 0; k < eig_a.size(); ++k)
      if (eig_a[k].real() - lap[i].real() >= -kLaplacianPositivity) return false;
  return true;
}

bool target_dynamics_stable_direct(const Network& net, const AgentModel& model) {
  require_assumption(model);
  const int n = model.n();
  const Matrix lt = expanded_laplacian(net).matrix;
  const Matrix big = linalg::kron(Matrix::Identity(net.size(), net.size()), model.a()) -
                     linalg::kron(lt, Matrix::Identity(n, n));
  return linalg::spectral_abscissa(big) < -kLaplacianPositivity;
}

Network random_rooted_network(int n, std::mt19937_64& rng, const RandomNetworkOptions& options) {
  std::uniform_real_distribution<double> weight(options.min_weight, options.max_weight);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<bool> roots(static_cast<std::size_t>(n), false);
  const int num_roots = std::clamp(options.num_roots, 1, n);
  for (int k = 0; k < num_roots; ++k) roots[static_cast<std::size_t>(order[k])] = true;

  // Arborescence: every node after the first picks a parent among the
  // nodes already attached, so everything is reachable from order[0].
  Matrix adj = Matrix::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    std::uniform_int_distribution<int> pick(0, k - 1);
    adj(order[k], order[pick(rng)]) = weight(rng);
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && adj(i, j) == 0.0 && coin(rng) < options.extra_edge_probability)
        adj(i, j) = weight(rng);
  return Network(std::move(adj), std::move(roots));
}

}  // namespace satsync
