#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "satsync/graph.hpp"
#include "satsync/layout.hpp"
#include "satsync/model.hpp"
#include "satsync/scheduling.hpp"
#include "satsync/types.hpp"

namespace satsync {

enum class ProtocolKind { kGlobalFull, kGlobalPartial, kSemiglobalFull, kSemiglobalPartial };

bool is_global(ProtocolKind kind);
bool is_partial(ProtocolKind kind);
/// "global-full", "global-partial", "semiglobal-full", "semiglobal-partial".
std::string to_string(ProtocolKind kind);
/// Throws ParameterError on an unknown name.
ProtocolKind parse_protocol_kind(std::string_view name);

/// Parameters carried by a protocol: epsilon for semi-global kinds, the gain
/// schedule for global kinds and the observer gain K for partial kinds.
struct ProtocolConfig {
  ProtocolKind kind = ProtocolKind::kGlobalFull;
  double epsilon = 0.0;
  std::shared_ptr<const PCache> cache;
  Matrix observer_gain;
};

/// Fills in whatever the kind needs and is missing: builds the gain schedule
/// for global kinds and designs K for partial kinds. `epsilon` is required
/// for semi-global kinds.
ProtocolConfig make_protocol(ProtocolKind kind, const AgentModel& model, double epsilon = 0.0,
                             std::shared_ptr<const PCache> cache = nullptr);

/// zeta_bar_i = sum_j a_ij (y_i - y_j) + iota_i (y_i - y_r); outputs has one
/// column per agent.
Matrix coupling_signal(const Matrix& outputs, const Vector& y_r, const Network& net);

/// zeta_hat_i = sum_j a_ij (xi_i - xi_j); one column per agent.
Matrix additional_exchange(const Matrix& xi, const Network& net);

/// Pre-saturation controls (one column per agent) and, for global kinds, the
/// realized schedule value per agent (empty otherwise).
struct ControlSample {
  Matrix u;
  Vector epsilon;
};

/// The closed loop of N agents, the exosystem and the protocol states, laid
/// out as described by StackedLayout.
class ClosedLoop {
 public:
  /// Throws ParameterError when the configuration lacks a parameter its kind
  /// needs or when the gain schedule belongs to another model, and
  /// DesignError when A - KC is not Hurwitz.
  ClosedLoop(AgentModel model, Network net, ProtocolConfig config);

  const AgentModel& model() const noexcept { return model_; }
  const Network& network() const noexcept { return net_; }
  const ProtocolConfig& config() const noexcept { return config_; }
  const StackedLayout& layout() const noexcept { return layout_; }

  /// z' = f(z); the field is autonomous.
  void derivative(const Vector& z, Vector& dz) const;

  ControlSample controls(const Vector& z) const;

  /// Stacks agent states (columns of x0), the exosystem state and optional
  /// protocol states (zero when empty).
  Vector initial_state(const Matrix& x0, const Vector& xr0, const Matrix& chi0 = Matrix(),
                       const Matrix& xhat0 = Matrix()) const;

 private:
  void compute_controls(const Eigen::Ref<const Matrix>& chi, Matrix& u, Vector* epsilon) const;

  AgentModel model_;
  Network net_;
  ProtocolConfig config_;
  StackedLayout layout_;
  Matrix laplacian_t_;
  Matrix expanded_t_;
  Vector iota_;
  Matrix bt_p_;  // semi-global feedback B' P_eps
};

}  // namespace satsync
