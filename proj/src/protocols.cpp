#include "satsync/protocols.hpp"

#include <utility>

#include "satsync/riccati.hpp"

namespace satsync {

bool is_global(ProtocolKind kind) {
  return kind == ProtocolKind::kGlobalFull || kind == ProtocolKind::kGlobalPartial;
}

bool is_partial(ProtocolKind kind) {
  return kind == ProtocolKind::kGlobalPartial || kind == ProtocolKind::kSemiglobalPartial;
}

std::string to_string(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::kGlobalFull:
      return "global-full";
    case ProtocolKind::kGlobalPartial:
      return "global-partial";
    case ProtocolKind::kSemiglobalFull:
      return "semiglobal-full";
    case ProtocolKind::kSemiglobalPartial:
      return "semiglobal-partial";
  }
  return "unknown";
}

ProtocolKind parse_protocol_kind(std::string_view name) {
  for (ProtocolKind k : {ProtocolKind::kGlobalFull, ProtocolKind::kGlobalPartial,
                         ProtocolKind::kSemiglobalFull, ProtocolKind::kSemiglobalPartial})
    if (to_string(k) == name) return k;
  throw ParameterError("unknown protocol '" + std::string(name) + "'");
}

ProtocolConfig make_protocol(ProtocolKind kind, const AgentModel& model, double epsilon,
                             std::shared_ptr<const PCache> cache) {
  ProtocolConfig config;
  config.kind = kind;
  if (is_global(kind)) {
    config.cache = cache ? std::move(cache) : std::make_shared<const PCache>(model);
  } else {
    config.epsilon = epsilon;
  }
  if (is_partial(kind)) config.observer_gain = design_observer_gain(model).k;
  return config;
}

Matrix coupling_signal(const Matrix& outputs, const Vector& y_r, const Network& net) {
  const Matrix lt = expanded_laplacian(net).matrix.transpose();
  return outputs * lt - y_r * net.iota().transpose();
}

Matrix additional_exchange(const Matrix& xi, const Network& net) {
  return xi * laplacian(net).transpose();
}

ClosedLoop::ClosedLoop(AgentModel model, Network net, ProtocolConfig config)
    : model_(std::move(model)), net_(std::move(net)), config_(std::move(config)) {
  const ProtocolKind kind = config_.kind;
  if (is_global(kind)) {
    if (!config_.cache) throw ParameterError(to_string(kind) + " requires a gain schedule");
    if (config_.cache->fingerprint() != model_fingerprint(model_))
      throw ParameterError("gain schedule was built for a different model");
  } else {
    if (!(config_.epsilon > 0.0 && config_.epsilon <= 1.0))
      throw ParameterError(to_string(kind) + " requires epsilon in (0, 1], got " +
                           std::to_string(config_.epsilon));
    bt_p_ = model_.b().transpose() * solve_lowgain_are(model_, config_.epsilon).p;
  }
  if (is_partial(kind)) {
    const Matrix& k = config_.observer_gain;
    if (k.size() == 0) throw ParameterError(to_string(kind) + " requires an observer gain");
    if (k.rows() != model_.n() || k.cols() != model_.q())
      throw ParameterError("observer gain must be " + std::to_string(model_.n()) + "x" +
                           std::to_string(model_.q()));
    if (!is_hurwitz(model_.a() - k * model_.c())) throw DesignError("A - KC is not Hurwitz");
  }

  layout_.agents = net_.size();
  layout_.n = model_.n();
  layout_.m = model_.m();
  layout_.partial = is_partial(kind);
  laplacian_t_ = laplacian(net_).transpose();
  iota_ = net_.iota();
  expanded_t_ = laplacian_t_;
  expanded_t_.diagonal() += iota_;
}

void ClosedLoop::compute_controls(const Eigen::Ref<const Matrix>& chi, Matrix& u,
                                  Vector* epsilon) const {
  const int agents = layout_.agents;
  u.resize(layout_.m, agents);
  if (is_global(config_.kind)) {
    if (epsilon) epsilon->resize(agents);
    for (int i = 0; i < agents; ++i) {
      const Vector chi_i = chi.col(i);
      const ScheduledGain gain = schedule_gain(chi_i, *config_.cache);
      u.col(i) = -gain.bt_p * chi_i;
      if (epsilon) (*epsilon)[i] = gain.epsilon;
    }
  } else {
    u.noalias() = -bt_p_ * chi;
    if (epsilon) epsilon->resize(0);
  }
}

void ClosedLoop::derivative(const Vector& z, Vector& dz) const {
  const StackedLayout& l = layout_;
  const int agents = l.agents;
  const int n = l.n;
  const Matrix& a = model_.a();
  const Matrix& b = model_.b();
  dz.resize(l.dim());

  Eigen::Map<const Matrix> x(z.data() + l.x(0), n, agents);
  Eigen::Map<const Vector> xr(z.data() + l.xr(), n);
  Eigen::Map<const Matrix> chi(z.data() + l.chi(0), n, agents);
  Eigen::Map<Matrix> dx(dz.data() + l.x(0), n, agents);
  Eigen::Map<Vector> dxr(dz.data() + l.xr(), n);
  Eigen::Map<Matrix> dchi(dz.data() + l.chi(0), n, agents);

  Matrix u;
  compute_controls(chi, u, nullptr);
  Matrix u_sat = u;
  for (Eigen::Index k = 0; k < u_sat.size(); ++k) {
    double& v = u_sat.data()[k];
    v = v > 1.0 ? 1.0 : (v < -1.0 ? -1.0 : v);
  }

  dx.noalias() = a * x;
  dx.noalias() += b * u_sat;
  dxr.noalias() = a * xr;

  dchi.noalias() = a * chi;
  dchi.noalias() += b * u;
  dchi.noalias() -= chi * expanded_t_;  // zeta_hat_1 + iota_i chi_i

  if (!l.partial) {
    dchi.noalias() += x * expanded_t_;
    dchi.noalias() -= xr * iota_.transpose();
    return;
  }

  const Matrix& c = model_.c();
  const Matrix& k = config_.observer_gain;
  Eigen::Map<const Matrix> xhat(z.data() + l.xhat(0), n, agents);
  Eigen::Map<Matrix> dxhat(dz.data() + l.xhat(0), n, agents);
  dchi += xhat;

  Matrix zeta_bar = (c * x) * expanded_t_;
  zeta_bar.noalias() -= (c * xr) * iota_.transpose();
  zeta_bar.noalias() -= c * xhat;
  dxhat.noalias() = a * xhat;
  dxhat.noalias() += b * (u * laplacian_t_ + u * iota_.asDiagonal());
  dxhat.noalias() += k * zeta_bar;
}

ControlSample ClosedLoop::controls(const Vector& z) const {
  ControlSample sample;
  Eigen::Map<const Matrix> chi(z.data() + layout_.chi(0), layout_.n, layout_.agents);
  compute_controls(chi, sample.u, &sample.epsilon);
  return sample;
}

Vector ClosedLoop::initial_state(const Matrix& x0, const Vector& xr0, const Matrix& chi0,
                                 const Matrix& xhat0) const {
  const StackedLayout& l = layout_;
  auto check = [&](const Matrix& m, const char* name, bool allow_empty) {
    if (allow_empty && m.size() == 0) return;
    if (m.rows() != l.n || m.cols() != l.agents)
      throw ValidationError(name, "expected " + std::to_string(l.n) + "x" +
                                      std::to_string(l.agents) + " (one column per agent)");
  };
  check(x0, "x0", false);
  check(chi0, "chi0", true);
  check(xhat0, "xhat0", true);
  if (xr0.size() != l.n) throw ValidationError("xr0", "expected " + std::to_string(l.n) + " entries");
  if (!l.partial && xhat0.size() != 0)
    throw ValidationError("xhat0", "full-state protocols carry no observer state");

  Vector z = Vector::Zero(l.dim());
  Eigen::Map<Matrix>(z.data() + l.x(0), l.n, l.agents) = x0;
  z.segment(l.xr(), l.n) = xr0;
  if (chi0.size() != 0) Eigen::Map<Matrix>(z.data() + l.chi(0), l.n, l.agents) = chi0;
  if (xhat0.size() != 0) Eigen::Map<Matrix>(z.data() + l.xhat(0), l.n, l.agents) = xhat0;
  return z;
}

}  // namespace satsync
