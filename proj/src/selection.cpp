#include "satsync/selection.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

namespace satsync {

namespace {

constexpr int kMaxVertexDim = 8;  // 2^8 = 256 vertices
constexpr int kHadamardRows = 256;

// Entry (r, c) of the Sylvester-Hadamard matrix: (-1)^popcount(r & c).
double hadamard_sign(unsigned r, unsigned c) { return (std::popcount(r & c) & 1) ? -1.0 : 1.0; }

void validate_options(const SelectionOptions& o) {
  if (!(o.epsilon0 > 0.0 && o.epsilon0 <= 1.0)) throw ParameterError("epsilon0 must lie in (0, 1]");
  if (!(o.ratio > 0.0 && o.ratio < 1.0)) throw ParameterError("ratio must lie in (0, 1)");
  if (!(o.floor > 0.0)) throw ParameterError("floor must be positive");
  if (!(o.margin >= 0.0 && o.margin < 1.0)) throw ParameterError("margin must lie in [0, 1)");
  if (!(o.t_validation > 0.0)) throw ParameterError("validation horizon must be positive");
  if (!(o.tolerance > 0.0)) throw ParameterError("tolerance must be positive");
  if (o.recheck_stride < 1) throw ParameterError("recheck stride must be at least 1");
}

}  // namespace

namespace {

Vector box_widths(const StackedLayout& layout, const CompactSetSpec& sets) {
  if (!(sets.agents >= 0.0) || !(sets.exosystem >= 0.0) || !(sets.protocol >= 0.0))
    throw ValidationError("sets", "half-widths must be nonnegative");
  Vector widths = Vector::Zero(layout.dim());
  widths.head(layout.agents * layout.n).setConstant(sets.agents);
  widths.segment(layout.xr(), layout.n).setConstant(sets.exosystem);
  widths.tail(layout.dim() - layout.chi(0)).setConstant(sets.protocol);
  return widths;
}

}  // namespace

int box_dimension(const StackedLayout& layout, const CompactSetSpec& sets) {
  return static_cast<int>((box_widths(layout, sets).array() > 0.0).count());
}

std::vector<Vector> vertex_samples(const StackedLayout& layout, const CompactSetSpec& sets) {
  const Vector widths = box_widths(layout, sets);
  std::vector<int> active;
  for (int k = 0; k < widths.size(); ++k)
    if (widths[k] > 0.0) active.push_back(k);
  const auto dim = static_cast<unsigned>(active.size());

  std::vector<Vector> samples;
  auto vertex = [&](auto sign_of) {
    Vector z = Vector::Zero(layout.dim());
    for (unsigned j = 0; j < dim; ++j) z[active[j]] = sign_of(j) * widths[active[j]];
    return z;
  };
  if (dim <= kMaxVertexDim) {
    for (unsigned mask = 0; mask < (1u << dim); ++mask)
      samples.push_back(vertex([mask](unsigned j) { return (mask >> j) & 1u ? 1.0 : -1.0; }));
    return samples;
  }
  // Column 0 of a Hadamard matrix is constant and is skipped. Columns 1, 2, 4,
  // ..., 128 come first so the 256 sampled rows stay pairwise distinct.
  std::vector<unsigned> columns;
  for (unsigned bit = 1; bit < kHadamardRows; bit <<= 1) columns.push_back(bit);
  for (unsigned c = 3; columns.size() < dim; ++c)
    if (!std::has_single_bit(c)) columns.push_back(c);
  for (unsigned r = 0; r < kHadamardRows; ++r)
    samples.push_back(vertex([&, r](unsigned j) { return hadamard_sign(r, columns[j]); }));
  samples.push_back(Vector::Zero(layout.dim()));
  return samples;
}

CandidateRecord validate_candidate(const AgentModel& model, const Network& net, ProtocolKind kind,
                                   double epsilon, const std::vector<Vector>& samples,
                                   const SelectionOptions& options, double horizon,
                                   bool check_sync) {
  CandidateRecord record;
  record.epsilon = epsilon;
  ProtocolConfig config = make_protocol(kind, model, epsilon);
  const ClosedLoop loop(model, net, std::move(config));
  IntegratorOptions integrator = options.integrator;
  integrator.t_final = integrator.t0 + horizon;
  const std::vector<SampleOutcome> outcomes =
      simulate_batch(loop, samples, integrator, options.execution);
  const double limit = 1.0 - options.margin;
  for (const SampleOutcome& out : outcomes) {
    if (out.failed) {
      if (record.failures++ == 0) record.first_failure = out.failure;
      continue;
    }
    record.max_control_inf_norm = std::max(record.max_control_inf_norm, out.max_control_inf_norm);
    record.max_final_sync_error = std::max(record.max_final_sync_error, out.final_sync_error);
    if (out.max_control_inf_norm > limit) ++record.saturation_violations;
    if (check_sync && !(out.final_sync_error < options.tolerance)) ++record.sync_violations;
  }
  record.passed =
      record.failures == 0 && record.saturation_violations == 0 && record.sync_violations == 0;
  return record;
}

SelectionReport select_semiglobal_epsilon(const AgentModel& model, const Network& net,
                                          const CompactSetSpec& sets, ProtocolKind kind,
                                          const SelectionOptions& options) {
  validate_options(options);
  if (is_global(kind)) throw ParameterError("epsilon selection applies to semi-global protocols");
  if (!check_assumption(model).pass)
    throw ValidationError("model", "agent model violates the structural assumption");
  if (!in_rooted_family(net))
    throw ValidationError("network", check_rooted_family(net).diagnostic);

  StackedLayout layout;
  layout.agents = net.size();
  layout.n = model.n();
  layout.m = model.m();
  layout.partial = is_partial(kind);
  const std::vector<Vector> samples = vertex_samples(layout, sets);

  SelectionReport report;
  report.kind = kind;
  report.sample_count = static_cast<int>(samples.size());
  report.all_vertices = box_dimension(layout, sets) <= kMaxVertexDim;

  std::vector<double> grid;
  for (double eps = options.epsilon0; eps >= options.floor; eps *= options.ratio)
    grid.push_back(eps);

  std::size_t selected = grid.size();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    report.tried.push_back(
        validate_candidate(model, net, kind, grid[k], samples, options, options.t_validation));
    if (report.tried.back().passed) {
      selected = k;
      break;
    }
  }
  if (selected == grid.size()) {
    // Closest candidate: fewest violations, then smallest control peak.
    const auto best = std::min_element(
        report.tried.begin(), report.tried.end(), [](const CandidateRecord& a, const CandidateRecord& b) {
          const int va = a.failures + a.saturation_violations + a.sync_violations;
          const int vb = b.failures + b.saturation_violations + b.sync_violations;
          if (va != vb) return va < vb;
          return a.max_control_inf_norm < b.max_control_inf_norm;
        });
    std::ostringstream what;
    what << "no epsilon down to " << options.floor
         << " passed validation; closest candidate " << best->epsilon;
    throw SelectionError(what.str(), *best, report.tried);
  }
  report.epsilon_star = grid[selected];

  std::vector<Vector> subsample;
  for (std::size_t s = 0; s < samples.size(); s += static_cast<std::size_t>(options.recheck_stride))
    subsample.push_back(samples[s]);
  for (std::size_t k = selected + 1; k < grid.size(); ++k) {
    report.recheck.push_back(validate_candidate(model, net, kind, grid[k], subsample, options,
                                                options.t_validation, false));
    report.recheck_passed = report.recheck_passed && report.recheck.back().passed;
  }
  return report;
}

}  // namespace satsync
