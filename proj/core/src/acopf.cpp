#include <cmath>
#include <limits>
#include <stdexcept>

#include "sobolev/problems.hpp"

namespace sobolev {

AcOpf3Bus AcOpf3Bus::standard() {
  using C = std::complex<double>;
  AcOpf3Bus data;
  // Series impedances r + jx (p.u.); line charging split evenly between ends.
  data.branches[0] = {0, 1, 1.0 / C(0.010, 0.10), C(0.0, 0.010), 2.0};
  data.branches[1] = {0, 2, 1.0 / C(0.020, 0.15), C(0.0, 0.015), 2.0};
  data.branches[2] = {1, 2, 1.0 / C(0.015, 0.12), C(0.0, 0.012), 2.0};
  // Slack generator is cheaper but more curved than the PV-bus unit.
  data.generators[0] = {0, 0.0, 2.0, -1.0, 1.0, 1.0, 10.0};
  data.generators[1] = {1, 0.0, 1.5, -1.0, 1.0, 2.0, 11.0};
  data.vmin = {0.95, 0.95, 0.95};
  data.vmax = {1.05, 1.05, 1.05};
  data.pd_ref = {0.20, 0.30, 0.90};
  data.qd_ref = {0.05, 0.10, 0.30};
  data.demand_box = 0.2;
  data.slack = 0;
  return data;
}

namespace {

constexpr int kVars = 2 * AcOpf3Bus::kBuses + 2 * AcOpf3Bus::kGenerators;
constexpr int kParams = 2 * AcOpf3Bus::kBuses;

Eigen::VectorXd var_lower(const AcOpf3Bus& data) {
  Eigen::VectorXd lo(kVars);
  const double inf = std::numeric_limits<double>::infinity();
  for (int i = 0; i < AcOpf3Bus::kBuses; ++i) {
    lo[AcOpf::vm_index(i)] = data.vmin[static_cast<std::size_t>(i)];
    lo[AcOpf::va_index(i)] = -inf;
  }
  for (int g = 0; g < AcOpf3Bus::kGenerators; ++g) {
    lo[AcOpf::pg_index(g)] = data.generators[static_cast<std::size_t>(g)].pmin;
    lo[AcOpf::qg_index(g)] = data.generators[static_cast<std::size_t>(g)].qmin;
  }
  return lo;
}

Eigen::VectorXd var_upper(const AcOpf3Bus& data) {
  Eigen::VectorXd hi(kVars);
  const double inf = std::numeric_limits<double>::infinity();
  for (int i = 0; i < AcOpf3Bus::kBuses; ++i) {
    hi[AcOpf::vm_index(i)] = data.vmax[static_cast<std::size_t>(i)];
    hi[AcOpf::va_index(i)] = inf;
  }
  for (int g = 0; g < AcOpf3Bus::kGenerators; ++g) {
    hi[AcOpf::pg_index(g)] = data.generators[static_cast<std::size_t>(g)].pmax;
    hi[AcOpf::qg_index(g)] = data.generators[static_cast<std::size_t>(g)].qmax;
  }
  return hi;
}

Eigen::VectorXd reference(const AcOpf3Bus& data) {
  Eigen::VectorXd p(kParams);
  for (int i = 0; i < AcOpf3Bus::kBuses; ++i) {
    p[i] = data.pd_ref[static_cast<std::size_t>(i)];
    p[AcOpf3Bus::kBuses + i] = data.qd_ref[static_cast<std::size_t>(i)];
  }
  return p;
}

Eigen::VectorXd demand_bound(const AcOpf3Bus& data, double sign) {
  const Eigen::VectorXd ref = reference(data);
  return ref + sign * data.demand_box * ref.cwiseAbs();
}

void validate(const AcOpf3Bus& data) {
  for (const AcBranch& br : data.branches) {
    if (br.from == br.to || br.from < 0 || br.to < 0 || br.from >= AcOpf3Bus::kBuses ||
        br.to >= AcOpf3Bus::kBuses)
      throw std::invalid_argument("acopf3: branch endpoints out of range");
    if (!(br.rate > 0.0)) throw std::invalid_argument("acopf3: branch rate must be positive");
  }
  // Three distinct branches on three buses form a connected triangle.
  for (int a = 0; a < AcOpf3Bus::kBranches; ++a)
    for (int b = a + 1; b < AcOpf3Bus::kBranches; ++b) {
      const AcBranch& x = data.branches[static_cast<std::size_t>(a)];
      const AcBranch& y = data.branches[static_cast<std::size_t>(b)];
      if ((x.from == y.from && x.to == y.to) || (x.from == y.to && x.to == y.from))
        throw std::invalid_argument("acopf3: parallel branches leave the network disconnected");
    }
  for (double r : data.pd_ref)
    if (r == 0.0) throw std::invalid_argument("acopf3: reference demands must be nonzero");
  for (double r : data.qd_ref)
    if (r == 0.0) throw std::invalid_argument("acopf3: reference demands must be nonzero");
}

}  // namespace

AcOpf::AcOpf(AcOpf3Bus data)
    : ProblemModel<AcOpf>(kVars, kParams, 1 + 2 * AcOpf3Bus::kBuses, 2 * AcOpf3Bus::kBranches,
                          var_lower(data), var_upper(data), demand_bound(data, -1.0),
                          demand_bound(data, 1.0)),
      data_(std::move(data)) {
  validate(data_);
}

Eigen::VectorXd AcOpf::reference_parameter() const { return reference(data_); }

std::vector<BranchFlow> acopf_flows(const AcOpf3Bus& data, const Eigen::VectorXd& vm,
                                    const Eigen::VectorXd& va) {
  if (vm.size() != AcOpf3Bus::kBuses || va.size() != AcOpf3Bus::kBuses)
    throw std::invalid_argument("acopf_flows: expected one magnitude and angle per bus");
  for (Eigen::Index i = 0; i < vm.size(); ++i)
    if (!(vm[i] > 0.0)) throw std::invalid_argument("acopf_flows: voltage magnitudes must be positive");
  std::vector<BranchFlow> flows;
  flows.reserve(data.branches.size());
  for (const AcBranch& br : data.branches) {
    const auto f = branch_flow<double>(br, vm[br.from], vm[br.to], va[br.from], va[br.to]);
    flows.push_back({{f[0], f[1]}, {f[2], f[3]}});
  }
  return flows;
}

}  // namespace sobolev
