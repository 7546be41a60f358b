#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gridcurb/admittance.hpp"
#include "gridcurb/network.hpp"

namespace gridcurb {

struct PowerFlowOptions {
    double tolerance = 1e-8;  // infinity norm of the mismatch, pu
    int max_iterations = 30;
    int max_step_halvings = 4;
    /// Bus voltages in ascending bus-id order; flat start when empty.
    std::vector<Complex> warm_start;
};

enum class PowerFlowStatus { Converged, Diverged, SingularJacobian };

std::string to_string(PowerFlowStatus status);

struct BranchFlow {
    int from_bus = 0;
    int to_bus = 0;
    bool in_service = true;
    Complex s_from;  // leaving from_bus into the branch
    Complex s_to;    // leaving to_bus into the branch

    double p_from() const { return s_from.real(); }
    double q_from() const { return s_from.imag(); }
    double apparent_from() const { return std::abs(s_from); }
    double p_to() const { return s_to.real(); }
    double q_to() const { return s_to.imag(); }
    double apparent_to() const { return std::abs(s_to); }
    Complex losses() const { return s_from + s_to; }
};

struct PowerFlowSolution {
    PowerFlowStatus status = PowerFlowStatus::Diverged;
    std::vector<int> bus_ids;  // ascending
    std::vector<double> vm;    // pu
    std::vector<double> va;    // rad
    /// Net generation per bus (zero at PQ buses). Slack carries P and Q, PV buses Q.
    std::vector<Complex> generation;
    std::vector<BranchFlow> flows;
    int iterations = 0;
    double mismatch = 0.0;
    /// Mismatch infinity norm at every accepted iterate, starting with the initial point.
    std::vector<double> mismatch_history;

    bool converged() const { return status == PowerFlowStatus::Converged; }
    std::size_t index_of(int bus_id) const;
    Complex voltage(int bus_id) const;
    double vm_at(int bus_id) const { return vm[index_of(bus_id)]; }
    double va_deg_at(int bus_id) const;
    Complex slack_injection(const Network& network) const;
    std::vector<Complex> voltages() const;
    const BranchFlow* flow(BranchRef ref) const;
    /// Flow leaving `from` toward `to`, orientation-aware.
    Complex flow_from(int from, int to) const;
};

/// Mismatch equations and Jacobian in polar form. State x stacks angles of
/// every non-slack bus followed by magnitudes of every PQ bus.
class PowerFlowProblem {
public:
    explicit PowerFlowProblem(const Network& network);

    Eigen::Index size() const { return static_cast<Eigen::Index>(angle_rows_.size() + vm_rows_.size()); }

    /// Voltages for a state vector; fixed magnitudes/angles come from `base`.
    std::vector<Complex> voltages(const Eigen::VectorXd& x, const std::vector<Complex>& base) const;
    Eigen::VectorXd state(const std::vector<Complex>& v) const;
    std::vector<Complex> flat_start() const;

    /// Calculated minus specified injections (including device injections):
    /// P rows for non-slack buses, then Q rows for PQ buses.
    Eigen::VectorXd mismatch(const std::vector<Complex>& v) const;
    Eigen::MatrixXd jacobian(const std::vector<Complex>& v) const;

    /// Net complex injection S = V conj(Y V) at every bus.
    std::vector<Complex> calculated_injections(const std::vector<Complex>& v) const;
    /// Scheduled generation minus load plus device injections, per bus.
    std::vector<Complex> scheduled_injections(const std::vector<Complex>& v) const;
    std::vector<Complex> device_injections(const std::vector<Complex>& v) const;

    const YBus& ybus() const { return ybus_; }
    const Network& network() const { return network_; }

private:
    Network network_;
    YBus ybus_;
    Eigen::MatrixXcd y_;
    std::size_t slack_ = 0;
    std::vector<std::size_t> angle_rows_;  // bus positions with an angle unknown
    std::vector<std::size_t> vm_rows_;     // bus positions with a magnitude unknown
    std::vector<Complex> scheduled_;       // generation setpoints minus loads
};

PowerFlowSolution solve_power_flow(const Network& network, const PowerFlowOptions& options = {});

/// Flows at both ends of every branch from the solution's terminal phasors.
std::vector<BranchFlow> branch_flows(const PowerFlowSolution& solution, const Network& network);

/// Largest |scheduled + device - calculated| complex residual over all buses,
/// with generator outputs taken from the solution.
double kcl_residual(const PowerFlowSolution& solution, const Network& network);

}  // namespace gridcurb
