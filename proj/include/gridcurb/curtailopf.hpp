#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridcurb/admittance.hpp"
#include "gridcurb/ipm.hpp"
#include "gridcurb/lindex.hpp"
#include "gridcurb/network.hpp"

namespace gridcurb {

struct OpfOptions {
    double feasibility_tolerance = 1e-6;
    double optimality_tolerance = 1e-6;
    double complementarity_tolerance = 1e-9;
    double cost_tolerance = 1e-6;
    int max_iterations = 150;
    double centering = 0.1;
    double step_to_boundary = 0.99995;
    HessianMethod hessian = HessianMethod::FiniteDifference;
    /// Starts tried when the network carries devices; each draws fresh phi_t
    /// values from the seeded generator. Device-free problems use one start.
    int multistarts = 3;
    std::uint64_t seed = 1;
    /// Generator-bus magnitudes stay at their setpoints, as for PV buses.
    bool hold_generator_voltage = true;
    /// Weight of sum(v_t^2 + i_q^2) added to the objective. Picks the least
    /// device effort among equal-curtailment optima.
    double control_effort_weight = 1e-5;
    /// Tolerance on a constraint's slack for it to be reported as binding.
    double binding_tolerance = 1e-5;

    IpmOptions ipm() const;
};

enum class OpfStatus {
    Optimal,
    /// No feasible point found; the network may still be feasible.
    Infeasible,
    /// Constraints remain violated with every curtailable load fully shed.
    InfeasibleAtFullCurtailment,
    NotConverged,
};

std::string to_string(OpfStatus status);

struct LoadOutcome {
    int bus = 0;
    double p_req = 0.0;
    double q_req = 0.0;
    double served_fraction = 1.0;

    double p_served() const { return served_fraction * p_req; }
    double q_served() const { return served_fraction * q_req; }
    double p_curtailed() const { return p_req - p_served(); }
    double q_curtailed() const { return q_req - q_served(); }
};

struct GeneratorOutcome {
    int bus = 0;
    double p = 0.0;
    double q = 0.0;
};

struct DeviceOutcome {
    FactsDevice device;  // controls hold the optimized values
    Injections injections;
};

enum class ConstraintKind { Balance, Thermal, StabilityIndex, DeviceLimit, Bound };

std::string to_string(ConstraintKind kind);

/// One constraint side, reported as value <= limit (or value >= limit for
/// lower sides).
struct ConstraintActivity {
    ConstraintKind kind = ConstraintKind::Bound;
    std::string name;
    double value = 0.0;
    double limit = 0.0;
    bool upper = true;
    double multiplier = 0.0;
    bool binding = false;

    double slack() const { return upper ? limit - value : value - limit; }
};

struct CurtailmentResult {
    OpfStatus status = OpfStatus::NotConverged;
    double total_curtailment = 0.0;  // sum of curtailed real load, pu
    std::vector<LoadOutcome> loads;
    std::vector<GeneratorOutcome> generators;
    std::vector<DeviceOutcome> devices;
    std::vector<int> bus_ids;
    std::vector<double> vm;
    std::vector<double> va;  // rad
    StabilityReport stability;
    std::vector<ConstraintActivity> constraints;
    double max_violation = 0.0;
    int iterations = 0;
    int starts = 0;
    int chosen_start = -1;
    std::vector<IpmIteration> log;
    std::string message;

    bool optimal() const { return status == OpfStatus::Optimal; }
    double curtailment_at(int bus) const;
    double vm_at(int bus) const;
    std::vector<Complex> voltages() const;
    std::vector<const ConstraintActivity*> binding() const;
};

/// The curtailment NLP. Variables, in order: angles of non-slack buses,
/// magnitudes of free buses, generator P, generator Q, served fraction of
/// each curtailable load, then per device v_t and phi_t (series devices) and
/// i_q (shunt devices). Controls with coinciding bounds are held constant.
///
/// Served load is s_k (P_req, Q_req), so the power factor is fixed. Equalities
/// are the P and Q balances at every bus including device injections.
/// Inequalities (scaled so that the Jacobian rows are O(1)):
///   thermal at both ends   (|S|^2 - S_max^2) / (2 S_max)
///   stability index        (|L|^2 - L_crit^2) / (2 L_crit)
///   device injections      p_inj, q_inj1, q_inj2 against their intervals
class CurtailmentProblem final : public NlpProblem {
public:
    CurtailmentProblem(const Network& network, const LcritMap& lcrit, const OpfOptions& options = {});

    Eigen::Index num_variables() const override { return n_; }
    double objective(const Eigen::VectorXd& x) const override;
    Eigen::VectorXd objective_gradient(const Eigen::VectorXd& x) const override;
    Eigen::VectorXd equalities(const Eigen::VectorXd& x) const override;
    Eigen::MatrixXd equality_jacobian(const Eigen::VectorXd& x) const override;
    Eigen::VectorXd inequalities(const Eigen::VectorXd& x) const override;
    Eigen::MatrixXd inequality_jacobian(const Eigen::VectorXd& x) const override;
    Eigen::VectorXd lower_bounds() const override;
    Eigen::VectorXd upper_bounds() const override;

    /// Curtailment part of the objective only.
    double curtailment(const Eigen::VectorXd& x) const;

    std::vector<Complex> voltages(const Eigen::VectorXd& x) const;
    std::vector<FactsDevice> devices(const Eigen::VectorXd& x) const;
    /// Packs a state: bus voltages (ascending id), generator outputs, served
    /// fractions and device controls.
    Eigen::VectorXd pack(const std::vector<Complex>& v, const std::vector<Complex>& generation,
                         const std::vector<double>& served, const std::vector<DeviceControls>& controls) const;

    const Network& network() const { return network_; }
    const YBus& ybus() const { return ybus_; }
    const std::vector<std::size_t>& curtailable_loads() const { return curtailable_; }
    /// Human-readable name and kind of each inequality row.
    const std::vector<std::pair<ConstraintKind, std::string>>& inequality_names() const { return ineq_names_; }
    std::string variable_name(Eigen::Index k) const;

    CurtailmentResult decode(const IpmResult& sol) const;

private:
    struct DeviceSlot {
        std::size_t device = 0;
        Eigen::Index i = 0, j = 0;
        Complex y;
        Eigen::Index vt = -1, phi = -1, iq = -1;
        DeviceControls fixed;  // values of controls without a variable
    };
    struct ThermalRow {
        std::size_t branch = 0;
        Eigen::Index f = 0, t = 0;
        Complex yff, yft;
        double s_max = 0.0;
    };
    struct IndexRow {
        Eigen::Index load_pos = 0;  // row in the stability report
        Eigen::Index bus = 0;
        double l_crit = 0.0;
    };
    struct DeviceLimitRow {
        std::size_t slot = 0;
        int component = 0;  // 0 p_inj, 1 q_inj1, 2 q_inj2
        bool upper = true;
        double limit = 0.0;
    };

    FactsDevice device_with_controls(const DeviceSlot& slot, const Eigen::VectorXd& x) const;

    Network network_;
    LcritMap lcrit_;
    OpfOptions options_;
    YBus ybus_;
    Eigen::MatrixXcd y_;
    PartitionedY partitioned_;
    Eigen::MatrixXcd f_matrix_;
    std::vector<Eigen::Index> gen_pos_;  // YBus index of each generator-side bus in F column order
    std::vector<Eigen::Index> load_pos_;

    Eigen::Index nb_ = 0;
    std::size_t slack_ = 0;
    std::vector<Eigen::Index> va_var_;  // per bus, -1 when fixed
    std::vector<Eigen::Index> vm_var_;
    std::vector<double> vm_fixed_;
    Eigen::Index pg0_ = 0, qg0_ = 0, s0_ = 0;
    std::vector<std::size_t> curtailable_;
    std::vector<DeviceSlot> slots_;
    std::vector<ThermalRow> thermal_;
    std::vector<IndexRow> index_rows_;
    std::vector<DeviceLimitRow> device_rows_;
    std::vector<std::pair<ConstraintKind, std::string>> ineq_names_;
    Eigen::Index n_ = 0;
    std::vector<Complex> fixed_injection_;  // non-curtailable loads, per bus
};

CurtailmentResult solve_curtailment(const Network& network, const LcritMap& lcrit, const OpfOptions& options = {});

/// solve_curtailment on apply_outage(network, outage). Throws IslandingError
/// and UnknownBranchError.
CurtailmentResult solve_contingency_curtailment(const Network& network, BranchRef outage, const LcritMap& lcrit,
                                                const OpfOptions& options = {});

/// Per-constraint table of values, limits and multipliers; binding stability
/// index rows are flagged as the cause of curtailment.
std::string kkt_report(const CurtailmentResult& result);

}  // namespace gridcurb
