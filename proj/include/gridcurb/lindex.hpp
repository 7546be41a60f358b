#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <vector>

#include "gridcurb/admittance.hpp"
#include "gridcurb/powerflow.hpp"

namespace gridcurb {

/// Per-load-bus L voltage-stability indices.
///
/// With the bus admittance matrix split into load (L) and generator (G) blocks,
/// F = -(Y_LL)^-1 Y_LG and, for each load bus j,
///
///   L_j = | 1 - sum_{i in G} F_ji V_i / V_j |.
///
/// L_j is 0 at no load and approaches 1 at the steady-state voltage collapse
/// point.
struct StabilityReport {
    std::vector<int> load_bus_ids;
    std::vector<int> generator_bus_ids;
    Eigen::MatrixXcd participation;  // F, #load x #generator
    std::vector<Complex> l_complex;  // 1 - (F V_G)_j / V_j
    std::vector<double> l_index;     // |l_complex|
    std::vector<double> vm;          // load bus voltage magnitude, pu
    std::vector<double> va;          // load bus voltage angle, rad

    std::optional<double> index_at(int bus_id) const;
    double max_index() const;
};

class SingularMatrixError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// F = -(Y_LL)^-1 Y_LG by sparse LU. Throws SingularMatrixError.
Eigen::MatrixXcd participation_matrix(const PartitionedY& partitioned);

StabilityReport compute_l_index(const PartitionedY& partitioned, const PowerFlowSolution& solution);

/// Voltages in the YBus ordering of `partitioned`'s source (ascending bus id).
StabilityReport compute_l_index(const PartitionedY& partitioned, const std::vector<int>& bus_ids,
                                const std::vector<Complex>& voltages);

/// L_crit thresholds per load bus, with an optional value for unlisted buses.
struct LcritMap {
    std::map<int, double> per_bus;
    std::optional<double> default_value;

    std::optional<double> at(int bus_id) const;
    friend bool operator==(const LcritMap&, const LcritMap&) = default;
};

struct MarginViolation {
    int bus = 0;
    double l_index = 0.0;
    double l_crit = 0.0;
    double excess() const { return l_index - l_crit; }
};

std::vector<MarginViolation> check_margin(const StabilityReport& report, const LcritMap& lcrit);

}  // namespace gridcurb
