#include "gridcurb/lindex.hpp"

#include <Eigen/SparseLU>
#include <algorithm>

namespace gridcurb {

std::optional<double> StabilityReport::index_at(int bus_id) const {
    for (std::size_t k = 0; k < load_bus_ids.size(); ++k)
        if (load_bus_ids[k] == bus_id) return l_index[k];
    return std::nullopt;
}

double StabilityReport::max_index() const {
    return l_index.empty() ? 0.0 : *std::max_element(l_index.begin(), l_index.end());
}

Eigen::MatrixXcd participation_matrix(const PartitionedY& partitioned) {
    Eigen::SparseLU<SparseComplex> lu;
    lu.compute(partitioned.y_ll);
    if (lu.info() != Eigen::Success) throw SingularMatrixError("Y_LL is singular");
    const Eigen::MatrixXcd rhs = Eigen::MatrixXcd(partitioned.y_lg);
    Eigen::MatrixXcd f = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !f.allFinite()) throw SingularMatrixError("Y_LL is singular");
    return -f;
}

StabilityReport compute_l_index(const PartitionedY& partitioned, const std::vector<int>& bus_ids,
                                const std::vector<Complex>& voltages) {
    StabilityReport rep;
    rep.load_bus_ids = partitioned.load_bus_ids;
    rep.generator_bus_ids = partitioned.generator_bus_ids;
    rep.participation = participation_matrix(partitioned);

    auto volt = [&](int id) {
        const auto it = std::lower_bound(bus_ids.begin(), bus_ids.end(), id);
        if (it == bus_ids.end() || *it != id)
            throw NetworkError("bus " + std::to_string(id) + " missing from voltages");
        return voltages[static_cast<std::size_t>(it - bus_ids.begin())];
    };

    Eigen::VectorXcd vg(static_cast<Eigen::Index>(rep.generator_bus_ids.size()));
    for (std::size_t i = 0; i < rep.generator_bus_ids.size(); ++i)
        vg[static_cast<Eigen::Index>(i)] = volt(rep.generator_bus_ids[i]);
    const Eigen::VectorXcd equivalent = rep.participation * vg;

    for (std::size_t j = 0; j < rep.load_bus_ids.size(); ++j) {
        const Complex vj = volt(rep.load_bus_ids[j]);
        const Complex l = 1.0 - equivalent[static_cast<Eigen::Index>(j)] / vj;
        rep.l_complex.push_back(l);
        rep.l_index.push_back(std::abs(l));
        rep.vm.push_back(std::abs(vj));
        rep.va.push_back(std::arg(vj));
    }
    return rep;
}

StabilityReport compute_l_index(const PartitionedY& partitioned, const PowerFlowSolution& solution) {
    return compute_l_index(partitioned, solution.bus_ids, solution.voltages());
}

std::optional<double> LcritMap::at(int bus_id) const {
    const auto it = per_bus.find(bus_id);
    if (it != per_bus.end()) return it->second;
    return default_value;
}

std::vector<MarginViolation> check_margin(const StabilityReport& report, const LcritMap& lcrit) {
    std::vector<MarginViolation> out;
    for (std::size_t j = 0; j < report.load_bus_ids.size(); ++j) {
        const int bus = report.load_bus_ids[j];
        const auto limit = lcrit.at(bus);
        if (limit && report.l_index[j] > *limit) out.push_back({bus, report.l_index[j], *limit});
    }
    return out;
}

}  // namespace gridcurb
