#pragma once

// Independent reconstructions used to check solver output.

#include <algorithm>

#include "gridcurb/curtailopf.hpp"
#include "gridcurb/powerflow.hpp"

namespace testing {

/// Network with each load scaled to its served fraction and each device set
/// to its optimized controls.
inline gridcurb::Network served_network(const gridcurb::Network& net, const gridcurb::CurtailmentResult& r) {
    gridcurb::Network served = net;
    served.loads.clear();
    for (const auto& l : net.loads) {
        const auto it = std::find_if(r.loads.begin(), r.loads.end(), [&](const auto& o) { return o.bus == l.bus; });
        const double s = it == r.loads.end() ? 1.0 : it->served_fraction;
        if (s > 0.0) served.loads.push_back({l.bus, s * l.p_req, s * l.q_req});
    }
    served.facts_devices.clear();
    for (const auto& d : r.devices) served.facts_devices.push_back(d.device);
    return served;
}

/// OPF operating point expressed as a power flow solution.
inline gridcurb::PowerFlowSolution as_power_flow(const gridcurb::CurtailmentResult& r) {
    gridcurb::PowerFlowSolution sol;
    sol.status = gridcurb::PowerFlowStatus::Converged;
    sol.bus_ids = r.bus_ids;
    sol.vm = r.vm;
    sol.va = r.va;
    sol.generation.assign(r.bus_ids.size(), gridcurb::Complex{});
    for (const auto& g : r.generators) sol.generation[sol.index_of(g.bus)] += gridcurb::Complex(g.p, g.q);
    return sol;
}

inline double opf_kcl_residual(const gridcurb::Network& net, const gridcurb::CurtailmentResult& r) {
    return gridcurb::kcl_residual(as_power_flow(r), served_network(net, r));
}

/// Largest amount by which a served load departs from its requested q/p ratio.
inline double power_factor_error(const gridcurb::CurtailmentResult& r) {
    double worst = 0.0;
    for (const auto& l : r.loads)
        if (l.p_served() > 1e-9) worst = std::max(worst, std::abs(l.q_served() / l.p_served() - l.q_req / l.p_req));
    return worst;
}

/// Largest L_j - L_crit_j with the indices rebuilt from a fresh factorization.
inline double margin_excess(const gridcurb::Network& net, const gridcurb::LcritMap& lcrit,
                            const gridcurb::CurtailmentResult& r) {
    using namespace gridcurb;
    const auto rep = compute_l_index(partition(build_ybus(net), net), r.bus_ids, r.voltages());
    double worst = -1.0;
    for (std::size_t j = 0; j < rep.load_bus_ids.size(); ++j)
        if (const auto lc = lcrit.at(rep.load_bus_ids[j])) worst = std::max(worst, rep.l_index[j] - *lc);
    return worst;
}

/// Worst relative gap between the analytic derivatives of `p` and central
/// differences at x.
inline double derivative_error(const gridcurb::NlpProblem& p, const Eigen::VectorXd& x, double h = 1e-6) {
    auto rel = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
        double worst = 0.0;
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index j = 0; j < a.cols(); ++j)
                worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / std::max(1.0, std::abs(b(i, j))));
        return worst;
    };
    const Eigen::Index n = x.size();
    Eigen::VectorXd grad(n);
    Eigen::MatrixXd jh(p.equalities(x).size(), n), jg(p.inequalities(x).size(), n);
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::VectorXd up = x, dn = x;
        up[k] += h;
        dn[k] -= h;
        grad[k] = (p.objective(up) - p.objective(dn)) / (2 * h);
        jh.col(k) = (p.equalities(up) - p.equalities(dn)) / (2 * h);
        jg.col(k) = (p.inequalities(up) - p.inequalities(dn)) / (2 * h);
    }
    return std::max({rel(p.objective_gradient(x), grad), rel(p.equality_jacobian(x), jh),
                     rel(p.inequality_jacobian(x), jg)});
}

}  // namespace testing
