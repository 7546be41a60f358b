#include "gridcurb/powerflow.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "bus_injections.hpp"

namespace gridcurb {

std::string to_string(PowerFlowStatus status) {
    switch (status) {
    case PowerFlowStatus::Converged: return "converged";
    case PowerFlowStatus::Diverged: return "diverged";
    case PowerFlowStatus::SingularJacobian: return "singular jacobian";
    }
    return "?";
}

std::size_t PowerFlowSolution::index_of(int bus_id) const {
    const auto it = std::lower_bound(bus_ids.begin(), bus_ids.end(), bus_id);
    if (it == bus_ids.end() || *it != bus_id)
        throw NetworkError("bus " + std::to_string(bus_id) + " not in solution");
    return static_cast<std::size_t>(it - bus_ids.begin());
}

Complex PowerFlowSolution::voltage(int bus_id) const {
    const auto k = index_of(bus_id);
    return std::polar(vm[k], va[k]);
}

double PowerFlowSolution::va_deg_at(int bus_id) const {
    return va[index_of(bus_id)] * 180.0 / std::numbers::pi;
}

std::vector<Complex> PowerFlowSolution::voltages() const {
    std::vector<Complex> v(vm.size());
    for (std::size_t k = 0; k < vm.size(); ++k) v[k] = std::polar(vm[k], va[k]);
    return v;
}

Complex PowerFlowSolution::slack_injection(const Network& network) const {
    const auto s = network.slack_index();
    if (!s) return {};
    return generation[index_of(network.buses[*s].id)];
}

const BranchFlow* PowerFlowSolution::flow(BranchRef ref) const {
    for (const auto& f : flows)
        if ((f.from_bus == ref.a && f.to_bus == ref.b) || (f.from_bus == ref.b && f.to_bus == ref.a))
            return &f;
    return nullptr;
}

Complex PowerFlowSolution::flow_from(int from, int to) const {
    const auto* f = flow({from, to});
    if (!f) throw NetworkError("no branch " + std::to_string(from) + "-" + std::to_string(to));
    return f->from_bus == from ? f->s_from : f->s_to;
}

PowerFlowProblem::PowerFlowProblem(const Network& network)
    : network_(network), ybus_(build_ybus(network)), y_(ybus_.dense()) {
    const auto n = ybus_.bus_ids.size();
    const auto slack = network.slack_index();
    if (!slack) throw NetworkError("power flow needs a slack bus");
    slack_ = static_cast<std::size_t>(ybus_.index_of(network.buses[*slack].id));

    for (std::size_t k = 0; k < n; ++k) {
        const auto& bus = network.bus(ybus_.bus_ids[k]);
        if (k != slack_) angle_rows_.push_back(k);
        if (bus.kind == BusKind::PQ) vm_rows_.push_back(k);
    }

    scheduled_.assign(n, Complex{});
    for (const auto& g : network.generators) {
        const auto k = static_cast<std::size_t>(ybus_.index_of(g.bus));
        scheduled_[k] += Complex(g.p_setpoint, 0.0);
    }
    for (const auto& l : network.loads) {
        const auto k = static_cast<std::size_t>(ybus_.index_of(l.bus));
        scheduled_[k] -= Complex(l.p_req, l.q_req);
    }
}

std::vector<Complex> PowerFlowProblem::flat_start() const {
    std::vector<Complex> v(ybus_.bus_ids.size(), Complex(1.0, 0.0));
    for (std::size_t k = 0; k < v.size(); ++k) {
        const auto& bus = network_.bus(ybus_.bus_ids[k]);
        if (bus.is_generator_bus() && bus.v_setpoint) v[k] = Complex(*bus.v_setpoint, 0.0);
    }
    return v;
}

Eigen::VectorXd PowerFlowProblem::state(const std::vector<Complex>& v) const {
    Eigen::VectorXd x(size());
    Eigen::Index r = 0;
    for (auto k : angle_rows_) x[r++] = std::arg(v[k]);
    for (auto k : vm_rows_) x[r++] = std::abs(v[k]);
    return x;
}

std::vector<Complex> PowerFlowProblem::voltages(const Eigen::VectorXd& x,
                                                const std::vector<Complex>& base) const {
    std::vector<double> vm(base.size()), va(base.size());
    for (std::size_t k = 0; k < base.size(); ++k) {
        vm[k] = std::abs(base[k]);
        va[k] = std::arg(base[k]);
    }
    Eigen::Index r = 0;
    for (auto k : angle_rows_) va[k] = x[r++];
    for (auto k : vm_rows_) vm[k] = x[r++];
    std::vector<Complex> v(base.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::polar(vm[k], va[k]);
    return v;
}

std::vector<Complex> PowerFlowProblem::calculated_injections(const std::vector<Complex>& v) const {
    return detail::calc_injections(y_, v);
}

std::vector<Complex> PowerFlowProblem::device_injections(const std::vector<Complex>& v) const {
    std::vector<Complex> s(v.size(), Complex{});
    detail::accumulate_device_injections(detail::resolve_devices(network_, ybus_), v, s);
    return s;
}

std::vector<Complex> PowerFlowProblem::scheduled_injections(const std::vector<Complex>& v) const {
    auto s = device_injections(v);
    for (std::size_t k = 0; k < s.size(); ++k) s[k] += scheduled_[k];
    return s;
}

Eigen::VectorXd PowerFlowProblem::mismatch(const std::vector<Complex>& v) const {
    const auto calc = calculated_injections(v);
    const auto spec = scheduled_injections(v);
    Eigen::VectorXd f(size());
    Eigen::Index r = 0;
    for (auto k : angle_rows_) f[r++] = calc[k].real() - spec[k].real();
    for (auto k : vm_rows_) f[r++] = calc[k].imag() - spec[k].imag();
    return f;
}

Eigen::MatrixXd PowerFlowProblem::jacobian(const std::vector<Complex>& v) const {
    auto d = detail::calc_injection_derivatives(y_, v);

    // Device injections sit on the specified side, so subtract their partials.
    using Var = InjectionPartials::Var;
    for (const auto& dev : detail::resolve_devices(network_, ybus_)) {
        const auto p = compute_injection_partials(*dev.device, dev.y, v[dev.i], v[dev.j]);
        const auto& dd = p.d;
        auto sub = [&](Eigen::Index bus, double dp, double dq, Eigen::MatrixXcd& m, Eigen::Index col) {
            m(bus, col) -= Complex(dp, dq);
        };
        // Rows: I gets (p_i, q_i1 + q_i2), J gets (p_j, q_j).
        sub(dev.i, dd[0][Var::VaI], dd[1][Var::VaI] + dd[2][Var::VaI], d.d_va, dev.i);
        sub(dev.i, dd[0][Var::VaJ], dd[1][Var::VaJ] + dd[2][Var::VaJ], d.d_va, dev.j);
        sub(dev.i, dd[0][Var::VmI], dd[1][Var::VmI] + dd[2][Var::VmI], d.d_vm, dev.i);
        sub(dev.i, dd[0][Var::VmJ], dd[1][Var::VmJ] + dd[2][Var::VmJ], d.d_vm, dev.j);
        sub(dev.j, dd[3][Var::VaI], dd[4][Var::VaI], d.d_va, dev.i);
        sub(dev.j, dd[3][Var::VaJ], dd[4][Var::VaJ], d.d_va, dev.j);
        sub(dev.j, dd[3][Var::VmI], dd[4][Var::VmI], d.d_vm, dev.i);
        sub(dev.j, dd[3][Var::VmJ], dd[4][Var::VmJ], d.d_vm, dev.j);
    }

    Eigen::MatrixXd jac(size(), size());
    const auto na = static_cast<Eigen::Index>(angle_rows_.size());
    const auto nv = static_cast<Eigen::Index>(vm_rows_.size());
    for (Eigen::Index r = 0; r < na; ++r) {
        const auto row = static_cast<Eigen::Index>(angle_rows_[r]);
        for (Eigen::Index c = 0; c < na; ++c)
            jac(r, c) = d.d_va(row, static_cast<Eigen::Index>(angle_rows_[c])).real();
        for (Eigen::Index c = 0; c < nv; ++c)
            jac(r, na + c) = d.d_vm(row, static_cast<Eigen::Index>(vm_rows_[c])).real();
    }
    for (Eigen::Index r = 0; r < nv; ++r) {
        const auto row = static_cast<Eigen::Index>(vm_rows_[r]);
        for (Eigen::Index c = 0; c < na; ++c)
            jac(na + r, c) = d.d_va(row, static_cast<Eigen::Index>(angle_rows_[c])).imag();
        for (Eigen::Index c = 0; c < nv; ++c)
            jac(na + r, na + c) = d.d_vm(row, static_cast<Eigen::Index>(vm_rows_[c])).imag();
    }
    return jac;
}

namespace {

void finish_solution(PowerFlowSolution& sol, const PowerFlowProblem& problem,
                     const std::vector<Complex>& v, const Network& network) {
    sol.bus_ids = problem.ybus().bus_ids;
    sol.vm.resize(v.size());
    sol.va.resize(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        sol.vm[k] = std::abs(v[k]);
        sol.va[k] = std::arg(v[k]);
    }
    // Generation balances whatever the network draws at generator buses.
    const auto calc = problem.calculated_injections(v);
    const auto dev = problem.device_injections(v);
    sol.generation.assign(v.size(), Complex{});
    for (std::size_t k = 0; k < v.size(); ++k) {
        const auto& bus = network.bus(sol.bus_ids[k]);
        if (!bus.is_generator_bus()) continue;
        Complex load{};
        for (const auto& l : network.loads)
            if (l.bus == bus.id) load += Complex(l.p_req, l.q_req);
        sol.generation[k] = calc[k] + load - dev[k];
    }
    sol.flows = branch_flows(sol, network);
}

}  // namespace

PowerFlowSolution solve_power_flow(const Network& network, const PowerFlowOptions& options) {
    PowerFlowProblem problem(network);
    std::vector<Complex> v = problem.flat_start();
    if (!options.warm_start.empty()) {
        if (options.warm_start.size() != v.size())
            throw NetworkError("warm start has the wrong number of buses");
        // Keep the warm-start angles but restore regulated magnitudes.
        const auto flat = v;
        v = options.warm_start;
        for (std::size_t k = 0; k < v.size(); ++k) {
            const auto& bus = network.bus(problem.ybus().bus_ids[k]);
            if (bus.is_generator_bus()) v[k] = std::polar(std::abs(flat[k]), std::arg(v[k]));
        }
    }

    PowerFlowSolution sol;
    Eigen::VectorXd x = problem.state(v);
    Eigen::VectorXd f = problem.mismatch(v);
    double norm = f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
    sol.mismatch_history.push_back(norm);

    std::vector<Complex> best_v = v;
    double best_norm = norm;
    sol.status = PowerFlowStatus::Diverged;

    int iter = 0;
    while (norm >= options.tolerance && iter < options.max_iterations) {
        ++iter;
        const Eigen::SparseMatrix<double> jac = problem.jacobian(v).sparseView();
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(jac);
        if (lu.info() != Eigen::Success) {
            sol.status = PowerFlowStatus::SingularJacobian;
            break;
        }
        const Eigen::VectorXd dx = lu.solve(-f);
        if (lu.info() != Eigen::Success || !dx.allFinite()) {
            sol.status = PowerFlowStatus::SingularJacobian;
            break;
        }

        // Halve the step while the mismatch grows; take the last trial regardless.
        double step = 1.0;
        Eigen::VectorXd x_trial;
        std::vector<Complex> v_trial;
        Eigen::VectorXd f_trial;
        double trial_norm = 0.0;
        for (int h = 0; h <= options.max_step_halvings; ++h) {
            x_trial = x + step * dx;
            v_trial = problem.voltages(x_trial, v);
            f_trial = problem.mismatch(v_trial);
            trial_norm = f_trial.lpNorm<Eigen::Infinity>();
            if (std::isfinite(trial_norm) && trial_norm < norm) break;
            step *= 0.5;
        }
        if (!std::isfinite(trial_norm)) break;

        x = x_trial;
        v = v_trial;
        f = f_trial;
        norm = trial_norm;
        sol.mismatch_history.push_back(norm);
        if (norm < best_norm) {
            best_norm = norm;
            best_v = v;
        }
    }

    sol.iterations = iter;
    if (norm < options.tolerance) {
        sol.status = PowerFlowStatus::Converged;
        best_v = v;
        best_norm = norm;
    }
    sol.mismatch = best_norm;
    finish_solution(sol, problem, best_v, network);
    return sol;
}

std::vector<BranchFlow> branch_flows(const PowerFlowSolution& solution, const Network& network) {
    std::vector<BranchFlow> out;
    out.reserve(network.branches.size());
    for (const auto& br : network.branches) {
        BranchFlow f;
        f.from_bus = br.from_bus;
        f.to_bus = br.to_bus;
        f.in_service = br.in_service;
        if (br.in_service) {
            auto [sf, st] =
                detail::branch_end_powers(br, solution.voltage(br.from_bus), solution.voltage(br.to_bus));
            f.s_from = sf;
            f.s_to = st;
        }
        out.push_back(f);
    }
    return out;
}

double kcl_residual(const PowerFlowSolution& solution, const Network& network) {
    PowerFlowProblem problem(network);
    const auto v = solution.voltages();
    const auto calc = problem.calculated_injections(v);
    const auto dev = problem.device_injections(v);
    double worst = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        Complex sched = solution.generation[k] + dev[k];
        for (const auto& l : network.loads)
            if (l.bus == solution.bus_ids[k]) sched -= Complex(l.p_req, l.q_req);
        worst = std::max(worst, std::abs(sched - calc[k]));
    }
    return worst;
}

}  // namespace gridcurb
