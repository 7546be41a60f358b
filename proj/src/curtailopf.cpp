#include "gridcurb/curtailopf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "bus_injections.hpp"
#include "gridcurb/powerflow.hpp"

namespace gridcurb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr Complex kJ{0.0, 1.0};

double component(const Injections& inj, int c) { return c == 0 ? inj.p_i : c == 1 ? inj.q_i1 : inj.q_i2; }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string device_label(const FactsDevice& d) {
    return to_string(d.kind) + " " + std::to_string(d.from_bus) + "-" + std::to_string(d.to_bus);
}

}  // namespace

IpmOptions OpfOptions::ipm() const {
    IpmOptions o;
    o.feasibility_tolerance = feasibility_tolerance;
    o.gradient_tolerance = optimality_tolerance;
    o.complementarity_tolerance = complementarity_tolerance;
    o.cost_tolerance = cost_tolerance;
    o.max_iterations = max_iterations;
    o.centering = centering;
    o.step_to_boundary = step_to_boundary;
    o.hessian = hessian;
    return o;
}

std::string to_string(OpfStatus status) {
    switch (status) {
    case OpfStatus::Optimal: return "optimal";
    case OpfStatus::Infeasible: return "infeasible";
    case OpfStatus::InfeasibleAtFullCurtailment: return "infeasible at full curtailment";
    case OpfStatus::NotConverged: return "not converged";
    }
    return "unknown";
}

std::string to_string(ConstraintKind kind) {
    switch (kind) {
    case ConstraintKind::Balance: return "balance";
    case ConstraintKind::Thermal: return "thermal";
    case ConstraintKind::StabilityIndex: return "lindex";
    case ConstraintKind::DeviceLimit: return "device";
    case ConstraintKind::Bound: return "bound";
    }
    return "unknown";
}

double CurtailmentResult::curtailment_at(int bus) const {
    double c = 0.0;
    for (const auto& l : loads)
        if (l.bus == bus) c += l.p_curtailed();
    return c;
}

double CurtailmentResult::vm_at(int bus) const {
    for (std::size_t k = 0; k < bus_ids.size(); ++k)
        if (bus_ids[k] == bus) return vm[k];
    throw NetworkError("unknown bus " + std::to_string(bus));
}

std::vector<Complex> CurtailmentResult::voltages() const {
    std::vector<Complex> v(vm.size());
    for (std::size_t k = 0; k < vm.size(); ++k) v[k] = std::polar(vm[k], va[k]);
    return v;
}

std::vector<const ConstraintActivity*> CurtailmentResult::binding() const {
    std::vector<const ConstraintActivity*> out;
    for (const auto& c : constraints)
        if (c.binding) out.push_back(&c);
    return out;
}

CurtailmentProblem::CurtailmentProblem(const Network& network, const LcritMap& lcrit, const OpfOptions& options)
    : network_(network), lcrit_(lcrit), options_(options) {
    if (const auto rep = validate(network_); !rep.ok()) throw NetworkError(rep.violations.front());
    ybus_ = build_ybus(network_);
    y_ = ybus_.dense();
    partitioned_ = partition(ybus_, network_);
    f_matrix_ = participation_matrix(partitioned_);
    for (int id : partitioned_.generator_bus_ids) gen_pos_.push_back(ybus_.index_of(id));
    for (int id : partitioned_.load_bus_ids) load_pos_.push_back(ybus_.index_of(id));

    nb_ = static_cast<Eigen::Index>(ybus_.bus_ids.size());
    slack_ = static_cast<std::size_t>(ybus_.index_of(network_.buses[*network_.slack_index()].id));
    va_var_.assign(static_cast<std::size_t>(nb_), -1);
    vm_var_.assign(static_cast<std::size_t>(nb_), -1);
    vm_fixed_.assign(static_cast<std::size_t>(nb_), 1.0);

    Eigen::Index n = 0;
    for (Eigen::Index k = 0; k < nb_; ++k)
        if (static_cast<std::size_t>(k) != slack_) va_var_[static_cast<std::size_t>(k)] = n++;
    for (Eigen::Index k = 0; k < nb_; ++k) {
        const Bus& bus = network_.bus(ybus_.bus_ids[static_cast<std::size_t>(k)]);
        vm_fixed_[static_cast<std::size_t>(k)] = bus.v_setpoint.value_or(1.0);
        if (!bus.is_generator_bus() || !options_.hold_generator_voltage) vm_var_[static_cast<std::size_t>(k)] = n++;
    }
    const auto ng = static_cast<Eigen::Index>(network_.generators.size());
    pg0_ = n;
    qg0_ = pg0_ + ng;
    s0_ = qg0_ + ng;
    n = s0_;
    fixed_injection_.assign(static_cast<std::size_t>(nb_), Complex{});
    for (std::size_t k = 0; k < network_.loads.size(); ++k) {
        const Load& l = network_.loads[k];
        if (l.curtailable()) {
            curtailable_.push_back(k);
            ++n;
        } else {
            fixed_injection_[static_cast<std::size_t>(ybus_.index_of(l.bus))] -= Complex(l.p_req, l.q_req);
        }
    }
    for (std::size_t d = 0; d < network_.facts_devices.size(); ++d) {
        const FactsDevice& dev = network_.facts_devices[d];
        DeviceSlot slot;
        slot.device = d;
        slot.i = ybus_.index_of(dev.from_bus);
        slot.j = ybus_.index_of(dev.to_bus);
        slot.y = network_.device_admittance(dev);
        // A control whose bounds coincide is a constant; with v_t pinned at
        // zero the angle has no effect and is held too.
        slot.fixed = dev.controls;
        if (dev.has_series()) {
            if (dev.v_t_limits.min == dev.v_t_limits.max) slot.fixed.v_t = dev.v_t_limits.min;
            else slot.vt = n++;
            if (slot.vt >= 0 || slot.fixed.v_t != 0.0) slot.phi = n++;
        }
        if (dev.has_shunt()) {
            if (dev.i_q_limits.min == dev.i_q_limits.max) slot.fixed.i_q = dev.i_q_limits.min;
            else slot.iq = n++;
        }
        slots_.push_back(slot);
    }
    n_ = n;

    for (std::size_t b = 0; b < network_.branches.size(); ++b) {
        const Branch& br = network_.branches[b];
        if (!br.in_service || br.rating_mva <= 0.0) continue;
        const Complex ys = br.series_admittance();
        const Complex yff = ys + Complex(0.0, br.b / 2.0);
        const double smax = br.rating_mva / network_.base_mva;
        const Eigen::Index f = ybus_.index_of(br.from_bus);
        const Eigen::Index t = ybus_.index_of(br.to_bus);
        thermal_.push_back({b, f, t, yff, -ys, smax});
        ineq_names_.emplace_back(ConstraintKind::Thermal, "S " + br.label() + " at " + std::to_string(br.from_bus));
        thermal_.push_back({b, t, f, yff, -ys, smax});
        ineq_names_.emplace_back(ConstraintKind::Thermal, "S " + br.label() + " at " + std::to_string(br.to_bus));
    }
    for (std::size_t p = 0; p < partitioned_.load_bus_ids.size(); ++p) {
        const int id = partitioned_.load_bus_ids[p];
        if (const auto lc = lcrit_.at(id)) {
            if (*lc <= 0.0) throw NetworkError("L_crit at bus " + std::to_string(id) + " must be positive");
            index_rows_.push_back({static_cast<Eigen::Index>(p), load_pos_[p], *lc});
            ineq_names_.emplace_back(ConstraintKind::StabilityIndex, "L " + std::to_string(id));
        }
    }
    for (std::size_t s = 0; s < slots_.size(); ++s) {
        const FactsDevice& dev = network_.facts_devices[slots_[s].device];
        const std::string label = device_label(dev);
        auto add = [&](int comp, const Interval& lim, const char* name) {
            device_rows_.push_back({s, comp, true, lim.max});
            ineq_names_.emplace_back(ConstraintKind::DeviceLimit, std::string(name) + " upper " + label);
            device_rows_.push_back({s, comp, false, lim.min});
            ineq_names_.emplace_back(ConstraintKind::DeviceLimit, std::string(name) + " lower " + label);
        };
        if (applies_p_limit(dev.kind)) add(0, dev.p_inj_limits, "p_inj");
        if (applies_q1_limit(dev.kind)) add(1, dev.q_inj1_limits, "q_inj1");
        if (applies_q2_limit(dev.kind)) add(2, dev.q_inj2_limits, "q_inj2");
    }
}

std::vector<Complex> CurtailmentProblem::voltages(const Eigen::VectorXd& x) const {
    std::vector<Complex> v(static_cast<std::size_t>(nb_));
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double vm = vm_var_[k] >= 0 ? x[vm_var_[k]] : vm_fixed_[k];
        const double va = va_var_[k] >= 0 ? x[va_var_[k]] : 0.0;
        v[k] = std::polar(vm, va);
    }
    return v;
}

FactsDevice CurtailmentProblem::device_with_controls(const DeviceSlot& slot, const Eigen::VectorXd& x) const {
    FactsDevice d = network_.facts_devices[slot.device];
    d.controls.v_t = slot.vt >= 0 ? x[slot.vt] : (d.has_series() ? slot.fixed.v_t : 0.0);
    d.controls.phi_t = slot.phi >= 0 ? x[slot.phi] : (d.has_series() ? slot.fixed.phi_t : 0.0);
    d.controls.i_q = slot.iq >= 0 ? x[slot.iq] : (d.has_shunt() ? slot.fixed.i_q : 0.0);
    return d;
}

std::vector<FactsDevice> CurtailmentProblem::devices(const Eigen::VectorXd& x) const {
    std::vector<FactsDevice> out;
    for (const auto& s : slots_) out.push_back(device_with_controls(s, x));
    return out;
}

double CurtailmentProblem::curtailment(const Eigen::VectorXd& x) const {
    double c = 0.0;
    for (std::size_t k = 0; k < curtailable_.size(); ++k)
        c += network_.loads[curtailable_[k]].p_req * (1.0 - x[s0_ + static_cast<Eigen::Index>(k)]);
    return c;
}

double CurtailmentProblem::objective(const Eigen::VectorXd& x) const {
    double effort = 0.0;
    for (const auto& s : slots_) {
        if (s.vt >= 0) effort += x[s.vt] * x[s.vt];
        if (s.iq >= 0) effort += x[s.iq] * x[s.iq];
    }
    return curtailment(x) + options_.control_effort_weight * effort;
}

Eigen::VectorXd CurtailmentProblem::objective_gradient(const Eigen::VectorXd& x) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n_);
    for (std::size_t k = 0; k < curtailable_.size(); ++k)
        g[s0_ + static_cast<Eigen::Index>(k)] = -network_.loads[curtailable_[k]].p_req;
    for (const auto& s : slots_) {
        if (s.vt >= 0) g[s.vt] = 2.0 * options_.control_effort_weight * x[s.vt];
        if (s.iq >= 0) g[s.iq] = 2.0 * options_.control_effort_weight * x[s.iq];
    }
    return g;
}

Eigen::VectorXd CurtailmentProblem::equalities(const Eigen::VectorXd& x) const {
    const auto v = voltages(x);
    auto s = detail::calc_injections(y_, v);
    std::vector<Complex> sched = fixed_injection_;
    for (std::size_t g = 0; g < network_.generators.size(); ++g) {
        const auto k = static_cast<std::size_t>(ybus_.index_of(network_.generators[g].bus));
        sched[k] += Complex(x[pg0_ + static_cast<Eigen::Index>(g)], x[qg0_ + static_cast<Eigen::Index>(g)]);
    }
    for (std::size_t k = 0; k < curtailable_.size(); ++k) {
        const Load& l = network_.loads[curtailable_[k]];
        sched[static_cast<std::size_t>(ybus_.index_of(l.bus))] -=
            x[s0_ + static_cast<Eigen::Index>(k)] * Complex(l.p_req, l.q_req);
    }
    for (const auto& slot : slots_) {
        const auto inj = compute_injections(device_with_controls(slot, x), slot.y, v[slot.i], v[slot.j]);
        sched[slot.i] += Complex(inj.p_i, inj.q_i());
        sched[slot.j] += Complex(inj.p_j, inj.q_j);
    }
    Eigen::VectorXd h(2 * nb_);
    for (Eigen::Index k = 0; k < nb_; ++k) {
        const Complex m = s[k] - sched[k];
        h[k] = m.real();
        h[nb_ + k] = m.imag();
    }
    return h;
}

Eigen::MatrixXd CurtailmentProblem::equality_jacobian(const Eigen::VectorXd& x) const {
    const auto v = voltages(x);
    const auto d = detail::calc_injection_derivatives(y_, v);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * nb_, n_);
    for (Eigen::Index c = 0; c < nb_; ++c) {
        if (const auto col = va_var_[c]; col >= 0)
            for (Eigen::Index r = 0; r < nb_; ++r) {
                jac(r, col) = d.d_va(r, c).real();
                jac(nb_ + r, col) = d.d_va(r, c).imag();
            }
        if (const auto col = vm_var_[c]; col >= 0)
            for (Eigen::Index r = 0; r < nb_; ++r) {
                jac(r, col) = d.d_vm(r, c).real();
                jac(nb_ + r, col) = d.d_vm(r, c).imag();
            }
    }
    for (std::size_t g = 0; g < network_.generators.size(); ++g) {
        const Eigen::Index k = ybus_.index_of(network_.generators[g].bus);
        jac(k, pg0_ + static_cast<Eigen::Index>(g)) = -1.0;
        jac(nb_ + k, qg0_ + static_cast<Eigen::Index>(g)) = -1.0;
    }
    for (std::size_t k = 0; k < curtailable_.size(); ++k) {
        const Load& l = network_.loads[curtailable_[k]];
        const Eigen::Index b = ybus_.index_of(l.bus);
        jac(b, s0_ + static_cast<Eigen::Index>(k)) = l.p_req;
        jac(nb_ + b, s0_ + static_cast<Eigen::Index>(k)) = l.q_req;
    }
    using Var = InjectionPartials::Var;
    for (const auto& slot : slots_) {
        const auto p = compute_injection_partials(device_with_controls(slot, x), slot.y, v[slot.i], v[slot.j]).d;
        const std::array<Eigen::Index, Var::NumVars> cols{vm_var_[slot.i], va_var_[slot.i], vm_var_[slot.j],
                                                          va_var_[slot.j], slot.vt,         slot.phi,
                                                          slot.iq};
        for (int var = 0; var < Var::NumVars; ++var) {
            const Eigen::Index col = cols[var];
            if (col < 0) continue;
            jac(slot.i, col) -= p[0][var];
            jac(nb_ + slot.i, col) -= p[1][var] + p[2][var];
            jac(slot.j, col) -= p[3][var];
            jac(nb_ + slot.j, col) -= p[4][var];
        }
    }
    return jac;
}

Eigen::VectorXd CurtailmentProblem::inequalities(const Eigen::VectorXd& x) const {
    const auto v = voltages(x);
    Eigen::VectorXd g(static_cast<Eigen::Index>(ineq_names_.size()));
    Eigen::Index r = 0;
    for (const auto& t : thermal_) {
        const Complex s = v[t.f] * std::conj(t.yff * v[t.f] + t.yft * v[t.t]);
        g[r++] = (std::norm(s) - t.s_max * t.s_max) / (2.0 * t.s_max);
    }
    for (const auto& row : index_rows_) {
        Complex w{};
        for (std::size_t i = 0; i < gen_pos_.size(); ++i)
            w += f_matrix_(row.load_pos, static_cast<Eigen::Index>(i)) * v[gen_pos_[i]];
        const Complex l = 1.0 - w / v[row.bus];
        g[r++] = (std::norm(l) - row.l_crit * row.l_crit) / (2.0 * row.l_crit);
    }
    std::vector<Injections> inj;
    for (const auto& slot : slots_)
        inj.push_back(compute_injections(device_with_controls(slot, x), slot.y, v[slot.i], v[slot.j]));
    for (const auto& row : device_rows_) {
        const double val = component(inj[row.slot], row.component);
        g[r++] = row.upper ? val - row.limit : row.limit - val;
    }
    return g;
}

Eigen::MatrixXd CurtailmentProblem::inequality_jacobian(const Eigen::VectorXd& x) const {
    const auto v = voltages(x);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ineq_names_.size()), n_);
    // Adds d(row)/dx for a complex perturbation direction at bus k, where
    // dV_k = j V_k per radian and V_k/|V_k| per pu of magnitude.
    auto add_bus = [&](Eigen::Index r, Eigen::Index k, const auto& dvalue) {
        if (const auto col = va_var_[k]; col >= 0) jac(r, col) += dvalue(kJ * v[k]);
        if (const auto col = vm_var_[k]; col >= 0) jac(r, col) += dvalue(v[k] / std::abs(v[k]));
    };
    Eigen::Index r = 0;
    for (const auto& t : thermal_) {
        const Complex cur = t.yff * v[t.f] + t.yft * v[t.t];
        const Complex s = v[t.f] * std::conj(cur);
        const double scale = 1.0 / t.s_max;  // d/dS of (|S|^2 - Smax^2)/(2 Smax) is Re(conj(S) dS)/Smax
        add_bus(r, t.f, [&](Complex e) {
            return scale * std::real(std::conj(s) * (e * std::conj(cur) + v[t.f] * std::conj(t.yff * e)));
        });
        add_bus(r, t.t, [&](Complex e) { return scale * std::real(std::conj(s) * (v[t.f] * std::conj(t.yft * e))); });
        ++r;
    }
    for (const auto& row : index_rows_) {
        Complex w{};
        for (std::size_t i = 0; i < gen_pos_.size(); ++i)
            w += f_matrix_(row.load_pos, static_cast<Eigen::Index>(i)) * v[gen_pos_[i]];
        const Complex vj = v[row.bus];
        const Complex l = 1.0 - w / vj;
        const double scale = 1.0 / row.l_crit;
        add_bus(r, row.bus, [&](Complex e) { return scale * std::real(std::conj(l) * (w * e / (vj * vj))); });
        for (std::size_t i = 0; i < gen_pos_.size(); ++i) {
            const Complex fji = f_matrix_(row.load_pos, static_cast<Eigen::Index>(i));
            add_bus(r, gen_pos_[i], [&](Complex e) { return scale * std::real(std::conj(l) * (-fji * e / vj)); });
        }
        ++r;
    }
    using Var = InjectionPartials::Var;
    std::vector<InjectionPartials> partials;
    for (const auto& slot : slots_)
        partials.push_back(compute_injection_partials(device_with_controls(slot, x), slot.y, v[slot.i], v[slot.j]));
    for (const auto& row : device_rows_) {
        const DeviceSlot& slot = slots_[row.slot];
        const auto& p = partials[row.slot].d;
        const std::array<Eigen::Index, Var::NumVars> cols{vm_var_[slot.i], va_var_[slot.i], vm_var_[slot.j],
                                                          va_var_[slot.j], slot.vt,         slot.phi,
                                                          slot.iq};
        const double sign = row.upper ? 1.0 : -1.0;
        for (int var = 0; var < Var::NumVars; ++var) {
            if (cols[var] < 0) continue;
            double d = p[row.component][var];
            jac(r, cols[var]) += sign * d;
        }
        ++r;
    }
    return jac;
}

Eigen::VectorXd CurtailmentProblem::lower_bounds() const {
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(n_, -kInf);
    for (Eigen::Index k = 0; k < nb_; ++k)
        if (const auto col = vm_var_[k]; col >= 0) lo[col] = network_.bus(ybus_.bus_ids[k]).v_min;
    for (std::size_t g = 0; g < network_.generators.size(); ++g) {
        lo[pg0_ + static_cast<Eigen::Index>(g)] = network_.generators[g].p_min;
        lo[qg0_ + static_cast<Eigen::Index>(g)] = network_.generators[g].q_min;
    }
    for (std::size_t k = 0; k < curtailable_.size(); ++k) lo[s0_ + static_cast<Eigen::Index>(k)] = 0.0;
    for (const auto& s : slots_) {
        const FactsDevice& d = network_.facts_devices[s.device];
        if (s.vt >= 0) lo[s.vt] = d.v_t_limits.min;
        if (s.iq >= 0) lo[s.iq] = d.i_q_limits.min;
    }
    return lo;
}

Eigen::VectorXd CurtailmentProblem::upper_bounds() const {
    Eigen::VectorXd hi = Eigen::VectorXd::Constant(n_, kInf);
    for (Eigen::Index k = 0; k < nb_; ++k)
        if (const auto col = vm_var_[k]; col >= 0) hi[col] = network_.bus(ybus_.bus_ids[k]).v_max;
    for (std::size_t g = 0; g < network_.generators.size(); ++g) {
        hi[pg0_ + static_cast<Eigen::Index>(g)] = network_.generators[g].p_max;
        hi[qg0_ + static_cast<Eigen::Index>(g)] = network_.generators[g].q_max;
    }
    for (std::size_t k = 0; k < curtailable_.size(); ++k) hi[s0_ + static_cast<Eigen::Index>(k)] = 1.0;
    for (const auto& s : slots_) {
        const FactsDevice& d = network_.facts_devices[s.device];
        if (s.vt >= 0) hi[s.vt] = d.v_t_limits.max;
        if (s.iq >= 0) hi[s.iq] = d.i_q_limits.max;
    }
    return hi;
}

Eigen::VectorXd CurtailmentProblem::pack(const std::vector<Complex>& v, const std::vector<Complex>& generation,
                                         const std::vector<double>& served,
                                         const std::vector<DeviceControls>& controls) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (va_var_[k] >= 0) x[va_var_[k]] = std::arg(v[k]) - std::arg(v[slack_]);
        if (vm_var_[k] >= 0) x[vm_var_[k]] = std::abs(v[k]);
    }
    for (std::size_t g = 0; g < generation.size(); ++g) {
        x[pg0_ + static_cast<Eigen::Index>(g)] = generation[g].real();
        x[qg0_ + static_cast<Eigen::Index>(g)] = generation[g].imag();
    }
    for (std::size_t k = 0; k < served.size(); ++k) x[s0_ + static_cast<Eigen::Index>(k)] = served[k];
    for (std::size_t s = 0; s < slots_.size() && s < controls.size(); ++s) {
        if (slots_[s].vt >= 0) x[slots_[s].vt] = controls[s].v_t;
        if (slots_[s].phi >= 0) x[slots_[s].phi] = controls[s].phi_t;
        if (slots_[s].iq >= 0) x[slots_[s].iq] = controls[s].i_q;
    }
    return x;
}

std::string CurtailmentProblem::variable_name(Eigen::Index k) const {
    for (Eigen::Index b = 0; b < nb_; ++b) {
        const std::string id = std::to_string(ybus_.bus_ids[b]);
        if (va_var_[b] == k) return "va " + id;
        if (vm_var_[b] == k) return "vm " + id;
    }
    const auto ng = static_cast<Eigen::Index>(network_.generators.size());
    if (k >= pg0_ && k < pg0_ + ng) return "pg " + std::to_string(network_.generators[k - pg0_].bus);
    if (k >= qg0_ && k < qg0_ + ng) return "qg " + std::to_string(network_.generators[k - qg0_].bus);
    const auto nl = static_cast<Eigen::Index>(curtailable_.size());
    if (k >= s0_ && k < s0_ + nl)
        return "served " + std::to_string(network_.loads[curtailable_[static_cast<std::size_t>(k - s0_)]].bus);
    for (const auto& s : slots_) {
        const std::string label = device_label(network_.facts_devices[s.device]);
        if (s.vt == k) return "v_t " + label;
        if (s.phi == k) return "phi_t " + label;
        if (s.iq == k) return "i_q " + label;
    }
    return "x" + std::to_string(k);
}

CurtailmentResult CurtailmentProblem::decode(const IpmResult& sol) const {
    CurtailmentResult res;
    const Eigen::VectorXd& x = sol.x;
    res.status = sol.converged() ? OpfStatus::Optimal : OpfStatus::NotConverged;
    res.total_curtailment = curtailment(x);
    res.max_violation = sol.max_violation;
    res.iterations = sol.iterations;
    res.log = sol.log;
    res.message = to_string(sol.status);

    for (std::size_t k = 0; k < network_.loads.size(); ++k) {
        const Load& l = network_.loads[k];
        LoadOutcome o{l.bus, l.p_req, l.q_req, 1.0};
        const auto it = std::find(curtailable_.begin(), curtailable_.end(), k);
        if (it != curtailable_.end()) o.served_fraction = x[s0_ + (it - curtailable_.begin())];
        res.loads.push_back(o);
    }
    for (std::size_t g = 0; g < network_.generators.size(); ++g)
        res.generators.push_back({network_.generators[g].bus, x[pg0_ + static_cast<Eigen::Index>(g)],
                                  x[qg0_ + static_cast<Eigen::Index>(g)]});
    const auto v = voltages(x);
    for (const auto& slot : slots_) {
        FactsDevice d = device_with_controls(slot, x);
        d.controls.phi_t = std::remainder(d.controls.phi_t, 2.0 * std::numbers::pi);
        const auto inj = compute_injections(d, slot.y, v[slot.i], v[slot.j]);
        res.devices.push_back({d, inj});
    }
    res.bus_ids = ybus_.bus_ids;
    for (const auto& c : v) {
        res.vm.push_back(std::abs(c));
        res.va.push_back(std::arg(c));
    }
    res.stability = compute_l_index(partitioned_, res.bus_ids, v);

    const double tol = options_.binding_tolerance;
    Eigen::Index r = 0;
    for (const auto& t : thermal_) {
        const Complex s = v[t.f] * std::conj(t.yff * v[t.f] + t.yft * v[t.t]);
        ConstraintActivity c{ConstraintKind::Thermal, ineq_names_[static_cast<std::size_t>(r)].second, std::abs(s),
                             t.s_max, true, sol.mu[r]};
        c.binding = c.slack() <= tol;
        res.constraints.push_back(c);
        ++r;
    }
    for (const auto& row : index_rows_) {
        ConstraintActivity c{ConstraintKind::StabilityIndex, ineq_names_[static_cast<std::size_t>(r)].second,
                             res.stability.l_index[static_cast<std::size_t>(row.load_pos)], row.l_crit, true,
                             sol.mu[r]};
        c.binding = c.slack() <= tol;
        res.constraints.push_back(c);
        ++r;
    }
    for (const auto& row : device_rows_) {
        const double val = component(res.devices[row.slot].injections, row.component);
        ConstraintActivity c{ConstraintKind::DeviceLimit, ineq_names_[static_cast<std::size_t>(r)].second, val,
                             row.limit, row.upper, sol.mu[r]};
        c.binding = c.slack() <= tol;
        res.constraints.push_back(c);
        ++r;
    }
    const Eigen::VectorXd lo = lower_bounds();
    const Eigen::VectorXd hi = upper_bounds();
    for (Eigen::Index k = 0; k < n_; ++k) {
        if (std::isfinite(lo[k])) {
            ConstraintActivity c{ConstraintKind::Bound, variable_name(k) + " lower", x[k], lo[k], false,
                                 sol.mu_lower[k]};
            c.binding = c.slack() <= tol;
            res.constraints.push_back(c);
        }
        if (std::isfinite(hi[k])) {
            ConstraintActivity c{ConstraintKind::Bound, variable_name(k) + " upper", x[k], hi[k], true,
                                 sol.mu_upper[k]};
            c.binding = c.slack() <= tol;
            res.constraints.push_back(c);
        }
    }
    return res;
}

namespace {

struct StartState {
    std::vector<Complex> v;
    std::vector<Complex> generation;  // per generator
    double served = 1.0;
};

std::vector<Complex> per_generator(const Network& network, const PowerFlowSolution& pf) {
    std::vector<Complex> out;
    for (const auto& g : network.generators) {
        const auto at_bus = std::count_if(network.generators.begin(), network.generators.end(),
                                          [&](const Generator& o) { return o.bus == g.bus; });
        out.push_back(pf.generation[pf.index_of(g.bus)] / static_cast<double>(at_bus));
    }
    return out;
}

Network scaled_loads(const Network& network, double factor) {
    Network n = network;
    for (auto& l : n.loads) {
        l.p_req *= factor;
        l.q_req *= factor;
    }
    return n;
}

StartState initial_state(const Network& network) {
    const auto pf = solve_power_flow(network);
    if (pf.converged()) return {pf.voltages(), per_generator(network, pf), 1.0};

    constexpr double reduced = 0.8;
    const Network light = scaled_loads(network, reduced);
    const auto pf80 = solve_power_flow(light);
    if (pf80.converged()) return {pf80.voltages(), per_generator(light, pf80), reduced};

    StartState st;
    for (int id : sorted_bus_ids(network)) st.v.push_back(network.bus(id).v_setpoint.value_or(1.0));
    for (const auto& g : network.generators) st.generation.emplace_back(g.p_setpoint, 0.0);
    st.served = reduced;
    return st;
}

}  // namespace

CurtailmentResult solve_curtailment(const Network& network, const LcritMap& lcrit, const OpfOptions& options) {
    const CurtailmentProblem problem(network, lcrit, options);
    const StartState st = initial_state(network);
    const std::vector<double> served(problem.curtailable_loads().size(), st.served);

    const int starts = network.facts_devices.empty() ? 1 : std::max(1, options.multistarts);
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);

    CurtailmentResult best;
    bool have_best = false;
    const IpmOptions ipm = options.ipm();
    for (int k = 0; k < starts; ++k) {
        std::vector<DeviceControls> controls;
        for (const auto& d : network.facts_devices) {
            DeviceControls c;
            if (d.has_series()) c.v_t = std::clamp(0.05, d.v_t_limits.min, d.v_t_limits.max);
            c.phi_t = d.has_series() ? angle(rng) : 0.0;
            controls.push_back(c);
        }
        const Eigen::VectorXd x0 = problem.pack(st.v, st.generation, served, controls);
        CurtailmentResult r = problem.decode(solve_ipm(problem, x0, ipm));
        r.chosen_start = k;

        auto better = [&](const CurtailmentResult& a, const CurtailmentResult& b) {
            if (a.optimal() != b.optimal()) return a.optimal();
            if (a.optimal()) return a.total_curtailment < b.total_curtailment - 1e-9;
            return a.max_violation < b.max_violation;
        };
        if (!have_best || better(r, best)) {
            best = std::move(r);
            have_best = true;
        }
    }
    best.starts = starts;

    if (!best.optimal() && best.max_violation > options.feasibility_tolerance) {
        const bool all_shed = std::all_of(best.loads.begin(), best.loads.end(), [](const LoadOutcome& l) {
            return l.p_req <= 0.0 || l.served_fraction < 1e-3;
        });
        best.status = all_shed ? OpfStatus::InfeasibleAtFullCurtailment : OpfStatus::Infeasible;
    }
    return best;
}

CurtailmentResult solve_contingency_curtailment(const Network& network, BranchRef outage, const LcritMap& lcrit,
                                                const OpfOptions& options) {
    return solve_curtailment(apply_outage(network, outage), lcrit, options);
}

std::string kkt_report(const CurtailmentResult& result) {
    std::ostringstream out;
    out << "status: " << to_string(result.status) << "\n";
    out << "total curtailment: " << fmt("%.4f", result.total_curtailment) << " pu\n";
    out << "iterations: " << result.iterations << " (start " << result.chosen_start + 1 << " of " << result.starts
        << ")\n";
    out << "max violation: " << fmt("%.3e", result.max_violation) << "\n";
    out << "kind, constraint, value, limit, slack, multiplier, binding\n";
    for (const auto& c : result.constraints) {
        if (c.kind == ConstraintKind::Bound && !c.binding) continue;
        out << to_string(c.kind) << ", " << c.name << ", " << fmt("%.4f", c.value) << ", " << fmt("%.4f", c.limit)
            << ", " << fmt("%.4f", c.slack()) << ", " << fmt("%.3e", c.multiplier) << ", "
            << (c.binding ? "yes" : "no") << "\n";
    }
    for (const auto& c : result.constraints) {
        if (c.kind != ConstraintKind::StabilityIndex || !c.binding) continue;
        out << c.name << " is at L_crit " << fmt("%.4f", c.limit);
        if (result.total_curtailment > 1e-6)
            out << "; this L_crit constraint caused the load curtailment";
        out << "\n";
    }
    return out.str();
}

}  // namespace gridcurb
