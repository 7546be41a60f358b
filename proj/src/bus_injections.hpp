#pragma once

// Shared complex-power helpers for the power flow and the OPF.

#include <Eigen/Dense>
#include <vector>

#include "gridcurb/admittance.hpp"
#include "gridcurb/facts.hpp"
#include "gridcurb/network.hpp"

namespace gridcurb::detail {

inline Eigen::VectorXcd to_eigen(const std::vector<Complex>& v) {
    return Eigen::Map<const Eigen::VectorXcd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// S = V .* conj(Y V)
inline std::vector<Complex> calc_injections(const Eigen::MatrixXcd& y, const std::vector<Complex>& v) {
    const Eigen::VectorXcd vv = to_eigen(v);
    const Eigen::VectorXcd i = y * vv;
    std::vector<Complex> s(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) s[k] = v[k] * std::conj(i[static_cast<Eigen::Index>(k)]);
    return s;
}

struct InjectionDerivatives {
    Eigen::MatrixXcd d_va;  // dS_i / d theta_k
    Eigen::MatrixXcd d_vm;  // dS_i / d |V_k|
};

/// dS/dVa = j diag(V) conj(diag(I) - Y diag(V))
/// dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
inline InjectionDerivatives calc_injection_derivatives(const Eigen::MatrixXcd& y,
                                                       const std::vector<Complex>& v) {
    const Eigen::VectorXcd vv = to_eigen(v);
    const Eigen::VectorXcd i = y * vv;
    const Eigen::Index n = vv.size();
    Eigen::VectorXcd vnorm(n);
    for (Eigen::Index k = 0; k < n; ++k) vnorm[k] = vv[k] / std::abs(vv[k]);

    InjectionDerivatives d;
    Eigen::MatrixXcd ydv = y * vv.asDiagonal();
    Eigen::MatrixXcd tmp = -ydv;
    tmp.diagonal() += i;
    d.d_va = Complex(0.0, 1.0) * (vv.asDiagonal() * tmp.conjugate());

    Eigen::MatrixXcd ydn = y * vnorm.asDiagonal();
    d.d_vm = vv.asDiagonal() * ydn.conjugate();
    for (Eigen::Index k = 0; k < n; ++k) d.d_vm(k, k) += std::conj(i[k]) * vnorm[k];
    return d;
}

/// A device resolved against matrix indices.
struct DeviceTerminals {
    const FactsDevice* device = nullptr;
    Eigen::Index i = 0;
    Eigen::Index j = 0;
    Complex y;
};

inline std::vector<DeviceTerminals> resolve_devices(const Network& network, const YBus& ybus) {
    std::vector<DeviceTerminals> out;
    for (const auto& dev : network.facts_devices)
        out.push_back({&dev, ybus.index_of(dev.from_bus), ybus.index_of(dev.to_bus),
                       network.device_admittance(dev)});
    return out;
}

/// Adds device injections to the per-bus vector `s`.
inline void accumulate_device_injections(const std::vector<DeviceTerminals>& devices,
                                         const std::vector<Complex>& v, std::vector<Complex>& s) {
    for (const auto& d : devices) {
        const auto inj = compute_injections(*d.device, d.y, v[d.i], v[d.j]);
        s[d.i] += Complex(inj.p_i, inj.q_i());
        s[d.j] += Complex(inj.p_j, inj.q_j);
    }
}

/// Complex power injected into branch from each end of a pi-model.
inline std::pair<Complex, Complex> branch_end_powers(const Branch& br, Complex vf, Complex vt) {
    const Complex ys = br.series_admittance();
    const Complex ysh(0.0, br.b / 2.0);
    const Complex i_f = (ys + ysh) * vf - ys * vt;
    const Complex i_t = (ys + ysh) * vt - ys * vf;
    return {vf * std::conj(i_f), vt * std::conj(i_t)};
}

}  // namespace gridcurb::detail
