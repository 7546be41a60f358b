#pragma once

// Power-injection model (PIM) for series/shunt FACTS controllers.
//
// A device sits on a host branch between terminal I (the shunt side) and
// terminal J. Its series converter is an ideal voltage source V_T = v_t∠phi_t
// inserted at the I end of the branch series admittance y = G + jB; its shunt
// converter draws a current in phase with V_I that supplies the series
// source's real power, plus a quadrature current I_q. The network sees the
// device only through five bus injections, so the bus admittance matrix is
// never modified.

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gridcurb {

using Complex = std::complex<double>;

enum class DeviceKind { Upfc, Sssc, Statcom };

/// Applicability flags: beta1 switches the series terms, beta2 the shunt
/// quadrature term.
struct BetaFlags {
    int series = 0;
    int shunt = 0;
};

constexpr BetaFlags beta_flags(DeviceKind kind) {
    switch (kind) {
    case DeviceKind::Upfc: return {1, 1};
    case DeviceKind::Sssc: return {1, 0};
    case DeviceKind::Statcom: return {0, 1};
    }
    return {0, 0};
}

std::string to_string(DeviceKind kind);
std::optional<DeviceKind> parse_device_kind(std::string_view text);

struct Interval {
    double min = 0.0;
    double max = 0.0;

    bool contains(double v, double tol = 0.0) const { return v >= min - tol && v <= max + tol; }
    bool ordered() const { return min <= max; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

struct DeviceControls {
    double v_t = 0.0;    // series source magnitude, pu
    double phi_t = 0.0;  // series source angle, rad
    double i_q = 0.0;    // shunt quadrature current, pu (positive absorbs vars)
    friend bool operator==(const DeviceControls&, const DeviceControls&) = default;
};

struct FactsDevice {
    DeviceKind kind = DeviceKind::Upfc;
    int from_bus = 0;  // terminal I
    int to_bus = 0;    // terminal J
    DeviceControls controls;

    Interval v_t_limits{0.0, 0.2};
    Interval i_q_limits{-1.0, 1.0};
    Interval p_inj_limits{-1.0, 1.0};   // P_I(inj)
    Interval q_inj1_limits{-1.0, 1.0};  // Q_I1(inj), series reactive part
    Interval q_inj2_limits{-1.0, 1.0};  // Q_I2(inj), shunt quadrature part

    /// Series admittance used by the injection model; the host branch value
    /// 1/(r+jx) when unset.
    std::optional<Complex> series_admittance;

    BetaFlags beta() const { return beta_flags(kind); }
    bool has_series() const { return beta().series != 0; }
    bool has_shunt() const { return beta().shunt != 0; }

    friend bool operator==(const FactsDevice&, const FactsDevice&) = default;
};

/// Checks the device-local invariants. Returns human-readable violations.
std::vector<std::string> device_violations(const FactsDevice& device);

struct Injections {
    double p_i = 0.0;   // P_I(inj)
    double q_i1 = 0.0;  // Q_I1(inj)
    double q_i2 = 0.0;  // Q_I2(inj)
    double p_j = 0.0;   // P_J(inj)
    double q_j = 0.0;   // Q_J(inj)

    double q_i() const { return q_i1 + q_i2; }
    std::array<double, 5> as_array() const { return {p_i, q_i1, q_i2, p_j, q_j}; }
};

/// Closed-form injections.
///
///   P_I  = G(-v_t^2 - 2 V_I v_t cos(th_I - phi) + V_J v_t cos(th_J - phi)) - B V_J v_t sin(th_J - phi)
///   Q_I1 = V_I v_t (B cos(th_I - phi) - G sin(th_I - phi))
///   Q_I2 = -|V_I + V_T| i_q
///   P_J  = V_J v_t (G cos(th_J - phi) + B sin(th_J - phi))
///   Q_J  = V_J v_t (G sin(th_J - phi) - B cos(th_J - phi))
///
/// Series terms are scaled by beta1 and the shunt term by beta2. Every form
/// follows from complex-power algebra on the source model; oracle_injections
/// is the arbiter.
Injections compute_injections(const FactsDevice& device, Complex series_admittance, Complex v_i,
                              Complex v_j);

/// Reference injections obtained by circuit simulation of the voltage/current
/// source model: phasor currents with and without the series source, the
/// in-phase shunt current that feeds the series source, and the quadrature
/// current drawn at the internal node V_I + V_T.
Injections oracle_injections(const FactsDevice& device, Complex series_admittance, Complex v_i,
                             Complex v_j);

/// Partial derivatives of the five injections. Rows follow Injections order
/// (p_i, q_i1, q_i2, p_j, q_j); columns follow InjectionPartials::Var.
struct InjectionPartials {
    enum Var { VmI = 0, VaI, VmJ, VaJ, Vt, Phi, Iq, NumVars };
    std::array<std::array<double, NumVars>, 5> d{};
};

InjectionPartials compute_injection_partials(const FactsDevice& device, Complex series_admittance,
                                             Complex v_i, Complex v_j);

/// Returns identifiers of violated injection limits, e.g. "p_inj upper".
/// The P_I limit applies to UPFC and SSSC, Q_I1 to UPFC only, Q_I2 to UPFC and
/// STATCOM.
std::vector<std::string> injection_limits_ok(const FactsDevice& device, const Injections& inj,
                                             double tol = 0.0);

bool applies_p_limit(DeviceKind kind);
bool applies_q1_limit(DeviceKind kind);
bool applies_q2_limit(DeviceKind kind);

}  // namespace gridcurb
