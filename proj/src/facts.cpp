#include "gridcurb/facts.hpp"

#include <cmath>
#include <numbers>

namespace gridcurb {

std::string to_string(DeviceKind kind) {
    switch (kind) {
    case DeviceKind::Upfc: return "upfc";
    case DeviceKind::Sssc: return "sssc";
    case DeviceKind::Statcom: return "statcom";
    }
    return "?";
}

std::optional<DeviceKind> parse_device_kind(std::string_view text) {
    if (text == "upfc" || text == "UPFC") return DeviceKind::Upfc;
    if (text == "sssc" || text == "SSSC") return DeviceKind::Sssc;
    if (text == "statcom" || text == "STATCOM") return DeviceKind::Statcom;
    return std::nullopt;
}

bool applies_p_limit(DeviceKind kind) { return kind != DeviceKind::Statcom; }
bool applies_q1_limit(DeviceKind kind) { return kind == DeviceKind::Upfc; }
bool applies_q2_limit(DeviceKind kind) { return kind != DeviceKind::Sssc; }

std::vector<std::string> device_violations(const FactsDevice& device) {
    std::vector<std::string> out;
    const auto& c = device.controls;
    if (device.from_bus == device.to_bus) out.emplace_back("device terminals coincide");
    if (c.v_t < 0.0) out.emplace_back("v_t must be non-negative");
    if (!device.v_t_limits.ordered()) out.emplace_back("v_t limits out of order");
    if (device.v_t_limits.min < 0.0) out.emplace_back("v_t lower limit must be non-negative");
    if (!device.i_q_limits.ordered()) out.emplace_back("i_q limits out of order");
    if (!device.p_inj_limits.ordered()) out.emplace_back("p_inj limits out of order");
    if (!device.q_inj1_limits.ordered()) out.emplace_back("q_inj1 limits out of order");
    if (!device.q_inj2_limits.ordered()) out.emplace_back("q_inj2 limits out of order");
    if (device.kind == DeviceKind::Sssc && c.i_q != 0.0) out.emplace_back("SSSC must have i_q = 0");
    if (device.kind == DeviceKind::Statcom && c.v_t != 0.0)
        out.emplace_back("STATCOM must have v_t = 0");
    if (!std::isfinite(c.v_t) || !std::isfinite(c.phi_t) || !std::isfinite(c.i_q))
        out.emplace_back("non-finite control");
    return out;
}

namespace {

struct Terms {
    double vi, vj, vt, iq;
    double ci, si, cj, sj;
    double g, b;
    double vp;  // |V_I + V_T|
};

Terms make_terms(const FactsDevice& device, Complex y, Complex v_i, Complex v_j) {
    const auto beta = device.beta();
    Terms t{};
    t.vi = std::abs(v_i);
    t.vj = std::abs(v_j);
    t.vt = beta.series ? device.controls.v_t : 0.0;
    t.iq = beta.shunt ? device.controls.i_q : 0.0;
    const double phi = device.controls.phi_t;
    const double ai = std::arg(v_i) - phi;
    const double aj = std::arg(v_j) - phi;
    t.ci = std::cos(ai);
    t.si = std::sin(ai);
    t.cj = std::cos(aj);
    t.sj = std::sin(aj);
    t.g = y.real();
    t.b = y.imag();
    t.vp = std::sqrt(std::max(0.0, t.vi * t.vi + t.vt * t.vt + 2.0 * t.vi * t.vt * t.ci));
    return t;
}

}  // namespace

Injections compute_injections(const FactsDevice& device, Complex series_admittance, Complex v_i,
                              Complex v_j) {
    const Terms t = make_terms(device, series_admittance, v_i, v_j);
    Injections inj;
    if (device.has_series()) {
        inj.p_i = t.g * (-t.vt * t.vt - 2.0 * t.vi * t.vt * t.ci + t.vj * t.vt * t.cj) -
                  t.b * t.vj * t.vt * t.sj;
        inj.q_i1 = t.vi * t.vt * (t.b * t.ci - t.g * t.si);
        inj.p_j = t.vj * t.vt * (t.g * t.cj + t.b * t.sj);
        inj.q_j = t.vj * t.vt * (t.g * t.sj - t.b * t.cj);
    }
    if (device.has_shunt()) inj.q_i2 = -t.vp * t.iq;
    return inj;
}

Injections oracle_injections(const FactsDevice& device, Complex series_admittance, Complex v_i,
                             Complex v_j) {
    const auto beta = device.beta();
    const Complex y = series_admittance;
    const Complex v_t =
        beta.series ? std::polar(device.controls.v_t, device.controls.phi_t) : Complex{};

    // Series branch current I -> J with and without the inserted source.
    const Complex line = y * (v_i + v_t - v_j);
    const Complex line0 = y * (v_i - v_j);

    // Injection = power the bus no longer sends into the branch.
    const Complex ds_i = -(v_i * std::conj(line) - v_i * std::conj(line0));
    const Complex ds_j = -(v_j * std::conj(-line) - v_j * std::conj(-line0));

    // Shunt converter draws the series source's real power in phase with V_I.
    const double p_series = (v_t * std::conj(line)).real();
    const Complex i_t = std::polar(p_series / std::abs(v_i), std::arg(v_i));
    const Complex s_i = ds_i - v_i * std::conj(i_t);

    // Quadrature current drawn at the internal node, lagging it by 90 degrees.
    const Complex v_int = v_i + v_t;
    const double i_q = beta.shunt ? device.controls.i_q : 0.0;
    const Complex i_quad = std::polar(i_q, std::arg(v_int) - std::numbers::pi / 2.0);
    const Complex s_q = -v_int * std::conj(i_quad);

    Injections inj;
    inj.p_i = s_i.real();
    inj.q_i1 = s_i.imag();
    inj.q_i2 = s_q.imag();
    inj.p_j = ds_j.real();
    inj.q_j = ds_j.imag();
    return inj;
}

InjectionPartials compute_injection_partials(const FactsDevice& device, Complex series_admittance,
                                             Complex v_i, Complex v_j) {
    using V = InjectionPartials::Var;
    const Terms t = make_terms(device, series_admittance, v_i, v_j);
    InjectionPartials out;
    auto& d = out.d;

    if (device.has_series()) {
        const double g = t.g, b = t.b, vi = t.vi, vj = t.vj, vt = t.vt;
        auto& p = d[0];
        p[V::VmI] = -2.0 * g * vt * t.ci;
        p[V::VaI] = 2.0 * g * vi * vt * t.si;
        p[V::VmJ] = g * vt * t.cj - b * vt * t.sj;
        p[V::VaJ] = -g * vj * vt * t.sj - b * vj * vt * t.cj;
        p[V::Vt] = g * (-2.0 * vt - 2.0 * vi * t.ci + vj * t.cj) - b * vj * t.sj;
        p[V::Phi] = -(p[V::VaI] + p[V::VaJ]);

        auto& q1 = d[1];
        q1[V::VmI] = vt * (b * t.ci - g * t.si);
        q1[V::VaI] = vi * vt * (-b * t.si - g * t.ci);
        q1[V::Vt] = vi * (b * t.ci - g * t.si);
        q1[V::Phi] = -q1[V::VaI];

        auto& pj = d[3];
        pj[V::VmJ] = vt * (g * t.cj + b * t.sj);
        pj[V::VaJ] = vj * vt * (-g * t.sj + b * t.cj);
        pj[V::Vt] = vj * (g * t.cj + b * t.sj);
        pj[V::Phi] = -pj[V::VaJ];

        auto& qj = d[4];
        qj[V::VmJ] = vt * (g * t.sj - b * t.cj);
        qj[V::VaJ] = vj * vt * (g * t.cj + b * t.sj);
        qj[V::Vt] = vj * (g * t.sj - b * t.cj);
        qj[V::Phi] = -qj[V::VaJ];
    }

    if (device.has_shunt()) {
        auto& q2 = d[2];
        q2[V::Iq] = -t.vp;
        if (t.vp > 0.0) {
            const double k = -t.iq / t.vp;
            q2[V::VmI] = k * (t.vi + t.vt * t.ci);
            q2[V::VaI] = k * (-t.vi * t.vt * t.si);
            if (device.has_series()) {
                q2[V::Vt] = k * (t.vt + t.vi * t.ci);
                q2[V::Phi] = k * (t.vi * t.vt * t.si);
            }
        }
    }
    return out;
}

std::vector<std::string> injection_limits_ok(const FactsDevice& device, const Injections& inj,
                                             double tol) {
    std::vector<std::string> out;
    auto check = [&](bool applies, const Interval& lim, double v, const char* tag) {
        if (!applies) return;
        if (v > lim.max + tol) out.push_back(std::string(tag) + " upper");
        if (v < lim.min - tol) out.push_back(std::string(tag) + " lower");
    };
    check(applies_p_limit(device.kind), device.p_inj_limits, inj.p_i, "p_inj");
    check(applies_q1_limit(device.kind), device.q_inj1_limits, inj.q_i1, "q_inj1");
    check(applies_q2_limit(device.kind), device.q_inj2_limits, inj.q_i2, "q_inj2");
    return out;
}

}  // namespace gridcurb
