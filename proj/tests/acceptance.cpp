// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "gridcurb/caseio.hpp"
#include "oracles.hpp"

using namespace gridcurb;

namespace {

std::string data_file(const std::string& name) { return std::string(GRIDCURB_DATA_DIR) + "/" + name; }

std::string f4(double v) { return format_fixed(v); }

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

struct Runner {
    int failures = 0;

    void run(int id, const char* title, const std::function<void(Verdict&)>& body, double time_limit = 0.0) {
        Verdict v;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            body(v);
        } catch (const std::exception& e) {
            v.require(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (time_limit > 0.0) v.require(secs < time_limit, "runtime < " + std::to_string(time_limit) + " s");
        failures += !v.pass;
        std::printf("[%s] %d %s:%s (%.3f s)\n", v.pass ? "PASS" : "FAIL", id, title, v.detail.str().c_str(), secs);
        std::fflush(stdout);
    }
};

bool within(double value, double target, double tol) { return std::abs(value - target) <= tol; }

SweepResult run_spec(const std::string& name, const StudyOptions& opt = {}) {
    const StudySpec spec = load_study(data_file(name));
    const Network base = load_case(data_file(spec.case_path)).network;
    return run_study(base, spec, opt);
}

std::string csv(const SweepResult& sw) {
    ReportOptions o;
    o.format = ReportFormat::Csv;
    return emit_report(sw, o);
}

const CurtailmentResult& cell(const SweepResult& sw, const std::string& name) {
    const CellResult* c = sw.find(name);
    if (!c || !c->curtailment) throw std::runtime_error("no result for scenario '" + name + "'");
    return *c->curtailment;
}

}  // namespace

int main() {
    Runner r;
    const Network wscc9 = load_case(data_file("wscc9.case")).network;
    StabilityReport base_indices;

    r.run(1, "base-case snapshot", [&](Verdict& v) {
        const auto sol = solve_power_flow(wscc9);
        base_indices = compute_l_index(partition(build_ybus(wscc9), wscc9), sol);
        const double l5 = *base_indices.index_at(5), l7 = *base_indices.index_at(7), l9 = *base_indices.index_at(9);
        const double v9 = sol.vm_at(9);
        v.detail << " L5 " << f4(l5) << " L7 " << f4(l7) << " L9 " << f4(l9) << " V9 " << f4(v9);
        v.require(sol.converged(), "power flow converged");
        v.require(within(l5, 0.1471, 0.02), "L5 within 0.02 of 0.1471");
        v.require(within(l7, 0.1169, 0.02), "L7 within 0.02 of 0.1169");
        v.require(within(l9, 0.1957, 0.02), "L9 within 0.02 of 0.1957");
        v.require(within(v9, 0.9468, 0.01), "V9 within 0.01 of 0.9468");
    }, 1.0);

    r.run(2, "contingency collapse, line 4-9 out", [&](Verdict& v) {
        const Network net = apply_outage(wscc9, {4, 9});
        const auto sol = solve_power_flow(net);
        const auto rep = compute_l_index(partition(build_ybus(net), net), sol);
        const double v9 = sol.vm_at(9), l9 = *rep.index_at(9), q89 = sol.flow_from(8, 9).imag();
        const double base_max = base_indices.l_index.empty() ? 0.0 : base_indices.max_index();
        v.detail << " power flow " << to_string(sol.status) << " (best iterate, mismatch " << sol.mismatch
                 << ") V9 " << f4(v9) << " L9 " << f4(l9) << " Q8-9 " << f4(q89) << " max base L " << f4(base_max);
        v.require(v9 >= 0.55 && v9 <= 0.68, "V9 in [0.55, 0.68]");
        v.require(l9 >= 0.9, "L9 >= 0.9");
        v.require(q89 > 1.0, "Q8-9 > 1.0");
        v.require(rep.max_index() == l9, "L9 is the largest index");
        v.require(!base_indices.l_index.empty() && l9 - base_max >= 0.7, "L9 exceeds every base index by 0.7");
    }, 1.0);

    SweepResult placement;
    r.run(3, "no-FACTS curtailment", [&](Verdict& v) {
        StudySpec spec = load_study(data_file("table4.study"));
        std::erase_if(spec.scenarios, [](const Scenario& s) { return s.name != "none"; });
        const Network base = load_case(data_file(spec.case_path)).network;
        const auto sw = run_study(base, spec);
        const auto& res = cell(sw, "none");
        const double total = res.total_curtailment, at5 = res.curtailment_at(5);
        v.detail << " status " << to_string(res.status) << " total " << f4(total) << " at bus 5 " << f4(at5);
        v.require(res.optimal(), "optimal");
        v.require(within(total, 0.3592, 0.03), "total within 0.03 of 0.3592");
        v.require(at5 >= 0.9 * total, "at least 90% of the curtailment at bus 5");
    }, 10.0);

    r.run(4, "UPFC relief ordering", [&](Verdict& v) {
        placement = run_spec("table4.study");
        const auto& none = cell(placement, "none");
        const auto& single = cell(placement, "5-6 upfc");
        const auto& both = cell(placement, "5-6 & 4-5 upfc");
        const double c0 = none.total_curtailment, c1 = single.total_curtailment, c2 = both.total_curtailment;
        v.detail << " no FACTS " << f4(c0) << " 5-6 " << f4(c1) << " 5-6 & 4-5 " << f4(c2);
        v.require(none.optimal() && single.optimal() && both.optimal(), "all optimal");
        v.require(c2 < c1 && c1 < c0, "c(5-6 & 4-5) < c(5-6) < c(no FACTS)");
        v.require(c2 <= 0.06, "c(5-6 & 4-5) <= 0.06");
        v.require(c1 <= 0.14, "c(5-6) <= 0.14");
    });

    SweepResult lcrit_plain;
    r.run(5, "L_crit sweep without UPFC", [&](Verdict& v) {
        lcrit_plain = run_spec("table5.study");
        const double want_c[] = {0.2842, 0.1547, 0.0211};
        const double want_v[] = {0.9017, 0.8514, 0.8041};
        const char* names[] = {"lcrit 0.3", "lcrit 0.4", "lcrit 0.5"};
        double prev = 1e9;
        for (int k = 0; k < 3; ++k) {
            const auto& res = cell(lcrit_plain, names[k]);
            const double c = res.total_curtailment, v9 = res.vm_at(9);
            v.detail << " " << names[k] << ": curtailment " << f4(c) << " V9 " << f4(v9) << ";";
            v.require(res.optimal(), std::string(names[k]) + " optimal");
            v.require(c < prev, std::string(names[k]) + " curtailment strictly decreasing");
            v.require(within(c, want_c[k], 0.05), std::string(names[k]) + " curtailment within 0.05 of " + f4(want_c[k]));
            v.require(within(v9, want_v[k], 0.02), std::string(names[k]) + " V9 within 0.02 of " + f4(want_v[k]));
            prev = c;
        }
    });

    SweepResult lcrit_upfc;
    r.run(6, "UPFC removes contingency curtailment", [&](Verdict& v) {
        lcrit_upfc = run_spec("table6.study");
        for (const char* name : {"lcrit 0.3", "lcrit 0.4", "lcrit 0.5"}) {
            const auto& res = cell(lcrit_upfc, name);
            const double c = res.total_curtailment, v9 = res.vm_at(9), l9 = *res.stability.index_at(9);
            v.detail << " " << name << ": curtailment " << f4(c) << " V9 " << f4(v9) << " L9 " << f4(l9) << ";";
            v.require(res.optimal(), std::string(name) + " optimal");
            v.require(c <= 1e-6, std::string(name) + " curtailment <= 1e-6");
            v.require(v9 >= 0.97, std::string(name) + " V9 >= 0.97");
        }
        const auto& first = cell(lcrit_upfc, "lcrit 0.3");
        bool binding = false;
        for (const auto* c : first.binding()) binding |= c->kind == ConstraintKind::StabilityIndex && c->name == "L 9";
        v.require(binding, "L9 constraint binding at L_crit 0.3");
        v.require(within(*first.stability.index_at(9), 0.3, 0.005), "L9 within 0.005 of 0.3 at L_crit 0.3");
    });

    r.run(7, "injection model matches the circuit oracle", [&](Verdict& v) {
        std::mt19937_64 rng(424242);
        std::uniform_real_distribution<double> mag(0.8, 1.1), ang(-std::numbers::pi, std::numbers::pi),
            vt(0.0, 0.2), iq(-1.0, 1.0), r_(0.0, 0.05), x_(0.02, 0.3);
        const int draws = 1000;
        double worst = 0.0;
        for (int n = 0; n < draws; ++n) {
            FactsDevice d;
            d.kind = static_cast<DeviceKind>(n % 3);
            d.controls = {vt(rng), ang(rng), iq(rng)};
            const Complex y = 1.0 / Complex(r_(rng), x_(rng));
            const Complex vi = std::polar(mag(rng), 0.5 * ang(rng)), vj = std::polar(mag(rng), 0.5 * ang(rng));
            const auto a = compute_injections(d, y, vi, vj).as_array();
            const auto b = oracle_injections(d, y, vi, vj).as_array();
            for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
        }
        v.detail << " " << draws << " states, worst componentwise gap " << worst;
        v.require(worst <= 1e-8, "gap <= 1e-8");
    });

    r.run(8, "property suite", [&](Verdict& v) {
        // Zero-control neutrality, power flow.
        Network with_devices = wscc9;
        for (auto kind : {DeviceKind::Upfc, DeviceKind::Sssc, DeviceKind::Statcom}) {
            FactsDevice d;
            d.kind = kind;
            d.from_bus = 8;
            d.to_bus = 9;
            with_devices.facts_devices.push_back(d);
        }
        const auto pf0 = solve_power_flow(wscc9), pf1 = solve_power_flow(with_devices);
        double pf_gap = 0.0;
        for (std::size_t k = 0; k < pf0.vm.size(); ++k)
            pf_gap = std::max({pf_gap, std::abs(pf0.vm[k] - pf1.vm[k]), std::abs(pf0.va[k] - pf1.va[k])});
        v.detail << " pf neutrality " << pf_gap << ";";
        v.require(pf_gap <= 1e-6, "power flow neutrality to 1e-6");

        // Zero-control neutrality, OPF: bounds pin every control at zero.
        const StudySpec spec4 = load_study(data_file("table4.study"));
        const Network cur = load_case(data_file(spec4.case_path)).network;
        Network pinned = cur;
        for (auto d : with_devices.facts_devices) {
            d.v_t_limits = {0.0, 0.0};
            d.i_q_limits = {0.0, 0.0};
            pinned.facts_devices.push_back(d);
        }
        const auto opf0 = solve_curtailment(cur, spec4.lcrit), opf1 = solve_curtailment(pinned, spec4.lcrit);
        const double opf_gap = std::abs(opf0.total_curtailment - opf1.total_curtailment);
        v.detail << " opf neutrality " << opf_gap << ";";
        v.require(opf0.optimal() && opf1.optimal() && opf_gap <= 1e-6, "OPF neutrality to 1e-6");

        // KCL, power factor and margins on every converged solution.
        double kcl = std::max({kcl_residual(pf0, wscc9), kcl_residual(pf1, with_devices)});
        double pf_ratio = 0.0, margin = -1.0;
        int solutions = 2, cells = 2;
        const std::pair<const char*, const SweepResult*> studies[] = {
            {"table4.study", &placement}, {"table5.study", &lcrit_plain}, {"table6.study", &lcrit_upfc}};
        for (const auto& [file, sw] : studies) {
            const StudySpec spec = load_study(data_file(file));
            const Network base = load_case(data_file(spec.case_path)).network;
            for (const auto& c : sw->cells) {
                ++cells;
                if (!c.curtailment || !c.curtailment->optimal()) continue;
                const Network net = scenario_network(base, spec, c.scenario);
                kcl = std::max(kcl, testing::opf_kcl_residual(net, *c.curtailment));
                pf_ratio = std::max(pf_ratio, testing::power_factor_error(*c.curtailment));
                margin = std::max(margin, testing::margin_excess(net, scenario_lcrit(spec, c.scenario), *c.curtailment));
                ++solutions;
            }
        }
        v.detail << " " << solutions << " solutions: kcl " << kcl << " pf ratio " << pf_ratio << " L excess " << margin
                 << ";";
        v.require(solutions == cells, "every study cell solved");
        v.require(kcl < 1e-6, "KCL residual < 1e-6");
        v.require(pf_ratio <= 1e-8, "power factor ratio to 1e-8");
        v.require(margin <= 1e-6, "L <= L_crit + 1e-6");

        // Analytic derivatives at a perturbed point of the contingency problem.
        Network dev = apply_outage(cur, {4, 9});
        FactsDevice upfc;
        upfc.from_bus = 9;
        upfc.to_bus = 8;
        dev.facts_devices.push_back(upfc);
        FactsDevice statcom = upfc;
        statcom.kind = DeviceKind::Statcom;
        statcom.from_bus = 5;
        statcom.to_bus = 6;
        dev.facts_devices.push_back(statcom);
        const CurtailmentProblem prob(dev, LcritMap{{}, 0.3});
        const auto start = solve_power_flow(wscc9);
        Eigen::VectorXd x = prob.pack(start.voltages(), start.generation,
                                      std::vector<double>(prob.curtailable_loads().size(), 0.9),
                                      {{0.05, 0.8, 0.1}, {0.0, 0.0, -0.2}});
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> u(-0.05, 0.05);
        for (Eigen::Index k = 0; k < x.size(); ++k) x[k] += u(rng);
        const double grad = testing::derivative_error(prob, x);
        v.detail << " derivative gap " << grad << ";";
        v.require(grad < 1e-6, "derivatives within 1e-6 of central differences");

        // No-load indices.
        Network idle = wscc9;
        idle.loads.clear();
        for (auto& br : idle.branches) br.b = 0.0;
        for (auto& g : idle.generators) g.p_setpoint = 0.0;
        for (auto& b : idle.buses)
            if (b.v_setpoint) b.v_setpoint = 1.0;
        const auto idle_rep = compute_l_index(partition(build_ybus(idle), idle), solve_power_flow(idle));
        v.detail << " no-load max L " << idle_rep.max_index();
        v.require(idle_rep.max_index() <= 1e-10, "no-load L <= 1e-10");
    });

    r.run(9, "deterministic study output", [&](Verdict& v) {
        for (const char* name : {"table4.study", "table6.study"}) {
            StudyOptions serial, parallel;
            serial.threads = 1;
            parallel.threads = 4;
            const std::string a = csv(run_spec(name, serial)), b = csv(run_spec(name, parallel)),
                              c = csv(run_spec(name, parallel));
            v.detail << " " << name << " " << a.size() << " bytes;";
            v.require(a == b && b == c, std::string(name) + " byte-identical CSV");
        }
    });

    std::printf("%d of 9 criteria failed\n", r.failures);
    return r.failures == 0 ? 0 : 1;
}
