#include <random>

#include "gridcurb/curtailopf.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace gridcurb;
using Eigen::VectorXd;

namespace {

// L_crit of the placement and outage studies.
const LcritMap kPlacementLcrit{{{5, 0.1}, {7, 0.3}, {9, 0.3}}, std::nullopt};
const LcritMap kOutageLcrit{{{5, 0.3}, {7, 0.3}, {9, 0.3}}, std::nullopt};

Network placement_network() { return testing::wscc9_curtailment(); }

Network outage_network() { return apply_outage(testing::wscc9_curtailment(), {4, 9}); }

Network with_all_devices(Network n) {
    n.facts_devices.push_back(testing::device(DeviceKind::Upfc, 9, 8));
    n.facts_devices.push_back(testing::device(DeviceKind::Sssc, 5, 4));
    n.facts_devices.push_back(testing::device(DeviceKind::Statcom, 6, 5));
    return n;
}

void check_derivatives(const CurtailmentProblem& p, const VectorXd& x) { CHECK(testing::derivative_error(p, x) < 1e-6); }

// Rebuilds the network the solution describes and checks it independently.
void check_solution(const Network& net, const LcritMap& lcrit, const CurtailmentResult& r) {
    REQUIRE(r.optimal());

    const Network served = testing::served_network(net, r);
    const PowerFlowSolution sol = testing::as_power_flow(r);
    CHECK(kcl_residual(sol, served) < 1e-6);

    for (const auto& l : r.loads) {
        CHECK(l.served_fraction >= -1e-8);
        CHECK(l.served_fraction <= 1 + 1e-8);
    }
    CHECK(testing::power_factor_error(r) < 1e-8);
    CHECK(testing::margin_excess(net, lcrit, r) <= 1e-6);

    // Thermal limits at both ends.
    for (const auto& f : branch_flows(sol, served)) {
        if (!f.in_service) continue;
        const auto& br = served.branches[*served.find_branch({f.from_bus, f.to_bus})];
        CHECK(f.apparent_from() <= br.rating_mva / net.base_mva + 1e-6);
        CHECK(f.apparent_to() <= br.rating_mva / net.base_mva + 1e-6);
    }

    // Device limits on injections recomputed from the phasors.
    const auto v = r.voltages();
    for (const auto& d : r.devices) {
        const Complex vi = v[sol.index_of(d.device.from_bus)], vj = v[sol.index_of(d.device.to_bus)];
        const auto inj = compute_injections(d.device, net.device_admittance(d.device), vi, vj);
        CHECK(injection_limits_ok(d.device, inj, 1e-6).empty());
        CHECK(d.device.v_t_limits.contains(d.device.controls.v_t, 1e-8));
        CHECK(d.device.i_q_limits.contains(d.device.controls.i_q, 1e-8));
    }
}

}  // namespace

TEST_CASE("problem derivatives match central differences") {
    const Network net = with_all_devices(outage_network());
    const CurtailmentProblem p(net, kOutageLcrit);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto pf = solve_power_flow(testing::wscc9());
    std::vector<double> served(p.curtailable_loads().size(), 0.8);
    std::vector<DeviceControls> ctl{{0.05, 1.0, 0.1}, {0.07, -2.0, 0.0}, {0.0, 0.0, -0.2}};
    const VectorXd x0 = p.pack(pf.voltages(), pf.generation, served, ctl);
    check_derivatives(p, x0);
    for (int k = 0; k < 3; ++k) {
        VectorXd x = x0;
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += 0.05 * u(rng);
        check_derivatives(p, x);
    }
}

TEST_CASE("variable naming covers every variable") {
    const CurtailmentProblem p(with_all_devices(outage_network()), kOutageLcrit);
    for (Eigen::Index k = 0; k < p.num_variables(); ++k) CHECK_FALSE(p.variable_name(k).empty());
    CHECK(p.inequality_names().size() == static_cast<std::size_t>(p.inequalities(VectorXd::Zero(p.num_variables())).size()));
}

TEST_CASE("a loose margin needs no curtailment") {
    const Network net = testing::wscc9();
    const auto r = solve_curtailment(net, LcritMap{{}, 1.0});
    check_solution(net, LcritMap{{}, 1.0}, r);
    CHECK(r.total_curtailment < 1e-6);
    for (const auto& l : r.loads) CHECK(l.served_fraction == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("outage case curtails to restore the margin") {
    const Network net = outage_network();
    const auto r = solve_curtailment(net, kOutageLcrit);
    check_solution(net, kOutageLcrit, r);
    CHECK(r.total_curtailment > 0.01);
    CHECK(r.stability.index_at(9).value() == doctest::Approx(0.3).epsilon(1e-4));

    const std::string kkt = kkt_report(r);
    CHECK(kkt.find("L 9") != std::string::npos);
    bool l9_binding = false;
    for (const auto* c : r.binding()) l9_binding |= c->kind == ConstraintKind::StabilityIndex && c->name == "L 9";
    CHECK(l9_binding);
}

TEST_CASE("stricter margins never reduce curtailment") {
    const Network net = outage_network();
    double prev = -1.0;
    for (double lc : {0.5, 0.4, 0.3}) {
        LcritMap m = kOutageLcrit;
        m.per_bus[9] = lc;
        const auto r = solve_curtailment(net, m);
        check_solution(net, m, r);
        CHECK(r.total_curtailment >= prev - 1e-6);
        prev = r.total_curtailment;
    }
}

TEST_CASE("placement case solutions satisfy every constraint") {
    const Network base = placement_network();
    for (auto kind : {DeviceKind::Statcom, DeviceKind::Sssc, DeviceKind::Upfc}) {
        Network net = base;
        net.facts_devices.push_back(testing::device(kind, 5, 6));
        const auto r = solve_curtailment(net, kPlacementLcrit);
        check_solution(net, kPlacementLcrit, r);
    }
}

TEST_CASE("a device can only help") {
    const Network base = placement_network();
    const auto none = solve_curtailment(base, kPlacementLcrit);
    REQUIRE(none.optimal());
    for (auto [a, b] : {std::pair{9, 8}, {5, 6}, {5, 4}}) {
        Network net = base;
        net.facts_devices.push_back(testing::device(DeviceKind::Upfc, a, b));
        const auto r = solve_curtailment(net, kPlacementLcrit);
        REQUIRE(r.optimal());
        CHECK(r.total_curtailment <= none.total_curtailment + 1e-6);
    }
}

TEST_CASE("a device pinned at zero output changes nothing") {
    const Network base = placement_network();
    const auto none = solve_curtailment(base, kPlacementLcrit);
    Network net = base;
    for (auto kind : {DeviceKind::Statcom, DeviceKind::Sssc, DeviceKind::Upfc}) {
        FactsDevice d = testing::device(kind, 8, 9);
        d.v_t_limits = {0.0, 0.0};
        d.i_q_limits = {0.0, 0.0};
        net.facts_devices.push_back(d);
    }
    const auto r = solve_curtailment(net, kPlacementLcrit);
    REQUIRE(r.optimal());
    CHECK(r.total_curtailment == doctest::Approx(none.total_curtailment).epsilon(1e-6));
}

TEST_CASE("identical inputs give identical results") {
    Network net = placement_network();
    net.facts_devices.push_back(testing::device(DeviceKind::Upfc, 9, 8));
    const auto a = solve_curtailment(net, kPlacementLcrit);
    const auto b = solve_curtailment(net, kPlacementLcrit);
    CHECK(a.total_curtailment == b.total_curtailment);
    CHECK(a.vm == b.vm);
    CHECK(a.chosen_start == b.chosen_start);
    CHECK(a.starts == 3);
}

TEST_CASE("an unreachable margin is reported, not hidden") {
    const Network net = testing::wscc9();
    const auto r = solve_curtailment(net, LcritMap{{}, 1e-4});
    CHECK_FALSE(r.optimal());
    CHECK(r.max_violation > 1e-6);
    CHECK_FALSE(r.message.empty());
}

TEST_CASE("contingency wrapper refuses islanding outages") {
    CHECK_THROWS_AS(solve_contingency_curtailment(testing::wscc9(), {1, 4}, kOutageLcrit), IslandingError);
    CHECK_THROWS_AS(solve_contingency_curtailment(testing::wscc9(), {2, 9}, kOutageLcrit), UnknownBranchError);
    const auto r = solve_contingency_curtailment(testing::wscc9_curtailment(), {4, 9}, kOutageLcrit);
    CHECK(r.optimal());
}

TEST_CASE("invalid networks are rejected up front") {
    Network n = testing::wscc9();
    n.buses[1].kind = BusKind::Slack;
    CHECK_THROWS_AS(CurtailmentProblem(n, kOutageLcrit), NetworkError);
}
