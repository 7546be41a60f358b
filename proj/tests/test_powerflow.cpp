#include <random>

#include "gridcurb/powerflow.hpp"
#include "support.hpp"

using namespace gridcurb;

namespace {

double relative_jacobian_error(const PowerFlowProblem& prob, const std::vector<Complex>& v) {
    const Eigen::VectorXd x = prob.state(v);
    const Eigen::MatrixXd j = prob.jacobian(v);
    const double h = 1e-7;
    double worst = 0.0;
    for (Eigen::Index c = 0; c < x.size(); ++c) {
        Eigen::VectorXd up = x, dn = x;
        up[c] += h;
        dn[c] -= h;
        const Eigen::VectorXd fd = (prob.mismatch(prob.voltages(up, v)) - prob.mismatch(prob.voltages(dn, v))) / (2 * h);
        for (Eigen::Index r = 0; r < x.size(); ++r)
            worst = std::max(worst, std::abs(j(r, c) - fd[r]) / std::max(1.0, std::abs(fd[r])));
    }
    return worst;
}

std::vector<Complex> perturbed(const std::vector<Complex>& v, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dm(-0.05, 0.05), da(-0.2, 0.2);
    std::vector<Complex> out;
    for (const auto& z : v) out.push_back(std::polar(std::abs(z) * (1 + dm(rng)), std::arg(z) + da(rng)));
    return out;
}

}  // namespace

TEST_CASE("base case converges to a balanced solution") {
    const Network n = testing::wscc9();
    const auto sol = solve_power_flow(n);
    REQUIRE(sol.converged());
    CHECK(sol.mismatch < 1e-8);
    CHECK(kcl_residual(sol, n) < 1e-6);
    CHECK(sol.vm_at(1) == doctest::Approx(*n.bus(1).v_setpoint).epsilon(1e-12));
    CHECK(sol.va_deg_at(1) == 0.0);

    // Generation equals load plus branch losses.
    Complex gen = 0, losses = 0, load = 0;
    for (const auto& g : sol.generation) gen += g;
    for (const auto& f : sol.flows) losses += f.losses();
    for (const auto& l : n.loads) load += Complex(l.p_req, l.q_req);
    CHECK(std::abs(gen - load - losses) < 1e-6);
}

TEST_CASE("apparent power follows from P and Q") {
    const auto sol = solve_power_flow(testing::wscc9());
    for (const auto& f : sol.flows) {
        CHECK(f.apparent_from() * f.apparent_from() ==
              doctest::Approx(f.p_from() * f.p_from() + f.q_from() * f.q_from()).epsilon(1e-12));
        CHECK(f.apparent_to() == doctest::Approx(std::hypot(f.p_to(), f.q_to())).epsilon(1e-12));
    }
}

TEST_CASE("flow_from is orientation aware") {
    const auto sol = solve_power_flow(testing::wscc9());
    CHECK(sol.flow_from(8, 9) == sol.flow({8, 9})->s_from);
    const Complex a = sol.flow_from(9, 8), b = sol.flow_from(8, 9);
    CHECK(std::abs(a + b - sol.flow({8, 9})->losses()) < 1e-12);
}

TEST_CASE("warm start from a converged solution needs at most two iterations") {
    const Network n = testing::wscc9();
    const auto sol = solve_power_flow(n);
    PowerFlowOptions opt;
    opt.warm_start = sol.voltages();
    const auto again = solve_power_flow(n, opt);
    CHECK(again.converged());
    CHECK(again.iterations <= 2);
}

TEST_CASE("zero load without charging gives a flat profile and no flows") {
    Network n = testing::wscc9();
    n.loads.clear();
    for (auto& br : n.branches) br.b = 0.0;
    for (auto& g : n.generators) g.p_setpoint = 0.0;
    for (auto& b : n.buses)
        if (b.v_setpoint) b.v_setpoint = 1.0;
    const auto sol = solve_power_flow(n);
    REQUIRE(sol.converged());
    for (std::size_t k = 0; k < sol.vm.size(); ++k) {
        CHECK(sol.vm[k] == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(std::abs(sol.va[k]) < 1e-8);
    }
    for (const auto& f : sol.flows) CHECK(std::abs(f.s_from) < 1e-8);
}

TEST_CASE("jacobian matches finite differences") {
    const Network n = testing::wscc9();
    const PowerFlowProblem prob(n);
    std::mt19937_64 rng(3);
    const auto base = solve_power_flow(n).voltages();
    CHECK(relative_jacobian_error(prob, base) < 1e-6);
    for (int k = 0; k < 5; ++k) CHECK(relative_jacobian_error(prob, perturbed(base, rng)) < 1e-6);
}

TEST_CASE("jacobian matches finite differences with devices") {
    Network n = testing::wscc9();
    n.facts_devices.push_back(testing::device(DeviceKind::Upfc, 9, 8));
    n.facts_devices.back().controls = {0.08, 1.1, 0.3};
    n.facts_devices.push_back(testing::device(DeviceKind::Sssc, 5, 4));
    n.facts_devices.back().controls = {0.05, -2.0, 0.0};
    n.facts_devices.push_back(testing::device(DeviceKind::Statcom, 6, 5));
    n.facts_devices.back().controls = {0.0, 0.0, -0.4};
    const PowerFlowProblem prob(n);
    std::mt19937_64 rng(5);
    const auto base = prob.flat_start();
    for (int k = 0; k < 5; ++k) CHECK(relative_jacobian_error(prob, perturbed(base, rng)) < 1e-6);
}

TEST_CASE("devices at zero control leave the solution unchanged") {
    const Network n = testing::wscc9();
    Network m = n;
    for (auto kind : {DeviceKind::Upfc, DeviceKind::Sssc, DeviceKind::Statcom})
        m.facts_devices.push_back(testing::device(kind, 8, 9));
    const auto a = solve_power_flow(n), b = solve_power_flow(m);
    REQUIRE(a.converged());
    REQUIRE(b.converged());
    for (std::size_t k = 0; k < a.vm.size(); ++k) {
        CHECK(std::abs(a.vm[k] - b.vm[k]) < 1e-10);
        CHECK(std::abs(a.va[k] - b.va[k]) < 1e-10);
    }
}

TEST_CASE("active devices keep bus balance") {
    Network n = testing::wscc9();
    n.facts_devices.push_back(testing::device(DeviceKind::Upfc, 9, 8));
    n.facts_devices.back().controls = {0.05, 0.7, 0.2};
    const auto sol = solve_power_flow(n);
    REQUIRE(sol.converged());
    CHECK(kcl_residual(sol, n) < 1e-6);
}

TEST_CASE("outage of 4-9 reports a best iterate when no solution exists") {
    const Network n = apply_outage(testing::wscc9(), {4, 9});
    const auto sol = solve_power_flow(n);
    CHECK(sol.bus_ids.size() == 9);
    CHECK(sol.vm.size() == 9);
    CHECK_FALSE(sol.mismatch_history.empty());
    if (!sol.converged()) {
        double best = sol.mismatch_history.front();
        for (double m : sol.mismatch_history) best = std::min(best, m);
        CHECK(sol.mismatch == doctest::Approx(best));
    }
}
