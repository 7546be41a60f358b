#include <Eigen/Dense>

#include "gridcurb/lindex.hpp"
#include "support.hpp"

using namespace gridcurb;

namespace {

StabilityReport indices(const Network& n, const PowerFlowSolution& sol) {
    return compute_l_index(partition(build_ybus(n), n), sol);
}

// Dense reference: F from an explicit inverse of the load block.
std::vector<double> dense_l(const Network& n, const PowerFlowSolution& sol) {
    const Eigen::MatrixXcd y = build_ybus(n).dense();
    std::vector<Eigen::Index> load, gen;
    for (std::size_t k = 0; k < sol.bus_ids.size(); ++k)
        (n.bus(sol.bus_ids[k]).is_generator_bus() ? gen : load).push_back(static_cast<Eigen::Index>(k));
    Eigen::MatrixXcd yll(load.size(), load.size()), ylg(load.size(), gen.size());
    for (std::size_t r = 0; r < load.size(); ++r) {
        for (std::size_t c = 0; c < load.size(); ++c) yll(r, c) = y(load[r], load[c]);
        for (std::size_t c = 0; c < gen.size(); ++c) ylg(r, c) = y(load[r], gen[c]);
    }
    const Eigen::MatrixXcd f = -yll.inverse() * ylg;
    const auto v = sol.voltages();
    std::vector<double> out;
    for (std::size_t r = 0; r < load.size(); ++r) {
        Complex acc = 0;
        for (std::size_t c = 0; c < gen.size(); ++c) acc += f(r, c) * v[gen[c]];
        out.push_back(std::abs(1.0 - acc / v[load[r]]));
    }
    return out;
}

}  // namespace

TEST_CASE("indices agree with a dense reference") {
    const Network n = testing::wscc9();
    const auto sol = solve_power_flow(n);
    const auto rep = indices(n, sol);
    const auto ref = dense_l(n, sol);
    REQUIRE(rep.l_index.size() == ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k) CHECK(std::abs(rep.l_index[k] - ref[k]) < 1e-10);
    CHECK(rep.participation.rows() == 6);
    CHECK(rep.participation.cols() == 3);
    CHECK(rep.max_index() == doctest::Approx(*std::max_element(ref.begin(), ref.end())));
}

TEST_CASE("no load gives zero indices") {
    Network n = testing::wscc9();
    n.loads.clear();
    for (auto& br : n.branches) br.b = 0.0;
    for (auto& g : n.generators) g.p_setpoint = 0.0;
    for (auto& b : n.buses)
        if (b.v_setpoint) b.v_setpoint = 1.0;
    const auto rep = indices(n, solve_power_flow(n));
    for (double l : rep.l_index) CHECK(l < 1e-10);
}

TEST_CASE("indices ignore a common angle rotation") {
    const Network n = testing::wscc9();
    const auto sol = solve_power_flow(n);
    const PartitionedY p = partition(build_ybus(n), n);
    auto v = sol.voltages();
    const auto a = compute_l_index(p, sol.bus_ids, v);
    for (auto& z : v) z *= std::polar(1.0, 0.7);
    const auto b = compute_l_index(p, sol.bus_ids, v);
    for (std::size_t k = 0; k < a.l_index.size(); ++k) CHECK(std::abs(a.l_index[k] - b.l_index[k]) < 1e-12);
}

TEST_CASE("indices rise with uniform load stress") {
    std::vector<double> prev;
    for (double k : {1.0, 1.1, 1.2}) {
        Network n = testing::wscc9();
        for (auto& l : n.loads) {
            l.p_req *= k;
            l.q_req *= k;
        }
        for (auto& g : n.generators) g.p_setpoint *= k;
        const auto sol = solve_power_flow(n);
        REQUIRE(sol.converged());
        const auto rep = indices(n, sol);
        if (!prev.empty())
            for (std::size_t j = 0; j < prev.size(); ++j) CHECK(rep.l_index[j] > prev[j]);
        prev = rep.l_index;
    }
}

TEST_CASE("participation depends on topology only") {
    Network a = testing::wscc9();
    Network b = a;
    b.loads[0].p_req *= 1.5;
    b.generators[1].p_setpoint = 1.0;
    const auto fa = participation_matrix(partition(build_ybus(a), a));
    const auto fb = participation_matrix(partition(build_ybus(b), b));
    CHECK((fa - fb).cwiseAbs().maxCoeff() == 0.0);

    const Network c = apply_outage(a, {4, 9});
    const auto fc = participation_matrix(partition(build_ybus(c), c));
    CHECK((fa - fc).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("margin check") {
    const Network n = testing::wscc9();
    const auto rep = indices(n, solve_power_flow(n));
    CHECK(check_margin(rep, LcritMap{{}, 0.5}).empty());
    CHECK(check_margin(rep, LcritMap{}).empty());

    const auto v = check_margin(rep, LcritMap{{{9, 0.1}}, std::nullopt});
    REQUIRE(v.size() == 1);
    CHECK(v[0].bus == 9);
    CHECK(v[0].excess() == doctest::Approx(*rep.index_at(9) - 0.1));

    CHECK(check_margin(rep, LcritMap{{}, 0.0}).size() == 6);
}

TEST_CASE("lcrit map lookup") {
    LcritMap m{{{5, 0.1}}, 0.3};
    CHECK(m.at(5) == 0.1);
    CHECK(m.at(9) == 0.3);
    m.default_value.reset();
    CHECK_FALSE(m.at(9));
}
