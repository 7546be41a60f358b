#include "gridcurb/admittance.hpp"
#include "support.hpp"

using namespace gridcurb;

TEST_CASE("two-bus reactance line") {
    const YBus y = build_ybus(testing::two_bus(0.0, 0.1, 0.0));
    CHECK(std::abs(y.at(1, 1) - Complex(0, -10)) < 1e-12);
    CHECK(std::abs(y.at(1, 2) - Complex(0, 10)) < 1e-12);
    CHECK(std::abs(y.at(2, 1) - Complex(0, 10)) < 1e-12);
    CHECK(std::abs(y.at(2, 2) - Complex(0, -10)) < 1e-12);
}

TEST_CASE("line charging lands on the diagonal only") {
    const YBus y = build_ybus(testing::two_bus(0.01, 0.1, 0.2));
    const Complex ys = 1.0 / Complex(0.01, 0.1);
    CHECK(std::abs(y.at(1, 1) - (ys + Complex(0, 0.1))) < 1e-12);
    CHECK(std::abs(y.at(1, 2) + ys) < 1e-12);
}

TEST_CASE("wscc9 transformer entry") {
    const YBus y = build_ybus(testing::wscc9());
    CHECK(std::abs(y.at(1, 4)) == doctest::Approx(1.0 / 0.0576).epsilon(1e-9));
    CHECK(std::abs(y.at(1, 4)) == doctest::Approx(17.3611).epsilon(1e-5));
}

TEST_CASE("ybus is symmetric and rows sum to the shunt charging") {
    const Network n = testing::wscc9();
    const Eigen::MatrixXcd y = build_ybus(n).dense();
    CHECK((y - y.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    const auto ids = sorted_bus_ids(n);
    for (std::size_t k = 0; k < ids.size(); ++k) {
        double charging = 0.0;
        for (const auto& br : n.branches)
            if (br.from_bus == ids[k] || br.to_bus == ids[k]) charging += br.b / 2;
        CHECK(std::abs(y.row(static_cast<Eigen::Index>(k)).sum() - Complex(0, charging)) < 1e-9);
    }
}

TEST_CASE("an outage changes exactly the four entries of its branch") {
    const Network n = testing::wscc9();
    const Eigen::MatrixXcd base = build_ybus(n).dense();
    for (const auto& br : n.branches) {
        Network m = n;
        m.branches[*m.find_branch({br.from_bus, br.to_bus})].in_service = false;
        const Eigen::MatrixXcd out = build_ybus(m).dense();
        int changed = 0;
        for (Eigen::Index i = 0; i < base.rows(); ++i)
            for (Eigen::Index j = 0; j < base.cols(); ++j) changed += std::abs(base(i, j) - out(i, j)) > 1e-12;
        CHECK(changed == 4);
    }
    const YBus out = build_ybus(apply_outage(n, {4, 9}));
    CHECK(out.at(4, 9) == Complex(0, 0));
}

TEST_CASE("partition splits load and generator buses") {
    const Network n = testing::wscc9();
    const YBus y = build_ybus(n);
    const PartitionedY p = partition(y, n);
    CHECK(p.y_ll.rows() == 6);
    CHECK(p.y_ll.cols() == 6);
    CHECK(p.y_lg.rows() == 6);
    CHECK(p.y_lg.cols() == 3);
    CHECK(p.y_gl.rows() == 3);
    CHECK(p.y_gg.cols() == 3);
    CHECK(p.load_bus_ids == std::vector<int>{4, 5, 6, 7, 8, 9});
    CHECK(p.generator_bus_ids == std::vector<int>{1, 2, 3});
    const Eigen::MatrixXcd back(p.reassemble());
    CHECK((back - y.dense()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(std::abs(Complex(p.y_lg.coeff(0, 0)) - y.at(4, 1)) == 0.0);
}

TEST_CASE("two-bus partition has one load bus") {
    const Network n = testing::two_bus(0.0, 0.1, 0.0, 0.5, 0.1);
    const PartitionedY p = partition(build_ybus(n), n);
    CHECK(p.y_ll.rows() == 1);
    CHECK(p.y_ll.cols() == 1);
    CHECK(p.y_lg.cols() == 1);
}

TEST_CASE("partition needs at least one load bus") {
    Network n = testing::two_bus(0.0, 0.1, 0.0);
    n.buses[1].kind = BusKind::PV;
    n.buses[1].v_setpoint = 1.0;
    CHECK_THROWS_AS(partition(build_ybus(n), n), PartitionError);
}
