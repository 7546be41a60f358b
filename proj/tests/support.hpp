#pragma once

#include <doctest.h>

#include <random>
#include <string>

#include "gridcurb/caseio.hpp"

namespace testing {

inline std::string data_path(const std::string& name) { return std::string(GRIDCURB_DATA_DIR) + "/" + name; }

inline gridcurb::Network wscc9() { return gridcurb::load_case(data_path("wscc9.case")).network; }
inline gridcurb::Network wscc9_curtailment() {
    return gridcurb::load_case(data_path("wscc9_curtailment.case")).network;
}

/// Two buses joined by one branch; bus 1 is the slack.
inline gridcurb::Network two_bus(double r, double x, double b, double p_load = 0.0, double q_load = 0.0) {
    using namespace gridcurb;
    Network n;
    n.buses = {{1, BusKind::Slack, 0.9, 1.1, 1.0}, {2, BusKind::PQ, 0.8, 1.2, std::nullopt}};
    n.branches = {{1, 2, r, x, b, 100.0, true}};
    n.generators = {{1, 0.0, 5.0, -5.0, 5.0, 0.0}};
    if (p_load > 0.0) n.loads = {{2, p_load, q_load}};
    return n;
}

inline gridcurb::FactsDevice device(gridcurb::DeviceKind kind, int from, int to, double rating = 0.3) {
    gridcurb::FactsDevice d;
    d.kind = kind;
    d.from_bus = from;
    d.to_bus = to;
    d.p_inj_limits = d.q_inj1_limits = d.q_inj2_limits = {-rating, rating};
    return d;
}

/// Relative difference with an absolute floor for values near zero.
inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

}  // namespace testing
