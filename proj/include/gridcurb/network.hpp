#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridcurb/facts.hpp"

namespace gridcurb {

enum class BusKind { Slack, PV, PQ };

std::string to_string(BusKind kind);

struct Bus {
    int id = 0;
    BusKind kind = BusKind::PQ;
    double v_min = 0.9;
    double v_max = 1.1;
    std::optional<double> v_setpoint;  // Slack and PV only

    bool is_generator_bus() const { return kind != BusKind::PQ; }
    friend bool operator==(const Bus&, const Bus&) = default;
};

/// pi-model line. Impedances in pu on the system base; rating in MVA.
struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;
    double x = 0.0;
    double b = 0.0;  // total line charging
    double rating_mva = 0.0;
    bool in_service = true;

    Complex series_admittance() const { return 1.0 / Complex(r, x); }
    std::string label() const { return std::to_string(from_bus) + "-" + std::to_string(to_bus); }
    bool connects(int a, int c) const {
        return (from_bus == a && to_bus == c) || (from_bus == c && to_bus == a);
    }
    friend bool operator==(const Branch&, const Branch&) = default;
};

struct Generator {
    int bus = 0;
    double p_min = 0.0;
    double p_max = 0.0;
    double q_min = 0.0;
    double q_max = 0.0;
    double p_setpoint = 0.0;
    friend bool operator==(const Generator&, const Generator&) = default;
};

struct Load {
    int bus = 0;
    double p_req = 0.0;
    double q_req = 0.0;

    bool curtailable() const { return p_req > 0.0; }
    friend bool operator==(const Load&, const Load&) = default;
};

/// Identifies a branch by its terminal buses, in either orientation.
struct BranchRef {
    int a = 0;
    int b = 0;

    /// Parses "4-9".
    static std::optional<BranchRef> parse(std::string_view text);
    std::string label() const { return std::to_string(a) + "-" + std::to_string(b); }
    friend bool operator==(const BranchRef&, const BranchRef&) = default;
};

struct Network {
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    std::vector<Load> loads;
    std::vector<FactsDevice> facts_devices;

    /// Position of bus `id` in `buses`, if present.
    std::optional<std::size_t> bus_index(int id) const;
    const Bus& bus(int id) const;
    std::optional<std::size_t> find_branch(BranchRef ref) const;
    std::optional<std::size_t> slack_index() const;

    /// Series admittance seen by a device: its override or its host branch's.
    Complex device_admittance(const FactsDevice& device) const;

    friend bool operator==(const Network&, const Network&) = default;
};

struct ValidationReport {
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
    bool contains(std::string_view needle) const;
};

ValidationReport validate(const Network& network);

/// Bus ids outside the largest connected component of in-service branches.
std::vector<int> disconnected_buses(const Network& network);

class NetworkError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnknownBranchError : public NetworkError {
public:
    using NetworkError::NetworkError;
};

class IslandingError : public NetworkError {
public:
    using NetworkError::NetworkError;
};

/// Copy of `network` with the branch taken out of service.
/// Throws UnknownBranchError, or IslandingError when the outage splits the grid.
Network apply_outage(const Network& network, BranchRef branch);

}  // namespace gridcurb
