#include "gridcurb/network.hpp"

#include <algorithm>
#include <charconv>
#include <queue>
#include <set>

namespace gridcurb {

std::string to_string(BusKind kind) {
    switch (kind) {
    case BusKind::Slack: return "slack";
    case BusKind::PV: return "pv";
    case BusKind::PQ: return "pq";
    }
    return "?";
}

std::optional<BranchRef> BranchRef::parse(std::string_view text) {
    const auto dash = text.find('-');
    if (dash == std::string_view::npos || dash == 0) return std::nullopt;
    BranchRef ref;
    const auto lhs = text.substr(0, dash);
    const auto rhs = text.substr(dash + 1);
    auto [p1, e1] = std::from_chars(lhs.data(), lhs.data() + lhs.size(), ref.a);
    auto [p2, e2] = std::from_chars(rhs.data(), rhs.data() + rhs.size(), ref.b);
    if (e1 != std::errc{} || e2 != std::errc{} || p1 != lhs.data() + lhs.size() ||
        p2 != rhs.data() + rhs.size())
        return std::nullopt;
    return ref;
}

std::optional<std::size_t> Network::bus_index(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].id == id) return i;
    return std::nullopt;
}

const Bus& Network::bus(int id) const {
    const auto idx = bus_index(id);
    if (!idx) throw NetworkError("unknown bus " + std::to_string(id));
    return buses[*idx];
}

std::optional<std::size_t> Network::find_branch(BranchRef ref) const {
    for (std::size_t k = 0; k < branches.size(); ++k)
        if (branches[k].connects(ref.a, ref.b)) return k;
    return std::nullopt;
}

std::optional<std::size_t> Network::slack_index() const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].kind == BusKind::Slack) return i;
    return std::nullopt;
}

Complex Network::device_admittance(const FactsDevice& device) const {
    if (device.series_admittance) return *device.series_admittance;
    const auto k = find_branch({device.from_bus, device.to_bus});
    if (!k) throw NetworkError("device host branch " + std::to_string(device.from_bus) + "-" +
                               std::to_string(device.to_bus) + " not found");
    return branches[*k].series_admittance();
}

bool ValidationReport::contains(std::string_view needle) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const std::string& v) { return v.find(needle) != std::string::npos; });
}

std::vector<int> disconnected_buses(const Network& network) {
    const std::size_t n = network.buses.size();
    if (n == 0) return {};
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& br : network.branches) {
        if (!br.in_service) continue;
        const auto f = network.bus_index(br.from_bus);
        const auto t = network.bus_index(br.to_bus);
        if (!f || !t) continue;
        adj[*f].push_back(*t);
        adj[*t].push_back(*f);
    }
    // Label components; report every bus outside the largest one.
    std::vector<int> comp(n, -1);
    std::vector<std::size_t> sizes;
    for (std::size_t start = 0; start < n; ++start) {
        if (comp[start] >= 0) continue;
        const int label = static_cast<int>(sizes.size());
        sizes.push_back(0);
        std::queue<std::size_t> todo;
        comp[start] = label;
        todo.push(start);
        while (!todo.empty()) {
            const auto u = todo.front();
            todo.pop();
            ++sizes[label];
            for (auto v : adj[u])
                if (comp[v] < 0) {
                    comp[v] = label;
                    todo.push(v);
                }
        }
    }
    const auto main = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    std::vector<int> out;
    for (std::size_t i = 0; i < n; ++i)
        if (comp[i] != main) out.push_back(network.buses[i].id);
    return out;
}

ValidationReport validate(const Network& network) {
    ValidationReport report;
    auto fail = [&](std::string msg) { report.violations.push_back(std::move(msg)); };

    if (!(network.base_mva > 0.0)) fail("base_mva must be positive");
    if (network.buses.empty()) fail("network has no buses");

    std::set<int> ids;
    int slack_count = 0;
    for (const auto& bus : network.buses) {
        const std::string tag = "bus " + std::to_string(bus.id) + ": ";
        if (bus.id <= 0) fail(tag + "id must be positive");
        if (!ids.insert(bus.id).second) fail(tag + "duplicate id");
        if (!(bus.v_min > 0.0)) fail(tag + "vmin must be positive");
        if (bus.v_min > bus.v_max) fail(tag + "vmin exceeds vmax");
        if (bus.kind == BusKind::Slack) ++slack_count;
        if (bus.is_generator_bus() && !bus.v_setpoint) fail(tag + "voltage setpoint required");
        if (bus.v_setpoint && !(*bus.v_setpoint > 0.0)) fail(tag + "voltage setpoint must be positive");
    }
    if (slack_count == 0) fail("no slack bus");
    if (slack_count > 1) fail("multiple slack buses");

    auto known = [&](int id) { return ids.count(id) > 0; };

    for (const auto& br : network.branches) {
        const std::string tag = "branch " + br.label() + ": ";
        if (!known(br.from_bus) || !known(br.to_bus)) fail(tag + "references unknown bus");
        if (br.from_bus == br.to_bus) fail(tag + "both ends on the same bus");
        if (br.x == 0.0) fail(tag + "x must be nonzero");
        if (br.r < 0.0) fail(tag + "r must be non-negative");
        if (br.b < 0.0) fail(tag + "b must be non-negative");
        if (!(br.rating_mva > 0.0)) fail(tag + "rating must be positive");
    }

    for (const auto& g : network.generators) {
        const std::string tag = "generator at bus " + std::to_string(g.bus) + ": ";
        if (!known(g.bus)) fail(tag + "references unknown bus");
        else if (!network.bus(g.bus).is_generator_bus()) fail(tag + "bus is not a slack/pv bus");
        if (g.p_min > g.p_max) fail(tag + "pmin exceeds pmax");
        if (g.q_min > g.q_max) fail(tag + "qmin exceeds qmax");
    }

    for (const auto& l : network.loads) {
        const std::string tag = "load at bus " + std::to_string(l.bus) + ": ";
        if (!known(l.bus)) fail(tag + "references unknown bus");
        if (l.p_req < 0.0) fail(tag + "p must be non-negative");
        if (l.p_req == 0.0 && l.q_req == 0.0) fail(tag + "p and q both zero");
        if (l.p_req == 0.0 && l.q_req != 0.0) fail(tag + "power factor undefined (q without p)");
    }

    for (const auto& dev : network.facts_devices) {
        const std::string tag = to_string(dev.kind) + " " + std::to_string(dev.from_bus) + "-" +
                                std::to_string(dev.to_bus) + ": ";
        if (!known(dev.from_bus) || !known(dev.to_bus)) fail(tag + "references unknown bus");
        const auto host = network.find_branch({dev.from_bus, dev.to_bus});
        if (!host) fail(tag + "host branch not found");
        else if (dev.has_series() && !network.branches[*host].in_service)
            fail(tag + "host branch out of service");
        for (auto& v : device_violations(dev)) fail(tag + v);
    }

    if (!network.buses.empty()) {
        const auto cut = disconnected_buses(network);
        if (!cut.empty()) {
            std::string msg = "network not connected: bus";
            for (int id : cut) msg += " " + std::to_string(id);
            msg += " disconnected";
            fail(msg);
        }
    }
    return report;
}

Network apply_outage(const Network& network, BranchRef ref) {
    const auto k = network.find_branch(ref);
    if (!k) throw UnknownBranchError("unknown branch " + ref.label());
    if (!network.branches[*k].in_service)
        throw UnknownBranchError("branch " + ref.label() + " already out of service");

    Network out = network;
    out.branches[*k].in_service = false;
    const auto& br = out.branches[*k];
    std::erase_if(out.facts_devices, [&](const FactsDevice& d) {
        return d.has_series() && br.connects(d.from_bus, d.to_bus);
    });

    const auto cut = disconnected_buses(out);
    if (!cut.empty()) {
        std::string msg = "islanding:";
        for (int id : cut) msg += " bus " + std::to_string(id);
        msg += " disconnected";
        throw IslandingError(msg);
    }
    return out;
}

}  // namespace gridcurb
