#include "gridcurb/study.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

namespace gridcurb {

std::string to_string(StudyType type) {
    switch (type) {
    case StudyType::Snapshot: return "snapshot";
    case StudyType::Placement: return "placement";
    case StudyType::Lcrit: return "lcrit";
    }
    return "unknown";
}

std::optional<StudyType> parse_study_type(std::string_view text) {
    if (text == "snapshot") return StudyType::Snapshot;
    if (text == "placement") return StudyType::Placement;
    if (text == "lcrit") return StudyType::Lcrit;
    return std::nullopt;
}

Network scenario_network(const Network& base, const StudySpec& spec, const Scenario& scenario) {
    Network net = base;
    auto override_load = [&](int bus, Complex s) {
        auto it = std::find_if(net.loads.begin(), net.loads.end(), [&](const Load& l) { return l.bus == bus; });
        if (it == net.loads.end()) {
            net.loads.push_back({bus, s.real(), s.imag()});
        } else {
            it->p_req = s.real();
            it->q_req = s.imag();
        }
    };
    for (const auto& [bus, s] : spec.loads) override_load(bus, s);
    for (const auto& [bus, s] : scenario.loads) override_load(bus, s);
    for (const auto& d : scenario.devices) net.facts_devices.push_back(d);
    if (const auto rep = validate(net); !rep.ok()) throw NetworkError(rep.violations.front());

    std::optional<BranchRef> outage = scenario.outage ? scenario.outage : spec.outage;
    if (scenario.clear_outage) outage.reset();
    if (outage) net = apply_outage(net, *outage);
    return net;
}

LcritMap scenario_lcrit(const StudySpec& spec, const Scenario& scenario) {
    LcritMap m = spec.lcrit;
    if (scenario.lcrit.default_value) m.default_value = scenario.lcrit.default_value;
    for (const auto& [bus, v] : scenario.lcrit.per_bus) m.per_bus[bus] = v;
    return m;
}

const CellResult* SweepResult::find(std::string_view scenario) const {
    for (const auto& c : cells)
        if (c.scenario.name == scenario) return &c;
    return nullptr;
}

const CellResult* SweepResult::at(std::string_view row, std::string_view column) const {
    for (const auto& c : cells)
        if (c.scenario.row == row && (c.scenario.column == column || c.scenario.column == "*")) return &c;
    return nullptr;
}

std::size_t SweepResult::failures() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const CellResult& c) { return !c.ok; }));
}

unsigned resolve_thread_count(unsigned requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("GRIDCURB_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

template <typename Fn>
SweepResult run_cells(const StudySpec& spec, StudyType type, const StudyOptions& options, Fn&& fn) {
    SweepResult res;
    res.name = spec.name;
    res.type = type;
    res.focus_bus = spec.focus_bus;
    res.watch_branch = spec.watch_branch;
    res.cells.resize(spec.scenarios.size());
    for (std::size_t k = 0; k < spec.scenarios.size(); ++k) {
        Scenario sc = spec.scenarios[k];
        if (sc.row.empty()) sc.row = sc.name;
        res.cells[k].scenario = sc;
        if (std::find(res.rows.begin(), res.rows.end(), sc.row) == res.rows.end()) res.rows.push_back(sc.row);
        if (!sc.column.empty() && sc.column != "*" &&
            std::find(res.columns.begin(), res.columns.end(), sc.column) == res.columns.end())
            res.columns.push_back(sc.column);
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < res.cells.size(); k = next++) {
            CellResult& cell = res.cells[k];
            const auto t0 = std::chrono::steady_clock::now();
            try {
                fn(cell);
            } catch (const std::exception& e) {
                cell.ok = false;
                cell.error = e.what();
            }
            cell.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
    };
    const unsigned threads =
        std::min<unsigned>(resolve_thread_count(options.threads), static_cast<unsigned>(res.cells.size()));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return res;
}

SweepResult run_opf_cells(const Network& base, const StudySpec& spec, StudyType type, const StudyOptions& options) {
    OpfOptions opf = options.opf;
    opf.seed = options.seed.value_or(spec.seed);
    return run_cells(spec, type, options, [&](CellResult& cell) {
        const Network net = scenario_network(base, spec, cell.scenario);
        const LcritMap lcrit = scenario_lcrit(spec, cell.scenario);
        if (spec.focus_bus) cell.l_crit_focus = lcrit.at(*spec.focus_bus);
        cell.curtailment = solve_curtailment(net, lcrit, opf);
        cell.ok = cell.curtailment->optimal();
        if (!cell.ok) cell.error = to_string(cell.curtailment->status);
    });
}

}  // namespace

SweepResult run_snapshot_study(const Network& base, const StudySpec& spec, const StudyOptions& options) {
    return run_cells(spec, StudyType::Snapshot, options, [&](CellResult& cell) {
        const Network net = scenario_network(base, spec, cell.scenario);
        cell.power_flow = solve_power_flow(net, options.power_flow);
        cell.stability = compute_l_index(partition(build_ybus(net), net), *cell.power_flow);
        if (spec.focus_bus) cell.l_crit_focus = scenario_lcrit(spec, cell.scenario).at(*spec.focus_bus);
        cell.ok = cell.power_flow->converged();
        if (!cell.ok) cell.error = "power flow " + to_string(cell.power_flow->status);
    });
}

SweepResult run_placement_sweep(const Network& base, const StudySpec& spec, const StudyOptions& options) {
    return run_opf_cells(base, spec, StudyType::Placement, options);
}

SweepResult run_lcrit_sweep(const Network& base, const StudySpec& spec, const StudyOptions& options) {
    return run_opf_cells(base, spec, StudyType::Lcrit, options);
}

SweepResult run_study(const Network& base, const StudySpec& spec, const StudyOptions& options) {
    switch (spec.type) {
    case StudyType::Snapshot: return run_snapshot_study(base, spec, options);
    case StudyType::Placement: return run_placement_sweep(base, spec, options);
    case StudyType::Lcrit: return run_lcrit_sweep(base, spec, options);
    }
    return {};
}

}  // namespace gridcurb
