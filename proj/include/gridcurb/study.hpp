#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridcurb/curtailopf.hpp"
#include "gridcurb/lindex.hpp"
#include "gridcurb/powerflow.hpp"

namespace gridcurb {

enum class StudyType { Snapshot, Placement, Lcrit };

std::string to_string(StudyType type);
std::optional<StudyType> parse_study_type(std::string_view text);

/// One cell of a study. Unset fields inherit from the StudySpec.
struct Scenario {
    std::string name;
    std::string row;     // grid row label, defaults to name
    std::string column;  // grid column label; "*" spans every column
    std::optional<BranchRef> outage;
    bool clear_outage = false;  // "outage=none" overrides a study-level outage
    std::vector<FactsDevice> devices;
    LcritMap lcrit;  // merged over the study-level map
    std::map<int, Complex> loads;

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

struct StudySpec {
    std::string name;
    StudyType type = StudyType::Snapshot;
    std::string case_path;  // optional reference to the case file
    std::optional<BranchRef> outage;
    LcritMap lcrit;
    std::map<int, Complex> loads;  // demand overrides
    std::string objective = "curtailment";
    std::uint64_t seed = 1;
    std::optional<int> focus_bus;         // bus reported in sweep tables
    std::optional<BranchRef> watch_branch;  // branch reported in snapshot tables
    std::vector<Scenario> scenarios;

    friend bool operator==(const StudySpec&, const StudySpec&) = default;
};

/// Network for one scenario: load overrides, then devices, then the outage.
/// Throws NetworkError subclasses.
Network scenario_network(const Network& base, const StudySpec& spec, const Scenario& scenario);
LcritMap scenario_lcrit(const StudySpec& spec, const Scenario& scenario);

struct StudyOptions {
    /// Worker threads; 0 reads GRIDCURB_THREADS, then the hardware count.
    unsigned threads = 0;
    PowerFlowOptions power_flow;
    OpfOptions opf;
    std::optional<std::uint64_t> seed;  // overrides the study seed
};

struct CellResult {
    Scenario scenario;
    bool ok = false;
    std::string error;  // set when the cell failed
    std::optional<PowerFlowSolution> power_flow;
    std::optional<StabilityReport> stability;
    std::optional<CurtailmentResult> curtailment;
    std::optional<double> l_crit_focus;  // effective L_crit at the focus bus
    double wall_seconds = 0.0;
};

struct SweepResult {
    std::string name;
    StudyType type = StudyType::Snapshot;
    std::optional<int> focus_bus;
    std::optional<BranchRef> watch_branch;
    std::vector<CellResult> cells;  // scenario order
    std::vector<std::string> rows;     // first-appearance order
    std::vector<std::string> columns;  // first-appearance order, "*" excluded

    const CellResult* find(std::string_view scenario) const;
    /// Cell at a grid position; "*" cells match every column.
    const CellResult* at(std::string_view row, std::string_view column) const;
    std::size_t failures() const;
};

unsigned resolve_thread_count(unsigned requested);

/// solve_power_flow + compute_l_index per scenario.
SweepResult run_snapshot_study(const Network& base, const StudySpec& spec, const StudyOptions& options = {});
/// solve_curtailment per scenario laid out as placement rows by device columns.
SweepResult run_placement_sweep(const Network& base, const StudySpec& spec, const StudyOptions& options = {});
/// solve_curtailment per scenario, one row per L_crit value.
SweepResult run_lcrit_sweep(const Network& base, const StudySpec& spec, const StudyOptions& options = {});
/// Dispatches on spec.type.
SweepResult run_study(const Network& base, const StudySpec& spec, const StudyOptions& options = {});

}  // namespace gridcurb
