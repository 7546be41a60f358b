#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "gridcurb/curtailopf.hpp"
#include "gridcurb/lindex.hpp"
#include "gridcurb/network.hpp"
#include "gridcurb/powerflow.hpp"
#include "gridcurb/study.hpp"

namespace gridcurb {

/// Case file layout. '#' starts a comment; blank lines are ignored.
///
///   [system]     base_mva=100 slack=1
///   [bus]        id kind vmin vmax [vset]        kind: slack | pv | pq
///   [branch]     from to r x b rating [off]      pu impedances, rating in MVA
///   [generator]  bus pmin pmax qmin qmax pset
///   [load]       bus p q
///   [facts]      kind from to pinj_max qinj1_max qinj2_max [key=value ...]
///   [study]      key=value
///   [scenario <name>]  key=value
///
/// Injection limits are symmetric unless pinj_min, qinj1_min or qinj2_min is
/// given. Further [facts] keys: vt_min, vt_max, iq_min, iq_max, vt, phi_rad,
/// iq, and g/b for a series admittance override.
///
/// [study] keys: name, type (snapshot | placement | lcrit), case, outage,
/// lcrit (default for unlisted buses), lcrit.<bus>, load.<bus>=p,q,
/// objective, seed, bus (reported bus), branch (reported branch).
/// [scenario] keys: row, column, outage (a-b or none), lcrit, lcrit.<bus>,
/// load.<bus>=p,q, device=<a [facts] record>.
class ParseError : public std::runtime_error {
public:
    ParseError(int line, std::string section, const std::string& message);

    int line() const { return line_; }
    const std::string& section() const { return section_; }
    const std::string& detail() const { return detail_; }

private:
    int line_;
    std::string section_;
    std::string detail_;
};

struct CaseData {
    Network network;
    std::optional<StudySpec> study;
};

/// Parses and validates a case. Throws ParseError.
CaseData parse_case(std::string_view text);
/// Reads a file; I/O failures throw std::runtime_error naming the path.
CaseData load_case(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

/// Shortest round-trip decimal for every number.
std::string emit_case(const Network& network, const std::optional<StudySpec>& study = std::nullopt);

/// A study file holds [study] and [scenario] sections only.
StudySpec parse_study(std::string_view text);
StudySpec load_study(const std::filesystem::path& path);
std::string emit_study(const StudySpec& spec);

/// Parses one [facts] record, e.g. "upfc 9 8 0.3 0.3 0.3 vt_max=0.2".
FactsDevice parse_device(std::string_view record);
std::string emit_device(const FactsDevice& device);

/// Parses "5=0.1,7=0.3"; a bare number sets the default.
LcritMap parse_lcrit_list(std::string_view text);

enum class ReportFormat { Table, Csv };
enum class Units { PerUnit, MegaWatt };

struct ReportOptions {
    ReportFormat format = ReportFormat::Table;
    Units units = Units::PerUnit;
    double base_mva = 100.0;
};

/// Fixed four-decimal formatting used by every report.
std::string format_fixed(double value);

/// Bus voltages and branch flows.
std::string emit_report(const PowerFlowSolution& solution, const ReportOptions& options = {});
/// Index, voltage magnitude and angle in degrees per load bus.
std::string emit_report(const StabilityReport& report, const ReportOptions& options = {});
/// Per-load served and curtailed demand.
std::string emit_report(const CurtailmentResult& result, const ReportOptions& options = {});
std::string emit_report(const SweepResult& sweep, const ReportOptions& options = {});

}  // namespace gridcurb
