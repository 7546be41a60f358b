// gridcurb: power flow, L-index, curtailment OPF and batch studies.
//
// Exit codes: 0 success, 1 solver non-convergence or infeasibility, 2 input
// error. Diagnostics go to stderr; results to stdout or --out.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "gridcurb/caseio.hpp"

namespace fs = std::filesystem;
using namespace gridcurb;

namespace {

constexpr int kOk = 0;
constexpr int kSolverFailure = 1;
constexpr int kInputError = 2;

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string case_path;
    std::string outage;
    std::string out;
    std::string format = "table";
    std::string units = "pu";
    bool verbose = false;
};

void add_output_flags(CLI::App& cmd, Common& c) {
    cmd.add_option("--out", c.out, "Write results to this file instead of stdout");
    cmd.add_option("--format", c.format, "Report format")->check(CLI::IsMember({"table", "csv"}));
    cmd.add_option("--units", c.units, "Display units for powers")->check(CLI::IsMember({"pu", "mw"}));
    cmd.add_flag("--verbose,-v", c.verbose, "Print solver diagnostics to stderr");
}

ReportOptions report_options(const Common& c, const Network& n) {
    ReportOptions o;
    o.format = c.format == "csv" ? ReportFormat::Csv : ReportFormat::Table;
    o.units = c.units == "mw" ? Units::MegaWatt : Units::PerUnit;
    o.base_mva = n.base_mva;
    return o;
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write '" + path + "'");
    f << text;
}

CaseData load(const std::string& path) {
    if (!fs::exists(path)) throw InputError("case file not found: '" + path + "'");
    return load_case(path);
}

Network with_outage(const Network& n, const std::string& outage) {
    if (outage.empty()) return n;
    const auto ref = BranchRef::parse(outage);
    if (!ref) throw InputError("invalid --outage '" + outage + "', expected <from>-<to>");
    return apply_outage(n, *ref);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int run_pf(const Common& c) {
    const auto t0 = std::chrono::steady_clock::now();
    const CaseData data = load(c.case_path);
    const Network net = with_outage(data.network, c.outage);
    const PowerFlowSolution sol = solve_power_flow(net);
    if (c.verbose)
        std::cerr << "power flow: " << to_string(sol.status) << ", " << sol.iterations << " iterations, mismatch "
                  << sol.mismatch << ", " << seconds_since(t0) << " s\n";
    write_output(c.out, emit_report(sol, report_options(c, net)));
    if (!sol.converged()) {
        std::cerr << "error: power flow " << to_string(sol.status) << "; reporting the best iterate\n";
        return kSolverFailure;
    }
    return kOk;
}

LcritMap effective_lcrit(const CaseData& data, const std::string& flag) {
    LcritMap m = data.study ? data.study->lcrit : LcritMap{};
    if (!flag.empty()) {
        const LcritMap extra = parse_lcrit_list(flag);
        if (extra.default_value) m.default_value = extra.default_value;
        for (const auto& [bus, v] : extra.per_bus) m.per_bus[bus] = v;
    }
    return m;
}

int run_lindex(const Common& c, const std::string& lcrit_flag) {
    const CaseData data = load(c.case_path);
    const Network net = with_outage(data.network, c.outage);
    const PowerFlowSolution sol = solve_power_flow(net);
    const StabilityReport rep = compute_l_index(partition(build_ybus(net), net), sol);
    std::string text = emit_report(rep, report_options(c, net));
    const LcritMap lcrit = effective_lcrit(data, lcrit_flag);
    for (const auto& v : check_margin(rep, lcrit))
        std::cerr << "margin violated at bus " << v.bus << ": L " << format_fixed(v.l_index) << " > L_crit "
                  << format_fixed(v.l_crit) << "\n";
    write_output(c.out, text);
    if (!sol.converged()) {
        std::cerr << "error: power flow " << to_string(sol.status) << "; indices use the best iterate\n";
        return kSolverFailure;
    }
    return kOk;
}

int run_opf(const Common& c, const std::string& lcrit_flag, std::optional<std::uint64_t> seed, bool kkt) {
    const auto t0 = std::chrono::steady_clock::now();
    const CaseData data = load(c.case_path);
    std::string outage = c.outage;
    if (outage.empty() && data.study && data.study->outage) outage = data.study->outage->label();
    const Network net = with_outage(data.network, outage);
    OpfOptions opt;
    if (seed) opt.seed = *seed;
    else if (data.study) opt.seed = data.study->seed;
    const CurtailmentResult res = solve_curtailment(net, effective_lcrit(data, lcrit_flag), opt);
    if (c.verbose) {
        std::cerr << "opf: " << to_string(res.status) << ", " << res.iterations << " iterations, " << res.starts
                  << " starts, " << seconds_since(t0) << " s\n";
        std::cerr << kkt_report(res);
    }
    std::string text = emit_report(res, report_options(c, net));
    if (kkt) text += "\n" + kkt_report(res);
    write_output(c.out, text);
    if (!res.optimal()) {
        std::cerr << "error: " << to_string(res.status) << " (max violation " << res.max_violation << ")\n";
        return kSolverFailure;
    }
    return kOk;
}

int run_study_cmd(const Common& c, const std::string& spec_path, std::optional<std::uint64_t> seed) {
    if (!fs::exists(spec_path)) throw InputError("study file not found: '" + spec_path + "'");
    const StudySpec spec = load_study(spec_path);
    std::string case_path = c.case_path;
    if (case_path.empty()) {
        if (spec.case_path.empty()) throw InputError("no --case given and the study names no case");
        case_path = (fs::path(spec_path).parent_path() / spec.case_path).string();
    }
    const CaseData data = load(case_path);
    StudyOptions opt;
    opt.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    const SweepResult sweep = run_study(data.network, spec, opt);
    if (c.verbose) {
        std::cerr << "study '" << spec.name << "': " << sweep.cells.size() << " cells, " << sweep.failures()
                  << " failed, " << resolve_thread_count(0) << " threads, " << seconds_since(t0) << " s\n";
        for (const auto& cell : sweep.cells)
            std::cerr << "  " << cell.scenario.name << ": " << (cell.ok ? "ok" : cell.error) << ", "
                      << cell.wall_seconds << " s\n";
    }

    std::string out = c.out;
    if (!out.empty() && (fs::is_directory(out) || out.back() == '/')) {
        fs::create_directories(out);
        out = (fs::path(out) / fs::path(spec_path).stem()).string() + (c.format == "csv" ? ".csv" : ".txt");
    }
    write_output(out, emit_report(sweep, report_options(c, data.network)));
    return sweep.failures() == 0 ? kOk : kSolverFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Power flow, L-index and curtailment OPF with FACTS devices"};
    app.require_subcommand(1);

    Common c;
    std::string lcrit;
    std::string spec;
    std::optional<std::uint64_t> seed;
    bool kkt = false;

    auto* pf = app.add_subcommand("pf", "Solve the AC power flow");
    pf->add_option("--case", c.case_path, "Case file")->required();
    pf->add_option("--outage", c.outage, "Branch taken out of service, e.g. 4-9");
    add_output_flags(*pf, c);

    auto* li = app.add_subcommand("lindex", "Power flow followed by the L-index of every load bus");
    li->add_option("--case", c.case_path, "Case file")->required();
    li->add_option("--outage", c.outage, "Branch taken out of service, e.g. 4-9");
    li->add_option("--lcrit", lcrit, "Thresholds to check, e.g. 5=0.1,7=0.3");
    add_output_flags(*li, c);

    auto* opf = app.add_subcommand("opf", "Minimize load curtailment under stability and thermal limits");
    opf->add_option("--case", c.case_path, "Case file")->required();
    opf->add_option("--outage", c.outage, "Branch taken out of service, e.g. 4-9");
    opf->add_option("--lcrit", lcrit, "L_crit per bus, e.g. 5=0.1,7=0.3,9=0.3");
    opf->add_option("--seed", seed, "Multistart seed");
    opf->add_flag("--kkt", kkt, "Append the constraint activity report");
    add_output_flags(*opf, c);

    auto* st = app.add_subcommand("study", "Run a batch study");
    st->add_option("--case", c.case_path, "Case file (defaults to the one the study names)");
    st->add_option("--spec", spec, "Study file")->required();
    st->add_option("--seed", seed, "Multistart seed");
    add_output_flags(*st, c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInputError;
    }

    try {
        if (pf->parsed()) return run_pf(c);
        if (li->parsed()) return run_lindex(c, lcrit);
        if (opf->parsed()) return run_opf(c, lcrit, seed, kkt);
        if (st->parsed()) return run_study_cmd(c, spec, seed);
    } catch (const std::exception& e) {
        // Parse, validation, outage and file errors; solver failures are
        // reported through return values above.
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    }
    return kInputError;
}
