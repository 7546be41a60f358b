#include "gridcurb/caseio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <vector>

namespace gridcurb {

ParseError::ParseError(int line, std::string section, const std::string& message)
    : std::runtime_error((line > 0 ? "line " + std::to_string(line) + " " : std::string()) +
                         (section.empty() ? std::string() : "[" + section + "]") +
                         (line > 0 || !section.empty() ? ": " : "") + message),
      line_(line), section_(std::move(section)), detail_(message) {}

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

std::string num(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

/// Tracks the position being parsed so errors carry it.
struct Cursor {
    int line = 0;
    std::string section;

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line, section, msg); }

    double number(std::string_view tok, std::string_view what) const {
        double v = 0.0;
        const char* first = tok.data();
        if (!tok.empty() && tok.front() == '+') ++first;
        const auto r = std::from_chars(first, tok.data() + tok.size(), v);
        if (r.ec != std::errc() || r.ptr != tok.data() + tok.size() || !std::isfinite(v))
            fail("invalid number for " + std::string(what) + ": '" + std::string(tok) + "'");
        return v;
    }

    long long integer(std::string_view tok, std::string_view what) const {
        long long v = 0;
        const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (r.ec != std::errc() || r.ptr != tok.data() + tok.size())
            fail("invalid integer for " + std::string(what) + ": '" + std::string(tok) + "'");
        return v;
    }

    int bus_id(std::string_view tok) const {
        const auto v = integer(tok, "bus id");
        if (v <= 0 || v > 1'000'000'000) fail("bus id must be positive: '" + std::string(tok) + "'");
        return static_cast<int>(v);
    }

    BranchRef branch(std::string_view tok) const {
        const auto r = BranchRef::parse(tok);
        if (!r) fail("invalid branch '" + std::string(tok) + "', expected <from>-<to>");
        return *r;
    }

    void expect_fields(const std::vector<std::string_view>& f, std::size_t min, std::size_t max,
                       const char* layout) const {
        if (f.size() < min || f.size() > max)
            fail("expected " + std::string(layout) + ", got " + std::to_string(f.size()) + " fields");
    }
};

std::pair<std::string_view, std::string_view> key_value(const Cursor& cur, std::string_view text) {
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) cur.fail("expected key=value, got '" + std::string(text) + "'");
    const auto key = trim(text.substr(0, eq));
    if (key.empty()) cur.fail("empty key");
    return {key, trim(text.substr(eq + 1))};
}

FactsDevice parse_device_fields(const Cursor& cur, const std::vector<std::string_view>& f) {
    if (f.size() < 6) cur.fail("expected kind from to pinj_max qinj1_max qinj2_max [key=value ...]");
    FactsDevice d;
    const auto kind = parse_device_kind(f[0]);
    if (!kind) cur.fail("unknown device kind '" + std::string(f[0]) + "'");
    d.kind = *kind;
    d.from_bus = cur.bus_id(f[1]);
    d.to_bus = cur.bus_id(f[2]);
    const double pmax = cur.number(f[3], "pinj_max");
    const double q1max = cur.number(f[4], "qinj1_max");
    const double q2max = cur.number(f[5], "qinj2_max");
    d.p_inj_limits = {-pmax, pmax};
    d.q_inj1_limits = {-q1max, q1max};
    d.q_inj2_limits = {-q2max, q2max};
    std::optional<double> g, b;
    std::set<std::string, std::less<>> seen;
    for (std::size_t k = 6; k < f.size(); ++k) {
        const auto [key, val] = key_value(cur, f[k]);
        if (!seen.emplace(key).second) cur.fail("duplicate key '" + std::string(key) + "'");
        const double v = cur.number(val, key);
        if (key == "pinj_min") d.p_inj_limits.min = v;
        else if (key == "qinj1_min") d.q_inj1_limits.min = v;
        else if (key == "qinj2_min") d.q_inj2_limits.min = v;
        else if (key == "vt_min") d.v_t_limits.min = v;
        else if (key == "vt_max") d.v_t_limits.max = v;
        else if (key == "iq_min") d.i_q_limits.min = v;
        else if (key == "iq_max") d.i_q_limits.max = v;
        else if (key == "vt") d.controls.v_t = v;
        else if (key == "phi_rad") d.controls.phi_t = v;
        else if (key == "iq") d.controls.i_q = v;
        else if (key == "g") g = v;
        else if (key == "b") b = v;
        else cur.fail("unknown device key '" + std::string(key) + "'");
    }
    if (g.has_value() != b.has_value()) cur.fail("series admittance override needs both g and b");
    if (g) d.series_admittance = Complex(*g, *b);
    for (const auto& v : device_violations(d)) cur.fail(v);
    return d;
}

Complex parse_load_pair(const Cursor& cur, std::string_view val) {
    const auto comma = val.find(',');
    if (comma == std::string_view::npos) cur.fail("expected load as p,q");
    return {cur.number(trim(val.substr(0, comma)), "load p"), cur.number(trim(val.substr(comma + 1)), "load q")};
}

/// Applies a [study] or [scenario] key. Returns false for an unknown key.
bool apply_common_key(const Cursor& cur, std::string_view key, std::string_view val, LcritMap& lcrit,
                      std::map<int, Complex>& loads) {
    if (key == "lcrit") {
        lcrit.default_value = cur.number(val, "lcrit");
        return true;
    }
    if (key.starts_with("lcrit.")) {
        const int bus = cur.bus_id(key.substr(6));
        if (!lcrit.per_bus.emplace(bus, cur.number(val, "lcrit")).second)
            cur.fail("duplicate lcrit for bus " + std::to_string(bus));
        return true;
    }
    if (key.starts_with("load.")) {
        const int bus = cur.bus_id(key.substr(5));
        if (!loads.emplace(bus, parse_load_pair(cur, val)).second)
            cur.fail("duplicate load override for bus " + std::to_string(bus));
        return true;
    }
    return false;
}

void parse_study_key(const Cursor& cur, std::string_view key, std::string_view val, StudySpec& spec) {
    if (apply_common_key(cur, key, val, spec.lcrit, spec.loads)) return;
    if (key == "name") spec.name = std::string(val);
    else if (key == "type") {
        const auto t = parse_study_type(val);
        if (!t) cur.fail("unknown study type '" + std::string(val) + "'");
        spec.type = *t;
    } else if (key == "case") spec.case_path = std::string(val);
    else if (key == "outage") spec.outage = cur.branch(val);
    else if (key == "objective") {
        if (val != "curtailment") cur.fail("unsupported objective '" + std::string(val) + "'");
        spec.objective = std::string(val);
    } else if (key == "seed") {
        const auto s = cur.integer(val, "seed");
        if (s < 0) cur.fail("seed must be non-negative");
        spec.seed = static_cast<std::uint64_t>(s);
    } else if (key == "bus") spec.focus_bus = cur.bus_id(val);
    else if (key == "branch") spec.watch_branch = cur.branch(val);
    else cur.fail("unknown study key '" + std::string(key) + "'");
}

void parse_scenario_key(const Cursor& cur, std::string_view key, std::string_view val, Scenario& sc) {
    if (apply_common_key(cur, key, val, sc.lcrit, sc.loads)) return;
    if (key == "row") sc.row = std::string(val);
    else if (key == "column") sc.column = std::string(val);
    else if (key == "outage") {
        if (val == "none") {
            sc.clear_outage = true;
            sc.outage.reset();
        } else {
            sc.outage = cur.branch(val);
            sc.clear_outage = false;
        }
    } else if (key == "device") sc.devices.push_back(parse_device_fields(cur, split_ws(val)));
    else cur.fail("unknown scenario key '" + std::string(key) + "'");
}

enum class Mode { Case, StudyOnly };

struct Parsed {
    Network network;
    std::optional<StudySpec> study;
    std::map<std::string, std::pair<int, std::string>> context;  // violation tag -> line, section
    bool have_system = false;
    std::optional<int> slack;
    int slack_line = 0;
};

Parsed parse_text(std::string_view text, Mode mode) {
    Parsed p;
    Cursor cur;
    std::set<std::string> scenario_names;
    Scenario* scenario = nullptr;
    std::set<std::string> sections_seen;

    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++cur.line;
        if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        const auto line = trim(raw);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') cur.fail("unterminated section header");
            const auto inner = trim(line.substr(1, line.size() - 2));
            scenario = nullptr;
            if (inner.starts_with("scenario")) {
                const auto name = trim(inner.substr(8));
                if (name.empty()) cur.fail("scenario needs a name");
                if (!scenario_names.insert(std::string(name)).second)
                    cur.fail("duplicate scenario '" + std::string(name) + "'");
                if (!p.study) p.study.emplace();
                p.study->scenarios.push_back({});
                scenario = &p.study->scenarios.back();
                scenario->name = std::string(name);
                cur.section = "scenario";
                continue;
            }
            static const std::set<std::string, std::less<>> case_sections{
                "system", "bus", "branch", "generator", "load", "facts", "study"};
            if (!case_sections.count(inner) || (mode == Mode::StudyOnly && inner != "study"))
                cur.fail("unknown section '" + std::string(inner) + "'");
            cur.section = std::string(inner);
            if (!sections_seen.insert(cur.section).second) cur.fail("duplicate section");
            if (cur.section == "study" && !p.study) p.study.emplace();
            if (cur.section == "system") p.have_system = true;
            continue;
        }
        if (cur.section.empty()) cur.fail("record outside any section");

        const auto f = split_ws(line);
        Network& n = p.network;
        if (cur.section == "system") {
            for (auto tok : f) {
                const auto [key, val] = key_value(cur, tok);
                if (key == "base_mva") n.base_mva = cur.number(val, "base_mva");
                else if (key == "slack") {
                    p.slack = cur.bus_id(val);
                    p.slack_line = cur.line;
                } else cur.fail("unknown system key '" + std::string(key) + "'");
            }
        } else if (cur.section == "bus") {
            cur.expect_fields(f, 4, 5, "id kind vmin vmax [vset]");
            Bus b;
            b.id = cur.bus_id(f[0]);
            if (f[1] == "slack") b.kind = BusKind::Slack;
            else if (f[1] == "pv") b.kind = BusKind::PV;
            else if (f[1] == "pq") b.kind = BusKind::PQ;
            else cur.fail("unknown bus kind '" + std::string(f[1]) + "'");
            b.v_min = cur.number(f[2], "vmin");
            b.v_max = cur.number(f[3], "vmax");
            if (f.size() == 5) b.v_setpoint = cur.number(f[4], "vset");
            n.buses.push_back(b);
            p.context.emplace("bus " + std::to_string(b.id) + ": ", std::pair{cur.line, cur.section});
        } else if (cur.section == "branch") {
            cur.expect_fields(f, 6, 7, "from to r x b rating [off]");
            Branch br;
            br.from_bus = cur.bus_id(f[0]);
            br.to_bus = cur.bus_id(f[1]);
            br.r = cur.number(f[2], "r");
            br.x = cur.number(f[3], "x");
            br.b = cur.number(f[4], "b");
            br.rating_mva = cur.number(f[5], "rating");
            if (f.size() == 7) {
                if (f[6] != "off") cur.fail("unexpected field '" + std::string(f[6]) + "'");
                br.in_service = false;
            }
            if (br.x == 0.0) cur.fail("branch " + br.label() + ": x must be nonzero");
            n.branches.push_back(br);
            p.context.emplace("branch " + br.label() + ": ", std::pair{cur.line, cur.section});
        } else if (cur.section == "generator") {
            cur.expect_fields(f, 6, 6, "bus pmin pmax qmin qmax pset");
            Generator g;
            g.bus = cur.bus_id(f[0]);
            g.p_min = cur.number(f[1], "pmin");
            g.p_max = cur.number(f[2], "pmax");
            g.q_min = cur.number(f[3], "qmin");
            g.q_max = cur.number(f[4], "qmax");
            g.p_setpoint = cur.number(f[5], "pset");
            n.generators.push_back(g);
            p.context.emplace("generator at bus " + std::to_string(g.bus) + ": ", std::pair{cur.line, cur.section});
        } else if (cur.section == "load") {
            cur.expect_fields(f, 3, 3, "bus p q");
            Load l;
            l.bus = cur.bus_id(f[0]);
            l.p_req = cur.number(f[1], "p");
            l.q_req = cur.number(f[2], "q");
            n.loads.push_back(l);
            p.context.emplace("load at bus " + std::to_string(l.bus) + ": ", std::pair{cur.line, cur.section});
        } else if (cur.section == "facts") {
            const FactsDevice d = parse_device_fields(cur, f);
            n.facts_devices.push_back(d);
            p.context.emplace(to_string(d.kind) + " " + std::to_string(d.from_bus) + "-" + std::to_string(d.to_bus) +
                                  ": ",
                              std::pair{cur.line, cur.section});
        } else if (cur.section == "study") {
            const auto [key, val] = key_value(cur, line);
            parse_study_key(cur, key, val, *p.study);
        } else if (cur.section == "scenario") {
            const auto [key, val] = key_value(cur, line);
            parse_scenario_key(cur, key, val, *scenario);
        }
    }
    return p;
}

std::string scaled_fixed(double v, double scale = 1.0) { return format_fixed(v * scale); }

std::string join(const std::vector<std::string>& cells, const char* sep) {
    std::string out;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (k) out += sep;
        out += cells[k];
    }
    return out;
}

std::string csv_safe(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

double rad_to_deg(double r) { return r * 180.0 / std::numbers::pi; }

}  // namespace

CaseData parse_case(std::string_view text) {
    Parsed p = parse_text(text, Mode::Case);
    Network& n = p.network;
    if (p.slack) {
        const auto k = n.bus_index(*p.slack);
        if (!k) throw ParseError(p.slack_line, "system", "slack bus " + std::to_string(*p.slack) + " not in [bus]");
        if (n.buses[*k].kind != BusKind::Slack)
            throw ParseError(p.slack_line, "system",
                             "slack=" + std::to_string(*p.slack) + " but bus is declared " + to_string(n.buses[*k].kind));
    }
    const auto rep = validate(n);
    if (!rep.ok()) {
        const std::string& v = rep.violations.front();
        for (const auto& [tag, where] : p.context)
            if (v.starts_with(tag)) throw ParseError(where.first, where.second, v);
        throw ParseError(0, "", v);
    }
    return {std::move(n), std::move(p.study)};
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CaseData load_case(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return parse_case(text);
    } catch (const ParseError& e) {
        throw ParseError(e.line(), e.section(), path.string() + ": " + e.detail());
    }
}

StudySpec parse_study(std::string_view text) {
    Parsed p = parse_text(text, Mode::StudyOnly);
    return p.study.value_or(StudySpec{});
}

StudySpec load_study(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return parse_study(text);
    } catch (const ParseError& e) {
        throw ParseError(e.line(), e.section(), path.string() + ": " + e.detail());
    }
}

FactsDevice parse_device(std::string_view record) {
    Cursor cur;
    cur.section = "facts";
    return parse_device_fields(cur, split_ws(trim(record)));
}

std::string emit_device(const FactsDevice& d) {
    std::string s = to_string(d.kind) + " " + std::to_string(d.from_bus) + " " + std::to_string(d.to_bus) + " " +
                    num(d.p_inj_limits.max) + " " + num(d.q_inj1_limits.max) + " " + num(d.q_inj2_limits.max);
    auto key = [&](const char* k, double v) { s += std::string(" ") + k + "=" + num(v); };
    const FactsDevice def;
    if (d.p_inj_limits.min != -d.p_inj_limits.max) key("pinj_min", d.p_inj_limits.min);
    if (d.q_inj1_limits.min != -d.q_inj1_limits.max) key("qinj1_min", d.q_inj1_limits.min);
    if (d.q_inj2_limits.min != -d.q_inj2_limits.max) key("qinj2_min", d.q_inj2_limits.min);
    if (d.v_t_limits.min != def.v_t_limits.min) key("vt_min", d.v_t_limits.min);
    if (d.v_t_limits.max != def.v_t_limits.max) key("vt_max", d.v_t_limits.max);
    if (d.i_q_limits.min != def.i_q_limits.min) key("iq_min", d.i_q_limits.min);
    if (d.i_q_limits.max != def.i_q_limits.max) key("iq_max", d.i_q_limits.max);
    if (d.controls.v_t != 0.0) key("vt", d.controls.v_t);
    if (d.controls.phi_t != 0.0) key("phi_rad", d.controls.phi_t);
    if (d.controls.i_q != 0.0) key("iq", d.controls.i_q);
    if (d.series_admittance) {
        key("g", d.series_admittance->real());
        key("b", d.series_admittance->imag());
    }
    return s;
}

LcritMap parse_lcrit_list(std::string_view text) {
    Cursor cur;
    cur.section = "lcrit";
    LcritMap m;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const auto item = trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        pos = comma == std::string_view::npos ? text.size() + 1 : comma + 1;
        if (item.empty()) cur.fail("empty entry in '" + std::string(text) + "'");
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) {
            m.default_value = cur.number(item, "lcrit");
        } else {
            const int bus = cur.bus_id(trim(item.substr(0, eq)));
            m.per_bus[bus] = cur.number(trim(item.substr(eq + 1)), "lcrit");
        }
    }
    for (const auto& [bus, v] : m.per_bus)
        if (!(v > 0.0)) cur.fail("lcrit at bus " + std::to_string(bus) + " must be positive");
    if (m.default_value && !(*m.default_value > 0.0)) cur.fail("lcrit must be positive");
    return m;
}

namespace {

void emit_common(std::ostringstream& out, const LcritMap& lcrit, const std::map<int, Complex>& loads) {
    if (lcrit.default_value) out << "lcrit=" << num(*lcrit.default_value) << "\n";
    for (const auto& [bus, v] : lcrit.per_bus) out << "lcrit." << bus << "=" << num(v) << "\n";
    for (const auto& [bus, s] : loads) out << "load." << bus << "=" << num(s.real()) << "," << num(s.imag()) << "\n";
}

void emit_study_sections(std::ostringstream& out, const StudySpec& spec) {
    out << "[study]\n";
    if (!spec.name.empty()) out << "name=" << spec.name << "\n";
    out << "type=" << to_string(spec.type) << "\n";
    if (!spec.case_path.empty()) out << "case=" << spec.case_path << "\n";
    if (spec.outage) out << "outage=" << spec.outage->label() << "\n";
    emit_common(out, spec.lcrit, spec.loads);
    out << "objective=" << spec.objective << "\n";
    out << "seed=" << spec.seed << "\n";
    if (spec.focus_bus) out << "bus=" << *spec.focus_bus << "\n";
    if (spec.watch_branch) out << "branch=" << spec.watch_branch->label() << "\n";
    for (const auto& sc : spec.scenarios) {
        out << "\n[scenario " << sc.name << "]\n";
        if (!sc.row.empty()) out << "row=" << sc.row << "\n";
        if (!sc.column.empty()) out << "column=" << sc.column << "\n";
        if (sc.clear_outage) out << "outage=none\n";
        else if (sc.outage) out << "outage=" << sc.outage->label() << "\n";
        emit_common(out, sc.lcrit, sc.loads);
        for (const auto& d : sc.devices) out << "device=" << emit_device(d) << "\n";
    }
}

}  // namespace

std::string emit_case(const Network& n, const std::optional<StudySpec>& study) {
    std::ostringstream out;
    out << "[system]\nbase_mva=" << num(n.base_mva);
    if (const auto k = n.slack_index()) out << " slack=" << n.buses[*k].id;
    out << "\n\n[bus]\n";
    for (const auto& b : n.buses) {
        out << b.id << " " << (b.kind == BusKind::Slack ? "slack" : b.kind == BusKind::PV ? "pv" : "pq") << " "
            << num(b.v_min) << " " << num(b.v_max);
        if (b.v_setpoint) out << " " << num(*b.v_setpoint);
        out << "\n";
    }
    out << "\n[branch]\n";
    for (const auto& br : n.branches) {
        out << br.from_bus << " " << br.to_bus << " " << num(br.r) << " " << num(br.x) << " " << num(br.b) << " "
            << num(br.rating_mva) << (br.in_service ? "" : " off") << "\n";
    }
    out << "\n[generator]\n";
    for (const auto& g : n.generators)
        out << g.bus << " " << num(g.p_min) << " " << num(g.p_max) << " " << num(g.q_min) << " " << num(g.q_max)
            << " " << num(g.p_setpoint) << "\n";
    out << "\n[load]\n";
    for (const auto& l : n.loads) out << l.bus << " " << num(l.p_req) << " " << num(l.q_req) << "\n";
    out << "\n[facts]\n";
    for (const auto& d : n.facts_devices) out << emit_device(d) << "\n";
    if (study) {
        out << "\n";
        emit_study_sections(out, *study);
    }
    return out.str();
}

std::string emit_study(const StudySpec& spec) {
    std::ostringstream out;
    emit_study_sections(out, spec);
    return out.str();
}

std::string format_fixed(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", value);
    std::string s(buf);
    if (s == "-0.0000") s = "0.0000";
    return s;
}

std::string emit_report(const PowerFlowSolution& sol, const ReportOptions& opt) {
    const double k = opt.units == Units::MegaWatt ? opt.base_mva : 1.0;
    std::ostringstream out;
    if (opt.format == ReportFormat::Csv) {
        out << "element,id,quantity,value\n";
        for (std::size_t i = 0; i < sol.bus_ids.size(); ++i) {
            const std::string id = std::to_string(sol.bus_ids[i]);
            out << "bus," << id << ",vm," << format_fixed(sol.vm[i]) << "\n";
            out << "bus," << id << ",va_deg," << format_fixed(rad_to_deg(sol.va[i])) << "\n";
            if (i < sol.generation.size() && sol.generation[i] != Complex{}) {
                out << "bus," << id << ",p_gen," << scaled_fixed(sol.generation[i].real(), k) << "\n";
                out << "bus," << id << ",q_gen," << scaled_fixed(sol.generation[i].imag(), k) << "\n";
            }
        }
        for (const auto& f : sol.flows) {
            if (!f.in_service) continue;
            const std::string fwd = std::to_string(f.from_bus) + "-" + std::to_string(f.to_bus);
            const std::string rev = std::to_string(f.to_bus) + "-" + std::to_string(f.from_bus);
            out << "branch," << fwd << ",p," << scaled_fixed(f.p_from(), k) << "\n";
            out << "branch," << fwd << ",q," << scaled_fixed(f.q_from(), k) << "\n";
            out << "branch," << fwd << ",s," << scaled_fixed(f.apparent_from(), k) << "\n";
            out << "branch," << rev << ",p," << scaled_fixed(f.p_to(), k) << "\n";
            out << "branch," << rev << ",q," << scaled_fixed(f.q_to(), k) << "\n";
            out << "branch," << rev << ",s," << scaled_fixed(f.apparent_to(), k) << "\n";
        }
        return out.str();
    }
    out << "power flow: " << to_string(sol.status) << " after " << sol.iterations << " iterations\n";
    out << "bus, vm, va_deg, p_gen, q_gen\n";
    for (std::size_t i = 0; i < sol.bus_ids.size(); ++i) {
        const Complex g = i < sol.generation.size() ? sol.generation[i] : Complex{};
        out << sol.bus_ids[i] << ", " << format_fixed(sol.vm[i]) << ", " << format_fixed(rad_to_deg(sol.va[i])) << ", "
            << scaled_fixed(g.real(), k) << ", " << scaled_fixed(g.imag(), k) << "\n";
    }
    out << "\nbranch, p_from, q_from, s_from, p_to, q_to, s_to\n";
    for (const auto& f : sol.flows) {
        if (!f.in_service) continue;
        out << f.from_bus << "-" << f.to_bus << ", " << scaled_fixed(f.p_from(), k) << ", " << scaled_fixed(f.q_from(), k)
            << ", " << scaled_fixed(f.apparent_from(), k) << ", " << scaled_fixed(f.p_to(), k) << ", "
            << scaled_fixed(f.q_to(), k) << ", " << scaled_fixed(f.apparent_to(), k) << "\n";
    }
    return out.str();
}

std::string emit_report(const StabilityReport& rep, const ReportOptions& opt) {
    const bool csv = opt.format == ReportFormat::Csv;
    const char* sep = csv ? "," : ", ";
    std::ostringstream out;
    out << join({"bus", csv ? "l_index" : "index", "vm", "va_deg"}, sep) << "\n";
    for (std::size_t j = 0; j < rep.load_bus_ids.size(); ++j)
        out << join({std::to_string(rep.load_bus_ids[j]), format_fixed(rep.l_index[j]), format_fixed(rep.vm[j]),
                     format_fixed(rad_to_deg(rep.va[j]))},
                    sep)
            << "\n";
    return out.str();
}

std::string emit_report(const CurtailmentResult& res, const ReportOptions& opt) {
    const double k = opt.units == Units::MegaWatt ? opt.base_mva : 1.0;
    const bool csv = opt.format == ReportFormat::Csv;
    const char* sep = csv ? "," : ", ";
    std::ostringstream out;
    if (!csv) {
        out << "status: " << to_string(res.status) << "\n";
        out << "total curtailment: " << scaled_fixed(res.total_curtailment, k) << "\n\n";
    }
    out << join({"bus", "p_req", "q_req", "p_served", "q_served", "p_curtailed", "q_curtailed"}, sep) << "\n";
    for (const auto& l : res.loads)
        out << join({std::to_string(l.bus), scaled_fixed(l.p_req, k), scaled_fixed(l.q_req, k), scaled_fixed(l.p_served(), k),
                     scaled_fixed(l.q_served(), k), scaled_fixed(l.p_curtailed(), k), scaled_fixed(l.q_curtailed(), k)},
                    sep)
            << "\n";
    if (csv) return out.str();

    out << "\nbus, index, vm, va_deg\n";
    const auto& st = res.stability;
    for (std::size_t j = 0; j < st.load_bus_ids.size(); ++j)
        out << st.load_bus_ids[j] << ", " << format_fixed(st.l_index[j]) << ", " << format_fixed(st.vm[j]) << ", "
            << format_fixed(rad_to_deg(st.va[j])) << "\n";
    if (!res.generators.empty()) {
        out << "\ngenerator, p, q\n";
        for (const auto& g : res.generators) out << g.bus << ", " << scaled_fixed(g.p, k) << ", " << scaled_fixed(g.q, k) << "\n";
    }
    if (!res.devices.empty()) {
        out << "\ndevice, v_t, phi_deg, i_q, p_inj, q_inj1, q_inj2, p_j, q_j\n";
        for (const auto& d : res.devices) {
            const auto& c = d.device.controls;
            const auto& i = d.injections;
            out << to_string(d.device.kind) << " " << d.device.from_bus << "-" << d.device.to_bus << ", "
                << format_fixed(c.v_t) << ", " << format_fixed(rad_to_deg(c.phi_t)) << ", " << format_fixed(c.i_q)
                << ", " << scaled_fixed(i.p_i, k) << ", " << scaled_fixed(i.q_i1, k) << ", " << scaled_fixed(i.q_i2, k) << ", "
                << scaled_fixed(i.p_j, k) << ", " << scaled_fixed(i.q_j, k) << "\n";
        }
    }
    const auto bind = res.binding();
    if (!bind.empty()) {
        out << "\nbinding:";
        for (const auto* c : bind) out << " [" << c->name << "]";
        out << "\n";
    }
    return out.str();
}

namespace {

std::string cell_status(const CellResult& c) {
    if (c.curtailment) return to_string(c.curtailment->status);
    if (c.power_flow) return to_string(c.power_flow->status);
    return "error";
}

std::string emit_snapshot(const SweepResult& sw, const ReportOptions& opt) {
    const double k = opt.units == Units::MegaWatt ? opt.base_mva : 1.0;
    std::ostringstream out;
    if (opt.format == ReportFormat::Csv) {
        out << "scenario,status,bus,l_index,vm,va_deg\n";
        for (const auto& c : sw.cells) {
            if (!c.stability) {
                out << csv_safe(c.scenario.name) << ",error: " << csv_safe(c.error) << ",,,,\n";
                continue;
            }
            const auto& st = *c.stability;
            for (std::size_t j = 0; j < st.load_bus_ids.size(); ++j)
                out << csv_safe(c.scenario.name) << "," << cell_status(c) << "," << st.load_bus_ids[j] << ","
                    << format_fixed(st.l_index[j]) << "," << format_fixed(st.vm[j]) << ","
                    << format_fixed(rad_to_deg(st.va[j])) << "\n";
        }
        return out.str();
    }
    bool first = true;
    for (const auto& c : sw.cells) {
        if (!first) out << "\n";
        first = false;
        out << "scenario: " << c.scenario.name << " (" << cell_status(c) << ")\n";
        if (!c.stability) {
            out << "error: " << c.error << "\n";
            continue;
        }
        if (sw.watch_branch && c.power_flow) {
            const int a = sw.watch_branch->a, b = sw.watch_branch->b;
            if (const auto* f = c.power_flow->flow(*sw.watch_branch); f && f->in_service) {
                const Complex sab = c.power_flow->flow_from(a, b);
                const Complex sba = c.power_flow->flow_from(b, a);
                const std::string ab = std::to_string(a) + "-" + std::to_string(b);
                const std::string ba = std::to_string(b) + "-" + std::to_string(a);
                out << "quantity, value, quantity, value\n";
                out << "P_" << ab << ", " << scaled_fixed(sab.real(), k) << ", P_" << ba << ", " << scaled_fixed(sba.real(), k) << "\n";
                out << "Q_" << ab << ", " << scaled_fixed(sab.imag(), k) << ", Q_" << ba << ", " << scaled_fixed(sba.imag(), k) << "\n";
                out << "S_" << ab << ", " << scaled_fixed(std::abs(sab), k) << ", S_" << ba << ", "
                    << scaled_fixed(std::abs(sba), k) << "\n";
            }
        }
        out << emit_report(*c.stability, opt);
    }
    return out.str();
}

enum class Focus { Curtailment, Voltage, Index };

std::string focus_value(const CellResult& c, std::optional<int> bus, Focus what, double scale = 1.0) {
    if (!c.curtailment || !bus) return "";
    const auto& r = *c.curtailment;
    switch (what) {
    case Focus::Curtailment: return scaled_fixed(r.curtailment_at(*bus), scale);
    case Focus::Voltage: return format_fixed(r.vm_at(*bus));
    case Focus::Index: {
        const auto l = r.stability.index_at(*bus);
        return l ? format_fixed(*l) : "";
    }
    }
    return "";
}

std::string emit_opf_sweep(const SweepResult& sw, const ReportOptions& opt) {
    const double k = opt.units == Units::MegaWatt ? opt.base_mva : 1.0;
    std::ostringstream out;
    const std::string b = sw.focus_bus ? std::to_string(*sw.focus_bus) : "";
    if (opt.format == ReportFormat::Csv) {
        out << "scenario,row,column,status,l_crit,total_curtailment,curtailment_bus" << b << ",vm_bus" << b
            << ",index_bus" << b << ",note\n";
        for (const auto& c : sw.cells) {
            out << csv_safe(c.scenario.name) << "," << csv_safe(c.scenario.row) << "," << csv_safe(c.scenario.column)
                << "," << cell_status(c) << "," << (c.l_crit_focus ? format_fixed(*c.l_crit_focus) : "") << ","
                << (c.curtailment ? scaled_fixed(c.curtailment->total_curtailment, k) : "") << ",";
            out << focus_value(c, sw.focus_bus, Focus::Curtailment, k) << ","
                << focus_value(c, sw.focus_bus, Focus::Voltage) << "," << focus_value(c, sw.focus_bus, Focus::Index) << ","
                << csv_safe(c.error) << "\n";
        }
        return out.str();
    }
    auto value = [&](const CellResult* c) -> std::string {
        if (!c) return "-";
        if (!c->curtailment) return "error";
        const double v = sw.focus_bus ? c->curtailment->curtailment_at(*sw.focus_bus) : c->curtailment->total_curtailment;
        std::string s = scaled_fixed(v, k);
        if (!c->ok) s += " (" + cell_status(*c) + ")";
        return s;
    };
    if (sw.type == StudyType::Placement && !sw.columns.empty()) {
        out << "curtailment" << (sw.focus_bus ? " at bus " + b : std::string(" total")) << "\n";
        std::vector<std::string> head{"placement"};
        head.insert(head.end(), sw.columns.begin(), sw.columns.end());
        out << join(head, ", ") << "\n";
        for (const auto& row : sw.rows) {
            std::vector<std::string> line{row};
            for (const auto& col : sw.columns) line.push_back(value(sw.at(row, col)));
            out << join(line, ", ") << "\n";
        }
        for (const auto& c : sw.cells)
            if (!c.error.empty()) out << "note: " << c.scenario.name << ": " << c.error << "\n";
        return out.str();
    }
    out << join({"scenario", "l_crit", "curtailment" + (b.empty() ? std::string() : " at bus " + b),
                 "vm" + (b.empty() ? std::string() : " at bus " + b), "index" + (b.empty() ? std::string() : " at bus " + b)},
                ", ")
        << "\n";
    for (const auto& c : sw.cells) {
        out << join({c.scenario.name, c.l_crit_focus ? format_fixed(*c.l_crit_focus) : "-", value(&c),
                     focus_value(c, sw.focus_bus, Focus::Voltage), focus_value(c, sw.focus_bus, Focus::Index)},
                    ", ")
            << "\n";
    }
    for (const auto& c : sw.cells)
        if (!c.error.empty()) out << "note: " << c.scenario.name << ": " << c.error << "\n";
    return out.str();
}

}  // namespace

std::string emit_report(const SweepResult& sweep, const ReportOptions& options) {
    return sweep.type == StudyType::Snapshot ? emit_snapshot(sweep, options) : emit_opf_sweep(sweep, options);
}

}  // namespace gridcurb
