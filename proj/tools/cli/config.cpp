#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mrcal/error.hpp"

namespace mrcal::app {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

template <class E>
struct Names {
    E value;
    std::string_view name;
};

constexpr Names<Command> kCommands[] = {
    {Command::CalibrateMR, "calibrate-mr"},       {Command::CalibrateBS, "calibrate-bs"},
    {Command::CalibrateSP, "calibrate-sp"},       {Command::CalibrateJoint, "calibrate-joint"},
    {Command::Simulate, "simulate"},              {Command::Selftest, "selftest"},
};

constexpr Names<SimModel> kSimModels[] = {
    {SimModel::MR, "mr"}, {SimModel::BS, "bs"}, {SimModel::SP, "sp"}, {SimModel::Joint, "joint"}};

constexpr Names<Measure> kMeasures[] = {{Measure::RiskNeutral, "risk-neutral"}, {Measure::RealWorld, "real-world"}};

template <class E, std::size_t N>
std::string_view name_of(const Names<E> (&table)[N], E value) {
    for (const auto& n : table)
        if (n.value == value) return n.name;
    return "?";
}

template <class E, std::size_t N>
std::optional<E> value_of(const Names<E> (&table)[N], std::string_view text) {
    for (const auto& n : table)
        if (n.name == text) return n.value;
    return std::nullopt;
}

template <class T>
T require(std::optional<T> v, std::string_view what, const std::string& text) {
    if (!v) throw Error("invalid " + std::string(what) + ": '" + text + "'");
    return *v;
}

Timestamp require_timestamp(const std::string& text) {
    return require(parse_timestamp(text), "date", text);
}

std::string model_name(Transform t) { return t == Transform::Log ? "lognormal" : "normal"; }

Transform parse_model(const std::string& text) {
    if (text == "lognormal") return Transform::Log;
    if (text == "normal") return Transform::Identity;
    throw Error("invalid model: '" + text + "' (expected lognormal or normal)");
}

template <class T>
void get_opt(const json& j, const char* key, std::optional<T>& out) {
    if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

void get_path(const json& j, const char* key, std::optional<std::filesystem::path>& out) {
    if (j.contains(key) && !j[key].is_null()) out = j[key].get<std::string>();
}

template <class T>
void put_opt(ordered_json& j, const char* key, const std::optional<T>& v) {
    if (v)
        j[key] = *v;
    else
        j[key] = nullptr;
}

void put_path(ordered_json& j, const char* key, const std::optional<std::filesystem::path>& v) {
    if (v)
        j[key] = v->generic_string();
    else
        j[key] = nullptr;
}

}  // namespace

std::string_view to_string(Command c) { return name_of(kCommands, c); }
std::optional<Command> parse_command(std::string_view text) { return value_of(kCommands, text); }
std::string_view to_string(SimModel m) { return name_of(kSimModels, m); }
std::string_view to_string(Measure m) { return name_of(kMeasures, m); }

InputSpec parse_input(std::string_view text) {
    const auto eq = text.find('=');
    if (eq == std::string_view::npos || eq == 0 || eq + 1 == text.size())
        throw Error("invalid --input '" + std::string(text) + "' (expected label=path[:column])");
    InputSpec spec;
    spec.label = std::string(text.substr(0, eq));
    std::string rest(text.substr(eq + 1));
    // A trailing ":column" is split off unless the remainder names an
    // existing file (paths may legitimately contain colons).
    const auto colon = rest.rfind(':');
    if (colon != std::string::npos && colon + 1 < rest.size() && !std::filesystem::exists(rest)) {
        spec.column = rest.substr(colon + 1);
        rest.resize(colon);
    }
    spec.path = rest;
    return spec;
}

GridSpec parse_grid(std::string_view text) {
    const auto last = text.rfind(':');
    if (last == std::string_view::npos) throw Error("invalid --grid '" + std::string(text) + "' (expected start:end:freq)");
    const std::string freq(text.substr(last + 1));
    const auto span = text.substr(0, last);
    GridSpec g;
    g.freq = require(sim::parse_grid_frequency(freq), "grid frequency", freq);
    for (auto pos = span.find(':'); pos != std::string_view::npos; pos = span.find(':', pos + 1)) {
        const auto a = parse_timestamp(span.substr(0, pos));
        const auto b = parse_timestamp(span.substr(pos + 1));
        if (a && b) {
            g.start = *a;
            g.end = *b;
            if (g.end < g.start) throw Error("invalid --grid: end precedes start");
            return g;
        }
    }
    throw Error("invalid --grid '" + std::string(text) + "' (expected start:end:freq)");
}

void validate(const RunConfig& c) {
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
    if (!(c.trim >= 0.0 && c.trim <= 0.05)) throw Error("trim must lie in [0, 0.05]");
    if (!(c.max_corr_width > 0.0)) throw Error("max correlation width must be positive");
    if (c.paths < 1) throw Error("paths must be at least 1");
    for (const auto& in : c.inputs)
        if (in.label.empty()) throw Error("input label must not be empty");
    for (std::size_t i = 0; i < c.inputs.size(); ++i)
        for (std::size_t j = i + 1; j < c.inputs.size(); ++j)
            if (c.inputs[i].label == c.inputs[j].label) throw Error("duplicate input label '" + c.inputs[i].label + "'");
    const auto check_curve = [](const std::vector<double>& v, const char* what, bool corr) {
        if (!(v.empty() || v.size() == 1 || v.size() == 12))
            throw Error(std::string(what) + " takes 1 or 12 values");
        for (double x : v) {
            if (!std::isfinite(x)) throw Error(std::string(what) + " values must be finite");
            if (!corr && x < 0.0) throw Error(std::string(what) + " values must be >= 0");
            if (corr && std::abs(x) > 1.0) throw Error(std::string(what) + " values must lie in [-1, 1]");
        }
    };
    check_curve(c.sim.sigma, "--sigma", false);
    check_curve(c.sim.sigma_index, "--sigma-index", false);
    check_curve(c.sim.rho, "--rho", true);
    if (!(c.sim.rate >= 0.0)) throw Error("--rate must be >= 0");
    if (!(c.sim.forward_rate >= 0.0)) throw Error("--forward-rate must be >= 0");
}

ordered_json to_json(const RunConfig& c) {
    ordered_json j;
    j["command"] = to_string(c.command);
    j["inputs"] = ordered_json::array();
    for (const auto& in : c.inputs)
        j["inputs"].push_back({{"label", in.label}, {"path", in.path.generic_string()}, {"column", in.column}});
    j["model"] = model_name(c.transform);
    j["level_granularity"] = to_string(c.level);
    j["vol_granularity"] = to_string(c.vol);
    j["corr_granularity"] = to_string(c.corr);
    j["alpha"] = c.alpha;
    j["trim"] = c.trim;
    j["biased_vol"] = c.biased_vol;
    j["max_corr_width"] = c.max_corr_width;
    j["sp_pairs"] = ordered_json::array();
    for (const auto& [s, i] : c.sp_pairs) j["sp_pairs"].push_back({{"spot", s}, {"index", i}});
    j["bs_members"] = c.bs_members;
    j["seed"] = c.seed;
    j["paths"] = c.paths;
    if (c.grid)
        j["grid"] = {{"start", format_timestamp(c.grid->start)},
                     {"end", format_timestamp(c.grid->end)},
                     {"freq", sim::to_string(c.grid->freq)}};
    else
        j["grid"] = nullptr;
    put_path(j, "roll_dates", c.roll_dates);

    ordered_json s;
    s["model"] = to_string(c.sim.model);
    s["measure"] = to_string(c.sim.measure);
    s["rate"] = c.sim.rate;
    s["sigma"] = c.sim.sigma;
    s["sigma_index"] = c.sim.sigma_index;
    s["rho"] = c.sim.rho;
    s["forward_rate"] = c.sim.forward_rate;
    put_opt(s, "flat_curve", c.sim.flat_curve);
    put_path(s, "curve", c.sim.curve);
    put_path(s, "params", c.sim.params);
    s["member"] = c.sim.member;
    put_opt(s, "start_price", c.sim.start_price);
    put_opt(s, "start_index", c.sim.start_index);
    put_path(s, "paths_out", c.sim.paths_out);
    j["simulation"] = std::move(s);

    put_path(j, "out", c.out);
    j["format"] = c.format == ReportFormat::Json ? "json" : "text";
    return j;
}

RunConfig config_from_json(const json& j, RunConfig c) {
    if (!j.is_object()) throw Error("config must be a JSON object");
    try {
        if (j.contains("command")) {
            const auto text = j["command"].get<std::string>();
            c.command = require(parse_command(text), "command", text);
        }
        if (j.contains("inputs")) {
            c.inputs.clear();
            for (const auto& in : j["inputs"])
                c.inputs.push_back({in.at("label").get<std::string>(), in.at("path").get<std::string>(),
                                    in.value("column", std::string{})});
        }
        if (j.contains("model")) c.transform = parse_model(j["model"].get<std::string>());
        if (j.contains("level_granularity")) {
            const auto t = j["level_granularity"].get<std::string>();
            c.level = require(parse_level_granularity(t), "level granularity", t);
        }
        if (j.contains("vol_granularity")) {
            const auto t = j["vol_granularity"].get<std::string>();
            c.vol = require(parse_period_granularity(t), "vol granularity", t);
        }
        if (j.contains("corr_granularity")) {
            const auto t = j["corr_granularity"].get<std::string>();
            c.corr = require(parse_period_granularity(t), "corr granularity", t);
        }
        c.alpha = j.value("alpha", c.alpha);
        c.trim = j.value("trim", c.trim);
        c.biased_vol = j.value("biased_vol", c.biased_vol);
        c.max_corr_width = j.value("max_corr_width", c.max_corr_width);
        if (j.contains("sp_pairs")) {
            c.sp_pairs.clear();
            for (const auto& p : j["sp_pairs"])
                c.sp_pairs.emplace_back(p.at("spot").get<std::string>(), p.at("index").get<std::string>());
        }
        if (j.contains("bs_members")) c.bs_members = j["bs_members"].get<std::vector<std::string>>();
        c.seed = j.value("seed", c.seed);
        c.paths = j.value("paths", c.paths);
        if (j.contains("grid") && !j["grid"].is_null()) {
            const auto& g = j["grid"];
            GridSpec spec;
            spec.start = require_timestamp(g.at("start").get<std::string>());
            spec.end = require_timestamp(g.at("end").get<std::string>());
            const auto f = g.at("freq").get<std::string>();
            spec.freq = require(sim::parse_grid_frequency(f), "grid frequency", f);
            c.grid = spec;
        }
        get_path(j, "roll_dates", c.roll_dates);
        if (j.contains("simulation")) {
            const auto& s = j["simulation"];
            if (s.contains("model")) {
                const auto t = s["model"].get<std::string>();
                c.sim.model = require(value_of(kSimModels, t), "simulation model", t);
            }
            if (s.contains("measure")) {
                const auto t = s["measure"].get<std::string>();
                c.sim.measure = require(value_of(kMeasures, t), "measure", t);
            }
            c.sim.rate = s.value("rate", c.sim.rate);
            if (s.contains("sigma")) c.sim.sigma = s["sigma"].get<std::vector<double>>();
            if (s.contains("sigma_index")) c.sim.sigma_index = s["sigma_index"].get<std::vector<double>>();
            if (s.contains("rho")) c.sim.rho = s["rho"].get<std::vector<double>>();
            c.sim.forward_rate = s.value("forward_rate", c.sim.forward_rate);
            get_opt(s, "flat_curve", c.sim.flat_curve);
            get_path(s, "curve", c.sim.curve);
            get_path(s, "params", c.sim.params);
            c.sim.member = s.value("member", c.sim.member);
            get_opt(s, "start_price", c.sim.start_price);
            get_opt(s, "start_index", c.sim.start_index);
            get_path(s, "paths_out", c.sim.paths_out);
        }
        get_path(j, "out", c.out);
        if (j.contains("format")) {
            const auto f = j["format"].get<std::string>();
            if (f == "json")
                c.format = ReportFormat::Json;
            else if (f == "text")
                c.format = ReportFormat::Text;
            else
                throw Error("invalid format: '" + f + "'");
        }
    } catch (const json::exception& e) {
        throw Error(std::string("malformed config: ") + e.what());
    }
    return c;
}

std::vector<Timestamp> load_roll_dates(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open roll dates file " + path.string());
    std::vector<Timestamp> out;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto comma = line.find(',');
        if (comma != std::string::npos) line.resize(comma);
        if (line.empty() || (row == 1 && line == "date")) continue;
        const auto t = parse_timestamp(line);
        if (!t) throw Error(path.string() + ": row " + std::to_string(row) + ": unparseable date '" + line + "'");
        out.push_back(*t);
    }
    std::sort(out.begin(), out.end());
    if (std::adjacent_find(out.begin(), out.end()) != out.end())
        throw Error(path.string() + ": duplicate roll date");
    return out;
}

}  // namespace mrcal::app
