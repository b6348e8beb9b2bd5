#include "app.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <numeric>
#include <set>
#include <sstream>

#include "mrcal/error.hpp"
#include "mrcal/joint.hpp"
#include "mrcal/simulate.hpp"

namespace mrcal::app {

namespace {

// Calibrations of distinct inputs are independent; run them concurrently and
// collect in input order so the report does not depend on scheduling.
template <class T, class F>
std::vector<T> parallel_map(std::size_t n, F f) {
    std::vector<std::future<T>> futures;
    futures.reserve(n);
    for (std::size_t i = 0; i < n; ++i) futures.push_back(std::async(std::launch::async, f, i));
    std::vector<T> out;
    out.reserve(n);
    for (auto& fu : futures) out.push_back(fu.get());
    return out;
}

struct Loaded {
    InputSpec spec;
    PriceSeries series;
    std::uint64_t hash;
};

Loaded load(const InputSpec& in) {
    try {
        auto series = load_csv(in.path, in.column);
        return {in, PriceSeries(in.label, series.observations()), fnv1a64_file(in.path)};
    } catch (const Error& e) {
        throw Error("input '" + in.label + "': " + e.what());
    }
}

Json input_entry(const Loaded& l) {
    Json j;
    j["label"] = l.spec.label;
    j["path"] = l.spec.path.generic_string();
    j["column"] = l.spec.column;
    j["points"] = l.series.size();
    j["first"] = format_timestamp(l.series.front().time);
    j["last"] = format_timestamp(l.series.back().time);
    j["fnv1a64"] = hex64(l.hash);
    return j;
}

Json last_point(const PriceSeries& s) {
    Json j;
    j["time"] = format_timestamp(s.back().time);
    j["value"] = s.back().value;
    return j;
}

void add_diagnostics(Json& report, const std::string& prefix, const std::vector<std::string>& diags) {
    for (const auto& d : diags) report["diagnostics"].push_back(prefix + ": " + d);
}

const Loaded& find_input(const std::vector<Loaded>& inputs, const std::string& label) {
    for (const auto& l : inputs)
        if (l.spec.label == label) return l;
    throw Error("no input labelled '" + label + "'");
}

mr::CalibrationOptions mr_options(const RunConfig& c) {
    mr::CalibrationOptions o;
    o.transform = c.transform;
    o.shape.level = c.level;
    o.shape.vol = c.vol;
    o.unbiased = !c.biased_vol;
    o.alpha = c.alpha;
    return o;
}

sp::SPOptions sp_options(const RunConfig& c) {
    if (c.transform != Transform::Log) throw Error("the Spot-Prompt model is lognormal; --model normal is not supported");
    sp::SPOptions o;
    o.shape.level = c.level;
    o.shape.vol = c.vol;
    o.corr = c.corr;
    o.unbiased = !c.biased_vol;
    o.alpha = c.alpha;
    if (c.roll_dates) o.roll_dates = load_roll_dates(*c.roll_dates);
    return o;
}

// ---------------------------------------------------------------------------
// Calibration commands.

struct Member {
    std::string label;
    joint::ModelKind kind = joint::ModelKind::MR;
    Json entry;
    std::vector<joint::Factor> factors;
    std::vector<std::string> diagnostics;
};

Member calibrate_mr_member(const Loaded& in, const RunConfig& c) {
    auto cal = mr::calibrate(in.series, mr_options(c));
    Member m;
    m.label = in.spec.label;
    m.kind = joint::ModelKind::MR;
    Json& e = m.entry;
    e["label"] = m.label;
    e["params"] = to_json(cal.params);
    Json seed;
    seed["rate"] = cal.seed.rate;
    put_number(seed, "stderr", cal.seed.stderr_rate, "regression slope outside (0, 1); fallback seed");
    seed["kappa"] = cal.seed.kappa;
    seed["fallback"] = cal.seed.fallback;
    e["regression_seed"] = std::move(seed);
    e["daycount"] = cal.daycount;
    put_number(e, "loglik", cal.loglik, "degenerate fit");
    e["fit"] = to_json(cal.fit);
    e["last"] = last_point(in.series);
    m.factors.push_back({m.label, joint::ModelKind::MR, joint::FactorRole::Spot, std::move(cal.residuals)});
    m.diagnostics = std::move(cal.diagnostics);
    return m;
}

Member calibrate_bs_member(const Loaded& in, const RunConfig& c) {
    auto cal = mr::calibrate_bs(in.series, mr_options(c));
    Member m;
    m.label = in.spec.label;
    m.kind = joint::ModelKind::BS;
    m.entry["label"] = m.label;
    m.entry["params"] = to_json(cal.params);
    m.entry["fit"] = to_json(cal.fit);
    m.entry["last"] = last_point(in.series);
    m.factors.push_back({m.label, joint::ModelKind::BS, joint::FactorRole::Spot, std::move(cal.residuals)});
    m.diagnostics = std::move(cal.diagnostics);
    return m;
}

Member calibrate_sp_member(const Loaded& spot, const Loaded& index, const RunConfig& c) {
    auto cal = sp::calibrate_sp(spot.series, index.series, sp_options(c));
    Member m;
    m.label = spot.spec.label;
    m.kind = joint::ModelKind::SP;
    Json& e = m.entry;
    e["label"] = m.label;
    e["index"] = index.spec.label;
    e["params"] = to_json(cal.params);
    put_number(e, "loglik", cal.quotient.loglik, "degenerate fit");
    e["fit"] = to_json(cal.quotient.fit);
    if (cal.spot_fit) e["spot_fit"] = to_json(*cal.spot_fit);
    if (cal.index_fit) e["index_fit"] = to_json(*cal.index_fit);
    e["last"] = {{"time", format_timestamp(spot.series.back().time)},
                 {"value", spot.series.back().value},
                 {"index_time", format_timestamp(index.series.back().time)},
                 {"index_value", index.series.back().value}};
    m.factors.push_back({m.label, joint::ModelKind::SP, joint::FactorRole::Spot, std::move(cal.spot_factor)});
    m.factors.push_back({m.label, joint::ModelKind::SP, joint::FactorRole::Index, std::move(cal.index_factor)});
    m.diagnostics = std::move(cal.diagnostics);
    return m;
}

std::vector<Loaded> load_all(const RunConfig& c, Json& report) {
    if (c.inputs.empty()) throw Error("no --input given");
    auto loaded = parallel_map<Loaded>(c.inputs.size(), [&](std::size_t i) { return load(c.inputs[i]); });
    for (const auto& l : loaded) report["inputs"].push_back(input_entry(l));
    return loaded;
}

void finish_members(Json& report, std::vector<Member>& members) {
    for (auto& m : members) {
        report["models"].push_back(m.entry);
        add_diagnostics(report, m.label, m.diagnostics);
    }
}

void run_calibrate_one_factor(const RunConfig& c, Json& report, bool bs) {
    const auto inputs = load_all(c, report);
    auto members = parallel_map<Member>(inputs.size(), [&](std::size_t i) {
        return bs ? calibrate_bs_member(inputs[i], c) : calibrate_mr_member(inputs[i], c);
    });
    finish_members(report, members);
}

std::vector<std::pair<std::string, std::string>> sp_pairs_for(const RunConfig& c) {
    if (!c.sp_pairs.empty()) return c.sp_pairs;
    if (c.inputs.size() != 2) throw Error("calibrate-sp needs exactly two inputs (spot, index) or --sp-pair");
    return {{c.inputs[0].label, c.inputs[1].label}};
}

void run_calibrate_sp(const RunConfig& c, Json& report) {
    const auto inputs = load_all(c, report);
    const auto pairs = sp_pairs_for(c);
    auto members = parallel_map<Member>(pairs.size(), [&](std::size_t i) {
        return calibrate_sp_member(find_input(inputs, pairs[i].first), find_input(inputs, pairs[i].second), c);
    });
    finish_members(report, members);
}

void run_calibrate_joint(const RunConfig& c, Json& report) {
    const auto inputs = load_all(c, report);
    std::set<std::string> used;
    for (const auto& [s, i] : c.sp_pairs) {
        find_input(inputs, s);
        find_input(inputs, i);
        if (!used.insert(s).second || !used.insert(i).second)
            throw Error("input '" + s + "' or '" + i + "' appears in more than one SP pair");
    }
    for (const auto& b : c.bs_members) {
        find_input(inputs, b);
        if (used.count(b)) throw Error("input '" + b + "' is both a BS member and part of an SP pair");
    }

    // Members in input order; an SP member sits at the position of its spot.
    struct Job {
        joint::ModelKind kind;
        const Loaded* first;
        const Loaded* second;
    };
    std::vector<Job> jobs;
    for (const auto& l : inputs) {
        const auto& label = l.spec.label;
        const auto sp = std::find_if(c.sp_pairs.begin(), c.sp_pairs.end(), [&](const auto& p) { return p.first == label; });
        if (sp != c.sp_pairs.end()) {
            jobs.push_back({joint::ModelKind::SP, &l, &find_input(inputs, sp->second)});
        } else if (used.count(label)) {
            continue;  // index half of a pair
        } else if (std::find(c.bs_members.begin(), c.bs_members.end(), label) != c.bs_members.end()) {
            jobs.push_back({joint::ModelKind::BS, &l, nullptr});
        } else {
            jobs.push_back({joint::ModelKind::MR, &l, nullptr});
        }
    }
    auto members = parallel_map<Member>(jobs.size(), [&](std::size_t i) {
        const auto& j = jobs[i];
        switch (j.kind) {
            case joint::ModelKind::SP: return calibrate_sp_member(*j.first, *j.second, c);
            case joint::ModelKind::BS: return calibrate_bs_member(*j.first, c);
            case joint::ModelKind::MR: break;
        }
        return calibrate_mr_member(*j.first, c);
    });

    std::vector<joint::Factor> factors;
    for (auto& m : members)
        for (auto& f : m.factors) factors.push_back(std::move(f));
    finish_members(report, members);

    const auto model = joint::build_joint(std::move(factors), c.corr, c.alpha, c.trim);
    report["joint"] = to_json(model);
    const auto rec = joint::granularity_check(model, c.max_corr_width);
    Json g;
    g["max_width"] = c.max_corr_width;
    g["flagged"] = Json::array();
    for (const auto& w : rec.flagged)
        g["flagged"].push_back({{"first", model.factors[w.i].name()},
                                {"second", model.factors[w.j].name()},
                                {"bucket", period_label(w.bucket, model.granularity)},
                                {"width", w.width}});
    if (rec.suggestion)
        g["suggestion"] = to_string(*rec.suggestion);
    else
        g["suggestion"] = nullptr;
    g["note"] = rec.note;
    report["granularity_check"] = std::move(g);
    add_diagnostics(report, "joint", model.diagnostics);
}

// ---------------------------------------------------------------------------
// Simulation.

sim::MonthlyCurve monthly(const std::vector<double>& v, const char* what) {
    if (v.size() == 1) return sim::flat_curve(v[0]);
    if (v.size() == 12) {
        sim::MonthlyCurve c{};
        std::copy(v.begin(), v.end(), c.begin());
        return c;
    }
    throw Error(std::string(what) + " is required (1 or 12 values)");
}

sim::ForwardCurve forward_curve(const RunConfig& c, Timestamp start) {
    if (c.sim.curve && c.sim.flat_curve) throw Error("give either --curve or --flat-curve, not both");
    if (c.sim.curve) return sim::load_curve_csv(*c.sim.curve);
    if (c.sim.flat_curve) return sim::ForwardCurve::flat(start, *c.sim.flat_curve);
    throw Error("risk-neutral simulation needs --curve or --flat-curve");
}

nlohmann::json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

const nlohmann::json& pick_model(const nlohmann::json& params, const std::string& member) {
    if (!params.contains("models") || params["models"].empty()) throw Error("parameter report has no models");
    if (member.empty()) return params["models"][0];
    for (const auto& m : params["models"])
        if (m.at("label").get<std::string>() == member) return m;
    throw Error("parameter report has no model labelled '" + member + "'");
}

double start_value(const std::optional<double>& flag, const nlohmann::json& model, const char* key) {
    if (flag) return *flag;
    if (model.contains("last") && model["last"].contains(key)) return model["last"][key].get<double>();
    throw Error(std::string("no start value: pass --start-price/--start-index or use a report with a 'last' block"));
}

std::uint64_t spec_hash(const RunConfig& c) {
    auto j = to_json(c);
    Json h;
    h["simulation"] = j["simulation"];
    h["simulation"].erase("paths_out");
    h["grid"] = j["grid"];
    h["model"] = j["model"];
    h["paths"] = j["paths"];
    h["seed"] = j["seed"];
    std::string bytes = h.dump();
    for (const auto& p : {c.sim.params, c.sim.curve, c.roll_dates})
        if (p) bytes += hex64(fnv1a64_file(*p));
    return fnv1a64(bytes);
}

Json series_summary(const std::string& label, const sim::Paths& p) {
    const std::size_t last = p.grid.size() - 1;
    double s = 0.0, s2 = 0.0;
    for (std::size_t k = 0; k < p.n_paths; ++k) s += p(k, last);
    const double mean = s / static_cast<double>(p.n_paths);
    for (std::size_t k = 0; k < p.n_paths; ++k) s2 += (p(k, last) - mean) * (p(k, last) - mean);
    Json j;
    j["label"] = label;
    put_number(j, "terminal_mean", mean, "not finite");
    put_number(j, "terminal_stddev", p.n_paths > 1 ? std::sqrt(s2 / static_cast<double>(p.n_paths - 1)) : 0.0,
               "not finite");
    return j;
}

void run_simulate(const RunConfig& c, Json& report) {
    if (!c.grid) throw Error("simulate needs --grid start:end:freq");
    const auto grid = sim::make_grid(c.grid->start, c.grid->end, c.grid->freq);
    if (grid.size() < 2) throw Error("simulation grid has fewer than 2 points");
    const auto hash = spec_hash(c);

    std::vector<std::pair<std::string, sim::Paths>> series;
    Json sim_j;
    sim_j["model"] = to_string(c.sim.model);
    sim_j["measure"] = to_string(c.sim.measure);
    sim_j["paths"] = c.paths;
    sim_j["steps"] = grid.size();
    sim_j["start"] = format_timestamp(grid.front());
    sim_j["end"] = format_timestamp(grid.back());
    sim_j["seed"] = c.seed;
    sim_j["spec_hash"] = hex64(hash);

    if (c.sim.model == SimModel::Joint) {
        if (c.sim.measure != Measure::RealWorld) throw Error("joint simulation runs under the real-world measure only");
        if (!c.sim.params) throw Error("joint simulation needs --params (a calibrate-joint report)");
        const auto doc = load_json(*c.sim.params);
        if (!doc.contains("joint")) throw Error("parameter report has no joint section");
        sim::JointSpec spec;
        for (const auto& m : doc.at("models")) {
            sim::JointMember jm;
            jm.label = m.at("label").get<std::string>();
            const auto& p = m.at("params");
            const auto kind = p.at("kind").get<std::string>();
            if (kind == "SP") {
                jm.kind = joint::ModelKind::SP;
                jm.spot_prompt = sp_params_from_json(p);
                jm.index0 = m.at("last").at("index_value").get<double>();
            } else if (kind == "BS") {
                jm.kind = joint::ModelKind::BS;
                jm.one_factor = sim::as_one_factor(bs_params_from_json(p));
            } else {
                jm.one_factor = mr_params_from_json(p);
            }
            jm.spot0 = m.at("last").at("value").get<double>();
            spec.members.push_back(std::move(jm));
        }
        const auto& jj = doc["joint"];
        const auto g = jj.at("granularity").get<std::string>();
        spec.granularity = *parse_period_granularity(g);
        for (const auto& mat : jj.at("matrices")) {
            std::vector<double> v;
            for (const auto& row : mat.at("values"))
                for (const auto& x : row) v.push_back(x.get<double>());
            spec.matrices[mat.at("key").get<int>()] = std::move(v);
        }
        spec.grid = grid;
        spec.n_paths = c.paths;
        spec.seed = c.seed;
        auto out = sim::simulate_joint(spec);
        sim_j["factors"] = out.factor_names;
        sim_j["repairs"] = Json::array();
        for (const auto& r : out.repairs) {
            Json e;
            e["bucket"] = period_label(r.bucket, spec.granularity);
            e["min_eigenvalue"] = r.min_eigenvalue;
            sim_j["repairs"].push_back(e);
            report["diagnostics"].push_back("simulate: bucket " + period_label(r.bucket, spec.granularity) +
                                            " correlation matrix repaired (min eigenvalue " +
                                            std::to_string(r.min_eigenvalue) + ")");
        }
        for (std::size_t i = 0; i < out.labels.size(); ++i) series.emplace_back(out.labels[i], std::move(out.series[i]));
    } else if (c.sim.measure == Measure::RiskNeutral) {
        const auto curve = forward_curve(c, grid.front());
        if (c.sim.model == SimModel::SP) {
            sim::SPRiskNeutralSpec spec;
            spec.a = c.sim.rate;
            spec.b = c.sim.forward_rate;
            spec.curves.sigma_S = monthly(c.sim.sigma, "--sigma");
            spec.curves.sigma_I = monthly(c.sim.sigma_index, "--sigma-index");
            spec.curves.rho = monthly(c.sim.rho, "--rho");
            spec.curve = curve;
            spec.grid = grid;
            if (c.roll_dates) spec.roll_dates = load_roll_dates(*c.roll_dates);
            spec.n_paths = c.paths;
            spec.seed = c.seed;
            auto out = sim::simulate_sp(spec);
            Json rolls = Json::array();
            for (auto t : out.rolls) rolls.push_back(format_timestamp(t));
            sim_j["rolls"] = std::move(rolls);
            series.emplace_back("spot", std::move(out.spot));
            series.emplace_back("index", std::move(out.index));
        } else {
            sim::MRRiskNeutralSpec spec;
            spec.transform = c.transform;
            spec.a = c.sim.model == SimModel::BS ? 0.0 : c.sim.rate;
            spec.sigma = monthly(c.sim.sigma, "--sigma");
            spec.curve = curve;
            spec.grid = grid;
            spec.n_paths = c.paths;
            spec.seed = c.seed;
            series.emplace_back("spot", sim::simulate_mr(spec));
        }
    } else {
        if (!c.sim.params) throw Error("real-world simulation needs --params (a calibration report)");
        const auto doc = load_json(*c.sim.params);
        const auto& model = pick_model(doc, c.sim.member);
        const auto& p = model.at("params");
        const auto kind = p.at("kind").get<std::string>();
        const std::string label = model.at("label").get<std::string>();
        sim::RealWorldOptions opt;
        opt.grid = grid;
        opt.n_paths = c.paths;
        opt.seed = c.seed;
        const auto expect = [&](SimModel m, const char* k) {
            if (c.sim.model != m) throw Error("parameter block is " + kind + " but the simulation model is " +
                                              std::string(to_string(c.sim.model)) + " (expected " + k + ")");
        };
        if (kind == "SP") {
            expect(SimModel::SP, "sp");
            auto out = sim::simulate_sp_realworld(sp_params_from_json(p), start_value(c.sim.start_price, model, "value"),
                                                  start_value(c.sim.start_index, model, "index_value"), opt);
            series.emplace_back(label, std::move(out.spot));
            series.emplace_back(label + ".index", std::move(out.index));
        } else if (kind == "BS") {
            expect(SimModel::BS, "bs");
            series.emplace_back(label, sim::simulate_mr_realworld(sim::as_one_factor(bs_params_from_json(p)),
                                                                  start_value(c.sim.start_price, model, "value"), opt));
        } else {
            expect(SimModel::MR, "mr");
            series.emplace_back(
                label, sim::simulate_mr_realworld(mr_params_from_json(p), start_value(c.sim.start_price, model, "value"), opt));
        }
    }

    sim_j["series"] = Json::array();
    for (const auto& [label, paths] : series) sim_j["series"].push_back(series_summary(label, paths));
    if (c.sim.paths_out) {
        std::vector<sim::NamedPaths> named;
        for (const auto& [label, paths] : series) named.push_back({label, &paths});
        const bool binary = c.sim.paths_out->extension() == ".bin";
        std::ofstream os(*c.sim.paths_out, binary ? std::ios::binary : std::ios::out);
        if (!os) throw Error("cannot write " + c.sim.paths_out->string());
        if (binary)
            sim::write_binary(os, named, c.seed, hash);
        else
            sim::write_csv(os, named);
        if (!os) throw Error("failed writing " + c.sim.paths_out->string());
        sim_j["paths_out"] = c.sim.paths_out->generic_string();
        sim_j["paths_format"] = binary ? "binary" : "csv";
    }
    report["simulation"] = std::move(sim_j);
}

}  // namespace

Outcome run(const RunConfig& config) {
    Outcome out;
    Json& r = out.report;
    r["tool"] = {{"name", kToolName}, {"version", kVersion}};
    r["schema"] = kReportSchema;
    r["command"] = to_string(config.command);
    r["config"] = to_json(config);
    r["inputs"] = Json::array();
    r["diagnostics"] = Json::array();
    try {
        validate(config);
        switch (config.command) {
            case Command::CalibrateMR: run_calibrate_one_factor(config, r, false); break;
            case Command::CalibrateBS: run_calibrate_one_factor(config, r, true); break;
            case Command::CalibrateSP: run_calibrate_sp(config, r); break;
            case Command::CalibrateJoint: run_calibrate_joint(config, r); break;
            case Command::Simulate: run_simulate(config, r); break;
            case Command::Selftest: {
                r["selftest"] = selftest();
                if (r["selftest"]["failed"].get<int>() > 0) out.exit_code = 3;
                break;
            }
        }
        r["error"] = nullptr;
    } catch (const CalibrationError& e) {
        r["error"] = {{"type", "calibration"}, {"message", e.what()}};
        put_number(r["error"], "best_rate", e.best_rate(), "no rate evaluated");
        out.exit_code = 1;
    } catch (const std::exception& e) {
        r["error"] = {{"type", "error"}, {"message", e.what()}};
        out.exit_code = 1;
    }
    return out;
}

std::string format_report(const Json& report, ReportFormat format) {
    if (format == ReportFormat::Text) return render_text(report);
    return report.dump(2) + "\n";
}

}  // namespace mrcal::app
