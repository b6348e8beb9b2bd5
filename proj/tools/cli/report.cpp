#include "report.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <limits>
#include <sstream>

#include "mrcal/error.hpp"

namespace mrcal::app {

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return fnv1a64(bytes);
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

void put_number(Json& j, const std::string& key, double v, std::string_view reason) {
    if (std::isfinite(v)) {
        j[key] = v;
    } else {
        j[key] = nullptr;
        j[key + "_null_reason"] = reason;
    }
}

double get_number(const nlohmann::json& j, const std::string& key) {
    const auto& v = j.at(key);
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string model_name(Transform t) { return t == Transform::Log ? "lognormal" : "normal"; }

Transform transform_from(const nlohmann::json& j) {
    const auto m = j.at("model").get<std::string>();
    if (m == "lognormal") return Transform::Log;
    if (m == "normal") return Transform::Identity;
    throw Error("report: unknown model '" + m + "'");
}

LevelGranularity level_from(const nlohmann::json& j, const char* key) {
    const auto t = j.at(key).get<std::string>();
    const auto g = parse_level_granularity(t);
    if (!g) throw Error("report: unknown level granularity '" + t + "'");
    return *g;
}

PeriodGranularity period_from(const nlohmann::json& j, const char* key) {
    const auto t = j.at(key).get<std::string>();
    const auto g = parse_period_granularity(t);
    if (!g) throw Error("report: unknown granularity '" + t + "'");
    return *g;
}

Json level_entries(const mr::LevelCurve& curve, const std::map<LevelBucket, std::size_t>& counts) {
    Json arr = Json::array();
    for (const auto& [b, n] : counts) {
        Json e;
        e["bucket"] = level_label(b);
        e["year"] = b.year;
        e["month"] = b.month;
        const auto it = curve.find(b);
        put_number(e, "value", it == curve.end() ? kNaN : it->second, "no estimate for this bucket");
        e["n"] = n;
        arr.push_back(std::move(e));
    }
    return arr;
}

void read_level_entries(const nlohmann::json& arr, mr::LevelCurve& curve, std::map<LevelBucket, std::size_t>* counts) {
    for (const auto& e : arr) {
        const LevelBucket b{e.at("year").get<int>(), e.at("month").get<int>()};
        if (!e.at("value").is_null()) curve[b] = e["value"].get<double>();
        if (counts) (*counts)[b] = e.at("n").get<std::size_t>();
    }
}

Json period_entries(const mr::PeriodCurve& curve, const std::map<int, stats::Interval>& ci,
                    const std::map<int, std::size_t>& counts, PeriodGranularity g, std::string_view missing_reason) {
    Json arr = Json::array();
    for (const auto& [b, n] : counts) {
        Json e;
        e["bucket"] = period_label(b, g);
        e["key"] = b;
        const auto it = curve.find(b);
        put_number(e, "value", it == curve.end() ? kNaN : it->second, missing_reason);
        const auto c = ci.find(b);
        put_number(e, "lower", c == ci.end() ? kNaN : c->second.lower, "no interval for this bucket");
        put_number(e, "upper", c == ci.end() ? kNaN : c->second.upper, "no interval for this bucket");
        e["n"] = n;
        arr.push_back(std::move(e));
    }
    return arr;
}

void read_period_entries(const nlohmann::json& arr, double alpha, mr::PeriodCurve& curve,
                         std::map<int, stats::Interval>& ci, std::map<int, std::size_t>& counts) {
    for (const auto& e : arr) {
        const int b = e.at("key").get<int>();
        counts[b] = e.at("n").get<std::size_t>();
        if (e.at("value").is_null()) continue;
        const double v = e["value"].get<double>();
        curve[b] = v;
        if (!e.at("lower").is_null() && !e.at("upper").is_null())
            ci[b] = stats::Interval{v, e["lower"].get<double>(), e["upper"].get<double>(), alpha};
    }
}

}  // namespace

Json to_json(const stats::Interval& ci) {
    Json j;
    put_number(j, "estimate", ci.estimate, "not finite");
    put_number(j, "lower", ci.lower, "not finite");
    put_number(j, "upper", ci.upper, "not finite");
    j["alpha"] = ci.alpha;
    return j;
}

Json to_json(const stats::FitReport& f) {
    Json j;
    j["n"] = f.n;
    put_number(j, "mean", f.mean, "not finite");
    put_number(j, "stddev", f.stddev, "not finite");
    put_number(j, "skewness", f.skewness, "not finite");
    put_number(j, "excess_kurtosis", f.excess_kurtosis, "not finite");
    put_number(j, "jb_stat", f.jb_stat, "not finite");
    put_number(j, "jb_pvalue", f.jb_pvalue, "not finite");
    put_number(j, "ks_stat", f.ks_stat, "not finite");
    put_number(j, "ks_pvalue", f.ks_pvalue, "not finite");
    return j;
}

stats::FitReport fit_from_json(const nlohmann::json& j) {
    stats::FitReport f;
    f.n = j.at("n").get<std::size_t>();
    f.mean = get_number(j, "mean");
    f.stddev = get_number(j, "stddev");
    f.skewness = get_number(j, "skewness");
    f.excess_kurtosis = get_number(j, "excess_kurtosis");
    f.jb_stat = get_number(j, "jb_stat");
    f.jb_pvalue = get_number(j, "jb_pvalue");
    f.ks_stat = get_number(j, "ks_stat");
    f.ks_pvalue = get_number(j, "ks_pvalue");
    return f;
}

Json to_json(const mr::MRParams& p) {
    Json j;
    j["kind"] = "MR";
    j["model"] = model_name(p.transform);
    j["level_granularity"] = to_string(p.shape.level);
    j["vol_granularity"] = to_string(p.shape.vol);
    j["interpolation"] = "step";
    j["alpha"] = p.alpha;
    j["rate"] = p.rate;
    put_number(j, "rate_stderr", p.rate_stderr.value_or(kNaN), "regression seed fell back; no standard error");
    j["theta"] = level_entries(p.theta, p.level_counts);
    j["sigma"] = period_entries(p.sigma, p.sigma_ci, p.vol_counts, p.shape.vol, "too few observations");
    return j;
}

mr::MRParams mr_params_from_json(const nlohmann::json& j) {
    if (j.at("kind").get<std::string>() != "MR") throw Error("report: expected an MR parameter block");
    mr::MRParams p;
    p.transform = transform_from(j);
    p.shape.level = level_from(j, "level_granularity");
    p.shape.vol = period_from(j, "vol_granularity");
    p.alpha = j.at("alpha").get<double>();
    p.rate = j.at("rate").get<double>();
    if (!j.at("rate_stderr").is_null()) p.rate_stderr = j["rate_stderr"].get<double>();
    read_level_entries(j.at("theta"), p.theta, &p.level_counts);
    read_period_entries(j.at("sigma"), p.alpha, p.sigma, p.sigma_ci, p.vol_counts);
    return p;
}

Json to_json(const mr::BSParams& p) {
    Json j;
    j["kind"] = "BS";
    j["model"] = model_name(p.transform);
    j["level_granularity"] = to_string(p.shape.level);
    j["vol_granularity"] = to_string(p.shape.vol);
    j["interpolation"] = "step";
    j["alpha"] = p.alpha;
    j["rate"] = 0.0;
    j["mu"] = level_entries(p.mu, p.level_counts);
    j["sigma"] = period_entries(p.sigma, p.sigma_ci, p.vol_counts, p.shape.vol, "too few observations");
    return j;
}

mr::BSParams bs_params_from_json(const nlohmann::json& j) {
    if (j.at("kind").get<std::string>() != "BS") throw Error("report: expected a BS parameter block");
    mr::BSParams p;
    p.transform = transform_from(j);
    p.shape.level = level_from(j, "level_granularity");
    p.shape.vol = period_from(j, "vol_granularity");
    p.alpha = j.at("alpha").get<double>();
    read_level_entries(j.at("mu"), p.mu, &p.level_counts);
    read_period_entries(j.at("sigma"), p.alpha, p.sigma, p.sigma_ci, p.vol_counts);
    return p;
}

Json to_json(const sp::SPParams& p) {
    Json j;
    j["kind"] = "SP";
    j["model"] = "lognormal";
    j["level_granularity"] = to_string(p.shape.level);
    j["vol_granularity"] = to_string(p.shape.vol);
    j["corr_granularity"] = to_string(p.corr_granularity);
    j["spot_granularity"] = to_string(p.spot_granularity);
    j["interpolation"] = "step";
    j["alpha"] = p.alpha;
    j["rate"] = p.rate;
    put_number(j, "rate_stderr", p.rate_stderr.value_or(kNaN), "regression seed fell back; no standard error");
    j["theta_tilde"] = level_entries(p.theta_tilde, p.level_counts);
    j["mu"] = level_entries(p.mu, p.level_counts);
    j["sigma_q"] = period_entries(p.sigma_q, p.sigma_q_ci, p.vol_counts, p.shape.vol, "too few observations");
    j["sigma_I"] = period_entries(p.sigma_I, p.sigma_I_ci, p.vol_counts, p.shape.vol, "too few observations");
    j["sigma_S"] =
        period_entries(p.sigma_S, p.sigma_S_ci, p.spot_counts, p.spot_granularity, "invalid bucket; see invalid");
    j["rho"] = period_entries(p.rho, p.rho_ci, p.corr_counts, p.corr_granularity, "not identified in this bucket");
    j["invalid"] = Json::array();
    for (const auto& b : p.invalid)
        j["invalid"].push_back({{"bucket", period_label(b.bucket, p.spot_granularity)}, {"key", b.bucket}, {"reason", b.reason}});
    return j;
}

sp::SPParams sp_params_from_json(const nlohmann::json& j) {
    if (j.at("kind").get<std::string>() != "SP") throw Error("report: expected an SP parameter block");
    sp::SPParams p;
    p.shape.level = level_from(j, "level_granularity");
    p.shape.vol = period_from(j, "vol_granularity");
    p.corr_granularity = period_from(j, "corr_granularity");
    p.spot_granularity = period_from(j, "spot_granularity");
    p.alpha = j.at("alpha").get<double>();
    p.rate = j.at("rate").get<double>();
    if (!j.at("rate_stderr").is_null()) p.rate_stderr = j["rate_stderr"].get<double>();
    read_level_entries(j.at("theta_tilde"), p.theta_tilde, &p.level_counts);
    read_level_entries(j.at("mu"), p.mu, nullptr);
    std::map<int, std::size_t> vol_counts_again;
    read_period_entries(j.at("sigma_q"), p.alpha, p.sigma_q, p.sigma_q_ci, p.vol_counts);
    read_period_entries(j.at("sigma_I"), p.alpha, p.sigma_I, p.sigma_I_ci, vol_counts_again);
    read_period_entries(j.at("sigma_S"), p.alpha, p.sigma_S, p.sigma_S_ci, p.spot_counts);
    read_period_entries(j.at("rho"), p.alpha, p.rho, p.rho_ci, p.corr_counts);
    for (const auto& b : j.at("invalid")) p.invalid.push_back({b.at("key").get<int>(), b.at("reason").get<std::string>()});
    return p;
}

Json to_json(const joint::JointModel& m) {
    Json j;
    j["granularity"] = to_string(m.granularity);
    j["alpha"] = m.alpha;
    j["trim"] = m.trim_pct;
    j["factors"] = Json::array();
    for (const auto& f : m.factors)
        j["factors"].push_back({{"name", f.name()},
                                {"member", f.member},
                                {"kind", joint::to_string(f.kind)},
                                {"role", joint::to_string(f.role)},
                                {"n", f.series.size()}});
    j["correlations"] = Json::array();
    for (const auto& c : m.correlations) {
        Json e;
        e["first"] = m.factors[c.i].name();
        e["second"] = m.factors[c.j].name();
        e["i"] = c.i;
        e["j"] = c.j;
        e["bucket"] = period_label(c.bucket, m.granularity);
        e["key"] = c.bucket;
        e["n"] = c.n;
        put_number(e, "rho", c.ci.estimate, "not finite");
        put_number(e, "lower", c.ci.lower, "not finite");
        put_number(e, "upper", c.ci.upper, "not finite");
        j["correlations"].push_back(std::move(e));
    }
    j["matrices"] = Json::array();
    for (const auto& [b, mat] : m.matrices) {
        Json e;
        e["bucket"] = period_label(b, m.granularity);
        e["key"] = b;
        put_number(e, "min_eigenvalue", mat.min_eigenvalue, "eigen solver failed");
        e["missing"] = Json::array();
        for (const auto& [r, c] : mat.missing) e["missing"].push_back({r, c});
        Json rows = Json::array();
        for (std::size_t r = 0; r < mat.dim; ++r) {
            Json row = Json::array();
            for (std::size_t c = 0; c < mat.dim; ++c) row.push_back(mat(r, c));
            rows.push_back(std::move(row));
        }
        e["values"] = std::move(rows);
        j["matrices"].push_back(std::move(e));
    }
    return j;
}

// ---------------------------------------------------------------------------
// Text rendering.

namespace {

std::string num(const nlohmann::ordered_json& v) {
    if (v.is_null()) return "null";
    return v.dump();
}

std::string field(const Json& j, const char* key) { return j.contains(key) ? num(j[key]) : "-"; }

void pad(std::ostringstream& os, const std::string& s, std::size_t width) {
    os << s;
    for (std::size_t k = s.size(); k < width; ++k) os << ' ';
}

void table(std::ostringstream& os, const Json& rows, std::initializer_list<const char*> cols, const char* label_key) {
    constexpr std::size_t w = 24;
    os << "    ";
    pad(os, label_key, 12);
    for (const char* c : cols) pad(os, c, w);
    os << '\n';
    for (const auto& r : rows) {
        os << "    ";
        pad(os, r.at(label_key).get<std::string>(), 12);
        for (const char* c : cols) pad(os, field(r, c), w);
        os << '\n';
    }
}

void render_fit(std::ostringstream& os, const Json& f, const std::string& name) {
    os << "  residuals" << (name.empty() ? "" : " " + name) << ": n " << field(f, "n") << ", mean " << field(f, "mean") << ", stddev "
       << field(f, "stddev") << ", skewness " << field(f, "skewness") << ", kurtosis " << field(f, "excess_kurtosis")
       << "\n    JB " << field(f, "jb_stat") << " (p " << field(f, "jb_pvalue") << "), KS " << field(f, "ks_stat")
       << " (p " << field(f, "ks_pvalue") << ")\n";
}

void render_params(std::ostringstream& os, const Json& p) {
    const auto kind = p.at("kind").get<std::string>();
    os << "  " << kind << " " << p.at("model").get<std::string>() << ", levels " << p["level_granularity"].get<std::string>()
       << ", vols " << p["vol_granularity"].get<std::string>() << " (step interpolation)\n";
    if (kind != "BS") os << "  mean-reversion rate " << field(p, "rate") << " stderr " << field(p, "rate_stderr") << '\n';
    if (kind == "MR") {
        os << "  level\n";
        table(os, p["theta"], {"value", "n"}, "bucket");
        os << "  volatility\n";
        table(os, p["sigma"], {"value", "lower", "upper", "n"}, "bucket");
    } else if (kind == "BS") {
        os << "  drift\n";
        table(os, p["mu"], {"value", "n"}, "bucket");
        os << "  volatility\n";
        table(os, p["sigma"], {"value", "lower", "upper", "n"}, "bucket");
    } else {
        os << "  quotient level\n";
        table(os, p["theta_tilde"], {"value", "n"}, "bucket");
        os << "  index drift\n";
        table(os, p["mu"], {"value", "n"}, "bucket");
        os << "  quotient volatility\n";
        table(os, p["sigma_q"], {"value", "lower", "upper", "n"}, "bucket");
        os << "  index volatility\n";
        table(os, p["sigma_I"], {"value", "lower", "upper", "n"}, "bucket");
        os << "  spot volatility\n";
        table(os, p["sigma_S"], {"value", "lower", "upper", "n"}, "bucket");
        os << "  spot-index correlation\n";
        table(os, p["rho"], {"value", "lower", "upper", "n"}, "bucket");
        for (const auto& b : p["invalid"])
            os << "  invalid bucket " << b["bucket"].get<std::string>() << ": " << b["reason"].get<std::string>() << '\n';
    }
}

}  // namespace

std::string render_text(const Json& r) {
    std::ostringstream os;
    os << r.value("tool", Json::object()).value("name", std::string(kToolName)) << ' '
       << r.value("tool", Json::object()).value("version", std::string{}) << "  " << r.value("command", std::string{})
       << '\n';
    if (r.contains("error") && !r["error"].is_null()) {
        os << "error: " << r["error"].value("message", std::string{}) << '\n';
        return os.str();
    }
    if (r.contains("inputs"))
        for (const auto& in : r["inputs"])
            os << "input " << in.value("label", std::string{}) << ": " << in.value("path", std::string{}) << " ("
               << field(in, "points") << " points, fnv1a64 " << in.value("fnv1a64", std::string{}) << ")\n";
    if (r.contains("models")) {
        for (const auto& m : r["models"]) {
            os << "\nmodel " << m.value("label", std::string{}) << '\n';
            render_params(os, m.at("params"));
            if (m.contains("fit")) render_fit(os, m["fit"], "");
            if (m.contains("spot_fit")) render_fit(os, m["spot_fit"], "spot factor");
            if (m.contains("index_fit")) render_fit(os, m["index_fit"], "index factor");
        }
    }
    if (r.contains("joint")) {
        const auto& jm = r["joint"];
        os << "\ncorrelations (" << jm["granularity"].get<std::string>() << ", trim " << field(jm, "trim") << ")\n";
        os << "    ";
        pad(os, "pair", 28);
        pad(os, "bucket", 10);
        for (const char* c : {"rho", "lower", "upper", "n"}) pad(os, c, 24);
        os << '\n';
        for (const auto& c : jm["correlations"]) {
            os << "    ";
            pad(os, c["first"].get<std::string>() + " x " + c["second"].get<std::string>(), 28);
            pad(os, c["bucket"].get<std::string>(), 10);
            for (const char* k : {"rho", "lower", "upper", "n"}) pad(os, field(c, k), 24);
            os << '\n';
        }
        for (const auto& m : jm["matrices"])
            os << "  bucket " << m["bucket"].get<std::string>() << " min eigenvalue " << field(m, "min_eigenvalue")
               << '\n';
        if (r.contains("granularity_check")) {
            const auto& g = r["granularity_check"];
            os << "  granularity check: " << g["flagged"].size() << " wide intervals";
            if (!g["note"].get<std::string>().empty()) os << "; " << g["note"].get<std::string>();
            os << '\n';
        }
    }
    if (r.contains("simulation")) {
        const auto& s = r["simulation"];
        os << "\nsimulation " << s.value("model", std::string{}) << ' ' << s.value("measure", std::string{}) << ": "
           << field(s, "paths") << " paths x " << field(s, "steps") << " steps, seed " << field(s, "seed") << ", spec "
           << s.value("spec_hash", std::string{}) << '\n';
        if (s.contains("series"))
            for (const auto& x : s["series"])
                os << "  " << x.value("label", std::string{}) << ": terminal mean " << field(x, "terminal_mean")
                   << ", terminal stddev " << field(x, "terminal_stddev") << '\n';
        if (s.contains("repairs"))
            for (const auto& x : s["repairs"])
                os << "  repaired bucket " << x.value("bucket", std::string{}) << " (min eigenvalue "
                   << field(x, "min_eigenvalue") << ")\n";
    }
    if (r.contains("selftest")) {
        const auto& s = r["selftest"];
        os << "\nselftest: " << field(s, "passed") << " passed, " << field(s, "failed") << " failed\n";
        for (const auto& c : s["checks"])
            os << "  [" << (c["pass"].get<bool>() ? "PASS" : "FAIL") << "] " << c["name"].get<std::string>() << '\n';
    }
    if (r.contains("diagnostics") && !r["diagnostics"].empty()) {
        os << "\ndiagnostics\n";
        for (const auto& d : r["diagnostics"]) os << "  " << d.get<std::string>() << '\n';
    }
    return os.str();
}

}  // namespace mrcal::app
