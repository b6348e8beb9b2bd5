// mrcal: calibrate mean-reversion and Spot-Prompt models from price history,
// correlate their factors, and simulate paths.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "app.hpp"
#include "mrcal/error.hpp"

namespace {

using namespace mrcal;
using namespace mrcal::app;

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const auto item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw Error("invalid number '" + item + "' in list '" + text + "'");
        out.push_back(v);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

template <class T, class Parse>
T parse_or_throw(const std::string& text, Parse parse, const char* what) {
    const auto v = parse(text);
    if (!v) throw Error(std::string("invalid ") + what + ": '" + text + "'");
    return *v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Calibrate and simulate mean-reverting energy price models"};
    cli.set_version_flag("--version", std::string(kVersion));

    std::string command;
    cli.add_option("command", command,
                   "calibrate-mr | calibrate-bs | calibrate-sp | calibrate-joint | simulate | selftest")
        ->required();

    std::string config_path;
    std::vector<std::string> inputs, sp_pairs, bs_members;
    std::string model, level, vol, corr, grid, roll_dates, out, format;
    double alpha = 0.0, trim = 0.0, max_width = 0.0;
    std::uint64_t seed = 0;
    std::size_t paths = 0;
    std::string sim_model, measure, sigma, sigma_index, rho, curve, params, member, paths_out;
    double rate = 0.0, forward_rate = 0.0, flat_curve = 0.0, start_price = 0.0, start_index = 0.0;

    auto* o_config = cli.add_option("--config", config_path, "JSON config (same schema as the report's config echo)");
    auto* o_input = cli.add_option("--input", inputs, "label=path[:column], repeatable");
    auto* o_model = cli.add_option("--model", model, "lognormal | normal");
    auto* o_level = cli.add_option("--level-granularity", level, "month-year | calendar-month | flat");
    auto* o_vol = cli.add_option("--vol-granularity", vol, "monthly | seasonal | flat");
    auto* o_corr = cli.add_option("--corr-granularity", corr, "monthly | seasonal | flat");
    auto* o_alpha = cli.add_option("--alpha", alpha, "confidence parameter (default 0.05)");
    auto* o_trim = cli.add_option("--trim", trim, "outlier fraction trimmed from each tail, in [0, 0.05]");
    auto* o_biased = cli.add_flag("--biased-vol", "use the 1/N volatility estimator");
    auto* o_width = cli.add_option("--max-corr-width", max_width, "correlation CI width that triggers the advisory");
    auto* o_pair = cli.add_option("--sp-pair", sp_pairs, "spot,index input labels forming a Spot-Prompt member");
    auto* o_bs = cli.add_option("--bs-member", bs_members, "input label calibrated in the zero-rate limit (joint)");
    auto* o_seed = cli.add_option("--seed", seed, "random seed");
    auto* o_paths = cli.add_option("--paths", paths, "number of simulated paths");
    auto* o_grid = cli.add_option("--grid", grid, "start:end:freq (daily | weekdays | weekly | monthly)");
    auto* o_rolls = cli.add_option("--roll-dates", roll_dates, "file with one roll date per line");
    auto* o_simmodel = cli.add_option("--sim-model", sim_model, "mr | bs | sp | joint");
    auto* o_measure = cli.add_option("--measure", measure, "risk-neutral | real-world");
    auto* o_rate = cli.add_option("--rate", rate, "mean-reversion rate a (risk-neutral)");
    auto* o_sigma = cli.add_option("--sigma", sigma, "spot volatility, 1 or 12 comma-separated values");
    auto* o_sigma_i = cli.add_option("--sigma-index", sigma_index, "index volatility, 1 or 12 values (SP)");
    auto* o_rho = cli.add_option("--rho", rho, "spot-index correlation, 1 or 12 values (SP)");
    auto* o_b = cli.add_option("--forward-rate", forward_rate, "forward mean-reversion rate b (SP)");
    auto* o_flat = cli.add_option("--flat-curve", flat_curve, "flat forward curve price");
    auto* o_curve = cli.add_option("--curve", curve, "forward curve CSV (date,price)");
    auto* o_params = cli.add_option("--params", params, "calibration report supplying real-world parameters");
    auto* o_member = cli.add_option("--member", member, "model label inside --params");
    auto* o_start = cli.add_option("--start-price", start_price, "start price (default: last observation)");
    auto* o_start_i = cli.add_option("--start-index", start_index, "start index price (SP)");
    auto* o_paths_out = cli.add_option("--paths-out", paths_out, "write paths here (.bin: binary, else CSV)");
    auto* o_out = cli.add_option("--out", out, "report path (default: stdout)");
    auto* o_format = cli.add_option("--format", format, "json | text");

    CLI11_PARSE(cli, argc, argv);

    RunConfig config;
    try {
        if (o_config->count()) {
            std::ifstream in(config_path);
            if (!in) throw Error("cannot open config " + config_path);
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(in);
            } catch (const nlohmann::json::exception& e) {
                throw Error(config_path + ": " + e.what());
            }
            config = config_from_json(j);
        }
        // Flags override the file.
        config.command = parse_or_throw<Command>(command, parse_command, "command");
        if (o_input->count()) {
            config.inputs.clear();
            for (const auto& s : inputs) config.inputs.push_back(parse_input(s));
        }
        if (o_model->count()) {
            if (model == "lognormal")
                config.transform = Transform::Log;
            else if (model == "normal")
                config.transform = Transform::Identity;
            else
                throw Error("invalid --model '" + model + "' (expected lognormal or normal)");
        }
        if (o_level->count()) config.level = parse_or_throw<LevelGranularity>(level, parse_level_granularity, "level granularity");
        if (o_vol->count()) config.vol = parse_or_throw<PeriodGranularity>(vol, parse_period_granularity, "vol granularity");
        if (o_corr->count()) config.corr = parse_or_throw<PeriodGranularity>(corr, parse_period_granularity, "corr granularity");
        if (o_alpha->count()) config.alpha = alpha;
        if (o_trim->count()) config.trim = trim;
        if (o_biased->count()) config.biased_vol = true;
        if (o_width->count()) config.max_corr_width = max_width;
        if (o_pair->count()) {
            config.sp_pairs.clear();
            for (const auto& p : sp_pairs) {
                const auto comma = p.find(',');
                if (comma == std::string::npos || comma == 0 || comma + 1 == p.size())
                    throw Error("invalid --sp-pair '" + p + "' (expected spot,index)");
                config.sp_pairs.emplace_back(p.substr(0, comma), p.substr(comma + 1));
            }
        }
        if (o_bs->count()) config.bs_members = bs_members;
        if (o_seed->count()) config.seed = seed;
        if (o_paths->count()) config.paths = paths;
        if (o_grid->count()) config.grid = parse_grid(grid);
        if (o_rolls->count()) config.roll_dates = roll_dates;
        if (o_simmodel->count()) {
            if (sim_model == "mr") config.sim.model = SimModel::MR;
            else if (sim_model == "bs") config.sim.model = SimModel::BS;
            else if (sim_model == "sp") config.sim.model = SimModel::SP;
            else if (sim_model == "joint") config.sim.model = SimModel::Joint;
            else throw Error("invalid --sim-model '" + sim_model + "'");
        }
        if (o_measure->count()) {
            if (measure == "risk-neutral") config.sim.measure = Measure::RiskNeutral;
            else if (measure == "real-world") config.sim.measure = Measure::RealWorld;
            else throw Error("invalid --measure '" + measure + "'");
        }
        if (o_rate->count()) config.sim.rate = rate;
        if (o_sigma->count()) config.sim.sigma = parse_list(sigma);
        if (o_sigma_i->count()) config.sim.sigma_index = parse_list(sigma_index);
        if (o_rho->count()) config.sim.rho = parse_list(rho);
        if (o_b->count()) config.sim.forward_rate = forward_rate;
        if (o_flat->count()) config.sim.flat_curve = flat_curve;
        if (o_curve->count()) config.sim.curve = curve;
        if (o_params->count()) config.sim.params = params;
        if (o_member->count()) config.sim.member = member;
        if (o_start->count()) config.sim.start_price = start_price;
        if (o_start_i->count()) config.sim.start_index = start_index;
        if (o_paths_out->count()) config.sim.paths_out = paths_out;
        if (o_out->count()) config.out = out;
        if (o_format->count()) {
            if (format == "json") config.format = ReportFormat::Json;
            else if (format == "text") config.format = ReportFormat::Text;
            else throw Error("invalid --format '" + format + "'");
        }
    } catch (const std::exception& e) {
        Json err;
        err["tool"] = {{"name", kToolName}, {"version", kVersion}};
        err["command"] = command;
        err["error"] = {{"type", "usage"}, {"message", e.what()}};
        std::cout << err.dump(2) << '\n';
        return 2;
    }

    const auto outcome = run(config);
    const auto text = format_report(outcome.report, config.format);
    if (config.out) {
        std::ofstream os(*config.out, std::ios::binary);
        if (!os || !(os << text)) {
            std::cerr << "mrcal: cannot write " << config.out->string() << '\n';
            return 1;
        }
    } else {
        std::cout << text;
    }
    if (outcome.exit_code != 0 && config.out) {
        const auto& e = outcome.report["error"];
        if (!e.is_null()) std::cerr << "mrcal: " << e["message"].get<std::string>() << '\n';
    }
    return outcome.exit_code;
}
