#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mrcal/joint.hpp"
#include "mrcal/one_factor.hpp"
#include "mrcal/spot_prompt.hpp"
#include "mrcal/timeseries.hpp"

namespace mrcal::sim {

/// A term structure indexed by calendar month (index 0 = January).
using MonthlyCurve = std::array<double, 12>;

MonthlyCurve flat_curve(double value);
/// Expands a bucketed curve to calendar months; throws if a month is uncovered.
MonthlyCurve expand(const mr::PeriodCurve& curve, PeriodGranularity g);

/// Years since `origin`, ACT/365, allowing t == origin.
double years_since(Timestamp origin, Timestamp t);

// ---------------------------------------------------------------------------
// Forward curve.

/// Step curve: each knot's price holds from its expiry up to the next knot,
/// so the contract that expired at T_i prices delivery on [T_i, T_{i+1}).
class ForwardCurve {
public:
    struct Knot {
        Timestamp expiry;
        double price = 0.0;
    };

    explicit ForwardCurve(std::vector<Knot> knots);
    static ForwardCurve flat(Timestamp start, double price);

    /// F(0, t). Throws for t before the first knot.
    double operator()(Timestamp t) const;
    const std::vector<Knot>& knots() const noexcept { return knots_; }

private:
    std::vector<Knot> knots_;
};

/// Reads `date,price` rows (header required).
ForwardCurve load_curve_csv(const std::filesystem::path& path);

/// integral_{t0}^{t1} e^{-2a(t1-u)} sigma(u)^2 du with sigma piecewise constant
/// by calendar month. Requires t0 < t1 and a >= 0.
double v_squared(double a, const MonthlyCurve& sigma, Timestamp t0, Timestamp t1);

/// F(t, T) implied by the spot S_t in the lognormal one-factor model, with
/// the value date at `origin`.
double forward_curve_evolve(const ForwardCurve& F0, double spot, Timestamp origin, Timestamp t, Timestamp T,
                            double a, const MonthlyCurve& sigma);

// ---------------------------------------------------------------------------
// Path containers and grids.

struct Paths {
    std::vector<Timestamp> grid;
    std::size_t n_paths = 0;
    std::vector<double> values;  // path-major: values[p * grid.size() + k]

    double operator()(std::size_t path, std::size_t step) const { return values[path * grid.size() + step]; }
    double& operator()(std::size_t path, std::size_t step) { return values[path * grid.size() + step]; }
    /// One path as a price series.
    PriceSeries path_series(std::size_t path, std::string label) const;
};

enum class GridFrequency { Daily, Weekdays, Weekly, Monthly };
std::optional<GridFrequency> parse_grid_frequency(std::string_view text);
std::string_view to_string(GridFrequency f);

/// Inclusive grid from start to end. Weekday grids skip Saturdays and
/// Sundays; monthly grids keep the day of month, clamped to month length.
std::vector<Timestamp> make_grid(Timestamp start, Timestamp end, GridFrequency freq);

bool is_weekday(Timestamp t);

/// Roll dates for every delivery month after `start` up to and including the
/// first roll after `end`: the k-th weekday strictly before the first of the
/// delivery month (weekend-only calendar).
std::vector<Timestamp> default_roll_dates(Timestamp start, Timestamp end, int k = 3);

// ---------------------------------------------------------------------------
// One-factor model.

struct MRRiskNeutralSpec {
    Transform transform = Transform::Log;
    double a = 0.0;
    MonthlyCurve sigma{};
    std::optional<ForwardCurve> curve;
    std::vector<Timestamp> grid;  // grid[0] is the value date
    std::size_t n_paths = 1;
    std::uint64_t seed = 0;
};

/// Exact sampling of S_t = F(0,t) exp(-V^2(0,t)/2 + Z_t) (lognormal) or
/// S_t = F(0,t) + Z_t (normal), Z an OU integral started at 0.
Paths simulate_mr(const MRRiskNeutralSpec& spec);

struct RealWorldOptions {
    std::vector<Timestamp> grid;
    std::size_t n_paths = 1;
    std::uint64_t seed = 0;
    /// When set, receives the standardized draws, path-major, one per step.
    std::vector<double>* draws = nullptr;
};

/// Exact recursion X' = eta X + theta kappa + sigma gamma eps with the
/// parameters of the bucket of each step's start. `start_price` is the
/// price (not its log) at grid[0]. a == 0 gives arithmetic/geometric BM.
Paths simulate_mr_realworld(const mr::MRParams& params, double start_price, const RealWorldOptions& opt);

/// Wraps zero-rate parameters as a one-factor model with a == 0.
mr::MRParams as_one_factor(const mr::BSParams& bs);

// ---------------------------------------------------------------------------
// Spot-Prompt model.

struct SPCurves {
    MonthlyCurve sigma_S{};
    MonthlyCurve sigma_I{};
    MonthlyCurve rho{};
};

/// Level of the spot process as printed for the no-arbitrage model:
/// theta(t) = V(T_i, t)/2 - sigma_S(t)^2 / (2a), V(T_i, t) = integral of
/// sigma_S^2 + sigma_I^2 - 2 sigma_S sigma_I rho over [T_i, t].
/// Requires T_i <= t < T_next.
double sp_theta(double a, const SPCurves& curves, Timestamp Ti, Timestamp t, Timestamp T_next);

struct SPRiskNeutralSpec {
    double a = 0.0;
    double b = 0.0;  // forward mean-reversion (Samuelson damping) rate
    SPCurves curves;
    std::optional<ForwardCurve> curve;
    std::vector<Timestamp> grid;        // grid[0] is the value date
    std::vector<Timestamp> roll_dates;  // empty: default_roll_dates
    std::size_t n_paths = 1;
    std::uint64_t seed = 0;
};

struct SPPaths {
    Paths spot;
    Paths index;
    std::vector<Timestamp> rolls;    // rolls strictly inside (grid.front(), grid.back()]
    std::vector<double> index_at_roll;  // I at T_i^-, path-major over `rolls`
};

/// Exact conditional-Gaussian simulation. The spot is reset to the expiring
/// contract at each roll and its drift is chosen so that E_{T_i}[S_t] equals
/// I at T_i^- throughout [T_i, T_{i+1}).
SPPaths simulate_sp(const SPRiskNeutralSpec& spec);

/// The conditional mean and variance of log S_t given time s, transcribed
/// term by term from the published closed form (b = 0). Kept for comparison
/// with the exact scheme; simulate_sp does not use it.
struct PrintedMoments {
    double mean = 0.0;
    double variance = 0.0;
};
PrintedMoments sp_printed_moments(double a, const SPCurves& curves, Timestamp Ti, Timestamp s, Timestamp t,
                                  double log_spot_s, double log_index_s);

/// Real-world simulation of (S, I): log(S/I) follows the quotient recursion and
/// log I a drifted Brownian motion, with the exact joint step distribution.
struct SPRealWorldOutput {
    Paths spot;
    Paths index;
    std::vector<double> spot_draws;   // int e^{-a(t-u)} dW / gamma, per step
    std::vector<double> index_draws;  // (B_t - B_s) / sqrt(dt), per step
};
SPRealWorldOutput simulate_sp_realworld(const sp::SPParams& params, double spot0, double index0,
                                        const RealWorldOptions& opt);

// ---------------------------------------------------------------------------
// Joint model.

struct JointMember {
    std::string label;
    joint::ModelKind kind = joint::ModelKind::MR;
    mr::MRParams one_factor;  // MR and BS members (BS: rate 0)
    sp::SPParams spot_prompt;  // SP members
    double spot0 = 1.0;
    double index0 = 1.0;
};

struct JointSpec {
    std::vector<JointMember> members;
    PeriodGranularity granularity = PeriodGranularity::Flat;
    std::map<int, std::vector<double>> matrices;  // bucket -> factor correlation, row-major
    std::vector<Timestamp> grid;
    std::size_t n_paths = 1;
    std::uint64_t seed = 0;
    bool store_draws = false;
};

struct Repair {
    int bucket = 0;
    double min_eigenvalue = 0.0;
};

struct JointPaths {
    std::vector<std::string> labels;  // one per output series
    std::vector<Paths> series;        // MR/BS: price; SP: spot then index
    std::vector<std::string> factor_names;
    std::vector<std::vector<double>> draws;  // per factor, path-major per step
    std::vector<Repair> repairs;
};

/// Number of factors: two per SP member, one otherwise.
std::size_t factor_count(const std::vector<JointMember>& members);

/// Clips negative eigenvalues at zero and rescales to unit diagonal.
/// Returns true when the input needed repair.
bool repair_correlation(std::vector<double>& matrix, std::size_t dim, double* min_eigenvalue = nullptr);

/// Real-world joint simulation with correlated factor draws per bucket.
/// SP members use the approximation that the mean-reverting and plain
/// index increments coincide.
JointPaths simulate_joint(const JointSpec& spec);

// ---------------------------------------------------------------------------
// Output.

struct NamedPaths {
    std::string label;
    const Paths* paths = nullptr;
};

/// Wide CSV: `date` then one column per (series, path), named label_p<k>.
void write_csv(std::ostream& os, const std::vector<NamedPaths>& series);

/// Binary layout (little endian): "MRCP", u32 version=1, u32 n_series,
/// u64 n_steps, u64 n_paths, u64 seed, u64 spec_hash, then n_steps i64
/// timestamps (minutes since 1970-01-01), then for each series its label
/// (u32 length + bytes) and n_paths * n_steps f64 values, path-major.
void write_binary(std::ostream& os, const std::vector<NamedPaths>& series, std::uint64_t seed,
                  std::uint64_t spec_hash);

}  // namespace mrcal::sim
