#include <cmath>
#include <functional>
#include <sstream>

#include "app.hpp"
#include "mrcal/error.hpp"
#include "mrcal/simulate.hpp"
#include "mrcal/spot_prompt.hpp"

namespace mrcal::app {

namespace {

struct Check {
    std::string name;
    std::function<std::string()> run;  // empty string: pass; otherwise the reason
};

bool close_rel(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b)); }

std::string fail(const std::string& what, double got, double want) {
    std::ostringstream os;
    os.precision(17);
    os << what << ": got " << got << ", want " << want;
    return os.str();
}

// Three years of weekday prices from a seasonal one-factor model.
sim::Paths sample_path(std::uint64_t seed, std::vector<double>* draws = nullptr) {
    mr::MRParams p;
    p.rate = 30.0;
    p.shape.level = LevelGranularity::CalendarMonth;
    for (int m = 1; m <= 12; ++m) {
        p.sigma[m] = 0.6 + 0.05 * m;
        p.theta[{0, m}] = p.rate * (1.5 + 0.1 * std::sin(m));
    }
    sim::RealWorldOptions o;
    o.grid = sim::make_grid(make_timestamp(2010, 1, 4), make_timestamp(2012, 12, 31), sim::GridFrequency::Weekdays);
    o.seed = seed;
    o.draws = draws;
    return sim::simulate_mr_realworld(p, 4.5, o);
}

std::vector<Check> checks() {
    std::vector<Check> out;

    out.push_back({"coefs: zero-rate limit", [] {
                       const auto c = mr::coefs(0.0, 0.01);
                       if (c.eta != 1.0 || !close_rel(c.kappa, 0.01, 1e-15) || !close_rel(c.gamma, 0.1, 1e-15))
                           return std::string("expected (1, 0.01, 0.1)");
                       return std::string();
                   }});
    out.push_back({"coefs: eta = 1 - a kappa", [] {
                       for (double a : {0.5, 40.0, 400.0}) {
                           const auto c = mr::coefs(a, 3.0 / 365.0);
                           if (!close_rel(c.eta, 1.0 - a * c.kappa, 1e-13)) return fail("eta", c.eta, 1.0 - a * c.kappa);
                       }
                       return std::string();
                   }});
    out.push_back({"residuals invert the exact recursion", [] {
                       std::vector<double> draws;
                       const auto path = sample_path(11, &draws);
                       mr::MRParams p;
                       p.rate = 30.0;
                       p.shape.level = LevelGranularity::CalendarMonth;
                       for (int m = 1; m <= 12; ++m) {
                           p.sigma[m] = 0.6 + 0.05 * m;
                           p.theta[{0, m}] = p.rate * (1.5 + 0.1 * std::sin(m));
                       }
                       const auto res = mr::residuals(to_steps(path.path_series(0, "x"), Transform::Log), p);
                       for (std::size_t k = 0; k < res.size(); ++k)
                           if (std::abs(res.points[k].value - draws[k]) > 1e-10)
                               return fail("residual " + std::to_string(k), res.points[k].value, draws[k]);
                       return std::string();
                   }});
    out.push_back({"theta/sigma at a = 1e-9 match the zero-rate estimates", [] {
                       const auto steps = to_steps(sample_path(12).path_series(0, "x"), Transform::Log);
                       const auto th = mr::theta_hat(steps, 1e-9);
                       const auto sg = mr::sigma_hat(steps, 1e-9, th, true);
                       const auto bs = mr::bs_calibrate(steps);
                       for (const auto& [b, v] : bs.mu)
                           if (!close_rel(th.at(b), v, 1e-6)) return fail("mu " + level_label(b), th.at(b), v);
                       for (const auto& [b, v] : bs.sigma)
                           if (!close_rel(sg.at(b), v, 1e-6)) return fail("sigma " + std::to_string(b), sg.at(b), v);
                       return std::string();
                   }});
    out.push_back({"calibrated rate maximizes the profile likelihood", [] {
                       const auto steps = to_steps(sample_path(13).path_series(0, "x"), Transform::Log);
                       mr::CalibrationOptions o;
                       const auto cal = mr::calibrate(steps, 261.0, o);
                       const mr::ProfileLikelihood lik(steps, o.shape);
                       const double best = lik(cal.params.rate);
                       for (int k = 1; k <= 200; ++k) {
                           const double a = cal.params.rate * std::exp((k - 100) / 40.0);
                           if (lik(a) > best + 1e-8 * std::abs(best)) return fail("L at " + std::to_string(a), lik(a), best);
                       }
                       return std::string();
                   }});
    out.push_back({"Q_KS limits and monotonicity", [] {
                       if (std::abs(stats::q_ks(0.05) - 1.0) > 1e-9) return fail("Q(0.05)", stats::q_ks(0.05), 1.0);
                       if (!(stats::q_ks(5.0) < 1e-20)) return fail("Q(5)", stats::q_ks(5.0), 0.0);
                       double prev = 1.0;
                       for (double l = 0.01; l < 4.0; l += 0.01) {
                           const double q = stats::q_ks(l);
                           if (q > prev) return fail("Q increases at " + std::to_string(l), q, prev);
                           prev = q;
                       }
                       return std::string();
                   }});
    out.push_back({"intervals bracket their estimates", [] {
                       for (std::size_t n : {5u, 30u, 300u, 30000u}) {
                           for (double alpha : {0.01, 0.05, 0.2}) {
                               const auto v = stats::vol_ci(0.7, n, alpha);
                               if (!(v.lower < 0.7 && 0.7 < v.upper)) return std::string("vol_ci ordering");
                               for (double r : {-0.95, 0.0, 0.4, 0.99}) {
                                   const auto c = stats::corr_ci(r, n, alpha);
                                   if (!(c.lower <= r && r <= c.upper && c.lower > -1.0 && c.upper < 1.0))
                                       return std::string("corr_ci ordering");
                               }
                           }
                       }
                       return std::string();
                   }});
    out.push_back({"rho_nu_xi at a dt = 0.5 and 1", [] {
                       const double r1 = sp::rho_nu_xi(0.5, 1.0), r2 = sp::rho_nu_xi(1.0, 1.0);
                       if (std::round(r1 * 100) != 99) return fail("rho(0.5)", r1, 0.99);
                       if (std::round(r2 * 100) != 96) return fail("rho(1)", r2, 0.96);
                       return std::string();
                   }});
    out.push_back({"v_squared closed form", [] {
                       const auto t0 = make_timestamp(2011, 3, 5), t1 = make_timestamp(2011, 9, 20);
                       const double tau = year_fraction(t0, t1);
                       const double v = sim::v_squared(7.0, sim::flat_curve(0.9), t0, t1);
                       const double want = 0.81 / 14.0 * (1.0 - std::exp(-14.0 * tau));
                       return close_rel(v, want, 1e-12) ? std::string() : fail("V^2", v, want);
                   }});
    out.push_back({"simulation is reproducible from the seed", [] {
                       const auto a = sample_path(99), b = sample_path(99);
                       return a.values == b.values ? std::string() : std::string("paths differ");
                   }});
    out.push_back({"correlation repair gives a unit-diagonal PSD matrix", [] {
                       std::vector<double> m{1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0};
                       double lo = 0.0;
                       if (!sim::repair_correlation(m, 3, &lo) || !(lo < 0.0)) return std::string("not flagged");
                       for (int d = 0; d < 3; ++d)
                           if (m[d * 4] != 1.0) return std::string("diagonal not 1");
                       const double after = joint::min_eigenvalue(m, 3);
                       return after > -1e-12 ? std::string() : fail("min eigenvalue", after, 0.0);
                   }});
    out.push_back({"Spot-Prompt variance identity", [] {
                       sp::SPParams p;
                       p.shape.level = LevelGranularity::Flat;
                       p.shape.vol = PeriodGranularity::Flat;
                       p.spot_granularity = PeriodGranularity::Flat;
                       p.rate = 120.0;
                       p.theta_tilde[{0, 0}] = 0.0;
                       p.mu[{0, 0}] = 0.0;
                       p.sigma_S[0] = 0.8;
                       p.sigma_I[0] = 0.5;
                       p.rho[0] = 0.3;
                       sim::RealWorldOptions o;
                       o.grid = sim::make_grid(make_timestamp(2010, 1, 1), make_timestamp(2011, 12, 31),
                                               sim::GridFrequency::Daily);
                       o.seed = 5;
                       const auto s = sim::simulate_sp_realworld(p, 5.0, 5.0, o);
                       sp::SPOptions so;
                       so.shape = p.shape;
                       const auto cal = sp::calibrate_sp(s.spot.path_series(0, "S"), s.index.path_series(0, "I"), so);
                       const auto& q = cal.params;
                       for (const auto& [b, r] : q.rho) {
                           const double sS = q.sigma_S.at(b), sI = q.sigma_I.at(b), sq = q.sigma_q.at(b);
                           const double rhs = sS * sS + sI * sI - 2.0 * sS * sI * r;
                           if (!close_rel(sq * sq, rhs, 1e-10)) return fail("sigma^2", sq * sq, rhs);
                       }
                       return std::string();
                   }});
    return out;
}

}  // namespace

Json selftest() {
    Json j;
    j["checks"] = Json::array();
    int passed = 0, failed = 0;
    for (const auto& c : checks()) {
        std::string reason;
        try {
            reason = c.run();
        } catch (const std::exception& e) {
            reason = std::string("threw: ") + e.what();
        }
        Json e;
        e["name"] = c.name;
        e["pass"] = reason.empty();
        if (!reason.empty()) e["reason"] = reason;
        j["checks"].push_back(std::move(e));
        (reason.empty() ? passed : failed) += 1;
    }
    j["passed"] = passed;
    j["failed"] = failed;
    return j;
}

}  // namespace mrcal::app
