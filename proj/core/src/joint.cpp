#include "mrcal/joint.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <Eigen/Eigenvalues>

#include "mrcal/error.hpp"

namespace mrcal::joint {

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::MR: return "MR";
        case ModelKind::SP: return "SP";
        case ModelKind::BS: return "BS";
    }
    return "?";
}

std::string_view to_string(FactorRole role) { return role == FactorRole::Spot ? "W" : "B"; }

std::string Factor::name() const { return member + ":" + std::string(to_string(role)); }

TrimResult trim_outliers(const FactorSeries& factors, double pct) {
    if (!(pct >= 0.0 && pct <= 0.05)) throw Error("trim_outliers: pct must lie in [0, 0.05]");
    const auto& pts = factors.points;
    const std::size_t n = pts.size();
    const auto k = static_cast<std::size_t>(std::floor(pct * static_cast<double>(n)));
    TrimResult out;
    out.kept.label = factors.label;
    if (k == 0) {
        out.kept.points = pts;
        return out;
    }

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
        if (pts[x].value != pts[y].value) return pts[x].value < pts[y].value;
        return pts[x].time < pts[y].time;
    });
    std::vector<bool> drop(n, false);
    for (std::size_t r = 0; r < k; ++r) drop[idx[r]] = true;

    // Upper tail: largest values first, earlier timestamp first among ties.
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
        if (pts[x].value != pts[y].value) return pts[x].value > pts[y].value;
        return pts[x].time < pts[y].time;
    });
    // When every value ties, the lower tail may already hold a point; skip it
    // so each tail still loses k.
    for (std::size_t r = 0, taken = 0; r < n && taken < k; ++r) {
        if (drop[idx[r]]) continue;
        drop[idx[r]] = true;
        ++taken;
    }

    for (std::size_t q = 0; q < n; ++q) {
        if (drop[q])
            out.removed.push_back(pts[q].time);
        else
            out.kept.points.push_back(pts[q]);
    }
    std::sort(out.removed.begin(), out.removed.end());
    return out;
}

std::optional<Correlation> JointModel::find(std::size_t i, std::size_t j, int bucket) const {
    if (i > j) std::swap(i, j);
    for (const auto& c : correlations)
        if (c.i == i && c.j == j && c.bucket == bucket) return c;
    return std::nullopt;
}

double min_eigenvalue(const std::vector<double>& values, std::size_t dim) {
    if (values.size() != dim * dim) throw Error("min_eigenvalue: size mismatch");
    if (dim == 0) return 0.0;
    Eigen::MatrixXd m(dim, dim);
    for (std::size_t r = 0; r < dim; ++r)
        for (std::size_t c = 0; c < dim; ++c) m(r, c) = values[r * dim + c];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

JointModel build_joint(std::vector<Factor> factors, PeriodGranularity granularity, double alpha, double trim_pct) {
    if (factors.size() < 2) throw Error("build_joint: need at least 2 factor series");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("build_joint: alpha must lie in (0, 1)");

    JointModel model;
    model.granularity = granularity;
    model.alpha = alpha;
    model.trim_pct = trim_pct;

    // Trim each series on its own values, then delete the removed instants
    // from every pair the series takes part in.
    std::vector<std::set<Timestamp>> removed(factors.size());
    for (std::size_t f = 0; f < factors.size(); ++f) {
        auto t = trim_outliers(factors[f].series, trim_pct);
        removed[f].insert(t.removed.begin(), t.removed.end());
        if (!t.removed.empty())
            model.diagnostics.push_back(factors[f].name() + ": trimmed " + std::to_string(t.removed.size()) + " outliers");
    }

    const std::size_t dim = factors.size();
    const auto buckets = period_buckets(granularity);
    std::map<int, std::vector<double>> values;
    std::map<int, std::vector<bool>> known;
    for (int b : buckets) {
        values[b].assign(dim * dim, 0.0);
        known[b].assign(dim * dim, false);
        for (std::size_t d = 0; d < dim; ++d) {
            values[b][d * dim + d] = 1.0;
            known[b][d * dim + d] = true;
        }
    }

    bool any = false;
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = i + 1; j < dim; ++j) {
            AlignedPair ap;
            try {
                ap = align(factors[i].series, factors[j].series);
            } catch (const Error&) {
                model.diagnostics.push_back(factors[i].name() + " x " + factors[j].name() + ": no common timestamps");
                continue;
            }
            std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_bucket;
            for (std::size_t k = 0; k < ap.size(); ++k) {
                const auto t = ap.times[k];
                if (removed[i].count(t) || removed[j].count(t)) continue;
                auto& [x, y] = by_bucket[period_bucket(month_year(t).month, granularity)];
                x.push_back(ap.first[k]);
                y.push_back(ap.second[k]);
            }
            for (int b : buckets) {
                const auto it = by_bucket.find(b);
                const std::size_t n = it == by_bucket.end() ? 0 : it->second.first.size();
                if (n < kMinBucketOverlap) {
                    model.diagnostics.push_back(factors[i].name() + " x " + factors[j].name() + " bucket " +
                                                period_label(b, granularity) + ": only " + std::to_string(n) +
                                                " common points, omitted");
                    continue;
                }
                double rho = 0.0;
                try {
                    rho = stats::pearson(it->second.first, it->second.second);
                } catch (const Error&) {
                    model.diagnostics.push_back(factors[i].name() + " x " + factors[j].name() + " bucket " +
                                                period_label(b, granularity) + ": zero variance, omitted");
                    continue;
                }
                Correlation c;
                c.i = i;
                c.j = j;
                c.bucket = b;
                c.n = n;
                c.ci = std::abs(rho) < 1.0 ? stats::corr_ci(rho, n, alpha) : stats::Interval{rho, rho, rho, alpha};
                model.correlations.push_back(c);
                values[b][i * dim + j] = values[b][j * dim + i] = rho;
                known[b][i * dim + j] = known[b][j * dim + i] = true;
                any = true;
            }
        }
    }
    if (!any) throw Error("build_joint: no pair of factor series has enough overlap in any bucket");

    for (int b : buckets) {
        BucketMatrix m;
        m.dim = dim;
        m.values = std::move(values[b]);
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = i + 1; j < dim; ++j)
                if (!known[b][i * dim + j]) m.missing.emplace_back(i, j);
        m.min_eigenvalue = min_eigenvalue(m.values, dim);
        if (m.min_eigenvalue < 0.0)
            model.diagnostics.push_back("bucket " + period_label(b, granularity) +
                                        ": correlation matrix not positive semidefinite (min eigenvalue " +
                                        std::to_string(m.min_eigenvalue) + ")");
        model.matrices.emplace(b, std::move(m));
    }
    model.factors = std::move(factors);
    return model;
}

Recommendation granularity_check(const JointModel& model, double max_width) {
    Recommendation rec;
    for (const auto& c : model.correlations) {
        const double w = c.ci.width();
        if (w > max_width) rec.flagged.push_back({c.i, c.j, c.bucket, w});
    }
    if (rec.flagged.empty()) return rec;
    switch (model.granularity) {
        case PeriodGranularity::Monthly:
            rec.suggestion = PeriodGranularity::Seasonal;
            rec.note = "recalibrate with seasonal correlation buckets";
            break;
        case PeriodGranularity::Seasonal:
            rec.suggestion = PeriodGranularity::Flat;
            rec.note = "recalibrate with flat correlation";
            break;
        case PeriodGranularity::Flat: rec.note = "already flat; no coarser granularity available"; break;
    }
    return rec;
}

}  // namespace mrcal::joint
