#include "phenoct/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "phenoct/common.hpp"
#include "phenoct/rng.hpp"

namespace phenoct {

std::optional<double> auc(std::span<const double> scores, std::span<const int> labels) {
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int y : labels) n_pos += (y != 0);
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Midranks over tie groups.
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }
    double rank_sum = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        if (labels[k] != 0) rank_sum += rank[k];
    const double np = static_cast<double>(n_pos);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const int> labels) {
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int y : labels) n_pos += (y != 0);
    if (n_pos == 0) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    // Sum the precisions and divide once: a perfect ranking then sums
    // exactly to n_pos and the result cannot creep above 1.
    double precision_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (labels[order[k]] != 0) {
            ++hits;
            precision_sum += static_cast<double>(hits) / static_cast<double>(k + 1);
        }
    }
    return precision_sum / static_cast<double>(n_pos);
}

namespace {

struct CiResult {
    double lo, hi;
    std::size_t skipped;
};

CiResult percentile_ci(std::vector<double> valid, std::size_t skipped, double ci_level) {
    if (valid.size() < 50) throw DataError("unstable bootstrap: fewer than 50 valid replicates");
    std::sort(valid.begin(), valid.end());
    const double lo_p = 100.0 * (1.0 - ci_level) / 2.0;
    const double hi_p = 100.0 * (1.0 + ci_level) / 2.0;
    return {percentile_sorted(valid, lo_p), percentile_sorted(valid, hi_p), skipped};
}

std::vector<std::size_t> resample_indices(Substream& rng, std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = rng.next_below(n);
    return idx;
}

}  // namespace

MetricReport bootstrap_ci(const MetricFn& metric_fn, std::span<const double> scores,
                          std::span<const int> labels, const EvalConfig& config,
                          const std::string& name) {
    const std::size_t n = scores.size();
    auto point = metric_fn(scores, labels);
    if (!point) throw DataError("metric '" + name + "' undefined on the full sample");

    std::vector<double> valid;
    std::size_t skipped = 0;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t r = 0; r < config.n_bootstrap; ++r) {
        Substream rng(config.seed, r);
        const auto idx = resample_indices(rng, n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = scores[idx[i]];
            y[i] = labels[idx[i]];
        }
        if (auto m = metric_fn(s, y)) valid.push_back(*m);
        else ++skipped;
    }
    const auto ci = percentile_ci(std::move(valid), skipped, config.ci_level);

    MetricReport rep;
    rep.metric = name;
    rep.point = *point;
    rep.ci_low = ci.lo;
    rep.ci_high = ci.hi;
    rep.n_cases = n;
    for (int v : labels) rep.n_positive += (v != 0);
    rep.skipped_replicates = ci.skipped;
    return rep;
}

MetricReport paired_delta(std::span<const double> scores_a, std::span<const double> scores_b,
                          std::span<const int> labels, const MetricFn& metric_fn,
                          const EvalConfig& config, const std::string& name) {
    const std::size_t n = labels.size();
    if (scores_a.size() != n || scores_b.size() != n)
        throw DataError("paired_delta: score vectors must cover the same cases");
    auto ma = metric_fn(scores_a, labels);
    auto mb = metric_fn(scores_b, labels);
    if (!ma || !mb) throw DataError("metric undefined on the full sample");

    std::vector<double> valid;
    std::size_t skipped = 0;
    std::vector<double> sa(n), sb(n);
    std::vector<int> y(n);
    for (std::size_t r = 0; r < config.n_bootstrap; ++r) {
        Substream rng(config.seed, r);
        const auto idx = resample_indices(rng, n);
        for (std::size_t i = 0; i < n; ++i) {
            sa[i] = scores_a[idx[i]];
            sb[i] = scores_b[idx[i]];
            y[i] = labels[idx[i]];
        }
        auto ra = metric_fn(sa, y);
        auto rb = metric_fn(sb, y);
        if (ra && rb) valid.push_back(*ra - *rb);
        else ++skipped;
    }
    const auto ci = percentile_ci(std::move(valid), skipped, config.ci_level);

    MetricReport rep;
    rep.metric = name;
    rep.point = *ma - *mb;
    rep.ci_low = ci.lo;
    rep.ci_high = ci.hi;
    rep.n_cases = n;
    for (int v : labels) rep.n_positive += (v != 0);
    rep.skipped_replicates = ci.skipped;
    return rep;
}

MetricReport macro_average(const std::vector<FindingSample>& findings, const MetricFn& metric_fn,
                           const EvalConfig& config, const std::string& name) {
    std::vector<double> points;
    for (const auto& f : findings) {
        if (auto m = metric_fn(f.scores, f.labels)) points.push_back(*m);
    }
    if (points.empty()) throw DataError("macro_average: no finding with a defined metric");
    const double point =
        std::accumulate(points.begin(), points.end(), 0.0) / static_cast<double>(points.size());

    std::vector<double> valid;
    std::size_t skipped = 0;
    for (std::size_t r = 0; r < config.n_bootstrap; ++r) {
        std::vector<double> per_finding;
        for (std::size_t f = 0; f < findings.size(); ++f) {
            const auto& fs = findings[f];
            const std::size_t n = fs.scores.size();
            if (n == 0) continue;
            Substream rng(config.seed, r, f);
            const auto idx = resample_indices(rng, n);
            std::vector<double> s(n);
            std::vector<int> y(n);
            for (std::size_t i = 0; i < n; ++i) {
                s[i] = fs.scores[idx[i]];
                y[i] = fs.labels[idx[i]];
            }
            if (auto m = metric_fn(s, y)) per_finding.push_back(*m);
        }
        if (per_finding.empty()) {
            ++skipped;
            continue;
        }
        valid.push_back(std::accumulate(per_finding.begin(), per_finding.end(), 0.0) /
                        static_cast<double>(per_finding.size()));
    }
    const auto ci = percentile_ci(std::move(valid), skipped, config.ci_level);

    MetricReport rep;
    rep.metric = name;
    rep.point = point;
    rep.ci_low = ci.lo;
    rep.ci_high = ci.hi;
    for (const auto& f : findings) {
        rep.n_cases += f.scores.size();
        for (int v : f.labels) rep.n_positive += (v != 0);
    }
    rep.skipped_replicates = ci.skipped;
    return rep;
}

std::vector<StratumReport> stratified_eval(std::span<const double> scores,
                                           std::span<const int> labels,
                                           std::span<const std::optional<double>> strata,
                                           std::span<const double> thresholds,
                                           const MetricFn& metric_fn, const EvalConfig& config,
                                           const std::string& name, bool keep_below) {
    const std::size_t n = scores.size();
    if (strata.size() != n || labels.size() != n)
        throw DataError("stratified_eval: shape mismatch");

    std::vector<StratumReport> out;
    for (double v_min : thresholds) {
        StratumReport sr;
        sr.threshold = v_min;
        std::vector<double> s;
        std::vector<int> y;
        std::size_t total_positives = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] == 0) {
                s.push_back(scores[i]);
                y.push_back(0);
                continue;
            }
            ++total_positives;
            if (!strata[i]) {
                ++sr.missing_stratum_positives;
                ++sr.excluded_positives;
                continue;
            }
            const bool keep = keep_below ? (*strata[i] < v_min) : (*strata[i] >= v_min);
            if (keep) {
                s.push_back(scores[i]);
                y.push_back(1);
                ++sr.kept_positives;
            } else {
                ++sr.excluded_positives;
            }
        }
        sr.excluded_fraction = total_positives == 0
                                   ? 0.0
                                   : static_cast<double>(sr.excluded_positives) /
                                         static_cast<double>(total_positives);
        if (sr.kept_positives > 0)
            sr.report = bootstrap_ci(metric_fn, s, y, config, name);
        out.push_back(std::move(sr));
    }
    return out;
}

std::vector<CurvePoint> ceteris_paribus(const FrozenSpec& spec, const FeatureTable& reference,
                                        const std::string& descriptor_id,
                                        std::size_t grid_size) {
    if (std::find(spec.descriptors.begin(), spec.descriptors.end(), descriptor_id) ==
        spec.descriptors.end())
        throw DataError("descriptor '" + descriptor_id + "' not selected in spec");
    if (reference.n_cases() == 0) throw DataError("empty reference table");

    // Baseline case: every selected descriptor at its reference-table
    // median over observed entries (frozen fill when observed nowhere).
    CaseVector base;
    for (const auto& id : spec.descriptors) {
        const auto col = reference.catalog().index_of(id);
        std::vector<double> observed;
        for (std::size_t r = 0; r < reference.n_cases(); ++r)
            if (!reference.is_missing(r, col)) observed.push_back(reference.value(r, col));
        if (observed.empty()) base[id] = std::nullopt;
        else base[id] = percentile(std::move(observed), 50.0);
    }

    const auto col = reference.catalog().index_of(descriptor_id);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < reference.n_cases(); ++r) {
        if (reference.is_missing(r, col)) continue;
        lo = std::min(lo, reference.value(r, col));
        hi = std::max(hi, reference.value(r, col));
    }
    if (!std::isfinite(lo))
        throw DataError("descriptor '" + descriptor_id + "' observed nowhere in reference");

    std::vector<CurvePoint> curve;
    for (std::size_t i = 0; i < grid_size; ++i) {
        const double t = grid_size == 1 ? 0.0
                                        : static_cast<double>(i) /
                                              static_cast<double>(grid_size - 1);
        const double raw = lo + t * (hi - lo);
        CaseVector c = base;
        c[descriptor_id] = raw;
        curve.push_back({raw, apply_frozen(spec, c)});
    }
    return curve;
}

}  // namespace phenoct
