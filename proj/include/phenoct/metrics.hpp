#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phenoct/selection.hpp"

namespace phenoct {

struct EvalConfig {
    std::size_t n_bootstrap = 2000;
    double ci_level = 0.95;
    std::uint64_t seed = 0;
};

struct MetricReport {
    std::string metric;
    double point = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t n_cases = 0;
    std::size_t n_positive = 0;
    std::size_t skipped_replicates = 0;
};

// Mann-Whitney AUC with midranks (ties count 1/2). Undefined (nullopt)
// when only one class is present.
std::optional<double> auc(std::span<const double> scores, std::span<const int> labels);

// Step-wise average precision, no interpolation; score ties broken by
// stable input order. Undefined with zero positives.
std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const int> labels);

using MetricFn = std::function<std::optional<double>(std::span<const double>,
                                                     std::span<const int>)>;

// Percentile bootstrap over counter-based per-replicate substreams:
// replicate r's resample depends only on (seed, r). Replicates where the
// metric is undefined are skipped and counted; fewer than 50 valid
// replicates is an error.
MetricReport bootstrap_ci(const MetricFn& metric_fn, std::span<const double> scores,
                          std::span<const int> labels, const EvalConfig& config,
                          const std::string& name);

// Paired bootstrap on the metric difference m(a) - m(b); each replicate
// resamples case indices once and applies them to both score vectors.
MetricReport paired_delta(std::span<const double> scores_a, std::span<const double> scores_b,
                          std::span<const int> labels, const MetricFn& metric_fn,
                          const EvalConfig& config, const std::string& name);

struct FindingSample {
    std::string finding;
    std::vector<double> scores;
    std::vector<int> labels;
};

// Unweighted mean across findings; CI from per-replicate macro values
// with a shared replicate index and finding-specific substreams.
// Findings with an undefined metric in a replicate are skipped in that
// replicate's mean.
MetricReport macro_average(const std::vector<FindingSample>& findings,
                           const MetricFn& metric_fn, const EvalConfig& config,
                           const std::string& name);

struct StratumReport {
    double threshold;
    std::optional<MetricReport> report;  // nullopt when no positives survive
    std::size_t kept_positives = 0;
    std::size_t excluded_positives = 0;
    double excluded_fraction = 0.0;
    std::size_t missing_stratum_positives = 0;
};

// Threshold-sweep audit: all negatives retained; positives kept when
// their stratum value passes the threshold (>= by default, < when
// keep_below). Positives with a missing stratum value are excluded and
// counted.
std::vector<StratumReport> stratified_eval(std::span<const double> scores,
                                           std::span<const int> labels,
                                           std::span<const std::optional<double>> strata,
                                           std::span<const double> thresholds,
                                           const MetricFn& metric_fn, const EvalConfig& config,
                                           const std::string& name, bool keep_below = false);

struct CurvePoint {
    double raw_value;
    double probability;
};

// Model-response curve: one synthetic case with every selected
// descriptor at its reference-table median (observed entries only); the
// target descriptor sweeps its observed range in grid_size equal steps.
std::vector<CurvePoint> ceteris_paribus(const FrozenSpec& spec, const FeatureTable& reference,
                                        const std::string& descriptor_id,
                                        std::size_t grid_size = 50);

}  // namespace phenoct
