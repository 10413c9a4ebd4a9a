#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "phenoct/elasticnet.hpp"
#include "phenoct/feature_table.hpp"

namespace phenoct {

struct SelectionConfig {
    std::size_t folds = 5;
    double retention_threshold = 0.6;
    std::vector<double> C_grid = {0.001, 0.01, 0.1, 1.0};
    std::vector<double> l1_grid = {0.1, 0.5, 0.9};
    double final_C = 0.1;
    double final_l1_ratio = 0.5;
    std::uint64_t fold_seed = 0;
    std::size_t parallelism = 1;
};

// Within each class, cases sorted by id, shuffled by the seeded stream,
// then dealt round-robin to folds with a fold counter that continues
// across classes (positives first), so total fold sizes stay balanced.
std::vector<std::size_t> stratified_folds(const std::vector<std::string>& case_ids,
                                          const std::vector<int>& labels, std::size_t k,
                                          std::uint64_t seed);

struct SelectionReport {
    std::vector<std::string> descriptor_ids;
    // retention[d] = number of folds in which descriptor d had a nonzero
    // coefficient at that fold's AP-best grid point.
    std::vector<std::size_t> retention;
    // ap_grid[fold][grid_point] with grid_point = C_index * |l1_grid| + l1_index.
    std::vector<std::vector<double>> ap_grid;
    std::vector<std::size_t> best_grid_point;  // per fold
    std::vector<std::string> selected;
};

struct CvSelection {
    std::vector<std::string> selected;
    SelectionReport report;
};

// Stratified k-fold elastic-net selection: per fold, fit every grid
// point on the training folds, score validation AP, and call a
// descriptor retained if it is nonzero at the fold's AP-best point
// (ties break toward smaller C, then smaller l1_ratio). Descriptors
// retained in >= ceil(retention_threshold * k) folds are selected.
CvSelection cv_select(const FeatureTable& table, const std::vector<int>& labels,
                      const SelectionConfig& config);

struct FrozenSpec {
    std::string finding;
    std::string catalog_sha256;
    std::vector<std::string> descriptors;
    std::map<std::string, double> impute;
    std::map<std::string, double> scale_mean;
    std::map<std::string, double> scale_std;
    std::map<std::string, double> weights;
    double intercept = 0.0;
    double C = 0.1;
    double l1_ratio = 0.5;
    bool solver_converged = true;
    std::string selection_report_path;
};

// Single locked fit on the selected columns at the final operating point
// with balanced class weights. Frozen imputer/scaler values are taken
// from the already-fitted full-training-split parameters.
FrozenSpec fit_locked(const FeatureTable& raw_table, const std::vector<int>& labels,
                      const std::vector<std::string>& selected,
                      const ImputerParams& imputer, const ScalerParams& scaler,
                      const DescriptorCatalog& full_catalog, const std::string& finding,
                      const SelectionConfig& config);

// Pure function of the single case vector: raw value or frozen fill,
// frozen standardization, sigmoid(w.x + b). No cohort statistic is ever
// recomputed.
double apply_frozen(const FrozenSpec& spec, const CaseVector& raw_case);

// Catalog-hash guard used before batch application.
void check_catalog(const FrozenSpec& spec, const DescriptorCatalog& catalog);

// Canonical JSON (sorted keys, 17-significant-digit numbers) with an
// embedded content hash validated on load.
void save_spec(const FrozenSpec& spec, const std::string& path);
FrozenSpec load_spec(const std::string& path);
std::string spec_canonical_json(const FrozenSpec& spec);

void save_selection_report(const SelectionReport& report, const SelectionConfig& config,
                           const std::string& path);

}  // namespace phenoct
