#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "phenoct/common.hpp"

namespace phenoct {

// Ordered descriptor ids; the order is the canonical column order and
// the correlation-filter tie-break order.
class DescriptorCatalog {
public:
    explicit DescriptorCatalog(std::vector<std::string> ids);

    const std::vector<std::string>& ids() const { return ids_; }
    std::size_t size() const { return ids_.size(); }
    std::size_t index_of(const std::string& id) const;
    bool contains(const std::string& id) const { return index_.count(id) != 0; }

    // SHA-256 over the newline-joined id list; used to detect spec/catalog drift.
    std::string sha256() const;

private:
    std::vector<std::string> ids_;
    std::map<std::string, std::size_t> index_;
};

using CaseVector = std::map<std::string, std::optional<double>>;

// Cases x descriptors with explicit missingness.
class FeatureTable {
public:
    FeatureTable(std::vector<std::string> case_ids, DescriptorCatalog catalog);

    static FeatureTable build(const std::vector<std::string>& case_ids,
                              const std::vector<CaseVector>& vectors,
                              const DescriptorCatalog& catalog);

    std::size_t n_cases() const { return case_ids_.size(); }
    std::size_t n_descriptors() const { return catalog_.size(); }
    const std::vector<std::string>& case_ids() const { return case_ids_; }
    const DescriptorCatalog& catalog() const { return catalog_; }

    double value(std::size_t row, std::size_t col) const { return values_[row * n_descriptors() + col]; }
    bool is_missing(std::size_t row, std::size_t col) const { return missing_[row * n_descriptors() + col] != 0; }
    void set(std::size_t row, std::size_t col, double v) {
        values_[row * n_descriptors() + col] = v;
        missing_[row * n_descriptors() + col] = 0;
    }
    void set_missing(std::size_t row, std::size_t col) {
        values_[row * n_descriptors() + col] = 0.0;
        missing_[row * n_descriptors() + col] = 1;
    }

    std::optional<double> get(std::size_t row, const std::string& id) const {
        const auto col = catalog_.index_of(id);
        if (is_missing(row, col)) return std::nullopt;
        return value(row, col);
    }

    FeatureTable subset_rows(const std::vector<std::size_t>& rows) const;

    void save_csv(const std::string& path,
                  const std::vector<std::string>& provenance_lines = {}) const;
    static FeatureTable load_csv(const std::string& path);
    void save_jsonl(const std::string& path) const;
    static FeatureTable load_jsonl(const std::string& path);

private:
    std::vector<std::string> case_ids_;
    DescriptorCatalog catalog_;
    std::vector<double> values_;
    std::vector<std::uint8_t> missing_;
};

// Per-descriptor median of observed training entries. Descriptors
// observed nowhere are flagged unusable and excluded downstream.
struct ImputerParams {
    std::vector<double> fill;
    std::vector<std::uint8_t> unusable;
};

ImputerParams fit_imputer(const FeatureTable& table);
FeatureTable apply_imputer(const FeatureTable& table, const ImputerParams& params);

// Per-descriptor mean and population std, computed after imputation.
struct ScalerParams {
    std::vector<double> mean;
    std::vector<double> std_dev;
    std::vector<std::uint8_t> constant;
};

ScalerParams fit_scaler(const FeatureTable& imputed);
FeatureTable apply_scaler(const FeatureTable& table, const ScalerParams& params);

// Greedy pairwise filter in canonical order: constants drop first, then
// for i < j with |r| > threshold and i still kept, j drops.
std::vector<std::string> correlation_filter(const FeatureTable& standardized,
                                            double threshold = 0.95);

double pearson(const FeatureTable& table, std::size_t col_a, std::size_t col_b);

FeatureTable select_columns(const FeatureTable& table, const std::vector<std::string>& ids);

}  // namespace phenoct
