#include "phenoct/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "phenoct/hashing.hpp"
#include "phenoct/metrics.hpp"
#include "phenoct/rng.hpp"

namespace phenoct {

std::vector<std::size_t> stratified_folds(const std::vector<std::string>& case_ids,
                                          const std::vector<int>& labels, std::size_t k,
                                          std::uint64_t seed) {
    if (k < 2) throw DataError("stratified_folds: k must be >= 2");
    if (case_ids.size() != labels.size())
        throw DataError("stratified_folds: ids/labels size mismatch");

    std::size_t n_pos = 0;
    for (int y : labels) n_pos += (y != 0);
    if (n_pos < k)
        std::cerr << "warning: fewer positives (" << n_pos << ") than folds (" << k
                  << "); some folds will lack positives\n";

    std::vector<std::size_t> assignment(case_ids.size(), 0);
    std::size_t counter = 0;  // continues across classes to balance totals
    for (int cls : {1, 0}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if ((labels[i] != 0) == (cls == 1)) members.push_back(i);
        std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
            return case_ids[a] < case_ids[b];
        });
        Substream rng(seed, static_cast<std::uint64_t>(cls));
        rng.shuffle(members);
        for (auto idx : members) assignment[idx] = (counter++) % k;
    }
    return assignment;
}

namespace {

Eigen::MatrixXd rows_to_matrix(const FeatureTable& table, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.n_descriptors()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t c = 0; c < table.n_descriptors(); ++c)
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                table.value(rows[i], c);
    return X;
}

Eigen::VectorXd labels_to_vector(const std::vector<int>& labels,
                                 const std::vector<std::size_t>& rows) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) y[static_cast<Eigen::Index>(i)] =
        labels[rows[i]] != 0 ? 1.0 : 0.0;
    return y;
}

void parallel_for(std::size_t n_tasks, std::size_t parallelism,
                  const std::function<void(std::size_t)>& body) {
    if (parallelism <= 1 || n_tasks <= 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) body(i);
        return;
    }
    const std::size_t n_threads = std::min(parallelism, n_tasks);
    std::vector<std::thread> workers;
    for (std::size_t t = 0; t < n_threads; ++t) {
        workers.emplace_back([&, t] {
            for (std::size_t i = t; i < n_tasks; i += n_threads) body(i);
        });
    }
    for (auto& w : workers) w.join();
}

}  // namespace

CvSelection cv_select(const FeatureTable& table, const std::vector<int>& labels,
                      const SelectionConfig& config) {
    const std::size_t n = table.n_cases();
    if (labels.size() != n) throw DataError("cv_select: labels/table size mismatch");
    {
        std::size_t n_pos = 0;
        for (int y : labels) n_pos += (y != 0);
        if (n_pos == 0 || n_pos == n) throw DataError("cv_select: degenerate labels");
    }

    const auto folds = stratified_folds(table.case_ids(), labels, config.folds,
                                        config.fold_seed);
    const std::size_t k = config.folds;
    const std::size_t n_grid = config.C_grid.size() * config.l1_grid.size();
    const std::size_t p = table.n_descriptors();

    // fits[fold][grid] and ap[fold][grid], slot-indexed so parallel
    // execution order cannot change the result.
    std::vector<std::vector<FitResult>> fits(k, std::vector<FitResult>(n_grid));
    std::vector<std::vector<double>> ap(k, std::vector<double>(n_grid,
                                        std::numeric_limits<double>::quiet_NaN()));
    std::vector<std::uint8_t> fold_ok(k, 1);

    std::vector<std::vector<std::size_t>> train_rows(k), val_rows(k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < k; ++f)
            (folds[i] == f ? val_rows[f] : train_rows[f]).push_back(i);
    }

    parallel_for(k * n_grid, config.parallelism, [&](std::size_t task) {
        const std::size_t f = task / n_grid;
        const std::size_t g = task % n_grid;
        const double C = config.C_grid[g / config.l1_grid.size()];
        const double l1 = config.l1_grid[g % config.l1_grid.size()];

        const auto& tr = train_rows[f];
        const auto& va = val_rows[f];
        const Eigen::VectorXd y_tr = labels_to_vector(labels, tr);
        if (y_tr.sum() == 0.0 || y_tr.sum() == static_cast<double>(tr.size())) {
            fold_ok[f] = 0;
            return;
        }
        const Eigen::MatrixXd X_tr = rows_to_matrix(table, tr);
        ElasticNetConfig en;
        en.C = C;
        en.l1_ratio = l1;
        auto fit_result = fit(X_tr, y_tr, class_weights(y_tr), en);

        const Eigen::MatrixXd X_va = rows_to_matrix(table, va);
        const Eigen::VectorXd proba =
            predict_proba(X_va, fit_result.weights, fit_result.intercept);
        std::vector<double> scores(proba.data(), proba.data() + proba.size());
        std::vector<int> y_va(va.size());
        for (std::size_t i = 0; i < va.size(); ++i) y_va[i] = labels[va[i]] != 0 ? 1 : 0;
        if (auto m = average_precision(scores, y_va)) ap[f][g] = *m;
        fits[f][g] = std::move(fit_result);
    });

    SelectionReport report;
    report.descriptor_ids = table.catalog().ids();
    report.retention.assign(p, 0);
    report.ap_grid = ap;
    report.best_grid_point.assign(k, 0);

    for (std::size_t f = 0; f < k; ++f) {
        if (!fold_ok[f]) {
            std::cerr << "warning: fold " << f << " skipped (single-class training split)\n";
            continue;
        }
        // Grid order is (C ascending, l1 ascending); keeping the first
        // strict maximum realizes the smaller-C-then-smaller-l1 tie rule.
        std::size_t best = 0;
        double best_ap = -1.0;
        for (std::size_t g = 0; g < n_grid; ++g) {
            if (std::isnan(ap[f][g])) continue;
            if (ap[f][g] > best_ap) {
                best_ap = ap[f][g];
                best = g;
            }
        }
        report.best_grid_point[f] = best;
        const auto& w = fits[f][best].weights;
        for (std::size_t d = 0; d < p; ++d)
            if (std::abs(w[static_cast<Eigen::Index>(d)]) > 1e-10) ++report.retention[d];
    }

    const auto needed = static_cast<std::size_t>(
        std::ceil(config.retention_threshold * static_cast<double>(k) - 1e-9));
    for (std::size_t d = 0; d < p; ++d)
        if (report.retention[d] >= needed) report.selected.push_back(table.catalog().ids()[d]);

    CvSelection out;
    out.selected = report.selected;
    out.report = std::move(report);
    return out;
}

FrozenSpec fit_locked(const FeatureTable& raw_table, const std::vector<int>& labels,
                      const std::vector<std::string>& selected, const ImputerParams& imputer,
                      const ScalerParams& scaler, const DescriptorCatalog& full_catalog,
                      const std::string& finding, const SelectionConfig& config) {
    FrozenSpec spec;
    spec.finding = finding;
    spec.catalog_sha256 = full_catalog.sha256();
    spec.descriptors = selected;
    spec.C = config.final_C;
    spec.l1_ratio = config.final_l1_ratio;

    for (const auto& id : selected) {
        const auto col = full_catalog.index_of(id);
        spec.impute[id] = imputer.fill[col];
        spec.scale_mean[id] = scaler.mean[col];
        spec.scale_std[id] = scaler.std_dev[col];
    }

    if (selected.empty())
        std::cerr << "warning: no descriptors selected for '" << finding
                  << "'; locking an intercept-only spec\n";

    const std::size_t n = raw_table.n_cases();
    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(selected.size()));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < selected.size(); ++c) {
            const auto col = raw_table.catalog().index_of(selected[c]);
            const double raw = raw_table.is_missing(i, col) ? spec.impute.at(selected[c])
                                                            : raw_table.value(i, col);
            const double sd = spec.scale_std.at(selected[c]);
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                sd == 0.0 ? 0.0 : (raw - spec.scale_mean.at(selected[c])) / sd;
        }
    }
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        y[static_cast<Eigen::Index>(i)] = labels[i] != 0 ? 1.0 : 0.0;

    ElasticNetConfig en;
    en.C = config.final_C;
    en.l1_ratio = config.final_l1_ratio;
    const auto fr = fit(X, y, class_weights(y), en);
    if (!fr.converged)
        std::cerr << "warning: locked fit for '" << finding << "' did not converge\n";

    for (std::size_t c = 0; c < selected.size(); ++c)
        spec.weights[selected[c]] = fr.weights[static_cast<Eigen::Index>(c)];
    spec.intercept = fr.intercept;
    spec.solver_converged = fr.converged;
    return spec;
}

double apply_frozen(const FrozenSpec& spec, const CaseVector& raw_case) {
    double z = spec.intercept;
    for (const auto& id : spec.descriptors) {
        double raw = spec.impute.at(id);
        if (auto it = raw_case.find(id); it != raw_case.end() && it->second) raw = *it->second;
        const double sd = spec.scale_std.at(id);
        const double x = sd == 0.0 ? 0.0 : (raw - spec.scale_mean.at(id)) / sd;
        z += spec.weights.at(id) * x;
    }
    return sigmoid(z);
}

void check_catalog(const FrozenSpec& spec, const DescriptorCatalog& catalog) {
    if (spec.catalog_sha256 != catalog.sha256())
        throw DataError("spec/catalog drift: catalog hash mismatch");
}

namespace {

std::string escape_json(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

void emit_map(std::ostringstream& out, const std::map<std::string, double>& m) {
    out << "{";
    bool first = true;
    for (const auto& [k, v] : m) {
        if (!first) out << ",";
        first = false;
        out << "\"" << escape_json(k) << "\":" << format_double(v);
    }
    out << "}";
}

// Canonical serialization with keys in sorted order. The spec_sha256
// field is the hash of this text rendered with an empty hash value.
std::string render_spec(const FrozenSpec& spec, const std::string& hash) {
    std::ostringstream out;
    out << "{";
    out << "\"catalog_sha256\":\"" << spec.catalog_sha256 << "\",";
    out << "\"config\":{\"C\":" << format_double(spec.C)
        << ",\"l1_ratio\":" << format_double(spec.l1_ratio) << "},";
    out << "\"converged\":" << (spec.solver_converged ? "true" : "false") << ",";
    out << "\"descriptors\":[";
    for (std::size_t i = 0; i < spec.descriptors.size(); ++i) {
        if (i) out << ",";
        out << "\"" << escape_json(spec.descriptors[i]) << "\"";
    }
    out << "],";
    out << "\"finding\":\"" << escape_json(spec.finding) << "\",";
    out << "\"impute\":";
    emit_map(out, spec.impute);
    out << ",\"intercept\":" << format_double(spec.intercept) << ",";
    out << "\"scale\":{\"mean\":";
    emit_map(out, spec.scale_mean);
    out << ",\"std\":";
    emit_map(out, spec.scale_std);
    out << "},";
    out << "\"selection_report_path\":\"" << escape_json(spec.selection_report_path) << "\",";
    out << "\"spec_sha256\":\"" << hash << "\",";
    out << "\"weights\":";
    emit_map(out, spec.weights);
    out << "}\n";
    return out.str();
}

}  // namespace

std::string spec_canonical_json(const FrozenSpec& spec) {
    const auto hash = sha256_hex(render_spec(spec, ""));
    return render_spec(spec, hash);
}

void save_spec(const FrozenSpec& spec, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << spec_canonical_json(spec);
}

FrozenSpec load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("spec: invalid JSON: ") + e.what());
    }
    FrozenSpec spec;
    try {
        spec.finding = j.at("finding").get<std::string>();
        spec.catalog_sha256 = j.at("catalog_sha256").get<std::string>();
        spec.descriptors = j.at("descriptors").get<std::vector<std::string>>();
        spec.impute = j.at("impute").get<std::map<std::string, double>>();
        spec.scale_mean = j.at("scale").at("mean").get<std::map<std::string, double>>();
        spec.scale_std = j.at("scale").at("std").get<std::map<std::string, double>>();
        spec.weights = j.at("weights").get<std::map<std::string, double>>();
        spec.intercept = j.at("intercept").get<double>();
        spec.C = j.at("config").at("C").get<double>();
        spec.l1_ratio = j.at("config").at("l1_ratio").get<double>();
        spec.solver_converged = j.at("converged").get<bool>();
        spec.selection_report_path = j.at("selection_report_path").get<std::string>();
        const auto stored = j.at("spec_sha256").get<std::string>();
        if (stored != sha256_hex(render_spec(spec, "")))
            throw DataError("spec content hash mismatch (file tampered or corrupt)");
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("spec: schema violation: ") + e.what());
    }
    if (spec.weights.size() != spec.descriptors.size())
        throw ParseError("spec: weights/descriptors length mismatch");
    return spec;
}

void save_selection_report(const SelectionReport& report, const SelectionConfig& config,
                           const std::string& path) {
    nlohmann::json j;
    j["folds"] = config.folds;
    j["retention_threshold"] = config.retention_threshold;
    j["C_grid"] = config.C_grid;
    j["l1_grid"] = config.l1_grid;
    j["fold_seed"] = config.fold_seed;
    j["descriptors"] = report.descriptor_ids;
    j["retention"] = report.retention;
    j["validation_ap"] = nlohmann::json::array();
    for (const auto& row : report.ap_grid) {
        nlohmann::json r = nlohmann::json::array();
        for (double v : row) {
            if (std::isnan(v)) r.push_back(nullptr);
            else r.push_back(v);
        }
        j["validation_ap"].push_back(r);
    }
    j["best_grid_point"] = report.best_grid_point;
    j["selected"] = report.selected;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << j.dump(2) << "\n";
}

}  // namespace phenoct
