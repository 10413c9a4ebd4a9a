#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "phenoct/hashing.hpp"
#include "phenoct/metrics.hpp"
#include "phenoct/nifti.hpp"
#include "phenoct/phantom.hpp"
#include "phenoct/runner.hpp"
#include "phenoct/selection.hpp"

namespace {

constexpr const char* kToolVersion = "0.1.0";

using nlohmann::json;
using namespace phenoct;

std::string g_command_line;

json provenance(std::uint64_t seed, const json& config,
                const std::vector<std::string>& input_paths) {
    json p;
    p["tool_version"] = kToolVersion;
    p["command"] = g_command_line;
    p["seed"] = seed;
    p["config_hash"] = sha256_hex(config.dump());
    json inputs = json::object();
    for (const auto& path : input_paths) inputs[path] = sha256_hex_file(path);
    p["input_hashes"] = inputs;
    return p;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << j.dump(2) << "\n";
}

json report_to_json(const MetricReport& r) {
    json j;
    j["metric"] = r.metric;
    j["point"] = r.point;
    j["ci_low"] = r.ci_low;
    j["ci_high"] = r.ci_high;
    j["n_cases"] = r.n_cases;
    j["n_positive"] = r.n_positive;
    j["skipped_replicates"] = r.skipped_replicates;
    return j;
}

void print_report_line(const MetricReport& r) {
    std::printf("%-12s %8.4f  (95%% CI %.4f-%.4f)  n=%zu pos=%zu\n", r.metric.c_str(),
                r.point, r.ci_low, r.ci_high, r.n_cases, r.n_positive);
}

struct Predictions {
    std::vector<std::string> case_ids;
    std::vector<double> scores;
    std::vector<std::optional<int>> labels;
};

Predictions load_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    Predictions p;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line.rfind("case_id,score,label", 0) != 0)
                throw ParseError("predictions CSV must have header case_id,score,label");
            header_seen = true;
            continue;
        }
        std::istringstream ss(line);
        std::string id, score, label;
        std::getline(ss, id, ',');
        std::getline(ss, score, ',');
        std::getline(ss, label, ',');
        p.case_ids.push_back(id);
        p.scores.push_back(std::stod(score));
        if (label == "NA" || label.empty()) p.labels.push_back(std::nullopt);
        else p.labels.push_back(std::stoi(label));
    }
    if (!header_seen) throw ParseError("empty predictions file " + path);
    return p;
}

// Rows whose label is uncertain (NA) are excluded from metrics.
void definite_subset(const Predictions& p, std::vector<double>& scores,
                     std::vector<int>& labels) {
    for (std::size_t i = 0; i < p.scores.size(); ++i) {
        if (!p.labels[i]) continue;
        scores.push_back(p.scores[i]);
        labels.push_back(*p.labels[i]);
    }
    if (scores.empty()) throw DataError("no cases with definite labels");
}

SelectionConfig selection_config_from_json(const json& cfg) {
    SelectionConfig sc;
    if (cfg.contains("folds")) sc.folds = cfg["folds"].get<std::size_t>();
    if (cfg.contains("retention_threshold"))
        sc.retention_threshold = cfg["retention_threshold"].get<double>();
    if (cfg.contains("C_grid")) sc.C_grid = cfg["C_grid"].get<std::vector<double>>();
    if (cfg.contains("l1_grid")) sc.l1_grid = cfg["l1_grid"].get<std::vector<double>>();
    if (cfg.contains("final_C")) sc.final_C = cfg["final_C"].get<double>();
    if (cfg.contains("final_l1_ratio")) sc.final_l1_ratio = cfg["final_l1_ratio"].get<double>();
    return sc;
}

EvalConfig eval_config_from_json(const json& cfg) {
    EvalConfig ec;
    if (cfg.contains("n_bootstrap")) ec.n_bootstrap = cfg["n_bootstrap"].get<std::size_t>();
    if (cfg.contains("ci_level")) ec.ci_level = cfg["ci_level"].get<double>();
    return ec;
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config " + path);
    return json::parse(in);
}

std::vector<double> parse_threshold_list(const std::string& csv) {
    std::vector<double> out;
    std::istringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    if (out.empty()) throw DataError("empty threshold list");
    return out;
}

int run(int argc, char** argv) {
    CLI::App app{"phenoct: segmentation-derived CT phenotyping engine"};
    app.require_subcommand(1);

    std::string catalog_path, out_path, config_path;
    std::uint64_t seed = 0;
    std::size_t parallelism = 1;

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic phantom cohort");
    std::size_t synth_n = 200;
    double synth_prev = 0.2;
    std::string synth_effect = "gallstone";
    double synth_noise = 8.0;
    synth->add_option("--out", out_path, "output directory")->required();
    synth->add_option("--n", synth_n, "cohort size");
    synth->add_option("--prevalence", synth_prev, "positive fraction in (0,1)");
    synth->add_option("--effect", synth_effect, "gallstone|steatosis|cyst");
    synth->add_option("--noise", synth_noise, "HU noise sigma");
    synth->add_option("--seed", seed, "generator seed");

    // extract
    auto* extract = app.add_subcommand("extract", "extract descriptor vectors for a cohort");
    std::string manifest_path, jsonl_path;
    extract->add_option("--manifest", manifest_path, "cohort manifest CSV")->required();
    extract->add_option("--catalog", catalog_path, "anatomy catalog JSON")->required();
    extract->add_option("--out", out_path, "output feature CSV")->required();
    extract->add_option("--jsonl", jsonl_path, "also write JSONL form here");
    extract->add_option("--parallelism", parallelism, "worker threads");
    extract->add_option("--seed", seed, "echoed into provenance");

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "select features and lock a classifier");
    std::string features_path, finding, report_path;
    fit_cmd->add_option("--features", features_path, "feature CSV")->required();
    fit_cmd->add_option("--manifest", manifest_path, "cohort manifest CSV (labels)")->required();
    fit_cmd->add_option("--finding", finding, "finding name (manifest column)")->required();
    fit_cmd->add_option("--out", out_path, "frozen spec JSON")->required();
    fit_cmd->add_option("--report", report_path, "selection report JSON");
    fit_cmd->add_option("--config", config_path, "selection/eval config JSON");
    fit_cmd->add_option("--seed", seed, "fold seed");
    fit_cmd->add_option("--parallelism", parallelism, "worker threads");

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "apply a frozen spec to a cohort");
    std::string spec_path;
    predict_cmd->add_option("--spec", spec_path, "frozen spec JSON")->required();
    predict_cmd->add_option("--features", features_path, "feature CSV")->required();
    predict_cmd->add_option("--manifest", manifest_path, "manifest CSV for labels (optional)");
    predict_cmd->add_option("--out", out_path, "predictions CSV")->required();
    predict_cmd->add_option("--seed", seed, "echoed into provenance");

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "AUC/AP with bootstrap CIs");
    std::vector<std::string> pred_paths;
    std::size_t n_bootstrap = 2000;
    eval_cmd->add_option("--pred", pred_paths, "predictions CSV (repeat for macro)")
        ->required();
    eval_cmd->add_option("--out", out_path, "report JSON")->required();
    eval_cmd->add_option("--seed", seed, "bootstrap seed");
    eval_cmd->add_option("--bootstrap", n_bootstrap, "replicates");
    eval_cmd->add_option("--config", config_path, "eval config JSON");

    // compare
    auto* compare_cmd = app.add_subcommand("compare", "paired bootstrap delta of two models");
    std::string pred_a, pred_b;
    compare_cmd->add_option("--pred-a", pred_a, "predictions CSV A")->required();
    compare_cmd->add_option("--pred-b", pred_b, "predictions CSV B")->required();
    compare_cmd->add_option("--out", out_path, "report JSON")->required();
    compare_cmd->add_option("--seed", seed, "bootstrap seed");
    compare_cmd->add_option("--bootstrap", n_bootstrap, "replicates");

    // audit
    auto* audit_cmd = app.add_subcommand("audit", "phenotype-stratified threshold sweep");
    std::string stratum_feature, thresholds_csv;
    bool keep_below = false;
    audit_cmd->add_option("--pred", pred_paths, "predictions CSV")->required();
    audit_cmd->add_option("--features", features_path, "feature CSV (stratum values)")
        ->required();
    audit_cmd->add_option("--feature", stratum_feature, "stratifying descriptor id")
        ->required();
    audit_cmd->add_option("--thresholds", thresholds_csv, "comma-separated sweep")->required();
    audit_cmd->add_option("--out", out_path, "report JSON")->required();
    audit_cmd->add_option("--seed", seed, "bootstrap seed");
    audit_cmd->add_option("--bootstrap", n_bootstrap, "replicates");
    audit_cmd->add_flag("--below", keep_below, "keep positives below the threshold");

    // curves
    auto* curves_cmd = app.add_subcommand("curves", "ceteris-paribus model response");
    std::size_t grid_size = 50;
    curves_cmd->add_option("--spec", spec_path, "frozen spec JSON")->required();
    curves_cmd->add_option("--features", features_path, "reference feature CSV")->required();
    curves_cmd->add_option("--feature", stratum_feature, "descriptor to sweep")->required();
    curves_cmd->add_option("--grid", grid_size, "sweep points");
    curves_cmd->add_option("--out", out_path, "curve JSON")->required();

    CLI11_PARSE(app, argc, argv);

    if (synth->parsed()) {
        PhantomPlan plan;
        plan.cohort_size = synth_n;
        plan.prevalence = synth_prev;
        plan.effect = parse_effect(synth_effect);
        plan.noise_sigma = synth_noise;
        plan.seed = seed;
        generate_phantom_cohort(plan, out_path);
        json prov = provenance(seed, json{{"n", synth_n}, {"prevalence", synth_prev},
                                          {"effect", synth_effect}, {"noise", synth_noise}},
                               {});
        write_json(out_path + "/provenance.json", prov);
        std::cout << "wrote cohort of " << synth_n << " cases to " << out_path << "\n";
        return 0;
    }

    if (extract->parsed()) {
        const auto manifest = CohortManifest::load_csv(manifest_path);
        const auto catalog = AnatomyCatalog::from_json_file(catalog_path);
        const auto result = extract_cohort(manifest, catalog, parallelism);
        json prov = provenance(seed, json{{"parallelism", parallelism}},
                               {manifest_path, catalog_path});
        result.table.save_csv(out_path, {"provenance: " + prov.dump()});
        if (!jsonl_path.empty()) result.table.save_jsonl(jsonl_path);
        for (const auto& f : result.failed)
            std::cerr << "excluded case " << f.case_id << ": " << f.error << "\n";
        std::cout << "extracted " << result.table.n_cases() << " cases x "
                  << result.table.n_descriptors() << " descriptors ("
                  << result.failed.size() << " failed)\n";
        return 0;
    }

    if (fit_cmd->parsed()) {
        const auto cfg = load_config(config_path);
        auto sel_cfg = selection_config_from_json(cfg);
        sel_cfg.fold_seed = seed;
        sel_cfg.parallelism = parallelism;

        const auto table_all = FeatureTable::load_csv(features_path);
        const auto manifest = CohortManifest::load_csv(manifest_path);
        std::map<std::string, std::optional<int>> label_by_case;
        for (const auto& rec : manifest.cases) {
            auto it = rec.labels.find(finding);
            if (it == rec.labels.end())
                throw DataError("finding '" + finding + "' not in manifest");
            label_by_case[rec.case_id] = it->second;
        }
        std::vector<std::size_t> rows;
        std::vector<int> labels;
        for (std::size_t r = 0; r < table_all.n_cases(); ++r) {
            auto it = label_by_case.find(table_all.case_ids()[r]);
            if (it == label_by_case.end())
                throw DataError("case " + table_all.case_ids()[r] + " missing from manifest");
            if (!it->second) continue;  // uncertain: excluded
            rows.push_back(r);
            labels.push_back(*it->second);
        }
        const auto table = table_all.subset_rows(rows);

        const auto imputer = fit_imputer(table);
        const auto imputed = apply_imputer(table, imputer);
        const auto scaler = fit_scaler(imputed);
        const auto standardized = apply_scaler(imputed, scaler);
        const auto kept = correlation_filter(standardized, 0.95);
        const auto filtered = select_columns(standardized, kept);

        auto cv = cv_select(filtered, labels, sel_cfg);
        auto spec = fit_locked(table, labels, cv.selected, imputer, scaler,
                               table.catalog(), finding, sel_cfg);
        if (report_path.empty())
            report_path = out_path + ".selection.json";
        spec.selection_report_path = report_path;
        save_selection_report(cv.report, sel_cfg, report_path);
        save_spec(spec, out_path);
        std::cout << "locked spec for '" << finding << "' with " << spec.descriptors.size()
                  << " descriptors -> " << out_path << "\n";
        return 0;
    }

    if (predict_cmd->parsed()) {
        const auto spec = load_spec(spec_path);
        const auto table = FeatureTable::load_csv(features_path);
        check_catalog(spec, table.catalog());
        std::map<std::string, std::optional<int>> label_by_case;
        if (!manifest_path.empty()) {
            const auto manifest = CohortManifest::load_csv(manifest_path);
            for (const auto& rec : manifest.cases) {
                auto it = rec.labels.find(spec.finding);
                if (it != rec.labels.end()) label_by_case[rec.case_id] = it->second;
            }
        }
        std::ofstream out(out_path);
        if (!out) throw DataError("cannot write " + out_path);
        json prov = provenance(seed, json::object(), {spec_path, features_path});
        out << "# provenance: " << prov.dump() << "\n";
        out << "case_id,score,label\n";
        for (std::size_t r = 0; r < table.n_cases(); ++r) {
            CaseVector v;
            for (const auto& id : spec.descriptors) v[id] = table.get(r, id);
            const double p = apply_frozen(spec, v);
            const auto& cid = table.case_ids()[r];
            std::string label = "NA";
            if (auto it = label_by_case.find(cid); it != label_by_case.end() && it->second)
                label = std::to_string(*it->second);
            out << cid << "," << format_double(p) << "," << label << "\n";
        }
        std::cout << "scored " << table.n_cases() << " cases -> " << out_path << "\n";
        return 0;
    }

    if (eval_cmd->parsed()) {
        EvalConfig ec = eval_config_from_json(load_config(config_path));
        if (eval_cmd->count("--bootstrap")) ec.n_bootstrap = n_bootstrap;
        ec.seed = seed;

        json out = json::object();
        out["provenance"] = provenance(seed, json{{"n_bootstrap", ec.n_bootstrap},
                                                  {"ci_level", ec.ci_level}},
                                       pred_paths);
        json per = json::array();
        std::vector<FindingSample> samples;
        for (const auto& path : pred_paths) {
            const auto preds = load_predictions(path);
            FindingSample fs;
            fs.finding = path;
            definite_subset(preds, fs.scores, fs.labels);
            const auto auc_rep = bootstrap_ci(auc, fs.scores, fs.labels, ec, "auc");
            const auto ap_rep =
                bootstrap_ci(average_precision, fs.scores, fs.labels, ec, "ap");
            print_report_line(auc_rep);
            print_report_line(ap_rep);
            json e;
            e["predictions"] = path;
            e["auc"] = report_to_json(auc_rep);
            e["ap"] = report_to_json(ap_rep);
            per.push_back(e);
            samples.push_back(std::move(fs));
        }
        out["findings"] = per;
        if (samples.size() > 1) {
            const auto macro_auc = macro_average(samples, auc, ec, "macro_auc");
            const auto macro_ap = macro_average(samples, average_precision, ec, "macro_ap");
            print_report_line(macro_auc);
            print_report_line(macro_ap);
            out["macro"] = {{"auc", report_to_json(macro_auc)},
                            {"ap", report_to_json(macro_ap)}};
        }
        write_json(out_path, out);
        return 0;
    }

    if (compare_cmd->parsed()) {
        EvalConfig ec;
        ec.n_bootstrap = n_bootstrap;
        ec.seed = seed;
        const auto pa = load_predictions(pred_a);
        const auto pb = load_predictions(pred_b);
        if (pa.case_ids != pb.case_ids)
            throw DataError("compare: prediction files must score the same cases in order");
        std::vector<double> sa, sb;
        std::vector<int> labels;
        for (std::size_t i = 0; i < pa.scores.size(); ++i) {
            if (!pa.labels[i]) continue;
            sa.push_back(pa.scores[i]);
            sb.push_back(pb.scores[i]);
            labels.push_back(*pa.labels[i]);
        }
        const auto d_auc = paired_delta(sa, sb, labels, auc, ec, "delta_auc");
        const auto d_ap = paired_delta(sa, sb, labels, average_precision, ec, "delta_ap");
        print_report_line(d_auc);
        print_report_line(d_ap);
        json out;
        out["provenance"] = provenance(seed, json{{"n_bootstrap", ec.n_bootstrap}},
                                       {pred_a, pred_b});
        out["delta_auc"] = report_to_json(d_auc);
        out["delta_ap"] = report_to_json(d_ap);
        write_json(out_path, out);
        return 0;
    }

    if (audit_cmd->parsed()) {
        EvalConfig ec;
        ec.n_bootstrap = n_bootstrap;
        ec.seed = seed;
        const auto preds = load_predictions(pred_paths.at(0));
        const auto table = FeatureTable::load_csv(features_path);
        const auto thresholds = parse_threshold_list(thresholds_csv);

        std::vector<double> scores;
        std::vector<int> labels;
        std::vector<std::optional<double>> strata;
        for (std::size_t i = 0; i < preds.case_ids.size(); ++i) {
            if (!preds.labels[i]) continue;
            scores.push_back(preds.scores[i]);
            labels.push_back(*preds.labels[i]);
            // Stratum lookup by case id; cases absent from the feature
            // table carry a missing stratum.
            std::optional<double> sv;
            const auto& ids = table.case_ids();
            auto it = std::find(ids.begin(), ids.end(), preds.case_ids[i]);
            if (it != ids.end())
                sv = table.get(static_cast<std::size_t>(it - ids.begin()), stratum_feature);
            strata.push_back(sv);
        }
        const auto sweep = stratified_eval(scores, labels, strata, thresholds, auc, ec,
                                           "auc", keep_below);
        json out;
        out["provenance"] = provenance(seed, json{{"feature", stratum_feature},
                                                  {"thresholds", thresholds}},
                                       {pred_paths.at(0), features_path});
        out["feature"] = stratum_feature;
        json rows = json::array();
        for (const auto& sr : sweep) {
            json r;
            r["threshold"] = sr.threshold;
            r["kept_positives"] = sr.kept_positives;
            r["excluded_positives"] = sr.excluded_positives;
            r["excluded_fraction"] = sr.excluded_fraction;
            r["missing_stratum_positives"] = sr.missing_stratum_positives;
            if (sr.report) r["auc"] = report_to_json(*sr.report);
            else r["auc"] = nullptr;
            rows.push_back(r);
            std::printf("V_min=%10.1f  kept_pos=%4zu excl_pos=%4zu (%.0f%%)  %s\n",
                        sr.threshold, sr.kept_positives, sr.excluded_positives,
                        100.0 * sr.excluded_fraction,
                        sr.report ? (std::string("AUC ") + format_double(sr.report->point)).c_str()
                                  : "undefined");
        }
        out["sweep"] = rows;
        write_json(out_path, out);
        return 0;
    }

    if (curves_cmd->parsed()) {
        const auto spec = load_spec(spec_path);
        const auto table = FeatureTable::load_csv(features_path);
        check_catalog(spec, table.catalog());
        const auto curve = ceteris_paribus(spec, table, stratum_feature, grid_size);
        json out;
        out["provenance"] = provenance(seed, json{{"feature", stratum_feature},
                                                  {"grid", grid_size}},
                                       {spec_path, features_path});
        out["feature"] = stratum_feature;
        json pts = json::array();
        for (const auto& p : curve) pts.push_back({{"raw", p.raw_value},
                                                   {"probability", p.probability}});
        out["curve"] = pts;
        write_json(out_path, out);
        std::cout << "wrote " << curve.size() << " curve points -> " << out_path << "\n";
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    std::ostringstream cmd;
    for (int i = 0; i < argc; ++i) cmd << (i ? " " : "") << argv[i];
    g_command_line = cmd.str();
    try {
        return run(argc, argv);
    } catch (const phenoct::DataError& e) {
        std::cerr << "error: data: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: numerical: " << e.what() << "\n";
        return 3;
    }
}
