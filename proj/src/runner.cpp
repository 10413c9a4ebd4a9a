#include "phenoct/runner.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "phenoct/nifti.hpp"

namespace phenoct {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

const std::vector<std::string> kFirstOrderStats = {
    "mean", "std",  "min",      "max",      "median",  "p5",  "p10", "p25",
    "p75",  "p90",  "p95",      "iqr",      "skewness", "kurtosis", "entropy"};

std::string threshold_tag(double t) {
    if (t == std::floor(t)) return std::to_string(static_cast<long long>(t));
    std::string s = format_double(t);
    for (char& c : s)
        if (c == '.') c = 'p';
    return s;
}

std::string flatten_id(const std::string& descriptor_id) {
    std::string out = descriptor_id;
    for (char& c : out)
        if (c == '.') c = '_';
    return out;
}

std::string composite_id(const AnatomyCatalog&, const CompositePair& pair) {
    const auto organ_of = [](const std::string& id) { return id.substr(0, id.find('.')); };
    const auto rest_of = [](const std::string& id) {
        return id.substr(id.find('.') + 1);
    };
    return organ_of(pair.numerator) + "_" + organ_of(pair.denominator) + ".comp." +
           flatten_id(rest_of(pair.numerator)) + "_per_" + flatten_id(rest_of(pair.denominator));
}

}  // namespace

CohortManifest CohortManifest::load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest " + path);
    std::string line;
    do {
        if (!std::getline(in, line)) throw ParseError("empty manifest " + path);
    } while (!line.empty() && line[0] == '#');
    auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "case_id" || header[1] != "volume_path" ||
        header[2] != "labels_path")
        throw ParseError("manifest must start with case_id,volume_path,labels_path");

    CohortManifest m;
    m.findings.assign(header.begin() + 3, header.end());
    std::vector<std::string> seen_ids;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size()) throw ParseError("ragged manifest row");
        CaseRecord rec;
        rec.case_id = cells[0];
        if (std::find(seen_ids.begin(), seen_ids.end(), rec.case_id) != seen_ids.end())
            throw DataError("duplicate case id " + rec.case_id + " in manifest");
        seen_ids.push_back(rec.case_id);
        rec.volume_path = cells[1];
        rec.labels_path = cells[2];
        for (std::size_t f = 0; f < m.findings.size(); ++f) {
            const auto& cell = cells[f + 3];
            if (cell == "NA") rec.labels[m.findings[f]] = std::nullopt;
            else if (cell == "1") rec.labels[m.findings[f]] = 1;
            else if (cell == "0") rec.labels[m.findings[f]] = 0;
            else throw ParseError("manifest label must be 1, 0 or NA, got '" + cell + "'");
        }
        m.cases.push_back(std::move(rec));
    }
    return m;
}

void CohortManifest::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "case_id,volume_path,labels_path";
    for (const auto& f : findings) out << "," << f;
    out << "\n";
    for (const auto& rec : cases) {
        out << rec.case_id << "," << rec.volume_path << "," << rec.labels_path;
        for (const auto& f : findings) {
            const auto& v = rec.labels.at(f);
            out << "," << (v ? std::to_string(*v) : std::string("NA"));
        }
        out << "\n";
    }
}

DescriptorCatalog build_descriptor_catalog(const AnatomyCatalog& catalog) {
    std::vector<std::string> ids;
    for (const auto& cls : catalog.classes()) {
        const auto& c = cls.name;
        for (const char* m : {"volume_mm3", "max_diameter_mm", "surface_area_mm2",
                              "sphericity", "elongation", "flatness"})
            ids.push_back(c + ".morph." + m);
        if (catalog.body_class() && *catalog.body_class() != cls.id)
            ids.push_back(c + ".morph.body_ratio");
        if (catalog.tubular().count(cls.id)) ids.push_back(c + ".morph.slice_diam_p90");
        for (const auto& s : kFirstOrderStats) ids.push_back(c + ".atten." + s);
        for (double t : catalog.burden_thresholds()) {
            ids.push_back(c + ".burden.vol_" + threshold_tag(t));
            ids.push_back(c + ".burden.frac_" + threshold_tag(t));
        }
    }
    for (const auto& ct : catalog.contrasts())
        ids.push_back(catalog.name_of(ct.class_a) + "_" + catalog.name_of(ct.class_b) +
                      ".atten.delta_" + ct.stat);
    for (const auto& rel : catalog.containment())
        ids.push_back(catalog.name_of(rel.content_class) + ".burden.occupancy");
    for (const auto& pair : catalog.composites()) ids.push_back(composite_id(catalog, pair));
    return DescriptorCatalog(std::move(ids));
}

CaseExtraction extract_case(const AlignedCase& aligned, const AnatomyCatalog& catalog) {
    const auto& volume = *aligned.volume;
    const auto& labels = *aligned.labels;
    const auto& dims = labels.dims();
    const auto& spacing = labels.spacing();

    CaseExtraction out;
    out.log.grid_scans = 1;

    // Single full-grid scan: per-class voxel lists.
    std::map<std::int32_t, std::vector<std::size_t>> masks;
    for (const auto& cls : catalog.classes()) masks[cls.id];
    const auto& grid = labels.classes();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] == 0) continue;
        auto it = masks.find(grid[i]);
        if (it != masks.end()) it->second.push_back(i);
    }

    std::map<std::int32_t, std::optional<HUStats>> stats;
    std::map<std::string, std::optional<double>>& vec = out.vector;

    std::optional<double> body_vol;
    if (catalog.body_class())
        body_vol = mask_volume(masks.at(*catalog.body_class()), spacing);

    for (const auto& cls : catalog.classes()) {
        const auto& c = cls.name;
        const auto& mask = masks.at(cls.id);
        out.log.organ_voxel_counts[c] = mask.size();
        try {
            const auto morph = compute_morphometry(mask, dims, spacing);
            vec[c + ".morph.volume_mm3"] = morph.volume_mm3;
            vec[c + ".morph.max_diameter_mm"] = morph.max_diameter_mm;
            vec[c + ".morph.surface_area_mm2"] = morph.surface_area_mm2;
            vec[c + ".morph.sphericity"] = morph.sphericity;
            vec[c + ".morph.elongation"] = morph.elongation;
            vec[c + ".morph.flatness"] = morph.flatness;
            if (catalog.body_class() && *catalog.body_class() != cls.id)
                vec[c + ".morph.body_ratio"] = body_ratio(morph.volume_mm3, body_vol);
            if (auto it = catalog.tubular().find(cls.id); it != catalog.tubular().end())
                vec[c + ".morph.slice_diam_p90"] =
                    slice_diameter_percentile(mask, dims, spacing, it->second, 90.0);

            const auto st = firstorder_stats(volume, mask);
            stats[cls.id] = st;
            for (const auto& s : kFirstOrderStats)
                vec[c + ".atten." + s] =
                    st ? std::optional<double>(hu_stat(*st, s)) : std::nullopt;

            for (double t : catalog.burden_thresholds()) {
                const auto b = high_hu_burden(volume, mask, t, spacing);
                vec[c + ".burden.vol_" + threshold_tag(t)] =
                    b ? std::optional<double>(b->burden_volume_mm3) : std::nullopt;
                vec[c + ".burden.frac_" + threshold_tag(t)] =
                    b ? std::optional<double>(b->burden_fraction) : std::nullopt;
            }
        } catch (const std::exception& e) {
            out.log.warnings.push_back("organ '" + c + "' kernels failed: " + e.what());
            stats[cls.id] = std::nullopt;
            for (const char* m : {"volume_mm3", "max_diameter_mm", "surface_area_mm2",
                                  "sphericity", "elongation", "flatness"})
                vec[c + ".morph." + m] = std::nullopt;
            if (catalog.body_class() && *catalog.body_class() != cls.id)
                vec[c + ".morph.body_ratio"] = std::nullopt;
            if (catalog.tubular().count(cls.id)) vec[c + ".morph.slice_diam_p90"] = std::nullopt;
            for (const auto& s : kFirstOrderStats) vec[c + ".atten." + s] = std::nullopt;
            for (double t : catalog.burden_thresholds()) {
                vec[c + ".burden.vol_" + threshold_tag(t)] = std::nullopt;
                vec[c + ".burden.frac_" + threshold_tag(t)] = std::nullopt;
            }
        }
    }

    for (const auto& ct : catalog.contrasts()) {
        const auto id = catalog.name_of(ct.class_a) + "_" + catalog.name_of(ct.class_b) +
                        ".atten.delta_" + ct.stat;
        vec[id] = cross_organ_contrast(stats[ct.class_a], stats[ct.class_b], ct.stat);
    }

    for (const auto& rel : catalog.containment()) {
        const auto id = catalog.name_of(rel.content_class) + ".burden.occupancy";
        const auto n_content = masks.at(rel.content_class).size();
        const auto n_union = n_content + masks.at(rel.compartment_class).size();
        // Empty content is a true zero; an empty union is missing.
        if (n_union == 0) vec[id] = std::nullopt;
        else vec[id] = static_cast<double>(n_content) / static_cast<double>(n_union);
    }

    for (const auto& pair : catalog.composites()) {
        const auto id = composite_id(catalog, pair);
        auto lookup = [&](const std::string& d) -> std::optional<double> {
            auto it = vec.find(d);
            if (it == vec.end())
                throw DataError("composite references unknown descriptor " + d);
            return it->second;
        };
        vec[id] = composite_ratio(lookup(pair.numerator), lookup(pair.denominator));
    }
    return out;
}

CohortExtraction extract_cohort(const CohortManifest& manifest, const AnatomyCatalog& catalog,
                                std::size_t parallelism) {
    if (manifest.cases.empty()) throw DataError("empty manifest");
    const std::size_t n = manifest.cases.size();

    struct Slot {
        bool ok = false;
        CaseVector vector;
        std::string error;
    };
    std::vector<Slot> slots(n);

    auto work = [&](std::size_t i) {
        const auto& rec = manifest.cases[i];
        try {
            const auto volume = load_volume(rec.volume_path);
            const auto labels = load_labelmap(rec.labels_path);
            const auto aligned = validate_pair(volume, labels, catalog);
            slots[i].vector = extract_case(aligned, catalog).vector;
            slots[i].ok = true;
        } catch (const std::exception& e) {
            slots[i].error = e.what();
        }
    };

    if (parallelism <= 1) {
        for (std::size_t i = 0; i < n; ++i) work(i);
    } else {
        const std::size_t n_threads = std::min(parallelism, n);
        std::vector<std::thread> workers;
        for (std::size_t t = 0; t < n_threads; ++t)
            workers.emplace_back([&, t] {
                for (std::size_t i = t; i < n; i += n_threads) work(i);
            });
        for (auto& w : workers) w.join();
    }

    std::vector<std::string> ids;
    std::vector<CaseVector> vectors;
    std::vector<CohortLedgerEntry> failed;
    for (std::size_t i = 0; i < n; ++i) {
        if (slots[i].ok) {
            ids.push_back(manifest.cases[i].case_id);
            vectors.push_back(std::move(slots[i].vector));
        } else {
            failed.push_back({manifest.cases[i].case_id, slots[i].error});
        }
    }
    if (ids.empty()) throw DataError("all cases failed to extract");

    const auto catalog_ids = build_descriptor_catalog(catalog);
    return CohortExtraction{FeatureTable::build(ids, vectors, catalog_ids), std::move(failed)};
}

}  // namespace phenoct
