#include "phenoct/feature_table.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "phenoct/hashing.hpp"

namespace phenoct {

DescriptorCatalog::DescriptorCatalog(std::vector<std::string> ids) : ids_(std::move(ids)) {
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (!index_.emplace(ids_[i], i).second)
            throw DataError("duplicate descriptor id " + ids_[i]);
    }
}

std::size_t DescriptorCatalog::index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw DataError("unknown descriptor id " + id);
    return it->second;
}

std::string DescriptorCatalog::sha256() const {
    std::string joined;
    for (const auto& id : ids_) {
        joined += id;
        joined += '\n';
    }
    return sha256_hex(joined);
}

FeatureTable::FeatureTable(std::vector<std::string> case_ids, DescriptorCatalog catalog)
    : case_ids_(std::move(case_ids)),
      catalog_(std::move(catalog)),
      values_(case_ids_.size() * catalog_.size(), 0.0),
      missing_(case_ids_.size() * catalog_.size(), 1) {
    std::set<std::string> seen;
    for (const auto& id : case_ids_)
        if (!seen.insert(id).second) throw DataError("duplicate case id " + id);
}

FeatureTable FeatureTable::build(const std::vector<std::string>& case_ids,
                                 const std::vector<CaseVector>& vectors,
                                 const DescriptorCatalog& catalog) {
    if (case_ids.empty()) throw DataError("no cases");
    if (case_ids.size() != vectors.size())
        throw DataError("case id / vector count mismatch");
    FeatureTable t(case_ids, catalog);
    for (std::size_t row = 0; row < vectors.size(); ++row) {
        for (const auto& [id, value] : vectors[row]) {
            if (!catalog.contains(id))
                throw DataError("unknown descriptor id " + id + " in case " + case_ids[row]);
            if (value) t.set(row, catalog.index_of(id), *value);
        }
    }
    return t;
}

FeatureTable FeatureTable::subset_rows(const std::vector<std::size_t>& rows) const {
    std::vector<std::string> ids;
    for (auto r : rows) ids.push_back(case_ids_.at(r));
    FeatureTable out(std::move(ids), catalog_);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t c = 0; c < n_descriptors(); ++c) {
            if (!is_missing(rows[i], c)) out.set(i, c, value(rows[i], c));
        }
    }
    return out;
}

void FeatureTable::save_csv(const std::string& path,
                            const std::vector<std::string>& provenance_lines) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    for (const auto& line : provenance_lines) out << "# " << line << "\n";
    out << "case_id";
    for (const auto& id : catalog_.ids()) out << "," << id;
    out << "\n";
    for (std::size_t r = 0; r < n_cases(); ++r) {
        out << case_ids_[r];
        for (std::size_t c = 0; c < n_descriptors(); ++c) {
            out << ",";
            if (is_missing(r, c)) out << "NA";
            else out << format_double(value(r, c));
        }
        out << "\n";
    }
}

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

}  // namespace

FeatureTable FeatureTable::load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    // Skip provenance comment lines.
    do {
        if (!std::getline(in, line)) throw ParseError("empty feature CSV " + path);
    } while (!line.empty() && line[0] == '#');
    auto header = split_csv_line(line);
    if (header.empty() || header[0] != "case_id")
        throw ParseError("feature CSV must start with case_id column");
    std::vector<std::string> ids(header.begin() + 1, header.end());
    DescriptorCatalog catalog(ids);

    std::vector<std::string> case_ids;
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw ParseError("ragged row in feature CSV " + path);
        case_ids.push_back(cells[0]);
        rows.push_back(std::move(cells));
    }
    FeatureTable t(std::move(case_ids), std::move(catalog));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < ids.size(); ++c) {
            const auto& cell = rows[r][c + 1];
            if (cell == "NA") continue;
            t.set(r, c, std::stod(cell));
        }
    }
    return t;
}

void FeatureTable::save_jsonl(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    for (std::size_t r = 0; r < n_cases(); ++r) {
        nlohmann::json j;
        j["case_id"] = case_ids_[r];
        nlohmann::json vals = nlohmann::json::object();
        for (std::size_t c = 0; c < n_descriptors(); ++c) {
            if (is_missing(r, c)) vals[catalog_.ids()[c]] = nullptr;
            else vals[catalog_.ids()[c]] = value(r, c);
        }
        j["values"] = vals;
        out << j.dump() << "\n";
    }
}

FeatureTable FeatureTable::load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<std::string> case_ids;
    std::vector<CaseVector> vectors;
    std::set<std::string> id_set;
    std::vector<std::string> id_order;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        case_ids.push_back(j.at("case_id").get<std::string>());
        CaseVector v;
        for (const auto& [k, val] : j.at("values").items()) {
            if (id_set.insert(k).second) id_order.push_back(k);
            v[k] = val.is_null() ? std::optional<double>{} : std::optional<double>{val.get<double>()};
        }
        vectors.push_back(std::move(v));
    }
    return build(case_ids, vectors, DescriptorCatalog(id_order));
}

ImputerParams fit_imputer(const FeatureTable& table) {
    const auto p = table.n_descriptors();
    ImputerParams params;
    params.fill.assign(p, 0.0);
    params.unusable.assign(p, 0);
    for (std::size_t c = 0; c < p; ++c) {
        std::vector<double> observed;
        for (std::size_t r = 0; r < table.n_cases(); ++r)
            if (!table.is_missing(r, c)) observed.push_back(table.value(r, c));
        if (observed.empty()) {
            params.unusable[c] = 1;
            continue;
        }
        params.fill[c] = percentile(std::move(observed), 50.0);
    }
    return params;
}

FeatureTable apply_imputer(const FeatureTable& table, const ImputerParams& params) {
    if (params.fill.size() != table.n_descriptors())
        throw DataError("imputer/table catalog mismatch");
    FeatureTable out = table;
    for (std::size_t c = 0; c < table.n_descriptors(); ++c) {
        for (std::size_t r = 0; r < table.n_cases(); ++r) {
            if (out.is_missing(r, c)) out.set(r, c, params.fill[c]);
        }
    }
    return out;
}

ScalerParams fit_scaler(const FeatureTable& imputed) {
    const auto p = imputed.n_descriptors();
    const auto n = static_cast<double>(imputed.n_cases());
    ScalerParams params;
    params.mean.assign(p, 0.0);
    params.std_dev.assign(p, 0.0);
    params.constant.assign(p, 0);
    for (std::size_t c = 0; c < p; ++c) {
        double sum = 0.0;
        for (std::size_t r = 0; r < imputed.n_cases(); ++r) sum += imputed.value(r, c);
        const double mean = sum / n;
        double m2 = 0.0;
        for (std::size_t r = 0; r < imputed.n_cases(); ++r) {
            const double d = imputed.value(r, c) - mean;
            m2 += d * d;
        }
        params.mean[c] = mean;
        params.std_dev[c] = std::sqrt(m2 / n);
        if (params.std_dev[c] == 0.0) params.constant[c] = 1;
    }
    return params;
}

FeatureTable apply_scaler(const FeatureTable& table, const ScalerParams& params) {
    if (params.mean.size() != table.n_descriptors())
        throw DataError("scaler/table catalog mismatch");
    FeatureTable out = table;
    for (std::size_t c = 0; c < table.n_descriptors(); ++c) {
        for (std::size_t r = 0; r < table.n_cases(); ++r) {
            if (out.is_missing(r, c)) continue;
            const double v = out.value(r, c);
            out.set(r, c, params.constant[c] ? 0.0 : (v - params.mean[c]) / params.std_dev[c]);
        }
    }
    return out;
}

double pearson(const FeatureTable& table, std::size_t a, std::size_t b) {
    const auto n = static_cast<double>(table.n_cases());
    double ma = 0.0, mb = 0.0;
    for (std::size_t r = 0; r < table.n_cases(); ++r) {
        ma += table.value(r, a);
        mb += table.value(r, b);
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t r = 0; r < table.n_cases(); ++r) {
        const double da = table.value(r, a) - ma;
        const double db = table.value(r, b) - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

std::vector<std::string> correlation_filter(const FeatureTable& standardized, double threshold) {
    const auto p = standardized.n_descriptors();
    std::vector<std::uint8_t> kept(p, 1);
    // Constant descriptors drop first.
    for (std::size_t c = 0; c < p; ++c) {
        double first = standardized.value(0, c);
        bool constant = true;
        for (std::size_t r = 1; r < standardized.n_cases(); ++r) {
            if (standardized.value(r, c) != first) {
                constant = false;
                break;
            }
        }
        if (constant) kept[c] = 0;
    }
    for (std::size_t i = 0; i < p; ++i) {
        if (!kept[i]) continue;
        for (std::size_t j = i + 1; j < p; ++j) {
            if (!kept[j]) continue;
            if (std::abs(pearson(standardized, i, j)) > threshold) kept[j] = 0;
        }
    }
    std::vector<std::string> out;
    for (std::size_t c = 0; c < p; ++c)
        if (kept[c]) out.push_back(standardized.catalog().ids()[c]);
    return out;
}

FeatureTable select_columns(const FeatureTable& table, const std::vector<std::string>& ids) {
    std::vector<std::size_t> cols;
    for (const auto& id : ids) cols.push_back(table.catalog().index_of(id));
    FeatureTable out(table.case_ids(), DescriptorCatalog(ids));
    for (std::size_t r = 0; r < table.n_cases(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (!table.is_missing(r, cols[c])) out.set(r, c, table.value(r, cols[c]));
        }
    }
    return out;
}

}  // namespace phenoct
