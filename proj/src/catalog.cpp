#include "phenoct/catalog.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace phenoct {

AnatomyCatalog::AnatomyCatalog(std::vector<ClassEntry> classes,
                               std::vector<Containment> containment,
                               std::optional<std::int32_t> body_class,
                               std::map<std::int32_t, Axis> tubular,
                               std::vector<double> burden_thresholds,
                               std::vector<ContrastPair> contrasts,
                               std::vector<CompositePair> composites)
    : classes_(std::move(classes)),
      containment_(std::move(containment)),
      body_class_(body_class),
      tubular_(std::move(tubular)),
      burden_thresholds_(std::move(burden_thresholds)),
      contrasts_(std::move(contrasts)),
      composites_(std::move(composites)) {
    for (const auto& c : classes_) {
        if (c.id <= 0) throw DataError("catalog class ids must be positive");
        if (!by_id_.emplace(c.id, c.name).second)
            throw DataError("duplicate catalog class id " + std::to_string(c.id));
        if (!by_name_.emplace(c.name, c.id).second)
            throw DataError("duplicate catalog class name " + c.name);
    }
    for (const auto& rel : containment_) {
        if (!declares(rel.content_class) || !declares(rel.compartment_class))
            throw DataError("containment references undeclared class");
    }
    // Reject containment cycles (content -> compartment edges).
    std::map<std::int32_t, std::int32_t> edge;
    for (const auto& rel : containment_) edge[rel.content_class] = rel.compartment_class;
    for (const auto& [start, _] : edge) {
        std::set<std::int32_t> seen{start};
        auto cur = start;
        while (edge.count(cur)) {
            cur = edge.at(cur);
            if (!seen.insert(cur).second)
                throw DataError("containment cycle involving class " + std::to_string(cur));
        }
    }
    if (body_class_ && !declares(*body_class_))
        throw DataError("body_class not declared");
    for (const auto& [id, _] : tubular_) {
        if (!declares(id)) throw DataError("tubular class not declared");
    }
    for (const auto& c : contrasts_) {
        if (!declares(c.class_a) || !declares(c.class_b))
            throw DataError("contrast references undeclared class");
    }
}

const std::string& AnatomyCatalog::name_of(std::int32_t class_id) const {
    auto it = by_id_.find(class_id);
    if (it == by_id_.end())
        throw DataError("class id " + std::to_string(class_id) + " not in catalog");
    return it->second;
}

std::int32_t AnatomyCatalog::id_of(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw DataError("class name '" + name + "' not in catalog");
    return it->second;
}

namespace {

Axis parse_axis(const std::string& s) {
    if (s == "x") return Axis::X;
    if (s == "y") return Axis::Y;
    if (s == "z") return Axis::Z;
    throw ParseError("catalog: axis must be x, y or z, got '" + s + "'");
}

}  // namespace

AnatomyCatalog AnatomyCatalog::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("catalog: invalid JSON: ") + e.what());
    }
    try {
        std::vector<ClassEntry> classes;
        for (const auto& c : j.at("classes"))
            classes.push_back({c.at("id").get<std::int32_t>(), c.at("name").get<std::string>()});
        std::map<std::string, std::int32_t> by_name;
        for (const auto& c : classes) by_name[c.name] = c.id;
        auto lookup = [&](const std::string& n) {
            auto it = by_name.find(n);
            if (it == by_name.end()) throw ParseError("catalog: unknown class name '" + n + "'");
            return it->second;
        };

        std::vector<Containment> containment;
        if (j.contains("containment"))
            for (const auto& r : j["containment"])
                containment.push_back({lookup(r.at("content").get<std::string>()),
                                       lookup(r.at("compartment").get<std::string>())});

        std::optional<std::int32_t> body;
        if (j.contains("body_class") && !j["body_class"].is_null())
            body = lookup(j["body_class"].get<std::string>());

        std::map<std::int32_t, Axis> tubular;
        if (j.contains("tubular"))
            for (const auto& t : j["tubular"])
                tubular[lookup(t.at("name").get<std::string>())] =
                    parse_axis(t.at("axis").get<std::string>());

        std::vector<double> thresholds = {130.0, 200.0, 300.0};
        if (j.contains("burden_thresholds"))
            thresholds = j["burden_thresholds"].get<std::vector<double>>();

        std::vector<ContrastPair> contrasts;
        if (j.contains("contrasts"))
            for (const auto& c : j["contrasts"])
                contrasts.push_back({lookup(c.at("a").get<std::string>()),
                                     lookup(c.at("b").get<std::string>()),
                                     c.value("stat", std::string("mean"))});

        std::vector<CompositePair> composites;
        if (j.contains("composites"))
            for (const auto& c : j["composites"])
                composites.push_back(
                    {c.at("num").get<std::string>(), c.at("den").get<std::string>()});

        return AnatomyCatalog(std::move(classes), std::move(containment), body,
                              std::move(tubular), std::move(thresholds), std::move(contrasts),
                              std::move(composites));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("catalog: schema violation: ") + e.what());
    }
}

AnatomyCatalog AnatomyCatalog::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open catalog file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

AlignedCase validate_pair(const VoxelVolume& volume, const LabelMap& labels,
                          const AnatomyCatalog& catalog) {
    if (!(volume.dims() == labels.dims()))
        throw DataError("dim mismatch between volume and labelmap");
    if (!spacing_close(volume.spacing(), labels.spacing()))
        throw DataError("spacing mismatch between volume and labelmap");
    std::vector<std::int32_t> unknown;
    for (auto c : labels.present_classes())
        if (!catalog.declares(c)) unknown.push_back(c);
    if (!unknown.empty()) {
        std::string msg = "unknown class ids:";
        for (auto c : unknown) msg += " " + std::to_string(c);
        throw DataError(msg);
    }
    return AlignedCase{&volume, &labels, &catalog};
}

}  // namespace phenoct
