#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "phenoct/volume.hpp"

namespace phenoct {

enum class Axis { X, Y, Z };

struct Containment {
    std::int32_t content_class;
    std::int32_t compartment_class;
};

struct ContrastPair {
    std::int32_t class_a;
    std::int32_t class_b;
    std::string stat;  // first-order stat name, default "mean"
};

struct CompositePair {
    std::string numerator;    // descriptor id
    std::string denominator;  // descriptor id
};

// Declares the label classes of a segmentation model and the relations
// (containment, contrasts, composites) the descriptor grid is built from.
class AnatomyCatalog {
public:
    struct ClassEntry {
        std::int32_t id;
        std::string name;
    };

    AnatomyCatalog(std::vector<ClassEntry> classes,
                   std::vector<Containment> containment = {},
                   std::optional<std::int32_t> body_class = {},
                   std::map<std::int32_t, Axis> tubular = {},
                   std::vector<double> burden_thresholds = {130.0, 200.0, 300.0},
                   std::vector<ContrastPair> contrasts = {},
                   std::vector<CompositePair> composites = {});

    static AnatomyCatalog from_json_file(const std::string& path);
    static AnatomyCatalog from_json_text(const std::string& text);

    const std::vector<ClassEntry>& classes() const { return classes_; }
    const std::vector<Containment>& containment() const { return containment_; }
    std::optional<std::int32_t> body_class() const { return body_class_; }
    const std::map<std::int32_t, Axis>& tubular() const { return tubular_; }
    const std::vector<double>& burden_thresholds() const { return burden_thresholds_; }
    const std::vector<ContrastPair>& contrasts() const { return contrasts_; }
    const std::vector<CompositePair>& composites() const { return composites_; }

    bool declares(std::int32_t class_id) const { return by_id_.count(class_id) != 0; }
    const std::string& name_of(std::int32_t class_id) const;
    std::int32_t id_of(const std::string& name) const;

private:
    std::vector<ClassEntry> classes_;
    std::vector<Containment> containment_;
    std::optional<std::int32_t> body_class_;
    std::map<std::int32_t, Axis> tubular_;
    std::vector<double> burden_thresholds_;
    std::vector<ContrastPair> contrasts_;
    std::vector<CompositePair> composites_;
    std::map<std::int32_t, std::string> by_id_;
    std::map<std::string, std::int32_t> by_name_;
};

// Volume + labelmap validated to share a grid, with all present classes
// declared in the catalog.
struct AlignedCase {
    const VoxelVolume* volume;
    const LabelMap* labels;
    const AnatomyCatalog* catalog;
};

AlignedCase validate_pair(const VoxelVolume& volume, const LabelMap& labels,
                          const AnatomyCatalog& catalog);

}  // namespace phenoct
