#pragma once

#include <atomic>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "phenoct/attenuation.hpp"
#include "phenoct/catalog.hpp"
#include "phenoct/feature_table.hpp"
#include "phenoct/morphometry.hpp"

namespace phenoct {

// One row of a cohort manifest: paths plus a three-valued label per
// finding (1, 0, or NA for uncertain/absent).
struct CaseRecord {
    std::string case_id;
    std::string volume_path;
    std::string labels_path;
    std::map<std::string, std::optional<int>> labels;
};

struct CohortManifest {
    std::vector<std::string> findings;
    std::vector<CaseRecord> cases;

    static CohortManifest load_csv(const std::string& path);
    void save_csv(const std::string& path) const;
};

// The (organ x descriptor) grid implied by a catalog, in canonical
// column order. Ids follow organ.family.name[.param].
DescriptorCatalog build_descriptor_catalog(const AnatomyCatalog& catalog);

struct ExtractionLog {
    std::map<std::string, std::size_t> organ_voxel_counts;
    std::vector<std::string> warnings;
    std::size_t grid_scans = 0;  // instrumentation for the single-scan contract
};

struct CaseExtraction {
    CaseVector vector;
    ExtractionLog log;
};

// One full-grid scan builds all per-class voxel lists; kernels then run
// per class. A kernel failure on one organ marks only that organ's
// descriptors missing.
CaseExtraction extract_case(const AlignedCase& aligned, const AnatomyCatalog& catalog);

struct CohortLedgerEntry {
    std::string case_id;
    std::string error;
};

struct CohortExtraction {
    FeatureTable table;
    std::vector<CohortLedgerEntry> failed;
};

// Parallel per-case extraction; row order equals manifest order
// regardless of completion order. Failed loads are excluded and
// recorded; all cases failing is an error.
CohortExtraction extract_cohort(const CohortManifest& manifest, const AnatomyCatalog& catalog,
                                std::size_t parallelism = 1);

}  // namespace phenoct
