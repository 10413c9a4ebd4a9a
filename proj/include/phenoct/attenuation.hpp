#pragma once

#include <optional>
#include <span>
#include <string>

#include "phenoct/volume.hpp"

namespace phenoct {

// First-order HU statistics over a mask. std is population; skewness and
// excess kurtosis are defined as 0 when std = 0. Entropy uses fixed 25-HU
// bins over [-1000, 3000] (values clamped), log base 2, empty bins skipped.
struct HUStats {
    std::size_t n;
    double mean, std_dev, min, max, median;
    double p5, p10, p25, p75, p90, p95, iqr;
    double skewness, excess_kurtosis, entropy;
};

std::optional<HUStats> firstorder_stats(const VoxelVolume& volume,
                                        std::span<const std::size_t> mask);

// Same statistics computed from an explicit value list (mask lookup done
// by the caller).
std::optional<HUStats> firstorder_stats_values(std::span<const double> values);

double hu_stat(const HUStats& s, const std::string& which);

std::optional<double> cross_organ_contrast(const std::optional<HUStats>& a,
                                           const std::optional<HUStats>& b,
                                           const std::string& which_stat = "mean");

struct BurdenResult {
    double threshold_hu;
    double burden_volume_mm3;
    double burden_fraction;
};

std::optional<BurdenResult> high_hu_burden(const VoxelVolume& volume,
                                           std::span<const std::size_t> mask,
                                           double threshold_hu, const Spacing& spacing);

// Content volume over the union of compartment and content voxels
// (content sits inside the cavity it fills). Empty content is a true
// zero; an empty union is missing.
struct OccupancyResult {
    double content_volume_mm3;
    double compartment_volume_mm3;
    double occupancy;
};

std::optional<OccupancyResult> occupancy(const LabelMap& labels, std::int32_t content_class,
                                         std::int32_t compartment_class,
                                         const Spacing& spacing);

std::optional<double> composite_ratio(std::optional<double> a, std::optional<double> b);

}  // namespace phenoct
