#include "phenoct/attenuation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "phenoct/common.hpp"

namespace phenoct {

std::optional<HUStats> firstorder_stats_values(std::span<const double> values) {
    if (values.empty()) return std::nullopt;
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());

    HUStats s{};
    s.n = v.size();
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : v) {
        const double d = x - s.mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    s.std_dev = std::sqrt(m2);
    s.skewness = s.std_dev > 0.0 ? m3 / (m2 * s.std_dev) : 0.0;
    s.excess_kurtosis = s.std_dev > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;

    s.min = v.front();
    s.max = v.back();
    s.median = percentile_sorted(v, 50.0);
    s.p5 = percentile_sorted(v, 5.0);
    s.p10 = percentile_sorted(v, 10.0);
    s.p25 = percentile_sorted(v, 25.0);
    s.p75 = percentile_sorted(v, 75.0);
    s.p90 = percentile_sorted(v, 90.0);
    s.p95 = percentile_sorted(v, 95.0);
    s.iqr = s.p75 - s.p25;

    // Shannon entropy over fixed 25-HU bins spanning [-1000, 3000].
    constexpr double lo = -1000.0, hi = 3000.0, width = 25.0;
    constexpr int n_bins = static_cast<int>((hi - lo) / width);
    std::vector<std::size_t> bins(n_bins, 0);
    for (double x : v) {
        const double c = std::clamp(x, lo, hi);
        int b = static_cast<int>((c - lo) / width);
        if (b >= n_bins) b = n_bins - 1;
        ++bins[b];
    }
    double h = 0.0;
    for (auto cnt : bins) {
        if (cnt == 0) continue;
        const double p = static_cast<double>(cnt) / n;
        h -= p * std::log2(p);
    }
    s.entropy = h;
    return s;
}

std::optional<HUStats> firstorder_stats(const VoxelVolume& volume,
                                        std::span<const std::size_t> mask) {
    if (mask.empty()) return std::nullopt;
    std::vector<double> values;
    values.reserve(mask.size());
    for (auto idx : mask) values.push_back(volume.at(idx));
    return firstorder_stats_values(values);
}

double hu_stat(const HUStats& s, const std::string& which) {
    static const std::map<std::string, double HUStats::*> table = {
        {"mean", &HUStats::mean},       {"std", &HUStats::std_dev},
        {"min", &HUStats::min},         {"max", &HUStats::max},
        {"median", &HUStats::median},   {"p5", &HUStats::p5},
        {"p10", &HUStats::p10},         {"p25", &HUStats::p25},
        {"p75", &HUStats::p75},         {"p90", &HUStats::p90},
        {"p95", &HUStats::p95},         {"iqr", &HUStats::iqr},
        {"skewness", &HUStats::skewness},
        {"kurtosis", &HUStats::excess_kurtosis},
        {"entropy", &HUStats::entropy},
    };
    auto it = table.find(which);
    if (it == table.end()) throw DataError("unknown first-order stat '" + which + "'");
    return s.*(it->second);
}

std::optional<double> cross_organ_contrast(const std::optional<HUStats>& a,
                                           const std::optional<HUStats>& b,
                                           const std::string& which_stat) {
    if (!a || !b) return std::nullopt;
    return hu_stat(*a, which_stat) - hu_stat(*b, which_stat);
}

std::optional<BurdenResult> high_hu_burden(const VoxelVolume& volume,
                                           std::span<const std::size_t> mask,
                                           double threshold_hu, const Spacing& spacing) {
    if (mask.empty()) return std::nullopt;
    std::size_t count = 0;
    for (auto idx : mask)
        if (volume.at(idx) >= threshold_hu) ++count;
    BurdenResult r;
    r.threshold_hu = threshold_hu;
    r.burden_volume_mm3 = static_cast<double>(count) * spacing.voxel_volume();
    r.burden_fraction = static_cast<double>(count) / static_cast<double>(mask.size());
    return r;
}

std::optional<OccupancyResult> occupancy(const LabelMap& labels, std::int32_t content_class,
                                         std::int32_t compartment_class,
                                         const Spacing& spacing) {
    std::size_t n_content = 0, n_compartment = 0;
    for (auto c : labels.classes()) {
        if (c == content_class) ++n_content;
        else if (c == compartment_class) ++n_compartment;
    }
    const std::size_t n_union = n_content + n_compartment;
    if (n_union == 0) return std::nullopt;
    OccupancyResult r;
    r.content_volume_mm3 = static_cast<double>(n_content) * spacing.voxel_volume();
    r.compartment_volume_mm3 = static_cast<double>(n_union) * spacing.voxel_volume();
    r.occupancy = static_cast<double>(n_content) / static_cast<double>(n_union);
    return r;
}

std::optional<double> composite_ratio(std::optional<double> a, std::optional<double> b) {
    if (!a || !b || *b == 0.0) return std::nullopt;
    return *a / *b;
}

}  // namespace phenoct
