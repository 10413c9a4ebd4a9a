#pragma once

#include <optional>
#include <span>

#include "phenoct/catalog.hpp"
#include "phenoct/volume.hpp"

namespace phenoct {

// Size-and-shape descriptors for one organ mask, in physical units.
// Empty masks yield missing (nullopt) values, never errors.
struct MorphometryResult {
    std::optional<double> volume_mm3;
    std::optional<double> max_diameter_mm;
    std::optional<double> surface_area_mm2;
    std::optional<double> sphericity;
    std::optional<double> elongation;
    std::optional<double> flatness;
};

std::optional<double> mask_volume(std::span<const std::size_t> mask, const Spacing& spacing);

// Maximum Euclidean distance between physical centers of any two boundary
// voxels (6-neighborhood boundary; grid border counts as exposed). Above
// 20,000 boundary voxels the set is deterministically thinned to every
// k-th voxel in lexicographic index order (documented approximation).
std::optional<double> max_diameter(std::span<const std::size_t> mask, const Dims& dims,
                                   const Spacing& spacing);

// Exposed-face area sum; exact for axis-aligned shapes, overestimates
// smooth boundaries.
std::optional<double> surface_area(std::span<const std::size_t> mask, const Dims& dims,
                                   const Spacing& spacing);

std::optional<double> sphericity(std::optional<double> volume_mm3,
                                 std::optional<double> surface_area_mm2);

// IBSI-style square-root eigenvalue ratios of the physical-coordinate
// covariance. Degenerate lambda1 = 0 maps both to 0.
struct AxisRatios {
    double elongation;
    double flatness;
};
std::optional<AxisRatios> principal_axes(std::span<const std::size_t> mask, const Dims& dims,
                                         const Spacing& spacing);

std::optional<double> body_ratio(std::optional<double> organ_volume_mm3,
                                 std::optional<double> body_volume_mm3);

// Slicewise equivalent diameter percentile for tubular classes: per slice
// perpendicular to the declared axis, d = 2*sqrt(A/pi) with A the in-slice
// voxel count times the in-plane spacing product.
std::optional<double> slice_diameter_percentile(std::span<const std::size_t> mask,
                                                const Dims& dims, const Spacing& spacing,
                                                Axis axis, double p);

MorphometryResult compute_morphometry(std::span<const std::size_t> mask, const Dims& dims,
                                      const Spacing& spacing);

// Boundary voxel indices (sorted); exposed = fewer than 6 in-mask face
// neighbors. Shared with tests' oracles.
std::vector<std::size_t> boundary_voxels(std::span<const std::size_t> mask, const Dims& dims);

}  // namespace phenoct
