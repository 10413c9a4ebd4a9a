#include "phenoct/morphometry.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "phenoct/common.hpp"

namespace phenoct {

namespace {

struct Coord {
    std::size_t x, y, z;
};

Coord unravel(const Dims& d, std::size_t idx) {
    return {idx % d.nx, (idx / d.nx) % d.ny, idx / (d.nx * d.ny)};
}

std::vector<std::uint8_t> occupancy_grid(std::span<const std::size_t> mask, const Dims& d) {
    std::vector<std::uint8_t> in(d.count(), 0);
    for (auto idx : mask) in[idx] = 1;
    return in;
}

}  // namespace

std::optional<double> mask_volume(std::span<const std::size_t> mask, const Spacing& spacing) {
    if (mask.empty()) return std::nullopt;
    return static_cast<double>(mask.size()) * spacing.voxel_volume();
}

std::vector<std::size_t> boundary_voxels(std::span<const std::size_t> mask, const Dims& d) {
    const auto in = occupancy_grid(mask, d);
    std::vector<std::size_t> out;
    for (auto idx : mask) {
        const auto c = unravel(d, idx);
        const bool exposed =
            c.x == 0 || !in[idx - 1] || c.x + 1 == d.nx || !in[idx + 1] ||
            c.y == 0 || !in[idx - d.nx] || c.y + 1 == d.ny || !in[idx + d.nx] ||
            c.z == 0 || !in[idx - d.nx * d.ny] || c.z + 1 == d.nz || !in[idx + d.nx * d.ny];
        if (exposed) out.push_back(idx);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::optional<double> max_diameter(std::span<const std::size_t> mask, const Dims& d,
                                   const Spacing& sp) {
    if (mask.empty()) return std::nullopt;
    auto boundary = boundary_voxels(mask, d);

    constexpr std::size_t kMaxBoundary = 20000;
    if (boundary.size() > kMaxBoundary) {
        const std::size_t k = (boundary.size() + kMaxBoundary - 1) / kMaxBoundary;
        std::vector<std::size_t> thinned;
        for (std::size_t i = 0; i < boundary.size(); i += k) thinned.push_back(boundary[i]);
        boundary = std::move(thinned);
    }

    std::vector<std::array<double, 3>> pts;
    pts.reserve(boundary.size());
    for (auto idx : boundary) {
        const auto c = unravel(d, idx);
        pts.push_back({static_cast<double>(c.x) * sp.sx, static_cast<double>(c.y) * sp.sy,
                       static_cast<double>(c.z) * sp.sz});
    }
    double best = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const double dx = pts[i][0] - pts[j][0];
            const double dy = pts[i][1] - pts[j][1];
            const double dz = pts[i][2] - pts[j][2];
            best = std::max(best, dx * dx + dy * dy + dz * dz);
        }
    }
    return std::sqrt(best);
}

std::optional<double> surface_area(std::span<const std::size_t> mask, const Dims& d,
                                   const Spacing& sp) {
    if (mask.empty()) return std::nullopt;
    const auto in = occupancy_grid(mask, d);
    const double ax = sp.sy * sp.sz;  // face normal along x
    const double ay = sp.sx * sp.sz;
    const double az = sp.sx * sp.sy;
    double area = 0.0;
    for (auto idx : mask) {
        const auto c = unravel(d, idx);
        if (c.x == 0 || !in[idx - 1]) area += ax;
        if (c.x + 1 == d.nx || !in[idx + 1]) area += ax;
        if (c.y == 0 || !in[idx - d.nx]) area += ay;
        if (c.y + 1 == d.ny || !in[idx + d.nx]) area += ay;
        if (c.z == 0 || !in[idx - d.nx * d.ny]) area += az;
        if (c.z + 1 == d.nz || !in[idx + d.nx * d.ny]) area += az;
    }
    return area;
}

std::optional<double> sphericity(std::optional<double> volume_mm3,
                                 std::optional<double> surface_area_mm2) {
    if (!volume_mm3 || !surface_area_mm2) return std::nullopt;
    if (*volume_mm3 <= 0.0 || *surface_area_mm2 <= 0.0) return std::nullopt;
    return std::cbrt(std::numbers::pi) * std::pow(6.0 * *volume_mm3, 2.0 / 3.0) /
           *surface_area_mm2;
}

std::optional<AxisRatios> principal_axes(std::span<const std::size_t> mask, const Dims& d,
                                         const Spacing& sp) {
    if (mask.empty()) return std::nullopt;
    const double n = static_cast<double>(mask.size());
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    std::vector<Eigen::Vector3d> pts;
    pts.reserve(mask.size());
    for (auto idx : mask) {
        const auto c = unravel(d, idx);
        Eigen::Vector3d p(static_cast<double>(c.x) * sp.sx, static_cast<double>(c.y) * sp.sy,
                          static_cast<double>(c.z) * sp.sz);
        mean += p;
        pts.push_back(p);
    }
    mean /= n;
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : pts) {
        const Eigen::Vector3d q = p - mean;
        cov += q * q.transpose();
    }
    cov /= n;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    Eigen::Vector3d ev = es.eigenvalues();  // ascending
    const double l1 = std::max(ev[2], 0.0);
    const double l2 = std::max(ev[1], 0.0);
    const double l3 = std::max(ev[0], 0.0);
    if (l1 <= 0.0) return AxisRatios{0.0, 0.0};
    return AxisRatios{std::sqrt(l2 / l1), std::sqrt(l3 / l1)};
}

std::optional<double> body_ratio(std::optional<double> organ_volume_mm3,
                                 std::optional<double> body_volume_mm3) {
    if (!organ_volume_mm3 || !body_volume_mm3 || *body_volume_mm3 <= 0.0) return std::nullopt;
    return *organ_volume_mm3 / *body_volume_mm3;
}

std::optional<double> slice_diameter_percentile(std::span<const std::size_t> mask,
                                                const Dims& d, const Spacing& sp, Axis axis,
                                                double p) {
    if (mask.empty()) return std::nullopt;
    std::size_t n_slices;
    double inplane;
    switch (axis) {
        case Axis::X: n_slices = d.nx; inplane = sp.sy * sp.sz; break;
        case Axis::Y: n_slices = d.ny; inplane = sp.sx * sp.sz; break;
        default:      n_slices = d.nz; inplane = sp.sx * sp.sy; break;
    }
    std::vector<std::size_t> counts(n_slices, 0);
    for (auto idx : mask) {
        const auto c = unravel(d, idx);
        const std::size_t s = axis == Axis::X ? c.x : axis == Axis::Y ? c.y : c.z;
        ++counts[s];
    }
    std::vector<double> diameters;
    for (auto cnt : counts) {
        if (cnt == 0) continue;
        const double area = static_cast<double>(cnt) * inplane;
        diameters.push_back(2.0 * std::sqrt(area / std::numbers::pi));
    }
    if (diameters.empty()) return std::nullopt;
    return percentile(std::move(diameters), p);
}

MorphometryResult compute_morphometry(std::span<const std::size_t> mask, const Dims& d,
                                      const Spacing& sp) {
    MorphometryResult r;
    r.volume_mm3 = mask_volume(mask, sp);
    r.max_diameter_mm = max_diameter(mask, d, sp);
    r.surface_area_mm2 = surface_area(mask, d, sp);
    r.sphericity = sphericity(r.volume_mm3, r.surface_area_mm2);
    if (auto ratios = principal_axes(mask, d, sp)) {
        r.elongation = ratios->elongation;
        r.flatness = ratios->flatness;
    }
    return r;
}

}  // namespace phenoct
