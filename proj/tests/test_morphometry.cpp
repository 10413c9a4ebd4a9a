#include <doctest.h>

#include <cmath>
#include <numbers>

#include "phenoct/morphometry.hpp"

using namespace phenoct;

namespace {

// Brute-force O(n^2) diameter over boundary voxel centers; independent
// of the library's thinning path.
double diameter_oracle(const std::vector<std::size_t>& mask, const Dims& d, const Spacing& sp) {
    const auto boundary = boundary_voxels(mask, d);
    double best = 0.0;
    for (std::size_t i = 0; i < boundary.size(); ++i) {
        for (std::size_t j = i + 1; j < boundary.size(); ++j) {
            auto coord = [&](std::size_t idx) {
                return std::array<double, 3>{
                    static_cast<double>(idx % d.nx) * sp.sx,
                    static_cast<double>((idx / d.nx) % d.ny) * sp.sy,
                    static_cast<double>(idx / (d.nx * d.ny)) * sp.sz};
            };
            const auto a = coord(boundary[i]);
            const auto b = coord(boundary[j]);
            const double dist = std::sqrt((a[0] - b[0]) * (a[0] - b[0]) +
                                          (a[1] - b[1]) * (a[1] - b[1]) +
                                          (a[2] - b[2]) * (a[2] - b[2]));
            best = std::max(best, dist);
        }
    }
    return best;
}

// Closed-form eigenvalues of a symmetric 3x3 matrix (trigonometric
// solution of the characteristic cubic) — independent of Eigen.
std::array<double, 3> sym3_eigenvalues(const std::array<std::array<double, 3>, 3>& a) {
    const double p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    const double q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    if (p1 == 0.0) {
        std::array<double, 3> ev{a[0][0], a[1][1], a[2][2]};
        std::sort(ev.begin(), ev.end(), std::greater<>());
        return ev;
    }
    const double p2 = (a[0][0] - q) * (a[0][0] - q) + (a[1][1] - q) * (a[1][1] - q) +
                      (a[2][2] - q) * (a[2][2] - q) + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    std::array<std::array<double, 3>, 3> b;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b[i][j] = (a[i][j] - (i == j ? q : 0.0)) / p;
    const double detb =
        b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) -
        b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
        b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    const double r = std::clamp(detb / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double e1 = q + 2.0 * p * std::cos(phi);
    const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
    const double e2 = 3.0 * q - e1 - e3;
    return {e1, e2, e3};
}

std::array<std::array<double, 3>, 3> covariance_oracle(const std::vector<std::size_t>& mask,
                                                       const Dims& d, const Spacing& sp) {
    std::vector<std::array<double, 3>> pts;
    for (auto idx : mask)
        pts.push_back({static_cast<double>(idx % d.nx) * sp.sx,
                       static_cast<double>((idx / d.nx) % d.ny) * sp.sy,
                       static_cast<double>(idx / (d.nx * d.ny)) * sp.sz});
    std::array<double, 3> mean{0, 0, 0};
    for (const auto& p : pts)
        for (int k = 0; k < 3; ++k) mean[k] += p[k] / static_cast<double>(pts.size());
    std::array<std::array<double, 3>, 3> cov{};
    for (const auto& p : pts)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                cov[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]) /
                             static_cast<double>(pts.size());
    return cov;
}

std::vector<std::size_t> box_mask(const Dims& d, std::size_t x0, std::size_t x1, std::size_t y0,
                                  std::size_t y1, std::size_t z0, std::size_t z1) {
    std::vector<std::size_t> mask;
    for (std::size_t z = z0; z < z1; ++z)
        for (std::size_t y = y0; y < y1; ++y)
            for (std::size_t x = x0; x < x1; ++x) mask.push_back(voxel_index(d, x, y, z));
    return mask;
}

std::vector<std::size_t> ball_mask(const Dims& d, double cx, double cy, double cz, double r) {
    std::vector<std::size_t> mask;
    for (std::size_t z = 0; z < d.nz; ++z)
        for (std::size_t y = 0; y < d.ny; ++y)
            for (std::size_t x = 0; x < d.nx; ++x) {
                const double dx = static_cast<double>(x) - cx;
                const double dy = static_cast<double>(y) - cy;
                const double dz = static_cast<double>(z) - cz;
                if (dx * dx + dy * dy + dz * dz <= r * r)
                    mask.push_back(voxel_index(d, x, y, z));
            }
    return mask;
}

}  // namespace

TEST_CASE("mask_volume") {
    const Dims d{4, 4, 2};
    const Spacing sp{1.5, 1.5, 3.0};
    const auto m8 = box_mask(d, 0, 2, 0, 2, 0, 2);
    CHECK(*mask_volume(m8, sp) == doctest::Approx(54.0));
    CHECK(*mask_volume(box_mask(d, 0, 1, 0, 1, 0, 1), Spacing{1, 1, 1}) == doctest::Approx(1.0));
    CHECK(!mask_volume({}, sp).has_value());
}

TEST_CASE("mask_volume on a digital ball tracks the analytic value") {
    const Dims d{24, 24, 24};
    const auto mask = ball_mask(d, 11.5, 11.5, 11.5, 10.0);
    const double v = *mask_volume(mask, Spacing{1, 1, 1});
    const double analytic = 4.0 / 3.0 * std::numbers::pi * 1000.0;
    CHECK(std::abs(v - analytic) / analytic < 0.03);
}

TEST_CASE("max_diameter") {
    const Dims d{12, 12, 12};
    SUBCASE("2x2x2 cube at unit spacing") {
        const auto mask = box_mask(d, 0, 2, 0, 2, 0, 2);
        CHECK(*max_diameter(mask, d, Spacing{1, 1, 1}) ==
              doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
    }
    SUBCASE("single voxel") {
        CHECK(*max_diameter(box_mask(d, 3, 4, 3, 4, 3, 4), d, Spacing{1, 1, 1}) ==
              doctest::Approx(0.0));
    }
    SUBCASE("1x1x10 line at anisotropic spacing") {
        const auto mask = box_mask(d, 0, 1, 0, 1, 0, 10);
        CHECK(*max_diameter(mask, d, Spacing{1, 1, 2}) == doctest::Approx(18.0));
    }
    SUBCASE("matches the exhaustive pairwise oracle on assorted masks") {
        const Spacing sp{1.5, 1.0, 2.0};
        for (const auto& mask :
             {box_mask(d, 1, 5, 2, 7, 0, 3), ball_mask(d, 6, 6, 6, 4.0),
              box_mask(d, 0, 12, 5, 6, 5, 6)}) {
            CHECK(boundary_voxels(mask, d).size() <= 2000);
            CHECK(*max_diameter(mask, d, sp) == doctest::Approx(diameter_oracle(mask, d, sp))
                                                    .epsilon(1e-12));
        }
    }
}

TEST_CASE("surface_area") {
    const Dims d{8, 8, 8};
    SUBCASE("2x2x2 cube") {
        CHECK(*surface_area(box_mask(d, 0, 2, 0, 2, 0, 2), d, Spacing{1, 1, 1}) ==
              doctest::Approx(24.0));
    }
    SUBCASE("single voxel at anisotropic spacing") {
        CHECK(*surface_area(box_mask(d, 1, 2, 1, 2, 1, 2), d, Spacing{1.5, 1.5, 3.0}) ==
              doctest::Approx(22.5));
    }
    SUBCASE("disconnected parts are additive") {
        auto a = box_mask(d, 0, 1, 0, 1, 0, 1);
        auto b = box_mask(d, 4, 5, 4, 5, 4, 5);
        auto both = a;
        both.insert(both.end(), b.begin(), b.end());
        const Spacing sp{1, 2, 3};
        CHECK(*surface_area(both, d, sp) ==
              doctest::Approx(*surface_area(a, d, sp) + *surface_area(b, d, sp)));
    }
}

TEST_CASE("sphericity") {
    CHECK(*sphericity(8.0, 24.0) == doctest::Approx(0.8059959770082347).epsilon(1e-7));
    const double v = 4.0 * std::numbers::pi / 3.0;
    const double a = 4.0 * std::numbers::pi;
    CHECK(*sphericity(v, a) == doctest::Approx(1.0));
    // Monotone decreasing in surface area.
    CHECK(*sphericity(1.0, 100.0) < *sphericity(1.0, 10.0));
    CHECK(*sphericity(1.0, 1e9) > 0.0);
    CHECK(!sphericity(0.0, 24.0).has_value());
}

TEST_CASE("principal_axes") {
    const Dims d{16, 16, 16};
    SUBCASE("collinear mask degenerates to zero") {
        const auto line = box_mask(d, 0, 1, 0, 1, 0, 10);
        const auto r = *principal_axes(line, d, Spacing{1, 1, 1});
        CHECK(r.elongation == doctest::Approx(0.0));
        CHECK(r.flatness == doctest::Approx(0.0));
    }
    SUBCASE("single voxel maps to zero") {
        const auto r = *principal_axes(box_mask(d, 2, 3, 2, 3, 2, 3), d, Spacing{1, 1, 1});
        CHECK(r.elongation == 0.0);
        CHECK(r.flatness == 0.0);
    }
    SUBCASE("digital ball is nearly isotropic") {
        const auto mask = ball_mask(d, 7.5, 7.5, 7.5, 6.0);
        const auto r = *principal_axes(mask, d, Spacing{1, 1, 1});
        CHECK(std::abs(r.elongation - 1.0) < 0.02);
    }
    SUBCASE("2x2x8 box matches the closed-form eigenvalue oracle") {
        const auto mask = box_mask(d, 0, 2, 0, 2, 0, 8);
        const auto r = *principal_axes(mask, d, Spacing{1, 1, 1});
        const auto ev = sym3_eigenvalues(covariance_oracle(mask, d, Spacing{1, 1, 1}));
        CHECK(r.elongation == doctest::Approx(std::sqrt(ev[1] / ev[0])).epsilon(1e-9));
        CHECK(r.flatness == doctest::Approx(std::sqrt(ev[2] / ev[0])).epsilon(1e-9));
        CHECK(r.elongation >= r.flatness);
    }
}

TEST_CASE("body_ratio") {
    CHECK(*body_ratio(1500e3, 30000e3) == doctest::Approx(0.05));
    CHECK(*body_ratio(10.0, 10.0) == doctest::Approx(1.0));
    CHECK(!body_ratio(std::nullopt, 30000e3).has_value());
    CHECK(!body_ratio(10.0, std::nullopt).has_value());
}

TEST_CASE("slice_diameter_percentile") {
    const Dims d{16, 16, 16};
    SUBCASE("single one-voxel slice") {
        const auto mask = box_mask(d, 3, 4, 3, 4, 5, 6);
        const double expected = 2.0 / std::sqrt(std::numbers::pi);
        for (double p : {0.0, 50.0, 90.0, 100.0})
            CHECK(*slice_diameter_percentile(mask, d, Spacing{1, 1, 1}, Axis::Z, p) ==
                  doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("voxelized cylinder radius 10mm along z") {
        const Dims big{32, 32, 8};
        std::vector<std::size_t> mask;
        for (std::size_t z = 0; z < 8; ++z)
            for (std::size_t y = 0; y < 32; ++y)
                for (std::size_t x = 0; x < 32; ++x) {
                    const double dx = static_cast<double>(x) - 15.5;
                    const double dy = static_cast<double>(y) - 15.5;
                    if (dx * dx + dy * dy <= 100.0) mask.push_back(voxel_index(big, x, y, z));
                }
        const double p90 = *slice_diameter_percentile(mask, big, Spacing{1, 1, 1}, Axis::Z, 90.0);
        CHECK(std::abs(p90 - 20.0) / 20.0 < 0.05);
    }
    SUBCASE("two-slice interpolation") {
        // Engineered so slice diameters are exactly 2/sqrt(pi) and
        // 4/sqrt(pi); p50 must land halfway per the interpolation rule.
        std::vector<std::size_t> mask = box_mask(d, 0, 1, 0, 1, 0, 1);
        const auto four = box_mask(d, 0, 2, 0, 2, 1, 2);
        mask.insert(mask.end(), four.begin(), four.end());
        const double d1 = 2.0 / std::sqrt(std::numbers::pi);
        const double d2 = 4.0 / std::sqrt(std::numbers::pi);
        CHECK(*slice_diameter_percentile(mask, d, Spacing{1, 1, 1}, Axis::Z, 50.0) ==
              doctest::Approx((d1 + d2) / 2.0).epsilon(1e-12));
    }
}

TEST_CASE("translation invariance") {
    const Dims d{20, 20, 20};
    const Spacing sp{1.5, 1.0, 2.0};
    const auto base = ball_mask(d, 5, 5, 5, 3.5);
    std::vector<std::size_t> shifted;
    for (auto idx : base) shifted.push_back(idx + voxel_index(d, 6, 7, 8));
    const auto a = compute_morphometry(base, d, sp);
    const auto b = compute_morphometry(shifted, d, sp);
    CHECK(*a.volume_mm3 == doctest::Approx(*b.volume_mm3).epsilon(1e-12));
    CHECK(*a.max_diameter_mm == doctest::Approx(*b.max_diameter_mm).epsilon(1e-12));
    CHECK(*a.surface_area_mm2 == doctest::Approx(*b.surface_area_mm2).epsilon(1e-12));
    CHECK(*a.elongation == doctest::Approx(*b.elongation).epsilon(1e-9));
    CHECK(*a.flatness == doctest::Approx(*b.flatness).epsilon(1e-9));
}

TEST_CASE("scaling covariance under doubled spacing") {
    const Dims d{20, 20, 20};
    const auto mask = ball_mask(d, 8, 8, 8, 5.0);
    const Spacing sp{1.0, 1.5, 2.0};
    const Spacing sp2{2.0, 3.0, 4.0};
    const auto a = compute_morphometry(mask, d, sp);
    const auto b = compute_morphometry(mask, d, sp2);
    CHECK(*b.volume_mm3 == doctest::Approx(8.0 * *a.volume_mm3).epsilon(1e-12));
    CHECK(*b.surface_area_mm2 == doctest::Approx(4.0 * *a.surface_area_mm2).epsilon(1e-12));
    CHECK(*b.max_diameter_mm == doctest::Approx(2.0 * *a.max_diameter_mm).epsilon(1e-12));
    CHECK(*b.sphericity == doctest::Approx(*a.sphericity).epsilon(1e-9));
    CHECK(*b.elongation == doctest::Approx(*a.elongation).epsilon(1e-9));
    CHECK(*b.flatness == doctest::Approx(*a.flatness).epsilon(1e-9));
}
