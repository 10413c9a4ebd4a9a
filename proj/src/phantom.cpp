#include "phenoct/phantom.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "phenoct/nifti.hpp"
#include "phenoct/rng.hpp"

namespace phenoct {

namespace {

constexpr std::size_t kNx = 48, kNy = 48, kNz = 32;
const Spacing kSpacing{1.5, 1.5, 3.0};

enum Class : std::int32_t {
    kBody = 1,
    kLiver = 2,
    kSpleen = 3,
    kGallbladder = 4,
    kKidney = 5,
    kKidneyCyst = 6,
    kAorta = 7,
    kCavity = 8,
    kFreeFluid = 9,
};

struct Ellipsoid {
    double cx, cy, cz, rx, ry, rz;
    bool contains(double x, double y, double z) const {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry, dz = (z - cz) / rz;
        return dx * dx + dy * dy + dz * dz <= 1.0;
    }
};

struct CaseArt {
    std::vector<std::int32_t> labels;
    std::vector<double> hu;
};

// HU means per class; noise is added on top.
double base_hu(std::int32_t cls) {
    switch (cls) {
        case kBody: return 40.0;
        case kLiver: return 55.0;
        case kSpleen: return 50.0;
        case kGallbladder: return 15.0;
        case kKidney: return 35.0;
        case kKidneyCyst: return 5.0;
        case kAorta: return 45.0;
        case kCavity: return -30.0;
        case kFreeFluid: return 10.0;
        default: return -1000.0;  // air
    }
}

CaseArt paint_case(const PhantomPlan& plan, bool positive, Substream& rng) {
    const Dims dims{kNx, kNy, kNz};
    CaseArt art;
    art.labels.assign(dims.count(), 0);
    art.hu.assign(dims.count(), 0.0);

    const double jx = rng.next_normal(0.0, 0.5);
    const double jy = rng.next_normal(0.0, 0.5);

    const Ellipsoid body{24 + jx, 24 + jy, 16, 20, 18, 14};
    const Ellipsoid cavity{24 + jx, 24 + jy, 16, 15, 13, 11};
    const Ellipsoid liver{14 + jx, 16 + jy, 16, 8, 7, 8};
    const Ellipsoid spleen{34 + jx, 14 + jy, 16, 4.5, 4, 5};
    const Ellipsoid gallbladder{16 + jx, 26 + jy, 14, 3, 3, 4};
    // The kidney is oversized so the full planted-cyst range (up to
    // ~1200 voxels) stays inside it; an engulfed kidney would blank the
    // kidney descriptors on exactly the largest lesions.
    const Ellipsoid kidney{32 + jx, 30 + jy, 14, 7.5, 7, 8.5};

    // Cyst volume in voxels: a 1-voxel marker on negatives, a log-uniform
    // spread on positives so sub-threshold lesions overlap the negatives.
    std::size_t cyst_voxels = 0;
    if (plan.effect == PhantomEffect::Cyst) {
        if (positive) {
            const double u = rng.next_unit();
            cyst_voxels = static_cast<std::size_t>(
                std::lround(std::exp(std::log(1.0) + u * (std::log(1200.0) - std::log(1.0)))));
        } else {
            cyst_voxels = 1 + rng.next_below(8);
        }
    }
    const double cyst_r = std::cbrt(3.0 * static_cast<double>(cyst_voxels) /
                                    (4.0 * 3.14159265358979323846));
    const Ellipsoid cyst{kidney.cx, kidney.cy, kidney.cz, std::max(cyst_r, 0.01),
                         std::max(cyst_r, 0.01), std::max(cyst_r, 0.01)};

    const bool has_fluid = rng.next_unit() < 0.3;
    const Ellipsoid fluid{24 + jx, 34 + jy, 20, 5, 3, 3};

    const Ellipsoid stone{gallbladder.cx, gallbladder.cy, gallbladder.cz, 1.4, 1.4, 1.4};

    const double liver_shift =
        (plan.effect == PhantomEffect::Steatosis && positive) ? -25.0 - 10.0 * rng.next_unit()
                                                              : 0.0;

    for (std::size_t z = 0; z < kNz; ++z) {
        for (std::size_t y = 0; y < kNy; ++y) {
            for (std::size_t x = 0; x < kNx; ++x) {
                const auto fx = static_cast<double>(x);
                const auto fy = static_cast<double>(y);
                const auto fz = static_cast<double>(z);
                std::int32_t cls = 0;
                if (body.contains(fx, fy, fz)) {
                    cls = kBody;
                    if (cavity.contains(fx, fy, fz)) cls = kCavity;
                    if (liver.contains(fx, fy, fz)) cls = kLiver;
                    if (spleen.contains(fx, fy, fz)) cls = kSpleen;
                    if (gallbladder.contains(fx, fy, fz)) cls = kGallbladder;
                    if (kidney.contains(fx, fy, fz)) cls = kKidney;
                    if (cyst_voxels > 0 && cyst.contains(fx, fy, fz)) cls = kKidneyCyst;
                    const double ar = std::hypot(fx - (24 + jx), fy - (34 + jy));
                    if (ar <= 2.2 && fz >= 4 && fz < kNz - 4) cls = kAorta;
                    if (has_fluid && cls == kCavity && fluid.contains(fx, fy, fz))
                        cls = kFreeFluid;
                }
                const std::size_t idx = voxel_index(Dims{kNx, kNy, kNz}, x, y, z);
                art.labels[idx] = cls;
                double hu = base_hu(cls) + rng.next_normal(0.0, plan.noise_sigma);
                if (cls == kLiver) hu += liver_shift;
                if (plan.effect == PhantomEffect::Gallstone && positive &&
                    cls == kGallbladder && stone.contains(fx, fy, fz))
                    hu = 400.0 + 300.0 * rng.next_unit();
                art.hu[idx] = hu;
            }
        }
    }

    // A sub-voxel cyst radius can miss every voxel center once the organ
    // centers are jittered; anchor at least one marker voxel so the cyst
    // descriptors stay observed on every case.
    if (cyst_voxels > 0) {
        bool painted = false;
        for (auto c : art.labels) painted = painted || (c == kKidneyCyst);
        if (!painted) {
            const auto ax = static_cast<std::size_t>(std::lround(cyst.cx));
            const auto ay = static_cast<std::size_t>(std::lround(cyst.cy));
            const auto az = static_cast<std::size_t>(std::lround(cyst.cz));
            const auto idx = voxel_index(Dims{kNx, kNy, kNz}, ax, ay, az);
            art.labels[idx] = kKidneyCyst;
            art.hu[idx] = base_hu(kKidneyCyst);
        }
    }
    return art;
}

}  // namespace

PhantomEffect parse_effect(const std::string& name) {
    if (name == "gallstone") return PhantomEffect::Gallstone;
    if (name == "steatosis") return PhantomEffect::Steatosis;
    if (name == "cyst") return PhantomEffect::Cyst;
    throw DataError("unknown phantom effect '" + name + "' (gallstone|steatosis|cyst)");
}

std::string effect_name(PhantomEffect effect) {
    switch (effect) {
        case PhantomEffect::Gallstone: return "gallstone";
        case PhantomEffect::Steatosis: return "steatosis";
        default: return "cyst";
    }
}

std::string default_phantom_catalog_json() {
    return R"({
  "classes": [
    {"id": 1, "name": "body"},
    {"id": 2, "name": "liver"},
    {"id": 3, "name": "spleen"},
    {"id": 4, "name": "gallbladder"},
    {"id": 5, "name": "kidney"},
    {"id": 6, "name": "kidney_cyst"},
    {"id": 7, "name": "aorta"},
    {"id": 8, "name": "abdominal_cavity"},
    {"id": 9, "name": "free_fluid"}
  ],
  "containment": [
    {"content": "free_fluid", "compartment": "abdominal_cavity"},
    {"content": "kidney_cyst", "compartment": "kidney"}
  ],
  "body_class": "body",
  "tubular": [{"name": "aorta", "axis": "z"}],
  "burden_thresholds": [130, 200, 300],
  "contrasts": [{"a": "liver", "b": "spleen", "stat": "mean"}],
  "composites": [
    {"num": "kidney_cyst.morph.volume_mm3", "den": "body.morph.volume_mm3"}
  ]
}
)";
}

CohortManifest generate_phantom_cohort(const PhantomPlan& plan, const std::string& out_dir) {
    if (!(plan.prevalence > 0.0 && plan.prevalence < 1.0))
        throw DataError("prevalence must lie in (0, 1)");
    if (plan.cohort_size == 0) throw DataError("cohort_size must be positive");

    std::filesystem::create_directories(out_dir);
    {
        std::ofstream cat(out_dir + "/catalog.json");
        if (!cat) throw DataError("unwritable output dir " + out_dir);
        cat << default_phantom_catalog_json();
    }

    const auto n = plan.cohort_size;
    const auto n_pos = static_cast<std::size_t>(std::lround(plan.prevalence *
                                                            static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Substream assign_rng(plan.seed, 0xa551ULL);
    assign_rng.shuffle(order);
    std::vector<std::uint8_t> positive(n, 0);
    for (std::size_t i = 0; i < n_pos; ++i) positive[order[i]] = 1;

    const std::string finding = effect_name(plan.effect);
    CohortManifest manifest;
    manifest.findings = {finding};

    const Dims dims{kNx, kNy, kNz};
    for (std::size_t i = 0; i < n; ++i) {
        Substream rng(plan.seed, 1, i);
        const auto art = paint_case(plan, positive[i] != 0, rng);

        char id[32];
        std::snprintf(id, sizeof(id), "case_%04zu", i);
        const std::string vol_path = out_dir + "/" + id + "_vol.nii";
        const std::string seg_path = out_dir + "/" + id + "_seg.nii";
        write_volume_nifti(vol_path, VoxelVolume(dims, kSpacing, art.hu));
        write_labelmap_nifti(seg_path, LabelMap(dims, kSpacing, art.labels));

        CaseRecord rec;
        rec.case_id = id;
        rec.volume_path = vol_path;
        rec.labels_path = seg_path;
        rec.labels[finding] = positive[i] ? 1 : 0;
        manifest.cases.push_back(std::move(rec));
    }
    manifest.save_csv(out_dir + "/manifest.csv");
    return manifest;
}

}  // namespace phenoct
