#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "phenoct/nifti.hpp"
#include "phenoct/phantom.hpp"
#include "phenoct/runner.hpp"

using namespace phenoct;
namespace fs = std::filesystem;

namespace {

std::string tmp_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / name;
    fs::create_directories(p);
    return p.string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

// Two organs inside a body, a cavity with fluid, plus one contrast and
// one composite; exercises every descriptor family.
AnatomyCatalog small_catalog() {
    return AnatomyCatalog(
        {{1, "body"}, {2, "liver"}, {3, "spleen"}, {4, "cavity"}, {5, "fluid"}},
        {{5, 4}}, 1, {{3, Axis::Z}}, {130.0, 200.0},
        {{2, 3, "mean"}},
        {{"liver.morph.volume_mm3", "body.morph.volume_mm3"}});
}

struct TestCase {
    VoxelVolume volume;
    LabelMap labels;
};

TestCase make_case() {
    const Dims d{6, 6, 4};
    const Spacing sp{1.0, 1.0, 2.0};
    std::vector<double> hu(d.count(), -500.0);
    std::vector<std::int32_t> cls(d.count(), 0);
    for (std::size_t i = 0; i < d.count(); ++i) cls[i] = 1;  // body everywhere
    // Liver: 2x2x2 block, 60 HU with one 250 HU voxel.
    for (std::size_t z = 0; z < 2; ++z)
        for (std::size_t y = 0; y < 2; ++y)
            for (std::size_t x = 0; x < 2; ++x) {
                const auto i = voxel_index(d, x, y, z);
                cls[i] = 2;
                hu[i] = 60.0;
            }
    hu[voxel_index(d, 0, 0, 0)] = 250.0;
    // Spleen: 1x1x4 column, 50 HU.
    for (std::size_t z = 0; z < 4; ++z) {
        const auto i = voxel_index(d, 4, 4, z);
        cls[i] = 3;
        hu[i] = 50.0;
    }
    // Cavity of 6 voxels, 2 of them fluid.
    for (std::size_t x = 0; x < 6; ++x) {
        const auto i = voxel_index(d, x, 2, 3);
        cls[i] = x < 2 ? 5 : 4;
        hu[i] = x < 2 ? 10.0 : -80.0;
    }
    for (std::size_t i = 0; i < d.count(); ++i)
        if (cls[i] == 1) hu[i] = 30.0;
    return {VoxelVolume(d, sp, hu), LabelMap(d, sp, cls)};
}

}  // namespace

TEST_CASE("manifest CSV load/save") {
    const auto dir = tmp_dir("runner_manifest");
    const auto path = dir + "/manifest.csv";
    {
        std::ofstream out(path);
        out << "case_id,volume_path,labels_path,gallstone,steatosis\n";
        out << "c1,/v1.nii,/s1.nii,1,NA\n";
        out << "c2,/v2.nii,/s2.nii,0,0\n";
    }
    const auto m = CohortManifest::load_csv(path);
    CHECK(m.findings == std::vector<std::string>{"gallstone", "steatosis"});
    REQUIRE(m.cases.size() == 2);
    CHECK(m.cases[0].labels.at("gallstone") == 1);
    CHECK(!m.cases[0].labels.at("steatosis").has_value());
    CHECK(m.cases[1].labels.at("steatosis") == 0);

    SUBCASE("round-trips through save_csv") {
        const auto path2 = dir + "/manifest2.csv";
        m.save_csv(path2);
        CHECK(slurp(path) == slurp(path2));
    }
    SUBCASE("rejects duplicates, bad labels and bad headers") {
        std::ofstream(path) << "case_id,volume_path,labels_path,f\nc1,a,b,1\nc1,a,b,0\n";
        CHECK_THROWS_WITH_AS(CohortManifest::load_csv(path), doctest::Contains("duplicate"),
                             DataError);
        std::ofstream(path) << "case_id,volume_path,labels_path,f\nc1,a,b,yes\n";
        CHECK_THROWS_AS(CohortManifest::load_csv(path), ParseError);
        std::ofstream(path) << "id,volume,labels\n";
        CHECK_THROWS_AS(CohortManifest::load_csv(path), ParseError);
        std::ofstream(path) << "";
        CHECK_THROWS_AS(CohortManifest::load_csv(path), ParseError);
    }
}

TEST_CASE("build_descriptor_catalog spans the full organ x descriptor grid") {
    const auto cat = small_catalog();
    const auto desc = build_descriptor_catalog(cat);

    // 5 classes x (6 morph + 15 atten + 2*2 burden) = 125, plus 4 body
    // ratios, 1 tubular diameter, 1 contrast, 1 occupancy, 1 composite.
    CHECK(desc.size() == 133);
    for (const char* id :
         {"liver.morph.volume_mm3", "liver.morph.sphericity", "liver.atten.entropy",
          "liver.burden.vol_130", "liver.burden.frac_200", "liver.morph.body_ratio",
          "spleen.morph.slice_diam_p90", "liver_spleen.atten.delta_mean",
          "fluid.burden.occupancy",
          "liver_body.comp.morph_volume_mm3_per_morph_volume_mm3"})
        CHECK(desc.contains(id));
    CHECK(!desc.contains("body.morph.body_ratio"));  // body has no ratio to itself
    CHECK(!desc.contains("liver.morph.slice_diam_p90"));
}

TEST_CASE("extract_case computes every declared descriptor in one grid scan") {
    const auto cat = small_catalog();
    const auto tc = make_case();
    const auto aligned = validate_pair(tc.volume, tc.labels, cat);
    const auto ex = extract_case(aligned, cat);

    CHECK(ex.log.grid_scans <= 2);
    CHECK(ex.log.warnings.empty());
    CHECK(ex.log.organ_voxel_counts.at("liver") == 8);
    CHECK(ex.log.organ_voxel_counts.at("spleen") == 4);

    const auto desc = build_descriptor_catalog(cat);
    CHECK(ex.vector.size() == desc.size());
    for (const auto& id : desc.ids()) CHECK(ex.vector.count(id) == 1);

    auto v = [&](const std::string& id) { return *ex.vector.at(id); };
    CHECK(v("liver.morph.volume_mm3") == doctest::Approx(16.0));
    CHECK(v("liver.atten.max") == doctest::Approx(250.0));
    CHECK(v("liver.atten.median") == doctest::Approx(60.0));
    // One of 8 liver voxels clears 200 HU.
    CHECK(v("liver.burden.frac_200") == doctest::Approx(0.125));
    CHECK(v("liver.burden.vol_130") == doctest::Approx(2.0));
    CHECK(v("spleen.burden.frac_130") == doctest::Approx(0.0));
    CHECK(v("liver_spleen.atten.delta_mean") ==
          doctest::Approx(v("liver.atten.mean") - 50.0).epsilon(1e-12));
    CHECK(v("fluid.burden.occupancy") == doctest::Approx(2.0 / 6.0));
    CHECK(v("liver_body.comp.morph_volume_mm3_per_morph_volume_mm3") ==
          doctest::Approx(v("liver.morph.volume_mm3") / v("body.morph.volume_mm3"))
              .epsilon(1e-12));
    // The spleen column: 4 slices of one voxel each.
    CHECK(v("spleen.morph.slice_diam_p90") ==
          doctest::Approx(2.0 / std::sqrt(std::numbers::pi)).epsilon(1e-9));

    SUBCASE("an absent organ yields missing values, not errors") {
        std::vector<std::int32_t> cls(tc.labels.classes().begin(), tc.labels.classes().end());
        for (auto& c : cls)
            if (c == 3) c = 1;  // erase the spleen
        const LabelMap lm(tc.labels.dims(), tc.labels.spacing(), cls);
        const auto ex2 = extract_case(validate_pair(tc.volume, lm, cat), cat);
        CHECK(!ex2.vector.at("spleen.morph.volume_mm3").has_value());
        CHECK(!ex2.vector.at("spleen.atten.mean").has_value());
        CHECK(!ex2.vector.at("liver_spleen.atten.delta_mean").has_value());
        CHECK(ex2.vector.at("liver.morph.volume_mm3").has_value());
    }
    SUBCASE("empty content keeps occupancy at a true zero") {
        std::vector<std::int32_t> cls(tc.labels.classes().begin(), tc.labels.classes().end());
        for (auto& c : cls)
            if (c == 5) c = 4;  // drain the fluid
        const LabelMap lm(tc.labels.dims(), tc.labels.spacing(), cls);
        const auto ex2 = extract_case(validate_pair(tc.volume, lm, cat), cat);
        CHECK(ex2.vector.at("fluid.burden.occupancy") == 0.0);
    }
}

TEST_CASE("phantom cohorts are reproducible and extractable") {
    PhantomPlan plan;
    plan.cohort_size = 10;
    plan.prevalence = 0.3;
    plan.effect = PhantomEffect::Gallstone;
    plan.seed = 7;
    const auto dir_a = tmp_dir("phantom_a");
    const auto manifest = generate_phantom_cohort(plan, dir_a);

    CHECK(manifest.cases.size() == 10);
    CHECK(manifest.findings == std::vector<std::string>{"gallstone"});
    std::size_t positives = 0;
    for (const auto& rec : manifest.cases) {
        CHECK(fs::exists(rec.volume_path));
        CHECK(fs::exists(rec.labels_path));
        positives += rec.labels.at("gallstone").value() == 1;
    }
    CHECK(positives > 0);
    CHECK(positives < 10);
    CHECK(fs::exists(dir_a + "/catalog.json"));
    CHECK(fs::exists(dir_a + "/manifest.csv"));

    SUBCASE("same plan, second directory: byte-identical cohort") {
        const auto dir_b = tmp_dir("phantom_b");
        const auto mb = generate_phantom_cohort(plan, dir_b);
        CHECK(slurp(dir_a + "/catalog.json") == slurp(dir_b + "/catalog.json"));
        for (std::size_t i = 0; i < 10; ++i) {
            CHECK(slurp(manifest.cases[i].volume_path) == slurp(mb.cases[i].volume_path));
            CHECK(slurp(manifest.cases[i].labels_path) == slurp(mb.cases[i].labels_path));
        }
    }
    SUBCASE("a different seed changes the voxel data") {
        PhantomPlan other = plan;
        other.seed = 8;
        const auto dir_c = tmp_dir("phantom_c");
        const auto mc = generate_phantom_cohort(other, dir_c);
        CHECK(slurp(manifest.cases[0].volume_path) != slurp(mc.cases[0].volume_path));
    }

    const auto cat = AnatomyCatalog::from_json_file(dir_a + "/catalog.json");
    const auto ex = extract_cohort(manifest, cat, 1);
    CHECK(ex.failed.empty());
    CHECK(ex.table.n_cases() == 10);
    CHECK(ex.table.n_descriptors() == build_descriptor_catalog(cat).size());
    // Row order is manifest order.
    for (std::size_t i = 0; i < 10; ++i)
        CHECK(ex.table.case_ids()[i] == manifest.cases[i].case_id);
    // Positives carry a dense gallstone cluster; their gallbladder max HU
    // clears the 200 HU cut used downstream.
    for (std::size_t i = 0; i < 10; ++i) {
        const auto mx = ex.table.get(i, "gallbladder.atten.max");
        REQUIRE(mx.has_value());
        if (manifest.cases[i].labels.at("gallstone") == 1) CHECK(*mx > 200.0);
    }

    SUBCASE("parallel extraction is table-identical to serial") {
        const auto par = extract_cohort(manifest, cat, 4);
        CHECK(par.table.case_ids() == ex.table.case_ids());
        for (std::size_t r = 0; r < 10; ++r)
            for (std::size_t c = 0; c < ex.table.n_descriptors(); ++c) {
                CHECK(par.table.is_missing(r, c) == ex.table.is_missing(r, c));
                if (!ex.table.is_missing(r, c))
                    CHECK(par.table.value(r, c) == ex.table.value(r, c));
            }
    }
    SUBCASE("unreadable cases land in the failure ledger, not the table") {
        CohortManifest broken = manifest;
        broken.cases[3].volume_path = dir_a + "/does_not_exist.nii";
        const auto ex2 = extract_cohort(broken, cat, 2);
        REQUIRE(ex2.failed.size() == 1);
        CHECK(ex2.failed[0].case_id == broken.cases[3].case_id);
        CHECK(!ex2.failed[0].error.empty());
        CHECK(ex2.table.n_cases() == 9);
        // Remaining rows keep manifest order.
        CHECK(ex2.table.case_ids()[3] == manifest.cases[4].case_id);
    }
    SUBCASE("an all-failing manifest is an error") {
        CohortManifest broken = manifest;
        for (auto& rec : broken.cases) rec.volume_path = dir_a + "/nope.nii";
        CHECK_THROWS_WITH_AS(extract_cohort(broken, cat, 2),
                             doctest::Contains("all cases failed"), DataError);
    }
}

TEST_CASE("phantom effects plant the documented signals") {
    PhantomPlan plan;
    plan.cohort_size = 8;
    plan.prevalence = 0.5;
    plan.seed = 11;

    SUBCASE("steatosis lowers liver HU against spleen") {
        plan.effect = PhantomEffect::Steatosis;
        const auto dir = tmp_dir("phantom_steatosis");
        const auto m = generate_phantom_cohort(plan, dir);
        const auto cat = AnatomyCatalog::from_json_file(dir + "/catalog.json");
        const auto ex = extract_cohort(m, cat, 2);
        for (std::size_t i = 0; i < m.cases.size(); ++i) {
            const auto delta = ex.table.get(i, "liver_spleen.atten.delta_mean");
            REQUIRE(delta.has_value());
            if (m.cases[i].labels.at("steatosis") == 1) CHECK(*delta < -10.0);
            else CHECK(*delta > -10.0);
        }
    }
    SUBCASE("cyst positives grow the kidney cyst volume") {
        plan.effect = PhantomEffect::Cyst;
        const auto dir = tmp_dir("phantom_cyst");
        const auto m = generate_phantom_cohort(plan, dir);
        const auto cat = AnatomyCatalog::from_json_file(dir + "/catalog.json");
        const auto ex = extract_cohort(m, cat, 2);
        for (std::size_t i = 0; i < m.cases.size(); ++i) {
            const auto vol = ex.table.get(i, "kidney_cyst.morph.volume_mm3");
            REQUIRE(vol.has_value());
            CHECK(*vol > 0.0);
        }
    }
}

TEST_CASE("effect names parse both ways") {
    for (auto e : {PhantomEffect::Gallstone, PhantomEffect::Steatosis, PhantomEffect::Cyst})
        CHECK(parse_effect(effect_name(e)) == e);
    CHECK_THROWS_AS(parse_effect("fracture"), DataError);
}
