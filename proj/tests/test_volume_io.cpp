#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <numeric>

#include "nifti_fixture.hpp"
#include "phenoct/catalog.hpp"
#include "phenoct/nifti.hpp"

using namespace phenoct;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("load_volume round-trips an independently written fixture") {
    fixture::NiftiFixture f;
    f.sx = 1.5f;
    f.sy = 1.5f;
    f.sz = 3.0f;
    std::vector<std::int16_t> vals(32);
    std::iota(vals.begin(), vals.end(), 0);
    f.payload = fixture::as_bytes(vals);
    const auto path = tmp_path("vol_roundtrip.nii");
    fixture::write_fixture(path, f);

    const auto v = load_volume(path);
    CHECK(v.dims().nx == 4);
    CHECK(v.dims().ny == 4);
    CHECK(v.dims().nz == 2);
    CHECK(v.spacing().sx == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(v.spacing().sz == doctest::Approx(3.0).epsilon(1e-9));
    for (std::size_t i = 0; i < 32; ++i)
        CHECK(v.at(i) == doctest::Approx(static_cast<double>(i)).epsilon(1e-6));
}

TEST_CASE("load_volume rejects bad magic") {
    fixture::NiftiFixture f;
    f.magic = std::string("ni1\0", 4);
    f.payload = fixture::as_bytes(std::vector<std::int16_t>(32, 0));
    const auto path = tmp_path("vol_badmagic.nii");
    fixture::write_fixture(path, f);
    CHECK_THROWS_WITH_AS(load_volume(path), doctest::Contains("bad magic"), ParseError);
}

TEST_CASE("load_volume applies scale slope and intercept") {
    fixture::NiftiFixture f;
    f.scl_slope = 2.0f;
    f.scl_inter = -1000.0f;
    std::vector<std::int16_t> vals(32, 500);
    f.payload = fixture::as_bytes(vals);
    const auto path = tmp_path("vol_scaled.nii");
    fixture::write_fixture(path, f);
    const auto v = load_volume(path);
    CHECK(v.at(0) == doctest::Approx(0.0));
}

TEST_CASE("load_volume rejects malformed headers distinctly") {
    const auto path = tmp_path("vol_bad.nii");

    SUBCASE("dim count") {
        fixture::NiftiFixture f;
        f.ndim = 4;
        f.payload = fixture::as_bytes(std::vector<std::int16_t>(32, 0));
        fixture::write_fixture(path, f);
        CHECK_THROWS_WITH_AS(load_volume(path), doctest::Contains("dim count"), ParseError);
    }
    SUBCASE("unsupported datatype") {
        fixture::NiftiFixture f;
        f.datatype = 64;  // float64, outside the supported subset
        f.payload = std::vector<unsigned char>(32 * 8, 0);
        fixture::write_fixture(path, f);
        CHECK_THROWS_WITH_AS(load_volume(path), doctest::Contains("unsupported datatype"),
                             ParseError);
    }
    SUBCASE("nonpositive spacing") {
        fixture::NiftiFixture f;
        f.sy = 0.0f;
        f.payload = fixture::as_bytes(std::vector<std::int16_t>(32, 0));
        fixture::write_fixture(path, f);
        CHECK_THROWS_WITH_AS(load_volume(path), doctest::Contains("nonpositive spacing"),
                             ParseError);
    }
    SUBCASE("truncated payload") {
        fixture::NiftiFixture f;
        f.payload = fixture::as_bytes(std::vector<std::int16_t>(10, 0));  // needs 32
        fixture::write_fixture(path, f);
        CHECK_THROWS_WITH_AS(load_volume(path), doctest::Contains("truncated payload"),
                             ParseError);
    }
}

TEST_CASE("load_labelmap round-trips classes and rejects float data") {
    const auto path = tmp_path("seg.nii");

    SUBCASE("uint8 classes") {
        fixture::NiftiFixture f;
        f.datatype = 2;
        std::vector<std::uint8_t> vals(32, 0);
        vals[0] = 1;
        vals[5] = 2;
        vals[6] = 2;
        f.payload = fixture::as_bytes(vals);
        fixture::write_fixture(path, f);
        const auto lm = load_labelmap(path);
        CHECK(lm.present_classes() == std::vector<std::int32_t>{1, 2});
    }
    SUBCASE("all-zero payload has empty class set") {
        fixture::NiftiFixture f;
        f.datatype = 2;
        f.payload = std::vector<unsigned char>(32, 0);
        fixture::write_fixture(path, f);
        CHECK(load_labelmap(path).present_classes().empty());
    }
    SUBCASE("float32 rejected") {
        fixture::NiftiFixture f;
        f.datatype = 16;
        f.payload = fixture::as_bytes(std::vector<float>(32, 1.0f));
        fixture::write_fixture(path, f);
        CHECK_THROWS_WITH_AS(load_labelmap(path), doctest::Contains("integer-typed"),
                             ParseError);
    }
}

TEST_CASE("gzip-compressed fixtures load identically") {
    fixture::NiftiFixture f;
    std::vector<std::int16_t> vals(32);
    std::iota(vals.begin(), vals.end(), 100);
    f.payload = fixture::as_bytes(vals);
    const auto plain = tmp_path("vol_plain.nii");
    fixture::write_fixture(plain, f);
    const auto gz = tmp_path("vol_gz.nii.gz");
    REQUIRE(std::system(("gzip -c '" + plain + "' > '" + gz + "'").c_str()) == 0);

    const auto a = load_volume(plain);
    const auto b = load_volume(gz);
    CHECK(a.values() == b.values());
}

TEST_CASE("validate_pair") {
    const Dims dims{4, 4, 2};
    const Spacing sp{1.5, 1.5, 3.0};
    std::vector<double> hu(32, 0.0);
    std::vector<std::int32_t> cls(32, 0);
    cls[3] = 1;
    const VoxelVolume vol(dims, sp, hu);
    const AnatomyCatalog catalog({{1, "liver"}, {2, "spleen"}});

    SUBCASE("accepts aligned pair") {
        const LabelMap lm(dims, sp, cls);
        const auto aligned = validate_pair(vol, lm, catalog);
        CHECK(aligned.labels == &lm);
    }
    SUBCASE("spacing mismatch") {
        const LabelMap lm(dims, Spacing{1.5, 1.5, 3.1}, cls);
        CHECK_THROWS_WITH_AS(validate_pair(vol, lm, catalog),
                             doctest::Contains("spacing mismatch"), DataError);
    }
    SUBCASE("dim mismatch detection is symmetric") {
        std::vector<std::int32_t> small_cls(16, 0);
        const LabelMap lm(Dims{4, 4, 1}, sp, small_cls);
        CHECK_THROWS_WITH_AS(validate_pair(vol, lm, catalog),
                             doctest::Contains("dim mismatch"), DataError);
        // Swap which side carries the extra slice: same error class.
        std::vector<double> big_hu(48, 0.0);
        const VoxelVolume vol3(Dims{4, 4, 3}, sp, big_hu);
        const LabelMap lm2(dims, sp, cls);
        CHECK_THROWS_WITH_AS(validate_pair(vol3, lm2, catalog),
                             doctest::Contains("dim mismatch"), DataError);
    }
    SUBCASE("unknown class names the offender") {
        cls[7] = 99;
        const LabelMap lm(dims, sp, cls);
        CHECK_THROWS_WITH_AS(validate_pair(vol, lm, catalog), doctest::Contains("99"),
                             DataError);
    }
}

TEST_CASE("mask_voxels streams partition the nonzero voxels") {
    const Dims dims{4, 4, 2};
    std::vector<std::int32_t> cls(32, 0);
    for (std::size_t i = 0; i < 8; ++i) cls[i] = 3;
    for (std::size_t i = 10; i < 15; ++i) cls[i] = 1;
    const LabelMap lm(dims, Spacing{}, cls);

    CHECK(lm.mask_voxels(3).size() == 8);
    CHECK(lm.mask_voxels(2).empty());

    std::size_t total = 0;
    for (auto c : lm.present_classes()) total += lm.mask_voxels(c).size();
    std::size_t nonzero = 0;
    for (auto c : cls) nonzero += (c != 0);
    CHECK(total == nonzero);
}

TEST_CASE("full-grid single class counts every voxel") {
    const Dims dims{4, 4, 2};
    std::vector<std::int32_t> cls(32, 5);
    const LabelMap lm(dims, Spacing{}, cls);
    CHECK(lm.mask_voxels(5).size() == 32);
}

TEST_CASE("catalog validation") {
    CHECK_THROWS_AS(AnatomyCatalog({{1, "a"}, {1, "b"}}), DataError);
    CHECK_THROWS_AS(AnatomyCatalog({{1, "a"}, {2, "a"}}), DataError);
    CHECK_THROWS_AS(AnatomyCatalog({{1, "a"}, {2, "b"}}, {{1, 2}, {2, 1}}), DataError);
    const auto cat = AnatomyCatalog::from_json_text(R"({
      "classes": [{"id": 1, "name": "liver"}, {"id": 2, "name": "cavity"}],
      "containment": [{"content": "liver", "compartment": "cavity"}],
      "body_class": null,
      "tubular": []
    })");
    CHECK(cat.declares(2));
    CHECK(cat.id_of("liver") == 1);
}
