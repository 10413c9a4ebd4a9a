#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "phenoct/common.hpp"

namespace phenoct {

struct Dims {
    std::size_t nx = 0, ny = 0, nz = 0;
    std::size_t count() const { return nx * ny * nz; }
    bool operator==(const Dims&) const = default;
};

struct Spacing {
    double sx = 1.0, sy = 1.0, sz = 1.0;
    double voxel_volume() const { return sx * sy * sz; }
};

inline bool spacing_close(const Spacing& a, const Spacing& b, double tol = 1e-4) {
    return std::abs(a.sx - b.sx) <= tol && std::abs(a.sy - b.sy) <= tol &&
           std::abs(a.sz - b.sz) <= tol;
}

// Voxel index in x-fastest (NIfTI payload) order.
inline std::size_t voxel_index(const Dims& d, std::size_t x, std::size_t y, std::size_t z) {
    return x + d.nx * (y + d.ny * z);
}

// Scalar HU grid in native image space. Immutable after construction.
class VoxelVolume {
public:
    VoxelVolume(Dims dims, Spacing spacing, std::vector<double> values)
        : dims_(dims), spacing_(spacing), values_(std::move(values)) {
        if (dims_.count() != values_.size())
            throw DataError("volume dims/value-count mismatch");
        if (!(spacing_.sx > 0 && spacing_.sy > 0 && spacing_.sz > 0) ||
            !std::isfinite(spacing_.sx) || !std::isfinite(spacing_.sy) ||
            !std::isfinite(spacing_.sz))
            throw DataError("volume spacing must be positive and finite");
        for (double v : values_)
            if (!std::isfinite(v)) throw DataError("non-finite HU value");
    }

    const Dims& dims() const { return dims_; }
    const Spacing& spacing() const { return spacing_; }
    const std::vector<double>& values() const { return values_; }
    double at(std::size_t idx) const { return values_[idx]; }

private:
    Dims dims_;
    Spacing spacing_;
    std::vector<double> values_;
};

// Integer class per voxel; 0 = background.
class LabelMap {
public:
    LabelMap(Dims dims, Spacing spacing, std::vector<std::int32_t> classes)
        : dims_(dims), spacing_(spacing), classes_(std::move(classes)) {
        if (dims_.count() != classes_.size())
            throw DataError("labelmap dims/value-count mismatch");
        for (auto c : classes_)
            if (c < 0) throw DataError("negative class id in labelmap");
    }

    const Dims& dims() const { return dims_; }
    const Spacing& spacing() const { return spacing_; }
    const std::vector<std::int32_t>& classes() const { return classes_; }

    std::vector<std::int32_t> present_classes() const {
        std::vector<std::int32_t> out;
        for (auto c : classes_) {
            if (c != 0 && std::find(out.begin(), out.end(), c) == out.end())
                out.push_back(c);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    // Voxel indices holding class_id; empty is a valid result (organ
    // absent or out of field of view).
    std::vector<std::size_t> mask_voxels(std::int32_t class_id) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < classes_.size(); ++i)
            if (classes_[i] == class_id) out.push_back(i);
        return out;
    }

private:
    Dims dims_;
    Spacing spacing_;
    std::vector<std::int32_t> classes_;
};

}  // namespace phenoct
