#pragma once

#include <string>

#include "phenoct/volume.hpp"

namespace phenoct {

// NIfTI-1 single-file subset: 3-D, datatypes int8/int16/int32/uint8/float32,
// optionally gzip-compressed. Orientation is ignored; spacing comes from
// the per-axis pixel dimensions. Scale slope/intercept are applied when
// slope != 0.
VoxelVolume load_volume(const std::string& path);

// As load_volume but requires an integer datatype; class ids as stored.
LabelMap load_labelmap(const std::string& path);

// Minimal writers used by the phantom generator (int16 volume payload,
// uint8 labels, uncompressed).
void write_volume_nifti(const std::string& path, const VoxelVolume& volume);
void write_labelmap_nifti(const std::string& path, const LabelMap& labels);

}  // namespace phenoct
