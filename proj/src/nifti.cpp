#include "phenoct/nifti.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include <zlib.h>

namespace phenoct {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kMagicOffset = 344;

enum Datatype : std::int16_t {
    DT_UINT8 = 2,
    DT_INT16 = 4,
    DT_INT32 = 8,
    DT_FLOAT32 = 16,
    DT_INT8 = 256,
};

std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<unsigned char> gunzip(const std::vector<unsigned char>& in) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK) throw ParseError("zlib init failed");
    std::vector<unsigned char> out;
    out.reserve(in.size() * 4);
    unsigned char buf[1 << 16];
    zs.next_in = const_cast<unsigned char*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    int ret = Z_OK;
    while (ret != Z_STREAM_END) {
        zs.next_out = buf;
        zs.avail_out = sizeof(buf);
        ret = inflate(&zs, Z_NO_FLUSH);
        if (ret != Z_OK && ret != Z_STREAM_END) {
            inflateEnd(&zs);
            throw ParseError("truncated or corrupt gzip payload");
        }
        out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
    }
    inflateEnd(&zs);
    return out;
}

template <typename T>
T read_le(const unsigned char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

struct ParsedFile {
    Dims dims;
    Spacing spacing;
    std::int16_t datatype;
    float slope;
    float inter;
    const unsigned char* payload;
    std::size_t payload_bytes;
};

std::size_t datatype_size(std::int16_t dt) {
    switch (dt) {
        case DT_UINT8:
        case DT_INT8: return 1;
        case DT_INT16: return 2;
        case DT_INT32:
        case DT_FLOAT32: return 4;
        default:
            throw ParseError("unsupported datatype code " + std::to_string(dt));
    }
}

ParsedFile parse(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < kHeaderSize) throw ParseError("truncated header");
    const unsigned char* h = bytes.data();
    if (std::memcmp(h + kMagicOffset, "n+1\0", 4) != 0)
        throw ParseError("bad magic: not a NIfTI-1 single file");
    if (read_le<std::int32_t>(h) != 348)
        throw ParseError("bad header size field");

    const auto ndim = read_le<std::int16_t>(h + 40);
    if (ndim != 3) throw ParseError("dim count must be 3, got " + std::to_string(ndim));
    Dims dims;
    dims.nx = static_cast<std::size_t>(read_le<std::int16_t>(h + 42));
    dims.ny = static_cast<std::size_t>(read_le<std::int16_t>(h + 44));
    dims.nz = static_cast<std::size_t>(read_le<std::int16_t>(h + 46));
    if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0)
        throw ParseError("nonpositive dimension");

    const auto dt = read_le<std::int16_t>(h + 70);
    datatype_size(dt);  // rejects unsupported codes

    Spacing sp;
    sp.sx = read_le<float>(h + 80);
    sp.sy = read_le<float>(h + 84);
    sp.sz = read_le<float>(h + 88);
    if (!(sp.sx > 0 && sp.sy > 0 && sp.sz > 0))
        throw ParseError("nonpositive spacing");

    auto vox_offset = static_cast<std::size_t>(read_le<float>(h + 108));
    if (vox_offset < kHeaderSize) vox_offset = kHeaderSize + 4;  // header + extension flag
    const std::size_t need = dims.count() * datatype_size(dt);
    if (bytes.size() < vox_offset + need)
        throw ParseError("truncated payload");

    return ParsedFile{dims, sp, dt, read_le<float>(h + 112), read_le<float>(h + 116),
                      bytes.data() + vox_offset, need};
}

std::vector<unsigned char> load_bytes(const std::string& path) {
    auto bytes = read_file_bytes(path);
    if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) bytes = gunzip(bytes);
    return bytes;
}

template <typename T>
void decode_payload(const ParsedFile& f, std::vector<double>& out) {
    const std::size_t n = f.dims.count();
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = static_cast<double>(read_le<T>(f.payload + i * sizeof(T)));
}

std::vector<double> decode(const ParsedFile& f) {
    std::vector<double> out;
    switch (f.datatype) {
        case DT_UINT8: decode_payload<std::uint8_t>(f, out); break;
        case DT_INT8: decode_payload<std::int8_t>(f, out); break;
        case DT_INT16: decode_payload<std::int16_t>(f, out); break;
        case DT_INT32: decode_payload<std::int32_t>(f, out); break;
        case DT_FLOAT32: decode_payload<float>(f, out); break;
        default: throw ParseError("unsupported datatype");
    }
    if (f.slope != 0.0f) {
        for (double& v : out) v = static_cast<double>(f.slope) * v + static_cast<double>(f.inter);
    }
    return out;
}

}  // namespace

VoxelVolume load_volume(const std::string& path) {
    const auto bytes = load_bytes(path);
    const auto f = parse(bytes);
    return VoxelVolume(f.dims, f.spacing, decode(f));
}

LabelMap load_labelmap(const std::string& path) {
    const auto bytes = load_bytes(path);
    const auto f = parse(bytes);
    if (f.datatype == DT_FLOAT32)
        throw ParseError("labelmap must be integer-typed");
    const auto values = decode(f);
    std::vector<std::int32_t> classes(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        classes[i] = static_cast<std::int32_t>(values[i]);
    return LabelMap(f.dims, f.spacing, std::move(classes));
}

namespace {

void write_header(std::ofstream& out, const Dims& d, const Spacing& s, std::int16_t datatype,
                  std::int16_t bitpix) {
    std::vector<unsigned char> h(kHeaderSize + 4, 0);
    auto put = [&](std::size_t off, const void* p, std::size_t n) {
        std::memcpy(h.data() + off, p, n);
    };
    const std::int32_t hdr = 348;
    put(0, &hdr, 4);
    std::int16_t dim[8] = {3, static_cast<std::int16_t>(d.nx), static_cast<std::int16_t>(d.ny),
                           static_cast<std::int16_t>(d.nz), 1, 1, 1, 1};
    put(40, dim, sizeof(dim));
    put(70, &datatype, 2);
    put(72, &bitpix, 2);
    float pixdim[8] = {1.0f, static_cast<float>(s.sx), static_cast<float>(s.sy),
                       static_cast<float>(s.sz), 0, 0, 0, 0};
    put(76, pixdim, sizeof(pixdim));
    const float vox_offset = 352.0f;
    put(108, &vox_offset, 4);
    const float slope = 1.0f, inter = 0.0f;
    put(112, &slope, 4);
    put(116, &inter, 4);
    put(kMagicOffset, "n+1\0", 4);
    out.write(reinterpret_cast<const char*>(h.data()), static_cast<std::streamsize>(h.size()));
}

}  // namespace

void write_volume_nifti(const std::string& path, const VoxelVolume& volume) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    write_header(out, volume.dims(), volume.spacing(), DT_INT16, 16);
    for (double v : volume.values()) {
        auto s = static_cast<std::int16_t>(std::lround(std::clamp(v, -32768.0, 32767.0)));
        out.write(reinterpret_cast<const char*>(&s), 2);
    }
}

void write_labelmap_nifti(const std::string& path, const LabelMap& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    write_header(out, labels.dims(), labels.spacing(), DT_UINT8, 8);
    for (auto c : labels.classes()) {
        auto b = static_cast<unsigned char>(c);
        out.write(reinterpret_cast<const char*>(&b), 1);
    }
}

}  // namespace phenoct
