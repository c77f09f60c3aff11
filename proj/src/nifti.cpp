#include "tissueseg/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <memory>

#include "tissueseg/errors.hpp"

namespace tseg {
namespace {

constexpr int kHeaderSize = 348;
constexpr int kVoxOffset = 352;

enum DataType : std::int16_t {
    DT_UINT8 = 2,
    DT_INT16 = 4,
    DT_INT32 = 8,
    DT_FLOAT32 = 16,
    DT_FLOAT64 = 64,
    DT_INT8 = 256,
    DT_UINT16 = 512,
};

struct GzCloser {
    void operator()(gzFile f) const { gzclose(f); }
};
using GzHandle = std::unique_ptr<std::remove_pointer_t<gzFile>, GzCloser>;

bool is_gz(const std::filesystem::path& p) { return p.extension() == ".gz"; }

template <class T>
T load(const unsigned char* p, bool swap)
{
    T v;
    std::memcpy(&v, p, sizeof(T));
    if (swap) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        std::reverse(b, b + sizeof(T));
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

template <class T>
void store(unsigned char* p, T v)
{
    std::memcpy(p, &v, sizeof(T));
}

std::vector<unsigned char> read_all(const std::filesystem::path& path)
{
    // gzread passes plain files through unchanged.
    GzHandle f(gzopen(path.c_str(), "rb"));
    if (!f) throw IoError("cannot open '" + path.string() + "'");
    std::vector<unsigned char> buf;
    unsigned char chunk[1 << 16];
    int n;
    while ((n = gzread(f.get(), chunk, sizeof(chunk))) > 0) buf.insert(buf.end(), chunk, chunk + n);
    if (n < 0) throw IoError("read error in '" + path.string() + "'");
    return buf;
}

void write_all(const std::filesystem::path& path, const std::vector<unsigned char>& bytes)
{
    GzHandle f(gzopen(path.c_str(), is_gz(path) ? "wb6" : "wbT"));
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    std::size_t off = 0;
    while (off < bytes.size()) {
        unsigned len = unsigned(std::min<std::size_t>(bytes.size() - off, 1u << 30));
        if (gzwrite(f.get(), bytes.data() + off, len) != int(len))
            throw IoError("write error in '" + path.string() + "'");
        off += len;
    }
}

std::vector<unsigned char> make_header(const Vec3i& dims, std::int16_t datatype, std::int16_t bitpix,
                                       const NiftiGeometry& g, const std::string& description)
{
    std::vector<unsigned char> h(kVoxOffset, 0);
    store<std::int32_t>(&h[0], kHeaderSize);
    h[38] = 'r';
    const std::int16_t dim[8] = {3, std::int16_t(dims[0]), std::int16_t(dims[1]), std::int16_t(dims[2]), 1, 1, 1, 1};
    for (int i = 0; i < 8; ++i) store<std::int16_t>(&h[40 + 2 * i], dim[i]);
    store<std::int16_t>(&h[70], datatype);
    store<std::int16_t>(&h[72], bitpix);
    const float pixdim[8] = {1.f, float(g.spacing[0]), float(g.spacing[1]),
                             float(g.spacing[2]), 1.f, 1.f, 1.f, 1.f};
    for (int i = 0; i < 8; ++i) store<float>(&h[76 + 4 * i], pixdim[i]);
    store<float>(&h[108], float(kVoxOffset));
    store<float>(&h[112], 1.f);
    store<float>(&h[116], 0.f);
    h[123] = g.xyzt_units;
    std::memcpy(&h[148], description.data(), std::min<std::size_t>(description.size(), 79));
    store<std::int16_t>(&h[252], g.qform_code);
    store<std::int16_t>(&h[254], g.sform_code);
    for (int i = 0; i < 3; ++i) store<float>(&h[256 + 4 * i], g.quatern[i]);
    for (int i = 0; i < 3; ++i) store<float>(&h[268 + 4 * i], g.qoffset[i]);
    for (int i = 0; i < 12; ++i) store<float>(&h[280 + 4 * i], g.srow[i]);
    std::memcpy(&h[344], "n+1\0", 4);
    return h;
}

void check_dims(const Vec3i& dims)
{
    for (int d : dims)
        if (d < 1 || d > 32767) throw IoError("dimension out of NIfTI-1 range: " + to_string(dims));
}

template <class T>
void write_typed(const std::filesystem::path& path, const Grid3<T>& data, std::int16_t datatype,
                 const NiftiGeometry& geometry, const std::string& description)
{
    static_assert(std::endian::native == std::endian::little, "writer assumes little-endian host");
    check_dims(data.dims());
    auto bytes = make_header(data.dims(), datatype, std::int16_t(8 * sizeof(T)), geometry, description);
    const std::size_t off = bytes.size();
    bytes.resize(off + data.size() * sizeof(T));
    std::memcpy(bytes.data() + off, data.data(), data.size() * sizeof(T));
    write_all(path, bytes);
}

} // namespace

NiftiGeometry NiftiGeometry::with_spacing(const std::array<double, 3>& spacing)
{
    NiftiGeometry g;
    g.spacing = spacing;
    g.srow = {float(spacing[0]), 0.f, 0.f, 0.f, 0.f, float(spacing[1]), 0.f, 0.f,
              0.f, 0.f, float(spacing[2]), 0.f};
    return g;
}

NiftiImage read_nifti(const std::filesystem::path& path)
{
    const auto buf = read_all(path);
    if (buf.size() < kHeaderSize) throw IoError("'" + path.string() + "' is too short for a NIfTI header");
    const unsigned char* h = buf.data();

    bool swap = false;
    if (load<std::int32_t>(h, false) != kHeaderSize) {
        if (load<std::int32_t>(h, true) != kHeaderSize)
            throw IoError("'" + path.string() + "' is not a NIfTI-1 file");
        swap = true;
    }
    if (std::memcmp(h + 344, "n+1", 3) != 0)
        throw IoError("'" + path.string() + "': only single-file NIfTI-1 (n+1) is supported");

    std::int16_t dim[8];
    for (int i = 0; i < 8; ++i) dim[i] = load<std::int16_t>(h + 40 + 2 * i, swap);
    if (dim[0] < 1 || dim[0] > 7) throw IoError("'" + path.string() + "': invalid dim[0]");
    for (int i = 4; i <= dim[0]; ++i)
        if (dim[i] > 1) throw IoError("'" + path.string() + "': expected a single 3D volume");

    NiftiImage img;
    for (int a = 0; a < 3; ++a) img.dims[a] = (a < dim[0]) ? std::max<int>(dim[a + 1], 1) : 1;
    for (int a = 0; a < 3; ++a) {
        const float p = load<float>(h + 80 + 4 * a, swap);
        img.geometry.spacing[a] = (p > 0.f) ? double(p) : 1.0;
    }
    img.geometry.xyzt_units = h[123];
    img.geometry.qform_code = load<std::int16_t>(h + 252, swap);
    img.geometry.sform_code = load<std::int16_t>(h + 254, swap);
    for (int i = 0; i < 3; ++i) img.geometry.quatern[i] = load<float>(h + 256 + 4 * i, swap);
    for (int i = 0; i < 3; ++i) img.geometry.qoffset[i] = load<float>(h + 268 + 4 * i, swap);
    for (int i = 0; i < 12; ++i) img.geometry.srow[i] = load<float>(h + 280 + 4 * i, swap);
    const char* descrip = reinterpret_cast<const char*>(h + 148);
    img.description.assign(descrip, strnlen(descrip, 80));

    const auto datatype = load<std::int16_t>(h + 70, swap);
    const std::size_t offset = std::size_t(load<float>(h + 108, swap));
    float slope = load<float>(h + 112, swap);
    const float inter = load<float>(h + 116, swap);
    if (slope == 0.f) slope = 1.f;

    std::size_t elem = 0;
    switch (datatype) {
    case DT_UINT8: case DT_INT8: elem = 1; break;
    case DT_INT16: case DT_UINT16: elem = 2; break;
    case DT_INT32: case DT_FLOAT32: elem = 4; break;
    case DT_FLOAT64: elem = 8; break;
    default: throw IoError("'" + path.string() + "': unsupported datatype " + std::to_string(datatype));
    }
    const std::size_t n = voxel_count(img.dims);
    if (offset < kHeaderSize || buf.size() < offset + n * elem)
        throw IoError("'" + path.string() + "': truncated voxel data");

    img.voxels.resize(n);
    const unsigned char* p = h + offset;
    for (std::size_t i = 0; i < n; ++i, p += elem) {
        double v = 0.0;
        switch (datatype) {
        case DT_UINT8: v = *p; break;
        case DT_INT8: v = static_cast<std::int8_t>(*p); break;
        case DT_INT16: v = load<std::int16_t>(p, swap); break;
        case DT_UINT16: v = load<std::uint16_t>(p, swap); break;
        case DT_INT32: v = load<std::int32_t>(p, swap); break;
        case DT_FLOAT32: v = load<float>(p, swap); break;
        case DT_FLOAT64: v = load<double>(p, swap); break;
        }
        img.voxels[i] = (slope == 1.f && inter == 0.f) ? v : v * slope + inter;
    }
    return img;
}

void write_nifti(const std::filesystem::path& path, const Grid3<float>& data,
                 const NiftiGeometry& geometry, const std::string& description)
{
    write_typed(path, data, DT_FLOAT32, geometry, description);
}

void write_nifti(const std::filesystem::path& path, const Grid3<std::uint8_t>& data,
                 const NiftiGeometry& geometry, const std::string& description)
{
    write_typed(path, data, DT_UINT8, geometry, description);
}

} // namespace tseg
