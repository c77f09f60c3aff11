#include "tissueseg/layers.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "tissueseg/errors.hpp"

namespace tseg::nn {
namespace {

constexpr std::size_t kIm2colBudget = std::size_t(4) << 20; // floats per chunk

std::size_t kvol(const Vec3i& k) { return voxel_count(k); }

Tensor pad_same(const Tensor& in, const Vec3i& k)
{
    Vec3i lo, d;
    for (int a = 0; a < 3; ++a) {
        lo[a] = (k[a] - 1) / 2;
        d[a] = in.dims[a] + k[a] - 1;
    }
    Tensor out(in.n, in.c, d);
    const int X = in.dims[0], Y = in.dims[1], Z = in.dims[2];
    for (int s = 0; s < in.n * in.c; ++s) {
        const float* src = in.data.data() + std::size_t(s) * in.spatial();
        float* dst = out.data.data() + std::size_t(s) * out.spatial();
        for (int z = 0; z < Z; ++z)
            for (int y = 0; y < Y; ++y)
                std::memcpy(dst + lo[0] + std::size_t(d[0]) * (std::size_t(y + lo[1]) + std::size_t(d[1]) * (z + lo[2])),
                            src + std::size_t(X) * (std::size_t(y) + std::size_t(Y) * z), std::size_t(X) * sizeof(float));
    }
    return out;
}

Tensor unpad_same(const Tensor& padded, const Vec3i& k)
{
    Vec3i lo;
    for (int a = 0; a < 3; ++a) lo[a] = (k[a] - 1) / 2;
    return crop_forward(padded, lo);
}

/// Rows [ci][kz][ky][kx], columns the output voxels of slices [z0, z1).
void im2col(const float* src, int cin, const Vec3i& in, const Vec3i& k, const Vec3i& out, int z0, int z1,
            float* col)
{
    const std::size_t cols = std::size_t(out[0]) * out[1] * (z1 - z0);
    const std::size_t in_plane = std::size_t(in[0]) * in[1];
    std::size_t row = 0;
    for (int ci = 0; ci < cin; ++ci)
        for (int dz = 0; dz < k[2]; ++dz)
            for (int dy = 0; dy < k[1]; ++dy)
                for (int dx = 0; dx < k[0]; ++dx, ++row) {
                    float* dst = col + row * cols;
                    const float* base = src + std::size_t(ci) * in_plane * in[2] + dx;
                    for (int z = z0; z < z1; ++z)
                        for (int y = 0; y < out[1]; ++y) {
                            std::memcpy(dst, base + in_plane * (z + dz) + std::size_t(in[0]) * (y + dy),
                                        std::size_t(out[0]) * sizeof(float));
                            dst += out[0];
                        }
                }
}

void col2im_add(const float* col, int cin, const Vec3i& in, const Vec3i& k, const Vec3i& out, int z0, int z1,
                float* dst)
{
    const std::size_t cols = std::size_t(out[0]) * out[1] * (z1 - z0);
    const std::size_t in_plane = std::size_t(in[0]) * in[1];
    std::size_t row = 0;
    for (int ci = 0; ci < cin; ++ci)
        for (int dz = 0; dz < k[2]; ++dz)
            for (int dy = 0; dy < k[1]; ++dy)
                for (int dx = 0; dx < k[0]; ++dx, ++row) {
                    const float* src = col + row * cols;
                    float* base = dst + std::size_t(ci) * in_plane * in[2] + dx;
                    for (int z = z0; z < z1; ++z)
                        for (int y = 0; y < out[1]; ++y) {
                            float* d = base + in_plane * (z + dz) + std::size_t(in[0]) * (y + dy);
                            for (int x = 0; x < out[0]; ++x) d[x] += src[x];
                            src += out[0];
                        }
                }
}

int slices_per_chunk(std::size_t rows, const Vec3i& out)
{
    const std::size_t plane = std::size_t(out[0]) * out[1];
    const std::size_t n = kIm2colBudget / std::max<std::size_t>(1, rows * plane);
    return int(std::clamp<std::size_t>(n, 1, std::size_t(out[2])));
}

Tensor valid_conv(const Tensor& in, const float* w, const float* b, int cout, const Vec3i& k)
{
    Vec3i od;
    for (int a = 0; a < 3; ++a) od[a] = in.dims[a] - k[a] + 1;
    Tensor out(in.n, cout, od);
    const std::size_t ovox = out.spatial();
    const std::size_t K = std::size_t(in.c) * kvol(k);
    const bool pointwise = kvol(k) == 1;
    std::vector<float> col;
    const int step = slices_per_chunk(K, od);
    if (!pointwise) col.resize(K * std::size_t(od[0]) * od[1] * step);

    for (int s = 0; s < in.n; ++s) {
        float* o = out.sample(s);
        if (pointwise) {
            cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, cout, int(ovox), in.c, 1.f, w, in.c,
                        in.sample(s), int(ovox), 0.f, o, int(ovox));
        } else {
            for (int z0 = 0; z0 < od[2]; z0 += step) {
                const int z1 = std::min(od[2], z0 + step);
                const std::size_t cols = std::size_t(od[0]) * od[1] * (z1 - z0);
                im2col(in.sample(s), in.c, in.dims, k, od, z0, z1, col.data());
                cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, cout, int(cols), int(K), 1.f, w, int(K),
                            col.data(), int(cols), 0.f, o + std::size_t(z0) * od[0] * od[1], int(ovox));
            }
        }
        for (int co = 0; co < cout; ++co) {
            float* p = o + std::size_t(co) * ovox;
            const float bias = b[co];
            for (std::size_t v = 0; v < ovox; ++v) p[v] += bias;
        }
    }
    return out;
}

void valid_conv_backward(const Tensor& in, const Tensor& dout, const float* w, const Vec3i& k, float* dw,
                         float* db, Tensor* din)
{
    const Vec3i& od = dout.dims;
    const int cout = dout.c;
    const std::size_t ovox = dout.spatial();
    const std::size_t K = std::size_t(in.c) * kvol(k);
    const bool pointwise = kvol(k) == 1;
    if (din) *din = Tensor(in.n, in.c, in.dims);
    std::vector<float> col, dcol;
    const int step = slices_per_chunk(K, od);
    if (!pointwise) {
        col.resize(K * std::size_t(od[0]) * od[1] * step);
        if (din) dcol.resize(col.size());
    }

    for (int s = 0; s < in.n; ++s) {
        const float* g = dout.sample(s);
        for (int co = 0; co < cout; ++co) {
            const float* p = g + std::size_t(co) * ovox;
            double acc = 0.0;
            for (std::size_t v = 0; v < ovox; ++v) acc += p[v];
            db[co] += float(acc);
        }
        if (pointwise) {
            cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, cout, in.c, int(ovox), 1.f, g, int(ovox),
                        in.sample(s), int(ovox), 1.f, dw, in.c);
            if (din)
                cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, in.c, int(ovox), cout, 1.f, w, in.c, g,
                            int(ovox), 0.f, din->sample(s), int(ovox));
            continue;
        }
        for (int z0 = 0; z0 < od[2]; z0 += step) {
            const int z1 = std::min(od[2], z0 + step);
            const std::size_t cols = std::size_t(od[0]) * od[1] * (z1 - z0);
            const float* gz = g + std::size_t(z0) * od[0] * od[1];
            im2col(in.sample(s), in.c, in.dims, k, od, z0, z1, col.data());
            cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, cout, int(K), int(cols), 1.f, gz, int(ovox),
                        col.data(), int(cols), 1.f, dw, int(K));
            if (din) {
                cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, int(K), int(cols), cout, 1.f, w, int(K), gz,
                            int(ovox), 0.f, dcol.data(), int(cols));
                col2im_add(dcol.data(), in.c, in.dims, k, od, z0, z1, din->sample(s));
            }
        }
    }
}

} // namespace

Tensor conv_forward(const Tensor& in, const float* w, const float* b, int cout, const Vec3i& k, Padding pad)
{
    if (pad == Padding::Same && kvol(k) > 1) return valid_conv(pad_same(in, k), w, b, cout, k);
    return valid_conv(in, w, b, cout, k);
}

void conv_backward(const Tensor& in, const Tensor& dout, const float* w, const Vec3i& k, Padding pad, float* dw,
                   float* db, Tensor* din)
{
    if (pad == Padding::Same && kvol(k) > 1) {
        const Tensor padded = pad_same(in, k);
        Tensor dpad;
        valid_conv_backward(padded, dout, w, k, dw, db, din ? &dpad : nullptr);
        if (din) *din = unpad_same(dpad, k);
        return;
    }
    valid_conv_backward(in, dout, w, k, dw, db, din);
}

Tensor deconv_forward(const Tensor& in, const float* w, const float* b, int cout, const Vec3i& s)
{
    const Vec3i od{in.dims[0] * s[0], in.dims[1] * s[1], in.dims[2] * s[2]};
    Tensor out(in.n, cout, od);
    const std::size_t ivox = in.spatial(), ovox = out.spatial();
    const int kv = int(kvol(s));
    const int M = cout * kv;
    std::vector<float> y(std::size_t(M) * ivox);
    for (int n = 0; n < in.n; ++n) {
        cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, M, int(ivox), in.c, 1.f, w, in.c, in.sample(n),
                    int(ivox), 0.f, y.data(), int(ivox));
        float* o = out.sample(n);
        for (int co = 0; co < cout; ++co) {
            float* oc = o + std::size_t(co) * ovox;
            int a = 0;
            for (int az = 0; az < s[2]; ++az)
                for (int ay = 0; ay < s[1]; ++ay)
                    for (int ax = 0; ax < s[0]; ++ax, ++a) {
                        const float* src = y.data() + std::size_t(co * kv + a) * ivox;
                        for (int z = 0; z < in.dims[2]; ++z)
                            for (int yy = 0; yy < in.dims[1]; ++yy) {
                                float* dst = oc + std::size_t(ax) +
                                             std::size_t(od[0]) * (std::size_t(yy * s[1] + ay) +
                                                                   std::size_t(od[1]) * (z * s[2] + az));
                                for (int x = 0; x < in.dims[0]; ++x) dst[std::size_t(x) * s[0]] = *src++ + b[co];
                            }
                    }
        }
    }
    return out;
}

void deconv_backward(const Tensor& in, const Tensor& dout, const float* w, const Vec3i& s, float* dw, float* db,
                     Tensor* din)
{
    const Vec3i& od = dout.dims;
    const int cout = dout.c;
    const std::size_t ivox = in.spatial(), ovox = dout.spatial();
    const int kv = int(kvol(s));
    const int M = cout * kv;
    std::vector<float> g(std::size_t(M) * ivox);
    if (din) *din = Tensor(in.n, in.c, in.dims);
    for (int n = 0; n < in.n; ++n) {
        const float* go = dout.sample(n);
        for (int co = 0; co < cout; ++co) {
            const float* gc = go + std::size_t(co) * ovox;
            double acc = 0.0;
            for (std::size_t v = 0; v < ovox; ++v) acc += gc[v];
            db[co] += float(acc);
            int a = 0;
            for (int az = 0; az < s[2]; ++az)
                for (int ay = 0; ay < s[1]; ++ay)
                    for (int ax = 0; ax < s[0]; ++ax, ++a) {
                        float* dst = g.data() + std::size_t(co * kv + a) * ivox;
                        for (int z = 0; z < in.dims[2]; ++z)
                            for (int yy = 0; yy < in.dims[1]; ++yy) {
                                const float* src = gc + std::size_t(ax) +
                                                   std::size_t(od[0]) * (std::size_t(yy * s[1] + ay) +
                                                                         std::size_t(od[1]) * (z * s[2] + az));
                                for (int x = 0; x < in.dims[0]; ++x) *dst++ = src[std::size_t(x) * s[0]];
                            }
                    }
        }
        cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, M, in.c, int(ivox), 1.f, g.data(), int(ivox),
                    in.sample(n), int(ivox), 1.f, dw, in.c);
        if (din)
            cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, in.c, int(ivox), M, 1.f, w, in.c, g.data(),
                        int(ivox), 0.f, din->sample(n), int(ivox));
    }
}

namespace {

/// Calls f(out_index, in_index_of_block_origin) over all pooled cells.
template <class F>
void for_each_block(const Vec3i& in, const Vec3i& s, F&& f)
{
    const Vec3i od{in[0] / s[0], in[1] / s[1], in[2] / s[2]};
    std::size_t o = 0;
    for (int z = 0; z < od[2]; ++z)
        for (int y = 0; y < od[1]; ++y)
            for (int x = 0; x < od[0]; ++x, ++o)
                f(o, std::size_t(x) * s[0] + std::size_t(in[0]) * (std::size_t(y) * s[1] + std::size_t(in[1]) * z * s[2]));
}

Vec3i divided(const Vec3i& d, const Vec3i& s)
{
    Vec3i o;
    for (int a = 0; a < 3; ++a) {
        if (d[a] % s[a] != 0) throw ShapeError("extent " + to_string(d) + " not divisible by " + to_string(s));
        o[a] = d[a] / s[a];
    }
    return o;
}

std::size_t block_argmax(const float* p, const Vec3i& in, const Vec3i& s, std::size_t base)
{
    std::size_t best = base;
    for (int z = 0; z < s[2]; ++z)
        for (int y = 0; y < s[1]; ++y)
            for (int x = 0; x < s[0]; ++x) {
                const std::size_t i = base + x + std::size_t(in[0]) * (y + std::size_t(in[1]) * z);
                if (p[i] > p[best] || std::isnan(p[i])) best = i; // NaN wins so divergence stays visible
            }
    return best;
}

} // namespace

Tensor maxpool_forward(const Tensor& in, const Vec3i& s)
{
    Tensor out(in.n, in.c, divided(in.dims, s));
    for (int p = 0; p < in.n * in.c; ++p) {
        const float* src = in.data.data() + std::size_t(p) * in.spatial();
        float* dst = out.data.data() + std::size_t(p) * out.spatial();
        for_each_block(in.dims, s, [&](std::size_t o, std::size_t base) { dst[o] = src[block_argmax(src, in.dims, s, base)]; });
    }
    return out;
}

Tensor maxpool_backward(const Tensor& in, const Tensor& dout, const Vec3i& s)
{
    Tensor din(in.n, in.c, in.dims);
    for (int p = 0; p < in.n * in.c; ++p) {
        const float* src = in.data.data() + std::size_t(p) * in.spatial();
        const float* g = dout.data.data() + std::size_t(p) * dout.spatial();
        float* dst = din.data.data() + std::size_t(p) * din.spatial();
        for_each_block(in.dims, s, [&](std::size_t o, std::size_t base) { dst[block_argmax(src, in.dims, s, base)] += g[o]; });
    }
    return din;
}

Tensor downsample_forward(const Tensor& in, const Vec3i& f)
{
    Tensor out(in.n, in.c, divided(in.dims, f));
    const std::size_t off = std::size_t(f[0] / 2) + std::size_t(in.dims[0]) * (f[1] / 2 + std::size_t(in.dims[1]) * (f[2] / 2));
    for (int p = 0; p < in.n * in.c; ++p) {
        const float* src = in.data.data() + std::size_t(p) * in.spatial();
        float* dst = out.data.data() + std::size_t(p) * out.spatial();
        for_each_block(in.dims, f, [&](std::size_t o, std::size_t base) { dst[o] = src[base + off]; });
    }
    return out;
}

Tensor downsample_backward(const Tensor& dout, const Vec3i& in_dims, const Vec3i& f)
{
    Tensor din(dout.n, dout.c, in_dims);
    const std::size_t off = std::size_t(f[0] / 2) + std::size_t(in_dims[0]) * (f[1] / 2 + std::size_t(in_dims[1]) * (f[2] / 2));
    for (int p = 0; p < dout.n * dout.c; ++p) {
        const float* g = dout.data.data() + std::size_t(p) * dout.spatial();
        float* dst = din.data.data() + std::size_t(p) * din.spatial();
        for_each_block(in_dims, f, [&](std::size_t o, std::size_t base) { dst[base + off] = g[o]; });
    }
    return din;
}

Tensor upsample_forward(const Tensor& in, const Vec3i& f)
{
    const Vec3i od{in.dims[0] * f[0], in.dims[1] * f[1], in.dims[2] * f[2]};
    Tensor out(in.n, in.c, od);
    for (int p = 0; p < in.n * in.c; ++p) {
        const float* src = in.data.data() + std::size_t(p) * in.spatial();
        float* dst = out.data.data() + std::size_t(p) * out.spatial();
        std::size_t o = 0;
        for (int z = 0; z < od[2]; ++z)
            for (int y = 0; y < od[1]; ++y) {
                const float* row = src + std::size_t(in.dims[0]) * (std::size_t(y / f[1]) + std::size_t(in.dims[1]) * (z / f[2]));
                for (int x = 0; x < od[0]; ++x) dst[o++] = row[x / f[0]];
            }
    }
    return out;
}

Tensor upsample_backward(const Tensor& dout, const Vec3i& f)
{
    const Vec3i id = divided(dout.dims, f);
    Tensor din(dout.n, dout.c, id);
    for (int p = 0; p < dout.n * dout.c; ++p) {
        const float* g = dout.data.data() + std::size_t(p) * dout.spatial();
        float* dst = din.data.data() + std::size_t(p) * din.spatial();
        std::size_t o = 0;
        for (int z = 0; z < dout.dims[2]; ++z)
            for (int y = 0; y < dout.dims[1]; ++y) {
                float* row = dst + std::size_t(id[0]) * (std::size_t(y / f[1]) + std::size_t(id[1]) * (z / f[2]));
                for (int x = 0; x < dout.dims[0]; ++x) row[x / f[0]] += g[o++];
            }
    }
    return din;
}

Tensor crop_forward(const Tensor& in, const Vec3i& m)
{
    Vec3i od;
    for (int a = 0; a < 3; ++a) od[a] = in.dims[a] - 2 * m[a];
    Tensor out(in.n, in.c, od);
    for (int p = 0; p < in.n * in.c; ++p) {
        const float* src = in.data.data() + std::size_t(p) * in.spatial();
        float* dst = out.data.data() + std::size_t(p) * out.spatial();
        for (int z = 0; z < od[2]; ++z)
            for (int y = 0; y < od[1]; ++y)
                std::memcpy(dst + std::size_t(od[0]) * (y + std::size_t(od[1]) * z),
                            src + m[0] + std::size_t(in.dims[0]) * (std::size_t(y + m[1]) + std::size_t(in.dims[1]) * (z + m[2])),
                            std::size_t(od[0]) * sizeof(float));
    }
    return out;
}

Tensor crop_backward(const Tensor& dout, const Vec3i& in_dims, const Vec3i& m)
{
    Tensor din(dout.n, dout.c, in_dims);
    const Vec3i& od = dout.dims;
    for (int p = 0; p < dout.n * dout.c; ++p) {
        const float* src = dout.data.data() + std::size_t(p) * dout.spatial();
        float* dst = din.data.data() + std::size_t(p) * din.spatial();
        for (int z = 0; z < od[2]; ++z)
            for (int y = 0; y < od[1]; ++y)
                std::memcpy(dst + m[0] + std::size_t(in_dims[0]) * (std::size_t(y + m[1]) + std::size_t(in_dims[1]) * (z + m[2])),
                            src + std::size_t(od[0]) * (y + std::size_t(od[1]) * z), std::size_t(od[0]) * sizeof(float));
    }
    return din;
}

Tensor relu_forward(const Tensor& in)
{
    Tensor out = in;
    for (float& v : out.data) v = v < 0.f ? 0.f : v; // keeps NaN
    return out;
}

Tensor relu_backward(const Tensor& in, const Tensor& dout)
{
    Tensor din = dout;
    for (std::size_t i = 0; i < din.data.size(); ++i)
        if (!(in.data[i] > 0.f)) din.data[i] = 0.f;
    return din;
}

Tensor prelu_forward(const Tensor& in, const float* alpha)
{
    Tensor out = in;
    const std::size_t m = in.sample_size();
    for (int n = 0; n < in.n; ++n) {
        float* p = out.sample(n);
        for (std::size_t i = 0; i < m; ++i)
            if (p[i] < 0.f) p[i] *= alpha[i];
    }
    return out;
}

Tensor prelu_backward(const Tensor& in, const Tensor& dout, const float* alpha, float* dalpha)
{
    Tensor din = dout;
    const std::size_t m = in.sample_size();
    for (int n = 0; n < in.n; ++n) {
        const float* x = in.sample(n);
        float* g = din.sample(n);
        for (std::size_t i = 0; i < m; ++i)
            if (x[i] < 0.f) {
                dalpha[i] += g[i] * x[i];
                g[i] *= alpha[i];
            }
    }
    return din;
}

namespace {

void channel_moments(const Tensor& in, int c, double& mean, double& var)
{
    const std::size_t v = in.spatial();
    double s = 0.0, ss = 0.0;
    for (int n = 0; n < in.n; ++n) {
        const float* p = in.sample(n) + std::size_t(c) * v;
        for (std::size_t i = 0; i < v; ++i) {
            s += p[i];
            ss += double(p[i]) * p[i];
        }
    }
    const double m = double(in.n) * double(v);
    mean = s / m;
    var = std::max(0.0, ss / m - mean * mean);
}

} // namespace

Tensor batchnorm_forward(const Tensor& in, const BatchNormState& s, bool training)
{
    Tensor out(in.n, in.c, in.dims);
    const std::size_t v = in.spatial();
    for (int c = 0; c < in.c; ++c) {
        double mean, var;
        if (training) {
            channel_moments(in, c, mean, var);
            s.running_mean[c] = kBatchNormMomentum * s.running_mean[c] + (1.f - kBatchNormMomentum) * float(mean);
            s.running_var[c] = kBatchNormMomentum * s.running_var[c] + (1.f - kBatchNormMomentum) * float(var);
        } else {
            mean = s.running_mean[c];
            var = s.running_var[c];
        }
        const float scale = float(s.gamma[c] / std::sqrt(var + kBatchNormEps));
        const float shift = float(s.beta[c] - mean * scale);
        for (int n = 0; n < in.n; ++n) {
            const float* p = in.sample(n) + std::size_t(c) * v;
            float* q = out.sample(n) + std::size_t(c) * v;
            for (std::size_t i = 0; i < v; ++i) q[i] = p[i] * scale + shift;
        }
    }
    return out;
}

Tensor batchnorm_backward(const Tensor& in, const Tensor& dout, const BatchNormState& s, float* dgamma, float* dbeta)
{
    Tensor din(in.n, in.c, in.dims);
    const std::size_t v = in.spatial();
    const double m = double(in.n) * double(v);
    for (int c = 0; c < in.c; ++c) {
        double mean, var;
        channel_moments(in, c, mean, var);
        const double inv = 1.0 / std::sqrt(var + kBatchNormEps);
        double sg = 0.0, sgx = 0.0;
        for (int n = 0; n < in.n; ++n) {
            const float* x = in.sample(n) + std::size_t(c) * v;
            const float* g = dout.sample(n) + std::size_t(c) * v;
            for (std::size_t i = 0; i < v; ++i) {
                sg += g[i];
                sgx += g[i] * (x[i] - mean) * inv;
            }
        }
        dgamma[c] += float(sgx);
        dbeta[c] += float(sg);
        const double k = s.gamma[c] * inv / m;
        for (int n = 0; n < in.n; ++n) {
            const float* x = in.sample(n) + std::size_t(c) * v;
            const float* g = dout.sample(n) + std::size_t(c) * v;
            float* d = din.sample(n) + std::size_t(c) * v;
            for (std::size_t i = 0; i < v; ++i) {
                const double xh = (x[i] - mean) * inv;
                d[i] = float(k * (m * g[i] - sg - xh * sgx));
            }
        }
    }
    return din;
}

Tensor concat_forward(const std::vector<const Tensor*>& ins)
{
    int c = 0;
    for (const auto* t : ins) c += t->c;
    Tensor out(ins[0]->n, c, ins[0]->dims);
    for (int n = 0; n < out.n; ++n) {
        float* dst = out.sample(n);
        for (const auto* t : ins) {
            std::memcpy(dst, t->sample(n), t->sample_size() * sizeof(float));
            dst += t->sample_size();
        }
    }
    return out;
}

std::vector<Tensor> concat_backward(const Tensor& dout, const std::vector<int>& channels)
{
    std::vector<Tensor> parts;
    for (int c : channels) parts.emplace_back(dout.n, c, dout.dims);
    for (int n = 0; n < dout.n; ++n) {
        const float* src = dout.sample(n);
        for (auto& t : parts) {
            std::memcpy(t.sample(n), src, t.sample_size() * sizeof(float));
            src += t.sample_size();
        }
    }
    return parts;
}

Tensor add_forward(const std::vector<const Tensor*>& ins)
{
    Tensor out = *ins[0];
    for (std::size_t j = 1; j < ins.size(); ++j)
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += ins[j]->data[i];
    return out;
}

Tensor softmax(const Tensor& logits)
{
    Tensor out(logits.n, logits.c, logits.dims);
    const std::size_t v = logits.spatial();
    std::vector<float> m(v), sum(v);
    for (int n = 0; n < logits.n; ++n) {
        const float* z = logits.sample(n);
        float* p = out.sample(n);
        std::copy(z, z + v, m.begin());
        for (int c = 1; c < logits.c; ++c)
            for (std::size_t i = 0; i < v; ++i) m[i] = std::max(m[i], z[std::size_t(c) * v + i]);
        std::fill(sum.begin(), sum.end(), 0.f);
        for (int c = 0; c < logits.c; ++c)
            for (std::size_t i = 0; i < v; ++i) {
                const float e = std::exp(z[std::size_t(c) * v + i] - m[i]);
                p[std::size_t(c) * v + i] = e;
                sum[i] += e;
            }
        for (int c = 0; c < logits.c; ++c)
            for (std::size_t i = 0; i < v; ++i) p[std::size_t(c) * v + i] /= sum[i];
    }
    return out;
}

} // namespace tseg::nn
