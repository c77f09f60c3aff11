#pragma once

#include <cstddef>
#include <vector>

#include "tissueseg/architecture.hpp"

namespace tseg::nn {

/// Batch of multi-channel grids, layout [n][c][z][y][x].
struct Tensor {
    int n = 0;
    int c = 0;
    Vec3i dims{0, 0, 0};
    std::vector<float> data;

    Tensor() = default;
    Tensor(int n_, int c_, const Vec3i& d, float fill = 0.f)
        : n(n_), c(c_), dims(d), data(std::size_t(n_) * std::size_t(c_) * voxel_count(d), fill) {}

    std::size_t spatial() const { return voxel_count(dims); }
    std::size_t sample_size() const { return std::size_t(c) * spatial(); }
    float* sample(int i) { return data.data() + std::size_t(i) * sample_size(); }
    const float* sample(int i) const { return data.data() + std::size_t(i) * sample_size(); }
    bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && dims == o.dims; }
};

// Convolution, weights [cout][cin][kz][ky][kx]. Odd kernels only for Same.
Tensor conv_forward(const Tensor& in, const float* w, const float* b, int cout, const Vec3i& k, Padding pad);
/// Accumulates into dw/db; writes din when non-null.
void conv_backward(const Tensor& in, const Tensor& dout, const float* w, const Vec3i& k, Padding pad, float* dw,
                   float* db, Tensor* din);

// Transposed convolution with kernel == stride, weights [cout][kz][ky][kx][cin].
Tensor deconv_forward(const Tensor& in, const float* w, const float* b, int cout, const Vec3i& s);
void deconv_backward(const Tensor& in, const Tensor& dout, const float* w, const Vec3i& s, float* dw, float* db,
                     Tensor* din);

Tensor maxpool_forward(const Tensor& in, const Vec3i& s);
Tensor maxpool_backward(const Tensor& in, const Tensor& dout, const Vec3i& s);

/// Nearest neighbour: keeps index f*j + f/2 per axis.
Tensor downsample_forward(const Tensor& in, const Vec3i& f);
Tensor downsample_backward(const Tensor& dout, const Vec3i& in_dims, const Vec3i& f);
Tensor upsample_forward(const Tensor& in, const Vec3i& f);
Tensor upsample_backward(const Tensor& dout, const Vec3i& f);

Tensor crop_forward(const Tensor& in, const Vec3i& margin);
Tensor crop_backward(const Tensor& dout, const Vec3i& in_dims, const Vec3i& margin);

Tensor relu_forward(const Tensor& in);
Tensor relu_backward(const Tensor& in, const Tensor& dout);
/// Slopes per element of one sample ([c][z][y][x]), shared across the batch.
Tensor prelu_forward(const Tensor& in, const float* alpha);
Tensor prelu_backward(const Tensor& in, const Tensor& dout, const float* alpha, float* dalpha);

struct BatchNormState {
    float* gamma;
    float* beta;
    float* running_mean;
    float* running_var;
};
inline constexpr float kBatchNormEps = 1e-5f;
inline constexpr float kBatchNormMomentum = 0.9f;

/// Training mode normalizes with batch statistics and updates the running
/// averages; inference mode uses the running averages.
Tensor batchnorm_forward(const Tensor& in, const BatchNormState& s, bool training);
Tensor batchnorm_backward(const Tensor& in, const Tensor& dout, const BatchNormState& s, float* dgamma,
                          float* dbeta);

/// Concatenation along channels.
Tensor concat_forward(const std::vector<const Tensor*>& ins);
std::vector<Tensor> concat_backward(const Tensor& dout, const std::vector<int>& channels);

Tensor add_forward(const std::vector<const Tensor*>& ins);

/// Per-voxel softmax over channels.
Tensor softmax(const Tensor& logits);

} // namespace tseg::nn
