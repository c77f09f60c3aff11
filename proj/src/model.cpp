#include "tissueseg/model.hpp"

#include <cmath>
#include <map>
#include <random>

#include "tissueseg/errors.hpp"

namespace tseg {

using nn::Tensor;

Model::Model(ArchitectureSpec spec, std::uint64_t seed) : spec_(std::move(spec)), seed_(seed)
{
    validate_spec(spec_);
    const auto shapes = infer_shapes(spec_, spec_.input_size);
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) index[spec_.layers[i].id] = int(i);

    std::mt19937_64 rng(seed);
    const std::size_t n = spec_.layers.size();
    first_param_.assign(n, -1);
    first_buffer_.assign(n, -1);
    input_index_.resize(n);
    last_use_.assign(n, -1);

    for (std::size_t i = 0; i < n; ++i) {
        const LayerSpec& l = spec_.layers[i];
        for (const auto& name : l.inputs) {
            const int j = index.at(name);
            input_index_[i].push_back(j);
            last_use_[std::size_t(j)] = int(i);
        }
        const int cin = l.inputs.empty() ? 0 : shapes[std::size_t(input_index_[i][0])].channels;
        const std::size_t kv = voxel_count(l.kernel);
        auto he = [&](std::size_t count, double fan_in) {
            std::normal_distribution<float> g(0.f, float(std::sqrt(2.0 / fan_in)));
            std::vector<float> w(count);
            for (float& v : w) v = g(rng);
            return w;
        };
        auto add = [&](const std::string& suffix, std::vector<float> v) {
            if (first_param_[i] < 0) first_param_[i] = int(params_.size());
            Parameter p{l.id + "/" + suffix, std::move(v), {}};
            p.grad.assign(p.value.size(), 0.f);
            params_.push_back(std::move(p));
        };
        switch (l.kind) {
        case LayerKind::Conv:
        case LayerKind::SoftmaxHead:
            add("weight", he(std::size_t(l.channels_out) * std::size_t(cin) * kv, double(cin) * double(kv)));
            add("bias", std::vector<float>(std::size_t(l.channels_out), 0.f));
            break;
        case LayerKind::Deconv:
            add("weight", he(std::size_t(l.channels_out) * kv * std::size_t(cin), double(cin)));
            add("bias", std::vector<float>(std::size_t(l.channels_out), 0.f));
            break;
        case LayerKind::BatchNorm:
            add("gamma", std::vector<float>(std::size_t(cin), 1.f));
            add("beta", std::vector<float>(std::size_t(cin), 0.f));
            first_buffer_[i] = int(buffers_.size());
            buffers_.push_back({l.id + "/running_mean", std::vector<float>(std::size_t(cin), 0.f)});
            buffers_.push_back({l.id + "/running_var", std::vector<float>(std::size_t(cin), 1.f)});
            break;
        case LayerKind::Activation:
            if (l.activation == ActivationKind::PReLU)
                add("alpha", std::vector<float>(std::size_t(shapes[i].channels) * voxel_count(shapes[i].dims), 0.25f));
            break;
        default:
            break;
        }
    }
}

std::int64_t Model::parameter_count() const
{
    std::int64_t n = 0;
    for (const auto& p : params_) n += std::int64_t(p.value.size());
    return n;
}

void Model::check_input(const Tensor& input) const
{
    if (input.c != spec_.in_channels || input.dims != spec_.input_size || input.n < 1)
        throw ShapeError("model expects (N, " + std::to_string(spec_.in_channels) + ", " +
                         to_string(spec_.input_size) + ") input, got (" + std::to_string(input.n) + ", " +
                         std::to_string(input.c) + ", " + to_string(input.dims) + ")");
}

Tensor Model::run(const Tensor& input, bool training, std::vector<Tensor>* keep) const
{
    check_input(input);
    const std::size_t n = spec_.layers.size();
    std::vector<Tensor> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const LayerSpec& l = spec_.layers[i];
        const auto& in_idx = input_index_[i];
        const Tensor* x = in_idx.empty() ? nullptr : &out[std::size_t(in_idx[0])];
        const Parameter* p = first_param_[i] >= 0 ? &params_[std::size_t(first_param_[i])] : nullptr;
        switch (l.kind) {
        case LayerKind::Input:
            out[i] = input;
            break;
        case LayerKind::Conv:
        case LayerKind::SoftmaxHead:
            out[i] = nn::conv_forward(*x, p[0].value.data(), p[1].value.data(), l.channels_out, l.kernel, l.padding);
            break;
        case LayerKind::Deconv:
            out[i] = nn::deconv_forward(*x, p[0].value.data(), p[1].value.data(), l.channels_out, l.stride);
            break;
        case LayerKind::MaxPool:
            out[i] = nn::maxpool_forward(*x, l.stride);
            break;
        case LayerKind::Downsample:
            out[i] = nn::downsample_forward(*x, l.stride);
            break;
        case LayerKind::Upsample:
            out[i] = nn::upsample_forward(*x, l.stride);
            break;
        case LayerKind::Crop:
            out[i] = nn::crop_forward(*x, l.crop);
            break;
        case LayerKind::Activation:
            out[i] = l.activation == ActivationKind::ReLU ? nn::relu_forward(*x)
                                                          : nn::prelu_forward(*x, p[0].value.data());
            break;
        case LayerKind::BatchNorm: {
            // Running averages are only written in training mode, which is
            // reached through the non-const forward_train.
            auto* b = const_cast<Buffer*>(&buffers_[std::size_t(first_buffer_[i])]);
            nn::BatchNormState s{const_cast<float*>(p[0].value.data()), const_cast<float*>(p[1].value.data()),
                                 b[0].value.data(), b[1].value.data()};
            out[i] = nn::batchnorm_forward(*x, s, training);
            break;
        }
        case LayerKind::Concat:
        case LayerKind::Add: {
            std::vector<const Tensor*> ins;
            for (int j : in_idx) ins.push_back(&out[std::size_t(j)]);
            out[i] = l.kind == LayerKind::Concat ? nn::concat_forward(ins) : nn::add_forward(ins);
            break;
        }
        }
        if (!keep)
            for (int j : in_idx)
                if (last_use_[std::size_t(j)] == int(i)) out[std::size_t(j)] = Tensor();
    }
    Tensor result = out.back();
    if (keep) *keep = std::move(out);
    return result;
}

Tensor Model::logits(const Tensor& input) const { return run(input, false, nullptr); }

Tensor Model::predict(const Tensor& input) const { return nn::softmax(logits(input)); }

Model::Trace Model::forward_train(const Tensor& input)
{
    Trace t;
    run(input, true, &t.outputs);
    return t;
}

void Model::zero_grad()
{
    for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.f);
}

void Model::backward(const Trace& trace, const Tensor& grad_logits)
{
    const std::size_t n = spec_.layers.size();
    if (trace.outputs.size() != n || !grad_logits.same_shape(trace.outputs.back()))
        throw ShapeError("backward: gradient does not match the traced forward pass");
    std::vector<Tensor> grad(n);
    grad.back() = grad_logits;

    auto accumulate = [&](int j, Tensor g) {
        Tensor& dst = grad[std::size_t(j)];
        if (dst.data.empty()) {
            dst = std::move(g);
            return;
        }
        for (std::size_t k = 0; k < dst.data.size(); ++k) dst.data[k] += g.data[k];
    };

    for (std::size_t i = n; i-- > 1;) {
        if (grad[i].data.empty()) continue;
        const LayerSpec& l = spec_.layers[i];
        const auto& in_idx = input_index_[i];
        const Tensor& g = grad[i];
        const Tensor& x = trace.outputs[std::size_t(in_idx[0])];
        Parameter* p = first_param_[i] >= 0 ? &params_[std::size_t(first_param_[i])] : nullptr;
        // the input layer needs no gradient
        const bool want_input = !(in_idx.size() == 1 && in_idx[0] == 0);
        switch (l.kind) {
        case LayerKind::Input:
            break;
        case LayerKind::Conv:
        case LayerKind::SoftmaxHead: {
            Tensor dx;
            nn::conv_backward(x, g, p[0].value.data(), l.kernel, l.padding, p[0].grad.data(), p[1].grad.data(),
                              want_input ? &dx : nullptr);
            if (want_input) accumulate(in_idx[0], std::move(dx));
            break;
        }
        case LayerKind::Deconv: {
            Tensor dx;
            nn::deconv_backward(x, g, p[0].value.data(), l.stride, p[0].grad.data(), p[1].grad.data(),
                                want_input ? &dx : nullptr);
            if (want_input) accumulate(in_idx[0], std::move(dx));
            break;
        }
        case LayerKind::MaxPool:
            accumulate(in_idx[0], nn::maxpool_backward(x, g, l.stride));
            break;
        case LayerKind::Downsample:
            accumulate(in_idx[0], nn::downsample_backward(g, x.dims, l.stride));
            break;
        case LayerKind::Upsample:
            accumulate(in_idx[0], nn::upsample_backward(g, l.stride));
            break;
        case LayerKind::Crop:
            accumulate(in_idx[0], nn::crop_backward(g, x.dims, l.crop));
            break;
        case LayerKind::Activation:
            accumulate(in_idx[0], l.activation == ActivationKind::ReLU
                                      ? nn::relu_backward(x, g)
                                      : nn::prelu_backward(x, g, p[0].value.data(), p[0].grad.data()));
            break;
        case LayerKind::BatchNorm: {
            auto* b = &buffers_[std::size_t(first_buffer_[i])];
            nn::BatchNormState s{p[0].value.data(), p[1].value.data(), b[0].value.data(), b[1].value.data()};
            accumulate(in_idx[0], nn::batchnorm_backward(x, g, s, p[0].grad.data(), p[1].grad.data()));
            break;
        }
        case LayerKind::Concat: {
            std::vector<int> channels;
            for (int j : in_idx) channels.push_back(trace.outputs[std::size_t(j)].c);
            auto parts = nn::concat_backward(g, channels);
            for (std::size_t k = 0; k < in_idx.size(); ++k)
                if (in_idx[k] != 0) accumulate(in_idx[k], std::move(parts[k]));
            break;
        }
        case LayerKind::Add:
            for (int j : in_idx)
                if (j != 0) accumulate(j, g);
            break;
        }
        grad[i] = Tensor();
    }
}

Model::State Model::state() const
{
    State s;
    for (const auto& p : params_) s.params.push_back(p.value);
    for (const auto& b : buffers_) s.buffers.push_back(b.value);
    return s;
}

void Model::load_state(const State& s)
{
    if (s.params.size() != params_.size() || s.buffers.size() != buffers_.size())
        throw std::invalid_argument("load_state: tensor count differs from the model");
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (s.params[i].size() != params_[i].value.size())
            throw std::invalid_argument("load_state: size mismatch for " + params_[i].name);
        params_[i].value = s.params[i];
    }
    for (std::size_t i = 0; i < buffers_.size(); ++i) {
        if (s.buffers[i].size() != buffers_[i].value.size())
            throw std::invalid_argument("load_state: size mismatch for " + buffers_[i].name);
        buffers_[i].value = s.buffers[i];
    }
}

Model instantiate(const ArchitectureSpec& spec, std::uint64_t seed) { return Model(spec, seed); }

} // namespace tseg
