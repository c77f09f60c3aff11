#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tissueseg/architecture.hpp"
#include "tissueseg/layers.hpp"

namespace tseg {

struct Parameter {
    std::string name;
    std::vector<float> value;
    std::vector<float> grad;
};

/// Non-trainable state (batchnorm running averages).
struct Buffer {
    std::string name;
    std::vector<float> value;
};

/// Trainable network built from an ArchitectureSpec. Inference entry points
/// are const and may be called concurrently; training calls are not.
class Model {
public:
    /// He-normal weights drawn in layer order from `seed`; zero biases,
    /// PReLU slopes 0.25, batchnorm identity.
    Model(ArchitectureSpec spec, std::uint64_t seed);

    const ArchitectureSpec& spec() const { return spec_; }
    std::uint64_t seed() const { return seed_; }

    std::vector<Parameter>& parameters() { return params_; }
    const std::vector<Parameter>& parameters() const { return params_; }
    std::vector<Buffer>& buffers() { return buffers_; }
    const std::vector<Buffer>& buffers() const { return buffers_; }
    std::int64_t parameter_count() const;

    /// Softmax head output before normalization, inference mode.
    /// Input must be (N, in_channels, spec.input_size).
    nn::Tensor logits(const nn::Tensor& input) const;
    /// Per-class probabilities, (N, num_classes, spec.output_size).
    nn::Tensor predict(const nn::Tensor& input) const;

    /// Activations of every layer from a training-mode pass.
    struct Trace {
        std::vector<nn::Tensor> outputs;
        const nn::Tensor& logits() const { return outputs.back(); }
    };
    /// Batch statistics in batchnorm, running averages updated.
    Trace forward_train(const nn::Tensor& input);
    /// Accumulates parameter gradients for d(loss)/d(logits).
    void backward(const Trace& trace, const nn::Tensor& grad_logits);
    void zero_grad();

    struct State {
        std::vector<std::vector<float>> params;
        std::vector<std::vector<float>> buffers;
    };
    State state() const;
    void load_state(const State& s);

private:
    nn::Tensor run(const nn::Tensor& input, bool training, std::vector<nn::Tensor>* keep) const;
    void check_input(const nn::Tensor& input) const;

    ArchitectureSpec spec_;
    std::uint64_t seed_;
    std::vector<Parameter> params_;
    std::vector<Buffer> buffers_;
    std::vector<int> first_param_;  ///< per layer, -1 when none
    std::vector<int> first_buffer_; ///< per layer, -1 when none
    std::vector<std::vector<int>> input_index_;
    std::vector<int> last_use_;
};

/// Same as constructing a Model; kept for symmetry with build_spec.
Model instantiate(const ArchitectureSpec& spec, std::uint64_t seed);

} // namespace tseg
