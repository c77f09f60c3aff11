#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "tissueseg/grid.hpp"

namespace tseg {

enum class Family { DM, KK, UNet, UResNet };
enum class Dimensionality { D2, D3 };

std::string_view to_string(Family f);
std::string_view to_string(Dimensionality d);
Family family_from_string(std::string_view s);
Dimensionality dimensionality_from_string(std::string_view s);

inline constexpr std::array<Family, 4> kFamilies{Family::DM, Family::KK, Family::UNet, Family::UResNet};

inline bool is_u_shaped(Family f) { return f == Family::UNet || f == Family::UResNet; }

enum class LayerKind {
    Input,
    Conv,
    Deconv,
    MaxPool,
    Activation,
    BatchNorm,
    Concat,
    Add,
    Downsample,
    Upsample,
    Crop,
    SoftmaxHead,
};

enum class Padding { Valid, Same };

/// ReLU, or PReLU with one learnable slope per feature-map element.
enum class ActivationKind { ReLU, PReLU };

std::string_view to_string(LayerKind k);

struct LayerSpec {
    std::string id;
    LayerKind kind = LayerKind::Conv;
    Vec3i kernel{1, 1, 1};
    int channels_out = 0;            ///< conv, deconv, softmax_head, input
    Padding padding = Padding::Valid;
    Vec3i stride{1, 1, 1};           ///< pooling / deconv / resampling factor
    std::vector<std::string> inputs;
    ActivationKind activation = ActivationKind::ReLU;
    Vec3i crop{0, 0, 0};             ///< per-side margin for Crop

    bool operator==(const LayerSpec&) const = default;
};

struct ArchitectureSpec {
    Family family = Family::UNet;
    Dimensionality dimensionality = Dimensionality::D3;
    int in_channels = 1;
    int num_classes = 4;
    double width_scale = 1.0;
    std::vector<LayerSpec> layers; ///< topological order; first is the input, last the softmax head
    Vec3i input_size{0, 0, 0};
    Vec3i output_size{0, 0, 0};

    bool operator==(const ArchitectureSpec&) const = default;
};

/// Optional overrides of the default patch geometry and channel widths.
struct PatchConfig {
    std::optional<Vec3i> output_size; ///< 2D specs take z = 1
    double width_scale = 1.0;         ///< multiplies every kernel count (rounded, >= 1)
};

/// Default output patch per family and dimensionality.
Vec3i default_output_size(Family f, Dimensionality d);

/// Builds the layer graph of one family. Throws std::invalid_argument for
/// in_channels < 1 or a bad width scale, ShapeError when the output size is
/// incompatible with the family (pooling depth, resampling factor, 2D z != 1).
ArchitectureSpec build_spec(Family family, Dimensionality dim, int in_channels,
                            const std::optional<PatchConfig>& patch_config = std::nullopt);

/// Structural checks: unique ids, inputs defined earlier, one input layer
/// first, one softmax head last, channel counts positive, shapes consistent
/// at the spec's input size.
void validate_spec(const ArchitectureSpec& spec);

struct LayerShape {
    int channels = 0;
    Vec3i dims{0, 0, 0};
};

/// Per-layer output shapes for a given input size. Throws ShapeError.
std::vector<LayerShape> infer_shapes(const ArchitectureSpec& spec, const Vec3i& input_size);

/// Spatial size of the softmax output for `input_size`.
Vec3i output_shape(const ArchitectureSpec& spec, const Vec3i& input_size);

/// Weights + biases of conv/deconv/head layers, batchnorm scale and shift,
/// and PReLU slopes (one per feature-map element at the spec's input size).
std::int64_t count_parameters(const ArchitectureSpec& spec);

/// Per-layer parameter counts, aligned with spec.layers.
std::vector<std::int64_t> layer_parameter_counts(const ArchitectureSpec& spec);

nlohmann::json spec_to_json(const ArchitectureSpec& spec);
ArchitectureSpec spec_from_json(const nlohmann::json& j);

} // namespace tseg
