#include "tissueseg/architecture.hpp"

#include <cmath>
#include <map>
#include <set>

#include "tissueseg/errors.hpp"

namespace tseg {

std::string_view to_string(Family f)
{
    switch (f) {
    case Family::DM: return "DM";
    case Family::KK: return "KK";
    case Family::UNet: return "UNet";
    case Family::UResNet: return "UResNet";
    }
    return "?";
}

std::string_view to_string(Dimensionality d) { return d == Dimensionality::D2 ? "2D" : "3D"; }

Family family_from_string(std::string_view s)
{
    for (Family f : kFamilies)
        if (to_string(f) == s) return f;
    throw std::invalid_argument("unknown architecture family '" + std::string(s) + "'");
}

Dimensionality dimensionality_from_string(std::string_view s)
{
    if (s == "2D") return Dimensionality::D2;
    if (s == "3D") return Dimensionality::D3;
    throw std::invalid_argument("unknown dimensionality '" + std::string(s) + "'");
}

std::string_view to_string(LayerKind k)
{
    switch (k) {
    case LayerKind::Input: return "input";
    case LayerKind::Conv: return "conv";
    case LayerKind::Deconv: return "deconv";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Activation: return "activation";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::Concat: return "concat";
    case LayerKind::Add: return "add";
    case LayerKind::Downsample: return "downsample";
    case LayerKind::Upsample: return "upsample";
    case LayerKind::Crop: return "crop";
    case LayerKind::SoftmaxHead: return "softmax_head";
    }
    return "?";
}

namespace {

LayerKind layer_kind_from_string(std::string_view s)
{
    for (int k = 0; k <= int(LayerKind::SoftmaxHead); ++k)
        if (to_string(LayerKind(k)) == s) return LayerKind(k);
    throw std::invalid_argument("unknown layer kind '" + std::string(s) + "'");
}

constexpr int kUPools = 3;     // u-shaped families: four resolution levels
constexpr int kKKFactor = 3;   // low-resolution path of KK
constexpr int kKKConvs = 8;
constexpr int kDMConvs = 9;

/// Appends layers while tracking the most recent id.
class GraphBuilder {
public:
    GraphBuilder(Dimensionality d, double scale) : d3_(d == Dimensionality::D3), scale_(scale) {}

    Vec3i cube(int k) const { return {k, k, d3_ ? k : 1}; }
    int width(int c) const { return std::max(1, int(std::lround(c * scale_))); }

    std::string add(LayerSpec l)
    {
        if (l.id.empty()) l.id = std::string(to_string(l.kind)) + "_" + std::to_string(layers.size());
        layers.push_back(l);
        return layers.back().id;
    }

    std::string input(int channels)
    {
        LayerSpec l;
        l.id = "input";
        l.kind = LayerKind::Input;
        l.channels_out = channels;
        return add(l);
    }
    std::string conv(const std::string& in, int k, int channels, Padding pad, const std::string& id = {})
    {
        LayerSpec l;
        l.id = id;
        l.kind = LayerKind::Conv;
        l.kernel = cube(k);
        l.channels_out = channels;
        l.padding = pad;
        l.inputs = {in};
        return add(l);
    }
    std::string act(const std::string& in, ActivationKind a)
    {
        LayerSpec l;
        l.kind = LayerKind::Activation;
        l.activation = a;
        l.inputs = {in};
        return add(l);
    }
    std::string unary(LayerKind kind, const std::string& in, int factor = 1)
    {
        LayerSpec l;
        l.kind = kind;
        l.inputs = {in};
        if (factor > 1) l.stride = l.kernel = cube(factor);
        return add(l);
    }
    std::string deconv(const std::string& in, int channels)
    {
        LayerSpec l;
        l.kind = LayerKind::Deconv;
        l.kernel = l.stride = cube(2);
        l.channels_out = channels;
        l.inputs = {in};
        return add(l);
    }
    std::string crop(const std::string& in, int margin)
    {
        LayerSpec l;
        l.kind = LayerKind::Crop;
        l.crop = {margin, margin, d3_ ? margin : 0};
        l.inputs = {in};
        return add(l);
    }
    std::string merge(LayerKind kind, std::vector<std::string> ins)
    {
        LayerSpec l;
        l.kind = kind;
        l.inputs = std::move(ins);
        return add(l);
    }
    std::string head(const std::string& in, int classes)
    {
        LayerSpec l;
        l.id = "softmax_head";
        l.kind = LayerKind::SoftmaxHead;
        l.channels_out = classes;
        l.inputs = {in};
        return add(l);
    }

    std::vector<LayerSpec> layers;

private:
    bool d3_;
    double scale_;
};

void build_dm(GraphBuilder& g, int in_channels)
{
    static constexpr int widths[kDMConvs] = {25, 25, 25, 50, 50, 50, 75, 75, 75};
    static constexpr int fc[3] = {400, 200, 150};
    std::string x = g.input(in_channels);
    std::vector<std::string> taps;
    for (int i = 0; i < kDMConvs; ++i) {
        x = g.conv(x, 3, g.width(widths[i]), Padding::Valid, "conv3_" + std::to_string(i + 1));
        x = g.act(x, ActivationKind::PReLU);
        if (i == 2 || i == 5) taps.push_back(x);
    }
    // Shallow taps are centre-cropped to the size after the ninth conv.
    const std::string t3 = g.crop(taps[0], 6);
    const std::string t6 = g.crop(taps[1], 3);
    x = g.merge(LayerKind::Concat, {t3, t6, x});
    for (int i = 0; i < 3; ++i) {
        x = g.conv(x, 1, g.width(fc[i]), Padding::Valid, "conv1_" + std::to_string(i + 1));
        x = g.act(x, ActivationKind::PReLU);
    }
}

void build_kk(GraphBuilder& g, int in_channels)
{
    static constexpr int widths[kKKConvs] = {30, 30, 40, 40, 40, 40, 50, 50};
    const std::string in = g.input(in_channels);
    // Input window is output + 60: the normal path reads the central
    // output + 16, the low-resolution path reads the whole window at 1/3.
    std::string normal = g.crop(in, 22);
    for (int i = 0; i < kKKConvs; ++i) {
        normal = g.conv(normal, 3, g.width(widths[i]), Padding::Valid, "normal_conv_" + std::to_string(i + 1));
        normal = g.act(normal, ActivationKind::PReLU);
    }
    std::string low = g.unary(LayerKind::Downsample, in, kKKFactor);
    for (int i = 0; i < kKKConvs; ++i) {
        low = g.conv(low, 3, g.width(widths[i]), Padding::Valid, "low_conv_" + std::to_string(i + 1));
        low = g.act(low, ActivationKind::PReLU);
    }
    low = g.unary(LayerKind::Upsample, low, kKKFactor);
    low = g.crop(low, 6);
    std::string x = g.merge(LayerKind::Concat, {normal, low});
    for (int i = 0; i < 2; ++i) {
        x = g.conv(x, 1, g.width(150), Padding::Valid, "fuse_conv_" + std::to_string(i + 1));
        x = g.act(x, ActivationKind::PReLU);
    }
}

void build_unet(GraphBuilder& g, int in_channels)
{
    static constexpr int widths[kUPools + 1] = {32, 64, 128, 256};
    std::string x = g.input(in_channels);
    std::vector<std::string> skips;
    for (int level = 0; level <= kUPools; ++level) {
        for (int j = 0; j < 2; ++j) {
            x = g.conv(x, 3, g.width(widths[level]), Padding::Same);
            x = g.act(x, ActivationKind::ReLU);
        }
        if (level < kUPools) {
            skips.push_back(x);
            x = g.unary(LayerKind::MaxPool, x, 2);
        }
    }
    for (int level = kUPools - 1; level >= 0; --level) {
        x = g.deconv(x, g.width(widths[level]));
        x = g.merge(LayerKind::Concat, {skips[std::size_t(level)], x});
        for (int j = 0; j < 2; ++j) {
            x = g.conv(x, 3, g.width(widths[level]), Padding::Same);
            x = g.act(x, ActivationKind::ReLU);
        }
    }
}

std::string residual_module(GraphBuilder& g, const std::string& in, int k)
{
    const std::string a = g.conv(in, 3, k, Padding::Same);
    const std::string b = g.conv(in, 1, k, Padding::Same);
    std::string x = g.merge(LayerKind::Add, {a, b});
    x = g.unary(LayerKind::BatchNorm, x);
    return g.act(x, ActivationKind::ReLU);
}

void build_uresnet(GraphBuilder& g, int in_channels)
{
    static constexpr int widths[kUPools + 1] = {32, 64, 128, 256};
    std::string x = g.input(in_channels);
    std::vector<std::string> skips;
    for (int level = 0; level < kUPools; ++level) {
        x = residual_module(g, x, g.width(widths[level]));
        skips.push_back(x);
        x = g.unary(LayerKind::MaxPool, x, 2);
    }
    x = residual_module(g, x, g.width(widths[kUPools]));
    for (int level = kUPools - 1; level >= 0; --level) {
        const int k = g.width(widths[level]);
        x = g.deconv(x, k);
        x = residual_module(g, x, k);
        x = g.merge(LayerKind::Add, {x, skips[std::size_t(level)]});
        x = residual_module(g, x, k);
    }
}

Vec3i input_for_output(Family f, const Vec3i& out, bool d3)
{
    Vec3i in = out;
    for (int a = 0; a < (d3 ? 3 : 2); ++a) {
        switch (f) {
        case Family::DM: in[a] = out[a] + 2 * kDMConvs; break;
        case Family::KK: in[a] = out[a] + 60; break;
        default: break;
        }
    }
    return in;
}

} // namespace

Vec3i default_output_size(Family f, Dimensionality d)
{
    const bool d3 = d == Dimensionality::D3;
    int o = 32;
    switch (f) {
    case Family::DM: o = d3 ? 14 : 9; break;
    case Family::KK: o = d3 ? 9 : 15; break;
    case Family::UNet:
    case Family::UResNet: o = 32; break;
    }
    return {o, o, d3 ? o : 1};
}

ArchitectureSpec build_spec(Family family, Dimensionality dim, int in_channels,
                            const std::optional<PatchConfig>& patch_config)
{
    if (in_channels < 1) throw std::invalid_argument("build_spec: in_channels must be >= 1");
    const double scale = patch_config ? patch_config->width_scale : 1.0;
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw std::invalid_argument("build_spec: width_scale must be positive");
    const bool d3 = dim == Dimensionality::D3;

    ArchitectureSpec spec;
    spec.family = family;
    spec.dimensionality = dim;
    spec.in_channels = in_channels;
    spec.width_scale = scale;
    spec.output_size =
        (patch_config && patch_config->output_size) ? *patch_config->output_size : default_output_size(family, dim);

    const Vec3i& out = spec.output_size;
    if (!d3 && out[2] != 1) throw ShapeError("build_spec: 2D specs need output z extent 1, got " + to_string(out));
    for (int a = 0; a < 3; ++a)
        if (out[a] < 1) throw ShapeError("build_spec: output size must be positive");
    const int planar_axes = d3 ? 3 : 2;
    if (is_u_shaped(family)) {
        const int div = 1 << kUPools;
        for (int a = 0; a < planar_axes; ++a)
            if (out[a] % div != 0)
                throw ShapeError("build_spec: " + std::string(to_string(family)) + " patch " + to_string(out) +
                                 " must be divisible by " + std::to_string(div) + " per axis");
    }
    if (family == Family::KK)
        for (int a = 0; a < planar_axes; ++a)
            if (out[a] % kKKFactor != 0)
                throw ShapeError("build_spec: KK output " + to_string(out) + " must be divisible by 3 per axis");
    spec.input_size = input_for_output(family, out, d3);

    GraphBuilder g(dim, scale);
    switch (family) {
    case Family::DM: build_dm(g, in_channels); break;
    case Family::KK: build_kk(g, in_channels); break;
    case Family::UNet: build_unet(g, in_channels); break;
    case Family::UResNet: build_uresnet(g, in_channels); break;
    }
    g.head(g.layers.back().id, spec.num_classes);
    spec.layers = std::move(g.layers);

    validate_spec(spec);
    if (output_shape(spec, spec.input_size) != spec.output_size)
        throw ShapeError("build_spec: internal geometry mismatch");
    return spec;
}

std::vector<LayerShape> infer_shapes(const ArchitectureSpec& spec, const Vec3i& input_size)
{
    std::map<std::string, std::size_t> index;
    std::vector<LayerShape> shapes;
    shapes.reserve(spec.layers.size());
    auto fail = [](const LayerSpec& l, const std::string& why) {
        throw ShapeError("layer '" + l.id + "' (" + std::string(to_string(l.kind)) + "): " + why);
    };
    for (const LayerSpec& l : spec.layers) {
        std::vector<const LayerShape*> ins;
        for (const auto& name : l.inputs) {
            auto it = index.find(name);
            if (it == index.end()) fail(l, "unknown input '" + name + "'");
            ins.push_back(&shapes[it->second]);
        }
        const std::size_t expected = (l.kind == LayerKind::Input)                                  ? 0
                                     : (l.kind == LayerKind::Concat || l.kind == LayerKind::Add) ? ins.size()
                                                                                                 : 1;
        if (ins.size() != expected || (expected == 0 && l.kind != LayerKind::Input))
            fail(l, "wrong number of inputs");
        if ((l.kind == LayerKind::Concat || l.kind == LayerKind::Add) && ins.size() < 2)
            fail(l, "needs at least two inputs");

        LayerShape s;
        switch (l.kind) {
        case LayerKind::Input:
            s = {l.channels_out, input_size};
            break;
        case LayerKind::Conv:
        case LayerKind::SoftmaxHead:
            s.channels = l.channels_out;
            s.dims = ins[0]->dims;
            if (l.padding == Padding::Valid)
                for (int a = 0; a < 3; ++a) s.dims[a] -= l.kernel[a] - 1;
            break;
        case LayerKind::Deconv:
        case LayerKind::Upsample:
            s.channels = l.kind == LayerKind::Deconv ? l.channels_out : ins[0]->channels;
            for (int a = 0; a < 3; ++a) s.dims[a] = ins[0]->dims[a] * l.stride[a];
            break;
        case LayerKind::MaxPool:
        case LayerKind::Downsample:
            s.channels = ins[0]->channels;
            for (int a = 0; a < 3; ++a) {
                if (ins[0]->dims[a] % l.stride[a] != 0)
                    fail(l, "extent " + to_string(ins[0]->dims) + " not divisible by " + to_string(l.stride));
                s.dims[a] = ins[0]->dims[a] / l.stride[a];
            }
            break;
        case LayerKind::Activation:
        case LayerKind::BatchNorm:
            s = *ins[0];
            break;
        case LayerKind::Crop:
            s.channels = ins[0]->channels;
            for (int a = 0; a < 3; ++a) s.dims[a] = ins[0]->dims[a] - 2 * l.crop[a];
            break;
        case LayerKind::Concat:
            s = {0, ins[0]->dims};
            for (const auto* in : ins) {
                if (in->dims != s.dims) fail(l, "inputs differ in spatial shape");
                s.channels += in->channels;
            }
            break;
        case LayerKind::Add:
            s = *ins[0];
            for (const auto* in : ins)
                if (in->dims != s.dims || in->channels != s.channels) fail(l, "inputs differ in shape");
            break;
        }
        for (int a = 0; a < 3; ++a)
            if (s.dims[a] < 1) fail(l, "non-positive extent for input " + to_string(input_size));
        index[l.id] = shapes.size();
        shapes.push_back(s);
    }
    return shapes;
}

void validate_spec(const ArchitectureSpec& spec)
{
    if (spec.layers.empty()) throw std::invalid_argument("spec has no layers");
    if (spec.layers.front().kind != LayerKind::Input) throw std::invalid_argument("first layer must be the input");
    if (spec.layers.back().kind != LayerKind::SoftmaxHead)
        throw std::invalid_argument("last layer must be the softmax head");
    std::set<std::string> seen;
    int inputs = 0, heads = 0;
    for (const auto& l : spec.layers) {
        if (!seen.insert(l.id).second) throw std::invalid_argument("duplicate layer id '" + l.id + "'");
        for (const auto& name : l.inputs)
            if (!seen.count(name) || name == l.id)
                throw std::invalid_argument("layer '" + l.id + "' reads '" + name + "' which is not defined before it");
        inputs += l.kind == LayerKind::Input;
        heads += l.kind == LayerKind::SoftmaxHead;
        const bool has_width = l.kind == LayerKind::Conv || l.kind == LayerKind::Deconv ||
                               l.kind == LayerKind::SoftmaxHead || l.kind == LayerKind::Input;
        if (has_width && l.channels_out < 1)
            throw std::invalid_argument("layer '" + l.id + "' needs channels_out >= 1");
    }
    if (inputs != 1 || heads != 1) throw std::invalid_argument("spec needs exactly one input and one softmax head");
    if (spec.layers.front().channels_out != spec.in_channels)
        throw std::invalid_argument("input layer width differs from in_channels");
    if (spec.layers.back().channels_out != spec.num_classes)
        throw std::invalid_argument("softmax head width differs from num_classes");
    infer_shapes(spec, spec.input_size);
}

Vec3i output_shape(const ArchitectureSpec& spec, const Vec3i& input_size)
{
    return infer_shapes(spec, input_size).back().dims;
}

std::vector<std::int64_t> layer_parameter_counts(const ArchitectureSpec& spec)
{
    const auto shapes = infer_shapes(spec, spec.input_size);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) index[spec.layers[i].id] = i;

    std::vector<std::int64_t> counts(spec.layers.size(), 0);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        const std::int64_t cin = l.inputs.empty() ? 0 : shapes[index.at(l.inputs[0])].channels;
        const std::int64_t kvol = std::int64_t(l.kernel[0]) * l.kernel[1] * l.kernel[2];
        switch (l.kind) {
        case LayerKind::Conv:
        case LayerKind::Deconv:
        case LayerKind::SoftmaxHead:
            counts[i] = kvol * cin * l.channels_out + l.channels_out;
            break;
        case LayerKind::BatchNorm:
            counts[i] = 2 * cin;
            break;
        case LayerKind::Activation:
            if (l.activation == ActivationKind::PReLU)
                counts[i] = std::int64_t(shapes[i].channels) * std::int64_t(voxel_count(shapes[i].dims));
            break;
        default:
            break;
        }
    }
    return counts;
}

std::int64_t count_parameters(const ArchitectureSpec& spec)
{
    std::int64_t total = 0;
    for (auto c : layer_parameter_counts(spec)) total += c;
    return total;
}

nlohmann::json spec_to_json(const ArchitectureSpec& spec)
{
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : spec.layers) {
        nlohmann::json j{{"id", l.id}, {"kind", to_string(l.kind)}, {"inputs", l.inputs}};
        switch (l.kind) {
        case LayerKind::Input:
            j["channels_out"] = l.channels_out;
            break;
        case LayerKind::Conv:
        case LayerKind::SoftmaxHead:
            j["kernel"] = l.kernel;
            j["channels_out"] = l.channels_out;
            j["padding"] = l.padding == Padding::Valid ? "valid" : "same";
            break;
        case LayerKind::Deconv:
            j["kernel"] = l.kernel;
            j["stride"] = l.stride;
            j["channels_out"] = l.channels_out;
            break;
        case LayerKind::MaxPool:
        case LayerKind::Downsample:
        case LayerKind::Upsample:
            j["stride"] = l.stride;
            break;
        case LayerKind::Activation:
            j["activation"] = l.activation == ActivationKind::ReLU ? "relu" : "prelu";
            break;
        case LayerKind::Crop:
            j["crop"] = l.crop;
            break;
        default:
            break;
        }
        layers.push_back(std::move(j));
    }
    return {{"family", to_string(spec.family)},
            {"dimensionality", to_string(spec.dimensionality)},
            {"in_channels", spec.in_channels},
            {"num_classes", spec.num_classes},
            {"width_scale", spec.width_scale},
            {"input_size", spec.input_size},
            {"output_size", spec.output_size},
            {"parameter_count", count_parameters(spec)},
            {"layers", std::move(layers)}};
}

ArchitectureSpec spec_from_json(const nlohmann::json& j)
{
    ArchitectureSpec spec;
    spec.family = family_from_string(j.at("family").get<std::string>());
    spec.dimensionality = dimensionality_from_string(j.at("dimensionality").get<std::string>());
    spec.in_channels = j.at("in_channels").get<int>();
    spec.num_classes = j.at("num_classes").get<int>();
    spec.width_scale = j.value("width_scale", 1.0);
    spec.input_size = j.at("input_size").get<Vec3i>();
    spec.output_size = j.at("output_size").get<Vec3i>();
    for (const auto& jl : j.at("layers")) {
        LayerSpec l;
        l.id = jl.at("id").get<std::string>();
        l.kind = layer_kind_from_string(jl.at("kind").get<std::string>());
        l.inputs = jl.at("inputs").get<std::vector<std::string>>();
        if (jl.contains("kernel")) l.kernel = jl["kernel"].get<Vec3i>();
        if (jl.contains("stride")) l.stride = jl["stride"].get<Vec3i>();
        if (jl.contains("channels_out")) l.channels_out = jl["channels_out"].get<int>();
        if (jl.contains("padding")) l.padding = jl["padding"] == "same" ? Padding::Same : Padding::Valid;
        if (jl.contains("activation")) l.activation = jl["activation"] == "prelu" ? ActivationKind::PReLU : ActivationKind::ReLU;
        if (jl.contains("crop")) l.crop = jl["crop"].get<Vec3i>();
        if (l.kind == LayerKind::MaxPool || l.kind == LayerKind::Downsample || l.kind == LayerKind::Upsample)
            l.kernel = l.stride;
        spec.layers.push_back(std::move(l));
    }
    validate_spec(spec);
    return spec;
}

} // namespace tseg
