#include "tissueseg/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "tissueseg/errors.hpp"

namespace tseg {
namespace {

constexpr std::array<char, 8> kMagic{'T', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::ostream& os, const T& v)
{
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is)
{
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

} // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path, const nlohmann::json& extra)
{
    nlohmann::json header{{"spec", spec_to_json(model.spec())}, {"seed", model.seed()}, {"extra", extra}};
    auto& tensors = header["tensors"] = nlohmann::json::array();
    for (const auto& p : model.parameters()) tensors.push_back({{"name", p.name}, {"size", p.value.size()}});
    for (const auto& b : model.buffers()) tensors.push_back({{"name", b.name}, {"size", b.value.size()}});
    const std::string text = header.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write checkpoint " + path.string());
    os.write(kMagic.data(), kMagic.size());
    put(os, kVersion);
    put(os, std::uint64_t(text.size()));
    os.write(text.data(), std::streamsize(text.size()));
    for (const auto& p : model.parameters())
        os.write(reinterpret_cast<const char*>(p.value.data()), std::streamsize(p.value.size() * sizeof(float)));
    for (const auto& b : model.buffers())
        os.write(reinterpret_cast<const char*>(b.value.data()), std::streamsize(b.value.size() * sizeof(float)));
    if (!os) throw IoError("failed writing checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint " + path.string());
    std::array<char, 8> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kMagic) throw IoError(path.string() + " is not a checkpoint");
    const auto version = get<std::uint32_t>(is);
    if (version != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
    const auto len = get<std::uint64_t>(is);
    if (!is || len > (std::uint64_t(1) << 30)) throw IoError("corrupt checkpoint header in " + path.string());
    std::string text(len, '\0');
    is.read(text.data(), std::streamsize(len));

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt checkpoint header in " + path.string() + ": " + e.what());
    }
    Model model(spec_from_json(header.at("spec")), header.at("seed").get<std::uint64_t>());
    const auto& tensors = header.at("tensors");
    if (tensors.size() != model.parameters().size() + model.buffers().size())
        throw IoError("checkpoint tensor list does not match its architecture");

    std::size_t t = 0;
    auto read_into = [&](const std::string& name, std::vector<float>& dst) {
        const auto& meta = tensors[t++];
        if (meta.at("name") != name || meta.at("size").get<std::size_t>() != dst.size())
            throw IoError("checkpoint tensor '" + meta.at("name").get<std::string>() + "' does not match '" + name + "'");
        is.read(reinterpret_cast<char*>(dst.data()), std::streamsize(dst.size() * sizeof(float)));
        if (!is) throw IoError("truncated checkpoint " + path.string());
    };
    for (auto& p : model.parameters()) read_into(p.name, p.value);
    for (auto& b : model.buffers()) read_into(b.name, b.value);
    return {std::move(model), header.value("extra", nlohmann::json{})};
}

} // namespace tseg
