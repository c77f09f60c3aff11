#include "tissueseg/case_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "tissueseg/errors.hpp"
#include "tissueseg/nifti.hpp"

namespace tseg {
namespace {

constexpr std::string_view kModalityTag = "tissueseg:modality=";

std::string stem_of(const std::filesystem::path& p)
{
    std::string name = p.filename().string();
    for (std::string_view ext : {".nii.gz", ".nii"})
        if (name.size() > ext.size() && name.ends_with(ext)) return name.substr(0, name.size() - ext.size());
    return p.stem().string();
}

std::optional<Modality> tag_from_description(const std::string& d)
{
    auto pos = d.find(kModalityTag);
    if (pos == std::string::npos) return std::nullopt;
    std::string rest = d.substr(pos + kModalityTag.size());
    rest = rest.substr(0, rest.find_first_of(" ;"));
    try {
        return modality_from_string(rest);
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
}

Grid3<std::uint8_t> to_labels(const NiftiImage& img, const std::filesystem::path& path,
                              const LabelMapping* mapping)
{
    Grid3<std::uint8_t> out(img.dims);
    for (std::size_t i = 0; i < img.voxels.size(); ++i) {
        const double v = img.voxels[i];
        if (v != std::floor(v))
            throw InvalidLabelError("'" + path.string() + "': non-integer label value");
        int label = int(v);
        if (mapping) {
            auto it = mapping->find(label);
            if (it != mapping->end()) label = it->second;
        }
        if (label < 0 || label >= kNumClasses)
            throw InvalidLabelError("'" + path.string() + "': label " + std::to_string(label) +
                                    " outside {0,1,2,3}");
        out[i] = std::uint8_t(label);
    }
    return out;
}

} // namespace

LabelMapping load_label_mapping(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open label mapping '" + path.string() + "'");
    LabelMapping m;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ss(line);
        int src, dst;
        if (!(ss >> src >> dst))
            throw IoError("'" + path.string() + "':" + std::to_string(lineno) + ": expected two integers");
        if (dst < 0 || dst >= kNumClasses)
            throw InvalidLabelError("'" + path.string() + "':" + std::to_string(lineno) +
                                    ": target label outside {0,1,2,3}");
        m[src] = dst;
    }
    return m;
}

Case load_case(const CaseFiles& files, const LabelMapping* mapping)
{
    if (files.modalities.empty()) throw std::invalid_argument("load_case: no modality files given");

    const NiftiImage mask_img = read_nifti(files.mask);
    const Vec3i dims = mask_img.dims;
    auto check = [&](const NiftiImage& img, const std::filesystem::path& p) {
        if (img.dims != dims)
            throw DimensionMismatchError("'" + p.string() + "' is " + to_string(img.dims) + ", mask '" +
                                             files.mask.string() + "' is " + to_string(dims),
                                         p.string());
    };

    std::vector<Volume> volumes;
    for (std::size_t i = 0; i < files.modalities.size(); ++i) {
        const auto& p = files.modalities[i];
        NiftiImage img = read_nifti(p);
        check(img, p);
        Modality tag = Modality::Synthetic;
        if (i < files.modality_tags.size())
            tag = files.modality_tags[i];
        else if (auto t = tag_from_description(img.description))
            tag = *t;
        Grid3<float> data(img.dims);
        for (std::size_t k = 0; k < img.voxels.size(); ++k) data[k] = float(img.voxels[k]);
        volumes.emplace_back(std::move(data), img.geometry.spacing, tag);
    }

    std::optional<LabelMap> gt;
    if (files.ground_truth) {
        NiftiImage img = read_nifti(*files.ground_truth);
        check(img, *files.ground_truth);
        gt.emplace(to_labels(img, *files.ground_truth, mapping));
    }

    MaskGrid mask(dims);
    for (std::size_t k = 0; k < mask_img.voxels.size(); ++k) mask[k] = mask_img.voxels[k] != 0.0 ? 1 : 0;

    std::string id = files.case_id.empty() ? stem_of(files.modalities.front()) : files.case_id;
    return Case(std::move(id), std::move(volumes), std::move(gt), std::move(mask));
}

CaseFiles save_case(const Case& c, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    CaseFiles files;
    files.case_id = c.case_id();
    const auto spacing = c.volumes().empty() ? std::array<double, 3>{1.0, 1.0, 1.0} : c.volumes()[0].spacing();
    for (std::size_t i = 0; i < c.volumes().size(); ++i) {
        const Volume& v = c.volumes()[i];
        auto p = dir / (c.case_id() + "_mod" + std::to_string(i) + ".nii.gz");
        write_nifti(p, v.data(), NiftiGeometry::with_spacing(v.spacing()),
                    std::string(kModalityTag) + std::string(to_string(v.modality())));
        files.modalities.push_back(p);
        files.modality_tags.push_back(v.modality());
    }
    if (c.ground_truth()) {
        auto p = dir / (c.case_id() + "_gt.nii.gz");
        write_label_map(p, *c.ground_truth(), spacing);
        files.ground_truth = p;
    }
    files.mask = dir / (c.case_id() + "_mask.nii.gz");
    write_nifti(files.mask, c.brain_mask(), NiftiGeometry::with_spacing(spacing), "brain mask");
    return files;
}

void write_label_map(const std::filesystem::path& path, const LabelMap& labels,
                     const std::array<double, 3>& spacing)
{
    write_nifti(path, labels.labels(), NiftiGeometry::with_spacing(spacing), "tissue labels");
}

LabelMap read_label_map(const std::filesystem::path& path, const LabelMapping* mapping)
{
    const NiftiImage img = read_nifti(path);
    return LabelMap(to_labels(img, path, mapping));
}

} // namespace tseg
