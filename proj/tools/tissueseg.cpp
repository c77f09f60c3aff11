#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tissueseg/case_io.hpp"
#include "tissueseg/checkpoint.hpp"
#include "tissueseg/errors.hpp"
#include "tissueseg/experiment.hpp"
#include "tissueseg/inference.hpp"
#include "tissueseg/metrics.hpp"
#include "tissueseg/nifti.hpp"
#include "tissueseg/phantom.hpp"
#include "tissueseg/preprocess.hpp"
#include "tissueseg/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tseg;

namespace {

// Exit codes: 1 runtime failure, 2 bad usage or config, 3 I/O, 4 bad input data.
enum Exit { kOk = 0, kRuntime = 1, kUsage = 2, kIo = 3, kData = 4 };

void log(const std::string& msg) { std::fprintf(stderr, "[tissueseg] %s\n", msg.c_str()); }

void write_json(const fs::path& path, const json& j)
{
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << j.dump(2) << "\n";
}

Vec3i parse_dims(const std::vector<int>& v)
{
    if (v.size() == 1) return {v[0], v[0], v[0]};
    if (v.size() == 3) return {v[0], v[1], v[2]};
    throw ConfigError("--dims takes 1 or 3 integers");
}

struct PhantomArgs {
    std::uint64_t seed = 1;
    std::vector<int> dims{64};
    double sigma = 0.0;
    int modalities = 1;
    int count = 1;
    std::string output;
};

int run_phantom(const PhantomArgs& a)
{
    const Vec3i dims = parse_dims(a.dims);
    for (int i = 0; i < a.count; ++i) {
        const Case c = generate_phantom(a.seed + std::uint64_t(i), dims, a.sigma, a.modalities);
        const CaseFiles f = save_case(c, a.output);
        log("wrote " + f.case_id + " to " + a.output);
    }
    return kOk;
}

struct TrainArgs {
    std::string config;
    std::string family = "UNet";
    std::string dim = "3D";
    std::string output;
    std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a)
{
    ExperimentConfig cfg = load_experiment_config(a.config);
    if (a.seed) cfg.seed = *a.seed;
    std::vector<Case> cases;
    for (const auto& c : load_dataset(cfg)) cases.push_back(preprocess_case(c));

    Setting s;
    s.family = family_from_string(a.family);
    s.dim = dimensionality_from_string(a.dim);
    s.overlap_train = cfg.overlap_train;
    for (std::size_t i = 0; i < cases.front().modality_count(); ++i) s.channels.push_back(int(i));
    const ArchitectureSpec spec = setting_spec(cfg, s);

    std::vector<std::size_t> idx(cases.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<std::size_t> tr = idx, va = idx;
    if (idx.size() >= 2) std::tie(tr, va) = split_dataset(idx, cfg.train.val_fraction, derive_seed(cfg.seed, "cli/split"));
    auto collect = [&](const std::vector<std::size_t>& which) {
        std::vector<TrainingSample> out;
        for (auto i : which) {
            auto part = extract_training_samples(cases[i], plan_grid(cases[i].dims(), spec.output_size, s.overlap_train),
                                                 spec.input_size, spec.output_size);
            std::move(part.begin(), part.end(), std::back_inserter(out));
        }
        return out;
    };
    const auto train = collect(tr);
    const auto val = collect(va);

    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, "cli/shuffle");
    Model model(spec, derive_seed(cfg.seed, "cli/init"));
    log("training " + std::string(to_string(spec.family)) + " " + std::string(to_string(spec.dimensionality)) + " (" +
        std::to_string(model.parameter_count()) + " parameters) on " + std::to_string(train.size()) + " patches");
    const TrainReport report = train_model(model, train, val, tc, [](int e, double tl, double vl) {
        log("epoch " + std::to_string(e) + " train " + std::to_string(tl) + " val " + std::to_string(vl));
    });

    fs::create_directories(a.output);
    json extra{{"train", to_json(tc)}, {"overlap_train", to_string(s.overlap_train)}};
    save_checkpoint(model, fs::path(a.output) / "model.tsck", extra);
    write_json(fs::path(a.output) / "train_report.json", to_json(report));
    log("wrote " + (fs::path(a.output) / "model.tsck").string());
    return kOk;
}

struct SegmentArgs {
    std::string model;
    std::vector<std::string> modalities;
    std::string mask;
    std::string overlap = "high";
    std::string output;
    std::string fractions_dir;
    int jobs = 1;
};

int run_segment(const SegmentArgs& a)
{
    LoadedCheckpoint ck = load_checkpoint(a.model);
    CaseFiles files;
    for (const auto& m : a.modalities) files.modalities.emplace_back(m);
    files.mask = a.mask;
    const Case c = preprocess_case(load_case(files));
    SegmentOptions so;
    so.jobs = a.jobs;
    const Segmentation seg = segment_case_detailed(ck.model, c, overlap_from_string(a.overlap), so);
    const std::array<double, 3> spacing = c.volumes().front().spacing();
    write_label_map(a.output, seg.labels, spacing);
    log("wrote " + a.output + " from " + std::to_string(seg.plan.origins.size()) + " patches");
    if (!a.fractions_dir.empty()) {
        fs::create_directories(a.fractions_dir);
        const auto fr = vote_fractions(seg.votes);
        for (int k = 0; k < kNumClasses; ++k)
            write_nifti(fs::path(a.fractions_dir) / ("votes_class" + std::to_string(k) + ".nii.gz"), fr[std::size_t(k)],
                        NiftiGeometry::with_spacing(spacing), "vote fraction");
    }
    return kOk;
}

int run_evaluate(const std::string& gt, const std::string& seg, const std::string& output)
{
    const DSCResult r = evaluate_case(read_label_map(gt), read_label_map(seg), fs::path(gt).stem().string());
    json j{{"ground_truth", gt}, {"segmentation", seg}, {"dsc", json::object()}};
    for (const auto& [t, v] : r.per_class) j["dsc"][std::string(to_string(t))] = v;
    if (output.empty())
        std::cout << j.dump(2) << "\n";
    else
        write_json(output, j);
    return kOk;
}

struct ExperimentArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string output;
    std::optional<int> jobs;
};

int run_experiment_verb(const ExperimentArgs& a)
{
    ExperimentConfig cfg = load_experiment_config(a.config);
    if (a.seed) cfg.seed = *a.seed;
    if (a.jobs) cfg.jobs = *a.jobs;
    if (!a.output.empty()) cfg.output_dir = a.output;
    const MetricsBundle bundle = run_experiment(cfg, log);
    emit_report(bundle, cfg.output_dir);
    for (const auto& row : summarize(bundle))
        std::printf("%-40s %-4s %.4f +- %.4f\n", bundle.settings[row.setting].label(bundle.modality_tags).c_str(),
                    std::string(to_string(row.cls)).c_str(), row.mean, row.std);
    log("report written to " + cfg.output_dir.string());
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Brain tissue segmentation with patch-based fully convolutional networks"};
    app.require_subcommand(1);

    PhantomArgs pa;
    auto* phantom = app.add_subcommand("phantom", "Generate synthetic head phantoms as NIfTI files");
    phantom->add_option("--seed", pa.seed, "Seed of the first phantom");
    phantom->add_option("--dims", pa.dims, "Volume extent (one value or three)")->expected(1, 3);
    phantom->add_option("--sigma", pa.sigma, "Gaussian noise standard deviation");
    phantom->add_option("--modalities", pa.modalities, "Number of channels (1 or 2)");
    phantom->add_option("--count", pa.count, "Number of phantoms");
    phantom->add_option("--output", pa.output, "Output directory")->required();

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Train one architecture on every case of a dataset");
    train->add_option("--config", ta.config, "Experiment config (dataset, train and patch sections)")->required();
    train->add_option("--family", ta.family, "DM, KK, UNet or UResNet");
    train->add_option("--dim", ta.dim, "2D or 3D");
    train->add_option("--seed", ta.seed, "Override the config seed");
    train->add_option("--output", ta.output, "Output directory")->required();

    SegmentArgs sa;
    auto* segment = app.add_subcommand("segment", "Segment one case with a trained model");
    segment->add_option("--model", sa.model, "Checkpoint file")->required();
    segment->add_option("--modality", sa.modalities, "Modality image, repeat in training order")->required();
    segment->add_option("--mask", sa.mask, "Brain mask image")->required();
    segment->add_option("--overlap", sa.overlap, "null, medium or high");
    segment->add_option("--jobs", sa.jobs, "Worker threads");
    segment->add_option("--vote-fractions", sa.fractions_dir, "Also write per-class vote fractions here");
    segment->add_option("--output", sa.output, "Output label map (.nii or .nii.gz)")->required();

    std::string gt, seg, eval_out;
    auto* evaluate = app.add_subcommand("evaluate", "Per-class Dice between two label maps");
    evaluate->add_option("--gt", gt, "Ground-truth label map")->required();
    evaluate->add_option("--seg", seg, "Segmentation label map")->required();
    evaluate->add_option("--output", eval_out, "Write JSON here instead of stdout");

    ExperimentArgs ea;
    auto* experiment = app.add_subcommand("experiment", "Run a study and write the report");
    experiment->add_option("--config", ea.config, "Experiment config")->required();
    experiment->add_option("--seed", ea.seed, "Override the config seed");
    experiment->add_option("--output", ea.output, "Override the output directory");
    experiment->add_option("--jobs", ea.jobs, "Override the worker thread count");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*phantom) return run_phantom(pa);
        if (*train) return run_train(ta);
        if (*segment) return run_segment(sa);
        if (*evaluate) return run_evaluate(gt, seg, eval_out);
        if (*experiment) return run_experiment_verb(ea);
    } catch (const ConfigError& e) {
        log(std::string("config error: ") + e.what());
        return kUsage;
    } catch (const IoError& e) {
        log(std::string("i/o error: ") + e.what());
        return kIo;
    } catch (const DimensionMismatchError& e) {
        log(std::string("dimension mismatch: ") + e.what());
        return kData;
    } catch (const InvalidLabelError& e) {
        log(std::string("invalid label: ") + e.what());
        return kData;
    } catch (const DegenerateInputError& e) {
        log(std::string("degenerate input: ") + e.what());
        return kData;
    } catch (const std::exception& e) {
        log(std::string("error: ") + e.what());
        return kRuntime;
    }
    return kOk;
}
