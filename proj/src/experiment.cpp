#include "tissueseg/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <memory>
#include <set>

#include "tissueseg/errors.hpp"
#include "tissueseg/inference.hpp"
#include "tissueseg/metrics.hpp"
#include "tissueseg/phantom.hpp"
#include "tissueseg/preprocess.hpp"

namespace tseg {

using nlohmann::json;

std::string_view to_string(Study s)
{
    switch (s) {
    case Study::Overlap: return "overlap";
    case Study::Modality: return "modality";
    case Study::Dimensionality: return "dimensionality";
    case Study::SingleRun: return "single_run";
    }
    return "single_run";
}

Study study_from_string(std::string_view s)
{
    for (Study st : {Study::Overlap, Study::Modality, Study::Dimensionality, Study::SingleRun})
        if (to_string(st) == s) return st;
    throw ConfigError("unknown study '" + std::string(s) + "'");
}

namespace {

std::string_view to_string(OverlapVary v)
{
    switch (v) {
    case OverlapVary::Both: return "both";
    case OverlapVary::Train: return "train";
    case OverlapVary::Test: return "test";
    }
    return "both";
}

OverlapVary vary_from_string(std::string_view s)
{
    if (s == "both") return OverlapVary::Both;
    if (s == "train") return OverlapVary::Train;
    if (s == "test") return OverlapVary::Test;
    throw ConfigError("overlap_vary must be both, train or test, got '" + std::string(s) + "'");
}

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed)
{
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; }))
            throw ConfigError("unknown key '" + where + "." + it.key() + "'");
}

template <class T>
T get_as(const json& j, const std::string& what)
{
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("'" + what + "' has the wrong type");
    }
}

/// Edge length (cube or square) or explicit triple.
Vec3i parse_extent(const json& j, const std::string& what)
{
    if (j.is_number_integer()) {
        const int e = j.get<int>();
        return {e, e, e};
    }
    if (j.is_array() && j.size() == 3) return get_as<Vec3i>(j, what);
    throw ConfigError("'" + what + "' must be an integer or a triple");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p)
{
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

template <class F>
auto wrap(const std::string& what, F&& f)
{
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("'" + what + "': " + e.what());
    }
}

} // namespace

ExperimentConfig experiment_config_from_json(const json& j, const std::filesystem::path& base_dir)
{
    only_keys(j, "config",
              {"study", "families", "dims", "overlap_train", "overlap_test", "overlap_vary", "dataset", "evaluation",
               "train", "patch", "sided", "seed", "jobs", "output_dir"});
    ExperimentConfig c;
    if (!j.contains("study")) throw ConfigError("missing required key 'study'");
    if (!j.contains("dataset")) throw ConfigError("missing required key 'dataset'");
    c.study = study_from_string(get_as<std::string>(j["study"], "study"));

    if (j.contains("families")) {
        c.families.clear();
        for (const auto& f : j["families"])
            c.families.push_back(wrap("families", [&] { return family_from_string(get_as<std::string>(f, "families")); }));
    }
    if (j.contains("dims")) {
        c.dims.clear();
        for (const auto& d : j["dims"])
            c.dims.push_back(wrap("dims", [&] { return dimensionality_from_string(get_as<std::string>(d, "dims")); }));
    }
    if (j.contains("overlap_train"))
        c.overlap_train = wrap("overlap_train", [&] { return overlap_from_string(get_as<std::string>(j["overlap_train"], "overlap_train")); });
    if (j.contains("overlap_test"))
        c.overlap_test = wrap("overlap_test", [&] { return overlap_from_string(get_as<std::string>(j["overlap_test"], "overlap_test")); });
    if (j.contains("overlap_vary")) c.overlap_vary = vary_from_string(get_as<std::string>(j["overlap_vary"], "overlap_vary"));

    const json& ds = j["dataset"];
    only_keys(ds, "dataset", {"phantom", "cases", "label_mapping"});
    if (ds.contains("phantom") == ds.contains("cases"))
        throw ConfigError("dataset needs exactly one of 'phantom' or 'cases'");
    if (ds.contains("phantom")) {
        const json& p = ds["phantom"];
        only_keys(p, "dataset.phantom", {"count", "dims", "noise_sigma", "modalities", "seed"});
        PhantomDataset ph;
        ph.count = get_as<int>(p.value("count", json(ph.count)), "dataset.phantom.count");
        if (p.contains("dims")) ph.dims = parse_extent(p["dims"], "dataset.phantom.dims");
        ph.noise_sigma = get_as<double>(p.value("noise_sigma", json(ph.noise_sigma)), "dataset.phantom.noise_sigma");
        ph.modalities = get_as<int>(p.value("modalities", json(ph.modalities)), "dataset.phantom.modalities");
        ph.seed = get_as<std::uint64_t>(p.value("seed", json(ph.seed)), "dataset.phantom.seed");
        c.phantom = ph;
    } else {
        FileDataset fd;
        for (const auto& jc : ds["cases"]) {
            only_keys(jc, "dataset.cases[]", {"id", "modalities", "modality_tags", "ground_truth", "mask"});
            CaseFiles f;
            f.case_id = get_as<std::string>(jc.value("id", json("")), "dataset.cases[].id");
            if (!jc.contains("modalities") || !jc.contains("mask") || !jc.contains("ground_truth"))
                throw ConfigError("dataset.cases[] needs 'modalities', 'ground_truth' and 'mask'");
            for (const auto& m : jc["modalities"]) f.modalities.push_back(resolve(base_dir, get_as<std::string>(m, "modalities")));
            if (jc.contains("modality_tags"))
                for (const auto& t : jc["modality_tags"])
                    f.modality_tags.push_back(wrap("modality_tags", [&] { return modality_from_string(get_as<std::string>(t, "modality_tags")); }));
            f.ground_truth = resolve(base_dir, get_as<std::string>(jc["ground_truth"], "ground_truth"));
            f.mask = resolve(base_dir, get_as<std::string>(jc["mask"], "mask"));
            fd.cases.push_back(std::move(f));
        }
        if (ds.contains("label_mapping"))
            fd.label_mapping = resolve(base_dir, get_as<std::string>(ds["label_mapping"], "dataset.label_mapping"));
        c.files = std::move(fd);
    }

    if (j.contains("evaluation")) {
        const json& e = j["evaluation"];
        only_keys(e, "evaluation", {"scheme", "test_fraction"});
        const auto scheme = get_as<std::string>(e.value("scheme", json("loocv")), "evaluation.scheme");
        if (scheme != "loocv" && scheme != "split") throw ConfigError("evaluation.scheme must be loocv or split");
        c.loocv = scheme == "loocv";
        c.test_fraction = get_as<double>(e.value("test_fraction", json(c.test_fraction)), "evaluation.test_fraction");
    }
    if (j.contains("train")) {
        c.train = wrap("train", [&] { return train_config_from_json(j["train"]); });
    }
    if (j.contains("patch")) {
        const json& p = j["patch"];
        only_keys(p, "patch", {"width_scale", "overrides"});
        c.width_scale = get_as<double>(p.value("width_scale", json(c.width_scale)), "patch.width_scale");
        if (p.contains("overrides")) {
            const json& o = p["overrides"];
            if (!o.is_object()) throw ConfigError("patch.overrides must be an object");
            for (auto it = o.begin(); it != o.end(); ++it) {
                const Family f = wrap("patch.overrides", [&] { return family_from_string(it.key()); });
                only_keys(it.value(), "patch.overrides." + it.key(), {"output_size", "width_scale"});
                PatchOverride po;
                if (it.value().contains("output_size"))
                    po.output_size = parse_extent(it.value()["output_size"], "patch.overrides." + it.key() + ".output_size");
                if (it.value().contains("width_scale"))
                    po.width_scale = get_as<double>(it.value()["width_scale"], "patch.overrides." + it.key() + ".width_scale");
                c.patch_overrides[f] = po;
            }
        }
    }
    if (j.contains("sided")) c.sided = wrap("sided", [&] { return sided_from_string(get_as<std::string>(j["sided"], "sided")); });
    if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j["seed"], "seed");
    if (j.contains("jobs")) c.jobs = get_as<int>(j["jobs"], "jobs");
    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, get_as<std::string>(j["output_dir"], "output_dir"));
    validate_experiment_config(c);
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path)
{
    std::ifstream is(path);
    if (!is) throw IoError("cannot read config " + path.string());
    json j;
    try {
        j = json::parse(is, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return experiment_config_from_json(j, path.parent_path());
}

json to_json(const ExperimentConfig& c)
{
    json j;
    j["study"] = to_string(c.study);
    for (Family f : c.families) j["families"].push_back(to_string(f));
    for (Dimensionality d : c.dims) j["dims"].push_back(to_string(d));
    j["overlap_train"] = to_string(c.overlap_train);
    j["overlap_test"] = to_string(c.overlap_test);
    j["overlap_vary"] = to_string(c.overlap_vary);
    if (c.phantom) {
        const auto& p = *c.phantom;
        j["dataset"]["phantom"] = {{"count", p.count}, {"dims", p.dims}, {"noise_sigma", p.noise_sigma},
                                   {"modalities", p.modalities}, {"seed", p.seed}};
    } else if (c.files) {
        auto& cases = j["dataset"]["cases"] = json::array();
        for (const auto& f : c.files->cases) {
            json jc{{"id", f.case_id}, {"mask", f.mask.string()}};
            for (const auto& m : f.modalities) jc["modalities"].push_back(m.string());
            for (Modality t : f.modality_tags) jc["modality_tags"].push_back(to_string(t));
            if (f.ground_truth) jc["ground_truth"] = f.ground_truth->string();
            cases.push_back(std::move(jc));
        }
        if (c.files->label_mapping) j["dataset"]["label_mapping"] = c.files->label_mapping->string();
    }
    j["evaluation"] = {{"scheme", c.loocv ? "loocv" : "split"}, {"test_fraction", c.test_fraction}};
    j["train"] = to_json(c.train);
    j["patch"]["width_scale"] = c.width_scale;
    for (const auto& [f, o] : c.patch_overrides) {
        json jo = json::object();
        if (o.output_size) jo["output_size"] = *o.output_size;
        if (o.width_scale) jo["width_scale"] = *o.width_scale;
        j["patch"]["overrides"][std::string(to_string(f))] = jo;
    }
    j["sided"] = to_string(c.sided);
    j["seed"] = c.seed;
    j["jobs"] = c.jobs;
    j["output_dir"] = c.output_dir.string();
    return j;
}

void validate_experiment_config(const ExperimentConfig& c)
{
    if (c.families.empty()) throw ConfigError("'families' must list at least one family");
    if (c.dims.empty()) throw ConfigError("'dims' must list at least one dimensionality");
    if (std::set<Family>(c.families.begin(), c.families.end()).size() != c.families.size())
        throw ConfigError("'families' lists a family twice");
    if (std::set<Dimensionality>(c.dims.begin(), c.dims.end()).size() != c.dims.size())
        throw ConfigError("'dims' lists a dimensionality twice");
    if (bool(c.phantom) == bool(c.files)) throw ConfigError("dataset needs exactly one of 'phantom' or 'cases'");
    std::size_t n_cases = 0;
    if (c.phantom) {
        const auto& p = *c.phantom;
        for (int d : p.dims)
            if (d < kMinPhantomExtent)
                throw ConfigError("dataset.phantom.dims must be >= " + std::to_string(kMinPhantomExtent) + " per axis");
        if (p.modalities < 1 || p.modalities > 2) throw ConfigError("dataset.phantom.modalities must be 1 or 2");
        if (!(p.noise_sigma >= 0.0)) throw ConfigError("dataset.phantom.noise_sigma must be >= 0");
        if (p.count < 1) throw ConfigError("dataset.phantom.count must be >= 1");
        n_cases = std::size_t(p.count);
        if (c.study == Study::Modality && p.modalities < 2)
            throw ConfigError("the modality study needs a dataset with at least 2 modalities");
    } else {
        n_cases = c.files->cases.size();
        for (const auto& f : c.files->cases) {
            if (f.modalities.empty()) throw ConfigError("dataset.cases[] lists no modality files");
            if (c.study == Study::Modality && f.modalities.size() < 2)
                throw ConfigError("the modality study needs a dataset with at least 2 modalities");
        }
    }
    if (c.loocv && n_cases < 3) throw ConfigError("leave-one-out evaluation needs at least 3 cases");
    if (!c.loocv) {
        if (n_cases < 2) throw ConfigError("split evaluation needs at least 2 cases");
        if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0))
            throw ConfigError("evaluation.test_fraction must lie in (0, 1)");
    }
    if (c.study == Study::Dimensionality && c.dims.size() != 2)
        throw ConfigError("the dimensionality study compares 2D and 3D; set dims to [\"2D\", \"3D\"]");
    if (!(c.width_scale > 0.0)) throw ConfigError("patch.width_scale must be positive");
    for (const auto& [f, o] : c.patch_overrides)
        if (o.width_scale && !(*o.width_scale > 0.0))
            throw ConfigError("patch.overrides." + std::string(to_string(f)) + ".width_scale must be positive");
    if (c.jobs < 1) throw ConfigError("jobs must be >= 1");
    c.train.validate();
    // patch geometry must be buildable for every requested setting
    for (Family f : c.families)
        for (Dimensionality d : c.dims) {
            Setting s{f, d, c.overlap_train, c.overlap_test, {0}, {}};
            try {
                setting_spec(c, s);
            } catch (const std::exception& e) {
                throw ConfigError("patch geometry for " + std::string(to_string(f)) + " " +
                                  std::string(to_string(d)) + ": " + e.what());
            }
        }
}

std::string Setting::modalities_label(const std::vector<std::string>& tags) const
{
    std::string s;
    for (int ch : channels) {
        if (!s.empty()) s += "+";
        s += std::size_t(ch) < tags.size() ? tags[std::size_t(ch)] : "ch" + std::to_string(ch);
    }
    return s;
}

std::string Setting::label(const std::vector<std::string>& tags) const
{
    return std::string(to_string(family)) + "_" + std::string(to_string(dim)) + "_" +
           std::string(tseg::to_string(overlap_train)) + "-" + std::string(tseg::to_string(overlap_test)) + "_" +
           modalities_label(tags);
}

std::vector<Setting> expand_settings(const ExperimentConfig& c, int modality_count)
{
    std::vector<int> all(static_cast<std::size_t>(modality_count));
    for (int i = 0; i < modality_count; ++i) all[std::size_t(i)] = i;
    std::vector<Setting> out;
    for (Family f : c.families)
        for (Dimensionality d : c.dims) {
            const std::string group = std::string(to_string(f)) + "_" + std::string(to_string(d));
            switch (c.study) {
            case Study::SingleRun:
                out.push_back({f, d, c.overlap_train, c.overlap_test, all, std::string(to_string(d))});
                break;
            case Study::Dimensionality:
                out.push_back({f, d, c.overlap_train, c.overlap_test, all, std::string(to_string(f))});
                break;
            case Study::Overlap:
                for (OverlapLevel l : {OverlapLevel::Null, OverlapLevel::Medium, OverlapLevel::High}) {
                    const OverlapLevel tr = c.overlap_vary == OverlapVary::Test ? c.overlap_train : l;
                    const OverlapLevel te = c.overlap_vary == OverlapVary::Train ? c.overlap_test : l;
                    out.push_back({f, d, tr, te, all, group});
                }
                break;
            case Study::Modality:
                if (modality_count < 2) throw ConfigError("the modality study needs at least 2 modalities");
                for (int m = 0; m < modality_count; ++m) out.push_back({f, d, c.overlap_train, c.overlap_test, {m}, group});
                out.push_back({f, d, c.overlap_train, c.overlap_test, all, group});
                break;
            }
        }
    // the dimensionality study reports families side by side
    if (c.study == Study::Dimensionality)
        std::stable_sort(out.begin(), out.end(), [](const Setting& a, const Setting& b) { return a.family < b.family; });
    return out;
}

std::vector<Comparison> compare_settings(const std::vector<Setting>& settings, const std::vector<MetricRow>& rows,
                                         Sided sided)
{
    std::vector<Comparison> out;
    for (std::size_t a = 0; a < settings.size(); ++a)
        for (std::size_t b = a + 1; b < settings.size(); ++b) {
            if (settings[a].group != settings[b].group) continue;
            for (Tissue t : kTissues) {
                std::map<std::string, double> va;
                for (const auto& r : rows)
                    if (r.setting == a && r.cls == t) va[r.case_id] = r.dsc;
                std::vector<double> xa, xb;
                for (const auto& r : rows)
                    if (r.setting == b && r.cls == t && va.count(r.case_id)) {
                        xa.push_back(va[r.case_id]);
                        xb.push_back(r.dsc);
                    }
                Comparison cmp;
                cmp.a = a;
                cmp.b = b;
                cmp.cls = t;
                for (double v : xa) cmp.mean_a += v / double(xa.size());
                for (double v : xb) cmp.mean_b += v / double(xb.size());
                cmp.test = wilcoxon_signed_rank(xa, xb, sided);
                out.push_back(cmp);
            }
        }
    return out;
}

std::uint64_t derive_seed(std::uint64_t base, const std::string& key)
{
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&](unsigned char ch) {
        h ^= ch;
        h *= 1099511628211ull;
    };
    for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(base >> (8 * i)));
    for (unsigned char ch : key) mix(ch);
    return h;
}

std::vector<Case> load_dataset(const ExperimentConfig& config)
{
    std::vector<Case> cases;
    if (config.phantom) {
        const auto& p = *config.phantom;
        for (int i = 0; i < p.count; ++i)
            cases.push_back(generate_phantom(p.seed + std::uint64_t(i), p.dims, p.noise_sigma, p.modalities));
    } else {
        LabelMapping mapping;
        if (config.files->label_mapping) mapping = load_label_mapping(*config.files->label_mapping);
        for (const auto& f : config.files->cases)
            cases.push_back(load_case(f, config.files->label_mapping ? &mapping : nullptr));
    }
    std::set<std::string> ids;
    for (const auto& c : cases) {
        if (!ids.insert(c.case_id()).second) throw ConfigError("duplicate case id '" + c.case_id() + "'");
        if (c.modality_count() != cases.front().modality_count())
            throw ConfigError("cases differ in modality count");
        if (!c.ground_truth()) throw ConfigError("case '" + c.case_id() + "' has no ground truth");
    }
    return cases;
}

ArchitectureSpec setting_spec(const ExperimentConfig& config, const Setting& s)
{
    PatchConfig pc;
    pc.width_scale = config.width_scale;
    if (auto it = config.patch_overrides.find(s.family); it != config.patch_overrides.end()) {
        if (it->second.width_scale) pc.width_scale = *it->second.width_scale;
        if (it->second.output_size) {
            Vec3i o = *it->second.output_size;
            if (s.dim == Dimensionality::D2) o[2] = 1;
            pc.output_size = o;
        }
    }
    return build_spec(s.family, s.dim, int(std::max<std::size_t>(1, s.channels.size())), pc);
}

namespace {

struct FoldSpec {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

std::string channels_key(const std::vector<int>& ch)
{
    std::string s = "ch";
    for (std::size_t i = 0; i < ch.size(); ++i) s += (i ? "+" : "") + std::to_string(ch[i]);
    return s;
}

std::string fold_key(std::size_t f)
{
    std::string s = std::to_string(f);
    return "fold" + std::string(s.size() < 2 ? 2 - s.size() : 0, '0') + s;
}

} // namespace

MetricsBundle run_experiment(const ExperimentConfig& config, const ProgressCallback& progress)
{
    validate_experiment_config(config);
    auto say = [&](const std::string& msg) {
        if (progress) progress(msg);
    };

    const std::vector<Case> raw = load_dataset(config);
    const int modality_count = int(raw.front().modality_count());
    if (config.study == Study::Modality && modality_count < 2)
        throw ConfigError("the modality study needs a dataset with at least 2 modalities");

    MetricsBundle bundle;
    bundle.config = config;
    for (const auto& v : raw.front().volumes()) bundle.modality_tags.emplace_back(to_string(v.modality()));
    // duplicated tags (e.g. two synthetic channels) are disambiguated by index
    if (std::set<std::string>(bundle.modality_tags.begin(), bundle.modality_tags.end()).size() !=
        bundle.modality_tags.size())
        for (std::size_t i = 0; i < bundle.modality_tags.size(); ++i) bundle.modality_tags[i] += std::to_string(i);
    bundle.settings = expand_settings(config, modality_count);

    std::vector<Case> cases;
    for (const auto& c : raw) cases.push_back(preprocess_case(c));

    std::vector<FoldSpec> folds;
    std::vector<std::size_t> idx(cases.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (config.loocv) {
        for (const auto& f : loocv_folds(idx)) folds.push_back({f.train, {f.test}});
    } else {
        auto [train, test] = split_dataset(idx, config.test_fraction, derive_seed(config.seed, "test-split"));
        std::sort(train.begin(), train.end());
        std::sort(test.begin(), test.end());
        folds.push_back({train, test});
    }

    json& prov_config = bundle.provenance["config"] = to_json(config);
    prov_config["modality_tags"] = bundle.modality_tags;
    json& seeds = bundle.provenance["seeds"] = json::object();
    json& folds_doc = bundle.provenance["folds"] = json::array();
    for (const auto& f : folds) {
        json jf{{"train", json::array()}, {"test", json::array()}};
        for (auto i : f.train) jf["train"].push_back(cases[i].case_id());
        for (auto i : f.test) jf["test"].push_back(cases[i].case_id());
        folds_doc.push_back(std::move(jf));
    }

    std::map<std::string, std::shared_ptr<Model>> trained;
    for (std::size_t si = 0; si < bundle.settings.size(); ++si) {
        const Setting& s = bundle.settings[si];
        const ArchitectureSpec spec = setting_spec(config, s);
        const std::string arch_key = std::string(to_string(s.family)) + "_" + std::string(to_string(s.dim)) + "_" +
                                     channels_key(s.channels);
        bundle.provenance["spec_" + arch_key] = spec_to_json(spec);
        const Vec3i dims = cases.front().dims();
        bundle.provenance["plan_" + arch_key] = {
            {"train", plan_to_json(plan_grid(dims, spec.output_size, s.overlap_train))},
            {"test", plan_to_json(plan_grid(dims, spec.output_size, s.overlap_test))},
            {"input_size", spec.input_size}};

        for (std::size_t fi = 0; fi < folds.size(); ++fi) {
            const FoldSpec& fold = folds[fi];
            const std::string key = arch_key + "_" + std::string(to_string(s.overlap_train)) + "_" + fold_key(fi);
            auto& model = trained[key];
            if (!model) {
                std::vector<std::size_t> tr = fold.train, va = fold.train;
                if (fold.train.size() >= 2) {
                    std::tie(tr, va) = split_dataset(fold.train, config.train.val_fraction, derive_seed(config.seed, key + "/split"));
                }
                auto collect = [&](const std::vector<std::size_t>& which) {
                    std::vector<TrainingSample> out;
                    for (auto i : which) {
                        const Case c = cases[i].select_modalities(s.channels);
                        auto part = extract_training_samples(c, plan_grid(c.dims(), spec.output_size, s.overlap_train),
                                                             spec.input_size, spec.output_size);
                        std::move(part.begin(), part.end(), std::back_inserter(out));
                    }
                    return out;
                };
                const auto train_samples = collect(tr);
                const auto val_samples = collect(va);
                TrainConfig tc = config.train;
                tc.seed = derive_seed(config.seed, key + "/shuffle");
                const std::uint64_t init_seed = derive_seed(config.seed, key + "/init");
                seeds[key] = {{"init", init_seed}, {"shuffle", tc.seed}};
                say("training " + key + " on " + std::to_string(train_samples.size()) + " patches");
                model = std::make_shared<Model>(spec, init_seed);
                const TrainReport report = train_model(*model, train_samples, val_samples, tc);
                json rep = to_json(report);
                rep["train_cases"] = json::array();
                rep["val_cases"] = json::array();
                for (auto i : tr) rep["train_cases"].push_back(cases[i].case_id());
                for (auto i : va) rep["val_cases"].push_back(cases[i].case_id());
                rep["train_patches"] = train_samples.size();
                rep["val_patches"] = val_samples.size();
                bundle.provenance["train_" + key] = std::move(rep);
            }
            for (auto ti : fold.test) {
                const Case c = cases[ti].select_modalities(s.channels);
                say("segmenting " + c.case_id() + " with " + s.label(bundle.modality_tags));
                SegmentOptions so;
                so.jobs = config.jobs;
                const LabelMap seg = segment_case(*model, c, s.overlap_test, so);
                const DSCResult r = evaluate_case(*c.ground_truth(), seg, c.case_id());
                for (const auto& [t, v] : r.per_class) bundle.rows.push_back({c.case_id(), si, t, v});
            }
        }
    }
    bundle.comparisons = compare_settings(bundle.settings, bundle.rows, config.sided);
    return bundle;
}

} // namespace tseg
