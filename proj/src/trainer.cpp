#include "tissueseg/trainer.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <numeric>

#include "tissueseg/errors.hpp"

namespace tseg {

void TrainConfig::validate() const
{
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in (0, 1)");
    if (batch_size < 0) throw ConfigError("batch_size must be >= 0");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
}

int TrainConfig::effective_batch_size(Family f) const
{
    if (batch_size > 0) return batch_size;
    return is_u_shaped(f) ? 8 : 32;
}

nlohmann::json to_json(const TrainConfig& c)
{
    return {{"max_epochs", c.max_epochs}, {"patience", c.patience},       {"val_fraction", c.val_fraction},
            {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate}, {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j)
{
    if (!j.is_object()) throw ConfigError("train must be an object");
    static const char* const keys[] = {"max_epochs", "patience", "val_fraction", "batch_size", "learning_rate", "seed"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find_if(std::begin(keys), std::end(keys), [&](const char* k) { return it.key() == k; }) == std::end(keys))
            throw ConfigError("unknown key 'train." + it.key() + "'");
    TrainConfig c;
    try {
        c.max_epochs = j.value("max_epochs", c.max_epochs);
        c.patience = j.value("patience", c.patience);
        c.val_fraction = j.value("val_fraction", c.val_fraction);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("train: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json to_json(const TrainReport& r)
{
    nlohmann::json j{{"epochs_run", r.epochs_run},         {"train_loss_curve", r.train_loss_curve},
                     {"val_loss_curve", r.val_loss_curve}, {"stopped_early", r.stopped_early},
                     {"best_epoch", r.best_epoch},         {"best_val_loss", r.best_val_loss}};
    if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
    return j;
}

namespace {

void check_loss_shapes(const nn::Tensor& t, const std::vector<std::uint8_t>& targets, const std::vector<float>& weights)
{
    const std::size_t n = std::size_t(t.n) * t.spatial();
    if (targets.size() != n || weights.size() != n)
        throw ShapeError("weighted_loss: targets/weights do not match the prediction grid");
}

} // namespace

std::optional<double> weighted_loss(const nn::Tensor& probabilities, const std::vector<std::uint8_t>& targets,
                                    const std::vector<float>& weights)
{
    check_loss_shapes(probabilities, targets, weights);
    const std::size_t v = probabilities.spatial();
    double sum = 0.0;
    std::size_t count = 0;
    for (int n = 0; n < probabilities.n; ++n) {
        const float* p = probabilities.sample(n);
        for (std::size_t i = 0; i < v; ++i) {
            const std::size_t k = std::size_t(n) * v + i;
            if (!(weights[k] > 0.f)) continue;
            if (targets[k] >= probabilities.c) throw InvalidLabelError("weighted_loss: target outside class set");
            sum -= double(weights[k]) * std::log(double(p[std::size_t(targets[k]) * v + i]));
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    return sum / double(count);
}

std::optional<LossGradient> weighted_loss_gradient(const nn::Tensor& logits, const std::vector<std::uint8_t>& targets,
                                                   const std::vector<float>& weights)
{
    check_loss_shapes(logits, targets, weights);
    const std::size_t count = std::size_t(std::count_if(weights.begin(), weights.end(), [](float w) { return w > 0.f; }));
    if (count == 0) return std::nullopt;

    LossGradient out;
    out.counted = count;
    out.grad = nn::Tensor(logits.n, logits.c, logits.dims);
    const std::size_t v = logits.spatial();
    const int C = logits.c;
    const double inv = 1.0 / double(count);
    std::vector<double> z(static_cast<std::size_t>(C));
    for (int n = 0; n < logits.n; ++n) {
        const float* l = logits.sample(n);
        float* g = out.grad.sample(n);
        for (std::size_t i = 0; i < v; ++i) {
            const std::size_t k = std::size_t(n) * v + i;
            if (!(weights[k] > 0.f)) continue;
            double m = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < C; ++c) m = std::max(m, z[std::size_t(c)] = l[std::size_t(c) * v + i]);
            double s = 0.0;
            for (int c = 0; c < C; ++c) s += std::exp(z[std::size_t(c)] - m);
            const double lse = m + std::log(s);
            const int t = targets[k];
            if (t >= C) throw InvalidLabelError("weighted_loss: target outside class set");
            const double w = weights[k];
            out.loss += w * (lse - z[std::size_t(t)]) * inv;
            for (int c = 0; c < C; ++c) {
                const double p = std::exp(z[std::size_t(c)] - lse);
                g[std::size_t(c) * v + i] = float(w * (p - (c == t ? 1.0 : 0.0)) * inv);
            }
        }
    }
    return out;
}

EarlyStopping::EarlyStopping(int patience) : patience_(patience)
{
    if (patience < 1) throw std::invalid_argument("EarlyStopping: patience must be >= 1");
}

bool EarlyStopping::update(double val_loss)
{
    ++epoch_;
    improved_ = epoch_ == 1 || val_loss < best_;
    if (improved_) {
        best_ = val_loss;
        best_epoch_ = epoch_;
        since_best_ = 0;
        return false;
    }
    return ++since_best_ >= patience_;
}

Adam::Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

void Adam::step(Model& model)
{
    auto& params = model.parameters();
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.value.size(), 0.f);
            v_.emplace_back(p.value.size(), 0.f);
        }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, double(t_));
    const double c2 = 1.0 - std::pow(b2_, double(t_));
    const float step = float(lr_ * std::sqrt(c2) / c1);
    const float b1 = float(b1_), b2 = float(b2_);
    const float eps = float(eps_ * std::sqrt(c2));
    for (std::size_t k = 0; k < params.size(); ++k) {
        float* w = params[k].value.data();
        const float* g = params[k].grad.data();
        float* m = m_[k].data();
        float* v = v_[k].data();
        for (std::size_t i = 0; i < params[k].value.size(); ++i) {
            m[i] = b1 * m[i] + (1.f - b1) * g[i];
            v[i] = b2 * v[i] + (1.f - b2) * g[i] * g[i];
            w[i] -= step * m[i] / (std::sqrt(v[i]) + eps);
        }
    }
}

nn::Tensor make_batch(const std::vector<TrainingSample>& samples, const std::vector<std::size_t>& order,
                      std::size_t begin, std::size_t end, std::vector<std::uint8_t>* targets,
                      std::vector<float>* weights)
{
    const TrainingSample& first = samples[order[begin]];
    nn::Tensor batch(int(end - begin), first.channels, first.input_size);
    if (targets) targets->clear();
    if (weights) weights->clear();
    for (std::size_t i = begin; i < end; ++i) {
        const TrainingSample& s = samples[order[i]];
        if (s.input_size != first.input_size || s.channels != first.channels || s.output_size != first.output_size)
            throw ShapeError("make_batch: samples differ in shape");
        std::memcpy(batch.sample(int(i - begin)), s.input.data(), s.input.size() * sizeof(float));
        if (targets) targets->insert(targets->end(), s.target.begin(), s.target.end());
        if (weights) weights->insert(weights->end(), s.weight.begin(), s.weight.end());
    }
    return batch;
}

double evaluate_loss(const Model& model, const std::vector<TrainingSample>& samples, int batch_size)
{
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    double sum = 0.0;
    std::size_t count = 0;
    std::vector<std::uint8_t> t;
    std::vector<float> w;
    for (std::size_t b = 0; b < order.size(); b += std::size_t(batch_size)) {
        const std::size_t e = std::min(order.size(), b + std::size_t(batch_size));
        const nn::Tensor x = make_batch(samples, order, b, e, &t, &w);
        if (auto lg = weighted_loss_gradient(model.logits(x), t, w)) {
            sum += lg->loss * double(lg->counted);
            count += lg->counted;
        }
    }
    if (count == 0) throw DegenerateInputError("evaluate_loss: no weighted voxels");
    return sum / double(count);
}

TrainReport train_model(Model& model, const std::vector<TrainingSample>& train,
                        const std::vector<TrainingSample>& val, const TrainConfig& config,
                        const EpochCallback& on_epoch)
{
    config.validate();
    if (train.empty() || val.empty()) throw std::invalid_argument("train_model: empty sample set");
    const int batch = config.effective_batch_size(model.spec().family);

    TrainReport report;
    Adam opt(config.learning_rate);
    EarlyStopping stopper(config.patience);
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    Model::State best = model.state();
    std::vector<std::uint8_t> t;
    std::vector<float> w;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t b = 0; b < order.size(); b += std::size_t(batch)) {
            const std::size_t e = std::min(order.size(), b + std::size_t(batch));
            const nn::Tensor x = make_batch(train, order, b, e, &t, &w);
            auto trace = model.forward_train(x);
            auto lg = weighted_loss_gradient(trace.logits(), t, w);
            if (!lg) continue;
            if (!std::isfinite(lg->loss)) {
                report.epochs_run = epoch;
                report.diagnostic = "non-finite training loss in epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(b / std::size_t(batch) + 1);
                throw DivergenceError(report.diagnostic, report);
            }
            model.zero_grad();
            model.backward(trace, lg->grad);
            opt.step(model);
            sum += lg->loss * double(lg->counted);
            count += lg->counted;
        }
        const double train_loss = count ? sum / double(count) : 0.0;
        const double val_loss = evaluate_loss(model, val, batch);
        report.epochs_run = epoch;
        report.train_loss_curve.push_back(train_loss);
        report.val_loss_curve.push_back(val_loss);
        if (on_epoch) on_epoch(epoch, train_loss, val_loss);
        if (!std::isfinite(val_loss)) {
            report.diagnostic = "non-finite validation loss in epoch " + std::to_string(epoch);
            throw DivergenceError(report.diagnostic, report);
        }
        const bool stop = stopper.update(val_loss);
        if (stopper.improved_last()) best = model.state();
        if (stop) {
            report.stopped_early = epoch < config.max_epochs;
            break;
        }
    }
    model.load_state(best);
    report.best_epoch = stopper.best_epoch();
    report.best_val_loss = stopper.best_value();
    return report;
}

} // namespace tseg
