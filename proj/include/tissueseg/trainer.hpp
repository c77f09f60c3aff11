#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "json.hpp"

#include "tissueseg/model.hpp"
#include "tissueseg/sampling.hpp"

namespace tseg {

struct TrainConfig {
    int max_epochs = 20;
    int patience = 2;
    double val_fraction = 0.2;
    int batch_size = 0; ///< 0 selects 32 for DM/KK and 8 for UNet/UResNet
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;

    /// Throws ConfigError when a field is out of range.
    void validate() const;
    int effective_batch_size(Family f) const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct TrainReport {
    int epochs_run = 0;
    std::vector<double> train_loss_curve;
    std::vector<double> val_loss_curve;
    bool stopped_early = false;
    int best_epoch = 0; ///< 1-based
    double best_val_loss = 0.0;
    std::string diagnostic; ///< set when training aborted
};

nlohmann::json to_json(const TrainReport& r);

/// Non-finite loss during training. Carries the report up to the failure.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, TrainReport report)
        : std::runtime_error(what), report_(std::move(report)) {}
    const TrainReport& report() const { return report_; }

private:
    TrainReport report_;
};

/// Splits at item granularity: a seeded shuffle, then the first
/// max(1, round(val_fraction * n)) items go to validation.
template <class T>
std::pair<std::vector<T>, std::vector<T>> split_dataset(const std::vector<T>& items, double val_fraction,
                                                        std::uint64_t seed)
{
    if (items.size() < 2) throw std::invalid_argument("split_dataset: need at least two cases");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw std::invalid_argument("split_dataset: val_fraction must lie in (0, 1)");
    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i);
        std::swap(order[i], order[pick(rng)]);
    }
    std::size_t n_val = std::max<std::size_t>(1, std::size_t(std::llround(val_fraction * double(items.size()))));
    n_val = std::min(n_val, items.size() - 1);
    std::pair<std::vector<T>, std::vector<T>> out;
    for (std::size_t i = 0; i < order.size(); ++i) (i < n_val ? out.second : out.first).push_back(items[order[i]]);
    return out;
}

/// Mean of -w * log p(target) over voxels with w > 0. Probabilities are
/// (N, classes, dims); targets and weights are concatenated per sample.
/// Returns nullopt (skip the batch) when every weight is zero.
std::optional<double> weighted_loss(const nn::Tensor& probabilities, const std::vector<std::uint8_t>& targets,
                                    const std::vector<float>& weights);

struct LossGradient {
    double loss = 0.0;
    std::size_t counted = 0; ///< voxels with w > 0
    nn::Tensor grad;         ///< d(loss)/d(logits)
};

/// Same loss evaluated from logits (log-sum-exp form) with its gradient.
std::optional<LossGradient> weighted_loss_gradient(const nn::Tensor& logits, const std::vector<std::uint8_t>& targets,
                                                   const std::vector<float>& weights);

/// Improvement means a strictly lower value than the best so far.
class EarlyStopping {
public:
    explicit EarlyStopping(int patience);
    /// Records one epoch's validation loss; returns true when training should stop.
    bool update(double val_loss);
    int best_epoch() const { return best_epoch_; }
    double best_value() const { return best_; }
    bool improved_last() const { return improved_; }

private:
    int patience_;
    int epoch_ = 0;
    int best_epoch_ = 0;
    int since_best_ = 0;
    double best_ = 0.0;
    bool improved_ = false;
};

class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(Model& model);

private:
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

/// Stacks samples [begin, end) of `order` into one input batch.
nn::Tensor make_batch(const std::vector<TrainingSample>& samples, const std::vector<std::size_t>& order,
                      std::size_t begin, std::size_t end, std::vector<std::uint8_t>* targets,
                      std::vector<float>* weights);

/// Loss of `samples` under the model in inference mode, pooled over all
/// weighted voxels.
double evaluate_loss(const Model& model, const std::vector<TrainingSample>& samples, int batch_size);

using EpochCallback = std::function<void(int epoch, double train_loss, double val_loss)>;

/// Adam on shuffled mini-batches, one validation pass per epoch, early
/// stopping, best weights restored at the end. Throws DivergenceError on a
/// non-finite loss.
TrainReport train_model(Model& model, const std::vector<TrainingSample>& train,
                        const std::vector<TrainingSample>& val, const TrainConfig& config,
                        const EpochCallback& on_epoch = {});

} // namespace tseg
