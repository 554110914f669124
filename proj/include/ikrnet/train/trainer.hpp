#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ikrnet/model/ikrnet.hpp"
#include "ikrnet/train/examples.hpp"

namespace ikrnet::train {

struct TrainOptions {
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    double weight_decay = 0.01;
    double clip_norm = 5.0;  // <= 0 disables clipping
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    // Unknown keys raise ConfigError; missing keys keep their defaults.
    static TrainOptions from_json(const nlohmann::json& j);
    void validate() const;
};

struct EpochLog {
    std::size_t epoch = 0;  // 0 = before any update
    double train_loss = 0.0;
    std::optional<double> val_loss;
    std::optional<double> val_accuracy;
    double grad_norm = 0.0;  // mean pre-clip norm over the epoch's batches
    double seconds = 0.0;

    nlohmann::json to_json() const;
};

struct TrainResult {
    std::vector<EpochLog> history;
    std::size_t best_epoch = 0;
    std::string best_checkpoint;  // checkpoint bytes of the restored weights
};

// Epoch 0 records eval-mode losses of the initial weights. Each later epoch
// shuffles with derive_seed(seed, epoch), minimizes BCE in training mode with
// AdamW and gradient clipping, then scores the validation set in eval mode.
// The weights with the lowest validation loss (train loss when there is no
// validation set) are restored at the end. on_epoch sees every log entry.
TrainResult fit(model::IKrNetModel<float>& model, const ExampleSet& train_set, const ExampleSet& val_set,
                const TrainOptions& options, const std::function<void(const EpochLog&)>& on_epoch = {});

// Mean eval-mode BCE over the set.
double evaluate_loss(model::IKrNetModel<float>& model, const ExampleSet& set, std::size_t batch_size);

class Scorer {
public:
    virtual ~Scorer() = default;
    virtual std::vector<double> score(const ExampleSet& set) = 0;
};

class ModelScorer : public Scorer {
public:
    explicit ModelScorer(model::IKrNetModel<float>& model, std::size_t batch_size = 64)
        : model_(model), batch_size_(batch_size) {}
    std::vector<double> score(const ExampleSet& set) override;

private:
    model::IKrNetModel<float>& model_;
    std::size_t batch_size_;
};

// Scores from a fixed function of the example, for pipeline tests.
class FunctionScorer : public Scorer {
public:
    explicit FunctionScorer(std::function<double(const Example&)> fn) : fn_(std::move(fn)) {}
    std::vector<double> score(const ExampleSet& set) override;

private:
    std::function<double(const Example&)> fn_;
};

eval::PredictionSet predict(Scorer& scorer, const ExampleSet& set);

}  // namespace ikrnet::train
