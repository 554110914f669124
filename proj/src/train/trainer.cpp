#include "ikrnet/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "ikrnet/errors.hpp"
#include "ikrnet/nn/checkpoint.hpp"
#include "ikrnet/nn/ops.hpp"
#include "ikrnet/nn/optim.hpp"
#include "ikrnet/rng.hpp"

namespace ikrnet::train {

using nn::Tensor;

nlohmann::json TrainOptions::to_json() const {
    return {{"epochs", epochs},         {"batch_size", batch_size}, {"lr", lr},
            {"weight_decay", weight_decay}, {"clip_norm", clip_norm},   {"seed", seed}};
}

TrainOptions TrainOptions::from_json(const nlohmann::json& j) {
    TrainOptions o;
    if (!j.is_object()) throw ConfigError("training options must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "epochs") o.epochs = value.get<std::size_t>();
            else if (key == "batch_size") o.batch_size = value.get<std::size_t>();
            else if (key == "lr") o.lr = value.get<double>();
            else if (key == "weight_decay") o.weight_decay = value.get<double>();
            else if (key == "clip_norm") o.clip_norm = value.get<double>();
            else if (key == "seed") o.seed = value.get<std::uint64_t>();
            else throw ConfigError("unknown training option '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad training option: ") + e.what());
    }
    o.validate();
    return o;
}

void TrainOptions::validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be a finite non-negative number");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
}

nlohmann::json EpochLog::to_json() const {
    nlohmann::json j = {{"epoch", epoch}, {"train_loss", train_loss}, {"grad_norm", grad_norm}, {"seconds", seconds}};
    j["val_loss"] = val_loss ? nlohmann::json(*val_loss) : nlohmann::json(nullptr);
    j["val_accuracy"] = val_accuracy ? nlohmann::json(*val_accuracy) : nlohmann::json(nullptr);
    return j;
}

namespace {

Tensor<float> batch_tensor(const ExampleSet& set, const std::vector<std::size_t>& order, std::size_t b,
                           std::size_t e) {
    return Tensor<float>::from({e - b, 1, set.length}, gather_batch(set, order, b, e));
}

Tensor<float> label_tensor(const ExampleSet& set, const std::vector<std::size_t>& order, std::size_t b,
                           std::size_t e) {
    std::vector<float> y;
    for (std::size_t i = b; i < e; ++i) y.push_back(static_cast<float>(set.examples[order[i]].label));
    return Tensor<float>::from({e - b}, std::move(y));
}

std::vector<std::size_t> identity(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

// Fisher-Yates on a splitmix64 stream, so the order only depends on the seed.
std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
    auto v = identity(n);
    std::uint64_t state = seed;
    for (std::size_t i = n; i > 1; --i) {
        state = splitmix64(state);
        std::swap(v[i - 1], v[state % i]);
    }
    return v;
}

std::vector<double> eval_scores(model::IKrNetModel<float>& model, const ExampleSet& set, std::size_t batch_size) {
    nn::NoGradGuard guard;
    const auto order = identity(set.size());
    std::vector<double> scores;
    scores.reserve(set.size());
    for (std::size_t b = 0; b < set.size(); b += batch_size) {
        const std::size_t e = std::min(set.size(), b + batch_size);
        const auto s = model.forward(batch_tensor(set, order, b, e), false);
        for (float v : s.data()) scores.push_back(v);
    }
    return scores;
}

double mean_bce(const ExampleSet& set, const std::vector<double>& scores) {
    constexpr double eps = nn::kBceEps;
    double sum = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const double p = std::clamp(scores[i], eps, 1.0 - eps);
        sum -= set.examples[i].label == 1 ? std::log(p) : std::log(1.0 - p);
    }
    return sum / static_cast<double>(set.size());
}

double accuracy(const ExampleSet& set, const std::vector<double>& scores) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < set.size(); ++i) ok += model::classify_score(scores[i]) == set.examples[i].label;
    return static_cast<double>(ok) / static_cast<double>(set.size());
}

}  // namespace

double evaluate_loss(model::IKrNetModel<float>& model, const ExampleSet& set, std::size_t batch_size) {
    if (set.empty()) throw InvalidArgument("cannot evaluate the loss of an empty set");
    return mean_bce(set, eval_scores(model, set, batch_size));
}

TrainResult fit(model::IKrNetModel<float>& model, const ExampleSet& train_set, const ExampleSet& val_set,
                const TrainOptions& options, const std::function<void(const EpochLog&)>& on_epoch) {
    options.validate();
    if (train_set.empty()) throw InvalidArgument("training set is empty");
    const auto& cfg = model.config();
    const std::string hash = cfg.hash();
    const auto clock = [] { return std::chrono::steady_clock::now(); };

    TrainResult result;
    double best = std::numeric_limits<double>::infinity();
    auto finish_epoch = [&](EpochLog log) {
        const double key = log.val_loss.value_or(log.train_loss);
        if (key < best || result.history.empty()) {
            best = key;
            result.best_epoch = log.epoch;
            result.best_checkpoint = nn::checkpoint_bytes(model.store(), hash, cfg.to_json());
        }
        if (on_epoch) on_epoch(log);
        result.history.push_back(std::move(log));
    };
    auto score_val = [&](EpochLog& log) {
        if (val_set.empty()) return;
        const auto scores = eval_scores(model, val_set, options.batch_size);
        log.val_loss = mean_bce(val_set, scores);
        log.val_accuracy = accuracy(val_set, scores);
    };

    {
        const auto t0 = clock();
        EpochLog log;
        log.train_loss = evaluate_loss(model, train_set, options.batch_size);
        score_val(log);
        log.seconds = std::chrono::duration<double>(clock() - t0).count();
        finish_epoch(std::move(log));
    }

    nn::AdamW<float> opt({options.lr, 0.9, 0.999, 1e-8, options.weight_decay});
    const std::size_t n = train_set.size();
    for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
        const auto t0 = clock();
        const auto order = shuffled(n, derive_seed(options.seed, epoch));
        double loss_sum = 0.0, norm_sum = 0.0;
        std::size_t seen = 0, batches = 0;
        for (std::size_t b = 0; b < n; b += options.batch_size) {
            const std::size_t e = std::min(n, b + options.batch_size);
            // A single-example batch has no batch statistics to normalize with.
            if (e - b < 2 && cfg.use_batchnorm && n > 1) continue;
            model.store().zero_grad();
            const auto scores = model.forward(batch_tensor(train_set, order, b, e), true);
            auto loss = nn::bce_loss(scores, label_tensor(train_set, order, b, e));
            loss.backward();
            const double norm = options.clip_norm > 0.0
                                    ? nn::clip_grad_norm(model.store(), options.clip_norm)
                                    : nn::clip_grad_norm(model.store(), std::numeric_limits<double>::infinity());
            opt.step(model.store());
            loss_sum += static_cast<double>(loss.item()) * static_cast<double>(e - b);
            norm_sum += norm;
            seen += e - b;
            ++batches;
        }
        model.store().zero_grad();
        EpochLog log;
        log.epoch = epoch;
        log.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
        log.grad_norm = batches ? norm_sum / static_cast<double>(batches) : 0.0;
        score_val(log);
        log.seconds = std::chrono::duration<double>(clock() - t0).count();
        finish_epoch(std::move(log));
    }

    nn::load_checkpoint_bytes(result.best_checkpoint, model.store(), hash);
    return result;
}

std::vector<double> ModelScorer::score(const ExampleSet& set) { return eval_scores(model_, set, batch_size_); }

std::vector<double> FunctionScorer::score(const ExampleSet& set) {
    std::vector<double> out;
    out.reserve(set.size());
    for (const auto& ex : set.examples) out.push_back(fn_(ex));
    return out;
}

eval::PredictionSet predict(Scorer& scorer, const ExampleSet& set) { return to_predictions(set, scorer.score(set)); }

}  // namespace ikrnet::train
