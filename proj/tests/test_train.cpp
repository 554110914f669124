#include <doctest.h>

#include <cmath>

#include "ikrnet/data/dataset.hpp"
#include "ikrnet/data/synthetic.hpp"
#include "ikrnet/errors.hpp"
#include "ikrnet/eval/metrics.hpp"
#include "ikrnet/nn/checkpoint.hpp"
#include "ikrnet/train/examples.hpp"
#include "ikrnet/train/trainer.hpp"
#include "support.hpp"

using namespace ikrnet;
using model::IKrNetConfig;
using model::IKrNetModel;

namespace {

struct Sets {
    train::ExampleSet train, val, holdout;
};

// Six patients, one record every 20 minutes, default partition and rates.
const Sets& small_sets() {
    static const Sets sets = [] {
        data::SyntheticProtocolSpec spec;
        spec.n_patients = 6;
        spec.record_interval_s = 1200.0;
        const auto gen = data::generate(spec);
        auto m = data::partition(gen.manifest, data::PartitionRatios{}, spec.seed);
        m = data::balance_classes(m, spec.seed);
        m = data::augment_sampling_rates(m, data::kDefaultTrainRates, data::kDefaultHoldoutRates);
        const data::Dataset ds(m, gen.records);
        return Sets{train::materialize(ds, data::Partition::Train), train::materialize(ds, data::Partition::Val),
                    train::materialize(ds, data::Partition::Holdout)};
    }();
    return sets;
}

std::vector<std::vector<float>> snapshot(const IKrNetModel<float>& m) {
    std::vector<std::vector<float>> out;
    for (const auto& p : m.store().parameters()) out.push_back(p.tensor.to_vector());
    return out;
}

train::TrainOptions quick(std::size_t epochs) {
    train::TrainOptions o;
    o.epochs = epochs;
    o.batch_size = 16;
    o.lr = 3e-3;
    o.seed = 11;
    return o;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("materialize: standardized fixed-length inputs with provenance") {
    const auto& s = small_sets();
    REQUIRE(!s.train.empty());
    CHECK(s.train.length == 5000);
    std::size_t augmented = 0, finite_hr = 0;
    for (const auto& e : s.train.examples) {
        REQUIRE(e.input.size() == 5000);
        double mean = 0.0, ss = 0.0;
        for (float v : e.input) mean += v;
        mean /= 5000.0;
        for (float v : e.input) ss += (v - mean) * (v - mean);
        CHECK(std::abs(mean) < 1e-5);
        CHECK(std::sqrt(ss / 5000.0) == doctest::Approx(1.0).epsilon(1e-5));
        CHECK((e.label == 0 || e.label == 1));
        augmented += e.source_fs < 500.0;
        finite_hr += std::isfinite(e.average_bpm);
    }
    CHECK(augmented * 3 == s.train.size() * 2);
    CHECK(finite_hr == s.train.size());
}

TEST_CASE("gather_batch copies rows in the given order") {
    train::ExampleSet set;
    set.length = 2;
    for (int i = 0; i < 3; ++i) {
        train::Example e;
        e.input = {static_cast<float>(i), static_cast<float>(10 + i)};
        set.examples.push_back(e);
    }
    CHECK(train::gather_batch(set, {2, 0, 1}, 0, 2) == std::vector<float>{2, 12, 0, 10});
    CHECK(train::gather_batch(set, {2, 0, 1}, 2, 3) == std::vector<float>{1, 11});
}

TEST_CASE("train options: JSON and validation") {
    auto o = quick(4);
    const auto back = train::TrainOptions::from_json(o.to_json());
    CHECK(back.to_json() == o.to_json());
    CHECK_THROWS_AS(train::TrainOptions::from_json({{"epoch", 3}}), ConfigError);
    o.batch_size = 0;
    CHECK_THROWS_AS(o.validate(), ConfigError);
    o = quick(1);
    o.lr = -1.0;
    CHECK_THROWS_AS(o.validate(), ConfigError);
}

TEST_CASE("zero learning rate leaves every parameter unchanged") {
    const auto& s = small_sets();
    auto m = IKrNetModel<float>::build(IKrNetConfig::desk(), 3);
    const auto before = snapshot(m);
    auto o = quick(1);
    o.lr = 0.0;
    o.weight_decay = 0.0;
    train::fit(m, s.train, s.val, o);
    CHECK(snapshot(m) == before);
}

TEST_CASE("same seed gives an identical loss trajectory and checkpoint") {
    const auto& s = small_sets();
    auto run = [&] {
        auto m = IKrNetModel<float>::build(IKrNetConfig::desk(), 5);
        return train::fit(m, s.train, s.val, quick(2));
    };
    const auto a = run(), b = run();
    REQUIRE(a.history.size() == 3);
    REQUIRE(b.history.size() == 3);
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].train_loss == b.history[i].train_loss);
        CHECK(a.history[i].val_loss == b.history[i].val_loss);
        CHECK(a.history[i].grad_norm == b.history[i].grad_norm);
    }
    CHECK(a.best_epoch == b.best_epoch);
    CHECK(a.best_checkpoint == b.best_checkpoint);
}

TEST_CASE("training lowers the loss and the best checkpoint reloads to identical scores") {
    const auto& s = small_sets();
    auto m = IKrNetModel<float>::build(IKrNetConfig::desk(), 2);
    std::vector<std::size_t> seen;
    const auto r = train::fit(m, s.train, s.val, quick(4), [&](const train::EpochLog& e) { seen.push_back(e.epoch); });
    CHECK(seen == std::vector<std::size_t>{0, 1, 2, 3, 4});
    CHECK(r.history.back().train_loss < r.history.front().train_loss);
    double best = r.history[0].val_loss.value();
    for (const auto& e : r.history) best = std::min(best, e.val_loss.value());
    CHECK(r.history[r.best_epoch].val_loss.value() == best);

    train::ModelScorer scorer(m);
    const auto scores = scorer.score(s.holdout);
    auto fresh = IKrNetModel<float>::build(IKrNetConfig::desk(), 99);
    nn::load_checkpoint_bytes(r.best_checkpoint, fresh.store(), IKrNetConfig::desk().hash());
    train::ModelScorer again(fresh);
    CHECK(again.score(s.holdout) == scores);
    CHECK(nn::checkpoint_bytes(fresh.store(), IKrNetConfig::desk().hash(), IKrNetConfig::desk().to_json()) ==
          r.best_checkpoint);
}

TEST_CASE("stub scorers: perfect scorer and constant negative scorer") {
    const auto& s = small_sets();
    train::FunctionScorer perfect([](const train::Example& e) { return static_cast<double>(e.label); });
    const auto p = train::predict(perfect, s.holdout);
    CHECK(eval::basic_metrics(p).accuracy == 1.0);
    CHECK(eval::accuracy_parity_difference(p, eval::Grouping::SamplingRate) == 0.0);

    train::FunctionScorer negative([](const train::Example&) { return 0.0; });
    const auto n = train::predict(negative, s.holdout);
    std::size_t negatives = 0;
    for (const auto& e : s.holdout.examples) negatives += e.label == 0;
    const auto m = eval::basic_metrics(n);
    CHECK(m.accuracy == doctest::Approx(static_cast<double>(negatives) / static_cast<double>(s.holdout.size())));
    CHECK_FALSE(m.precision.has_value());
    CHECK(*m.recall == 0.0);

    // Prediction rows carry the example metadata.
    for (std::size_t i = 0; i < n.size(); ++i) {
        CHECK(n[i].record_id == s.holdout.examples[i].record_id);
        CHECK(n[i].fs == s.holdout.examples[i].source_fs);
        CHECK(n[i].zone == s.holdout.examples[i].zone);
    }
}

}  // TEST_SUITE
