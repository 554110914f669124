#include "ikrnet/train/examples.hpp"

#include <exception>

#include "ikrnet/errors.hpp"
#include "ikrnet/model/ikrnet.hpp"
#include "ikrnet/signal.hpp"

namespace ikrnet::train {

namespace {

double average_bpm(const signal::EcgRecord& rec) {
    const auto windows = signal::detect_beat_windows(rec);
    if (windows.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    return signal::estimate_heart_rate(rec, windows).average_bpm;
}

}  // namespace

ExampleSet materialize(const data::Dataset& dataset, const std::vector<const data::ManifestEntry*>& entries) {
    ExampleSet set;
    set.examples.resize(entries.size());
    std::vector<std::exception_ptr> errors(entries.size());
    const auto n = static_cast<std::ptrdiff_t>(entries.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            const auto& e = *entries[static_cast<std::size_t>(i)];
            const auto rec = dataset.record(e);
            auto& ex = set.examples[static_cast<std::size_t>(i)];
            ex.record_id = e.record_id;
            ex.patient_id = e.patient_id;
            ex.zone = e.zone;
            ex.source_fs = e.source_fs;
            ex.label = to_int(e.label);
            ex.average_bpm = average_bpm(rec);
            const auto z = signal::standardize(rec);
            ex.input.assign(z.samples.begin(), z.samples.end());
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    for (const auto& ex : set.examples) {
        if (set.length == 0) set.length = ex.input.size();
        if (ex.input.size() != set.length) {
            throw InvalidArgument("record " + ex.record_id + " has " + std::to_string(ex.input.size()) +
                                  " samples, expected " + std::to_string(set.length));
        }
    }
    return set;
}

ExampleSet materialize(const data::Dataset& dataset, data::Partition partition) {
    return materialize(dataset, dataset.manifest().in_partition(partition));
}

std::vector<float> gather_batch(const ExampleSet& set, const std::vector<std::size_t>& order, std::size_t begin,
                                std::size_t end) {
    std::vector<float> out;
    out.reserve((end - begin) * set.length);
    for (std::size_t i = begin; i < end; ++i) {
        const auto& in = set.examples.at(order.at(i)).input;
        out.insert(out.end(), in.begin(), in.end());
    }
    return out;
}

eval::PredictionSet to_predictions(const ExampleSet& set, const std::vector<double>& scores) {
    if (scores.size() != set.size()) throw InvalidArgument("one score per example required");
    eval::PredictionSet preds;
    preds.reserve(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto& ex = set.examples[i];
        eval::Prediction p;
        p.record_id = ex.record_id;
        p.patient_id = ex.patient_id;
        p.zone = ex.zone;
        p.fs = ex.source_fs;
        p.true_label = ex.label;
        p.score = scores[i];
        p.predicted_label = model::classify_score(scores[i]);
        p.average_bpm = ex.average_bpm;
        preds.push_back(std::move(p));
    }
    return preds;
}

}  // namespace ikrnet::train
