#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "ikrnet/data/dataset.hpp"
#include "ikrnet/eval/metrics.hpp"

namespace ikrnet::train {

struct Example {
    std::string record_id;
    std::string patient_id;
    Zone zone = Zone::Unassigned;
    double source_fs = 500.0;
    int label = 0;
    double average_bpm = std::numeric_limits<double>::quiet_NaN();
    std::vector<float> input;  // standardized samples
};

struct ExampleSet {
    std::vector<Example> examples;
    std::size_t length = 0;  // every input has this many samples

    std::size_t size() const { return examples.size(); }
    bool empty() const { return examples.empty(); }
};

// Loads, resamples (for augmented entries) and standardizes the given
// entries, and attaches the record's average heart rate (NaN when the beat
// detector finds fewer than two beats). All inputs must share one length;
// InvalidArgument otherwise. Flat records raise DegenerateSignal.
ExampleSet materialize(const data::Dataset& dataset, const std::vector<const data::ManifestEntry*>& entries);
ExampleSet materialize(const data::Dataset& dataset, data::Partition partition);

// Batch [B,1,L] over examples[begin, end) in the given order.
std::vector<float> gather_batch(const ExampleSet& set, const std::vector<std::size_t>& order, std::size_t begin,
                                std::size_t end);

// Copies the example metadata next to scores into a prediction set.
eval::PredictionSet to_predictions(const ExampleSet& set, const std::vector<double>& scores);

}  // namespace ikrnet::train
