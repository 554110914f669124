#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ikrnet/record_io.hpp"
#include "ikrnet/types.hpp"

namespace ikrnet::data {

enum class Partition { None, Train, Val, Eval, Holdout };
inline constexpr Partition kPartitions[] = {Partition::Train, Partition::Val, Partition::Eval, Partition::Holdout};

std::string to_string(Partition p);
Partition partition_from_string(const std::string& s);

struct ManifestEntry {
    std::string record_id;
    std::string patient_id;
    // Record stem relative to the dataset root; empty for augmented entries,
    // which are rebuilt from their original on load.
    std::string path;
    Label label = Label::SotMinus;
    Zone zone = Zone::Unassigned;
    double fs = 500.0;
    double source_fs = 500.0;
    Partition partition = Partition::None;
    double t_min = 0.0;
    std::string derived_from;

    bool is_augmented() const { return !derived_from.empty(); }
    bool operator==(const ManifestEntry&) const = default;
};

struct PartitionRatios {
    double train = 0.70;
    double val = 0.10;
    double eval = 0.10;
    double holdout = 0.10;
    bool operator==(const PartitionRatios&) const = default;
};

inline const std::vector<double> kDefaultTrainRates{180.0, 250.0};
inline const std::vector<double> kDefaultHoldoutRates{150.0, 180.0, 215.0, 250.0, 300.0, 350.0, 425.0, 500.0};

struct DatasetManifest {
    std::vector<ManifestEntry> records;
    PartitionRatios ratios;
    std::uint64_t seed = 0;
    nlohmann::json generator = nlohmann::json::object();
    std::vector<double> train_rates;
    std::vector<double> holdout_rates;
    std::vector<std::string> flags;

    bool operator==(const DatasetManifest&) const = default;

    nlohmann::json to_json() const;
    // Throws IntegrityError on a malformed manifest.
    static DatasetManifest from_json(const nlohmann::json& j);

    std::vector<std::string> patients() const;
    std::vector<const ManifestEntry*> in_partition(Partition p) const;
    const ManifestEntry* find(const std::string& record_id) const;
};

// Patients shuffled by seed and split by patient. Each partition with a
// positive ratio gets max(1, floor(ratio * P)) patients; training takes the
// remainder. Throws InvalidArgument with fewer patients than partitions.
DatasetManifest partition(const DatasetManifest& manifest, const PartitionRatios& ratios, std::uint64_t seed);

// Per patient, subsamples the larger class to the size of the smaller one.
// Sot+ subsampling is stratified by post-intake hour so every hour contributes
// equally (within one record). Patients lacking a class are kept and flagged.
DatasetManifest balance_classes(const DatasetManifest& manifest, std::uint64_t seed,
                                const std::vector<Partition>& partitions = {std::begin(kPartitions),
                                                                            std::end(kPartitions)});

// Adds a down-and-up resampled copy per rate: train_rates for train/val/eval,
// holdout_rates for holdout. A rate equal to the record's own rate is served
// by the original. Existing copies are not duplicated. Throws InvalidArgument
// for a rate above the original's rate or a non-positive rate.
DatasetManifest augment_sampling_rates(const DatasetManifest& manifest, const std::vector<double>& train_rates,
                                       const std::vector<double>& holdout_rates);

std::string augmented_id(const std::string& record_id, double rate);

// Original records plus their manifest; augmented entries are rebuilt on demand.
class Dataset {
public:
    Dataset() = default;
    Dataset(DatasetManifest manifest, std::vector<io::StoredRecord> originals);

    // Reads <root>/manifest.json and every original record it lists.
    static Dataset load(const std::filesystem::path& root);
    // Writes manifest.json and the original records referenced by the manifest.
    void save(const std::filesystem::path& root) const;

    const DatasetManifest& manifest() const { return manifest_; }
    void set_manifest(DatasetManifest manifest);

    const io::StoredRecord& original(const std::string& record_id) const;
    // The signal behind a manifest entry, resampled for augmented entries.
    signal::EcgRecord record(const ManifestEntry& entry) const;

private:
    DatasetManifest manifest_;
    std::map<std::string, io::StoredRecord> originals_;
};

std::string manifest_text(const DatasetManifest& manifest);

}  // namespace ikrnet::data
