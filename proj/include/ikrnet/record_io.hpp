#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "ikrnet/signal.hpp"

namespace ikrnet::io {

// A record on disk is `<stem>.csv` (header `n,amplitude`) plus `<stem>.json`
// holding {record_id, patient_id, fs, source_fs, label, zone, beat_onsets_s}.
// Extra sidecar keys (generator ground truth) travel in `extra`.
struct StoredRecord {
    signal::EcgRecord record;
    nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json sidecar_json(const signal::EcgRecord& record, const nlohmann::json& extra = nlohmann::json::object());
signal::EcgRecord record_from_sidecar(const nlohmann::json& sidecar);

std::string samples_to_csv(const std::vector<double>& samples);
std::vector<double> samples_from_csv(const std::string& text);

// Writes `<stem>.csv` and `<stem>.json`; stem excludes the extension.
void write_record(const std::filesystem::path& stem, const signal::EcgRecord& record,
                  const nlohmann::json& extra = nlohmann::json::object());
StoredRecord read_record(const std::filesystem::path& stem);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ikrnet::io
