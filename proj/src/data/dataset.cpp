#include "ikrnet/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "ikrnet/errors.hpp"
#include "ikrnet/rng.hpp"
#include "ikrnet/signal.hpp"

namespace ikrnet::data {

using nlohmann::json;

std::string to_string(Partition p) {
    switch (p) {
        case Partition::Train: return "train";
        case Partition::Val: return "val";
        case Partition::Eval: return "eval";
        case Partition::Holdout: return "holdout";
        case Partition::None: break;
    }
    return "none";
}

Partition partition_from_string(const std::string& s) {
    if (s == "train") return Partition::Train;
    if (s == "val") return Partition::Val;
    if (s == "eval") return Partition::Eval;
    if (s == "holdout") return Partition::Holdout;
    if (s == "none") return Partition::None;
    throw InvalidArgument("unknown partition '" + s + "'");
}

json DatasetManifest::to_json() const {
    json recs = json::array();
    for (const auto& e : records) {
        recs.push_back({{"record_id", e.record_id},
                        {"patient_id", e.patient_id},
                        {"path", e.path.empty() ? json(nullptr) : json(e.path)},
                        {"label", std::string(ikrnet::to_string(e.label))},
                        {"zone", std::string(ikrnet::to_string(e.zone))},
                        {"fs", e.fs},
                        {"source_fs", e.source_fs},
                        {"partition", to_string(e.partition)},
                        {"t_min", e.t_min},
                        {"derived_from", e.derived_from.empty() ? json(nullptr) : json(e.derived_from)}});
    }
    return {{"format", 1},
            {"seed", seed},
            {"partition_ratios", {{"train", ratios.train}, {"val", ratios.val}, {"eval", ratios.eval},
                                  {"holdout", ratios.holdout}}},
            {"generator", generator},
            {"augmentation", {{"train_rates", train_rates}, {"holdout_rates", holdout_rates}}},
            {"flags", flags},
            {"records", recs}};
}

DatasetManifest DatasetManifest::from_json(const json& j) {
    DatasetManifest m;
    try {
        m.seed = j.at("seed").get<std::uint64_t>();
        const auto& r = j.at("partition_ratios");
        m.ratios = {r.at("train").get<double>(), r.at("val").get<double>(), r.at("eval").get<double>(),
                    r.at("holdout").get<double>()};
        m.generator = j.value("generator", json::object());
        const auto& aug = j.at("augmentation");
        m.train_rates = aug.at("train_rates").get<std::vector<double>>();
        m.holdout_rates = aug.at("holdout_rates").get<std::vector<double>>();
        m.flags = j.value("flags", std::vector<std::string>{});
        std::set<std::string> seen;
        for (const auto& e : j.at("records")) {
            ManifestEntry en;
            en.record_id = e.at("record_id").get<std::string>();
            en.patient_id = e.at("patient_id").get<std::string>();
            en.path = e.at("path").is_null() ? "" : e.at("path").get<std::string>();
            en.label = label_from_string(e.at("label").get<std::string>());
            en.zone = e.at("zone").is_null() ? Zone::Unassigned : zone_from_string(e.at("zone").get<std::string>());
            en.fs = e.at("fs").get<double>();
            en.source_fs = e.at("source_fs").get<double>();
            en.partition = partition_from_string(e.at("partition").get<std::string>());
            en.t_min = e.at("t_min").get<double>();
            en.derived_from = e.at("derived_from").is_null() ? "" : e.at("derived_from").get<std::string>();
            if (!seen.insert(en.record_id).second) {
                throw IntegrityError("manifest lists record " + en.record_id + " twice");
            }
            if (en.path.empty() == en.derived_from.empty()) {
                throw IntegrityError("manifest record " + en.record_id +
                                     " needs exactly one of path and derived_from");
            }
            m.records.push_back(std::move(en));
        }
    } catch (const json::exception& e) {
        throw IntegrityError(std::string("malformed manifest: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw IntegrityError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

std::vector<std::string> DatasetManifest::patients() const {
    std::set<std::string> ids;
    for (const auto& e : records) ids.insert(e.patient_id);
    return {ids.begin(), ids.end()};
}

std::vector<const ManifestEntry*> DatasetManifest::in_partition(Partition p) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : records) {
        if (e.partition == p) out.push_back(&e);
    }
    return out;
}

const ManifestEntry* DatasetManifest::find(const std::string& record_id) const {
    for (const auto& e : records) {
        if (e.record_id == record_id) return &e;
    }
    return nullptr;
}

DatasetManifest partition(const DatasetManifest& manifest, const PartitionRatios& ratios, std::uint64_t seed) {
    const double parts[] = {ratios.train, ratios.val, ratios.eval, ratios.holdout};
    double sum = 0.0;
    std::size_t needed = 0;
    for (double r : parts) {
        if (r < 0.0) throw InvalidArgument("partition ratios must be non-negative");
        sum += r;
        if (r > 0.0) ++needed;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("partition ratios must sum to 1");
    if (ratios.train <= 0.0) throw InvalidArgument("training ratio must be positive");

    std::vector<std::string> patients = manifest.patients();
    const std::size_t P = patients.size();
    if (P < needed) {
        throw InvalidArgument("cannot split " + std::to_string(P) + " patients into " + std::to_string(needed) +
                              " partitions");
    }
    std::mt19937_64 rng(derive_seed(seed, 0x5041525449ULL));
    std::shuffle(patients.begin(), patients.end(), rng);

    auto count = [P](double r) -> std::size_t {
        if (r <= 0.0) return 0;
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(r * static_cast<double>(P) + 1e-9)));
    };
    const std::size_t n_val = count(ratios.val), n_eval = count(ratios.eval), n_hold = count(ratios.holdout);
    if (n_val + n_eval + n_hold >= P) {
        throw InvalidArgument("too few patients (" + std::to_string(P) + ") to leave any for training");
    }
    std::map<std::string, Partition> assign;
    std::size_t i = 0;
    for (; i < n_val; ++i) assign[patients[i]] = Partition::Val;
    for (; i < n_val + n_eval; ++i) assign[patients[i]] = Partition::Eval;
    for (; i < n_val + n_eval + n_hold; ++i) assign[patients[i]] = Partition::Holdout;
    for (; i < P; ++i) assign[patients[i]] = Partition::Train;

    DatasetManifest out = manifest;
    out.ratios = ratios;
    for (auto& e : out.records) e.partition = assign.at(e.patient_id);
    return out;
}

namespace {

// Indices of `pool` to keep, `target` of them spread evenly over the strata.
std::vector<std::size_t> stratified_pick(const std::map<long, std::vector<std::size_t>>& strata, std::size_t target,
                                         std::mt19937_64& rng) {
    std::map<long, std::size_t> quota;
    std::vector<long> active;
    for (const auto& [key, members] : strata) active.push_back(key);
    std::size_t remaining = target;
    // Strata smaller than the fair share give everything and drop out.
    while (!active.empty()) {
        const std::size_t share = remaining / active.size();
        std::vector<long> still;
        for (long key : active) {
            const std::size_t cap = strata.at(key).size();
            if (cap <= share) {
                quota[key] = cap;
                remaining -= cap;
            } else {
                still.push_back(key);
            }
        }
        if (still.size() == active.size()) {
            for (long key : still) quota[key] = share;
            std::size_t extra = remaining - share * still.size();
            std::shuffle(still.begin(), still.end(), rng);
            for (std::size_t i = 0; i < extra; ++i) ++quota[still[i]];
            break;
        }
        active = std::move(still);
    }
    std::vector<std::size_t> keep;
    for (const auto& [key, members] : strata) {
        std::vector<std::size_t> m = members;
        std::shuffle(m.begin(), m.end(), rng);
        keep.insert(keep.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(quota[key]));
    }
    return keep;
}

}  // namespace

DatasetManifest balance_classes(const DatasetManifest& manifest, std::uint64_t seed,
                                const std::vector<Partition>& partitions) {
    for (const auto& e : manifest.records) {
        if (e.is_augmented()) throw InvalidArgument("balance the dataset before sampling-rate augmentation");
    }
    const std::set<Partition> scope(partitions.begin(), partitions.end());
    std::map<std::string, std::vector<std::size_t>> by_patient;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        if (scope.count(manifest.records[i].partition)) by_patient[manifest.records[i].patient_id].push_back(i);
    }
    std::vector<bool> keep(manifest.records.size(), true);
    DatasetManifest out = manifest;
    for (const auto& [patient, idx] : by_patient) {
        std::vector<std::size_t> minus, plus;
        for (std::size_t i : idx) (manifest.records[i].label == Label::SotPlus ? plus : minus).push_back(i);
        if (minus.empty() || plus.empty()) {
            out.flags.push_back("patient " + patient + " lacks " + (minus.empty() ? "Sot-" : "Sot+") +
                                " records; kept unbalanced");
            continue;
        }
        if (minus.size() == plus.size()) continue;
        std::mt19937_64 rng(derive_seed(seed, fnv1a64(patient)));
        std::vector<std::size_t> picked;
        std::vector<std::size_t>& larger = plus.size() > minus.size() ? plus : minus;
        const std::size_t target = std::min(plus.size(), minus.size());
        if (&larger == &plus) {
            std::map<long, std::vector<std::size_t>> strata;
            for (std::size_t i : plus) strata[static_cast<long>(std::floor(manifest.records[i].t_min / 60.0))].push_back(i);
            picked = stratified_pick(strata, target, rng);
        } else {
            std::map<long, std::vector<std::size_t>> single{{0, minus}};
            picked = stratified_pick(single, target, rng);
        }
        for (std::size_t i : larger) keep[i] = false;
        for (std::size_t i : picked) keep[i] = true;
    }
    out.records.clear();
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        if (keep[i]) out.records.push_back(manifest.records[i]);
    }
    return out;
}

std::string augmented_id(const std::string& record_id, double rate) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "@%g", rate);
    return record_id + buf;
}

DatasetManifest augment_sampling_rates(const DatasetManifest& manifest, const std::vector<double>& train_rates,
                                       const std::vector<double>& holdout_rates) {
    for (double r : train_rates) {
        if (!(r > 0.0)) throw InvalidArgument("sampling rates must be positive");
    }
    for (double r : holdout_rates) {
        if (!(r > 0.0)) throw InvalidArgument("sampling rates must be positive");
    }
    DatasetManifest out = manifest;
    std::set<std::string> ids;
    for (const auto& e : manifest.records) ids.insert(e.record_id);
    for (const auto& e : manifest.records) {
        if (e.is_augmented() || e.partition == Partition::None) continue;
        const auto& rates = e.partition == Partition::Holdout ? holdout_rates : train_rates;
        for (double rate : rates) {
            if (rate > e.fs) {
                char buf[96];
                std::snprintf(buf, sizeof buf, "rate %g Hz exceeds the original rate %g Hz of ", rate, e.fs);
                throw InvalidArgument(buf + e.record_id);
            }
            if (rate == e.fs) continue;
            const std::string id = augmented_id(e.record_id, rate);
            if (!ids.insert(id).second) continue;
            ManifestEntry copy = e;
            copy.record_id = id;
            copy.path.clear();
            copy.source_fs = rate;
            copy.derived_from = e.record_id;
            out.records.push_back(std::move(copy));
        }
    }
    auto merge = [](std::vector<double>& into, const std::vector<double>& add) {
        for (double r : add) {
            if (std::find(into.begin(), into.end(), r) == into.end()) into.push_back(r);
        }
    };
    merge(out.train_rates, train_rates);
    merge(out.holdout_rates, holdout_rates);
    return out;
}

Dataset::Dataset(DatasetManifest manifest, std::vector<io::StoredRecord> originals) {
    for (auto& sr : originals) {
        const std::string id = sr.record.record_id;
        originals_.emplace(id, std::move(sr));
    }
    set_manifest(std::move(manifest));
}

void Dataset::set_manifest(DatasetManifest manifest) {
    for (const auto& e : manifest.records) {
        const std::string& source = e.is_augmented() ? e.derived_from : e.record_id;
        if (!originals_.count(source)) {
            throw IntegrityError("manifest record " + e.record_id + " has no original signal " + source);
        }
    }
    manifest_ = std::move(manifest);
}

const io::StoredRecord& Dataset::original(const std::string& record_id) const {
    auto it = originals_.find(record_id);
    if (it == originals_.end()) throw IntegrityError("unknown original record " + record_id);
    return it->second;
}

signal::EcgRecord Dataset::record(const ManifestEntry& entry) const {
    if (!entry.is_augmented()) {
        signal::EcgRecord r = original(entry.record_id).record;
        r.zone = entry.zone;
        return r;
    }
    const signal::EcgRecord& src = original(entry.derived_from).record;
    signal::EcgRecord r = signal::resample(signal::resample(src, entry.source_fs), src.fs);
    r.record_id = entry.record_id;
    r.source_fs = entry.source_fs;
    r.zone = entry.zone;
    r.beat_onsets_s = src.beat_onsets_s;
    return r;
}

std::string manifest_text(const DatasetManifest& manifest) { return manifest.to_json().dump(2) + "\n"; }

Dataset Dataset::load(const std::filesystem::path& root) {
    json j;
    try {
        j = json::parse(io::read_text(root / "manifest.json"));
    } catch (const json::exception& e) {
        throw IntegrityError(std::string("manifest.json is not valid JSON: ") + e.what());
    }
    DatasetManifest manifest = DatasetManifest::from_json(j);
    std::vector<io::StoredRecord> originals;
    for (const auto& e : manifest.records) {
        if (e.is_augmented()) continue;
        io::StoredRecord sr = io::read_record(root / e.path);
        if (sr.record.record_id != e.record_id || sr.record.patient_id != e.patient_id) {
            throw IntegrityError("record file " + e.path + " does not match manifest entry " + e.record_id);
        }
        originals.push_back(std::move(sr));
    }
    return Dataset(std::move(manifest), std::move(originals));
}

void Dataset::save(const std::filesystem::path& root) const {
    for (const auto& e : manifest_.records) {
        if (e.is_augmented()) continue;
        const auto& sr = original(e.record_id);
        io::write_record(root / e.path, sr.record, sr.extra);
    }
    io::write_text(root / "manifest.json", manifest_text(manifest_));
}

}  // namespace ikrnet::data
