#include "ikrnet/record_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ikrnet/errors.hpp"

namespace ikrnet::io {

using nlohmann::json;

json sidecar_json(const signal::EcgRecord& record, const json& extra) {
    json j = extra.is_object() ? extra : json::object();
    j["record_id"] = record.record_id;
    j["patient_id"] = record.patient_id;
    j["fs"] = record.fs;
    j["source_fs"] = record.source_fs;
    j["label"] = std::string(to_string(record.label));
    j["zone"] = std::string(to_string(record.zone));
    j["beat_onsets_s"] = record.beat_onsets_s;
    return j;
}

signal::EcgRecord record_from_sidecar(const json& j) {
    signal::EcgRecord rec;
    try {
        rec.record_id = j.at("record_id").get<std::string>();
        rec.patient_id = j.at("patient_id").get<std::string>();
        rec.fs = j.at("fs").get<double>();
        rec.source_fs = j.at("source_fs").get<double>();
        rec.label = label_from_string(j.at("label").get<std::string>());
        const auto& zone = j.at("zone");
        rec.zone = zone.is_null() ? Zone::Unassigned : zone_from_string(zone.get<std::string>());
        rec.beat_onsets_s = j.at("beat_onsets_s").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw IntegrityError(std::string("malformed record sidecar: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw IntegrityError(std::string("malformed record sidecar: ") + e.what());
    }
    if (!(rec.fs > 0.0)) {
        throw IntegrityError("record sidecar has non-positive fs");
    }
    return rec;
}

std::string samples_to_csv(const std::vector<double>& samples) {
    std::string out = "n,amplitude\n";
    out.reserve(out.size() + samples.size() * 24);
    char buf[64];
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto r = std::to_chars(buf, buf + sizeof(buf), i);
        *r.ptr++ = ',';
        // Shortest representation that round-trips exactly.
        r = std::to_chars(r.ptr, buf + sizeof(buf), samples[i]);
        *r.ptr++ = '\n';
        out.append(buf, r.ptr);
    }
    return out;
}

std::vector<double> samples_from_csv(const std::string& text) {
    std::vector<double> samples;
    std::size_t pos = text.find('\n');
    if (pos == std::string::npos || text.compare(0, pos, "n,amplitude") != 0) {
        throw IntegrityError("record CSV must start with header 'n,amplitude'");
    }
    ++pos;
    std::size_t expected = 0;
    while (pos < text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        if (eol == pos) {
            ++pos;
            continue;
        }
        const char* first = text.data() + pos;
        const char* last = text.data() + eol;
        std::size_t n = 0;
        auto r = std::from_chars(first, last, n);
        if (r.ec != std::errc() || r.ptr == last || *r.ptr != ',' || n != expected) {
            throw IntegrityError("bad CSV row " + std::to_string(expected));
        }
        double v = 0.0;
        auto r2 = std::from_chars(r.ptr + 1, last, v);
        if (r2.ec != std::errc() || (r2.ptr != last && *r2.ptr != '\r')) {
            throw IntegrityError("bad amplitude in CSV row " + std::to_string(expected));
        }
        samples.push_back(v);
        ++expected;
        pos = eol + 1;
    }
    return samples;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IntegrityError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InvalidArgument("cannot write " + path.string());
    }
    out << text;
}

void write_record(const std::filesystem::path& stem, const signal::EcgRecord& record, const json& extra) {
    auto csv = stem;
    csv += ".csv";
    auto side = stem;
    side += ".json";
    write_text(csv, samples_to_csv(record.samples));
    write_text(side, sidecar_json(record, extra).dump(2) + "\n");
}

StoredRecord read_record(const std::filesystem::path& stem) {
    auto csv = stem;
    csv += ".csv";
    auto side = stem;
    side += ".json";
    StoredRecord out;
    json j;
    try {
        j = json::parse(read_text(side));
    } catch (const json::parse_error& e) {
        throw IntegrityError("cannot parse " + side.string() + ": " + e.what());
    }
    out.record = record_from_sidecar(j);
    out.record.samples = samples_from_csv(read_text(csv));
    if (out.record.samples.empty()) {
        throw IntegrityError("record " + out.record.record_id + " has no samples");
    }
    for (const char* key : {"record_id", "patient_id", "fs", "source_fs", "label", "zone", "beat_onsets_s"}) {
        j.erase(key);
    }
    out.extra = std::move(j);
    return out;
}

}  // namespace ikrnet::io
