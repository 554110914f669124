#include "ikrnet/model/config.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <set>
#include <type_traits>

#include "ikrnet/errors.hpp"

namespace ikrnet::model {

std::string to_string(BlockType type) {
    return type == BlockType::Basic ? "basic" : "inverted_residual";
}

BlockType block_type_from_string(const std::string& s) {
    if (s == "inverted_residual") return BlockType::InvertedResidual;
    if (s == "basic") return BlockType::Basic;
    throw ConfigError("unknown block_type '" + s + "' (expected inverted_residual or basic)");
}

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

}  // namespace

void IKrNetConfig::validate() const {
    require(!branches.empty(), "branches: at least one branch is required");
    for (std::size_t i = 0; i < branches.size(); ++i) {
        const auto& b = branches[i];
        require(b.small >= 1 && b.large > b.small,
                "branches[" + std::to_string(i) + "]: need lk > k >= 1, got (" + std::to_string(b.large) + "," +
                    std::to_string(b.small) + ")");
    }
    require(n_blocks >= 1, "n_blocks must be >= 1");
    require(strides.size() == n_blocks, "strides: expected " + std::to_string(n_blocks) + " entries, got " +
                                            std::to_string(strides.size()));
    for (auto s : strides) require(s >= 1, "strides: every stride must be >= 1");
    require(initial_filters >= 1, "initial_filters must be >= 1");
    require(filter_growth_every >= 1, "filter_growth_every must be >= 1");
    require(filter_growth_factor >= 1, "filter_growth_factor must be >= 1");
    require(branch_out_len >= 1, "branch_out_len must be >= 1");
    require(branch_out_channels >= 1, "branch_out_channels must be >= 1");
    require(bilstm_hidden >= 1, "bilstm_hidden must be >= 1 (also sets the classifier width)");
    require(se_reduction >= 1, "se_reduction must be >= 1");
    require(expansion_factor >= 1, "expansion_factor must be >= 1");
}

std::size_t IKrNetConfig::block_channels(std::size_t i) const {
    std::size_t c = initial_filters;
    for (std::size_t g = 0; g < i / filter_growth_every; ++g) c *= filter_growth_factor;
    return c;
}

std::size_t IKrNetConfig::largest_front_kernel() const {
    std::size_t m = 0;
    for (const auto& b : branches) m = std::max(m, b.large);
    return m;
}

nlohmann::json IKrNetConfig::to_json() const {
    nlohmann::json br = nlohmann::json::array();
    for (const auto& b : branches) br.push_back({b.large, b.small});
    return {{"branches", br},
            {"strides", strides},
            {"initial_filters", initial_filters},
            {"n_blocks", n_blocks},
            {"filter_growth_every", filter_growth_every},
            {"filter_growth_factor", filter_growth_factor},
            {"branch_out_len", branch_out_len},
            {"branch_out_channels", branch_out_channels},
            {"bilstm_layers", bilstm_layers},
            {"bilstm_hidden", bilstm_hidden},
            {"se_reduction", se_reduction},
            {"expansion_factor", expansion_factor},
            {"use_skip_link", use_skip_link},
            {"use_batchnorm", use_batchnorm},
            {"block_type", to_string(block_type)}};
}

IKrNetConfig IKrNetConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("model config must be a JSON object");
    static const std::set<std::string> known{
        "branches",       "strides",           "initial_filters", "n_blocks",      "filter_growth_every",
        "filter_growth_factor", "branch_out_len", "branch_out_channels", "bilstm_layers", "bilstm_hidden",
        "se_reduction",   "expansion_factor",  "use_skip_link",   "use_batchnorm", "block_type"};
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw ConfigError("unknown model config key '" + key + "'");
    }
    IKrNetConfig c;
    try {
        if (j.contains("branches")) {
            c.branches.clear();
            for (const auto& b : j.at("branches")) {
                if (!b.is_array() || b.size() != 2) throw ConfigError("branches: each entry must be [lk, k]");
                if (!b[0].is_number_unsigned() || !b[1].is_number_unsigned())
                    throw ConfigError("branches: lk and k must be non-negative integers");
                c.branches.push_back({b[0].get<std::size_t>(), b[1].get<std::size_t>()});
            }
        }
        auto get = [&](const char* key, auto& field) {
            if (!j.contains(key)) return;
            using F = std::decay_t<decltype(field)>;
            if constexpr (std::is_unsigned_v<F>) {
                if (j.at(key).is_number() && !j.at(key).is_number_unsigned())
                    throw ConfigError(std::string(key) + ": expected a non-negative integer");
            }
            if constexpr (std::is_same_v<F, std::vector<std::size_t>>) {
                for (const auto& v : j.at(key)) {
                    if (v.is_number() && !v.is_number_unsigned())
                        throw ConfigError(std::string(key) + ": expected non-negative integers");
                }
            }
            field = j.at(key).get<F>();
        };
        get("strides", c.strides);
        get("initial_filters", c.initial_filters);
        get("n_blocks", c.n_blocks);
        get("filter_growth_every", c.filter_growth_every);
        get("filter_growth_factor", c.filter_growth_factor);
        get("branch_out_len", c.branch_out_len);
        get("branch_out_channels", c.branch_out_channels);
        get("bilstm_layers", c.bilstm_layers);
        get("bilstm_hidden", c.bilstm_hidden);
        get("se_reduction", c.se_reduction);
        get("expansion_factor", c.expansion_factor);
        get("use_skip_link", c.use_skip_link);
        get("use_batchnorm", c.use_batchnorm);
        if (j.contains("block_type")) c.block_type = block_type_from_string(j.at("block_type").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string IKrNetConfig::hash() const {
    const std::string text = to_json().dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

IKrNetConfig IKrNetConfig::paper() { return IKrNetConfig{}; }

IKrNetConfig IKrNetConfig::toy() {
    IKrNetConfig c;
    c.branches = {{15, 3}};
    c.n_blocks = 2;
    c.strides = {1, 2};
    c.initial_filters = 8;
    c.branch_out_len = 4;
    c.branch_out_channels = 8;
    c.bilstm_layers = 2;
    c.bilstm_hidden = 8;
    c.expansion_factor = 2;
    return c;
}

IKrNetConfig IKrNetConfig::desk() {
    IKrNetConfig c;
    c.branches = {{75, 15}, {31, 7}};
    c.n_blocks = 3;
    c.strides = {5, 5, 4};
    c.initial_filters = 4;
    c.filter_growth_every = 1;
    c.branch_out_len = 4;
    c.branch_out_channels = 16;
    c.bilstm_layers = 1;
    c.bilstm_hidden = 16;
    c.expansion_factor = 2;
    return c;
}

}  // namespace ikrnet::model
