#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ikrnet::model {

enum class BlockType { InvertedResidual, Basic };

std::string to_string(BlockType type);
BlockType block_type_from_string(const std::string& s);

struct KernelPair {
    std::size_t large = 0;  // front conv kernel lk
    std::size_t small = 0;  // block kernel k
    bool operator==(const KernelPair&) const = default;
};

struct IKrNetConfig {
    std::vector<KernelPair> branches{{125, 25}, {75, 15}, {31, 7}, {15, 3}};
    std::vector<std::size_t> strides{1, 5, 1, 5, 1, 4, 1, 4, 1, 3};
    std::size_t initial_filters = 64;
    std::size_t n_blocks = 10;
    std::size_t filter_growth_every = 4;
    std::size_t filter_growth_factor = 2;
    std::size_t branch_out_len = 4;
    std::size_t branch_out_channels = 256;
    std::size_t bilstm_layers = 2;
    std::size_t bilstm_hidden = 256;
    std::size_t se_reduction = 4;
    std::size_t expansion_factor = 6;
    bool use_skip_link = true;
    bool use_batchnorm = true;
    BlockType block_type = BlockType::InvertedResidual;

    bool operator==(const IKrNetConfig&) const = default;

    // Throws ConfigError naming the offending field.
    void validate() const;

    // Output channels of block i.
    std::size_t block_channels(std::size_t i) const;
    std::size_t largest_front_kernel() const;

    nlohmann::json to_json() const;
    // Missing keys keep their defaults; unknown keys and bad values throw ConfigError.
    static IKrNetConfig from_json(const nlohmann::json& j);

    // FNV-1a 64 over the compact JSON dump, lowercase hex.
    std::string hash() const;

    static IKrNetConfig paper();
    // Smallest config used for shape tests: one (15,3) branch, 2 blocks, 8 filters.
    static IKrNetConfig toy();
    // Desk-scale config for the synthetic experiments: two wide branches and
    // aggressive striding so a 10 s record fits a few milliseconds per sample.
    static IKrNetConfig desk();
};

}  // namespace ikrnet::model
