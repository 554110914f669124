#include "ikrnet/nn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "ikrnet/errors.hpp"
#include "ikrnet/record_io.hpp"

namespace ikrnet::nn {

namespace {

constexpr char kMagic[8] = {'I', 'K', 'R', 'N', 'C', 'K', 'P', 'T'};

template <typename U>
void append_le(std::string& out, U value) {
    static_assert(std::is_trivially_copyable_v<U>);
    char bytes[sizeof(U)];
    std::memcpy(bytes, &value, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes, bytes + sizeof(U));
    }
    out.append(bytes, sizeof(U));
}

template <typename U>
U read_le(const char* p) {
    char bytes[sizeof(U)];
    std::memcpy(bytes, p, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes, bytes + sizeof(U));
    }
    U value;
    std::memcpy(&value, bytes, sizeof(U));
    return value;
}

struct Split {
    nlohmann::json header;
    std::size_t payload_offset = 0;
};

Split split(const std::string& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
        throw IntegrityError("not an ikrnet checkpoint");
    }
    const auto n = read_le<std::uint64_t>(bytes.data() + 8);
    if (n > bytes.size() - 16) {
        throw IntegrityError("checkpoint header truncated");
    }
    Split s;
    try {
        s.header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(n));
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }
    s.payload_offset = 16 + static_cast<std::size_t>(n);
    return s;
}

template <typename T>
std::vector<const NamedTensor<T>*> ordered(const ParameterStore<T>& store) {
    std::vector<const NamedTensor<T>*> all;
    for (const auto& p : store.parameters()) all.push_back(&p);
    for (const auto& b : store.buffers()) all.push_back(&b);
    return all;
}

}  // namespace

template <>
std::string dtype_name<float>() {
    return "f32";
}
template <>
std::string dtype_name<double>() {
    return "f64";
}

template <typename T>
std::string checkpoint_bytes(const ParameterStore<T>& store, const std::string& config_hash,
                             const nlohmann::json& config) {
    nlohmann::json header;
    header["format"] = 1;
    header["dtype"] = dtype_name<T>();
    header["config_hash"] = config_hash;
    header["config"] = config;
    auto& entries = header["tensors"] = nlohmann::json::array();
    for (const auto& p : store.parameters()) {
        entries.push_back({{"name", p.name}, {"kind", "param"}, {"shape", p.tensor.shape()}});
    }
    for (const auto& b : store.buffers()) {
        entries.push_back({{"name", b.name}, {"kind", "buffer"}, {"shape", b.tensor.shape()}});
    }
    const std::string text = header.dump();
    std::string out(kMagic, 8);
    append_le<std::uint64_t>(out, text.size());
    out += text;
    for (const auto* nt : ordered(store)) {
        for (T v : nt->tensor.data()) append_le<T>(out, v);
    }
    return out;
}

nlohmann::json checkpoint_header(const std::string& bytes) { return split(bytes).header; }

template <typename T>
void load_checkpoint_bytes(const std::string& bytes, ParameterStore<T>& store, const std::string& expected_hash) {
    const Split s = split(bytes);
    const auto& h = s.header;
    if (h.value("dtype", "") != dtype_name<T>()) {
        throw IntegrityError("checkpoint dtype " + h.value("dtype", std::string("?")) + " does not match " +
                             dtype_name<T>());
    }
    if (h.value("config_hash", "") != expected_hash) {
        throw IntegrityError("checkpoint config hash " + h.value("config_hash", std::string("?")) +
                             " does not match model config hash " + expected_hash);
    }
    const auto all = ordered(store);
    const auto& entries = h.at("tensors");
    if (entries.size() != all.size()) {
        throw IntegrityError("checkpoint holds " + std::to_string(entries.size()) + " tensors, model has " +
                             std::to_string(all.size()));
    }
    std::size_t offset = s.payload_offset;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto& e = entries[i];
        if (e.at("name").get<std::string>() != all[i]->name ||
            e.at("shape").get<Shape>() != all[i]->tensor.shape()) {
            throw IntegrityError("checkpoint tensor " + std::to_string(i) + " (" + e.at("name").get<std::string>() +
                                 ") does not match model tensor " + all[i]->name);
        }
        const std::size_t n = all[i]->tensor.numel();
        if (bytes.size() < offset + n * sizeof(T)) {
            throw IntegrityError("checkpoint payload truncated at " + all[i]->name);
        }
        Tensor<T> t = all[i]->tensor;
        auto dst = t.data();
        for (std::size_t j = 0; j < n; ++j) dst[j] = read_le<T>(bytes.data() + offset + j * sizeof(T));
        offset += n * sizeof(T);
    }
    if (offset != bytes.size()) {
        throw IntegrityError("checkpoint has trailing bytes");
    }
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParameterStore<T>& store,
                     const std::string& config_hash, const nlohmann::json& config) {
    io::write_text(path, checkpoint_bytes(store, config_hash, config));
}

template <typename T>
void load_checkpoint(const std::filesystem::path& path, ParameterStore<T>& store, const std::string& expected_hash) {
    load_checkpoint_bytes(io::read_text(path), store, expected_hash);
}

nlohmann::json read_checkpoint_header(const std::filesystem::path& path) {
    return checkpoint_header(io::read_text(path));
}

template std::string checkpoint_bytes(const ParameterStore<float>&, const std::string&, const nlohmann::json&);
template std::string checkpoint_bytes(const ParameterStore<double>&, const std::string&, const nlohmann::json&);
template void load_checkpoint_bytes(const std::string&, ParameterStore<float>&, const std::string&);
template void load_checkpoint_bytes(const std::string&, ParameterStore<double>&, const std::string&);
template void save_checkpoint(const std::filesystem::path&, const ParameterStore<float>&, const std::string&,
                              const nlohmann::json&);
template void save_checkpoint(const std::filesystem::path&, const ParameterStore<double>&, const std::string&,
                              const nlohmann::json&);
template void load_checkpoint(const std::filesystem::path&, ParameterStore<float>&, const std::string&);
template void load_checkpoint(const std::filesystem::path&, ParameterStore<double>&, const std::string&);

}  // namespace ikrnet::nn
