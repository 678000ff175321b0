#include "mva/serialize.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>

namespace mva {

namespace {

constexpr char kMagic[4] = {'M', 'V', 'A', 'W'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& os, T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
}

}  // namespace

void save_weights(const std::string& path, const WeightContainer& weights) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os.write(kMagic, 4);
    write_le<std::uint32_t>(os, kVersion);
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(weights.size()));
    for (const auto& e : weights) {
        write_le<std::uint32_t>(os, static_cast<std::uint32_t>(e.name.size()));
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        write_le<std::uint32_t>(os, static_cast<std::uint32_t>(e.tensor.rank()));
        for (int d : e.tensor.shape()) write_le<std::uint64_t>(os, static_cast<std::uint64_t>(d));
        for (double v : e.tensor.vec()) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            write_le<std::uint64_t>(os, bits);
        }
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

WeightContainer load_weights(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("bad magic in weight file: " + path);
    const auto version = read_le<std::uint32_t>(is);
    if (version != kVersion)
        throw std::runtime_error("unsupported weight file version " + std::to_string(version));
    const auto count = read_le<std::uint32_t>(is);
    WeightContainer out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = read_le<std::uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const auto rank = read_le<std::uint32_t>(is);
        std::vector<int> shape(rank);
        for (auto& d : shape) d = static_cast<int>(read_le<std::uint64_t>(is));
        Tensor t(shape);
        for (auto& v : t.vec()) {
            std::uint64_t bits = read_le<std::uint64_t>(is);
            std::memcpy(&v, &bits, 8);
        }
        if (!is) throw std::runtime_error("truncated weight file: " + path);
        out.push_back({std::move(name), std::move(t)});
    }
    return out;
}

void save_weights_json(const std::string& path, const WeightContainer& weights) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : weights) {
        nlohmann::json entry;
        entry["name"] = e.name;
        entry["shape"] = e.tensor.shape();
        auto& data = entry["data"] = nlohmann::json::array();
        char buf[24];
        for (double v : e.tensor.vec()) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(bits));
            data.push_back(std::string(buf));
        }
        j.push_back(std::move(entry));
    }
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << j.dump(1);
}

WeightContainer load_weights_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    nlohmann::json j;
    is >> j;
    WeightContainer out;
    for (const auto& entry : j) {
        std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
        Tensor t(shape);
        const auto& data = entry.at("data");
        if (data.size() != t.numel())
            throw std::runtime_error("JSON weight entry size mismatch in " + path);
        for (std::size_t i = 0; i < t.numel(); ++i) {
            std::uint64_t bits = std::stoull(data[i].get<std::string>(), nullptr, 16);
            double v;
            std::memcpy(&v, &bits, 8);
            t[i] = v;
        }
        out.push_back({entry.at("name").get<std::string>(), std::move(t)});
    }
    return out;
}

const Tensor* find_weight(const WeightContainer& w, const std::string& name) {
    for (const auto& e : w)
        if (e.name == name) return &e.tensor;
    return nullptr;
}

}  // namespace mva
