#include "distill/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "distill/core.hpp"

namespace distill {

namespace {

static_assert(std::endian::native == std::endian::little, "container I/O assumes little-endian host");

constexpr char kMagic[8] = {'N', 'T', 'C', '1', '\0', '\0', '\0', '\0'};

std::size_t align8(std::size_t v) { return (v + 7) & ~std::size_t{7}; }

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

}  // namespace

std::string encode_container(const TensorMap& tensors) {
    nlohmann::json header = nlohmann::json::object();
    std::size_t offset = 0;
    for (const auto& [name, t] : tensors) {
        if (shape_numel(t.shape) != t.numel())
            throw DataError("tensor '" + name + "' shape does not match its data");
        header[name] = {{"dtype", "f32"}, {"shape", t.shape}, {"offset", offset}};
        offset = align8(offset + t.numel() * sizeof(float));
    }
    std::string json_text = header.dump();
    json_text.append(align8(16 + json_text.size()) - 16 - json_text.size(), ' ');

    std::string out(kMagic, kMagic + 8);
    put_u64(out, json_text.size());
    out += json_text;
    const std::size_t payload_start = out.size();
    out.resize(payload_start + offset, '\0');
    for (const auto& [name, t] : tensors) {
        const std::size_t at = payload_start + header[name]["offset"].get<std::size_t>();
        std::memcpy(out.data() + at, t.data.data(), t.numel() * sizeof(float));
    }
    return out;
}

void write_container(const std::filesystem::path& path, const TensorMap& tensors) {
    const std::string bytes = encode_container(tensors);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to " + path.string());
}

TensorMap decode_container(const std::string& bytes) {
    if (bytes.size() < 16) throw DataError("container truncated: missing header");
    if (std::memcmp(bytes.data(), kMagic, 8) != 0) throw DataError("container: bad magic");
    const std::uint64_t H = get_u64(bytes, 8);
    if (H > bytes.size() - 16) throw DataError("container truncated: header runs past end of file");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(H));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("container: malformed header: ") + e.what());
    }
    if (!header.is_object()) throw DataError("container: header is not an object");

    const std::size_t payload_start = 16 + H;
    const std::size_t payload_size = bytes.size() - payload_start;
    TensorMap out;
    for (auto it = header.begin(); it != header.end(); ++it) {
        const auto& entry = it.value();
        if (!entry.is_object() || entry.value("dtype", "") != "f32" || !entry.contains("shape") ||
            !entry.contains("offset"))
            throw DataError("container: malformed entry for '" + it.key() + "'");
        Tensor t;
        t.shape = entry["shape"].get<std::vector<std::size_t>>();
        const auto offset = entry["offset"].get<std::size_t>();
        if (offset % 8 != 0) throw DataError("container: misaligned offset for '" + it.key() + "'");
        const std::size_t n = shape_numel(t.shape);
        if (offset > payload_size || n * sizeof(float) > payload_size - offset)
            throw DataError("container truncated: payload of '" + it.key() + "' runs past end of file");
        t.data.resize(n);
        std::memcpy(t.data.data(), bytes.data() + payload_start + offset, n * sizeof(float));
        out.emplace(it.key(), std::move(t));
    }
    return out;
}

TensorMap read_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return decode_container(ss.str());
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace distill
