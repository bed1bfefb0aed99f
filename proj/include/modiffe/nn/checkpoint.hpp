#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modiffe/error.hpp"
#include "modiffe/nn/matrix.hpp"

namespace modiffe::nn {

// On-disk layout of a .ckpt file:
//
//   bytes 0..7    magic "MDFCKPT1"
//   bytes 8..15   header length H, unsigned 64-bit little-endian
//   next H bytes  UTF-8 JSON header:
//                   { "stage": str, "config": obj, "meta": obj,
//                     "tensors": [ {"name","rows","cols"}, ... ],
//                     "content_hash": "<16 hex digits>" }
//   remainder     tensors in header order, each rows*cols IEEE-754
//                 doubles, little-endian, row-major
//
// content_hash is FNV-1a 64 over the tensor payload. The header is written
// with sorted keys and no whitespace, so load followed by save reproduces
// the file byte for byte.
struct Checkpoint {
    std::string stage;
    nlohmann::json config = nlohmann::json::object();
    nlohmann::json meta = nlohmann::json::object();
    std::vector<std::pair<std::string, Matrix>> tensors;

    void put(std::string name, Matrix m) {
        for (auto& [n, t] : tensors) {
            if (n == name) {
                t = std::move(m);
                return;
            }
        }
        tensors.emplace_back(std::move(name), std::move(m));
    }

    const Matrix& get(const std::string& name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return t;
        throw ContractError("checkpoint '" + stage + "' has no tensor '" + name + "'");
    }

    bool has(const std::string& name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return true;
        return false;
    }
};

namespace detail {

inline constexpr char kCkptMagic[8] = {'M', 'D', 'F', 'C', 'K', 'P', 'T', '1'};

inline void put_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    return s;
}

}  // namespace detail

inline std::string serialize(const Checkpoint& ck) {
    std::string payload;
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& [name, m] : ck.tensors) {
        tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
        for (Eigen::Index i = 0; i < m.size(); ++i) detail::put_u64_le(payload, std::bit_cast<std::uint64_t>(m.data()[i]));
    }
    nlohmann::json header = {{"stage", ck.stage},
                             {"config", ck.config},
                             {"meta", ck.meta},
                             {"tensors", tensors},
                             {"content_hash", detail::hex64(detail::fnv1a(payload))}};
    const std::string text = header.dump();
    std::string out(detail::kCkptMagic, 8);
    detail::put_u64_le(out, text.size());
    out += text;
    out += payload;
    return out;
}

inline Checkpoint deserialize(const std::string& bytes, const std::string& origin = "<memory>") {
    const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 16 || std::memcmp(bytes.data(), detail::kCkptMagic, 8) != 0)
        throw IoError(origin + ": not a checkpoint file");
    const std::uint64_t header_len = detail::get_u64_le(raw + 8);
    if (16 + header_len > bytes.size()) throw IoError(origin + ": truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(16, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(origin + ": bad checkpoint header: " + e.what());
    }
    Checkpoint ck;
    ck.stage = header.at("stage").get<std::string>();
    ck.config = header.value("config", nlohmann::json::object());
    ck.meta = header.value("meta", nlohmann::json::object());
    std::size_t offset = 16 + header_len;
    const std::string_view payload(bytes.data() + offset, bytes.size() - offset);
    if (detail::hex64(detail::fnv1a(payload)) != header.at("content_hash").get<std::string>())
        throw IoError(origin + ": content hash mismatch");
    for (const auto& t : header.at("tensors")) {
        const auto rows = t.at("rows").get<Eigen::Index>();
        const auto cols = t.at("cols").get<Eigen::Index>();
        const auto count = static_cast<std::size_t>(rows * cols);
        if (offset + 8 * count > bytes.size()) throw IoError(origin + ": truncated tensor payload");
        Matrix m(rows, cols);
        for (std::size_t i = 0; i < count; ++i)
            m.data()[i] = std::bit_cast<double>(detail::get_u64_le(raw + offset + 8 * i));
        offset += 8 * count;
        ck.tensors.emplace_back(t.at("name").get<std::string>(), std::move(m));
    }
    if (offset != bytes.size()) throw IoError(origin + ": trailing bytes after payload");
    return ck;
}

inline std::string content_hash(const Checkpoint& ck) {
    std::string payload;
    for (const auto& [name, m] : ck.tensors)
        for (Eigen::Index i = 0; i < m.size(); ++i)
            detail::put_u64_le(payload, std::bit_cast<std::uint64_t>(m.data()[i]));
    return detail::hex64(detail::fnv1a(payload));
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    const std::string bytes = serialize(ck);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str(), path);
}

}  // namespace modiffe::nn
