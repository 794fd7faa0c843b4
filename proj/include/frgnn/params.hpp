#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "frgnn/dense.hpp"
#include "frgnn/error.hpp"
#include "frgnn/rng.hpp"

namespace frgnn {

/// Ordered, uniquely named set of parameter matrices.
class ParamSet {
public:
    struct Entry {
        std::string name;
        DenseMatrix value;
        friend bool operator==(const Entry&, const Entry&) = default;
    };

    void add(std::string name, DenseMatrix value) {
        if (index_of(name) != npos) throw StateError("ParamSet: duplicate parameter '" + name + "'");
        entries_.push_back({std::move(name), std::move(value)});
    }

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    Entry& operator[](std::size_t i) { return entries_[i]; }
    const Entry& operator[](std::size_t i) const { return entries_[i]; }

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    std::size_t index_of(const std::string& name) const {
        for (std::size_t i = 0; i < entries_.size(); ++i)
            if (entries_[i].name == name) return i;
        return npos;
    }
    bool contains(const std::string& name) const { return index_of(name) != npos; }

    const DenseMatrix& get(const std::string& name) const {
        const std::size_t i = index_of(name);
        if (i == npos) throw StateError("ParamSet: no parameter '" + name + "'");
        return entries_[i].value;
    }
    DenseMatrix& get(const std::string& name) {
        const std::size_t i = index_of(name);
        if (i == npos) throw StateError("ParamSet: no parameter '" + name + "'");
        return entries_[i].value;
    }

    /// Same names and shapes, all zeros.
    ParamSet zeros_like() const {
        ParamSet z;
        for (const auto& e : entries_) z.add(e.name, DenseMatrix(e.value.rows(), e.value.cols()));
        return z;
    }

    bool same_layout(const ParamSet& o) const {
        if (o.size() != size()) return false;
        for (std::size_t i = 0; i < size(); ++i)
            if (entries_[i].name != o[i].name || !entries_[i].value.same_shape(o[i].value)) return false;
        return true;
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.value.size();
        return n;
    }

    friend bool operator==(const ParamSet&, const ParamSet&) = default;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    std::vector<Entry> entries_;
};

/// Glorot/Xavier uniform: U(-b, b), b = sqrt(6 / (fan_in + fan_out)).
inline DenseMatrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseMatrix w(fan_in, fan_out);
    for (double& v : w.values()) v = rng.uniform(-bound, bound);
    return w;
}

// ---------------------------------------------------------------------------
// Checkpoint format (little-endian):
//   "FRGN" | u32 version | repeated { u32 name_len | name bytes | u64 rows |
//   u64 cols | f64 × rows·cols row-major }
// Parameters run to end of file.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& at) {
    if (at + sizeof(T) > in.size()) throw DataError("checkpoint: truncated");
    T v;
    std::memcpy(&v, in.data() + at, sizeof(T));
    at += sizeof(T);
    return v;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + path.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("write failed for " + path.string());
}

} // namespace detail

inline std::string serialize_checkpoint(const ParamSet& params) {
    std::string out = "FRGN";
    detail::put<std::uint32_t>(out, kCheckpointVersion);
    for (const auto& e : params) {
        detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
        out += e.name;
        detail::put<std::uint64_t>(out, e.value.rows());
        detail::put<std::uint64_t>(out, e.value.cols());
        for (double v : e.value.values()) detail::put<double>(out, v);
    }
    return out;
}

inline ParamSet deserialize_checkpoint(const std::string& bytes) {
    if (bytes.size() < 8 || bytes.compare(0, 4, "FRGN") != 0) throw DataError("checkpoint: bad magic");
    std::size_t at = 4;
    const auto version = detail::take<std::uint32_t>(bytes, at);
    if (version != kCheckpointVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
    ParamSet params;
    while (at < bytes.size()) {
        const auto len = detail::take<std::uint32_t>(bytes, at);
        if (at + len > bytes.size()) throw DataError("checkpoint: truncated name");
        std::string name = bytes.substr(at, len);
        at += len;
        const auto rows = detail::take<std::uint64_t>(bytes, at);
        const auto cols = detail::take<std::uint64_t>(bytes, at);
        if (rows != 0 && cols > (bytes.size() - at) / 8 / rows) throw DataError("checkpoint: truncated payload");
        DenseMatrix m(rows, cols);
        for (double& v : m.values()) v = detail::take<double>(bytes, at);
        params.add(std::move(name), std::move(m));
    }
    return params;
}

inline void save_checkpoint(const ParamSet& params, const std::filesystem::path& path) {
    detail::write_file(path, serialize_checkpoint(params));
}

inline ParamSet load_checkpoint(const std::filesystem::path& path) {
    return deserialize_checkpoint(detail::read_file(path));
}

/// FNV-1a 64 of a byte string.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t checkpoint_hash(const ParamSet& params) { return fnv1a64(serialize_checkpoint(params)); }

} // namespace frgnn
