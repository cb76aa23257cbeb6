#include "tslearn/persist.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>

#include <boost/crc.hpp>

namespace tsl {

namespace {

using Crc64Ecma = boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, 0, 0, false, false>;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

// Bounds-checked little-endian reader over [0, end).
class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, std::size_t end) : bytes_(bytes), end_(end) {}

    bool has(std::size_t n) const { return pos_ <= end_ && end_ - pos_ >= n; }
    std::size_t pos() const { return pos_; }

    std::optional<std::uint64_t> uint(int width) {
        if (!has(static_cast<std::size_t>(width))) return std::nullopt;
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v |= std::uint64_t{bytes_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
        pos_ += static_cast<std::size_t>(width);
        return v;
    }
    std::optional<std::string> string() {
        const auto n = uint(4);
        if (!n || !has(*n)) return std::nullopt;
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), *n);
        pos_ += *n;
        return s;
    }
    bool skip(std::uint64_t n) {
        if (!has(n)) return false;
        pos_ += n;
        return true;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t end_;
    std::size_t pos_ = 0;
};

constexpr std::size_t kHeaderBytes = sizeof(kCheckpointMagic) + 4;

// Structural walk of `count` parameter records; false if it runs past `end`.
bool walk_parameters(std::span<const std::uint8_t> bytes, std::size_t end, std::size_t count) {
    Reader r(bytes, end);
    r.skip(kHeaderBytes);
    if (!r.string()) return false;
    for (std::size_t i = 0; i < count; ++i) {
        if (!r.string()) return false;
        const auto rank = r.uint(4);
        if (!rank || *rank > 8) return false;
        std::uint64_t numel = 1;
        for (std::uint64_t d = 0; d < *rank; ++d) {
            const auto e = r.uint(8);
            if (!e || *e == 0 || *e > (std::uint64_t{1} << 40)) return false;
            numel *= *e;
            if (numel > (std::uint64_t{1} << 40)) return false;
        }
        if (!r.skip(numel * 4)) return false;
    }
    return true;
}

std::size_t expected_parameter_tensors(const NetworkSpec& spec) {
    std::size_t n = 2;
    for (const auto& l : spec.layers) n += l.has_parameters() ? 2 : 0;
    return n;
}

}  // namespace

std::uint64_t crc64(std::span<const std::uint8_t> bytes) {
    Crc64Ecma crc;
    crc.process_bytes(bytes.data(), bytes.size());
    return crc.checksum();
}

template <class T>
std::vector<std::uint8_t> serialize(const ModelState<T>& model) {
    std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
    put_u32(out, kCheckpointVersion);
    put_string(out, format_spec(model.spec()));
    for (const auto& p : model.parameters()) {
        put_string(out, p.name);
        put_u32(out, static_cast<std::uint32_t>(p.tensor.rank()));
        for (std::size_t e : p.tensor.shape()) put_u64(out, e);
        for (T v : p.tensor.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    put_u64(out, crc64(out));
    return out;
}

ModelState<float> deserialize(std::span<const std::uint8_t> bytes, bool frozen) {
    using Kind = FormatError::Kind;
    if (bytes.size() < sizeof(kCheckpointMagic)) throw FormatError(Kind::Truncated, "checkpoint shorter than its magic");
    if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
        throw FormatError(Kind::Magic, "bad magic: not a checkpoint file");
    }
    Reader header(bytes, bytes.size());
    header.skip(sizeof(kCheckpointMagic));
    const auto version = header.uint(4);
    if (!version) throw FormatError(Kind::Truncated, "checkpoint truncated in header");
    if (*version != kCheckpointVersion) {
        throw FormatError(Kind::Version, "unsupported checkpoint version " + std::to_string(*version));
    }
    if (bytes.size() < kHeaderBytes + 4 + 8) throw FormatError(Kind::Truncated, "checkpoint truncated in header");

    const std::size_t body_end = bytes.size() - 8;
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i) stored |= std::uint64_t{bytes[body_end + static_cast<std::size_t>(i)]} << (8 * i);
    if (crc64(bytes.first(body_end)) != stored) {
        // Tell truncation apart from corruption when the spec text is still readable.
        Reader probe(bytes, bytes.size());
        probe.skip(kHeaderBytes);
        if (const auto text = probe.string()) {
            try {
                const std::size_t count = expected_parameter_tensors(parse_spec(*text));
                if (!walk_parameters(bytes, bytes.size(), count)) {
                    throw FormatError(Kind::Truncated, "checkpoint truncated: parameter data runs past end of file");
                }
            } catch (const ConfigError&) {
            }
        } else {
            throw FormatError(Kind::Truncated, "checkpoint truncated in spec text");
        }
        throw FormatError(Kind::Checksum, "checkpoint checksum mismatch (file corrupted)");
    }

    Reader r(bytes, body_end);
    r.skip(kHeaderBytes);
    const auto text = r.string();
    if (!text) throw FormatError(Kind::Layout, "spec text overruns checkpoint");
    NetworkSpec spec;
    try {
        spec = parse_spec(*text);
        propagate_shapes(spec);
    } catch (const ConfigError& e) {
        throw FormatError(Kind::Spec, std::string("checkpoint spec invalid: ") + e.what());
    }
    std::vector<NamedParameter<float>> params;
    const std::size_t count = expected_parameter_tensors(spec);
    for (std::size_t i = 0; i < count; ++i) {
        const auto name = r.string();
        const auto rank = r.uint(4);
        if (!name || !rank || *rank == 0 || *rank > 8) throw FormatError(Kind::Layout, "malformed parameter record " + std::to_string(i));
        Shape shape;
        for (std::uint64_t d = 0; d < *rank; ++d) {
            const auto e = r.uint(8);
            if (!e || *e == 0) throw FormatError(Kind::Layout, "malformed extents in parameter '" + *name + "'");
            shape.push_back(static_cast<std::size_t>(*e));
        }
        const std::size_t numel = shape_numel(shape);
        if (!r.has(numel * 4)) throw FormatError(Kind::Layout, "parameter '" + *name + "' overruns checkpoint");
        std::vector<float> values(numel);
        for (auto& v : values) v = std::bit_cast<float>(static_cast<std::uint32_t>(*r.uint(4)));
        params.push_back({*name, Tensor<float>(std::move(shape), std::move(values))});
    }
    if (r.pos() != body_end) {
        throw FormatError(Kind::Layout, std::to_string(body_end - r.pos()) + " unexpected bytes after parameters");
    }
    try {
        ModelState<float> model(std::move(spec), std::move(params));
        if (frozen) model.freeze();
        return model;
    } catch (const DimensionError& e) {
        throw FormatError(Kind::Spec, std::string("parameters disagree with spec: ") + e.what());
    }
}

template <class T>
void save(const ModelState<T>& model, const std::filesystem::path& path) {
    const auto bytes = serialize(model);
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw std::runtime_error("cannot move checkpoint into " + path.string() + ": " + ec.message());
}

namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

ModelState<float> load(const std::filesystem::path& path, bool frozen) {
    const auto bytes = read_bytes(path);
    try {
        return deserialize(bytes, frozen);
    } catch (const FormatError& e) {
        throw FormatError(e.kind(), path.string() + ": " + e.what());
    }
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
    return crc64(read_bytes(path));
}

template std::vector<std::uint8_t> serialize<float>(const ModelState<float>&);
template std::vector<std::uint8_t> serialize<double>(const ModelState<double>&);
template void save<float>(const ModelState<float>&, const std::filesystem::path&);
template void save<double>(const ModelState<double>&, const std::filesystem::path&);

}  // namespace tsl
