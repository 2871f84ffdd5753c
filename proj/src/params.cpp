#include "dmn/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "dmn/error.hpp"

namespace dmn {

Tensor ParamSet::create(const std::string& name, std::vector<std::size_t> shape,
                        std::size_t fan_in, std::mt19937_64& rng) {
    if (index_.count(name)) {
        throw ContractError("parameter '" + name + "' registered twice");
    }
    Tensor t;
    if (fan_in == 0) {
        t = Tensor::zeros(std::move(shape), true);
    } else {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        t = Tensor::uniform(std::move(shape), -bound, bound, rng, true);
    }
    index_[name] = items_.size();
    items_.emplace_back(name, t);
    return t;
}

bool ParamSet::contains(const std::string& name) const { return index_.count(name) != 0; }

Tensor ParamSet::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
    return items_[it->second].second;
}

std::size_t ParamSet::total_elements() const {
    std::size_t n = 0;
    for (const auto& [name, t] : items_) n += t.size();
    return n;
}

void ParamSet::zero_grad() {
    for (auto& [name, t] : items_) t.zero_grad();
}

// --- checkpoint format ------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'M', 'N', 'W'};
constexpr std::uint8_t kVersion = 1;

void put_u8(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }

void put_u16(std::ostream& os, std::uint16_t v) {
    for (int i = 0; i < 2; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u32(std::ostream& os, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::ostream& os, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    for (int i = 0; i < 8; ++i) os.put(static_cast<char>((bits >> (8 * i)) & 0xff));
}

std::uint8_t get_u8(std::istream& is, const std::string& path) {
    const int c = is.get();
    if (c == EOF) throw FormatError("checkpoint '" + path + "' is truncated");
    return static_cast<std::uint8_t>(c);
}

std::uint16_t get_u16(std::istream& is, const std::string& path) {
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(get_u8(is, path)) << (8 * i);
    return v;
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(get_u8(is, path)) << (8 * i);
    return v;
}

double get_f64(std::istream& is, const std::string& path) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(get_u8(is, path)) << (8 * i);
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
}

} // namespace

void save_checkpoint(const ParamSet& params, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os.write(kMagic, 4);
    put_u8(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(params.count()));
    for (const auto& [name, t] : params.items()) {
        if (name.size() > 0xffff) throw ContractError("parameter name too long: " + name);
        put_u16(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u8(os, static_cast<std::uint8_t>(t.rank()));
        for (std::size_t d : t.shape()) put_u32(os, static_cast<std::uint32_t>(d));
        for (double v : t.value()) put_f64(os, v);
    }
    if (!os) throw IoError("write to '" + path + "' failed");
}

void load_checkpoint(ParamSet& params, const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("checkpoint '" + path + "' has bad magic (expected DMNW)");
    }
    const std::uint8_t ver = get_u8(is, path);
    if (ver != kVersion) {
        throw FormatError("checkpoint '" + path + "' has unsupported version " +
                          std::to_string(ver) + " (expected " + std::to_string(kVersion) + ")");
    }
    const std::uint32_t count = get_u32(is, path);
    if (count != params.count()) {
        throw FormatError("checkpoint '" + path + "' holds " + std::to_string(count) +
                          " parameters, model expects " + std::to_string(params.count()));
    }
    for (std::uint32_t r = 0; r < count; ++r) {
        const std::uint16_t name_len = get_u16(is, path);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (is.gcount() != name_len) throw FormatError("checkpoint '" + path + "' is truncated");
        const std::uint8_t ndim = get_u8(is, path);
        std::vector<std::size_t> shape(ndim);
        for (std::uint8_t d = 0; d < ndim; ++d) shape[d] = get_u32(is, path);
        if (!params.contains(name)) {
            throw FormatError("checkpoint '" + path + "' carries unknown parameter '" + name +
                              "'");
        }
        Tensor t = params.at(name);
        if (t.shape() != shape) {
            throw FormatError("checkpoint '" + path + "': parameter '" + name + "' has shape " +
                              shape_to_string(shape) + ", model expects " +
                              shape_to_string(t.shape()));
        }
        for (double& v : t.value()) v = get_f64(is, path);
    }
}

} // namespace dmn
