#include "dvq/serialize.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dvq::io {

namespace {
constexpr char kMagic[8] = {'D', 'V', 'Q', 'T', '0', '0', '0', '1'};

template <typename T>
void write_le(std::ostream& os, T v) {
    // Little-endian host assumed (x86/arm64); layout is still documented as LE.
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("archive: unexpected end of file");
    return v;
}
}  // namespace

void write_u32(std::ostream& os, uint32_t v) { write_le(os, v); }
void write_i32(std::ostream& os, int32_t v) { write_le(os, v); }
void write_f32(std::ostream& os, float v) { write_le(os, v); }
void write_f64(std::ostream& os, double v) { write_le(os, v); }
uint32_t read_u32(std::istream& is) { return read_le<uint32_t>(is); }
int32_t read_i32(std::istream& is) { return read_le<int32_t>(is); }
float read_f32(std::istream& is) { return read_le<float>(is); }
double read_f64(std::istream& is) { return read_le<double>(is); }

void save_tensors(const TensorMap& tensors, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os.write(kMagic, sizeof(kMagic));
    write_u32(os, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, m] : tensors) {
        if (name.size() > 0xffff) throw std::invalid_argument("tensor name too long");
        uint16_t len = static_cast<uint16_t>(name.size());
        write_le(os, len);
        os.write(name.data(), len);
        write_u32(os, static_cast<uint32_t>(m.rows()));
        write_u32(os, static_cast<uint32_t>(m.cols()));
        for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < m.cols(); ++c) write_f64(os, m(r, c));
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

TensorMap load_tensors(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("bad archive magic/version: " + path);
    uint32_t count = read_u32(is);
    TensorMap out;
    for (uint32_t i = 0; i < count; ++i) {
        uint16_t len = read_le<uint16_t>(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        uint32_t rows = read_u32(is), cols = read_u32(is);
        ad::Mat m(rows, cols);
        for (uint32_t r = 0; r < rows; ++r)
            for (uint32_t c = 0; c < cols; ++c) m(r, c) = read_f64(is);
        out[name] = std::move(m);
    }
    return out;
}

TensorMap params_to_tensors(const ad::ParamStore& params, bool with_opt_state) {
    TensorMap out;
    for (const auto& name : params.names()) {
        const ad::Param& p = params.at(name);
        out[name] = p.value;
        if (with_opt_state) {
            out[name + ".m"] = p.adam_m;
            out[name + ".v"] = p.adam_v;
        }
    }
    return out;
}

void tensors_to_params(const TensorMap& tensors, ad::ParamStore& params,
                       bool with_opt_state) {
    for (const auto& name : params.names()) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw std::runtime_error("checkpoint missing tensor: " + name);
        ad::Param& p = params.at(name);
        if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols())
            throw std::runtime_error("checkpoint shape mismatch: " + name);
        p.value = it->second;
        if (with_opt_state) {
            p.adam_m = tensors.at(name + ".m");
            p.adam_v = tensors.at(name + ".v");
        }
    }
}

}  // namespace dvq::io
