#include "unimat/nn_checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>

#include "unimat/errors.hpp"

namespace unimat {

namespace {

constexpr char magic[8] = {'U', 'N', 'I', 'M', 'A', 'T', '0', '1'};

struct writer {
    std::FILE* f;
    const std::string& path;
    void bytes(const void* p, std::size_t n) {
        if (std::fwrite(p, 1, n, f) != n) throw io_error("write failed: " + path);
    }
    void u32(std::uint32_t v) {
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        bytes(b, 4);
    }
    void u64(std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        bytes(b, 8);
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
};

struct reader {
    std::FILE* f;
    const std::string& path;
    void bytes(void* p, std::size_t n) {
        if (std::fread(p, 1, n, f) != n) throw checkpoint_error("truncated checkpoint: " + path);
    }
    std::uint32_t u32() {
        unsigned char b[4];
        bytes(b, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        unsigned char b[8];
        bytes(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        std::uint32_t n = u32();
        if (n > (1u << 28)) throw checkpoint_error("corrupt string length in " + path);
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
};

void write_section(writer& w, const std::vector<named_array>& arrays) {
    w.u32(static_cast<std::uint32_t>(arrays.size()));
    for (const named_array& a : arrays) {
        w.str(a.name);
        w.u32(static_cast<std::uint32_t>(a.shape.size()));
        std::size_t count = 1;
        for (int d : a.shape) {
            if (d < 1) throw checkpoint_error("non-positive dim in array " + a.name);
            w.u32(static_cast<std::uint32_t>(d));
            count *= static_cast<std::size_t>(d);
        }
        if (count != a.data.size())
            throw checkpoint_error("shape/data mismatch in array " + a.name);
        w.u64(count);
        for (double v : a.data) w.f64(v);
    }
}

std::vector<named_array> read_section(reader& r) {
    std::uint32_t n = r.u32();
    std::vector<named_array> arrays(n);
    for (named_array& a : arrays) {
        a.name = r.str();
        std::uint32_t nd = r.u32();
        if (nd > 8) throw checkpoint_error("corrupt rank in array " + a.name);
        a.shape.resize(nd);
        std::size_t count = 1;
        for (std::uint32_t i = 0; i < nd; ++i) {
            std::uint32_t d = r.u32();
            if (d < 1) throw checkpoint_error("non-positive dim in array " + a.name);
            a.shape[i] = static_cast<int>(d);
            count *= d;
        }
        std::uint64_t stored = r.u64();
        if (stored != count) throw checkpoint_error("shape/count mismatch in array " + a.name);
        a.data.resize(count);
        for (double& v : a.data) v = r.f64();
    }
    return arrays;
}

} // namespace

void save_checkpoint(const checkpoint_data& ck, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw io_error("cannot open for write: " + path);
    try {
        writer w{f, path};
        w.bytes(magic, 8);
        w.u64(static_cast<std::uint64_t>(ck.step));
        w.str(ck.config_json);
        w.str(ck.rng_state);
        w.u64(ck.stream.epoch);
        w.u64(static_cast<std::uint64_t>(ck.stream.pos));
        write_section(w, ck.params);
        write_section(w, ck.ema);
        write_section(w, ck.adam_m);
        write_section(w, ck.adam_v);
    } catch (...) {
        std::fclose(f);
        throw;
    }
    if (std::fclose(f) != 0) throw io_error("close failed: " + path);
}

checkpoint_data load_checkpoint(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw io_error("cannot open: " + path);
    checkpoint_data ck;
    try {
        reader r{f, path};
        char m[8];
        r.bytes(m, 8);
        if (std::memcmp(m, magic, 8) != 0)
            throw checkpoint_error("bad checkpoint magic in " + path);
        ck.step = static_cast<std::int64_t>(r.u64());
        ck.config_json = r.str();
        ck.rng_state = r.str();
        ck.stream.epoch = r.u64();
        ck.stream.pos = static_cast<int>(r.u64());
        ck.params = read_section(r);
        ck.ema = read_section(r);
        ck.adam_m = read_section(r);
        ck.adam_v = read_section(r);
        if (std::fgetc(f) != EOF) throw checkpoint_error("trailing bytes in " + path);
    } catch (...) {
        std::fclose(f);
        throw;
    }
    std::fclose(f);
    return ck;
}

std::vector<named_array> arrays_from_values(const param_store& ps,
                                            const std::vector<double>& values) {
    if (values.size() != ps.values().size())
        throw shape_mismatch("flat value length does not match parameter store");
    std::vector<named_array> out;
    out.reserve(ps.entries().size());
    for (const param_store::entry& e : ps.entries()) {
        named_array a;
        a.name = e.name;
        a.shape = e.shape;
        a.data.assign(values.begin() + static_cast<std::ptrdiff_t>(e.offset),
                      values.begin() + static_cast<std::ptrdiff_t>(e.offset + e.size));
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<double> flat_from_arrays(const param_store& ps,
                                     const std::vector<named_array>& arrays) {
    if (arrays.size() != ps.entries().size())
        throw checkpoint_error("parameter array count does not match model");
    std::vector<double> flat(ps.values().size());
    std::vector<bool> used(arrays.size(), false);
    for (const param_store::entry& e : ps.entries()) {
        const named_array* found = nullptr;
        for (std::size_t i = 0; i < arrays.size(); ++i) {
            if (!used[i] && arrays[i].name == e.name) {
                used[i] = true;
                found = &arrays[i];
                break;
            }
        }
        if (!found) throw checkpoint_error("missing parameter array: " + e.name);
        if (found->shape != e.shape || found->data.size() != e.size)
            throw checkpoint_error("shape mismatch for parameter array: " + e.name);
        std::copy(found->data.begin(), found->data.end(),
                  flat.begin() + static_cast<std::ptrdiff_t>(e.offset));
    }
    return flat;
}

} // namespace unimat
