#include "diffdepth/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>

#include "diffdepth/errors.hpp"
#include "diffdepth/fsio.hpp"

namespace diffdepth {

namespace {
constexpr uint32_t kMagic = 0x44444350;  // "DDCP"
constexpr uint32_t kVersion = 1;

template <class T>
void write_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_raw(std::istream& is, const char* what) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw ParseError(std::string("checkpoint: truncated reading ") + what,
                              (long)is.gcount());
    return v;
}
}  // namespace

void save_checkpoint(const std::string& path, const NamedTensors& tensors,
                     const std::vector<std::string>& manifest_lines) {
    atomic_write_file(path, [&](std::ostream& os) {
        write_raw(os, kMagic);
        write_raw(os, kVersion);
        write_raw(os, (uint64_t)tensors.size());
        for (const auto& [name, t] : tensors) {
            write_raw(os, (uint32_t)name.size());
            os.write(name.data(), (std::streamsize)name.size());
            write_raw(os, (uint32_t)t.shape.size());
            for (int64_t d : t.shape) write_raw(os, (int64_t)d);
            os.write(reinterpret_cast<const char*>(t.data.data()),
                     (std::streamsize)(t.data.size() * sizeof(float)));
        }
    });
    std::string manifest = path + ".manifest.txt";
    atomic_write_file(manifest, [&](std::ostream& os) {
        os << "tensors " << tensors.size() << "\n";
        for (const auto& [name, t] : tensors) os << name << " " << shape_str(t.shape) << "\n";
        for (const auto& line : manifest_lines) os << line << "\n";
    });
}

NamedTensors load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open " + path);
    if (read_raw<uint32_t>(is, "magic") != kMagic) throw ParseError("checkpoint: bad magic", 0);
    uint32_t version = read_raw<uint32_t>(is, "version");
    if (version != kVersion)
        throw ParseError("checkpoint: unsupported version " + std::to_string(version), 4);
    uint64_t count = read_raw<uint64_t>(is, "tensor count");
    NamedTensors out;
    out.reserve((size_t)count);
    for (uint64_t i = 0; i < count; ++i) {
        uint32_t name_len = read_raw<uint32_t>(is, "name length");
        std::string name((size_t)name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw ParseError("checkpoint: truncated name", (long)is.tellg());
        uint32_t rank = read_raw<uint32_t>(is, "rank");
        Shape shape((size_t)rank);
        for (uint32_t d = 0; d < rank; ++d) shape[d] = read_raw<int64_t>(is, "dim");
        Tensor<float> t(shape);
        is.read(reinterpret_cast<char*>(t.data.data()),
                (std::streamsize)(t.data.size() * sizeof(float)));
        if (!is) throw ParseError("checkpoint: truncated payload for " + name, (long)is.tellg());
        out.emplace_back(std::move(name), std::move(t));
    }
    return out;
}

}  // namespace diffdepth
