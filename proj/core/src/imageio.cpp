#include "diffdepth/imageio.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "diffdepth/errors.hpp"
#include "diffdepth/fsio.hpp"

namespace diffdepth {

namespace {

// Reads one whitespace-delimited token, skipping '#' comment lines.
std::string next_token(std::istream& is) {
    std::string tok;
    int c;
    while ((c = is.get()) != EOF) {
        if (c == '#') {
            while ((c = is.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (!isspace(c)) {
            tok.push_back((char)c);
            break;
        }
    }
    while ((c = is.get()) != EOF && !isspace(c)) tok.push_back((char)c);
    return tok;
}

long offset_of(std::istream& is) {
    if (!is) is.clear();  // a failed read leaves tellg unusable
    auto pos = is.tellg();
    return pos < 0 ? 0 : (long)pos;
}

}  // namespace

void write_pfm(const std::string& path, const Tensor<float>& img) {
    if (img.rank() != 3 || (img.dim(0) != 1 && img.dim(0) != 3))
        throw ShapeError("write_pfm: want [1,h,w] or [3,h,w], got " + shape_str(img.shape));
    int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
    atomic_write_file(path, [&](std::ostream& os) {
        os << (c == 1 ? "Pf" : "PF") << "\n" << w << " " << h << "\n" << "-1.0" << "\n";
        std::vector<float> row((size_t)(w * c));
        for (int64_t y = h - 1; y >= 0; --y) {  // bottom-up
            for (int64_t x = 0; x < w; ++x)
                for (int64_t ch = 0; ch < c; ++ch) row[(size_t)(x * c + ch)] = img.at(ch, y, x);
            os.write(reinterpret_cast<const char*>(row.data()),
                     (std::streamsize)(row.size() * sizeof(float)));
        }
    });
}

Tensor<float> read_pfm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("read_pfm: cannot open " + path);
    std::string magic = next_token(is);
    if (magic.empty()) throw ParseError("read_pfm: empty file", 0);
    int64_t c;
    if (magic == "Pf")
        c = 1;
    else if (magic == "PF")
        c = 3;
    else
        throw ParseError("read_pfm: bad magic '" + magic + "'", 0);
    std::string ws = next_token(is), hs = next_token(is), ss = next_token(is);
    int64_t w = 0, h = 0;
    double scale = 0.0;
    try {
        w = std::stoll(ws);
        h = std::stoll(hs);
        scale = std::stod(ss);
    } catch (const std::exception&) {
        throw ParseError("read_pfm: malformed header fields '" + ws + " " + hs + " " + ss + "'",
                         offset_of(is));
    }
    if (w < 1 || h < 1) throw ParseError("read_pfm: bad dimensions", offset_of(is));
    if (scale > 0.0)
        throw ParseError("read_pfm: positive scale (big-endian payload) is not supported",
                         offset_of(is));
    if (scale == 0.0) throw ParseError("read_pfm: zero scale", offset_of(is));
    Tensor<float> img({c, h, w});
    std::vector<float> row((size_t)(w * c));
    for (int64_t y = h - 1; y >= 0; --y) {
        is.read(reinterpret_cast<char*>(row.data()), (std::streamsize)(row.size() * sizeof(float)));
        if (!is)
            throw ParseError("read_pfm: truncated payload (row " + std::to_string(y) + ")",
                             offset_of(is));
        for (int64_t x = 0; x < w; ++x)
            for (int64_t ch = 0; ch < c; ++ch) img.at(ch, y, x) = row[(size_t)(x * c + ch)];
    }
    return img;
}

void write_pgm(const std::string& path, const Tensor<float>& img, int maxval, float lo, float hi) {
    if (img.rank() != 2) throw ShapeError("write_pgm: want [h,w]");
    if (maxval < 1 || maxval > 65535) throw ValueError("write_pgm: maxval out of range");
    if (!(hi > lo)) throw ValueError("write_pgm: need hi > lo");
    int64_t h = img.dim(0), w = img.dim(1);
    atomic_write_file(path, [&](std::ostream& os) {
        os << "P5\n" << w << " " << h << "\n" << maxval << "\n";
        for (int64_t i = 0; i < h * w; ++i) {
            double t = ((double)img[i] - lo) / (hi - lo);
            t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
            unsigned v = (unsigned)std::lround(t * maxval);
            if (maxval > 255) {
                unsigned char b[2] = {(unsigned char)(v >> 8), (unsigned char)(v & 0xff)};
                os.write(reinterpret_cast<const char*>(b), 2);
            } else {
                unsigned char b = (unsigned char)v;
                os.write(reinterpret_cast<const char*>(&b), 1);
            }
        }
    });
}

PgmImage read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("read_pgm: cannot open " + path);
    std::string magic = next_token(is);
    if (magic.empty()) throw ParseError("read_pgm: empty file", 0);
    if (magic != "P5") throw ParseError("read_pgm: bad magic '" + magic + "'", 0);
    std::string ws = next_token(is), hs = next_token(is), ms = next_token(is);
    int64_t w = 0, h = 0;
    long maxval = 0;
    try {
        w = std::stoll(ws);
        h = std::stoll(hs);
        maxval = std::stol(ms);
    } catch (const std::exception&) {
        throw ParseError("read_pgm: malformed header fields", offset_of(is));
    }
    if (w < 1 || h < 1) throw ParseError("read_pgm: bad dimensions", offset_of(is));
    if (maxval < 1 || maxval > 65535)
        throw ParseError("read_pgm: unsupported max value " + std::to_string(maxval),
                         offset_of(is));
    PgmImage out;
    out.maxval = (int)maxval;
    out.img = Tensor<float>({h, w});
    int64_t n = h * w;
    if (maxval > 255) {
        std::vector<unsigned char> buf((size_t)(2 * n));
        is.read(reinterpret_cast<char*>(buf.data()), (std::streamsize)buf.size());
        if (!is) throw ParseError("read_pgm: truncated payload", offset_of(is));
        for (int64_t i = 0; i < n; ++i)
            out.img[i] = (float)((buf[(size_t)(2 * i)] << 8) | buf[(size_t)(2 * i + 1)]);
    } else {
        std::vector<unsigned char> buf((size_t)n);
        is.read(reinterpret_cast<char*>(buf.data()), (std::streamsize)buf.size());
        if (!is) throw ParseError("read_pgm: truncated payload", offset_of(is));
        for (int64_t i = 0; i < n; ++i) out.img[i] = (float)buf[(size_t)i];
    }
    return out;
}

}  // namespace diffdepth
