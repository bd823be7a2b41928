#include "diffdepth/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "diffdepth/errors.hpp"
#include "diffdepth/fsio.hpp"
#include "diffdepth/imageio.hpp"
#include "diffdepth/rng.hpp"

namespace diffdepth {

void SceneSpec::validate() const {
    if (width < 4 || height < 4) throw ValueError("SceneSpec: image size too small");
    if (!(d_min > 0.0) || !(d_max > d_min)) throw ValueError("SceneSpec: need 0 < d_min < d_max");
    if (min_primitives < 0 || max_primitives < min_primitives)
        throw ValueError("SceneSpec: bad primitive count range");
    if (tail_exponent < 0.0) throw ValueError("SceneSpec: tail exponent must be >= 0");
}

double sample_power_law(double u, double d_min, double d_max, double a) {
    if (std::abs(a - 1.0) < 1e-9) {
        // density ~ 1/d: log-uniform
        return d_min * std::pow(d_max / d_min, u);
    }
    double p = 1.0 - a;
    double lo = std::pow(d_min, p), hi = std::pow(d_max, p);
    return std::pow(lo + u * (hi - lo), 1.0 / p);
}

namespace {

struct Primitive {
    bool ellipse;
    double cx, cy, rx, ry;
    double depth;
};

void render(const SceneSpec& spec, Rng rng, Sample& out) {
    int64_t h = spec.height, w = spec.width;
    int64_t count = spec.min_primitives == spec.max_primitives
                        ? spec.min_primitives
                        : rng.uniform_int(spec.min_primitives, spec.max_primitives);
    std::vector<Primitive> prims;
    prims.reserve((size_t)count);
    for (int64_t i = 0; i < count; ++i) {
        Primitive p;
        p.ellipse = rng.uniform() < 0.5;
        p.cx = rng.uniform(0.0, (double)w);
        p.cy = rng.uniform(0.0, (double)h);
        p.rx = rng.uniform(0.08, 0.38) * (double)w;
        p.ry = rng.uniform(0.08, 0.38) * (double)h;
        p.depth = sample_power_law(rng.uniform(), spec.d_min, spec.d_max, spec.tail_exponent);
        prims.push_back(p);
    }

    out.depth = DepthMap(h, w, "m");
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            double d = spec.d_max;  // background plane
            for (const auto& p : prims) {
                double dx = ((double)x + 0.5 - p.cx) / p.rx;
                double dy = ((double)y + 0.5 - p.cy) / p.ry;
                bool inside = p.ellipse ? (dx * dx + dy * dy <= 1.0)
                                        : (std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0);
                if (inside && p.depth < d) d = p.depth;  // nearest wins
            }
            out.depth.at(y, x) = (float)d;
        }

    // image channels derived from depth plus seeded texture
    out.image = Tensor<float>({3, h, w});
    Rng tex = rng.stream("texture");
    double fx1 = tex.uniform(1.5, 4.0), fy1 = tex.uniform(1.5, 4.0), ph1 = tex.uniform(0.0, 6.283);
    double fx2 = tex.uniform(4.0, 9.0), fy2 = tex.uniform(4.0, 9.0), ph2 = tex.uniform(0.0, 6.283);
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            double d = out.depth.at(y, x);
            double shade = spec.d_min / d;  // inverse-depth shading in (0,1]
            double n = tex.uniform(-1.0, 1.0);
            out.image.at(0, y, x) = (float)std::clamp(shade + spec.texture_scale * n, 0.0, 1.0);

            double gx = x + 1 < w ? out.depth.at(y, x + 1) - d : 0.0;
            double gy = y + 1 < h ? (double)out.depth.at(y + 1, x) - d : 0.0;
            double edge = std::min(1.0, std::sqrt(gx * gx + gy * gy) / (spec.d_max - spec.d_min) * 8.0);
            out.image.at(1, y, x) = (float)edge;

            double u = (double)x / (double)w, v = (double)y / (double)h;
            double t = 0.5 + 0.3 * std::sin(6.283 * (fx1 * u + fy1 * v) + ph1) +
                       0.2 * std::sin(6.283 * (fx2 * u + fy2 * v) + ph2);
            out.image.at(2, y, x) = (float)std::clamp(t, 0.0, 1.0);
        }
}

}  // namespace

std::vector<Sample> generate(const SceneSpec& spec, int64_t n) {
    spec.validate();
    if (n < 1) throw ValueError("generate: need n >= 1");
    std::vector<Sample> out((size_t)n);
    Rng root(spec.seed);
    for (int64_t i = 0; i < n; ++i) {
        Rng rng = root.stream("sample", (uint64_t)i);
        out[(size_t)i].seed = rng.key();
        render(spec, rng, out[(size_t)i]);
    }
    return out;
}

void write_sample(const Sample& s, const std::string& dir, const std::string& stem) {
    std::filesystem::create_directories(dir);
    Tensor<float> depth({1, s.depth.height, s.depth.width});
    std::copy(s.depth.values.begin(), s.depth.values.end(), depth.data.begin());
    write_pfm(dir + "/" + stem + "_depth.pfm", depth);
    write_pfm(dir + "/" + stem + "_image.pfm", s.image);
}

Sample read_sample(const std::string& depth_path, const std::string& image_path, uint64_t seed) {
    Sample s;
    s.seed = seed;
    Tensor<float> depth = read_pfm(depth_path);
    if (depth.dim(0) != 1) throw ParseError("read_sample: depth must be 1-channel PFM", 0);
    s.depth = DepthMap(depth.dim(1), depth.dim(2), "m");
    for (int64_t i = 0; i < s.depth.pixels(); ++i) {
        float v = depth[i];
        s.depth.values[(size_t)i] = v;
        s.depth.valid[(size_t)i] = std::isfinite(v) && v > 0.f ? 1 : 0;
    }
    s.image = read_pfm(image_path);
    if (s.image.dim(0) != 3) throw ParseError("read_sample: image must be 3-channel PFM", 0);
    return s;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    atomic_write_file(path, [&](std::ostream& os) {
        for (const auto& e : entries)
            os << e.depth_path << "\t" << e.image_path << "\t" << e.seed << "\n";
    });
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("read_manifest: cannot open " + path);
    std::vector<ManifestEntry> out;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        ManifestEntry e;
        std::string seed_str;
        if (!std::getline(ss, e.depth_path, '\t') || !std::getline(ss, e.image_path, '\t') ||
            !std::getline(ss, seed_str))
            throw ParseError("read_manifest: malformed line " + std::to_string(lineno), 0);
        e.seed = std::stoull(seed_str);
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace diffdepth
