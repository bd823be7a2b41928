#include "diffdepth/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "diffdepth/errors.hpp"
#include "diffdepth/fsio.hpp"

namespace diffdepth {

namespace {

struct Field {
    const char* name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

int64_t to_i64(const std::string& s) {
    try {
        size_t pos = 0;
        int64_t v = std::stoll(s, &pos);
        if (pos != s.size()) throw ValueError("");
        return v;
    } catch (const std::exception&) {
        throw ValueError("not an integer: '" + s + "'");
    }
}

uint64_t to_u64(const std::string& s) {
    try {
        size_t pos = 0;
        uint64_t v = std::stoull(s, &pos);
        if (pos != s.size()) throw ValueError("");
        return v;
    } catch (const std::exception&) {
        throw ValueError("not an unsigned integer: '" + s + "'");
    }
}

double to_f64(const std::string& s) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw ValueError("");
        return v;
    } catch (const std::exception&) {
        throw ValueError("not a number: '" + s + "'");
    }
}

bool to_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "on") return true;
    if (s == "false" || s == "0" || s == "off") return false;
    throw ValueError("not a boolean: '" + s + "'");
}

std::string fmt_f64(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

#define F_I64(key, member)                                                       \
    Field{key, [](RunConfig& c, const std::string& v) { c.member = to_i64(v); }, \
          [](const RunConfig& c) { return std::to_string(c.member); }}
#define F_U64(key, member)                                                       \
    Field{key, [](RunConfig& c, const std::string& v) { c.member = to_u64(v); }, \
          [](const RunConfig& c) { return std::to_string(c.member); }}
#define F_F64(key, member)                                                       \
    Field{key, [](RunConfig& c, const std::string& v) { c.member = to_f64(v); }, \
          [](const RunConfig& c) { return fmt_f64(c.member); }}
#define F_BOOL(key, member)                                                       \
    Field{key, [](RunConfig& c, const std::string& v) { c.member = to_bool(v); }, \
          [](const RunConfig& c) { return c.member ? std::string("true") : std::string("false"); }}
#define F_STR(key, member)                                                 \
    Field{key, [](RunConfig& c, const std::string& v) { c.member = v; },   \
          [](const RunConfig& c) { return c.member; }}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        F_U64("seed", seed),
        F_I64("image_size", image_size),
        F_I64("data_count", data_count),
        F_F64("d_min", d_min),
        F_F64("d_max", d_max),
        F_F64("tail_exponent", tail_exponent),
        F_I64("min_primitives", min_primitives),
        F_I64("max_primitives", max_primitives),
        F_F64("texture_scale", texture_scale),
        F_I64("latent_factor", latent_factor),
        F_I64("diffusion_steps", diffusion_steps),
        F_F64("beta_start", beta_start),
        F_F64("beta_end", beta_end),
        F_STR("schedule_kind", schedule_kind),
        F_I64("base_channels", base_channels),
        F_I64("time_embed_dim", time_embed_dim),
        F_I64("heads", heads),
        F_STR("lfm_placement", lfm_placement),
        F_STR("router_variant", router_variant),
        F_I64("n_masks", n_masks),
        F_I64("steps", steps),
        F_I64("batch_size", batch_size),
        F_F64("lr", lr),
        F_F64("adam_beta1", adam_beta1),
        F_F64("adam_beta2", adam_beta2),
        F_F64("weight_decay", weight_decay),
        F_F64("grad_clip", grad_clip),
        F_F64("lambda_var", lambda_var),
        F_F64("gamma", gamma),
        F_BOOL("lfm_on", lfm_on),
        F_BOOL("biasmap_on", biasmap_on),
        F_BOOL("w_dist_on", w_dist_on),
        F_BOOL("w_struct_on", w_struct_on),
        F_BOOL("var_loss_on", var_loss_on),
        F_STR("pool_dist", pool_dist),
        F_STR("pool_struct", pool_struct),
        F_I64("checkpoint_every", checkpoint_every),
        F_I64("ddim_steps", ddim_steps),
        F_I64("ensemble_runs", ensemble_runs),
    };
    return f;
}

#undef F_I64
#undef F_U64
#undef F_F64
#undef F_BOOL
#undef F_STR

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    for (const auto& f : fields())
        if (key == f.name) {
            f.set(*this, value);
            return;
        }
    throw ValueError("unknown config key '" + key + "'");
}

std::string RunConfig::serialize() const {
    std::ostringstream ss;
    for (const auto& f : fields()) ss << f.name << " = " << f.get(*this) << "\n";
    return ss.str();
}

void RunConfig::validate() const {
    scene().validate();
    if (steps < 1 || batch_size < 1) throw ValueError("config: steps and batch_size must be >= 1");
    if (!(lr >= 0.0)) throw ValueError("config: lr must be >= 0");
    if (lambda_var < 0.0) throw ValueError("config: lambda_var must be >= 0");
    if (image_size % latent_factor) throw ValueError("config: image_size not divisible by latent_factor");
    if ((image_size / latent_factor) % 4)
        throw ValueError("config: latent resolution must be divisible by 4");
    if (ddim_steps < 1 || ddim_steps > diffusion_steps)
        throw ValueError("config: need 1 <= ddim_steps <= diffusion_steps");
    if (ensemble_runs < 1) throw ValueError("config: ensemble_runs must be >= 1");
    schedule_kind_from_string(schedule_kind);
    lfm_placement_from_string(lfm_placement);
    router_variant_from_string(router_variant);
    pool_mode_from_string(pool_dist);
    pool_mode_from_string(pool_struct);
}

SceneSpec RunConfig::scene() const {
    SceneSpec s;
    s.width = s.height = image_size;
    s.min_primitives = min_primitives;
    s.max_primitives = max_primitives;
    s.d_min = d_min;
    s.d_max = d_max;
    s.tail_exponent = tail_exponent;
    s.texture_scale = texture_scale;
    s.seed = seed;
    return s;
}

NoiseSchedule RunConfig::schedule() const {
    return build_schedule(diffusion_steps, beta_start, beta_end,
                          schedule_kind_from_string(schedule_kind));
}

UNetConfig RunConfig::unet() const {
    UNetConfig u;
    u.cond_channels = latent_factor * latent_factor * 3;
    u.depth_channels = latent_factor * latent_factor;
    u.latent_h = image_size / latent_factor;
    u.latent_w = image_size / latent_factor;
    u.base_channels = base_channels;
    u.time_embed_dim = time_embed_dim;
    u.heads = (int)heads;
    u.placement = lfm_on ? lfm_placement_from_string(lfm_placement) : LfmPlacement::None;
    u.router = router_variant_from_string(router_variant);
    u.n_masks = n_masks;
    return u;
}

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    int64_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ValueError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(t.substr(0, eq)), value = trim(t.substr(eq + 1));
        try {
            cfg.set(key, value);
        } catch (const ValueError& e) {
            throw ValueError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig load_config_file(const std::string& path) { return parse_config(read_text_file(path)); }

void save_config_file(const std::string& path, const RunConfig& cfg) {
    atomic_write_file(path, [&](std::ostream& os) { os << cfg.serialize(); });
}

}  // namespace diffdepth
