#pragma once

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "diffdepth/config.hpp"
#include "diffdepth/fsio.hpp"

namespace ddtool {

// Load --config file if given, then apply --set key=value overrides.
inline diffdepth::RunConfig resolve_config(const std::string& config_path,
                                           const std::vector<std::string>& overrides) {
    diffdepth::RunConfig cfg;
    if (!config_path.empty()) cfg = diffdepth::load_config_file(config_path);
    for (const auto& kv : overrides) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw diffdepth::ValueError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

inline void write_resolved_config(const std::string& out_dir, const diffdepth::RunConfig& cfg,
                                  const std::string& name = "resolved.config") {
    std::filesystem::create_directories(out_dir);
    diffdepth::save_config_file(out_dir + "/" + name, cfg);
}

// Config lines embedded in a checkpoint manifest (after "# resolved config").
inline diffdepth::RunConfig config_from_manifest(const std::string& ckpt_path) {
    std::string text = diffdepth::read_text_file(ckpt_path + ".manifest.txt");
    size_t pos = text.find("# resolved config\n");
    if (pos == std::string::npos)
        throw diffdepth::ParseError("checkpoint manifest has no resolved config section", 0);
    return diffdepth::parse_config(text.substr(pos + 18));
}

}  // namespace ddtool
