#pragma once

#include <functional>
#include <ostream>
#include <string>

namespace diffdepth {

// Write-temp-then-rename so readers never see a partial file.
void atomic_write_file(const std::string& path,
                       const std::function<void(std::ostream&)>& writer);

std::string read_text_file(const std::string& path);

}  // namespace diffdepth
