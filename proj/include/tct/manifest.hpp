#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "tct/bench.hpp"

namespace tct {

/// JSON Lines trial manifest, one object per line:
///   {"id": "t1", "search": "img/s.ppm", "target": "img/t.ppm", "box": [x, y, w, h],
///    "congruency": "congruent", "profile": "coco18-like",
///    "prior": {"kind": "spatial-gaussian", "center": [0.4, 0.6], "sigma": 0.15}}
/// Relative paths resolve against base_dir. Blank lines and lines starting
/// with '#' are skipped. Errors name the offending line.
std::vector<TrialSpec> parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                                      const std::string& source_name = "manifest");
std::vector<TrialSpec> load_manifest(const std::filesystem::path& path);

}  // namespace tct
