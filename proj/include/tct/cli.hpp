#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "tct/bench.hpp"
#include "tct/run_config.hpp"

namespace tct {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitInputError = 1, kExitInvariant = 2 };

/// Entry point behind the `tct` binary; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Variant list for a run: TCT / TargetAlone / ContextAlone / ViT follow the
/// configured layer sets; other names resolve to the standard layer groups.
std::vector<VariantSpec> configured_variants(const RunConfig& config, const std::vector<std::string>& names,
                                             bool layer_groups);

/// Plain-text map dump: "width height" on the first line, then one line of
/// space-separated values per image row.
void write_map_text(std::ostream& out, const AttentionMap& map);
AttentionMap read_map_text(std::istream& in);

}  // namespace tct
