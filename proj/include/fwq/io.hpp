#pragma once

#include <string>
#include <string_view>

#include "fwq/harness.hpp"
#include "fwq/trace.hpp"

namespace fwq {

/// FNV-1a 64-bit digest as 16 hex characters; used to fingerprint configs.
std::string fnv1a_hex(std::string_view bytes);

std::string read_file(const std::string& path);

/// Writes to a temporary sibling and renames, so failed runs leave no
/// partial output behind.
void write_file_atomic(const std::string& path, std::string_view content);

/// Trace CSV: `# key=value` front-matter carrying the run settings, then
/// round,loss,grad_norm_sq,accuracy,energy_j rows.
std::string trace_to_csv(const TrainingTrace& t);
TrainingTrace trace_from_csv(const std::string& content);

std::string sweep_to_csv(const SweepResult& r);

}  // namespace fwq
