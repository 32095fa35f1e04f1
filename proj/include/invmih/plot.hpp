#pragma once

// Capacity-sweep reporting: merges evaluation reports by secret count and
// renders PSNR/SSIM-versus-N as a standalone SVG.

#include <string>
#include <vector>

#include "invmih/eval.hpp"

namespace invmih {

struct SweepPoint {
  EvalReport report;
  std::string source;
};

// Sorted by N. A later entry with an already-seen N replaces the earlier one;
// each replacement appends a message to `warnings`.
std::vector<SweepPoint> merge_by_secret_count(const std::vector<SweepPoint>& points,
                                              std::vector<std::string>& warnings);

// Tab-separated, one row per N, with a header line.
std::string render_sweep_table(const std::vector<SweepPoint>& points);

// Two panels (PSNR and SSIM against N) with cover/stego and secret/recovery
// series. Non-finite values are left out of the curves and marked as "inf".
std::string render_sweep_svg(const std::vector<SweepPoint>& points);

}  // namespace invmih
