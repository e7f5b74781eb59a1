#pragma once

// Deterministic SVG step plots of a fitted baseline with its pointwise band
// and of the product-limit survivor estimate.

#include "dynrec/io.hpp"

#include <string>
#include <vector>

namespace dynrec {

std::string lambda_svg(const FitFile& fit);
std::string survivor_svg(const FitFile& fit);

// Writes lambda0.svg and survivor.svg into out_dir; returns the paths.
std::vector<std::string> emit_plots(const FitFile& fit, const std::string& out_dir);

}  // namespace dynrec
