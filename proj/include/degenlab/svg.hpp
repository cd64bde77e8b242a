#pragma once

#include <string>
#include <vector>

#include "degenlab/pipeline.hpp"

namespace degenlab {

/// sigma_v, H_heatmap, G_contours, localization_curves.
const std::vector<std::string>& plot_kinds();

/// Whether the artifacts map names the CSV that `kind` reads.
bool plot_available(const Json& artifacts, const std::string& kind);

/// Renders one plot from the artifact CSVs (paths relative to dir). Output
/// depends only on the CSV contents. Throws DomainError for an unknown kind
/// or a missing artifact.
void write_plot(const Json& artifacts, const std::string& dir, const std::string& kind,
                const std::string& out_path);

}  // namespace degenlab
