#pragma once

#include <span>
#include <string>

#include "pmatch/miner.hpp"
#include "pmatch/simulator.hpp"

namespace pmatch {

struct SvgOptions {
  double pixels_per_meter = 100.0;
  double margin_m = 0.25;
};

/// Static bird's-eye map: one <polyline class="trajectory"> per episode,
/// one <polygon class="footprint"> per drawn footprint and one
/// <line class="match"> per unordered mined pair. With a manifest only
/// footprints that have candidates are drawn. Footprints are colored by
/// ground-truth instance when `truth` is given.
std::string render_svg(std::span<const Observation> observations, std::span<const FloorPolygon> footprints,
                       const PairManifest* manifest = nullptr, const GroundTruth* truth = nullptr,
                       const SvgOptions& options = {});

}  // namespace pmatch
