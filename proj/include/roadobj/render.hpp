#pragma once

#include "roadobj/scene.hpp"

#include <string>
#include <vector>

namespace roadobj {

/// SVG overlay of projected annotation outlines on a blank canvas of the
/// frame's resolution. Predictions draw in green, the optional reference in
/// red; shapes behind the camera are omitted.
std::string render_overlay_svg(const Scene& scene, std::int64_t frame_id,
                               const std::vector<StaticAnnotation>& annotations,
                               const std::vector<StaticAnnotation>* reference = nullptr);

}  // namespace roadobj
