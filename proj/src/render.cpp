#include "roadobj/render.hpp"

#include "roadobj/errors.hpp"
#include "roadobj/shape_project.hpp"

#include <cstdio>
#include <sstream>

namespace roadobj {

namespace {

void append_polygons(std::ostringstream& svg, const std::vector<StaticAnnotation>& annotations,
                     const CameraFrame& frame, const char* color) {
    char buf[64];
    for (const StaticAnnotation& a : annotations) {
        const auto poly = project_shape_polygon(a.params, frame);
        if (!poly || poly->empty()) continue;  // behind the camera
        svg << "  <polygon points=\"";
        for (size_t i = 0; i < poly->size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.4f,%.4f", (*poly)[i].x(), (*poly)[i].y());
            if (i > 0) svg << ' ';
            svg << buf;
        }
        svg << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    }
}

}  // namespace

std::string render_overlay_svg(const Scene& scene, std::int64_t frame_id,
                               const std::vector<StaticAnnotation>& annotations,
                               const std::vector<StaticAnnotation>* reference) {
    const CameraFrame* frame = scene.find_frame(frame_id);
    if (frame == nullptr)
        throw ValidationError("overlay: unknown frame " + std::to_string(frame_id));

    const int w = frame->intrinsics.width;
    const int h = frame->intrinsics.height;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n";
    svg << "  <rect width=\"" << w << "\" height=\"" << h << "\" fill=\"#111\"/>\n";
    if (reference != nullptr) append_polygons(svg, *reference, *frame, "#d33");
    append_polygons(svg, annotations, *frame, "#3c6");
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace roadobj
