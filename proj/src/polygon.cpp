#include "roadobj/polygon.hpp"

#include "roadobj/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace roadobj {

namespace {

double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

bool on_segment(const Vec2& p, const Vec2& a, const Vec2& b, double eps = 1e-9) {
    const double c = cross2(a, b, p);
    const double len = (b - a).norm();
    if (std::abs(c) > eps * std::max(1.0, len)) return false;
    const double dot = (p - a).dot(b - a);
    return dot >= -eps && dot <= (b - a).squaredNorm() + eps;
}

}  // namespace

double polygon_signed_area(const Polygon2D& poly) {
    double s = 0.0;
    const size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        s += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * s;
}

Vec2 polygon_centroid(const Polygon2D& poly) {
    const double a = polygon_signed_area(poly);
    if (std::abs(a) < 1e-12) {
        Vec2 m = Vec2::Zero();
        for (const Vec2& p : poly) m += p;
        return poly.empty() ? m : Vec2(m / static_cast<double>(poly.size()));
    }
    Vec2 c = Vec2::Zero();
    const size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        const double w = p.x() * q.y() - q.x() * p.y();
        c += (p + q) * w;
    }
    return c / (6.0 * a);
}

Polygon2D ensure_ccw(Polygon2D poly) {
    if (polygon_signed_area(poly) < 0.0) std::reverse(poly.begin(), poly.end());
    return poly;
}

Aabb2D polygon_aabb(const Polygon2D& poly) {
    Aabb2D box;
    box.min = Vec2(std::numeric_limits<double>::max(), std::numeric_limits<double>::max());
    box.max = Vec2(std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest());
    for (const Vec2& p : poly) {
        box.min = box.min.cwiseMin(p);
        box.max = box.max.cwiseMax(p);
    }
    return box;
}

std::array<Vec2, 4> OrientedBox2D::corners() const {
    const Vec2 ea{std::cos(angle), std::sin(angle)};
    const Vec2 eb{-std::sin(angle), std::cos(angle)};
    const Vec2 ha = ea * (0.5 * extent_a);
    const Vec2 hb = eb * (0.5 * extent_b);
    return {center - ha - hb, center - ha + hb, center + ha + hb, center + ha - hb};
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Vec2& a, const Vec2& b) { return a == b; }),
              pts.end());
    const size_t n = pts.size();
    if (n < 3) return pts;
    std::vector<Vec2> hull(2 * n);
    size_t k = 0;
    for (size_t i = 0; i < n; ++i) {  // lower chain
        while (k >= 2 && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    const size_t lower = k + 1;
    for (size_t i = n - 1; i-- > 0;) {  // upper chain
        while (k >= lower && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

OrientedBox2D min_area_obb(const std::vector<Vec2>& points) {
    if (points.size() < 3) throw DegenerateInput("min_area_obb: fewer than 3 points");
    const std::vector<Vec2> hull = convex_hull(points);
    if (hull.size() < 3) throw DegenerateInput("min_area_obb: collinear point set");

    // The minimum-area enclosing rectangle is aligned with some hull edge.
    double best_area = std::numeric_limits<double>::max();
    double best_angle = 0.0;
    double best_smin = 0, best_smax = 0, best_tmin = 0, best_tmax = 0;
    const size_t n = hull.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2 e = hull[(i + 1) % n] - hull[i];
        const double len = e.norm();
        if (len < 1e-15) continue;
        const Vec2 d = e / len;
        const Vec2 p(-d.y(), d.x());
        double smin = std::numeric_limits<double>::max(), smax = -smin;
        double tmin = smin, tmax = -smin;
        for (const Vec2& q : hull) {
            const double s = q.dot(d);
            const double t = q.dot(p);
            smin = std::min(smin, s);
            smax = std::max(smax, s);
            tmin = std::min(tmin, t);
            tmax = std::max(tmax, t);
        }
        const double area = (smax - smin) * (tmax - tmin);
        if (area < best_area - 1e-15 * std::max(1.0, best_area)) {
            best_area = area;
            best_angle = std::atan2(d.y(), d.x());
            best_smin = smin;
            best_smax = smax;
            best_tmin = tmin;
            best_tmax = tmax;
        }
    }

    const double ext_s = best_smax - best_smin;
    const double ext_t = best_tmax - best_tmin;
    const Vec2 d{std::cos(best_angle), std::sin(best_angle)};
    const Vec2 p{-d.y(), d.x()};
    OrientedBox2D box;
    box.center = d * (0.5 * (best_smin + best_smax)) + p * (0.5 * (best_tmin + best_tmax));
    if (ext_s >= ext_t) {
        box.extent_a = ext_s;
        box.extent_b = ext_t;
        box.angle = best_angle;
    } else {
        box.extent_a = ext_t;
        box.extent_b = ext_s;
        box.angle = best_angle + M_PI / 2.0;
    }
    box.angle = std::fmod(box.angle, M_PI);
    if (box.angle < 0.0) box.angle += M_PI;
    if (box.angle >= M_PI) box.angle -= M_PI;
    return box;
}

bool point_in_polygon(const Vec2& p, const Polygon2D& poly) {
    const size_t n = poly.size();
    if (n < 3) return false;
    for (size_t i = 0; i < n; ++i) {
        if (on_segment(p, poly[i], poly[(i + 1) % n])) return true;  // boundary is inside
    }
    bool inside = false;
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y() > p.y()) != (b.y() > p.y())) {
            const double x = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
            if (p.x() < x) inside = !inside;
        }
    }
    return inside;
}

Polygon2D clip_half_plane(const Polygon2D& poly, const Vec2& origin, const Vec2& normal) {
    Polygon2D out;
    const size_t n = poly.size();
    if (n == 0) return out;
    out.reserve(n + 2);
    for (size_t i = 0; i < n; ++i) {
        const Vec2& cur = poly[i];
        const Vec2& nxt = poly[(i + 1) % n];
        const double dc = (cur - origin).dot(normal);
        const double dn = (nxt - origin).dot(normal);
        if (dc <= 0.0) out.push_back(cur);
        if ((dc < 0.0 && dn > 0.0) || (dc > 0.0 && dn < 0.0)) {
            const double t = dc / (dc - dn);
            out.push_back(cur + t * (nxt - cur));
        }
    }
    return out;
}

Polygon2D convex_intersection(const Polygon2D& a, const Polygon2D& b) {
    Polygon2D subject = ensure_ccw(a);
    const Polygon2D clip = ensure_ccw(b);
    const size_t m = clip.size();
    for (size_t i = 0; i < m && !subject.empty(); ++i) {
        const Vec2& p = clip[i];
        const Vec2& q = clip[(i + 1) % m];
        const Vec2 edge = q - p;
        const Vec2 outward{edge.y(), -edge.x()};  // right of a CCW edge is outside
        subject = clip_half_plane(subject, p, outward);
    }
    return subject;
}

double convex_polygon_iou(const Polygon2D& a, const Polygon2D& b) {
    const double area_a = polygon_area(a);
    const double area_b = polygon_area(b);
    if (area_a <= 0.0 || area_b <= 0.0)
        throw DegenerateInput("convex_polygon_iou: zero-area polygon");
    const double inter = polygon_area(convex_intersection(a, b));
    const double uni = area_a + area_b - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

std::array<Vec2, 4> order_quad_corners(const std::array<Vec2, 4>& quad,
                                       const OrientedBox2D& box) {
    const Vec2 a1{std::cos(box.angle), std::sin(box.angle)};
    const Vec2 a2{-a1.y(), a1.x()};
    // Image "up" is -v. Height axis = box axis most aligned with up.
    const Vec2 up{0.0, -1.0};
    Vec2 eh = std::abs(a1.dot(up)) >= std::abs(a2.dot(up)) ? a1 : a2;
    if (eh.dot(up) < 0.0) eh = -eh;
    Vec2 ew = std::abs(a1.dot(up)) >= std::abs(a2.dot(up)) ? a2 : a1;
    if (ew.x() < 0.0 || (ew.x() == 0.0 && ew.dot(up) < 0.0)) ew = -ew;

    Vec2 c = Vec2::Zero();
    for (const Vec2& p : quad) c += p;
    c /= 4.0;

    std::array<Vec2, 4> out{};
    std::array<bool, 4> taken{false, false, false, false};
    for (const Vec2& p : quad) {
        const double w = (p - c).dot(ew);
        const double h = (p - c).dot(eh);
        int slot;
        if (w < 0.0)
            slot = h < 0.0 ? 0 : 1;  // BL : TL
        else
            slot = h < 0.0 ? 3 : 2;  // BR : TR
        if (taken[static_cast<size_t>(slot)]) {
            // Quadrant collision (heavily skewed quad): fall back to the
            // BL,TL,TR,BR cycle order (clockwise when v points down is read
            // as y up), anchored at the most BL-like vertex.
            std::array<Vec2, 4> sorted = quad;
            std::sort(sorted.begin(), sorted.end(), [&](const Vec2& x, const Vec2& y) {
                return std::atan2(-(x.y() - c.y()), x.x() - c.x()) >
                       std::atan2(-(y.y() - c.y()), y.x() - c.x());
            });
            int bl = 0;
            double best = std::numeric_limits<double>::max();
            for (int i = 0; i < 4; ++i) {
                const double score = (sorted[static_cast<size_t>(i)] - c).dot(ew + eh);
                if (score < best) {
                    best = score;
                    bl = i;
                }
            }
            for (int i = 0; i < 4; ++i)
                out[static_cast<size_t>(i)] = sorted[static_cast<size_t>((bl + i) % 4)];
            return out;
        }
        taken[static_cast<size_t>(slot)] = true;
        out[static_cast<size_t>(slot)] = p;
    }
    return out;
}

}  // namespace roadobj
