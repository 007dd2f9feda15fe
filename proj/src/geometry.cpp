// SPDX-License-Identifier: MIT

#include "lrf/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace lrf {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTieEps = 1e-9;

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x - o.x) * (b.y - o.y) - (b.x - o.x) * (a.y - o.y);
}

}  // namespace

double normalize_angle(double a) {
    a = std::fmod(a + kPi, 2.0 * kPi);
    if (a < 0.0) a += 2.0 * kPi;
    return a - kPi;
}

std::array<Vec2, 4> bev_corners(const Box3D& box) {
    const double c = std::cos(box.yaw), s = std::sin(box.yaw);
    const double hl = 0.5 * box.l, hw = 0.5 * box.w;
    // Local corners: (+hl,+hw), (+hl,-hw), (-hl,-hw), (-hl,+hw).
    const double lx[4] = {hl, hl, -hl, -hl};
    const double ly[4] = {hw, -hw, -hw, hw};
    std::array<Vec2, 4> out;
    for (int i = 0; i < 4; ++i)
        out[i] = {box.x + c * lx[i] - s * ly[i], box.y + s * lx[i] + c * ly[i]};
    return out;
}

std::array<Vec3, 8> corner_points(const Box3D& box) {
    const std::array<Vec2, 4> base = bev_corners(box);
    std::array<Vec3, 8> out;
    for (int i = 0; i < 4; ++i) {
        out[i] = {base[i].x, base[i].y, box.z - 0.5 * box.h};
        out[i + 4] = {base[i].x, base[i].y, box.z + 0.5 * box.h};
    }
    return out;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(((p.x - a.x) * vx + (p.y - a.y) * vy) / len2, 0.0, 1.0);
    const double qx = a.x + t * vx, qy = a.y + t * vy;
    return std::hypot(p.x - qx, p.y - qy);
}

bool point_in_quad(const Vec2& p, const std::array<Vec2, 4>& quad) {
    // Convex quad; accept either winding by requiring uniform cross signs.
    int pos = 0, neg = 0;
    for (int i = 0; i < 4; ++i) {
        const double cr = cross(quad[i], quad[(i + 1) % 4], p);
        if (cr > 0.0) ++pos;
        if (cr < 0.0) ++neg;
    }
    return pos == 0 || neg == 0;
}

BoxGeometry nearest_edge(const Box3D& box, const Vec2& sensor) {
    BoxGeometry g;
    g.corners = corner_points(box);
    const std::array<Vec2, 4> base = bev_corners(box);
    for (int i = 0; i < 4; ++i) {
        g.edges[i] = {base[i], base[(i + 1) % 4]};
        g.edge_distance[i] = point_segment_distance(sensor, base[i], base[(i + 1) % 4]);
    }
    g.nearest = 0;
    for (int i = 1; i < 4; ++i)
        if (g.edge_distance[i] < g.edge_distance[g.nearest]) g.nearest = i;

    const Vec2& a = g.edges[g.nearest][0];
    const Vec2& b = g.edges[g.nearest][1];
    const double da = std::hypot(sensor.x - a.x, sensor.y - a.y);
    const double db = std::hypot(sensor.x - b.x, sensor.y - b.y);
    if (std::abs(da - db) <= kTieEps)
        g.anchor = {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
    else
        g.anchor = (da < db) ? a : b;
    g.degenerate = point_in_quad(sensor, base);
    return g;
}

double polygon_area(const std::vector<Vec2>& poly) {
    const size_t n = poly.size();
    if (n < 3) return 0.0;
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        acc += p.x * q.y - q.x * p.y;
    }
    return 0.5 * std::abs(acc);
}

// Sutherland-Hodgman: clip a convex subject polygon by each half-plane of a
// counter-clockwise convex clip polygon.
std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip) {
    std::vector<Vec2> poly = subject;
    const size_t m = clip.size();
    for (size_t i = 0; i < m && !poly.empty(); ++i) {
        const Vec2& a = clip[i];
        const Vec2& b = clip[(i + 1) % m];
        std::vector<Vec2> next;
        const size_t n = poly.size();
        for (size_t j = 0; j < n; ++j) {
            const Vec2& p = poly[j];
            const Vec2& q = poly[(j + 1) % n];
            const double sp = cross(a, b, p);
            const double sq = cross(a, b, q);
            if (sp >= 0.0) next.push_back(p);
            if ((sp > 0.0 && sq < 0.0) || (sp < 0.0 && sq > 0.0)) {
                const double t = sp / (sp - sq);
                next.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
            }
        }
        poly = std::move(next);
    }
    return poly;
}

namespace {

std::vector<Vec2> ccw_corners(const Box3D& box) {
    const std::array<Vec2, 4> c = bev_corners(box);
    std::vector<Vec2> poly(c.begin(), c.end());
    // bev_corners winds clockwise in the world frame; reverse for CCW.
    double signed_area = 0.0;
    for (size_t i = 0; i < poly.size(); ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % poly.size()];
        signed_area += p.x * q.y - q.x * p.y;
    }
    if (signed_area < 0.0) std::reverse(poly.begin(), poly.end());
    return poly;
}

}  // namespace

double bev_iou(const Box3D& a, const Box3D& b) {
    const double area_a = a.l * a.w;
    const double area_b = b.l * b.w;
    if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
    const std::vector<Vec2> pa = ccw_corners(a);
    const std::vector<Vec2> pb = ccw_corners(b);
    const double inter = polygon_area(clip_convex(pa, pb));
    const double uni = area_a + area_b - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

double iou3d(const Box3D& a, const Box3D& b) {
    if (a.h <= 0.0 || b.h <= 0.0) return 0.0;
    const double z0 = std::max(a.z - 0.5 * a.h, b.z - 0.5 * b.h);
    const double z1 = std::min(a.z + 0.5 * a.h, b.z + 0.5 * b.h);
    const double overlap = std::max(0.0, z1 - z0);
    const double zuni = a.h + b.h - overlap;
    if (zuni <= 0.0) return 0.0;
    return bev_iou(a, b) * (overlap / zuni);
}

}  // namespace lrf
