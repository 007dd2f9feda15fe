// SPDX-License-Identifier: MIT
//
// Box geometry shared by the grounding head, the scene generator and the
// metrics: oriented 3D boxes, corner/edge enumeration, nearest-edge anchor
// selection and rotated-rectangle IoU.

#pragma once

#include <array>
#include <vector>

namespace lrf {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

// Oriented box. (x,y,z) is the center, l is the extent along the heading
// axis, w across it, h is vertical. yaw is kept normalized to [-pi, pi).
struct Box3D {
    double x = 0.0, y = 0.0, z = 0.0;
    double l = 1.0, w = 1.0, h = 1.0;
    double yaw = 0.0;
};

double normalize_angle(double a);  // wrap into [-pi, pi)

// 4 BEV footprint corners, in order: front-left, front-right, rear-right,
// rear-left (local frame: +x heading, +y left).
std::array<Vec2, 4> bev_corners(const Box3D& box);

// 8 corners: the BEV footprint at z - h/2 (indices 0..3) and z + h/2 (4..7).
std::array<Vec3, 8> corner_points(const Box3D& box);

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);
bool point_in_quad(const Vec2& p, const std::array<Vec2, 4>& quad);

struct BoxGeometry {
    std::array<Vec3, 8> corners;
    // Base edge i connects BEV corners i and (i+1) % 4.
    std::array<std::array<Vec2, 2>, 4> edges;
    std::array<double, 4> edge_distance;  // point-to-segment distance from sensor
    int nearest = 0;                      // index of e*
    Vec2 anchor;                          // nearer endpoint of e*, midpoint on ties
    bool degenerate = false;              // sensor lies inside the BEV footprint
};

// Distances measured from `sensor` in BEV; ties between endpoint distances
// within 1e-9 anchor at the edge midpoint.
BoxGeometry nearest_edge(const Box3D& box, const Vec2& sensor = {0.0, 0.0});

// Rotated-rectangle intersection-over-union in BEV; degenerate boxes give 0.
double bev_iou(const Box3D& a, const Box3D& b);
// BEV IoU composed with the vertical-interval IoU.
double iou3d(const Box3D& a, const Box3D& b);

// Convex polygon helpers (exposed for the metric oracles).
double polygon_area(const std::vector<Vec2>& poly);
std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip);

}  // namespace lrf
