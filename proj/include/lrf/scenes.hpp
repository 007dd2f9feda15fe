// SPDX-License-Identifier: MIT
//
// Deterministic synthetic scenes: oriented boxes with class, velocity and
// non-overlapping BEV footprints; templated prompts whose referred set is
// exactly recoverable by a structured predicate; LiDAR/radar surface
// sampling with sensor-appropriate fields; and a line-delimited JSON
// dataset format (one self-contained record per line).
//
// The sensor sits at the BEV origin. LiDAR points carry (x,y,z,intensity),
// radar points (x,y,z,rcs,v) where v is the radial velocity of the owning
// object projected on the line of sight plus N(0, 0.1) noise (negative =
// approaching). Expected LiDAR counts scale with 1/range^2 (clamped to
// [8,220]); radar with 1/range (clamped to [3,24]), so LiDAR is always the
// denser sensor.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lrf/geometry.hpp"
#include "lrf/pillars.hpp"

namespace lrf {

enum class ObjectClass { kCar = 0, kPedestrian = 1, kCyclist = 2 };
enum class PromptKind { kMotion = 0, kDepth = 1, kVelocity = 2, kMixed = 3 };

const char* class_name(ObjectClass c);
const char* kind_name(PromptKind k);

struct SceneObject {
    Box3D box;
    ObjectClass cls = ObjectClass::kCar;
    double vx = 0.0, vy = 0.0;  // ground velocity, m/s

    double speed() const;
    double range() const;  // BEV distance of the box center from the sensor
    bool moving() const;   // speed above 0.5 m/s
};

// Conjunctive prompt predicate; -1 / 0 mean "unconstrained". Depth matches
// by decade bucket ([0,10), [10,20), ...), the same buckets the metrics use.
struct PromptPredicate {
    int cls = -1;              // -1 any, else (int)ObjectClass
    int motion = -1;           // -1 any, 0 static, 1 moving
    double depth_about = -1.0;  // >= 0: bucket center in meters
    int speed_cmp = 0;         // -1 slower-than, +1 faster-than (implies moving)
    double speed_ref = 0.0;    // m/s threshold for speed_cmp

    bool matches(const SceneObject& o) const;
};

// Indices of all objects the predicate selects, ascending.
std::vector<int> eval_predicate(const PromptPredicate& p,
                                const std::vector<SceneObject>& objects);

struct Scene {
    std::uint64_t seed = 0;
    std::vector<SceneObject> objects;
    PromptPredicate pred;
    std::string prompt;
    PromptKind kind = PromptKind::kMotion;
    std::vector<int> referred;  // singleton by construction

    bool operator==(const Scene& other) const;
};

// Places n_objects without BEV overlap (0.5 m inflation margin, centers at
// least 5 m apart) and renders a prompt of the requested kind that uniquely
// selects one object. Deterministic under seed; throws after bounded
// placement/disambiguation retries.
Scene gen_scene(std::uint64_t seed, int n_objects, PromptKind kind);

// Surface-sampled clouds for every object (visible vertical faces only),
// deterministic under scene.seed.
void sample_pointclouds(const Scene& scene, PointCloud& lidar, PointCloud& radar);

struct SceneRecord {
    Scene scene;
    PointCloud lidar;
    PointCloud radar;

    bool operator==(const SceneRecord& other) const;
};

SceneRecord make_record(std::uint64_t seed, int n_objects, PromptKind kind);

// Line-delimited JSON, one record per line; read throws with the 1-based
// line number on malformed or truncated input.
void write_dataset(const std::vector<SceneRecord>& records, const std::string& path);
std::vector<SceneRecord> read_dataset(const std::string& path);

}  // namespace lrf
