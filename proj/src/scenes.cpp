// SPDX-License-Identifier: MIT

#include "lrf/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace lrf {

namespace {

using nlohmann::json;

constexpr double kMovingSpeed = 0.5;  // m/s threshold between parked and moving
constexpr double kMinCenterGap = 5.0;
constexpr double kOverlapMargin = 0.5;  // per-side inflation for the overlap test

// Per class (car, pedestrian, cyclist).
constexpr double kRcsBase[3] = {10.0, 0.5, 3.0};
constexpr double kInsBase[3] = {0.8, 0.3, 0.5};

double bucket_center(double range) { return std::floor(range / 10.0) * 10.0 + 5.0; }

int bucket_of(double v) { return static_cast<int>(std::floor(v / 10.0)); }

}  // namespace

const char* class_name(ObjectClass c) {
    switch (c) {
        case ObjectClass::kCar: return "car";
        case ObjectClass::kPedestrian: return "pedestrian";
        default: return "cyclist";
    }
}

const char* kind_name(PromptKind k) {
    switch (k) {
        case PromptKind::kMotion: return "motion";
        case PromptKind::kDepth: return "depth";
        case PromptKind::kVelocity: return "velocity";
        default: return "mixed";
    }
}

double SceneObject::speed() const { return std::hypot(vx, vy); }
double SceneObject::range() const { return std::hypot(box.x, box.y); }
bool SceneObject::moving() const { return speed() > kMovingSpeed; }

bool PromptPredicate::matches(const SceneObject& o) const {
    if (cls >= 0 && static_cast<int>(o.cls) != cls) return false;
    if (motion >= 0 && o.moving() != (motion == 1)) return false;
    if (depth_about >= 0.0 && bucket_of(o.range()) != bucket_of(depth_about)) return false;
    if (speed_cmp != 0) {
        if (!o.moving()) return false;
        if (speed_cmp > 0 && !(o.speed() > speed_ref)) return false;
        if (speed_cmp < 0 && !(o.speed() < speed_ref)) return false;
    }
    return true;
}

std::vector<int> eval_predicate(const PromptPredicate& p,
                                const std::vector<SceneObject>& objects) {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(objects.size()); ++i)
        if (p.matches(objects[i])) out.push_back(i);
    return out;
}

bool Scene::operator==(const Scene& other) const {
    if (seed != other.seed || prompt != other.prompt || kind != other.kind ||
        referred != other.referred || objects.size() != other.objects.size())
        return false;
    for (size_t i = 0; i < objects.size(); ++i) {
        const SceneObject &a = objects[i], &b = other.objects[i];
        if (a.cls != b.cls || a.vx != b.vx || a.vy != b.vy) return false;
        if (a.box.x != b.box.x || a.box.y != b.box.y || a.box.z != b.box.z ||
            a.box.l != b.box.l || a.box.w != b.box.w || a.box.h != b.box.h ||
            a.box.yaw != b.box.yaw)
            return false;
    }
    return pred.cls == other.pred.cls && pred.motion == other.pred.motion &&
           pred.depth_about == other.pred.depth_about &&
           pred.speed_cmp == other.pred.speed_cmp && pred.speed_ref == other.pred.speed_ref;
}

bool SceneRecord::operator==(const SceneRecord& other) const {
    return scene == other.scene && lidar.kind == other.lidar.kind &&
           lidar.data == other.lidar.data && radar.kind == other.radar.kind &&
           radar.data == other.radar.data;
}

namespace {

Box3D inflated(const Box3D& b) {
    Box3D out = b;
    out.l += 2.0 * kOverlapMargin;
    out.w += 2.0 * kOverlapMargin;
    return out;
}

// One attempt at placing every object; empty vector on failure.
std::vector<SceneObject> place_objects(std::mt19937_64& rng, int n, PromptKind kind) {
    std::uniform_real_distribution<double> ux(5.0, 48.0), uy(-22.0, 22.0);
    std::uniform_real_distribution<double> uyaw(-std::numbers::pi, std::numbers::pi);
    std::uniform_real_distribution<double> uz(-0.5, 0.5), uspeed(1.5, 9.5);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_int_distribution<int> ucls(0, 2);

    std::vector<SceneObject> objs;
    for (int i = 0; i < n; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            SceneObject o;
            o.cls = static_cast<ObjectClass>(ucls(rng));
            const double j = u01(rng) * 2.0 - 1.0;   // shared dimension jitter
            const double j2 = u01(rng) * 2.0 - 1.0;
            switch (o.cls) {
                case ObjectClass::kCar:
                    o.box.l = 4.2 + 0.5 * j;
                    o.box.w = 1.9 + 0.2 * j2;
                    o.box.h = 1.6 + 0.15 * j;
                    break;
                case ObjectClass::kPedestrian:
                    o.box.l = 0.9 + 0.15 * j;
                    o.box.w = 0.75 + 0.1 * j2;
                    o.box.h = 1.75 + 0.15 * j;
                    break;
                default:
                    o.box.l = 1.8 + 0.2 * j;
                    o.box.w = 0.6 + 0.1 * j2;
                    o.box.h = 1.7 + 0.1 * j;
            }
            o.box.x = ux(rng);
            o.box.y = uy(rng);
            o.box.z = uz(rng);
            o.box.yaw = normalize_angle(uyaw(rng));
            const bool force_moving = kind == PromptKind::kVelocity && i == 0;
            if (force_moving || u01(rng) < 0.5) {
                const double s = uspeed(rng);
                o.vx = s * std::cos(o.box.yaw);
                o.vy = s * std::sin(o.box.yaw);
            }
            bool ok = true;
            for (const SceneObject& e : objs) {
                const double d = std::hypot(e.box.x - o.box.x, e.box.y - o.box.y);
                if (d < kMinCenterGap || bev_iou(inflated(e.box), inflated(o.box)) > 0.0) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                objs.push_back(o);
                placed = true;
            }
        }
        if (!placed) return {};
    }
    return objs;
}

// Candidate predicates that at least select the target, in rng order.
std::vector<PromptPredicate> candidate_predicates(const std::vector<SceneObject>& objs,
                                                  int target, PromptKind kind,
                                                  std::mt19937_64& rng) {
    const SceneObject& t = objs[target];
    std::vector<PromptPredicate> out;
    PromptPredicate base;
    base.cls = static_cast<int>(t.cls);
    switch (kind) {
        case PromptKind::kMotion: {
            PromptPredicate p = base;
            p.motion = t.moving() ? 1 : 0;
            out.push_back(p);
            break;
        }
        case PromptKind::kDepth: {
            PromptPredicate p = base;
            p.depth_about = bucket_center(t.range());
            out.push_back(p);
            break;
        }
        case PromptKind::kVelocity: {
            if (!t.moving()) break;
            for (int k = 1; k <= 10; ++k) {
                if (t.speed() > static_cast<double>(k)) {
                    PromptPredicate p = base;
                    p.speed_cmp = 1;
                    p.speed_ref = k;
                    out.push_back(p);
                }
                if (t.speed() < static_cast<double>(k)) {
                    PromptPredicate p = base;
                    p.speed_cmp = -1;
                    p.speed_ref = k;
                    out.push_back(p);
                }
            }
            std::shuffle(out.begin(), out.end(), rng);
            break;
        }
        default: {  // mixed: motion + depth
            PromptPredicate p = base;
            p.motion = t.moving() ? 1 : 0;
            p.depth_about = bucket_center(t.range());
            out.push_back(p);
        }
    }
    return out;
}

std::string motion_word(const SceneObject& o) {
    if (o.moving()) return "moving";
    return o.cls == ObjectClass::kCar ? "parked" : "stationary";
}

std::string render_prompt(const PromptPredicate& p, const SceneObject& target,
                          PromptKind kind) {
    const std::string cls = class_name(target.cls);
    char buf[128];
    switch (kind) {
        case PromptKind::kMotion:
            return "the " + motion_word(target) + " " + cls;
        case PromptKind::kDepth:
            std::snprintf(buf, sizeof(buf), "the %s about %d meters away", cls.c_str(),
                          static_cast<int>(p.depth_about));
            return buf;
        case PromptKind::kVelocity:
            std::snprintf(buf, sizeof(buf), "the %s moving %s than %d m/s", cls.c_str(),
                          p.speed_cmp > 0 ? "faster" : "slower",
                          static_cast<int>(p.speed_ref));
            return buf;
        default:
            std::snprintf(buf, sizeof(buf), "the %s %s about %d meters away",
                          motion_word(target).c_str(), cls.c_str(),
                          static_cast<int>(p.depth_about));
            return buf;
    }
}

}  // namespace

Scene gen_scene(std::uint64_t seed, int n_objects, PromptKind kind) {
    if (n_objects < 1) throw std::invalid_argument("gen_scene: need at least one object");
    std::mt19937_64 rng(seed);
    for (int attempt = 0; attempt < 64; ++attempt) {
        std::vector<SceneObject> objs = place_objects(rng, n_objects, kind);
        if (objs.empty()) continue;
        std::vector<int> order(objs.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        std::shuffle(order.begin(), order.end(), rng);
        for (int target : order) {
            for (const PromptPredicate& p : candidate_predicates(objs, target, kind, rng)) {
                const std::vector<int> matched = eval_predicate(p, objs);
                if (matched.size() == 1 && matched[0] == target) {
                    Scene s;
                    s.seed = seed;
                    s.objects = std::move(objs);
                    s.pred = p;
                    s.kind = kind;
                    s.referred = matched;
                    s.prompt = render_prompt(p, s.objects[target], kind);
                    return s;
                }
            }
        }
    }
    throw std::runtime_error("gen_scene: no unambiguous prompt after bounded retries");
}

namespace {

struct Face {
    Vec2 a, b;
    double len = 0.0;
};

// Vertical box faces whose outward normal points back at the sensor.
std::vector<Face> visible_faces(const Box3D& box) {
    const std::array<Vec2, 4> c = bev_corners(box);
    std::vector<Face> faces;
    for (int e = 0; e < 4; ++e) {
        const Vec2 a = c[e], b = c[(e + 1) % 4];
        const Vec2 mid{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
        // Corners run clockwise, so the outward normal is the edge direction
        // rotated +90 degrees.
        const Vec2 n{-(b.y - a.y), b.x - a.x};
        if (n.x * -mid.x + n.y * -mid.y > 0.0)
            faces.push_back({a, b, std::hypot(b.x - a.x, b.y - a.y)});
    }
    if (faces.empty())  // sensor inside the footprint: sample everywhere
        for (int e = 0; e < 4; ++e) {
            const Vec2 a = c[e], b = c[(e + 1) % 4];
            faces.push_back({a, b, std::hypot(b.x - a.x, b.y - a.y)});
        }
    return faces;
}

void sample_object(std::mt19937_64& rng, const SceneObject& o, bool is_lidar,
                   PointCloud& out) {
    const double r = std::max(o.range(), 1.0);
    const int n = is_lidar
                      ? std::clamp<long>(std::lround(4000.0 / (r * r)), 8, 220)
                      : std::clamp<long>(std::lround(60.0 / r), 3, 24);
    const std::vector<Face> faces = visible_faces(o.box);
    double total_len = 0.0;
    for (const Face& f : faces) total_len += f.len;

    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> pos_noise(0.0, is_lidar ? 0.02 : 0.1);
    std::normal_distribution<double> v_noise(0.0, 0.1);
    std::normal_distribution<double> ins_noise(0.0, 0.02);
    std::normal_distribution<double> rcs_rel(0.0, 0.1);
    const int ci = static_cast<int>(o.cls);

    for (int i = 0; i < n; ++i) {
        double pick = u01(rng) * total_len;
        const Face* f = &faces.back();
        for (const Face& cand : faces) {
            if (pick < cand.len) {
                f = &cand;
                break;
            }
            pick -= cand.len;
        }
        const double s = u01(rng), t = u01(rng);
        const double px = f->a.x + s * (f->b.x - f->a.x);
        const double py = f->a.y + s * (f->b.y - f->a.y);
        const double pz = o.box.z - 0.5 * o.box.h + t * o.box.h;
        const double x = px + pos_noise(rng), y = py + pos_noise(rng),
                     z = pz + pos_noise(rng);
        if (is_lidar) {
            const double ins = std::clamp(
                kInsBase[ci] * std::exp(-r / 80.0) + ins_noise(rng), 0.01, 1.0);
            out.data.insert(out.data.end(), {x, y, z, ins});
        } else {
            const double rcs = std::max(0.05, kRcsBase[ci] * (1.0 + rcs_rel(rng)));
            const double pr = std::max(std::hypot(px, py), 1e-9);
            const double v = (o.vx * px + o.vy * py) / pr + v_noise(rng);
            out.data.insert(out.data.end(), {x, y, z, rcs, v});
        }
    }
}

}  // namespace

void sample_pointclouds(const Scene& scene, PointCloud& lidar, PointCloud& radar) {
    lidar = PointCloud{SensorKind::kLidar, {}};
    radar = PointCloud{SensorKind::kRadar, {}};
    std::mt19937_64 rng(scene.seed ^ 0x9e3779b97f4a7c15ULL);
    for (const SceneObject& o : scene.objects) sample_object(rng, o, true, lidar);
    for (const SceneObject& o : scene.objects) sample_object(rng, o, false, radar);
}

SceneRecord make_record(std::uint64_t seed, int n_objects, PromptKind kind) {
    SceneRecord rec;
    rec.scene = gen_scene(seed, n_objects, kind);
    sample_pointclouds(rec.scene, rec.lidar, rec.radar);
    return rec;
}

namespace {

json to_json(const SceneRecord& rec) {
    const Scene& s = rec.scene;
    json objs = json::array();
    for (const SceneObject& o : s.objects)
        objs.push_back({{"cls", static_cast<int>(o.cls)},
                        {"x", o.box.x},
                        {"y", o.box.y},
                        {"z", o.box.z},
                        {"l", o.box.l},
                        {"w", o.box.w},
                        {"h", o.box.h},
                        {"yaw", o.box.yaw},
                        {"vx", o.vx},
                        {"vy", o.vy}});
    return {{"seed", s.seed},
            {"kind", static_cast<int>(s.kind)},
            {"prompt", s.prompt},
            {"referred", s.referred},
            {"objects", objs},
            {"pred",
             {{"cls", s.pred.cls},
              {"motion", s.pred.motion},
              {"depth_about", s.pred.depth_about},
              {"speed_cmp", s.pred.speed_cmp},
              {"speed_ref", s.pred.speed_ref}}},
            {"lidar", rec.lidar.data},
            {"radar", rec.radar.data}};
}

SceneRecord from_json(const json& j) {
    SceneRecord rec;
    Scene& s = rec.scene;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.kind = static_cast<PromptKind>(j.at("kind").get<int>());
    s.prompt = j.at("prompt").get<std::string>();
    s.referred = j.at("referred").get<std::vector<int>>();
    for (const json& jo : j.at("objects")) {
        SceneObject o;
        o.cls = static_cast<ObjectClass>(jo.at("cls").get<int>());
        o.box.x = jo.at("x").get<double>();
        o.box.y = jo.at("y").get<double>();
        o.box.z = jo.at("z").get<double>();
        o.box.l = jo.at("l").get<double>();
        o.box.w = jo.at("w").get<double>();
        o.box.h = jo.at("h").get<double>();
        o.box.yaw = jo.at("yaw").get<double>();
        o.vx = jo.at("vx").get<double>();
        o.vy = jo.at("vy").get<double>();
        s.objects.push_back(o);
    }
    const json& jp = j.at("pred");
    s.pred.cls = jp.at("cls").get<int>();
    s.pred.motion = jp.at("motion").get<int>();
    s.pred.depth_about = jp.at("depth_about").get<double>();
    s.pred.speed_cmp = jp.at("speed_cmp").get<int>();
    s.pred.speed_ref = jp.at("speed_ref").get<double>();
    rec.lidar = PointCloud{SensorKind::kLidar, j.at("lidar").get<std::vector<double>>()};
    rec.radar = PointCloud{SensorKind::kRadar, j.at("radar").get<std::vector<double>>()};
    if (rec.lidar.data.size() % 4 != 0 || rec.radar.data.size() % 5 != 0)
        throw std::runtime_error("ragged point array");
    return rec;
}

}  // namespace

void write_dataset(const std::vector<SceneRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_dataset: cannot open " + path);
    for (const SceneRecord& rec : records) out << to_json(rec).dump() << "\n";
}

std::vector<SceneRecord> read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_dataset: cannot open " + path);
    std::vector<SceneRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error("read_dataset: parse error at line " +
                                     std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace lrf
