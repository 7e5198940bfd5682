#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "isco/assets.hpp"
#include "isco/errors.hpp"
#include "isco/synthgen.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace isco;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

SceneBundle small_bundle(std::uint64_t seed) {
  GenSpec g;
  g.views = 3;
  g.image_size = 20;
  g.count_max = 2;
  g.seed = seed;
  return gen_bundle(g).bundle;
}

struct ObjMesh {
  std::vector<Vec3> vertices;
  // Faces (0-based vertex indices) per group name, in file order.
  std::vector<std::pair<std::string, std::vector<std::array<long, 3>>>> groups;
};

ObjMesh read_obj(const fs::path& p) {
  ObjMesh m;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      ls >> v.x() >> v.y() >> v.z();
      m.vertices.push_back(v);
    } else if (tag == "g") {
      std::string name;
      ls >> name;
      m.groups.push_back({name, {}});
    } else if (tag == "f") {
      std::array<long, 3> f;
      ls >> f[0] >> f[1] >> f[2];
      for (auto& i : f) --i;
      m.groups.back().second.push_back(f);
    }
  }
  return m;
}

}  // namespace

TEST_CASE("bundle round trip") {
  const auto dir = test::scratch_dir("bundle_rt");
  const SceneBundle b = small_bundle(1);
  save_bundle(b, dir);
  const SceneBundle c = load_bundle(dir);
  CHECK(c.name == b.name);
  CHECK(c.seed == b.seed);
  CHECK(c.bounds.center == b.bounds.center);
  CHECK(c.bounds.radius == b.bounds.radius);
  REQUIRE(c.views.size() == b.views.size());
  for (std::size_t i = 0; i < b.views.size(); ++i) {
    const auto& x = b.views[i];
    const auto& y = c.views[i];
    CHECK(x.cam_to_world == y.cam_to_world);
    CHECK(x.intrinsics.fx == y.intrinsics.fx);
    CHECK(x.intrinsics.fy == y.intrinsics.fy);
    CHECK(x.intrinsics.cx == y.intrinsics.cx);
    CHECK(x.intrinsics.cy == y.intrinsics.cy);
    CHECK(x.width == y.width);
    CHECK(x.height == y.height);
    CHECK(x.silhouette == y.silhouette);
  }
  // The manifest path itself is accepted too.
  CHECK(load_bundle(dir / "scene.json").views.size() == 3);
}

TEST_CASE("masks quantise to 8 bits") {
  const auto dir = test::scratch_dir("mask_q");
  std::vector<float> v(12);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i) / 11.0f;
  write_mask_png(dir / "m.png", v, 4, 3);
  int w = 0, h = 0;
  const auto r = read_mask_png(dir / "m.png", w, h);
  CHECK(w == 4);
  CHECK(h == 3);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(r[i] == static_cast<float>(std::lround(v[i] * 255.0) / 255.0));
  CHECK_THROWS_AS(write_mask_png(dir / "bad.png", v, 5, 3), DimensionMismatch);
}

TEST_CASE("missing mask image names the path") {
  const auto dir = test::scratch_dir("bundle_missing");
  save_bundle(small_bundle(2), dir);
  fs::remove(dir / "v001.png");
  try {
    load_bundle(dir);
    FAIL("expected ImageDecode");
  } catch (const ImageDecode& e) {
    CHECK(std::string(e.what()).find("v001.png") != std::string::npos);
  }
}

TEST_CASE("improper or non-orthonormal poses are rejected") {
  const auto dir = test::scratch_dir("bundle_pose");
  save_bundle(small_bundle(3), dir);
  const json original = json::parse(slurp(dir / "scene.json"));

  json j = original;
  for (int r = 0; r < 3; ++r) j["views"][0]["cam_to_world"][4 * r] = -j["views"][0]["cam_to_world"][4 * r].get<double>();
  spit(dir / "scene.json", j.dump());
  CHECK_THROWS_AS(load_bundle(dir), NonRigidPose);

  j = original;
  j["views"][1]["cam_to_world"][1] = j["views"][1]["cam_to_world"][1].get<double>() + 1e-5;
  spit(dir / "scene.json", j.dump());
  CHECK_THROWS_AS(load_bundle(dir), NonRigidPose);

  j = original;
  j["views"][1]["cam_to_world"][1] = j["views"][1]["cam_to_world"][1].get<double>() + 1e-7;
  spit(dir / "scene.json", j.dump());
  CHECK_NOTHROW(load_bundle(dir));
}

TEST_CASE("malformed bundles map to typed errors") {
  const auto dir = test::scratch_dir("bundle_bad");
  save_bundle(small_bundle(4), dir);
  const json original = json::parse(slurp(dir / "scene.json"));
  auto expect = [&](const json& j, auto tag) {
    spit(dir / "scene.json", j.dump());
    CHECK_THROWS_AS(load_bundle(dir), decltype(tag));
  };
  spit(dir / "scene.json", "{ not json");
  CHECK_THROWS_AS(load_bundle(dir), ManifestParse);
  json j = original;
  j.erase("views");
  expect(j, ManifestParse{""});
  j = original;
  j["views"] = json::array();
  expect(j, ManifestParse{""});
  j = original;
  j["views"][0]["fx"] = "wide";
  expect(j, ManifestParse{""});
  j = original;
  j["views"][0]["cam_to_world"] = {1, 0, 0};
  expect(j, ManifestParse{""});
  j = original;
  j["views"][0]["width"] = 21;
  expect(j, DimensionMismatch{""});
  j = original;
  j["views"][0]["fx"] = -3.0;
  expect(j, NonFiniteIntrinsics{""});
  spit(dir / "scene.json", original.dump());
  spit(dir / "v000.png", "definitely not a png");
  CHECK_THROWS_AS(load_bundle(dir), ImageDecode);
  CHECK_THROWS_AS(load_bundle(dir / "nowhere"), ManifestParse);
}

TEST_CASE("composition round trip is lossless and byte-stable") {
  const auto dir = test::scratch_dir("comp_rt");
  Rng rng(5);
  Composition s;
  ParamBounds b = ParamBounds::for_scene_radius(1.0);
  b.eps_sharpness = 2.0;
  for (int i = 0; i < 4; ++i) s.items.push_back(test::random_primitive(rng, b));
  save_composition(s, dir / "a.json");
  const Composition t = load_composition(dir / "a.json");
  REQUIRE(t.size() == s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(t.items[i].raw() == s.items[i].raw());
    CHECK(t.items[i].bounds() == s.items[i].bounds());
    CHECK(t.items[i].alpha() == s.items[i].alpha());
  }
  save_composition(t, dir / "b.json");
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));

  save_composition(Composition{}, dir / "empty.json");
  CHECK(load_composition(dir / "empty.json").empty());
}

TEST_CASE("composition validation") {
  const auto dir = test::scratch_dir("comp_bad");
  Rng rng(6);
  save_composition(Composition{{test::random_primitive(rng)}}, dir / "c.json");
  const json original = json::parse(slurp(dir / "c.json"));

  json j = original;
  j["items"][0]["epsilon"][0] = 2.5;
  j["items"][0].erase("raw");
  spit(dir / "c.json", j.dump());
  CHECK_THROWS_AS(load_composition(dir / "c.json"), ParameterOutOfBounds);

  j = original;
  j["schema_version"] = 99;
  spit(dir / "c.json", j.dump());
  CHECK_THROWS_AS(load_composition(dir / "c.json"), SchemaVersionMismatch);

  j = original;
  j["items"][0]["raw"][0] = 7.0;
  spit(dir / "c.json", j.dump());
  CHECK_THROWS_AS(load_composition(dir / "c.json"), ManifestParse);

  j = original;
  j["items"][0]["alpha"] = "big";
  spit(dir / "c.json", j.dump());
  CHECK_THROWS_AS(load_composition(dir / "c.json"), ManifestParse);

  spit(dir / "c.json", "[1, 2");
  CHECK_THROWS_AS(load_composition(dir / "c.json"), ManifestParse);
  CHECK_THROWS_AS(load_composition(dir / "absent.json"), ManifestParse);

  // Without raw vectors the constrained values are authoritative.
  j = original;
  j["items"][0].erase("raw");
  spit(dir / "c.json", j.dump());
  const Composition c = load_composition(dir / "c.json");
  CHECK((c.items[0].alpha() - Vec3(j["items"][0]["alpha"][0], j["items"][0]["alpha"][1], j["items"][0]["alpha"][2]))
            .norm() < 1e-12);
}

TEST_CASE("unit sphere mesh vertices lie on the sphere") {
  const auto dir = test::scratch_dir("mesh_sphere");
  const Composition s{{Superquadric::sphere(Vec3::Zero(), 1.0, ParamBounds{})}};
  export_mesh(s, dir / "s.obj", 64);
  const ObjMesh m = read_obj(dir / "s.obj");
  CHECK(m.vertices.size() == 2 + 31 * 64);
  for (const auto& v : m.vertices) CHECK(std::abs(v.norm() - 1.0) < 1e-3);
  CHECK_THROWS_AS(export_mesh(Composition{}, dir / "e.obj"), EmptyComposition);
}

TEST_CASE("mesh groups are closed and outward facing") {
  const auto dir = test::scratch_dir("mesh_groups");
  Rng rng(7);
  Composition s;
  for (int i = 0; i < 3; ++i) s.items.push_back(test::random_primitive(rng));
  export_mesh(s, dir / "c.obj", 32);
  const ObjMesh m = read_obj(dir / "c.obj");
  REQUIRE(m.groups.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(m.groups[k].first == "sq_" + std::to_string(k));
    std::map<std::pair<long, long>, int> directed;
    std::map<std::pair<long, long>, int> undirected;
    double volume = 0.0;
    for (const auto& f : m.groups[k].second) {
      for (int e = 0; e < 3; ++e) {
        const long a = f[e], b = f[(e + 1) % 3];
        ++directed[{a, b}];
        ++undirected[{std::min(a, b), std::max(a, b)}];
      }
      const Vec3& p0 = m.vertices[f[0]];
      volume += p0.dot(m.vertices[f[1]].cross(m.vertices[f[2]])) / 6.0;
    }
    for (const auto& [edge, n] : undirected) CHECK(n == 2);
    for (const auto& [edge, n] : directed) CHECK(n == 1);
    const auto& p = s.items[k];
    // Closed-form superquadric volume.
    const double e1 = p.epsilon()[0], e2 = p.epsilon()[1];
    auto beta = [](double x, double y) { return std::tgamma(x) * std::tgamma(y) / std::tgamma(x + y); };
    const double exact = 2.0 * p.alpha().prod() * e1 * e2 * beta(e1 / 2 + 1, e1) * beta(e2 / 2, e2 / 2);
    CHECK(volume > 0.0);
    CHECK(volume == doctest::Approx(exact).epsilon(0.05));
  }
}

TEST_CASE("grid dump round trip") {
  const auto dir = test::scratch_dir("grid_dump");
  Rng rng(8);
  VoxelGrid g(GridGeometry::enclosing(SceneBounds{Vec3(0.1, 0.2, 0.3), 1.5}, 6));
  for (double& v : g.values) v = rng.uniform(-1, 1);
  write_grid_dump(g, dir / "grid");
  CHECK(fs::file_size(dir / "grid.raw") == 6 * 6 * 6 * 4);
  const VoxelGrid r = read_grid_dump(dir / "grid");
  CHECK(r.geom.n == 6);
  CHECK(r.geom.center == g.geom.center);
  CHECK(r.geom.spacing == g.geom.spacing);
  for (std::size_t i = 0; i < g.values.size(); ++i) CHECK(r.values[i] == static_cast<double>(static_cast<float>(g.values[i])));
}

TEST_CASE("trace records are one JSON object per line") {
  const auto dir = test::scratch_dir("trace");
  const std::vector<StepRecord> steps{{1, 0, 2.5, 0.01}, {1, 1, 2.25, 0.0099}, {2, 0, 1.0, 0.005}};
  write_trace(steps, dir / "t.jsonl");
  std::istringstream in(slurp(dir / "t.jsonl"));
  std::string line;
  std::size_t i = 0;
  while (std::getline(in, line)) {
    const json j = json::parse(line);
    CHECK(j["iter"] == steps[i].iter);
    CHECK(j["step"] == steps[i].step);
    CHECK(j["loss"].get<double>() == steps[i].loss);
    CHECK(j["lr"].get<double>() == steps[i].lr);
    ++i;
  }
  CHECK(i == steps.size());
  CHECK(trace_record(steps[0]).find('\n') == std::string::npos);
}
