#include <cmath>
#include <numeric>

#include "doctest.h"
#include "isco/errors.hpp"
#include "isco/objective.hpp"
#include "isco/synthgen.hpp"
#include "support.hpp"

using namespace isco;

namespace {

RenderConfig config() {
  RenderConfig c;
  c.gamma = 20;
  c.samples_per_ray = 32;
  return c;
}

RayRecord empty_scene_ray(double target) {
  RayRecord r;
  r.ray.origin = Vec3(0, 0, -3);
  r.ray.direction = Vec3::UnitZ();
  r.ray.t_near = 1.9;
  r.ray.t_far = 4.2;
  r.target = target;
  return r;
}

CameraView blank_view(int w, int h) {
  CameraView v;
  v.width = w;
  v.height = h;
  v.intrinsics = {20, 20, w / 2.0, h / 2.0};
  v.cam_to_world = look_at(Vec3(0, 0, -3), Vec3::Zero(), Vec3(0, -1, 0));
  v.silhouette.assign(static_cast<std::size_t>(w * h), 0.0f);
  return v;
}

}  // namespace

TEST_CASE("unweighted loss examples") {
  RayBatch b;
  b.rays.push_back(empty_scene_ray(1.0));
  CHECK(unweighted_loss(b, Composition{}, config()) == 1.0);
  b.rays.push_back(empty_scene_ray(0.5));
  b.rays.push_back(empty_scene_ray(0.0));
  CHECK(unweighted_loss(b, Composition{}, config()) == 1.25);

  // Perfect reconstruction.
  const Composition s{{Superquadric::sphere(Vec3::Zero(), 0.5, ParamBounds{})}};
  for (auto& r : b.rays) r.target = render_composition(r.ray, s, config(), r.key);
  CHECK(unweighted_loss(b, s, config()) == 0.0);
}

TEST_CASE("weighted loss examples") {
  const Composition solid{{Superquadric::sphere(Vec3::Zero(), 0.8, ParamBounds{})}};
  RenderConfig cfg = config();
  cfg.gamma = 150;
  cfg.extinction = 200;
  RayBatch out;
  out.rays.push_back(empty_scene_ray(0.0));
  REQUIRE(render_composition(out.rays[0].ray, solid, cfg) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(weighted_loss(out, solid, cfg, 0.6) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(weighted_loss(out, solid, cfg, 0.0) == 0.0);

  RayBatch in;
  in.rays.push_back(empty_scene_ray(1.0));
  CHECK(weighted_loss(in, Composition{}, cfg, 0.6) == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("lambda one half gives exactly half the unweighted loss") {
  Rng rng(1);
  GenSpec g;
  g.views = 3;
  g.image_size = 24;
  const auto gen = gen_bundle(g);
  const RayBatch b = full_batch(gen.bundle.views, g.bounds, 0);
  for (int i = 0; i < 20; ++i) {
    Composition s;
    s.items.push_back(test::random_primitive(rng));
    const double w = weighted_loss(b, s, config(), 0.5);
    CHECK(w == 0.5 * unweighted_loss(b, s, config()));
    CHECK(w >= 0.0);
  }
}

TEST_CASE("background threshold is one quantisation level") {
  CHECK(ray_weight(0.0, 0.6) == 0.6);
  CHECK(ray_weight(0.5 / 255.0, 0.6) == 0.6);
  CHECK(ray_weight(1.0 / 255.0, 0.6) == doctest::Approx(0.4));
  CHECK(ray_weight(1.0, 0.6) == doctest::Approx(0.4));
}

TEST_CASE("uniform sampler frequencies are within three sigma") {
  const std::vector<CameraView> views{blank_view(5, 2)};
  ImportanceSampler sampler(views);
  Rng rng(2);
  const int n = 100000;
  const RayBatch b = sampler.sample(views, SceneBounds{}, n, rng, 0, 0);
  std::vector<int> counts(10, 0);
  for (const auto& r : b.rays) ++counts[static_cast<std::size_t>(r.pixel)];
  const double p = 0.1, sigma = std::sqrt(n * p * (1 - p));
  for (int c : counts) CHECK(std::abs(c - n * p) < 3 * sigma);
}

TEST_CASE("heavier pixels are drawn proportionally more often") {
  const std::vector<CameraView> views{blank_view(10, 10)};
  ImportanceSampler sampler(views);
  auto& w = sampler.mutable_weights(0);
  std::fill(w.begin(), w.end(), 1.0);
  w[37] = 10.0;
  const double mean = (99.0 + 10.0) / 100.0;
  const double fl = 1e-3 * mean;
  const double expected = (10.0 + fl) / (99.0 * (1.0 + fl) + 10.0 + fl);
  CHECK(sampler.probability(0, 37) == doctest::Approx(expected).epsilon(1e-12));
  Rng rng(3);
  const int n = 200000;
  const RayBatch b = sampler.sample(views, SceneBounds{}, n, rng, 0, 0);
  int hot = 0, cold = 0;
  for (const auto& r : b.rays) (r.pixel == 37 ? hot : cold) += 1;
  const double sigma = std::sqrt(n * expected * (1 - expected));
  CHECK(std::abs(hot - n * expected) < 3 * sigma);
  CHECK(static_cast<double>(hot) / (cold / 99.0) == doctest::Approx(10.0).epsilon(0.05));
}

TEST_CASE("sampler never starves a pixel") {
  const std::vector<CameraView> views{blank_view(8, 8)};
  ImportanceSampler sampler(views);
  auto& w = sampler.mutable_weights(0);
  std::fill(w.begin(), w.end(), 0.0);
  w[0] = 50.0;
  const double fl = sampler.floor(0);
  CHECK(fl > 0.0);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (int p = 0; p < 64; ++p) {
    CHECK(sampler.probability(0, p) > 0.0);
    CHECK(sampler.probability(0, p) >= fl / (fl * 64 + total) * (1 - 1e-12));
  }
}

TEST_CASE("sampler weights follow an exponential moving average") {
  const std::vector<CameraView> views{blank_view(4, 4)};
  ImportanceSampler sampler(views);
  RayBatch b;
  RayRecord r;
  r.view = 0;
  r.pixel = 5;
  b.rays.push_back(r);
  sampler.update(b, {3.0});
  CHECK(sampler.weights(0)[5] == doctest::Approx(0.9 * 1.0 + 0.1 * 3.0).epsilon(1e-15));
  CHECK(sampler.weights(0)[4] == 1.0);
}

TEST_CASE("invalid ray budgets are rejected") {
  const std::vector<CameraView> views{blank_view(4, 4)};
  ImportanceSampler sampler(views);
  Rng rng(4);
  CHECK_THROWS_AS(sampler.sample(views, SceneBounds{}, 0, rng, 0, 0), InvalidConfig);
}
