#include "isco/objective.hpp"

#include <algorithm>
#include <numeric>

#include "isco/detail/march.hpp"
#include "isco/errors.hpp"

namespace isco {

RayRecord make_ray(const std::vector<CameraView>& views, const SceneBounds& bounds, int view, int pixel,
                   std::uint64_t key) {
  const CameraView& v = views[static_cast<std::size_t>(view)];
  RayRecord rec;
  rec.view = view;
  rec.pixel = pixel;
  rec.ray = pixel_ray(v, pixel, bounds);
  rec.target = v.silhouette.empty() ? 0.0 : v.target(pixel);
  rec.key = key;
  return rec;
}

RayBatch full_batch(const std::vector<CameraView>& views, const SceneBounds& bounds, std::uint64_t seed,
                    std::uint64_t pass) {
  RayBatch b;
  for (int v = 0; v < static_cast<int>(views.size()); ++v)
    for (int p = 0; p < views[v].pixel_count(); ++p)
      b.rays.push_back(make_ray(views, bounds, v, p, ray_key(seed, v, p, pass)));
  return b;
}

RayBatch uniform_batch(const std::vector<CameraView>& views, const SceneBounds& bounds, int n_per_view, Rng& rng,
                       std::uint64_t seed, std::uint64_t pass) {
  RayBatch b;
  for (int v = 0; v < static_cast<int>(views.size()); ++v) {
    const auto n_pix = static_cast<std::uint64_t>(views[v].pixel_count());
    for (int i = 0; i < n_per_view; ++i) {
      const int p = static_cast<int>(rng.below(n_pix));
      b.rays.push_back(make_ray(views, bounds, v, p, ray_key(seed, v, p, pass)));
    }
  }
  return b;
}

namespace {

std::vector<double> render_batch(const RayBatch& batch, const Composition& s, const RenderConfig& cfg) {
  std::vector<detail::PrimitiveT<double>> prims;
  for (const auto& p : s.items) prims.push_back(detail::PrimitiveT<double>::from(p, cfg.gamma));
  std::vector<double> d(batch.size(), 0.0);
  const int n = static_cast<int>(batch.size());
#pragma omp parallel
  {
    RaySamples samples;
#pragma omp for schedule(dynamic, 16)
    for (int i = 0; i < n; ++i) {
      const RayRecord& rec = batch.rays[i];
      if (rec.ray.empty() || prims.empty()) continue;
      stratify(rec.ray, cfg.samples_per_ray, rec.key, samples);
      double sum = 0.0;
      for (const auto& prim : prims)
        sum += -std::expm1(-detail::optical_depth(prim, rec.ray, samples, cfg.gamma, cfg.extinction));
      d[i] = std::min(sum, 1.0);
    }
  }
  return d;
}

}  // namespace

double unweighted_loss(const RayBatch& batch, const Composition& s, const RenderConfig& cfg) {
  const auto d = render_batch(batch, s, cfg);
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double e = d[i] - batch.rays[i].target;
    loss += e * e;
  }
  return loss;
}

double weighted_loss(const RayBatch& batch, const Composition& s, const RenderConfig& cfg, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidConfig("lambda must lie in [0, 1]");
  const auto d = render_batch(batch, s, cfg);
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double e = d[i] - batch.rays[i].target;
    loss += ray_weight(batch.rays[i].target, lambda) * e * e;
  }
  return loss;
}

ImportanceSampler::ImportanceSampler(const std::vector<CameraView>& views, Options opts) : opts_(opts) {
  for (const auto& v : views)
    weights_.emplace_back(static_cast<std::size_t>(v.pixel_count()), opts_.initial_weight);
}

double ImportanceSampler::floor(int view) const {
  const auto& w = weights(view);
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  return std::max(opts_.floor_fraction * mean, 1e-12);
}

double ImportanceSampler::probability(int view, int pixel) const {
  const auto& w = weights(view);
  const double fl = floor(view);
  const double total = std::accumulate(w.begin(), w.end(), 0.0) + fl * static_cast<double>(w.size());
  return (w[static_cast<std::size_t>(pixel)] + fl) / total;
}

RayBatch ImportanceSampler::sample(const std::vector<CameraView>& views, const SceneBounds& bounds, int n_per_view,
                                   Rng& rng, std::uint64_t seed, std::uint64_t pass) const {
  if (n_per_view < 1) throw InvalidConfig("rays per view must be at least 1");
  RayBatch b;
  b.rays.reserve(views.size() * static_cast<std::size_t>(n_per_view));
  std::vector<double> cdf;
  for (int v = 0; v < static_cast<int>(views.size()); ++v) {
    const auto& w = weights(v);
    const double fl = floor(v);
    cdf.resize(w.size());
    double acc = 0.0;
    for (std::size_t p = 0; p < w.size(); ++p) {
      acc += w[p] + fl;
      cdf[p] = acc;
    }
    for (int i = 0; i < n_per_view; ++i) {
      const double u = rng.uniform() * acc;
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      if (it == cdf.end()) --it;
      const int p = static_cast<int>(it - cdf.begin());
      b.rays.push_back(make_ray(views, bounds, v, p, ray_key(seed, v, p, pass)));
    }
  }
  return b;
}

void ImportanceSampler::update(const RayBatch& batch, const std::vector<double>& per_ray_loss) {
  for (std::size_t i = 0; i < batch.size(); ++i) {
    double& w = weights_[static_cast<std::size_t>(batch.rays[i].view)][static_cast<std::size_t>(batch.rays[i].pixel)];
    w = opts_.decay * w + (1.0 - opts_.decay) * per_ray_loss[i];
  }
}

}  // namespace isco
