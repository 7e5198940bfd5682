#pragma once

#include <cstdint>
#include <vector>

#include "isco/camera.hpp"
#include "isco/render.hpp"
#include "isco/rng.hpp"
#include "isco/sqcore.hpp"

namespace isco {

/// Targets below one 8-bit quantisation level count as background.
inline constexpr double kMaskEps = 1.0 / 255.0;

/// lambda for background rays, 1 - lambda for object rays.
inline double ray_weight(double target, double lambda) { return target < kMaskEps ? lambda : 1.0 - lambda; }

struct RayRecord {
  int view = 0;
  int pixel = 0;
  Ray ray;
  double target = 0.0;
  /// Jitter stream key for the stratified samples of this ray.
  std::uint64_t key = 0;
};

struct RayBatch {
  std::vector<RayRecord> rays;

  bool empty() const { return rays.empty(); }
  std::size_t size() const { return rays.size(); }
};

RayRecord make_ray(const std::vector<CameraView>& views, const SceneBounds& bounds, int view, int pixel,
                   std::uint64_t key);

/// Every pixel of every view, jitter keyed by (seed, view, pixel, pass).
RayBatch full_batch(const std::vector<CameraView>& views, const SceneBounds& bounds, std::uint64_t seed,
                    std::uint64_t pass = 0);

/// n_per_view pixels per view drawn uniformly with replacement.
RayBatch uniform_batch(const std::vector<CameraView>& views, const SceneBounds& bounds, int n_per_view, Rng& rng,
                       std::uint64_t seed, std::uint64_t pass);

/// sum_r (D(r) - I(r))^2
double unweighted_loss(const RayBatch& batch, const Composition& s, const RenderConfig& cfg);

/// sum_r w_lambda(r) (D(r) - I(r))^2
double weighted_loss(const RayBatch& batch, const Composition& s, const RenderConfig& cfg, double lambda);

/// Per-pixel importance table. Pixels are drawn with probability
/// proportional to (weight + floor); weights track an exponential moving
/// average of each pixel's realised loss.
class ImportanceSampler {
 public:
  struct Options {
    double decay = 0.9;
    /// floor = floor_fraction * mean weight of the view.
    double floor_fraction = 1e-3;
    double initial_weight = 1.0;
  };

  explicit ImportanceSampler(const std::vector<CameraView>& views) : ImportanceSampler(views, Options{}) {}
  ImportanceSampler(const std::vector<CameraView>& views, Options opts);

  RayBatch sample(const std::vector<CameraView>& views, const SceneBounds& bounds, int n_per_view, Rng& rng,
                  std::uint64_t seed, std::uint64_t pass) const;

  /// Folds the realised per-ray losses of `batch` into the table.
  void update(const RayBatch& batch, const std::vector<double>& per_ray_loss);

  double floor(int view) const;
  double probability(int view, int pixel) const;
  const std::vector<double>& weights(int view) const { return weights_[static_cast<std::size_t>(view)]; }
  std::vector<double>& mutable_weights(int view) { return weights_[static_cast<std::size_t>(view)]; }

 private:
  Options opts_;
  std::vector<std::vector<double>> weights_;
};

}  // namespace isco
