#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "isco/camera.hpp"
#include "isco/fitter.hpp"
#include "isco/seeder.hpp"
#include "isco/sqcore.hpp"

namespace isco {

inline constexpr int kCompositionSchemaVersion = 1;
inline constexpr double kPoseTolerance = 1e-6;

struct SceneBundle {
  std::vector<CameraView> views;
  /// Mask file names relative to the bundle directory, one per view.
  std::vector<std::string> mask_files;
  SceneBounds bounds;
  std::string name;
  std::uint64_t seed = 0;
};

/// 8-bit grayscale PNG <-> [0,1] raster. Colour or 16-bit input is
/// converted to 8-bit gray on load. Throws ImageDecode.
std::vector<float> read_mask_png(const std::filesystem::path& path, int& width, int& height);
void write_mask_png(const std::filesystem::path& path, const std::vector<float>& values, int width, int height);

/// `path` is either a bundle directory containing scene.json or the manifest
/// itself. Throws ManifestParse, ImageDecode, DimensionMismatch,
/// NonRigidPose, NonFiniteIntrinsics.
SceneBundle load_bundle(const std::filesystem::path& path);

/// Writes scene.json and one PNG per view into `dir` (created if missing).
/// Views without a mask_files entry are written as v000.png, v001.png, ...
void save_bundle(const SceneBundle& bundle, const std::filesystem::path& dir);

/// Throws SchemaVersionMismatch, ManifestParse, ParameterOutOfBounds.
Composition load_composition(const std::filesystem::path& path);
void save_composition(const Composition& s, const std::filesystem::path& path);
std::string composition_to_json(const Composition& s);
Composition composition_from_json(const std::string& text);

/// Wavefront OBJ, one group per primitive. `density` is the number of
/// longitude segments; latitude uses density / 2 bands closed by pole fans.
/// Throws EmptyComposition.
void export_mesh(const Composition& s, const std::filesystem::path& path, int density = 64);

/// Writes `<base>.raw` (N^3 little-endian float32, x fastest) and
/// `<base>.json` with {n, center, spacing}.
void write_grid_dump(const VoxelGrid& grid, const std::filesystem::path& base);
VoxelGrid read_grid_dump(const std::filesystem::path& base);

/// One JSON object per line: {"iter", "step", "loss", "lr"}.
std::string trace_record(const StepRecord& r);
void write_trace(const std::vector<StepRecord>& steps, const std::filesystem::path& path);

}  // namespace isco
