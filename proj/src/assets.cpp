#include "isco/assets.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "json.hpp"

#include "isco/errors.hpp"

namespace isco {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestParse("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* buf = static_cast<std::string*>(png_get_error_ptr(png));
  if (buf) *buf = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

std::vector<float> read_mask_png(const fs::path& path, int& width, int& height) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw ImageDecode("cannot open image " + path.string());
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw ImageDecode("not a PNG file: " + path.string());

  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (!png) throw ImageDecode("libpng init failed for " + path.string());
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw ImageDecode("libpng init failed for " + path.string());
  }
  // Declared before setjmp so nothing with a destructor is skipped by longjmp.
  std::vector<unsigned char> pixels;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageDecode("corrupt PNG " + path.string() + ": " + err);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);
  if (png_get_channels(png, info) != 1 || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageDecode("unsupported PNG layout in " + path.string());
  }
  pixels.resize(static_cast<std::size_t>(w) * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * w;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  width = static_cast<int>(w);
  height = static_cast<int>(h);
  std::vector<float> out(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) out[i] = static_cast<float>(pixels[i]) / 255.0f;
  return out;
}

void write_mask_png(const fs::path& path, const std::vector<float>& values, int width, int height) {
  if (width <= 0 || height <= 0 || values.size() != static_cast<std::size_t>(width) * height)
    throw DimensionMismatch("raster size does not match " + std::to_string(width) + "x" + std::to_string(height));
  std::vector<unsigned char> pixels(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float v = std::isfinite(values[i]) ? std::clamp(values[i], 0.0f, 1.0f) : 0.0f;
    pixels[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw InputError("cannot write image " + path.string());
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw InputError("libpng init failed for " + path.string());
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw InputError("failed writing PNG " + path.string() + ": " + err);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * width;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

namespace {

template <class T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ManifestParse(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ManifestParse(where + ": bad field '" + key + "': " + e.what());
  }
}

template <int N>
Eigen::Matrix<double, N, 1> vec_field(const json& j, const char* key, const std::string& where) {
  const auto v = field<std::vector<double>>(j, key, where);
  if (static_cast<int>(v.size()) != N)
    throw ManifestParse(where + ": field '" + key + "' needs " + std::to_string(N) + " entries");
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) out[i] = v[i];
  return out;
}

json vec_json(const double* v, int n) { return json(std::vector<double>(v, v + n)); }

}  // namespace

SceneBundle load_bundle(const fs::path& path) {
  const fs::path manifest = fs::is_directory(path) ? path / "scene.json" : path;
  const fs::path dir = manifest.parent_path();
  if (!fs::exists(manifest)) throw ManifestParse("manifest not found: " + manifest.string());
  json j;
  try {
    j = json::parse(read_text(manifest));
  } catch (const json::exception& e) {
    throw ManifestParse("cannot parse " + manifest.string() + ": " + e.what());
  }
  const std::string where = manifest.string();
  SceneBundle b;
  if (j.contains("name")) b.name = field<std::string>(j, "name", where);
  if (j.contains("seed")) b.seed = field<std::uint64_t>(j, "seed", where);
  if (j.contains("bounds")) {
    const json& jb = j["bounds"];
    b.bounds.center = vec_field<3>(jb, "center", where + " bounds");
    b.bounds.radius = field<double>(jb, "radius", where + " bounds");
    if (!(b.bounds.radius > 0.0) || !std::isfinite(b.bounds.radius) || !b.bounds.center.allFinite())
      throw ManifestParse(where + ": bounds radius must be positive and finite");
  }
  if (!j.contains("views") || !j["views"].is_array() || j["views"].empty())
    throw ManifestParse(where + ": 'views' must be a non-empty array");
  int idx = 0;
  for (const json& jv : j["views"]) {
    const std::string vw = where + " view " + std::to_string(idx++);
    CameraView v;
    v.intrinsics.fx = field<double>(jv, "fx", vw);
    v.intrinsics.fy = field<double>(jv, "fy", vw);
    v.intrinsics.cx = field<double>(jv, "cx", vw);
    v.intrinsics.cy = field<double>(jv, "cy", vw);
    v.width = field<int>(jv, "width", vw);
    v.height = field<int>(jv, "height", vw);
    if (v.width <= 0 || v.height <= 0) throw ManifestParse(vw + ": width and height must be positive");
    const auto m = field<std::vector<double>>(jv, "cam_to_world", vw);
    if (m.size() != 16) throw ManifestParse(vw + ": cam_to_world needs 16 entries");
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) v.cam_to_world(r, c) = m[4 * r + c];
    const auto mask = field<std::string>(jv, "mask", vw);
    int w = 0, h = 0;
    v.silhouette = read_mask_png(dir / mask, w, h);
    if (w != v.width || h != v.height)
      throw DimensionMismatch(vw + ": mask " + (dir / mask).string() + " is " + std::to_string(w) + "x" +
                              std::to_string(h) + ", camera declares " + std::to_string(v.width) + "x" +
                              std::to_string(v.height));
    validate_view(v, kPoseTolerance);
    b.views.push_back(std::move(v));
    b.mask_files.push_back(mask);
  }
  return b;
}

void save_bundle(const SceneBundle& bundle, const fs::path& dir) {
  fs::create_directories(dir);
  json j;
  j["name"] = bundle.name;
  j["seed"] = bundle.seed;
  j["bounds"] = {{"center", vec_json(bundle.bounds.center.data(), 3)}, {"radius", bundle.bounds.radius}};
  json views = json::array();
  for (std::size_t i = 0; i < bundle.views.size(); ++i) {
    const CameraView& v = bundle.views[i];
    std::string mask;
    if (i < bundle.mask_files.size()) {
      mask = bundle.mask_files[i];
    } else {
      char buf[32];
      std::snprintf(buf, sizeof buf, "v%03zu.png", i);
      mask = buf;
    }
    std::vector<double> m(16);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) m[4 * r + c] = v.cam_to_world(r, c);
    views.push_back({{"mask", mask},
                     {"fx", v.intrinsics.fx},
                     {"fy", v.intrinsics.fy},
                     {"cx", v.intrinsics.cx},
                     {"cy", v.intrinsics.cy},
                     {"width", v.width},
                     {"height", v.height},
                     {"cam_to_world", m}});
    write_mask_png(dir / mask, v.silhouette, v.width, v.height);
  }
  j["views"] = views;
  write_text(dir / "scene.json", j.dump(2) + "\n");
}

std::string composition_to_json(const Composition& s) {
  json j;
  j["schema_version"] = kCompositionSchemaVersion;
  const ParamBounds pb = s.empty() ? ParamBounds{} : s.items.front().bounds();
  j["bounds"] = {{"alpha_min", pb.alpha_min},
                 {"alpha_sharpness", pb.alpha_sharpness},
                 {"eps_min", pb.eps_min},
                 {"eps_max", pb.eps_max},
                 {"eps_sharpness", pb.eps_sharpness}};
  json items = json::array();
  for (const auto& p : s.items) {
    if (!(p.bounds() == pb)) throw InvalidConfig("all primitives of a composition must share parameter bounds");
    items.push_back({{"alpha", vec_json(p.alpha().data(), 3)},
                     {"epsilon", vec_json(p.epsilon().data(), 2)},
                     {"euler", vec_json(p.euler().data(), 3)},
                     {"translation", vec_json(p.translation().data(), 3)},
                     {"raw", vec_json(p.raw().data(), kNumParams)}});
  }
  j["items"] = items;
  return j.dump(2) + "\n";
}

namespace {

bool close(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

}  // namespace

Composition composition_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ManifestParse(std::string("cannot parse composition: ") + e.what());
  }
  const std::string where = "composition";
  const int version = field<int>(j, "schema_version", where);
  if (version != kCompositionSchemaVersion)
    throw SchemaVersionMismatch("composition schema_version " + std::to_string(version) + ", expected " +
                                std::to_string(kCompositionSchemaVersion));
  ParamBounds pb;
  if (j.contains("bounds")) {
    const json& jb = j["bounds"];
    pb.alpha_min = field<double>(jb, "alpha_min", where);
    pb.alpha_sharpness = field<double>(jb, "alpha_sharpness", where);
    pb.eps_min = field<double>(jb, "eps_min", where);
    pb.eps_max = field<double>(jb, "eps_max", where);
    if (jb.contains("eps_sharpness")) pb.eps_sharpness = field<double>(jb, "eps_sharpness", where);
    if (!(pb.alpha_min > 0.0 && pb.alpha_sharpness > 0.0 && pb.eps_min > 0.0 && pb.eps_max > pb.eps_min && pb.eps_sharpness > 0.0))
      throw ManifestParse("composition: invalid parameter bounds");
  }
  if (!j.contains("items") || !j["items"].is_array()) throw ManifestParse("composition: 'items' must be an array");
  Composition s;
  int idx = 0;
  for (const json& ji : j["items"]) {
    const std::string iw = "composition item " + std::to_string(idx++);
    const Vec3 alpha = vec_field<3>(ji, "alpha", iw);
    const Vec2 eps = vec_field<2>(ji, "epsilon", iw);
    const Vec3 euler = vec_field<3>(ji, "euler", iw);
    const Vec3 trans = vec_field<3>(ji, "translation", iw);
    for (int k = 0; k < 2; ++k)
      if (!(eps[k] >= pb.eps_min && eps[k] <= pb.eps_max))
        throw ParameterOutOfBounds(iw + ": epsilon outside [" + std::to_string(pb.eps_min) + ", " +
                                   std::to_string(pb.eps_max) + "]");
    for (int k = 0; k < 3; ++k)
      if (!(alpha[k] > pb.alpha_min) || !std::isfinite(alpha[k]))
        throw ParameterOutOfBounds(iw + ": alpha must exceed alpha_min");
    if (!euler.allFinite() || !trans.allFinite()) throw ParameterOutOfBounds(iw + ": non-finite pose");
    Superquadric p;
    if (ji.contains("raw")) {
      const auto raw_v = field<std::vector<double>>(ji, "raw", iw);
      if (raw_v.size() != static_cast<std::size_t>(kNumParams)) throw ManifestParse(iw + ": raw needs 11 entries");
      RawParams raw;
      for (int k = 0; k < kNumParams; ++k) {
        if (!std::isfinite(raw_v[k])) throw ParameterOutOfBounds(iw + ": non-finite raw value");
        raw[k] = raw_v[k];
      }
      p = Superquadric::from_raw(raw, pb);
      bool ok = true;
      for (int k = 0; k < 3; ++k) ok = ok && close(p.alpha()[k], alpha[k]) && close(p.euler()[k], euler[k]) &&
                                       close(p.translation()[k], trans[k]);
      for (int k = 0; k < 2; ++k) ok = ok && close(p.epsilon()[k], eps[k]);
      if (!ok) throw ManifestParse(iw + ": raw vector disagrees with the constrained parameters");
    } else {
      p = Superquadric::from_shape(alpha, eps, euler, trans, pb);
    }
    s.items.push_back(p);
  }
  return s;
}

Composition load_composition(const fs::path& path) {
  if (!fs::exists(path)) throw ManifestParse("composition file not found: " + path.string());
  try {
    return composition_from_json(read_text(path));
  } catch (const InputError& e) {
    // Keep the typed error but name the file.
    if (dynamic_cast<const SchemaVersionMismatch*>(&e)) throw SchemaVersionMismatch(path.string() + ": " + e.what());
    if (dynamic_cast<const ParameterOutOfBounds*>(&e)) throw ParameterOutOfBounds(path.string() + ": " + e.what());
    throw ManifestParse(path.string() + ": " + e.what());
  }
}

void save_composition(const Composition& s, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_text(path, composition_to_json(s));
}

void export_mesh(const Composition& s, const fs::path& path, int density) {
  if (s.empty()) throw EmptyComposition("cannot export a mesh of an empty composition");
  if (density < 4) throw InvalidConfig("mesh density must be at least 4");
  const int n_omega = density;
  const int n_eta = std::max(2, density / 2);
  const double pi = 3.14159265358979323846;
  std::ostringstream out;
  out.precision(9);
  out << "# superquadric composition, " << s.size() << " primitives\n";
  long base = 1;  // OBJ indices are 1-based
  for (std::size_t k = 0; k < s.size(); ++k) {
    const Superquadric& p = s.items[k];
    out << "o sq_" << k << "\ng sq_" << k << "\n";
    auto emit = [&](const Vec3& c) {
      const Vec3 w = canonical_to_world(c, p);
      out << "v " << w.x() << ' ' << w.y() << ' ' << w.z() << '\n';
    };
    // South pole, rings r = 1 .. n_eta-1, north pole.
    emit(Vec3(0, 0, -p.alpha()[2]));
    for (int r = 1; r < n_eta; ++r) {
      const double eta = -0.5 * pi + pi * r / n_eta;
      for (int c = 0; c < n_omega; ++c) {
        const double omega = -pi + 2.0 * pi * c / n_omega;
        emit(surface_point_canonical(p.alpha(), p.epsilon(), eta, omega));
      }
    }
    emit(Vec3(0, 0, p.alpha()[2]));
    const long south = base;
    const long north = base + 1 + static_cast<long>(n_eta - 1) * n_omega;
    auto ring = [&](int r, int c) { return base + 1 + static_cast<long>(r - 1) * n_omega + (c % n_omega); };
    for (int c = 0; c < n_omega; ++c) out << "f " << south << ' ' << ring(1, c + 1) << ' ' << ring(1, c) << '\n';
    for (int r = 1; r + 1 < n_eta; ++r)
      for (int c = 0; c < n_omega; ++c) {
        const long a = ring(r, c), b = ring(r, c + 1), cc = ring(r + 1, c + 1), d = ring(r + 1, c);
        out << "f " << a << ' ' << b << ' ' << cc << '\n';
        out << "f " << a << ' ' << cc << ' ' << d << '\n';
      }
    for (int c = 0; c < n_omega; ++c)
      out << "f " << ring(n_eta - 1, c) << ' ' << ring(n_eta - 1, c + 1) << ' ' << north << '\n';
    base = north + 1;
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_text(path, out.str());
}

void write_grid_dump(const VoxelGrid& grid, const fs::path& base) {
  static_assert(std::endian::native == std::endian::little, "grid dumps assume a little-endian host");
  if (base.has_parent_path()) fs::create_directories(base.parent_path());
  fs::path raw = base;
  raw += ".raw";
  fs::path hdr = base;
  hdr += ".json";
  std::vector<float> data(grid.values.begin(), grid.values.end());
  std::ofstream out(raw, std::ios::binary);
  if (!out) throw InputError("cannot write " + raw.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
  json j = {{"n", grid.geom.n},
            {"center", vec_json(grid.geom.center.data(), 3)},
            {"spacing", grid.geom.spacing},
            {"dtype", "float32"},
            {"order", "x-fastest"}};
  write_text(hdr, j.dump(2) + "\n");
}

VoxelGrid read_grid_dump(const fs::path& base) {
  fs::path raw = base;
  raw += ".raw";
  fs::path hdr = base;
  hdr += ".json";
  json j;
  try {
    j = json::parse(read_text(hdr));
  } catch (const json::exception& e) {
    throw ManifestParse("cannot parse " + hdr.string() + ": " + e.what());
  }
  GridGeometry g;
  g.n = field<int>(j, "n", hdr.string());
  g.center = vec_field<3>(j, "center", hdr.string());
  g.spacing = field<double>(j, "spacing", hdr.string());
  if (g.n < 2 || !(g.spacing > 0.0)) throw ManifestParse(hdr.string() + ": invalid grid geometry");
  VoxelGrid grid(g, 0.0);
  std::vector<float> data(grid.values.size());
  std::ifstream in(raw, std::ios::binary);
  if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float))))
    throw DimensionMismatch(raw.string() + " is shorter than n^3 float32 values");
  for (std::size_t i = 0; i < data.size(); ++i) grid.values[i] = data[i];
  return grid;
}

std::string trace_record(const StepRecord& r) {
  json j = {{"iter", r.iter}, {"step", r.step}, {"loss", r.loss}, {"lr", r.lr}};
  return j.dump();
}

void write_trace(const std::vector<StepRecord>& steps, const fs::path& path) {
  std::string text;
  for (const auto& r : steps) text += trace_record(r) + "\n";
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_text(path, text);
}

}  // namespace isco
