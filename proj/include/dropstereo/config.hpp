#pragma once

// JSON configuration and scene files. Every section is described by a field
// table that drives decoding, encoding and the generated JSON schema, so the
// three cannot drift apart. Unknown keys are rejected.

#include "dropstereo/core.hpp"
#include "dropstereo/detect.hpp"
#include "dropstereo/formats.hpp"
#include "dropstereo/rectify.hpp"
#include "dropstereo/render.hpp"
#include "dropstereo/solver.hpp"
#include "dropstereo/stereo.hpp"
#include "dropstereo/synthetic.hpp"
#include "dropstereo/volume.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace dropstereo {

using Json = nlohmann::ordered_json;

class ConfigError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Admissible range of the volume coefficient in any configuration.
inline constexpr double kAlphaLowest = 0.05;
inline constexpr double kAlphaHighest = 0.60;

namespace detail {

inline void decode(const Json& j, double& v, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(where + ": must be finite");
}
inline void decode(const Json& j, int& v, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
  const auto x = j.get<std::int64_t>();
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    throw ConfigError(where + ": integer out of range");
  v = static_cast<int>(x);
}
inline void decode(const Json& j, std::uint32_t& v, const std::string& where) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0 ||
      j.get<std::int64_t>() > std::numeric_limits<std::uint32_t>::max())
    throw ConfigError(where + ": expected an unsigned 32-bit integer");
  v = j.get<std::uint32_t>();
}
inline void decode(const Json& j, bool& v, const std::string& where) {
  if (!j.is_boolean()) throw ConfigError(where + ": expected true or false");
  v = j.get<bool>();
}
inline void decode(const Json& j, std::string& v, const std::string& where) {
  if (!j.is_string()) throw ConfigError(where + ": expected a string");
  v = j.get<std::string>();
}
template <std::size_t N>
void decode(const Json& j, std::array<double, N>& v, const std::string& where) {
  if (!j.is_array() || j.size() != N)
    throw ConfigError(where + ": expected an array of " + std::to_string(N) + " numbers");
  for (std::size_t k = 0; k < N; ++k) decode(j[k], v[k], where + "[" + std::to_string(k) + "]");
}
template <std::size_t N>
void decode(const Json& j, std::optional<std::array<double, N>>& v, const std::string& where) {
  if (j.is_null()) {
    v.reset();
    return;
  }
  std::array<double, N> a{};
  decode(j, a, where);
  v = a;
}

template <class V>
Json encode(const V& v) {
  return Json(v);
}
template <std::size_t N>
Json encode(const std::optional<std::array<double, N>>& v) {
  return v ? Json(*v) : Json(nullptr);
}

template <class V>
Json schema_type() {
  if constexpr (std::is_same_v<V, bool>)
    return {{"type", "boolean"}};
  else if constexpr (std::is_same_v<V, std::uint32_t>)
    return {{"type", "integer"}, {"minimum", 0}};
  else if constexpr (std::is_integral_v<V>)
    return {{"type", "integer"}};
  else if constexpr (std::is_floating_point_v<V>)
    return {{"type", "number"}};
  else if constexpr (std::is_same_v<V, std::string>)
    return {{"type", "string"}};
  else if constexpr (std::is_same_v<V, std::array<double, 2>>)
    return {{"type", "array"}, {"items", {{"type", "number"}}}, {"minItems", 2}, {"maxItems", 2}};
  else if constexpr (std::is_same_v<V, std::array<double, 3>>)
    return {{"type", "array"}, {"items", {{"type", "number"}}}, {"minItems", 3}, {"maxItems", 3}};
  else if constexpr (std::is_same_v<V, std::optional<std::array<double, 2>>>)
    return {{"type", {"array", "null"}},
            {"items", {{"type", "number"}}},
            {"minItems", 2},
            {"maxItems", 2}};
  else
    static_assert(sizeof(V) == 0, "schema_type: unsupported field type");
}

}  // namespace detail

// One JSON key of a section.
template <class T>
struct Field {
  std::string name;
  std::string description;
  bool required = false;
  Json schema;  // type part of the schema entry
  std::function<Json(const T&)> get;
  std::function<void(T&, const Json&, const std::string&)> set;
};

// Field bound to a member reached through `access`.
template <class T, class V, class Access>
Field<T> field(std::string name, std::string description, Access access, bool required = false) {
  Field<T> f;
  f.name = std::move(name);
  f.description = std::move(description);
  f.required = required;
  f.schema = detail::schema_type<V>();
  f.get = [access](const T& t) { return detail::encode(access(const_cast<T&>(t))); };
  f.set = [access](T& t, const Json& j, const std::string& where) {
    detail::decode(j, access(t), where);
  };
  return f;
}

#define DROPSTEREO_FIELD(T, member, desc) \
  field<T, decltype(T::member)>(#member, desc, [](T& t) -> auto& { return t.member; })

template <class T>
void decode_object(const Json& j, T& out, const std::vector<Field<T>>& fields,
                   const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const auto& f : fields) known = known || f.name == item.key();
    if (!known) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
  for (const auto& f : fields) {
    const std::string at = where + "." + f.name;
    if (j.contains(f.name))
      f.set(out, j.at(f.name), at);
    else if (f.required)
      throw ConfigError(at + ": required field is missing");
  }
}

template <class T>
Json encode_object(const T& v, const std::vector<Field<T>>& fields) {
  Json j = Json::object();
  for (const auto& f : fields) j[f.name] = f.get(v);
  return j;
}

template <class T>
Json schema_object(const std::vector<Field<T>>& fields, const std::string& description,
                   const T& defaults = T{}) {
  Json props = Json::object();
  Json required = Json::array();
  for (const auto& f : fields) {
    Json p = f.schema;
    p["description"] = f.description;
    if (!f.required) p["default"] = f.get(defaults);
    props[f.name] = p;
    if (f.required) required.push_back(f.name);
  }
  Json s = {{"type", "object"}, {"description", description}, {"additionalProperties", false},
            {"properties", props}};
  if (!required.empty()) s["required"] = required;
  return s;
}

// ---------------------------------------------------------------------------
// Field tables

inline const std::vector<Field<OpticalConfig>>& optical_fields() {
  using T = OpticalConfig;
  static const std::vector<Field<T>> f = {
      DROPSTEREO_FIELD(T, n_air, "refractive index of air"),
      field<T, double>("n_water", "refractive index of water", [](T& t) -> auto& {
        return t.n_water;
      }, true),
      DROPSTEREO_FIELD(T, camera_z, "camera to glass distance, pixels"),
      DROPSTEREO_FIELD(T, gravity_cosines, "direction cosines of gravity, unit norm"),
      DROPSTEREO_FIELD(T, tension_weight, "weight of the surface tension energy"),
      DROPSTEREO_FIELD(T, gravity_weight, "weight of the gravitational energy"),
      DROPSTEREO_FIELD(T, pixel_pitch, "metres per pixel, metadata only"),
      DROPSTEREO_FIELD(T, principal_point, "principal point (row, col); null is the image centre"),
      DROPSTEREO_FIELD(T, camera_at_infinity, "camera rays parallel to the optical axis"),
      DROPSTEREO_FIELD(T, paraxial_camera, "paraxial equivalent camera instead of the exact one"),
  };
  return f;
}

inline const std::vector<Field<SolverParams>>& solver_fields() {
  using T = SolverParams;
  static const std::vector<Field<T>> f = {
      DROPSTEREO_FIELD(T, tau, "step size of the surface update"),
      DROPSTEREO_FIELD(T, max_iters, "sweep limit of a fixed-volume solve"),
      DROPSTEREO_FIELD(T, convergence_rel, "stop when the summed height change per sweep falls "
                                           "below this fraction of the volume"),
      DROPSTEREO_FIELD(T, pin_boundary, "hold the contact line at zero height"),
      DROPSTEREO_FIELD(T, energy_window, "sweeps between energy samples"),
  };
  return f;
}

inline const std::vector<Field<VolumeLoopParams>>& volume_fields() {
  using T = VolumeLoopParams;
  static const std::vector<Field<T>> f = [] {
    std::vector<Field<T>> v = {
        DROPSTEREO_FIELD(T, tau_r, "volume update step"),
        DROPSTEREO_FIELD(T, inner_iters_per_update, "sweep limit of each inner solve"),
        DROPSTEREO_FIELD(T, inner_convergence_rel, "convergence threshold of each inner solve"),
        DROPSTEREO_FIELD(T, max_outer_updates, "maximum number of volume updates"),
        DROPSTEREO_FIELD(T, alpha_init, "starting volume coefficient"),
        DROPSTEREO_FIELD(T, rel_volume_tol, "stop when a volume update changes less than this"),
        DROPSTEREO_FIELD(T, band_halfwidth, "half width of the sampled ring in normal z"),
    };
    Field<T> target;
    target.name = "target";
    target.description = "ring brightness target: fresnel or linear";
    target.schema = {{"type", "string"}, {"enum", {"fresnel", "linear"}}};
    target.get = [](const T& t) {
      return Json(t.target == RingTarget::fresnel ? "fresnel" : "linear");
    };
    target.set = [](T& t, const Json& j, const std::string& where) {
      std::string s;
      detail::decode(j, s, where);
      if (s == "fresnel")
        t.target = RingTarget::fresnel;
      else if (s == "linear")
        t.target = RingTarget::linear;
      else
        throw ConfigError(where + ": expected 'fresnel' or 'linear'");
    };
    v.push_back(target);
    v.push_back(DROPSTEREO_FIELD(T, bracket, "keep updates inside the bracketed interval"));
    v.push_back(DROPSTEREO_FIELD(T, fixed_alpha, "skip volume estimation and use alpha_init"));
    v.push_back(DROPSTEREO_FIELD(T, alpha_min, "lower clamp of the volume coefficient"));
    v.push_back(DROPSTEREO_FIELD(T, alpha_max, "upper clamp of the volume coefficient"));
    return v;
  }();
  return f;
}

inline const std::vector<Field<DetectParams>>& detect_fields() {
  using T = DetectParams;
  static const std::vector<Field<T>> f = {
      DROPSTEREO_FIELD(T, low_percentile, "low hysteresis threshold, percentile of edge strength"),
      DROPSTEREO_FIELD(T, high_percentile, "high hysteresis threshold, percentile of edge strength"),
      DROPSTEREO_FIELD(T, closing_radius, "closing disk radius, pixels"),
      DROPSTEREO_FIELD(T, opening_radius, "opening disk radius, pixels; 0 disables"),
      DROPSTEREO_FIELD(T, outline_width, "growth of each enclosed region over its outline, pixels"),
      DROPSTEREO_FIELD(T, min_solidity, "minimum area over convex hull area"),
      DROPSTEREO_FIELD(T, min_diameter, "minimum equivalent diameter, pixels"),
  };
  return f;
}

inline const std::vector<Field<StereoParams>>& stereo_fields() {
  using T = StereoParams;
  static const std::vector<Field<T>> f = {
      DROPSTEREO_FIELD(T, dewarp_resolution, "dewarped image size along the longer side"),
      DROPSTEREO_FIELD(T, max_tan, "most oblique outbound ray kept, as a tangent"),
      DROPSTEREO_FIELD(T, max_shift, "longest disparity searched along the baseline"),
      DROPSTEREO_FIELD(T, outlier_factor, "reject points above this times the median residual"),
      field<T, int>("window", "matching window side, odd",
                    [](T& t) -> auto& { return t.match.window; }),
      field<T, int>("search_radius", "2D search radius around the baseline hit",
                    [](T& t) -> auto& { return t.match.search_radius; }),
      field<T, double>("min_score", "minimum ZNCC score",
                       [](T& t) -> auto& { return t.match.min_score; }),
      field<T, double>("lr_tolerance", "left-right consistency tolerance, pixels",
                       [](T& t) -> auto& { return t.match.lr_tolerance; }),
      field<T, int>("stride", "spacing of query pixels",
                    [](T& t) -> auto& { return t.match.stride; }),
      field<T, double>("min_stddev", "skip windows flatter than this",
                       [](T& t) -> auto& { return t.match.min_stddev; }),
      field<T, int>("min_matches", "fewest correspondences accepted",
                    [](T& t) -> auto& { return t.match.min_matches; }),
  };
  return f;
}

inline const std::vector<Field<RectifyParams>>& rectify_fields() {
  using T = RectifyParams;
  static const std::vector<Field<T>> f = {
      DROPSTEREO_FIELD(T, max_size, "cap on either side of the output"),
      DROPSTEREO_FIELD(T, max_tan, "most oblique outbound ray kept, as a tangent"),
      DROPSTEREO_FIELD(T, compensate, "divide by the Fresnel transmittance"),
  };
  return f;
}

// ---------------------------------------------------------------------------
// Config

struct Config {
  OpticalConfig optical;
  SolverParams solver;
  VolumeLoopParams volume;
  DetectParams detect;
  StereoParams stereo;
  RectifyParams rectify;

  void validate() const {
    if (!(volume.alpha_init >= kAlphaLowest && volume.alpha_init <= kAlphaHighest))
      throw DomainError("volume.alpha_init: must lie in [0.05, 0.60]");
    if (volume.alpha_min < kAlphaLowest || volume.alpha_max > kAlphaHighest)
      throw DomainError("volume: alpha bounds must lie in [0.05, 0.60]");
    optical.validate();
    solver.validate();
    volume.validate();
    detect.validate();
    if (stereo.match.window < 3 || stereo.match.window % 2 == 0)
      throw DomainError("stereo.window: must be odd and >= 3");
    if (stereo.dewarp_resolution < 2 || stereo.match.stride < 1 || stereo.max_shift < 0 ||
        stereo.match.search_radius < 0 || !(stereo.max_tan > 0.0) ||
        !(stereo.outlier_factor > 0.0) || stereo.match.min_matches < 1)
      throw DomainError("stereo: parameters out of range");
    if (rectify.max_size < 2 || !(rectify.max_tan > 0.0))
      throw DomainError("rectify: parameters out of range");
  }
};

inline Config config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config: expected an object");
  static const char* sections[] = {"optical", "solver", "volume", "detect", "stereo", "rectify"};
  for (const auto& item : j.items())
    if (std::find_if(std::begin(sections), std::end(sections),
                     [&](const char* s) { return item.key() == s; }) == std::end(sections))
      throw ConfigError("config: unknown key '" + item.key() + "'");
  if (!j.contains("optical")) throw ConfigError("config.optical.n_water: required field is missing");
  Config c;
  decode_object(j.at("optical"), c.optical, optical_fields(), "config.optical");
  if (j.contains("solver")) decode_object(j.at("solver"), c.solver, solver_fields(), "config.solver");
  if (j.contains("volume")) decode_object(j.at("volume"), c.volume, volume_fields(), "config.volume");
  if (j.contains("detect")) decode_object(j.at("detect"), c.detect, detect_fields(), "config.detect");
  if (j.contains("stereo")) decode_object(j.at("stereo"), c.stereo, stereo_fields(), "config.stereo");
  if (j.contains("rectify"))
    decode_object(j.at("rectify"), c.rectify, rectify_fields(), "config.rectify");
  c.validate();
  return c;
}

inline Json config_to_json(const Config& c) {
  return {{"optical", encode_object(c.optical, optical_fields())},
          {"solver", encode_object(c.solver, solver_fields())},
          {"volume", encode_object(c.volume, volume_fields())},
          {"detect", encode_object(c.detect, detect_fields())},
          {"stereo", encode_object(c.stereo, stereo_fields())},
          {"rectify", encode_object(c.rectify, rectify_fields())}};
}

inline Json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "' for reading");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

inline void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw FormatError("'" + path + "': write failed");
}

inline Config read_config(const std::string& path) {
  try {
    return config_from_json(parse_json_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

inline void write_config(const std::string& path, const Config& c) {
  write_json_file(path, config_to_json(c));
}

inline Json config_schema() {
  return {{"$schema", "https://json-schema.org/draft/2020-12/schema"},
          {"title", "dropstereo configuration"},
          {"type", "object"},
          {"additionalProperties", false},
          {"required", {"optical"}},
          {"properties",
           {{"optical", schema_object(optical_fields(), "camera and physical constants")},
            {"solver", schema_object(solver_fields(), "fixed-volume surface solver")},
            {"volume", schema_object(volume_fields(), "dark-band volume estimation")},
            {"detect", schema_object(detect_fields(), "drop detection")},
            {"stereo", schema_object(stereo_fields(), "multi-drop stereo")},
            {"rectify", schema_object(rectify_fields(), "geometric rectification")}}}};
}

// ---------------------------------------------------------------------------
// Scene files: planes with file or procedural textures, plus drops.

struct TextureSpec {
  std::string kind = "value_noise";  // checkerboard, value_noise, step_edge
  int width = 512, height = 512;
  double square = 16.0;    // checkerboard
  double cell = 8.0;       // value_noise
  std::uint32_t seed = 0;  // value_noise
  double edge_col = 256.0;  // step_edge
  double ramp = 10.0;       // step_edge
  double lo = 0.1, hi = 0.9;

  RasterGray make() const {
    if (width <= 0 || height <= 0) throw DomainError("texture: size must be positive");
    if (kind == "checkerboard") return synthetic::checkerboard(width, height, square, lo, hi);
    if (kind == "value_noise") return synthetic::value_noise(width, height, cell, seed, lo, hi);
    if (kind == "step_edge") return synthetic::step_edge(width, height, edge_col, ramp, lo, hi);
    throw DomainError("texture: unknown kind '" + kind + "'");
  }
};

struct PlaneSpec {
  double depth = 2000.0;
  std::string texture_path;          // used when set
  TextureSpec texture;
  double scale = 1.0;
  // Unset offsets centre the texture on the optical axis.
  std::optional<std::array<double, 2>> offset;  // (x, y) of texel (0, 0)
  std::optional<std::array<double, 2>> x_range;  // [x_min, x_max)
};

struct DropSpec {
  std::array<double, 2> center{0.0, 0.0};  // (row, col)
  double radius = 60.0;
  double irregularity = 0.0;
  std::uint32_t seed = 0;
  double alpha = 0.30;
};

struct SceneFile {
  int width = 480, height = 480;
  double blur_radius = 3.0;
  double leak = 0.02;
  double border = 0.5;
  std::vector<PlaneSpec> planes;
  std::vector<DropSpec> drops;
};

inline const std::vector<Field<TextureSpec>>& texture_fields() {
  using T = TextureSpec;
  static const std::vector<Field<T>> f = {
      DROPSTEREO_FIELD(T, kind, "checkerboard, value_noise or step_edge"),
      DROPSTEREO_FIELD(T, width, "texels"),
      DROPSTEREO_FIELD(T, height, "texels"),
      DROPSTEREO_FIELD(T, square, "checkerboard square size, texels"),
      DROPSTEREO_FIELD(T, cell, "value noise cell size, texels"),
      DROPSTEREO_FIELD(T, seed, "value noise seed"),
      DROPSTEREO_FIELD(T, edge_col, "step edge column, texels"),
      DROPSTEREO_FIELD(T, ramp, "step edge ramp width, texels"),
      DROPSTEREO_FIELD(T, lo, "darkest intensity"),
      DROPSTEREO_FIELD(T, hi, "brightest intensity"),
  };
  return f;
}

inline const std::vector<Field<PlaneSpec>>& plane_fields() {
  using T = PlaneSpec;
  static const std::vector<Field<T>> f = [] {
    std::vector<Field<T>> v = {
        DROPSTEREO_FIELD(T, depth, "distance of the plane behind the glass, pixels"),
        DROPSTEREO_FIELD(T, texture_path, "PGM or PPM texture, relative to the scene file"),
    };
    Field<T> tex;
    tex.name = "texture";
    tex.description = "procedural texture, used when texture_path is empty";
    tex.schema = schema_object(texture_fields(), "procedural texture");
    tex.get = [](const T& t) { return encode_object(t.texture, texture_fields()); };
    tex.set = [](T& t, const Json& j, const std::string& where) {
      decode_object(j, t.texture, texture_fields(), where);
    };
    v.push_back(tex);
    v.push_back(DROPSTEREO_FIELD(T, scale, "scene units per texel"));
    v.push_back(DROPSTEREO_FIELD(T, offset, "scene (x, y) of texel (0, 0); null centres it"));
    v.push_back(DROPSTEREO_FIELD(T, x_range, "plane exists for x in [min, max); null is unbounded"));
    return v;
  }();
  return f;
}

inline const std::vector<Field<DropSpec>>& drop_fields() {
  using T = DropSpec;
  static const std::vector<Field<T>> f = {
      DROPSTEREO_FIELD(T, center, "(row, col) of the outline centre"),
      DROPSTEREO_FIELD(T, radius, "mean outline radius, pixels"),
      DROPSTEREO_FIELD(T, irregularity, "outline harmonic amplitude, 0 is a disk"),
      DROPSTEREO_FIELD(T, seed, "outline seed"),
      DROPSTEREO_FIELD(T, alpha, "volume coefficient"),
  };
  return f;
}

template <class T>
Field<SceneFile> list_field(std::string name, std::string description,
                            std::vector<T> SceneFile::*member,
                            const std::vector<Field<T>>& (*table)(), const std::string& item) {
  Field<SceneFile> f;
  f.name = std::move(name);
  f.description = std::move(description);
  f.schema = {{"type", "array"}, {"items", schema_object(table(), item)}};
  f.get = [member, table](const SceneFile& s) {
    Json a = Json::array();
    for (const auto& x : s.*member) a.push_back(encode_object(x, table()));
    return a;
  };
  f.set = [member, table](SceneFile& s, const Json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + ": expected an array");
    (s.*member).clear();
    for (std::size_t k = 0; k < j.size(); ++k) {
      T x;
      decode_object(j[k], x, table(), where + "[" + std::to_string(k) + "]");
      (s.*member).push_back(x);
    }
  };
  return f;
}

inline const std::vector<Field<SceneFile>>& scene_fields() {
  using T = SceneFile;
  static const std::vector<Field<T>> f = {
      DROPSTEREO_FIELD(T, width, "image width, pixels"),
      DROPSTEREO_FIELD(T, height, "image height, pixels"),
      DROPSTEREO_FIELD(T, blur_radius, "Gaussian sigma of the out-of-focus background"),
      DROPSTEREO_FIELD(T, leak, "intensity inside the dark band"),
      DROPSTEREO_FIELD(T, border, "intensity of rays that miss every texture"),
      list_field<PlaneSpec>("planes", "textured fronto-parallel planes", &T::planes, plane_fields,
                            "plane"),
      list_field<DropSpec>("drops", "drops on the glass", &T::drops, drop_fields, "drop"),
  };
  return f;
}

inline SceneFile scene_from_json(const Json& j) {
  SceneFile s;
  decode_object(j, s, scene_fields(), "scene");
  if (s.planes.empty()) throw ConfigError("scene.planes: at least one plane is required");
  for (const auto& d : s.drops) {
    if (!(d.radius > 0.0)) throw DomainError("scene.drops: radius must be positive");
    if (d.alpha < kAlphaLowest || d.alpha > kAlphaHighest)
      throw DomainError("scene.drops: alpha must lie in [0.05, 0.60]");
  }
  return s;
}

inline Json scene_to_json(const SceneFile& s) { return encode_object(s, scene_fields()); }

inline SceneFile read_scene(const std::string& path) {
  SceneFile s;
  try {
    s = scene_from_json(parse_json_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
  // Texture paths are relative to the scene file.
  const auto dir = std::filesystem::path(path).parent_path();
  for (auto& p : s.planes)
    if (!p.texture_path.empty() && std::filesystem::path(p.texture_path).is_relative())
      p.texture_path = (dir / p.texture_path).string();
  return s;
}

inline Json scene_schema() {
  Json s = schema_object(scene_fields(), "synthetic scene");
  s["$schema"] = "https://json-schema.org/draft/2020-12/schema";
  s["title"] = "dropstereo scene";
  return s;
}

// Renderer scene with textures loaded or generated.
inline SceneSpec build_scene(const SceneFile& f) {
  SceneSpec s;
  s.width = f.width;
  s.height = f.height;
  s.blur_radius = f.blur_radius;
  s.leak = f.leak;
  s.border = f.border;
  for (const auto& p : f.planes) {
    ScenePlane pl;
    pl.depth = p.depth;
    pl.scale = p.scale;
    if (!p.texture_path.empty()) {
      pl.texture = read_pnm(p.texture_path);
      pl.texture_path = p.texture_path;
    } else {
      pl.texture = p.texture.make();
    }
    if (p.offset) {
      pl.offset_x = (*p.offset)[0];
      pl.offset_y = (*p.offset)[1];
    } else {
      pl.offset_x = -0.5 * (pl.texture.width() - 1) * pl.scale;
      pl.offset_y = -0.5 * (pl.texture.height() - 1) * pl.scale;
    }
    if (p.x_range) {
      pl.x_min = (*p.x_range)[0];
      pl.x_max = (*p.x_range)[1];
    }
    s.planes.push_back(std::move(pl));
  }
  return s;
}

inline DropMask build_drop_mask(const SceneFile& f, const DropSpec& d) {
  const DropMask m = synthetic::irregular_mask(f.width, f.height, d.center[0], d.center[1],
                                               d.radius, d.irregularity, d.seed);
  if (m.empty()) throw DomainError("scene.drops: drop lies outside the image");
  return m;
}

}  // namespace dropstereo
