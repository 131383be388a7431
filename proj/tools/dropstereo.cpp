// dropstereo: command-line front end of the pipeline.

#include "dropstereo/dropstereo.hpp"

#include "CLI11.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

namespace fs = std::filesystem;
using namespace dropstereo;

namespace {

// ---------------------------------------------------------------------------
// Logging to stderr; level from DROPSTEREO_LOG (error, warn, info, debug).

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

Level log_threshold() {
  static const Level level = [] {
    const char* env = std::getenv("DROPSTEREO_LOG");
    const std::string s = env ? env : "";
    if (s == "error") return Level::error;
    if (s == "info") return Level::info;
    if (s == "debug") return Level::debug;
    return Level::warn;
  }();
  return level;
}

std::mutex log_mutex;

void log(Level level, const std::string& msg) {
  if (level > log_threshold()) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::lock_guard<std::mutex> lock(log_mutex);
  std::cerr << "[dropstereo " << names[static_cast<int>(level)] << "] " << msg << '\n';
}

// Runs f(k) for k < n on up to `jobs` threads (0 means one per item). The
// first failure by index is rethrown, so errors do not depend on scheduling.
template <class F>
void parallel_for(int n, int jobs, F&& f) {
  const int threads = std::max(1, std::min(n, jobs > 0 ? jobs : n));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int k = next++; k < n; k = next++) {
      try {
        f(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw FormatError("cannot create directory '" + dir + "'");
}

std::string in_dir(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::string sidecar(const std::string& path) {
  return fs::path(path).replace_extension(".json").string();
}

Config load_config(const std::string& path) {
  if (path.empty()) {
    log(Level::info, "no config given, using defaults");
    return Config{};
  }
  return read_config(path);
}

Json energy_json(const Energy& e) {
  return {{"tension", e.tension}, {"gravity", e.gravity}, {"total", e.total}};
}

// ---------------------------------------------------------------------------
// Subcommands

struct Common {
  std::string config;
  std::uint32_t seed = 0;
  int jobs = 0;
};

void run_synth(const Common& c, const std::string& scene_path, const std::string& out) {
  const Config cfg = load_config(c.config);
  const SceneFile scene = read_scene(scene_path);
  ensure_dir(out);
  const int n = static_cast<int>(scene.drops.size());
  std::vector<DropMask> masks(n);
  std::vector<HeightField> fields(n);
  std::vector<SolveReport> reports(n);
  parallel_for(n, c.jobs, [&](int k) {
    masks[k] = build_drop_mask(scene, scene.drops[k]);
    auto [hf, rep] = solve_fixed_volume(masks[k], initial_volume(masks[k], scene.drops[k].alpha),
                                        synthetic::ground_truth_params(), cfg.optical);
    fields[k] = std::move(hf);
    reports[k] = std::move(rep);
    log(Level::info, "drop " + std::to_string(k) + ": " + std::to_string(reports[k].iterations_run) +
                         " sweeps");
  });
  const SceneSpec spec = build_scene(scene);
  const RenderOutput r = render_synthetic_full(spec, fields, cfg.optical);
  write_ppm(in_dir(out, "image.ppm"), r.image);
  Json truth = {{"width", scene.width}, {"height", scene.height}, {"drops", Json::array()}};
  for (int k = 0; k < n; ++k) {
    const std::string id = std::to_string(k);
    write_mask(in_dir(out, "mask_" + id + ".pgm"), masks[k]);
    write_height_field(in_dir(out, "drop_" + id + ".pfm"), fields[k]);
    write_pfm(in_dir(out, "depth_" + id + ".pfm"), r.drop_depth[k]);
    truth["drops"].push_back({{"alpha", scene.drops[k].alpha},
                              {"area", masks[k].area()},
                              {"volume", volume_of(fields[k])},
                              {"max_height", fields[k].max_height()},
                              {"diameter", masks[k].equivalent_diameter()},
                              {"iterations", reports[k].iterations_run},
                              {"converged", reports[k].converged}});
  }
  write_json_file(in_dir(out, "truth.json"), truth);
  log(Level::info, "wrote " + std::to_string(n) + " drops to " + out);
}

void run_detect(const Common& c, const std::string& image_path, const std::string& out) {
  const Config cfg = load_config(c.config);
  const RasterGray image = read_pnm(image_path);
  const auto masks = detect_drops(image, cfg.detect);
  ensure_dir(out);
  for (std::size_t k = 0; k < masks.size(); ++k)
    write_mask(in_dir(out, "mask_" + std::to_string(k) + ".pgm"), masks[k]);
  if (masks.empty()) log(Level::warn, "no drops detected in " + image_path);
  log(Level::info, "detected " + std::to_string(masks.size()) + " drops");
}

void run_reconstruct(const Common& c, const std::string& image_path, const std::string& mask_list,
                     const std::string& out, std::optional<double> alpha, bool estimate) {
  Config cfg = load_config(c.config);
  if (alpha) {
    if (*alpha < kAlphaLowest || *alpha > kAlphaHighest)
      throw DomainError("--alpha must lie in [0.05, 0.60]");
    cfg.volume.fixed_alpha = true;
    cfg.volume.alpha_init = *alpha;
  } else if (estimate) {
    cfg.volume.fixed_alpha = false;
  }
  const RasterGray image = read_pnm(image_path);
  const auto paths = split_list(mask_list);
  if (paths.empty()) throw DomainError("--mask: no mask given");
  std::vector<DropMask> masks;
  for (const auto& p : paths) {
    masks.push_back(read_mask(p));
    if (masks.back().empty()) throw FormatError("'" + p + "': mask is empty");
    if (masks.back().width() != image.width() || masks.back().height() != image.height())
      throw DomainError("'" + p + "': mask size differs from the image");
  }
  const int n = static_cast<int>(masks.size());
  std::vector<std::string> outs;
  if (n == 1) {
    outs.push_back(out);
  } else {
    ensure_dir(out);
    for (int k = 0; k < n; ++k) outs.push_back(in_dir(out, "drop_" + std::to_string(k) + ".pfm"));
  }
  std::vector<ShapeEstimate> est(n);
  parallel_for(n, c.jobs, [&](int k) {
    est[k] = estimate_shape(image, masks[k], cfg.optical, cfg.volume, cfg.solver, masks);
    log(Level::info, paths[k] + ": alpha " + std::to_string(est[k].alpha));
  });
  for (int k = 0; k < n; ++k) {
    write_height_field(outs[k], est[k].field);
    const auto& e = est[k];
    write_json_file(sidecar(outs[k]),
                    {{"mask", paths[k]},
                     {"mode", cfg.volume.fixed_alpha ? "fixed_alpha" : "estimate_volume"},
                     {"alpha_est", e.alpha},
                     {"alpha_history", e.alpha_history},
                     {"volume", volume_of(e.field)},
                     {"iterations", e.report.iterations_run},
                     {"total_iterations", e.total_iterations},
                     {"converged", e.report.converged},
                     {"final_energy", e.report.final_energy},
                     {"energies", energy_json(e.report.final_energies)}});
  }
}

void run_stereo(const Common& c, const std::string& image_path, const std::string& drop_list,
                const std::string& out, const std::string& corr_path) {
  Config cfg = load_config(c.config);
  cfg.stereo.match.seed = c.seed;
  const RasterGray image = read_pnm(image_path);
  const auto paths = split_list(drop_list);
  if (paths.size() < 2) throw InsufficientDropsError("--drops: need at least two drops");
  const int n = static_cast<int>(paths.size());
  std::vector<HeightField> drops(n);
  parallel_for(n, c.jobs, [&](int k) { drops[k] = read_height_field(paths[k]); });
  std::optional<std::vector<Correspondence>> corr;
  if (!corr_path.empty()) corr = read_correspondences(corr_path);
  std::vector<DropSurface> surfaces;
  for (int k = 0; k < n; ++k) {
    if (drops[k].width() != image.width() || drops[k].height() != image.height())
      throw DomainError("'" + paths[k] + "': drop size differs from the image");
    surfaces.emplace_back(drops[k], cfg.optical);
  }
  const auto matches = corr ? *corr : match_drops(image, surfaces, cfg.stereo);
  if (static_cast<int>(matches.size()) < cfg.stereo.match.min_matches)
    throw InsufficientMatchesError("stereo: too few correspondences");
  const DepthResult r = triangulate_correspondences(surfaces, matches, cfg.stereo);

  ensure_dir(out);
  for (int k = 0; k < n; ++k)
    write_pfm(in_dir(out, "depth_" + std::to_string(k) + ".pfm"), r.depth_maps[k]);
  write_correspondences(in_dir(out, "correspondences.csv"), matches);
  {
    std::ofstream f(in_dir(out, "points.csv"), std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot open '" + in_dir(out, "points.csv") + "' for writing");
    f << "x,y,z,residual,valid,drop_a,i_a,j_a\n";
    for (std::size_t k = 0; k < r.points.size(); ++k) {
      const auto& p = r.points[k];
      const auto& s = r.sources[k].front();
      f << format_double(p.x()) << ',' << format_double(p.y()) << ',' << format_double(p.z())
        << ',' << format_double(r.residuals[k]) << ',' << int(r.valid[k]) << ',' << s.drop_a
        << ',' << format_double(s.i_a) << ',' << format_double(s.j_a) << '\n';
    }
  }
  const auto z = r.valid_depths();
  std::vector<double> valid_res;
  for (std::size_t k = 0; k < r.points.size(); ++k)
    if (r.valid[k]) valid_res.push_back(r.residuals[k]);
  Json stats = {{"correspondences", matches.size()},
                {"points", r.points.size()},
                {"valid_points", r.valid_count()},
                {"median_residual", median_of(r.residuals)},
                {"seed", c.seed}};
  if (!z.empty()) {
    stats["median_valid_residual"] = median_of(valid_res);
    stats["median_depth"] = median_of(z);
    stats["min_depth"] = *std::min_element(z.begin(), z.end());
    stats["max_depth"] = *std::max_element(z.begin(), z.end());
  }
  write_json_file(in_dir(out, "stats.json"), stats);
  log(Level::info, std::to_string(r.valid_count()) + " valid points");
}

void run_rectify(const Common& c, const std::string& image_path, const std::string& drop_path,
                 const std::string& depth_path, std::optional<double> plane_depth,
                 const std::string& out) {
  const Config cfg = load_config(c.config);
  const RasterGray image = read_pnm(image_path);
  const HeightField hf = read_height_field(drop_path);
  double depth = 0.0;
  if (plane_depth) {
    depth = *plane_depth;
  } else {
    const Grid<float> d = read_pfm(depth_path);
    std::vector<double> z;
    for (float v : d.data())
      if (std::isfinite(v)) z.push_back(v);
    if (z.empty()) throw EmptyOutputError("'" + depth_path + "': no finite depth");
    depth = median_of(z);
  }
  const RectifiedView v = rectify_drop(image, hf, cfg.optical, depth, cfg.rectify);
  write_pnm(out, v.raster);
  write_json_file(sidecar(out), {{"depth", v.depth},
                                 {"width", v.raster.width()},
                                 {"height", v.raster.height()},
                                 {"origin_i", v.origin_i},
                                 {"origin_j", v.origin_j},
                                 {"step", v.step},
                                 {"valid_fraction", v.valid_fraction},
                                 {"compensated", cfg.rectify.compensate}});
}

void run_eval(const std::string& pred, const std::string& truth, const std::string& out,
              const std::string& norm) {
  const auto r = compare_maps(read_pfm(pred), read_pfm(truth),
                              norm == "depth" ? Normalization::depth : Normalization::diameter);
  const Json j = {{"pred", pred},
                  {"truth", truth},
                  {"normalization", norm},
                  {"compared", r.compared},
                  {"missing", r.missing},
                  {"rms", r.rms},
                  {"median_abs", r.median_abs},
                  {"max_abs", r.max_abs},
                  {"scale", r.scale},
                  {"rms_normalized", r.rms_normalized},
                  {"median_normalized", r.median_normalized},
                  {"rms_percent", 100.0 * r.rms_normalized},
                  {"median_percent", 100.0 * r.median_normalized}};
  if (out.empty())
    std::cout << j.dump(2) << '\n';
  else
    write_json_file(out, j);
}

void run_schema(const std::string& kind, const std::string& out) {
  const Json j = kind == "scene" ? scene_schema() : config_schema();
  if (out.empty())
    std::cout << j.dump(2) << '\n';
  else
    write_json_file(out, j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Depth from adherent water drops"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--seed", common.seed, "seed for every random choice")->capture_default_str();
  app.add_option("--jobs", common.jobs, "per-drop threads; 0 means one per drop")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  std::string scene, image, out, masks, drops, corr, drop, depth, pred, truth, norm = "diameter",
                                                                          kind = "config";
  std::optional<double> alpha, plane_depth;
  bool estimate = false;

  auto* synth = app.add_subcommand("synth", "render a synthetic scene with ground truth");
  synth->add_option("--scene", scene, "scene JSON")->required();
  synth->add_option("--config", common.config, "config JSON");
  synth->add_option("--out", out, "output directory")->required();

  auto* detect = app.add_subcommand("detect", "find drop masks");
  detect->add_option("--image", image, "PGM or PPM image")->required();
  detect->add_option("--config", common.config, "config JSON");
  detect->add_option("--out", out, "output directory")->required();

  auto* recon = app.add_subcommand("reconstruct", "estimate drop surfaces");
  recon->add_option("--image", image, "PGM or PPM image")->required();
  recon->add_option("--mask", masks, "mask PGM, or a comma-separated list")->required();
  recon->add_option("--config", common.config, "config JSON");
  recon->add_option("--out", out, "height field PFM, or a directory for several masks")
      ->required();
  auto* a_opt = recon->add_option("--alpha", alpha, "fixed volume coefficient");
  auto* e_opt = recon->add_flag("--estimate-volume", estimate, "estimate volume from the dark band");
  a_opt->excludes(e_opt);
  e_opt->excludes(a_opt);

  auto* stereo = app.add_subcommand("stereo", "scene depth from several drops");
  stereo->add_option("--image", image, "PGM or PPM image")->required();
  stereo->add_option("--drops", drops, "comma-separated height field PFMs")->required();
  stereo->add_option("--config", common.config, "config JSON");
  stereo->add_option("--out", out, "output directory")->required();
  stereo->add_option("--correspondences", corr, "correspondence CSV instead of matching");

  auto* rect = app.add_subcommand("rectify", "undistorted view through one drop");
  rect->add_option("--image", image, "PGM or PPM image")->required();
  rect->add_option("--drop", drop, "height field PFM")->required();
  auto* d_opt = rect->add_option("--depth", depth, "depth PFM; its median finite value is used");
  auto* p_opt = rect->add_option("--plane-depth", plane_depth, "plane depth, pixels");
  d_opt->excludes(p_opt);
  p_opt->excludes(d_opt);
  rect->add_option("--config", common.config, "config JSON");
  rect->add_option("--out", out, "output PGM or PPM")->required();

  auto* eval = app.add_subcommand("eval", "compare a map with the truth");
  eval->add_option("--pred", pred, "predicted PFM")->required();
  eval->add_option("--truth", truth, "true PFM")->required();
  eval->add_option("--out", out, "report JSON; stdout when absent");
  eval->add_option("--normalize", norm, "diameter or depth")
      ->check(CLI::IsMember({"diameter", "depth"}))
      ->capture_default_str();

  auto* schema = app.add_subcommand("schema", "print the JSON schema");
  schema->add_option("--kind", kind, "config or scene")
      ->check(CLI::IsMember({"config", "scene"}))
      ->capture_default_str();
  schema->add_option("--out", out, "schema JSON; stdout when absent");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth) run_synth(common, scene, out);
    if (*detect) run_detect(common, image, out);
    if (*recon) run_reconstruct(common, image, masks, out, alpha, estimate);
    if (*stereo) run_stereo(common, image, drops, out, corr);
    if (*rect) {
      if (!plane_depth && depth.empty()) {
        std::cerr << "rectify: one of --depth or --plane-depth is required\n";
        return 2;
      }
      run_rectify(common, image, drop, depth, plane_depth, out);
    }
    if (*eval) run_eval(pred, truth, out, norm);
    if (*schema) run_schema(kind, out);
  } catch (const std::exception& e) {
    std::cerr << "dropstereo: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
