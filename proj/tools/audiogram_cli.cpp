// Command-line front end: dataset generation, each pipeline stage on its
// own, end-to-end runs, evaluation and overlays.
#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "audiogram/audiogram.hpp"

namespace fs = std::filesystem;
using namespace audiogram;

namespace {

synth::RenderStyle load_style(const std::string& path) {
  if (path.empty()) return {};
  const Json j = json_io::read_file(path);
  return synth::style_from_json(j.contains("style") ? j["style"] : j);
}

struct NoiseFlags {
  detect::DetectorNoise noise;
  void add(CLI::App* app) {
    app->add_option("--sigma", noise.sigma, "Centroid jitter (px)");
    app->add_option("--p-mis", noise.p_mis, "Misclassification probability");
    app->add_option("--p-fn", noise.p_fn, "False-negative probability");
    app->add_option("--lambda-fp", noise.lambda_fp, "Expected spurious boxes per image");
  }
};

void write_outputs_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "'");
}

std::vector<LineSegment> debug_segments;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recover digital audiograms from chart images"};
  app.set_config("--config", "", "Read options from a TOML/INI file");
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Random seed")->capture_default_str();
  app.fallthrough();

  // generate
  auto* gen = app.add_subcommand("generate", "Render a synthetic dataset");
  std::size_t count = 10;
  std::string gen_out, style_path;
  synth::DistortionRanges ranges;
  gen->add_option("--count", count)->capture_default_str();
  gen->add_option("--out", gen_out)->required();
  gen->add_option("--style", style_path, "Render style JSON (or a manifest)");
  gen->add_option("--angle-min", ranges.angle_min)->capture_default_str();
  gen->add_option("--angle-max", ranges.angle_max)->capture_default_str();
  gen->add_option("--rotation-max", ranges.rotation_max)->capture_default_str();
  gen->add_option("--lighting-max", ranges.lighting_max)->capture_default_str();
  gen->add_option("--noise", ranges.noise_max, "Maximum pixel noise sigma")->capture_default_str();
  gen->add_option("--occlusion-max", ranges.occlusion_max)->capture_default_str();
  gen->add_option("--shadow-probability", ranges.shadow_probability)->capture_default_str();

  // rectify
  auto* rect = app.add_subcommand("rectify", "Remove perspective distortion from an image");
  std::string rect_in, rect_out, rect_method = "lines", polygon_path, annotation_path, debug_dir,
                                 homography_out;
  rect->add_option("--input", rect_in)->required();
  rect->add_option("--method", rect_method)->check(CLI::IsMember({"lines", "quad"}))->capture_default_str();
  rect->add_option("--polygon", polygon_path, "Chart polygon JSON: [[x, y], ...] or an annotation");
  rect->add_option("--annotation", annotation_path, "Annotation whose gram box is cropped first");
  rect->add_option("--style", style_path);
  rect->add_option("--out", rect_out)->required();
  rect->add_option("--homography-out", homography_out);
  rect->add_option("--dump-debug", debug_dir, "Write the binary mask and segments here");

  // detect
  auto* det = app.add_subcommand("detect", "Produce detections for an image");
  std::string det_in, det_out, det_method = "template", det_file;
  NoiseFlags det_noise;
  det->add_option("--input", det_in)->required();
  det->add_option("--method", det_method)->check(CLI::IsMember({"template", "simulate", "file"}))->capture_default_str();
  det->add_option("--detections", det_file, "Detections JSON (file method)");
  det->add_option("--annotation", annotation_path, "Ground truth (simulate method)");
  det->add_option("--style", style_path);
  det_noise.add(det);
  det->add_option("--out", det_out)->required();

  // interpret
  auto* interp = app.add_subcommand("interpret", "Turn detections into a digital audiogram");
  std::string int_in, int_out, projection = "orthogonal";
  double min_score = 0.5;
  interp->add_option("--detections", int_in)->required();
  interp->add_option("--out", int_out)->required();
  interp->add_option("--projection", projection)->check(CLI::IsMember({"orthogonal", "oblique"}))->capture_default_str();
  interp->add_option("--min-score", min_score)->capture_default_str();

  // run
  auto* run = app.add_subcommand("run", "End-to-end over a manifest");
  std::string manifest_path, run_out, run_rect = "lines", run_det = "simulate", pred_dir;
  NoiseFlags run_noise;
  run->add_option("--manifest", manifest_path)->required();
  run->add_option("--rectify", run_rect)->check(CLI::IsMember({"lines", "quad", "none"}))->capture_default_str();
  run->add_option("--detect", run_det)->check(CLI::IsMember({"template", "simulate"}))->capture_default_str();
  run->add_option("--projection", projection)->check(CLI::IsMember({"orthogonal", "oblique"}))->capture_default_str();
  run->add_option("--pred-dir", pred_dir, "Also write per-image interpretations here");
  run_noise.add(run);
  run->add_option("--out", run_out)->required();

  // evaluate
  auto* evl = app.add_subcommand("evaluate", "Score predictions against ground truth");
  std::string pred_path, gt_path, eval_out;
  evl->add_option("--pred", pred_path, "Directory of interpretation JSON files")->required();
  evl->add_option("--gt", gt_path, "Directory of annotation JSON files with matching names")->required();
  evl->add_option("--out", eval_out)->required();

  // overlay
  auto* ovl = app.add_subcommand("overlay", "Draw detections and fitted axes");
  std::string ov_img, ov_det, ov_int, ov_out;
  ovl->add_option("--image", ov_img)->required();
  ovl->add_option("--detections", ov_det)->required();
  ovl->add_option("--interpretation", ov_int)->required();
  ovl->add_option("--out", ov_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) {
      const auto style = load_style(style_path);
      const auto path = synth::generate_dataset(count, GridSpec::standard(), style, ranges, seed, gen_out);
      std::cout << path.string() << '\n';
    } else if (*rect) {
      const GrayImage img = read_png(rect_in);
      const auto style = load_style(style_path);
      Homography h;
      int w = img.width(), hgt = img.height();
      if (rect_method == "lines") {
        detect::GramCrop crop{img, 0, 0};
        if (!annotation_path.empty()) crop = detect::crop_gram(img, load_annotation(annotation_path).level2);
        rectify::LineRectificationParams p;
        p.seed = seed;
        p.hough.seed = derive_seed(seed, 3);
        const auto lr = rectify::estimate_rectification_detailed(crop.image, p);
        const Homography scaled =
            rectify::grid_scale_fit(lr, style.octave_spacing, style.tick_spacing) * lr.homography *
            crop.to_crop_transform();
        const Box crop_box{double(crop.offset_x), double(crop.offset_y),
                           double(crop.offset_x + crop.image.width() - 1),
                           double(crop.offset_y + crop.image.height() - 1)};
        const auto frame = pipeline::detail::align_to_lattice(
            pipeline::detail::fit_canvas(scaled, crop_box, 16, 4 * std::max(img.width(), img.height())), lr,
            crop.to_crop_transform());
        h = frame.to_frame;
        w = frame.width;
        hgt = frame.height;
        if (!debug_dir.empty()) {
          write_outputs_dir(debug_dir);
          write_png(fs::path(debug_dir) / "binary.png", imgproc::binarize(crop.image, p.binarize));
          Json segs = Json::array();
          for (const auto& s : lr.segments) segs.push_back({s.p1.x, s.p1.y, s.p2.x, s.p2.y});
          json_io::write_file(fs::path(debug_dir) / "segments.json",
                              {{"segments", segs},
                               {"x_inliers", lr.x_model.inliers},
                               {"y_inliers", lr.y_model.inliers},
                               {"support", lr.support}});
        }
      } else {
        if (polygon_path.empty()) throw ParameterError("--polygon is required for the quad method");
        const Json pj = json_io::read_file(polygon_path);
        const auto poly = json_io::points(pj.is_object() && pj.contains("level3") ? pj["level3"] : pj, "polygon");
        const auto quad = rectify::approx_quadrilateral(poly);
        if (!quad.convex) std::cerr << "warning: approximated quadrilateral is not convex\n";
        h = rectify::rectify_quad_to_box(quad, synth::ChartLayout(style, GridSpec::standard()).chart_box());
        w = style.width;
        hgt = style.height;
      }
      write_png(rect_out, warp_image(img, h, w, hgt));
      if (!homography_out.empty()) json_io::write_file(homography_out, json_io::homography(h));
    } else if (*det) {
      std::vector<Detection> ds;
      if (det_method == "file") {
        if (det_file.empty()) throw ParameterError("--detections is required for the file method");
        ds = detect::load_detections(det_file);
      } else if (det_method == "simulate") {
        if (annotation_path.empty()) throw ParameterError("--annotation is required for the simulate method");
        auto noise = det_noise.noise;
        noise.seed = seed;
        ds = detect::simulate_detections(load_annotation(annotation_path).level4, noise);
      } else {
        const GrayImage img = read_png(det_in);
        ds = detect::template_detect(img, detect::make_templates(load_style(style_path)));
      }
      save_detections(det_out, ds);
    } else if (*interp) {
      const auto ds = detect::load_detections(int_in);
      interpret::InterpretConfig cfg;
      cfg.projection = interpret::projection_from_string(projection);
      cfg.min_score = min_score;
      cfg.seed = seed;
      json_io::write_file(int_out, interpret::to_json(interpret::interpret(ds, GridSpec::standard(), cfg)));
    } else if (*run) {
      const auto manifest = synth::load_manifest(manifest_path);
      pipeline::PipelineConfig cfg;
      cfg.rectify = pipeline::rectify_method_from_string(run_rect);
      cfg.detect = pipeline::detect_method_from_string(run_det);
      cfg.noise = run_noise.noise;
      cfg.interpret.projection = interpret::projection_from_string(projection);
      cfg.style = manifest.style;
      cfg.seed = seed;
      const bool keep = !pred_dir.empty();
      const auto result = pipeline::run_dataset(manifest, cfg, keep);
      if (keep) {
        write_outputs_dir(pred_dir);
        for (std::size_t i = 0; i < result.images.size(); ++i) {
          const auto& im = result.images[i];
          const auto stem = manifest.entries[i].image.stem().string();
          Json j = im.interpretation ? interpret::to_json(*im.interpretation)
                                     : Json{{"marks", Json::array()}, {"error", im.error.value_or("")}};
          json_io::write_file(fs::path(pred_dir) / (stem + ".json"), j);
          save_detections(fs::path(pred_dir) / (stem + ".detections.json"), im.detections);
        }
      }
      json_io::write_file(run_out, eval::to_json(result.report));
      const auto& r = result.report;
      std::cout << "recall " << (r.exact.recall ? std::to_string(*r.exact.recall) : "n/a") << " precision "
                << (r.exact.precision ? std::to_string(*r.exact.precision) : "n/a") << " failures "
                << r.failures << '\n';
    } else if (*evl) {
      std::vector<eval::ImageReport> reports;
      std::map<std::string, fs::path> preds;
      for (const auto& e : fs::directory_iterator(pred_path)) {
        const auto name = e.path().filename().string();
        if (e.path().extension() == ".json" && name.find(".detections.") == std::string::npos)
          preds[e.path().stem().string()] = e.path();
      }
      for (const auto& e : fs::directory_iterator(gt_path)) {
        if (e.path().extension() != ".json" || e.path().filename() == "manifest.json") continue;
        const auto stem = e.path().stem().string();
        const auto gt = load_annotation(e.path()).level1;
        DigitalAudiogram pred;
        if (auto it = preds.find(stem); it != preds.end()) {
          const Json pj = json_io::read_file(it->second);
          if (!pj.contains("marks")) throw SchemaError(it->second.string() + ": missing 'marks'");
          pred = json_io::audiogram_marks(pj["marks"]);
        }
        reports.push_back({stem, eval::count(eval::match_marks(pred, gt)), {}, {}});
      }
      std::sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
      if (reports.empty()) throw ParameterError("no ground-truth annotations found");
      json_io::write_file(eval_out, eval::to_json(eval::compute_metrics(std::move(reports))));
    } else if (*ovl) {
      const GrayImage img = read_png(ov_img);
      const auto ds = detect::load_detections(ov_det);
      const auto geom = interpret::overlay_geometry(json_io::read_file(ov_int));
      write_png(ov_out, eval::render_overlay(img, ds, geom));
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const StageError& e) {
    std::cerr << "pipeline failure: " << e.what() << '\n';
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
