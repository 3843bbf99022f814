// Renders one photographed-looking audiogram, recovers it with line-based
// rectification and template matching, and prints both versions.
#include <iostream>

#include "audiogram/audiogram.hpp"

using namespace audiogram;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 11;
  synth::DistortionRanges ranges;
  ranges.angle_min = 20;
  ranges.angle_max = 35;
  const synth::RenderStyle style;
  const auto sample = synth::make_sample(seed, 0, GridSpec::standard(), style, ranges);
  write_png("sample_input.png", sample.image);

  pipeline::PipelineConfig cfg;
  cfg.rectify = pipeline::RectifyMethod::lines;
  cfg.detect = pipeline::DetectMethod::template_match;
  cfg.style = style;
  const auto templates = detect::make_templates(style);
  const auto out = pipeline::run_image(sample.image, sample.annotation, cfg, seed, templates);
  if (out.error) {
    std::cerr << "failed: " << *out.error << '\n';
    return 3;
  }
  for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';

  std::cout << "truth:     " << json_io::audiogram_tuples(sample.annotation.level1).dump() << '\n';
  std::cout << "recovered: " << json_io::audiogram_tuples(out.prediction).dump() << '\n';
  const auto c = eval::count(eval::match_marks(out.prediction, sample.annotation.level1));
  std::cout << c.exact << " of " << c.gt << " marks exact\n";

  const GrayImage rect = warp_image(sample.image, out.frame.to_frame, out.frame.width, out.frame.height);
  write_png("sample_overlay.png", eval::render_overlay(rect, out.detections, eval::overlay_geometry(*out.interpretation)));
  return 0;
}
