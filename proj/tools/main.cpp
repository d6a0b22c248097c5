// Command-line front end for the face-detector stack: single-image detection,
// dataset evaluation, jitter measurement, anchor dumps, analytic reports, and
// random weight initialization.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "blazedet/blazedet.hpp"

namespace {

std::string fmt(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

blazedet::TiePolicy make_policy(const std::string& mode, float cluster_iou) {
  blazedet::TiePolicy policy;
  policy.mode = mode == "nms" ? blazedet::TieMode::suppression : blazedet::TieMode::blending;
  policy.iou_threshold = cluster_iou;
  return policy;
}

void print_detections(const std::vector<blazedet::Detection>& detections) {
  for (const blazedet::Detection& det : detections) {
    std::string line = fmt(det.score);
    line += " " + fmt(det.box.xmin) + " " + fmt(det.box.ymin) + " " + fmt(det.box.xmax) + " " +
            fmt(det.box.ymax);
    for (const blazedet::Point& kp : det.keypoints) {
      line += " " + fmt(kp.x) + " " + fmt(kp.y);
    }
    std::cout << line << "\n";
  }
}

int run_detect(const std::string& weights_path, const std::string& image_path, float min_score,
               const std::string& mode, float cluster_iou) {
  const blazedet::WeightStore weights = blazedet::load_weights(weights_path);
  blazedet::validate_weights(weights, blazedet::frontal_network_spec());
  blazedet::DetectorConfig config;
  config.min_score = min_score;
  config.tie_policy = make_policy(mode, cluster_iou);
  const blazedet::Tensor image = blazedet::load_image(image_path);
  print_detections(blazedet::detect(image, weights, config));
  return 0;
}

int run_eval(const std::string& weights_path, const std::string& dataset_path,
             float min_face_area, float min_score, const std::string& mode, float cluster_iou,
             bool with_jitter, int threads) {
  blazedet::DetectorConfig config;
  config.min_score = min_score;
  config.tie_policy = make_policy(mode, cluster_iou);
  const blazedet::Detector detector =
      blazedet::make_detector(blazedet::load_weights(weights_path), config);

  blazedet::EvalOptions options;
  options.min_face_area = min_face_area;
  options.compute_jitter = with_jitter;
  options.threads = threads;
  const std::vector<blazedet::DatasetEntry> entries = blazedet::parse_dataset_index(dataset_path);
  const blazedet::EvalReport report = blazedet::evaluate_dataset(detector, entries, options);

  std::cout << "Evaluated " << report.images << " images: " << report.truth_faces
            << " truth faces, " << report.detections << " detections, " << report.matched
            << " matched.\n";
  if (report.empty_truth_convention) {
    std::cout << "Note: dataset has no truth faces; AP value follows the empty-set convention.\n";
  }
  std::cout << "\n";
  std::cout << "average_precision=" << fmt(report.average_precision) << "\n";
  std::cout << "median_regression_error_iod="
            << (report.median_regression_error_iod ? fmt(*report.median_regression_error_iod)
                                                   : std::string("n/a"))
            << "\n";
  if (with_jitter) {
    std::cout << "jitter_iod=" << (report.jitter_iod ? fmt(*report.jitter_iod) : std::string("n/a"))
              << "\n";
    std::cout << "jitter_matched=" << report.jitter_stats.matched << "\n";
    std::cout << "jitter_unmatched=" << report.jitter_stats.unmatched << "\n";
    std::cout << "jitter_images_skipped=" << report.jitter_images_skipped << "\n";
  }
  std::cout << "images=" << report.images << "\n";
  std::cout << "truth_faces=" << report.truth_faces << "\n";
  std::cout << "detections=" << report.detections << "\n";
  std::cout << "matched=" << report.matched << "\n";
  return 0;
}

int run_jitter(const std::string& weights_path, const std::string& image_path) {
  const blazedet::Detector detector = blazedet::make_detector(blazedet::load_weights(weights_path));
  const blazedet::Tensor image = blazedet::load_image(image_path);
  blazedet::JitterStats stats;
  const double value =
      blazedet::jitter_metric(detector, image, blazedet::default_jitter_offsets(), &stats);
  std::cout << "jitter_iod=" << fmt(value) << "\n";
  std::cout << "jitter_matched=" << stats.matched << "\n";
  std::cout << "jitter_unmatched=" << stats.unmatched << "\n";
  return 0;
}

int run_anchors(bool dump) {
  const std::vector<blazedet::Anchor> anchors = blazedet::generate_anchors();
  if (!dump) {
    std::cout << anchors.size() << " anchors (" << blazedet::kMap16AnchorCount << " on 16x16, "
              << blazedet::kMap8AnchorCount << " on 8x8)\n";
    return 0;
  }
  std::cout << "index,grid,row,col,cx,cy,w,h\n";
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const blazedet::Anchor& a = anchors[i];
    std::cout << i << "," << a.grid << "," << a.row << "," << a.col << "," << fmt(a.cx) << ","
              << fmt(a.cy) << "," << fmt(a.w) << "," << fmt(a.h) << "\n";
  }
  return 0;
}

int run_analyze_macs(bool csv) {
  const blazedet::CostReport report = blazedet::network_cost(blazedet::frontal_network_spec());
  if (csv) {
    std::cout << "layer,kind,out_extent,macs\n";
    for (const blazedet::LayerCost& layer : report.layers) {
      std::cout << layer.name << "," << blazedet::to_string(layer.kind) << "," << layer.out_extent
                << "," << layer.macs << "\n";
    }
    return 0;
  }
  std::printf("%-14s %-10s %10s %14s\n", "layer", "kind", "out", "macs");
  for (const blazedet::LayerCost& layer : report.layers) {
    std::printf("%-14s %-10s %7dx%-2d %14lld\n", layer.name.c_str(),
                blazedet::to_string(layer.kind), layer.out_extent, layer.out_extent, layer.macs);
  }
  std::printf("\n");
  std::printf("extractor: %lld multiply-adds over %d dispatches\n", report.extractor_macs,
              report.extractor_dispatch_count);
  std::printf("heads:     %lld multiply-adds\n", report.head_macs);
  std::printf("total:     %lld multiply-adds over %d dispatches\n", report.total_macs,
              report.dispatch_count);
  return 0;
}

int run_analyze_rf(bool csv) {
  const blazedet::NetworkSpec spec = blazedet::frontal_network_spec();
  const blazedet::RFReport report = blazedet::receptive_field(spec);
  const blazedet::RFReport narrow = blazedet::receptive_field(blazedet::with_dw_kernel(spec, 3));
  if (csv) {
    std::cout << "layer,kernel,stride,out_extent,rf,jump\n";
    for (const blazedet::RFStep& step : report.steps) {
      std::cout << step.name << "," << step.kernel << "," << step.stride << "," << step.out_extent
                << "," << step.rf << "," << step.jump << "\n";
    }
    return 0;
  }
  std::printf("%-14s %6s %6s %6s %8s %6s\n", "layer", "kernel", "stride", "out", "rf", "jump");
  for (const blazedet::RFStep& step : report.steps) {
    std::printf("%-14s %6d %6d %6d %8lld %6lld\n", step.name.c_str(), step.kernel, step.stride,
                step.out_extent, step.rf, step.jump);
  }
  std::printf("\n");
  std::printf("receptive field at 16x16 map: %lld px\n", report.rf_map16);
  std::printf("receptive field at 8x8 map:   %lld px\n", report.rf_map8);
  std::printf("with 3x3 depthwise kernels the final receptive field drops to %lld px\n",
              narrow.rf_map8);
  return 0;
}

int run_analyze_timing(bool csv, int iterations, int threads) {
  blazedet::set_num_threads(threads);
  const blazedet::NetworkSpec spec = blazedet::frontal_network_spec();
  const blazedet::WeightStore weights = blazedet::init_random_weights(spec, 1);
  std::mt19937 rng(7);
  blazedet::Tensor input(1, spec.input_extent, spec.input_extent, spec.input_channels);
  for (float& v : input.data()) v = blazedet::uniform_in(rng, -1.0f, 1.0f);
  const blazedet::TimingReport report = blazedet::time_layers(spec, weights, input, iterations);
  if (csv) {
    std::cout << "layer,median_ms,min_ms\n";
    for (const blazedet::LayerTiming& layer : report.layers) {
      std::cout << layer.name << "," << fmt(layer.median_ms) << "," << fmt(layer.min_ms) << "\n";
    }
    std::cout << "network," << fmt(report.network_median_ms) << "," << fmt(report.network_min_ms)
              << "\n";
    return 0;
  }
  std::printf("%-14s %12s %12s\n", "layer", "median_ms", "min_ms");
  for (const blazedet::LayerTiming& layer : report.layers) {
    std::printf("%-14s %12.4f %12.4f\n", layer.name.c_str(), layer.median_ms, layer.min_ms);
  }
  std::printf("\n");
  std::printf("sum of layer medians: %.4f ms\n", report.layer_median_sum_ms);
  std::printf("whole network median: %.4f ms (min %.4f ms, %d iterations, %d thread%s)\n",
              report.network_median_ms, report.network_min_ms, report.iterations, threads,
              threads == 1 ? "" : "s");
  return 0;
}

int run_init_weights(unsigned seed, const std::string& out_path) {
  const blazedet::WeightStore store =
      blazedet::init_random_weights(blazedet::frontal_network_spec(), seed);
  blazedet::save_weights(store, out_path);
  std::cout << "wrote " << store.size() << " tensors to " << out_path << " (seed " << seed
            << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"single-shot face detector: detection, evaluation, and analysis"};
  app.require_subcommand(1);

  std::string weights_path, image_path, dataset_path, out_path;
  std::string tie_resolution = "blend";
  std::string report_kind;
  float min_score = 0.5f;
  float cluster_iou = 0.3f;
  float min_face_area = 0.0f;
  bool with_jitter = false;
  bool dump = false;
  bool csv = false;
  int threads = 1;
  int iterations = 5;
  unsigned seed = 0;

  CLI::App* cmd_detect = app.add_subcommand("detect", "detect faces in one image");
  cmd_detect->add_option("--weights", weights_path, "weight file")->required();
  cmd_detect->add_option("--image", image_path, "P6 PPM image")->required();
  cmd_detect->add_option("--min-score", min_score, "score threshold");
  cmd_detect->add_option("--tie-resolution", tie_resolution, "blend|nms")
      ->check(CLI::IsMember({"blend", "nms"}));
  cmd_detect->add_option("--cluster-iou", cluster_iou, "tie-resolution IoU threshold");

  CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate on a dataset index");
  cmd_eval->add_option("--weights", weights_path, "weight file")->required();
  cmd_eval->add_option("--dataset", dataset_path, "dataset index file")->required();
  cmd_eval->add_option("--min-face-area", min_face_area, "ignore truth faces smaller than this");
  cmd_eval->add_option("--min-score", min_score, "score threshold");
  cmd_eval->add_option("--tie-resolution", tie_resolution, "blend|nms")
      ->check(CLI::IsMember({"blend", "nms"}));
  cmd_eval->add_option("--cluster-iou", cluster_iou, "tie-resolution IoU threshold");
  cmd_eval->add_flag("--jitter", with_jitter, "also compute the translation-jitter metric");
  cmd_eval->add_option("--threads", threads, "images processed in parallel");

  CLI::App* cmd_jitter = app.add_subcommand("jitter", "translation-jitter metric for one image");
  cmd_jitter->add_option("--weights", weights_path, "weight file")->required();
  cmd_jitter->add_option("--image", image_path, "P6 PPM image")->required();

  CLI::App* cmd_anchors = app.add_subcommand("anchors", "anchor layout");
  cmd_anchors->add_flag("--dump", dump, "emit all anchors as CSV");

  CLI::App* cmd_analyze = app.add_subcommand("analyze", "analytic model reports");
  cmd_analyze->add_option("--report", report_kind, "macs|rf|timing")
      ->required()
      ->check(CLI::IsMember({"macs", "rf", "timing"}));
  cmd_analyze->add_flag("--csv", csv, "emit CSV instead of aligned text");
  cmd_analyze->add_option("--iterations", iterations, "timing iterations")
      ->check(CLI::PositiveNumber);
  cmd_analyze->add_option("--threads", threads, "tensor worker threads for timing");

  CLI::App* cmd_init = app.add_subcommand("init-weights", "write seeded random weights");
  cmd_init->add_option("--seed", seed, "generator seed")->required();
  cmd_init->add_option("--out", out_path, "output weight file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(cmd_detect)) {
      return run_detect(weights_path, image_path, min_score, tie_resolution, cluster_iou);
    }
    if (app.got_subcommand(cmd_eval)) {
      return run_eval(weights_path, dataset_path, min_face_area, min_score, tie_resolution,
                      cluster_iou, with_jitter, threads);
    }
    if (app.got_subcommand(cmd_jitter)) {
      return run_jitter(weights_path, image_path);
    }
    if (app.got_subcommand(cmd_anchors)) {
      return run_anchors(dump);
    }
    if (app.got_subcommand(cmd_analyze)) {
      if (report_kind == "macs") return run_analyze_macs(csv);
      if (report_kind == "rf") return run_analyze_rf(csv);
      return run_analyze_timing(csv, iterations, threads);
    }
    if (app.got_subcommand(cmd_init)) {
      return run_init_weights(seed, out_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
