#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "msds/dataset.hpp"
#include "msds/run_config.hpp"
#include "msds/svg.hpp"
#include "msds/tapping.hpp"
#include "msds/trainer.hpp"

namespace fs = std::filesystem;
using namespace msds;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

std::vector<double> parse_thresholds(const std::string& csv) {
  std::vector<double> out;
  std::string cur;
  for (char c : csv + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(std::stod(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (out.empty()) throw std::runtime_error("empty threshold list");
  return out;
}

EvalSplit split_from_string(const std::string& s) {
  if (s == "train") return EvalSplit::train;
  if (s == "val") return EvalSplit::val;
  if (s == "test") return EvalSplit::test;
  if (s == "all") return EvalSplit::all;
  throw std::runtime_error("unknown split '" + s + "' (train|val|test|all)");
}

Tensor4<float> image_to_input(const fs::path& path, int target_h, int target_w) {
  DatasetRecord rec;
  rec.id = path.filename().string();
  rec.image = path.filename().string();
  const ImageU8 img = read_png(path);
  Tensor4<float> full(1, 3, img.height, img.width);
  for (int c = 0; c < 3; ++c) {
    auto plane = full.plane(0, c);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        plane[static_cast<Eigen::Index>(y) * img.width + x] =
            (img.channels == 3 ? img.at(y, x, c) : img.at(y, x, 0)) / 255.0f;
      }
    }
  }
  if (img.height == target_h && img.width == target_w) return full;
  Tensor4<float> resized(1, 3, target_h, target_w);
  for (int c = 0; c < 3; ++c) {
    bilinear_resize_plane(full.plane(0, c).data(), img.height, img.width,
                          resized.plane(0, c).data(), target_h, target_w);
  }
  return resized;
}

ImageU8 attention_to_gray(const Tensor4<float>& a) {
  ImageU8 img;
  img.width = a.width();
  img.height = a.height();
  img.channels = 1;
  img.pixels.resize(static_cast<size_t>(img.width) * img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const float v = std::min(1.0f, std::max(0.0f, a(0, 0, y, x)));
      img.at(y, x, 0) = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
  }
  return img;
}

int cmd_synth(const SynthSpec& spec, const std::string& out) {
  generate_synthetic(spec, out);
  std::cerr << "wrote " << spec.num_images << " images to " << out << "\n";
  return 0;
}

int cmd_validate(const std::string& data_root) {
  const Dataset ds = load_dataset(data_root);
  for (const auto& rec : ds.records) {
    const ImageU8 img = read_png(fs::path(data_root) / rec.image);
    if (img.channels != 3) {
      throw std::runtime_error("record " + rec.id + ": expected RGB image");
    }
    for (size_t k = 0; k < rec.keypoints.points.size(); ++k) {
      const Keypoint& p = rec.keypoints.points[k];
      if (!p.visible) continue;
      if (p.x < 0 || p.x >= img.width || p.y < 0 || p.y >= img.height) {
        throw std::runtime_error("record " + rec.id + ": keypoint " +
                                 std::to_string(k) + " outside image bounds");
      }
    }
  }
  std::cerr << "dataset OK: " << ds.records.size() << " records, "
            << ds.num_keypoints << " keypoints\n";
  return 0;
}

int cmd_train(const RunConfig& rc) {
  if (rc.data_root.empty()) throw std::runtime_error("train: no dataset root (--data or config data.root)");
  if (rc.out_dir.empty()) throw std::runtime_error("train: no output directory (--out or config data.out)");
  const TrainResult result =
      train<float>(rc.train, rc.network, rc.data_root, rc.out_dir, &std::cerr);
  std::cerr << "best val PCK@" << rc.train.val_threshold << " = " << result.best_val_pck
            << " (epoch " << result.best_epoch << ")\n"
            << "checkpoint: " << result.checkpoint_path.string() << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data_root,
             const std::string& thresholds_csv, const std::string& out_csv,
             const std::string& split, std::uint64_t seed, int batch,
             const std::string& curve_svg) {
  const std::vector<double> thresholds = parse_thresholds(thresholds_csv);
  const MetricsReport report = evaluate<float>(ckpt, data_root, thresholds,
                                               split_from_string(split), seed, batch);
  write_text(out_csv, metrics_to_csv(report));
  if (!curve_svg.empty()) {
    write_text(curve_svg, svg_curve_plot(report.thresholds, report.pck,
                                         "Percentage of correct keypoints",
                                         "threshold (px)", "PCK"));
  }
  std::cerr << "wrote " << out_csv << "\n";
  return 0;
}

int cmd_infer(const std::string& ckpt, const std::string& image,
              const std::string& out_csv, const std::string& heatmap_dir) {
  Network<float> net = load_checkpoint<float>(ckpt);
  const Tensor4<float> input =
      image_to_input(image, net.config().input_h, net.config().input_w);
  auto fp = net.forward(input, false);
  const Tensor4<float>& heat = fp.graph.value(fp.final_id);
  const KeypointSet kps = decode_batch_item(heat, 0);
  std::string csv = "keypoint,x,y\n";
  char buf[96];
  for (size_t k = 0; k < kps.points.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%zu,%.6g,%.6g\n", k, kps.points[k].x, kps.points[k].y);
    csv += buf;
  }
  write_text(out_csv, csv);
  if (!heatmap_dir.empty()) {
    fs::create_directories(heatmap_dir);
    for (int c = 0; c < heat.channels(); ++c) {
      Tensor4<float> plane(1, 1, heat.height(), heat.width());
      plane.plane(0, 0) = heat.plane(0, c);
      write_png(fs::path(heatmap_dir) / ("heatmap_k" + std::to_string(c) + ".png"),
                attention_to_gray(plane));
    }
  }
  std::cerr << "wrote " << out_csv << "\n";
  return 0;
}

int cmd_dump_attention(const std::string& ckpt, const std::string& image,
                       const std::string& out_dir) {
  Network<float> net = load_checkpoint<float>(ckpt);
  if (net.config().variant == Variant::no_deep_supervision) {
    throw std::runtime_error(
        "dump-attention: this checkpoint was trained without deep supervision, "
        "so it has no attention maps");
  }
  const Tensor4<float> input =
      image_to_input(image, net.config().input_h, net.config().input_w);
  auto fp = net.forward(input, false);
  fs::create_directories(out_dir);
  int count = 0;
  for (const auto& [key, id] : fp.attention_ids) {
    const auto& [s, m] = key;
    if (!net.config().scale_supervised(s)) continue;
    char name[64];
    std::snprintf(name, sizeof(name), "attn_s%d_m%d.png", s, m);
    write_png(fs::path(out_dir) / name, attention_to_gray(fp.graph.value(id)));
    ++count;
  }
  std::cerr << "wrote " << count << " attention maps to " << out_dir << "\n";
  return 0;
}

int cmd_ablate(const RunConfig& rc, const std::string& thresholds_csv,
               const std::string& out_csv) {
  if (rc.data_root.empty()) throw std::runtime_error("ablate: no dataset root");
  if (rc.out_dir.empty()) throw std::runtime_error("ablate: no output directory");
  const std::vector<double> thresholds = parse_thresholds(thresholds_csv);
  const Variant variants[] = {Variant::full, Variant::upscale_only,
                              Variant::downscale_only, Variant::no_deep_supervision};
  std::string csv = "variant,threshold,pck,mpjpe,correct_count\n";
  for (Variant v : variants) {
    RunConfig run = rc;
    run.network.variant = v;
    const fs::path dir = fs::path(rc.out_dir) / to_string(v);
    std::cerr << "== variant " << to_string(v) << " ==\n";
    const TrainResult result =
        train<float>(run.train, run.network, run.data_root, dir, &std::cerr);
    const MetricsReport report =
        evaluate<float>(result.checkpoint_path, run.data_root, thresholds,
                        EvalSplit::test, run.train.seed, run.train.batch_size);
    char buf[160];
    for (size_t i = 0; i < report.thresholds.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%s,%.6g,%.6g,%.6g,%ld\n",
                    to_string(v).c_str(), report.thresholds[i], report.pck[i],
                    report.mpjpe[i], report.correct_counts[i]);
      csv += buf;
    }
  }
  const fs::path out = out_csv.empty() ? fs::path(rc.out_dir) / "ablation.csv"
                                       : fs::path(out_csv);
  write_text(out, csv);
  std::cerr << "wrote " << out.string() << "\n";
  return 0;
}

int cmd_tap(const std::string& csv_path, double fps, const std::string& method,
            const std::string& out_csv, const std::string& plot_svg) {
  if (method != "peak_count" && method != "spectral") {
    throw std::runtime_error("unknown method '" + method + "' (peak_count|spectral)");
  }
  const Trajectory traj = read_trajectory_csv(csv_path, fps);
  const std::vector<double> signal = distance_signal(traj);
  const TapReport peaks = tapping_frequency(signal, fps, TapMethod::peak_count);
  const TapReport spectral = tapping_frequency(signal, fps, TapMethod::spectral);
  const bool primary_is_peaks = method != "spectral";
  std::vector<TapReport> reports = primary_is_peaks
                                       ? std::vector<TapReport>{peaks, spectral}
                                       : std::vector<TapReport>{spectral, peaks};
  write_text(out_csv, tap_report_csv(reports, fps));
  if (!plot_svg.empty()) {
    write_text(plot_svg,
               svg_signal_plot(signal, peaks.peak_indices,
                               "Fingertip distance with detected taps", "frame",
                               "distance (px)"));
  }
  std::cerr << "frequency " << reports[0].frequency_hz << " Hz, " << peaks.num_taps
            << " taps\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale deeply supervised keypoint detection toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic blob-keypoint dataset");
  SynthSpec spec;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output dataset directory")->required();
  synth->add_option("--n", spec.num_images, "Number of images");
  synth->add_option("--size", spec.image_size, "Image side length in pixels");
  synth->add_option("--k", spec.num_keypoints, "Keypoints (blobs) per image");
  synth->add_option("--seed", spec.rng_seed, "RNG seed");
  synth->add_option("--noise", spec.noise_level, "Noise level in [0,1]");
  synth->add_option("--radius-min", spec.blob_radius_min, "Minimum blob radius");
  synth->add_option("--radius-max", spec.blob_radius_max, "Maximum blob radius");

  // validate
  auto* validate = app.add_subcommand("validate", "Validate a dataset directory");
  std::string val_data;
  validate->add_option("--data", val_data, "Dataset root")->required();

  // shared train-ish options
  const auto add_run_options = [](CLI::App* cmd, std::string& config_path,
                                  std::string& data, std::string& out,
                                  std::string& variant, double& alpha, long long& seed,
                                  int& epochs, int& batch, double& lr) {
    cmd->add_option("--config", config_path, "Run config JSON file");
    cmd->add_option("--data", data, "Dataset root (overrides config)");
    cmd->add_option("--out", out, "Output directory (overrides config)");
    cmd->add_option("--variant", variant,
                    "full|upscale_only|downscale_only|no_ds (overrides config)");
    cmd->add_option("--alpha", alpha, "Deep supervision weight (overrides config)");
    cmd->add_option("--seed", seed, "Seed (overrides config)");
    cmd->add_option("--epochs", epochs, "Epochs (overrides config)");
    cmd->add_option("--batch", batch, "Batch size (overrides config)");
    cmd->add_option("--lr", lr, "Learning rate (overrides config)");
  };
  std::string tr_config, tr_data, tr_out, tr_variant;
  double tr_alpha = -1.0, tr_lr = -1.0;
  long long tr_seed = -1;
  int tr_epochs = -1, tr_batch = -1;
  auto* train_cmd = app.add_subcommand("train", "Train a network");
  add_run_options(train_cmd, tr_config, tr_data, tr_out, tr_variant, tr_alpha,
                  tr_seed, tr_epochs, tr_batch, tr_lr);

  std::string ab_config, ab_data, ab_out, ab_variant, ab_thresholds = "5,10,20", ab_csv;
  double ab_alpha = -1.0, ab_lr = -1.0;
  long long ab_seed = -1;
  int ab_epochs = -1, ab_batch = -1;
  auto* ablate = app.add_subcommand(
      "ablate", "Train and compare full/upscale_only/downscale_only/no_ds variants");
  add_run_options(ablate, ab_config, ab_data, ab_out, ab_variant, ab_alpha,
                  ab_seed, ab_epochs, ab_batch, ab_lr);
  ablate->add_option("--thresholds", ab_thresholds, "PCK thresholds, comma separated");
  ablate->add_option("--report", ab_csv, "Comparison CSV path");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ev_ckpt, ev_data, ev_thresholds = "5,10,20", ev_out, ev_split = "test", ev_svg;
  long long ev_seed = 1;
  int ev_batch = 8;
  eval_cmd->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--data", ev_data, "Dataset root")->required();
  eval_cmd->add_option("--thresholds", ev_thresholds, "Comma-separated pixel thresholds");
  eval_cmd->add_option("--out", ev_out, "Output CSV path")->required();
  eval_cmd->add_option("--split", ev_split, "train|val|test|all (default test)");
  eval_cmd->add_option("--seed", ev_seed, "Split seed (must match training)");
  eval_cmd->add_option("--batch", ev_batch, "Evaluation batch size");
  eval_cmd->add_option("--curve-svg", ev_svg, "Optional PCK curve SVG path");

  // infer
  auto* infer = app.add_subcommand("infer", "Run inference on one image");
  std::string in_ckpt, in_image, in_out, in_hm;
  infer->add_option("--checkpoint", in_ckpt, "Checkpoint file")->required();
  infer->add_option("--image", in_image, "Input PNG image")->required();
  infer->add_option("--out", in_out, "Output keypoint CSV")->required();
  infer->add_option("--heatmap-dir", in_hm, "Optional directory for heatmap PNGs");

  // dump-attention
  auto* dumpa = app.add_subcommand("dump-attention",
                                   "Write per-stage/per-scale attention maps");
  std::string da_ckpt, da_image, da_out;
  dumpa->add_option("--checkpoint", da_ckpt, "Checkpoint file")->required();
  dumpa->add_option("--image", da_image, "Input PNG image")->required();
  dumpa->add_option("--out", da_out, "Output directory")->required();

  // tap
  auto* tap = app.add_subcommand("tap", "Analyze a finger-tapping trajectory CSV");
  std::string tp_csv, tp_method = "peak_count", tp_out, tp_plot;
  double tp_fps = 30.0;
  tap->add_option("--csv", tp_csv, "Trajectory CSV")->required();
  tap->add_option("--fps", tp_fps, "Frames per second");
  tap->add_option("--method", tp_method, "peak_count|spectral");
  tap->add_option("--out", tp_out, "Report CSV path")->required();
  tap->add_option("--plot", tp_plot, "Optional SVG plot path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  const auto build_run_config = [](const std::string& config_path,
                                   const std::string& data, const std::string& out,
                                   const std::string& variant, double alpha,
                                   long long seed, int epochs, int batch,
                                   double lr) {
    RunConfig rc;
    if (!config_path.empty()) rc = load_run_config(config_path);
    if (!data.empty()) rc.data_root = data;
    if (!out.empty()) rc.out_dir = out;
    if (!variant.empty()) rc.network.variant = variant_from_string(variant);
    if (alpha >= 0.0) rc.train.loss_weights.alpha = alpha;
    if (seed >= 0) rc.train.seed = static_cast<std::uint64_t>(seed);
    if (epochs > 0) rc.train.epochs = epochs;
    if (batch > 0) rc.train.batch_size = batch;
    if (lr > 0.0) rc.train.learning_rate = lr;
    rc.network.validate();
    rc.train.validate();
    return rc;
  };

  try {
    if (synth->parsed()) return cmd_synth(spec, synth_out);
    if (validate->parsed()) return cmd_validate(val_data);
    if (train_cmd->parsed()) {
      return cmd_train(build_run_config(tr_config, tr_data, tr_out, tr_variant,
                                        tr_alpha, tr_seed, tr_epochs, tr_batch, tr_lr));
    }
    if (ablate->parsed()) {
      return cmd_ablate(build_run_config(ab_config, ab_data, ab_out, ab_variant,
                                         ab_alpha, ab_seed, ab_epochs, ab_batch, ab_lr),
                        ab_thresholds, ab_csv);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(ev_ckpt, ev_data, ev_thresholds, ev_out, ev_split,
                      static_cast<std::uint64_t>(ev_seed), ev_batch, ev_svg);
    }
    if (infer->parsed()) return cmd_infer(in_ckpt, in_image, in_out, in_hm);
    if (dumpa->parsed()) return cmd_dump_attention(da_ckpt, da_image, da_out);
    if (tap->parsed()) return cmd_tap(tp_csv, tp_fps, tp_method, tp_out, tp_plot);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
