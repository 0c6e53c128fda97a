// Copyright 2026 The ucowod Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ucowod/cli.hpp"

#include <filesystem>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ucowod/io.hpp"

namespace ucowod {

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  std::string config_path;
};

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig cfg;
  if (!flags.config_path.empty()) cfg = config_from_json(read_json(flags.config_path));
  if (flags.seed) cfg.seed = *flags.seed;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--seed", flags.seed, "Seed for every random draw of this step");
  cmd->add_option("--config", flags.config_path, "JSON file overriding run defaults");
}

int cmd_simulate(const CommonFlags& flags, const std::string& out_dir, std::ostream& out) {
  const RunConfig cfg = resolve_config(flags);
  const Dataset data = generate_dataset(cfg, cfg.seed);
  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "dataset.json", dataset_to_json(data).dump() + "\n");
  GroundTruthFile gt{cfg.known_count, cfg.unknown_slots, data.test_ground_truth()};
  write_text(fs::path(out_dir) / "test_gt.json", ground_truth_to_json(gt).dump(2) + "\n");
  out << "simulate: " << data.train.size() << " train / " << data.test.size() << " test scenes -> "
      << out_dir << "\n";
  return kExitOk;
}

void check_dataset(const Dataset& data, const RunConfig& cfg) {
  if (data.known_count != cfg.known_count || data.feature_dim != cfg.feature_dim()) {
    throw SchemaError("dataset was generated with a different class layout or feature width");
  }
}

int cmd_train(const CommonFlags& flags, const std::string& data_path, const std::string& head_path,
              const std::string& det_path, std::ostream& out) {
  const RunConfig cfg = resolve_config(flags);
  const Dataset data = dataset_from_json(read_json(data_path));
  check_dataset(data, cfg);
  TrainReport report;
  const ToyHead head = train(cfg, data, &report);
  write_text(head_path, head_to_json(head).dump() + "\n");
  if (!det_path.empty()) {
    write_text(det_path, detections_to_jsonl(detect(head, data.test, cfg).detections));
  }
  out << "train: " << report.epoch_loss.size() << " epochs, loss " << report.epoch_loss.front()
      << " -> " << report.epoch_loss.back() << ", " << report.pseudo_label_count << " pseudo labels\n";
  return kExitOk;
}

int cmd_refine(const CommonFlags& flags, const std::string& data_path, const std::string& head_path,
               const std::string& out_path, const std::string& before_path, std::ostream& out) {
  const RunConfig cfg = resolve_config(flags);
  const Dataset data = dataset_from_json(read_json(data_path));
  check_dataset(data, cfg);
  const ToyHead head = head_from_json(read_json(head_path));
  if (head.layout.known_count != cfg.known_count || head.layout.unknown_slots != cfg.unknown_slots) {
    throw SchemaError("head was trained with a different class layout");
  }
  const RefinedDetections refined = refine_pipeline(head, data, cfg);
  write_text(out_path, detections_to_jsonl(refined.after));
  if (!before_path.empty()) write_text(before_path, detections_to_jsonl(refined.before));
  out << "refine: " << refined.clusters << " clusters, KL " << refined.refinement.initial_kl << " -> "
      << refined.refinement.final_kl << " after " << refined.refinement.steps_run << " steps\n";
  return kExitOk;
}

int cmd_eval(const CommonFlags& flags, const std::string& gt_path, const std::string& det_path,
             const std::string& out_path, std::optional<double> iou_thresh,
             std::optional<double> score_thresh, std::ostream& out) {
  RunConfig cfg;
  if (!flags.config_path.empty()) cfg = config_from_json(read_json(flags.config_path));
  const GroundTruthFile gt = read_ground_truth(gt_path);
  const std::vector<Detection> dets = read_detections(det_path, gt.known_count, gt.unknown_slots);
  EvalConfig ec{cfg.iou_threshold, cfg.score_threshold, gt.known_count, gt.unknown_slots};
  if (iou_thresh) ec.iou_threshold = *iou_thresh;
  if (score_thresh) ec.score_threshold = *score_thresh;
  if (!(ec.iou_threshold > 0.0 && ec.iou_threshold <= 1.0)) throw SchemaError("--iou-thresh must lie in (0,1]");
  if (!(ec.score_threshold >= 0.0 && ec.score_threshold <= 1.0)) throw SchemaError("--score-thresh must lie in [0,1]");
  const EvalReport report = evaluate(gt.annotations, dets, ec);
  const std::string text = report_to_string(report, ec);
  if (out_path.empty()) {
    out << text;
  } else {
    write_text(out_path, text);
    out << "eval: uc_map " << report.uc_map << ", uc_recall " << report.uc_recall << " -> " << out_path << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Open-world detection with unknown-class discovery: simulate, train, refine, evaluate"};
  app.require_subcommand(1);

  CommonFlags common;
  std::string out_path, data_path, head_path, det_path, gt_path, before_path;
  std::optional<double> iou_thresh, score_thresh;

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic train/test dataset");
  add_common(simulate, common);
  simulate->add_option("--out", out_path, "Output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "Train the classification head");
  add_common(train_cmd, common);
  train_cmd->add_option("--data", data_path, "dataset.json from simulate")->required();
  train_cmd->add_option("--out", out_path, "Where to write the trained head (JSON)")->required();
  train_cmd->add_option("--det", det_path, "Optional JSONL of test detections before refinement");

  auto* refine_cmd = app.add_subcommand("refine", "Refine unknown-class assignments by clustering");
  add_common(refine_cmd, common);
  refine_cmd->add_option("--data", data_path, "dataset.json from simulate")->required();
  refine_cmd->add_option("--head", head_path, "Head written by train")->required();
  refine_cmd->add_option("--out", out_path, "Refined test detections (JSONL)")->required();
  refine_cmd->add_option("--det", before_path, "Optional JSONL of test detections before refinement");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate detections against ground truth");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--gt", gt_path, "Ground-truth JSON")->required();
  eval_cmd->add_option("--det", det_path, "Detections JSONL")->required();
  eval_cmd->add_option("--out", out_path, "Report JSON (stdout when omitted)");
  eval_cmd->add_option("--iou-thresh", iou_thresh, "IoU threshold for matching (default 0.5)");
  eval_cmd->add_option("--score-thresh", score_thresh, "Minimum detection score (default 0.05)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(common, out_path, out);
    if (*train_cmd) return cmd_train(common, data_path, out_path, det_path, out);
    if (*refine_cmd) return cmd_refine(common, data_path, head_path, out_path, before_path, out);
    if (*eval_cmd) return cmd_eval(common, gt_path, det_path, out_path, iou_thresh, score_thresh, out);
  } catch (const FileError& e) {
    err << "error: " << e.what() << "\n";
    return kExitFile;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailed;
  }
  return kExitUsage;
}

}  // namespace ucowod
