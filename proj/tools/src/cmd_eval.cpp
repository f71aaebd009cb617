// Copyright 2026 The dmrseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>

#include "common.hpp"
#include "dmrseg/checkpoint.hpp"
#include "dmrseg/config.hpp"
#include "dmrseg/error.hpp"
#include "dmrseg/evaluation.hpp"
#include "dmrseg/folds.hpp"
#include "dmrseg/kv.hpp"
#include "dmrseg/metrics.hpp"
#include "dmrseg/networks.hpp"
#include "dmrseg/nifti.hpp"
#include "dmrseg/preprocess.hpp"

namespace dmrseg::tools {
namespace {

// Grid the model was trained on. A run's config.resolved carries it; flags
// given explicitly win over the file.
struct GridArgs {
  std::string config;
  std::optional<int> height;
  std::optional<int> width;
  std::optional<double> spacing;
  int batch = 8;

  void add(CLI::App* sub) {
    sub->add_option("--config", config, "Resolved run config; supplies height, width, spacing")
        ->check(CLI::ExistingFile);
    sub->add_option("--height", height, "Network input height");
    sub->add_option("--width", width, "Network input width");
    sub->add_option("--spacing", spacing, "In-plane target spacing in mm");
    sub->add_option("--batch", batch, "Inference batch size");
  }

  prep::PreprocessConfig resolve() const {
    prep::PreprocessConfig p;
    if (!config.empty()) p = cfg::load(config).prep;
    if (height) p.height = *height;
    if (width) p.width = *width;
    if (spacing) p.spacing = *spacing;
    if (p.height < 1 || p.width < 1 || !(p.spacing > 0)) {
      throw UsageError("input grid needs positive height, width and spacing");
    }
    if (batch < 1) throw UsageError("--batch must be positive");
    return p;
  }
};

std::vector<std::pair<std::string, std::string>> grid_entries(const prep::PreprocessConfig& p,
                                                              int batch) {
  return {{"height", std::to_string(p.height)},
          {"width", std::to_string(p.width)},
          {"spacing", kv::format_double(p.spacing)},
          {"batch", std::to_string(batch)}};
}

nets::ModelParams<float> load_model(const std::string& path) {
  auto ck = ckpt::load<float>(path);
  if (ck.params.spec.in_channels != 1) {
    throw UsageError("checkpoint expects " + std::to_string(ck.params.spec.in_channels) +
                     " input channels; volumes carry one");
  }
  return std::move(ck.params);
}

LabelVolume infer(nets::ModelParams<float>& model, const Volume& image, int batch,
                  bool postprocess) {
  LabelVolume pred = nets::predict_labels(model, image, batch);
  return postprocess ? metrics::largest_cc_3d(pred) : pred;
}

struct EvalArgs {
  std::string model;
  std::string pred;
  std::string data;
  std::string out;
  std::string clinical;
  bool regional = false;
  bool postprocess = false;
  int num_classes = 4;  // label range in --pred mode
  GridArgs grid;
};

void run_eval(const EvalArgs& a) {
  if (a.model.empty() == a.pred.empty()) throw UsageError("eval needs exactly one of --model or --pred");
  const auto refs_manifest = io::read_manifest(a.data);
  if (refs_manifest.empty()) throw UsageError("manifest '" + a.data + "' lists no cases");
  eval::EvalOptions opt;
  opt.regional = a.regional;
  opt.postprocess = a.postprocess;
  const std::string clinical_path =
      a.clinical.empty() ? (std::filesystem::path(a.out).replace_extension("").string() + "_clinical.csv")
                         : a.clinical;

  std::vector<std::string> ids;
  std::vector<LabelVolume> preds, refs;
  std::vector<std::pair<std::string, std::string>> resolved{{"data", absolute(a.data)}};
  if (!a.model.empty()) {
    const auto grid = a.grid.resolve();
    auto model = load_model(a.model);
    const int nc = model.spec.num_classes;
    for (const auto& e : refs_manifest) {
      const auto [image, labels] = prep::preprocess_case(io::read_nifti(e.image_path),
                                                         io::read_nifti_labels(e.label_path, nc), grid);
      ids.push_back(e.case_id);
      preds.push_back(infer(model, image, a.grid.batch, false));
      refs.push_back(labels);
    }
    resolved.emplace_back("model", absolute(a.model));
    for (auto& kv : grid_entries(grid, a.grid.batch)) resolved.push_back(kv);
  } else {
    // Prediction label maps given as a second manifest, matched by case id.
    const auto pred_manifest = io::read_manifest(a.pred);
    std::map<std::string, std::string> by_id;
    for (const auto& e : pred_manifest) by_id[e.case_id] = e.label_path;
    for (const auto& e : refs_manifest) {
      const auto it = by_id.find(e.case_id);
      if (it == by_id.end()) throw UsageError("no prediction for case " + e.case_id);
      LabelVolume ref = io::read_nifti_labels(e.label_path, a.num_classes);
      LabelVolume pred = io::read_nifti_labels(it->second, ref.num_classes);
      ids.push_back(e.case_id);
      preds.push_back(std::move(pred));
      refs.push_back(std::move(ref));
    }
    resolved.emplace_back("pred", absolute(a.pred));
  }
  const auto reports = eval::evaluate_all(ids, preds, refs, opt, worker_threads());
  make_parent(a.out);
  make_parent(clinical_path);
  write_text(a.out, eval::report_csv(reports, opt.regional));
  const auto rows = eval::clinical_rows(reports, opt);
  write_text(clinical_path, eval::clinical_csv(rows, eval::agreement(rows)));
  resolved.emplace_back("regional", opt.regional ? "true" : "false");
  resolved.emplace_back("postprocess", opt.postprocess ? "true" : "false");
  resolved.emplace_back("out", absolute(a.out));
  resolved.emplace_back("clinical", absolute(clinical_path));
  write_text(a.out + ".resolved", kv_text(resolved));
  std::cerr << "eval: " << reports.size() << " volumes -> " << a.out << "\n";
}

struct PredictArgs {
  std::string model;
  std::string image;
  std::string out;
  bool postprocess = false;
  GridArgs grid;
};

void run_predict(const PredictArgs& a) {
  const auto grid = a.grid.resolve();
  auto model = load_model(a.model);
  const Volume image = prep::preprocess_image(io::read_nifti(a.image), grid);
  make_parent(a.out);
  io::write_nifti(infer(model, image, a.grid.batch, a.postprocess), a.out);
  auto resolved = grid_entries(grid, a.grid.batch);
  resolved.insert(resolved.begin(), {{"model", absolute(a.model)}, {"image", absolute(a.image)}});
  resolved.emplace_back("postprocess", a.postprocess ? "true" : "false");
  resolved.emplace_back("out", absolute(a.out));
  write_text(a.out + ".resolved", kv_text(resolved));
}

}  // namespace

void add_eval(CLI::App& app) {
  auto args = std::make_shared<EvalArgs>();
  auto* sub = app.add_subcommand("eval", "Score a model (or stored predictions) against reference labels");
  sub->add_option("--model", args->model, "Checkpoint to run inference with");
  sub->add_option("--pred", args->pred, "Manifest of predicted label maps, instead of --model");
  sub->add_option("--data", args->data, "Reference manifest")->required();
  sub->add_option("--out", args->out, "Per-volume report CSV")->required();
  sub->add_option("--clinical", args->clinical, "Clinical index CSV (default <out>_clinical.csv)");
  sub->add_option("--num-classes", args->num_classes, "Label range with --pred");
  sub->add_flag("--regional", args->regional, "Add apical / mid / basal Dice columns");
  sub->add_flag("--postprocess", args->postprocess, "Keep the largest 3D component per class");
  args->grid.add(sub);
  sub->callback([args] { run_eval(*args); });
}

void add_predict(CLI::App& app) {
  auto args = std::make_shared<PredictArgs>();
  auto* sub = app.add_subcommand("predict", "Segment one volume with a checkpoint");
  sub->add_option("--model", args->model, "Checkpoint")->required();
  sub->add_option("--image", args->image, "Input NIfTI volume")->required();
  sub->add_option("--out", args->out, "Output label NIfTI, on the preprocessed grid")->required();
  sub->add_flag("--postprocess", args->postprocess, "Keep the largest 3D component per class");
  args->grid.add(sub);
  sub->callback([args] { run_predict(*args); });
}

}  // namespace dmrseg::tools
