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
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "common.hpp"
#include "dmrseg/checkpoint.hpp"
#include "dmrseg/config.hpp"
#include "dmrseg/error.hpp"
#include "dmrseg/folds.hpp"
#include "dmrseg/nifti.hpp"
#include "dmrseg/preprocess.hpp"
#include "dmrseg/trainer.hpp"

namespace dmrseg::tools {
namespace {

struct TrainArgs {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::string> arch;
  bool dmr = false;
  std::optional<std::string> weighting;
  std::optional<int> fold;
  std::optional<std::string> out;
};

// Relative paths inside a config file mean "next to the config file".
std::string relative_to(const std::string& p, const std::filesystem::path& dir) {
  if (p.empty() || std::filesystem::path(p).is_absolute()) return p;
  return absolute((dir / p).string());
}

cfg::RunConfig build_config(const TrainArgs& a) {
  cfg::RunConfig rc;
  if (!a.config.empty()) {
    rc = cfg::load(a.config);
    const auto dir = std::filesystem::path(absolute(a.config)).parent_path();
    rc.data = relative_to(rc.data, dir);
    rc.folds = relative_to(rc.folds, dir);
    rc.out = relative_to(rc.out, dir);
  }
  for (const auto& s : a.sets) cfg::apply_override(rc, s);
  if (a.arch) cfg::apply_override(rc, "arch=" + *a.arch);
  if (a.dmr) cfg::apply_override(rc, "dmr=true");
  if (a.weighting) cfg::apply_override(rc, "weighting=" + *a.weighting);
  if (a.fold) rc.fold = *a.fold;
  if (a.out) rc.out = *a.out;
  rc.data = absolute(rc.data);
  rc.folds = absolute(rc.folds);
  rc.out = absolute(rc.out);
  cfg::resolve(rc);
  return rc;
}

std::vector<train::Case> load_cases(const std::vector<io::ManifestEntry>& entries,
                                    const std::vector<std::size_t>& pick,
                                    const cfg::RunConfig& rc) {
  std::vector<train::Case> out;
  out.reserve(pick.size());
  for (std::size_t i : pick) {
    const auto& e = entries[i];
    const Volume image = io::read_nifti(e.image_path);
    const LabelVolume labels = io::read_nifti_labels(e.label_path, rc.train.arch.num_classes);
    auto [img, lab] = prep::preprocess_case(image, labels, rc.prep);
    out.push_back({e.case_id, std::move(img), std::move(lab)});
  }
  return out;
}

std::vector<io::ManifestEntry> subset(const std::vector<io::ManifestEntry>& entries,
                                      const std::vector<std::size_t>& pick) {
  std::vector<io::ManifestEntry> out;
  for (std::size_t i : pick) {
    auto e = entries[i];
    e.image_path = absolute(e.image_path);
    e.label_path = absolute(e.label_path);
    out.push_back(std::move(e));
  }
  return out;
}

void run_train(const TrainArgs& a) {
  const cfg::RunConfig rc = build_config(a);
  if (rc.data.empty()) throw UsageError("no dataset: set `data` in the config or pass --set data=...");
  make_dirs(rc.out);
  // Written first so even a failed run leaves a reproducible record.
  write_text(rc.out + "/config.resolved", cfg::resolved_text(rc));

  const auto entries = io::read_manifest(rc.data);
  if (entries.empty()) throw UsageError("manifest '" + rc.data + "' lists no cases");
  std::vector<io::FoldCase> cases;
  for (const auto& e : entries) cases.push_back({e.case_id, e.tag});

  std::vector<int> folds;
  if (rc.folds.empty()) {
    folds = io::split_folds(cases, rc.num_folds, rc.train.seed);
  } else {
    const auto table = io::read_folds(rc.folds);
    for (const auto& c : cases) {
      const auto it = table.find(c.id);
      if (it == table.end()) throw ParseError("fold file '" + rc.folds + "' has no entry for " + c.id);
      folds.push_back(it->second);
    }
  }
  if (rc.fold < 0 || rc.fold >= rc.num_folds) {
    throw UsageError("fold " + std::to_string(rc.fold) + " outside [0, " + std::to_string(rc.num_folds) + ")");
  }
  write_text(rc.out + "/folds.csv", io::format_folds(cases, folds));
  const io::FoldSplit split = io::fold_split(cases, folds, rc.fold, rc.train.seed);
  io::write_manifest(rc.out + "/train_manifest.csv", subset(entries, split.train));
  io::write_manifest(rc.out + "/val_manifest.csv", subset(entries, split.val));
  io::write_manifest(rc.out + "/test_manifest.csv", subset(entries, split.test));

  const auto train_set = load_cases(entries, split.train, rc);
  const auto val_set = load_cases(entries, split.val, rc);
  std::cerr << "train: " << train_set.size() << " train / " << val_set.size() << " val / "
            << split.test.size() << " test volumes, " << rc.train.epochs << " epochs\n";

  const std::string log_path = rc.out + "/train_log.csv";
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw IoError("cannot open '" + log_path + "' for writing");
  log << train::log_header(rc.train.arch.num_classes) << "\n" << std::flush;
  train::TrainHooks hooks;
  hooks.on_epoch = [&](const train::EpochLog& row) {
    log << train::log_row(row) << "\n" << std::flush;
    std::cerr << "epoch " << row.epoch << " train_ce " << row.train_ce << " val_dice "
              << row.val_dice_mean << (row.saved ? " *" : "") << "\n";
  };
  const auto result = train::train(rc.train, train_set, val_set, cfg::config_hash(rc), hooks);
  if (!log) throw IoError("write failed for '" + log_path + "'");

  ckpt::save(rc.out + "/model.ckpt", result.best);
  ckpt::save(rc.out + "/model_last.ckpt", result.last);
  ckpt::save(rc.out + "/model_final.ckpt", ckpt::finalize(result.best));
  std::cerr << "train: best epoch " << result.best.meta.epoch << " val_dice " << result.best.meta.val_dice
            << ", outputs in " << rc.out << "\n";
}

}  // namespace

void add_train(CLI::App& app) {
  auto args = std::make_shared<TrainArgs>();
  auto* sub = app.add_subcommand("train", "Train a segmentation model on one fold of a manifest");
  sub->add_option("--config", args->config, "Run config (key = value)")->check(CLI::ExistingFile);
  sub->add_option("--set", args->sets, "Config override key=value; repeatable");
  sub->add_option("--arch", args->arch, "segnet | usegnet | unet");
  sub->add_flag("--dmr", args->dmr, "Attach the distance-map regularizer");
  sub->add_option("--weighting", args->weighting, "learned | fixed");
  sub->add_option("--fold", args->fold, "Test fold index");
  sub->add_option("--out", args->out, "Output directory");
  sub->callback([args] { run_train(*args); });
}

}  // namespace dmrseg::tools
