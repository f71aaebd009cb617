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

#include <memory>

#include "common.hpp"
#include "dmrseg/distmap.hpp"
#include "dmrseg/error.hpp"
#include "dmrseg/kv.hpp"
#include "dmrseg/nifti.hpp"

namespace dmrseg::tools {
namespace {

struct DistmapArgs {
  std::string labels;
  std::string out;
  std::string to_labels;
  int cls = 1;
  double threshold = distmap::kDefaultThreshold;
  int num_classes = 4;
};

void run_distmap(const DistmapArgs& a) {
  if (a.num_classes < 2) throw LabelError("--num-classes must be at least 2");
  if (a.cls < 1 || a.cls >= a.num_classes) {
    throw LabelError("--class " + std::to_string(a.cls) + " is not a foreground class in [1, " +
                     std::to_string(a.num_classes - 1) + "]");
  }
  if (!(a.threshold > 0)) throw UsageError("--T must be positive");
  const LabelVolume labels = io::read_nifti_labels(a.labels, a.num_classes);

  Volume dm(labels.dims, labels.spacing);
  dm.origin = labels.origin;
  LabelVolume decoded(labels.dims, labels.spacing, labels.num_classes);
  decoded.origin = labels.origin;
  for (int z = 0; z < labels.nz(); ++z) {
    const LabelSlice s = labels.slice(z);
    dm.set_slice(z, distmap::signed_truncated_dm(s, a.cls, a.threshold, a.num_classes));
    if (!a.to_labels.empty()) {
      decoded.set_slice(z, distmap::segmentation_from_dm(distmap::dm_stack(s, a.num_classes, a.threshold)));
    }
  }
  make_parent(a.out);
  io::write_nifti(dm, a.out);
  if (!a.to_labels.empty()) {
    make_parent(a.to_labels);
    io::write_nifti(decoded, a.to_labels);
  }
  std::vector<std::pair<std::string, std::string>> resolved{
      {"labels", absolute(a.labels)},
      {"class", std::to_string(a.cls)},
      {"T", kv::format_double(a.threshold)},
      {"num_classes", std::to_string(a.num_classes)},
      {"out", absolute(a.out)}};
  if (!a.to_labels.empty()) resolved.emplace_back("to_labels", absolute(a.to_labels));
  write_text(a.out + ".resolved", kv_text(resolved));
}

}  // namespace

void add_distmap(CLI::App& app) {
  auto args = std::make_shared<DistmapArgs>();
  auto* sub = app.add_subcommand("distmap", "Write the truncated signed distance map of one class");
  sub->add_option("--labels", args->labels, "Label NIfTI volume")->required();
  sub->add_option("--class", args->cls, "Foreground class id")->required();
  sub->add_option("--T", args->threshold, "Truncation distance in pixels");
  sub->add_option("--num-classes", args->num_classes, "Label range, background included");
  sub->add_option("--out", args->out, "Output float32 NIfTI")->required();
  sub->add_option("--to-labels", args->to_labels,
                  "Also decode the per-class maps of every class back to labels");
  sub->callback([args] { run_distmap(*args); });
}

}  // namespace dmrseg::tools
