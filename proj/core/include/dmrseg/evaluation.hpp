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

#ifndef DMRSEG_EVALUATION_HPP
#define DMRSEG_EVALUATION_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dmrseg/metrics.hpp"
#include "dmrseg/volume.hpp"

namespace dmrseg::eval {

struct EvalOptions {
  bool regional = false;
  bool postprocess = false;  // largest_cc_3d on the prediction first
  int lv_class = 3;
  int myo_class = 2;
};

struct ClassMetrics {
  int cls = 0;
  double dice = 0;
  double jaccard = 0;
  std::optional<double> msd_mm;
  std::optional<double> hd_mm;
  metrics::Confusion rates;
  std::array<std::optional<double>, 3> region_dice;  // apical, mid, basal
  double volume_pred_ml = 0;
  double volume_ref_ml = 0;
};

struct VolumeReport {
  std::string case_id;
  std::vector<ClassMetrics> classes;  // foreground classes in order
};

/// Throws DimensionError / LabelError when pred and ref disagree in shape or
/// class count.
VolumeReport evaluate_volume(const std::string& case_id, const LabelVolume& pred,
                             const LabelVolume& ref, const EvalOptions& opt);

/// Evaluates pairs on up to `threads` workers; output order follows input.
std::vector<VolumeReport> evaluate_all(const std::vector<std::string>& ids,
                                       const std::vector<LabelVolume>& preds,
                                       const std::vector<LabelVolume>& refs,
                                       const EvalOptions& opt, int threads = 1);

/// One row per volume and class, then __mean__, __sd__ and __n__ rows per
/// class. Undefined values are empty fields and are left out of aggregates.
std::string report_csv(const std::vector<VolumeReport>& reports, bool regional);

struct ClinicalRow {
  std::string patient;
  double edv_ref = 0, esv_ref = 0, mass_ref = 0;
  double edv_pred = 0, esv_pred = 0, mass_pred = 0;
  std::optional<double> ef_ref, ef_pred;
};

/// Pairs "<p>_ED" with "<p>_ES" reports. Mass is taken at end-diastole.
std::vector<ClinicalRow> clinical_rows(const std::vector<VolumeReport>& reports,
                                       const EvalOptions& opt);

struct Agreement {
  std::string index;
  std::size_t n = 0;
  std::optional<double> pearson;
  std::optional<metrics::BlandAltman> bland_altman;  // pred - ref
};
std::vector<Agreement> agreement(const std::vector<ClinicalRow>& rows);

std::string clinical_csv(const std::vector<ClinicalRow>& rows, const std::vector<Agreement>& agr);

}  // namespace dmrseg::eval

#endif  // DMRSEG_EVALUATION_HPP
