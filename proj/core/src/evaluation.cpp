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

#include "dmrseg/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <thread>

#include "dmrseg/error.hpp"
#include "dmrseg/folds.hpp"
#include "dmrseg/kv.hpp"

namespace dmrseg::eval {
namespace {

std::vector<std::uint8_t> slab_mask(const LabelVolume& v, int cls, const std::vector<metrics::Region>& regions,
                                    metrics::Region want) {
  const std::size_t plane = static_cast<std::size_t>(v.nx()) * v.ny();
  std::vector<std::uint8_t> out;
  for (int z = 0; z < v.nz(); ++z) {
    if (regions[z] != want) continue;
    for (std::size_t i = 0; i < plane; ++i) out.push_back(v.labels[z * plane + i] == cls);
  }
  return out;
}

std::string opt_str(const std::optional<double>& v) { return v ? kv::format_double(*v) : ""; }

struct Acc {
  std::vector<double> values;
  void add(const std::optional<double>& v) {
    if (v) values.push_back(*v);
  }
  std::optional<double> mean() const {
    if (values.empty()) return std::nullopt;
    double s = 0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
  }
  // Sample sd (n - 1).
  std::optional<double> sd() const {
    if (values.size() < 2) return std::nullopt;
    const double m = *mean();
    double ss = 0;
    for (double v : values) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
};

std::vector<std::optional<double>> row_values(const ClassMetrics& m, bool regional) {
  std::vector<std::optional<double>> v{m.dice, m.jaccard, m.msd_mm, m.hd_mm, m.rates.sensitivity,
                                       m.rates.specificity, m.rates.ppv, m.rates.npv,
                                       m.volume_pred_ml, m.volume_ref_ml};
  if (regional) {
    for (const auto& r : m.region_dice) v.push_back(r);
  }
  return v;
}

}  // namespace

VolumeReport evaluate_volume(const std::string& case_id, const LabelVolume& pred,
                             const LabelVolume& ref, const EvalOptions& opt) {
  if (pred.dims != ref.dims) throw DimensionError(case_id + ": prediction and reference differ in extent");
  if (pred.num_classes != ref.num_classes) {
    throw LabelError(case_id + ": prediction and reference differ in class count");
  }
  pred.validate();
  ref.validate();
  const LabelVolume p = opt.postprocess ? metrics::largest_cc_3d(pred) : pred;
  const auto regions = opt.regional ? metrics::region_split(ref) : std::nullopt;
  VolumeReport rep{case_id, {}};
  for (int k = 1; k < ref.num_classes; ++k) {
    const auto pm = p.mask(k), rm = ref.mask(k);
    ClassMetrics m;
    m.cls = k;
    m.dice = metrics::dice(pm, rm);
    m.jaccard = metrics::jaccard(pm, rm);
    const auto sp = metrics::surface(pm, p.dims, p.spacing);
    const auto sr = metrics::surface(rm, ref.dims, ref.spacing);
    m.msd_mm = metrics::msd(sp, sr);
    m.hd_mm = metrics::hausdorff(sp, sr);
    m.rates = metrics::confusion_rates(pm, rm);
    m.volume_pred_ml = metrics::volume_ml(pm, p.spacing);
    m.volume_ref_ml = metrics::volume_ml(rm, ref.spacing);
    if (regions) {
      for (int r = 0; r < 3; ++r) {
        const auto want = static_cast<metrics::Region>(r);
        if (std::find(regions->begin(), regions->end(), want) == regions->end()) continue;
        m.region_dice[r] = metrics::dice(slab_mask(p, k, *regions, want), slab_mask(ref, k, *regions, want));
      }
    }
    rep.classes.push_back(m);
  }
  return rep;
}

std::vector<VolumeReport> evaluate_all(const std::vector<std::string>& ids,
                                       const std::vector<LabelVolume>& preds,
                                       const std::vector<LabelVolume>& refs,
                                       const EvalOptions& opt, int threads) {
  if (ids.size() != preds.size() || ids.size() != refs.size()) {
    throw UsageError("evaluate_all: ids, predictions and references differ in count");
  }
  std::vector<VolumeReport> out(ids.size());
  std::vector<std::exception_ptr> errors(ids.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < ids.size(); i = next++) {
      try {
        out[i] = evaluate_volume(ids[i], preds[i], refs[i], opt);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(ids.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::string report_csv(const std::vector<VolumeReport>& reports, bool regional) {
  std::string out = "case_id,class,dice,jaccard,msd_mm,hd_mm,sensitivity,specificity,ppv,npv,"
                    "volume_pred_ml,volume_ref_ml";
  if (regional) out += ",dice_apical,dice_mid,dice_basal";
  out += "\n";
  std::map<int, std::vector<Acc>> acc;
  for (const auto& rep : reports) {
    for (const auto& m : rep.classes) {
      const auto vals = row_values(m, regional);
      auto& a = acc[m.cls];
      a.resize(vals.size());
      out += rep.case_id + "," + std::to_string(m.cls);
      for (std::size_t i = 0; i < vals.size(); ++i) {
        out += "," + opt_str(vals[i]);
        a[i].add(vals[i]);
      }
      out += "\n";
    }
  }
  for (const auto& [cls, a] : acc) {
    std::string mean = "__mean__," + std::to_string(cls);
    std::string sd = "__sd__," + std::to_string(cls);
    std::string n = "__n__," + std::to_string(cls);
    for (const auto& col : a) {
      mean += "," + opt_str(col.mean());
      sd += "," + opt_str(col.sd());
      n += "," + std::to_string(col.values.size());
    }
    out += mean + "\n" + sd + "\n" + n + "\n";
  }
  return out;
}

std::vector<ClinicalRow> clinical_rows(const std::vector<VolumeReport>& reports,
                                       const EvalOptions& opt) {
  struct Pair {
    const VolumeReport* ed = nullptr;
    const VolumeReport* es = nullptr;
  };
  std::map<std::string, Pair> pairs;
  for (const auto& r : reports) {
    const std::string g = io::case_group(r.case_id);
    if (g == r.case_id) continue;
    if (r.case_id.ends_with("_ED")) pairs[g].ed = &r;
    else pairs[g].es = &r;
  }
  auto find = [](const VolumeReport& r, int cls) -> const ClassMetrics& {
    for (const auto& m : r.classes) {
      if (m.cls == cls) return m;
    }
    throw LabelError(r.case_id + ": class " + std::to_string(cls) + " missing from report");
  };
  std::vector<ClinicalRow> rows;
  for (const auto& [patient, p] : pairs) {
    if (!p.ed || !p.es) continue;
    ClinicalRow row;
    row.patient = patient;
    const auto& lv_ed = find(*p.ed, opt.lv_class);
    const auto& lv_es = find(*p.es, opt.lv_class);
    const auto& myo_ed = find(*p.ed, opt.myo_class);
    row.edv_ref = lv_ed.volume_ref_ml;
    row.esv_ref = lv_es.volume_ref_ml;
    row.edv_pred = lv_ed.volume_pred_ml;
    row.esv_pred = lv_es.volume_pred_ml;
    row.mass_ref = metrics::myo_mass(myo_ed.volume_ref_ml);
    row.mass_pred = metrics::myo_mass(myo_ed.volume_pred_ml);
    row.ef_ref = metrics::ejection_fraction(row.edv_ref, row.esv_ref);
    row.ef_pred = metrics::ejection_fraction(row.edv_pred, row.esv_pred);
    rows.push_back(row);
  }
  return rows;
}

std::vector<Agreement> agreement(const std::vector<ClinicalRow>& rows) {
  auto make = [&](const std::string& name, auto get_pred, auto get_ref) {
    std::vector<double> xs, ys;
    for (const auto& r : rows) {
      const std::optional<double> p = get_pred(r), q = get_ref(r);
      if (p && q) {
        xs.push_back(*p);
        ys.push_back(*q);
      }
    }
    return Agreement{name, xs.size(), metrics::pearson(xs, ys), metrics::bland_altman(xs, ys)};
  };
  using R = const ClinicalRow&;
  using O = std::optional<double>;
  return {
      make("edv_ml", [](R r) -> O { return r.edv_pred; }, [](R r) -> O { return r.edv_ref; }),
      make("esv_ml", [](R r) -> O { return r.esv_pred; }, [](R r) -> O { return r.esv_ref; }),
      make("ef_pct", [](R r) -> O { return r.ef_pred; }, [](R r) -> O { return r.ef_ref; }),
      make("myo_mass_g", [](R r) -> O { return r.mass_pred; }, [](R r) -> O { return r.mass_ref; }),
  };
}

std::string clinical_csv(const std::vector<ClinicalRow>& rows, const std::vector<Agreement>& agr) {
  auto d = kv::format_double;
  std::string out = "patient,edv_ref_ml,esv_ref_ml,ef_ref_pct,myo_mass_ref_g,edv_pred_ml,esv_pred_ml,"
                    "ef_pred_pct,myo_mass_pred_g\n";
  for (const auto& r : rows) {
    out += r.patient + "," + d(r.edv_ref) + "," + d(r.esv_ref) + "," + opt_str(r.ef_ref) + "," +
           d(r.mass_ref) + "," + d(r.edv_pred) + "," + d(r.esv_pred) + "," + opt_str(r.ef_pred) + "," +
           d(r.mass_pred) + "\n";
  }
  out += "\nindex,n,pearson,bias,loa_half_width\n";
  for (const auto& a : agr) {
    out += a.index + "," + std::to_string(a.n) + "," + opt_str(a.pearson) + "," +
           (a.bland_altman ? d(a.bland_altman->bias) : "") + "," +
           (a.bland_altman ? d(a.bland_altman->half_width) : "") + "\n";
  }
  return out;
}

}  // namespace dmrseg::eval
