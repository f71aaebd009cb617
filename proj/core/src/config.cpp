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

#include "dmrseg/config.hpp"

#include <sstream>

#include "dmrseg/error.hpp"
#include "dmrseg/networks.hpp"

namespace dmrseg::cfg {
namespace {

std::string join(const std::vector<int>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

}  // namespace

void apply(RunConfig& rc, const kv::Entry& e) {
  auto& t = rc.train;
  auto& a = t.arch;
  const auto& k = e.key;
  try {
    if (k == "arch") a.variant = nets::parse_variant(e.value);
    else if (k == "dmr") a.dmr_attached = kv::to_bool(e);
    else if (k == "stage_channels") a.stage_channels = kv::to_int_list(e);
    else if (k == "bottleneck_channels") a.bottleneck_channels = kv::to_int(e);
    else if (k == "batchnorm") a.use_batchnorm = kv::to_bool(e);
    else if (k == "num_classes") a.num_classes = kv::to_int(e);
    else if (k == "in_channels") a.in_channels = kv::to_int(e);
    else if (k == "dm_threshold") a.dm_threshold = kv::to_double(e);
    else if (k == "lr0") {
      t.lr0 = kv::to_double(e);
      rc.lr0_set = true;
    } else if (k == "lr_decay") t.lr_decay = kv::to_double(e);
    else if (k == "epochs") t.epochs = kv::to_int(e);
    else if (k == "batch_size") t.batch_size = kv::to_int(e);
    else if (k == "seed") t.seed = kv::to_u64(e);
    else if (k == "weighting") t.weighting = train::parse_weighting(e.value);
    else if (k == "w_mad") t.w_mad = kv::to_double(e);
    else if (k == "w_ce") t.w_ce = kv::to_double(e);
    else if (k == "augment_copies") t.augment_copies = kv::to_int(e);
    else if (k == "data") rc.data = e.value;
    else if (k == "folds") rc.folds = e.value;
    else if (k == "fold") rc.fold = kv::to_int(e);
    else if (k == "num_folds") rc.num_folds = kv::to_int(e);
    else if (k == "out") rc.out = e.value;
    else if (k == "height") rc.prep.height = kv::to_int(e);
    else if (k == "width") rc.prep.width = kv::to_int(e);
    else if (k == "spacing") rc.prep.spacing = kv::to_double(e);
    else if (k == "eval_batch") rc.eval_batch = kv::to_int(e);
    else throw ParseError("line " + std::to_string(e.line) + ": unknown config key '" + k + "'");
  } catch (const SpecError& err) {
    throw ParseError("line " + std::to_string(e.line) + ": " + err.what());
  }
}

void apply_override(RunConfig& rc, const std::string& assignment) {
  const auto entries = kv::parse(assignment);
  if (entries.size() != 1) throw ParseError("override '" + assignment + "' is not key=value");
  apply(rc, entries.front());
}

RunConfig parse(const std::string& text) {
  RunConfig rc;
  for (const auto& e : kv::parse(text)) apply(rc, e);
  return rc;
}

RunConfig load(const std::string& path) { return parse(kv::read_file(path)); }

void resolve(RunConfig& rc) {
  if (!rc.lr0_set) {
    rc.train.lr0 = rc.train.arch.dmr_attached ? 5e-4 : 1e-4;
    rc.lr0_set = true;
  }
  rc.train.validate();
  if (rc.num_folds < 2) throw SpecError("num_folds must be at least 2");
  if (rc.fold < 0 || rc.fold >= rc.num_folds) throw SpecError("fold must be in [0, num_folds)");
  if (rc.prep.height < 8 || rc.prep.width < 8 || rc.prep.height % 8 || rc.prep.width % 8) {
    throw SpecError("height and width must be positive multiples of 8");
  }
  if (!(rc.prep.spacing > 0)) throw SpecError("spacing must be positive");
  if (rc.eval_batch < 1) throw SpecError("eval_batch must be at least 1");
}

std::string resolved_text(const RunConfig& rc) {
  const auto& t = rc.train;
  const auto& a = t.arch;
  auto d = kv::format_double;
  std::ostringstream o;
  o << "arch = " << nets::variant_name(a.variant) << "\n"
    << "dmr = " << (a.dmr_attached ? "true" : "false") << "\n"
    << "stage_channels = " << join(a.stage_channels) << "\n"
    << "bottleneck_channels = " << a.bottleneck_channels << "\n"
    << "batchnorm = " << (a.use_batchnorm ? "true" : "false") << "\n"
    << "num_classes = " << a.num_classes << "\n"
    << "in_channels = " << a.in_channels << "\n"
    << "dm_threshold = " << d(a.dm_threshold) << "\n"
    << "lr0 = " << d(t.lr0) << "\n"
    << "lr_decay = " << d(t.lr_decay) << "\n"
    << "epochs = " << t.epochs << "\n"
    << "batch_size = " << t.batch_size << "\n"
    << "seed = " << t.seed << "\n"
    << "weighting = " << train::weighting_name(t.weighting) << "\n"
    << "w_mad = " << d(t.w_mad) << "\n"
    << "w_ce = " << d(t.w_ce) << "\n"
    << "augment_copies = " << t.augment_copies << "\n"
    << "data = " << rc.data << "\n"
    << "folds = " << rc.folds << "\n"
    << "fold = " << rc.fold << "\n"
    << "num_folds = " << rc.num_folds << "\n"
    << "height = " << rc.prep.height << "\n"
    << "width = " << rc.prep.width << "\n"
    << "spacing = " << d(rc.prep.spacing) << "\n"
    << "eval_batch = " << rc.eval_batch << "\n"
    << "out = " << rc.out << "\n";
  return o.str();
}

std::string config_hash(const RunConfig& rc) {
  RunConfig c = rc;
  c.out.clear();
  return kv::hex64(kv::fnv1a64(resolved_text(c)));
}

}  // namespace dmrseg::cfg
