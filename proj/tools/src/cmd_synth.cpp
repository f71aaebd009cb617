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

#include <iostream>
#include <memory>
#include <optional>

#include "common.hpp"
#include "dmrseg/error.hpp"
#include "dmrseg/folds.hpp"
#include "dmrseg/kv.hpp"
#include "dmrseg/nifti.hpp"
#include "dmrseg/phantom.hpp"

namespace dmrseg::tools {
namespace {

struct SynthArgs {
  std::string spec;
  std::string out;
  int cases = 20;
  int strata = 1;
  std::optional<std::uint64_t> seed;
};

void run_synth(const SynthArgs& a) {
  phantom::PhantomSpec spec = a.spec.empty() ? phantom::PhantomSpec{}
                                             : phantom::parse_spec(kv::read_file(a.spec));
  if (a.seed) spec.seed = *a.seed;
  spec.validate();
  if (a.cases < 2 || a.cases % 2 != 0) {
    throw UsageError("--cases counts volumes; each patient gives an ED and an ES volume, so it "
                     "must be even and at least 2 (got " + std::to_string(a.cases) + ")");
  }
  const int patients = a.cases / 2;
  if (a.strata < 1 || a.strata > patients) {
    throw UsageError("--strata must lie in [1, " + std::to_string(patients) + "]");
  }
  make_dirs(a.out + "/images");
  make_dirs(a.out + "/labels");

  // Paths in the manifest stay relative so two trees generated from the same
  // spec compare equal byte for byte wherever they live.
  std::vector<io::ManifestEntry> manifest;
  for (int p = 0; p < patients; ++p) {
    const std::string tag = a.strata > 1 ? "stratum" + std::to_string(p % a.strata) : "";
    for (auto phase : {phantom::Phase::kED, phantom::Phase::kES}) {
      const std::string id = "p" + std::to_string(p) + (phase == phantom::Phase::kED ? "_ED" : "_ES");
      const auto [image, labels] = phantom::gen_phantom(spec, p, phase);
      io::write_nifti(image, a.out + "/images/" + id + ".nii");
      io::write_nifti(labels, a.out + "/labels/" + id + ".nii");
      manifest.push_back({id, "images/" + id + ".nii", "labels/" + id + ".nii", tag});
    }
  }
  io::write_manifest(a.out + "/manifest.csv", manifest);
  write_text(a.out + "/phantom.cfg", phantom::format_spec(spec));
  write_text(a.out + "/synth.resolved",
             kv_text({{"cases", std::to_string(a.cases)}, {"strata", std::to_string(a.strata)},
                      {"spec", "phantom.cfg"}}));
  std::cerr << "synth: " << a.cases << " volumes in " << a.out << "\n";
}

}  // namespace

void add_synth(CLI::App& app) {
  auto args = std::make_shared<SynthArgs>();
  auto* sub = app.add_subcommand("synth", "Generate a labelled phantom dataset with a manifest");
  sub->add_option("--spec", args->spec, "Phantom spec file (key = value); defaults when absent")
      ->check(CLI::ExistingFile);
  sub->add_option("--out", args->out, "Output directory")->required();
  sub->add_option("--cases", args->cases, "Number of volumes (two per patient)");
  sub->add_option("--strata", args->strata, "Number of subgroup tags, dealt round-robin by patient");
  sub->add_option("--seed", args->seed, "Overrides the seed in the phantom file");
  sub->callback([args] { run_synth(*args); });
}

}  // namespace dmrseg::tools
