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

#ifndef DMRSEG_TRAINER_HPP
#define DMRSEG_TRAINER_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dmrseg/checkpoint.hpp"
#include "dmrseg/networks.hpp"
#include "dmrseg/volume.hpp"

namespace dmrseg::train {

using autograd::Tensor;

inline constexpr double kRmsAlpha = 0.99;
inline constexpr double kRmsEps = 1e-8;

/// v <- a v + (1 - a) g^2;  p <- p - lr g / (sqrt(v) + eps)
template <typename T>
void rmsprop_step(std::span<T> param, std::span<const T> grad, std::span<T> state, T lr);

/// Keeps one squared-gradient accumulator per registered tensor.
template <typename T>
class RmsProp {
 public:
  explicit RmsProp(std::vector<Tensor<T>*> params);
  /// Tensors without a gradient are treated as g = 0.
  void step(T lr);
  void zero_grad();
  const std::vector<std::vector<T>>& state() const { return state_; }

 private:
  std::vector<Tensor<T>*> params_;
  std::vector<std::vector<T>> state_;
};

enum class Weighting { kLearned, kFixed };
std::string weighting_name(Weighting w);
Weighting parse_weighting(const std::string& name);

struct TrainConfig {
  double lr0 = 1e-4;
  double lr_decay = 0.99;
  int epochs = 30;
  int batch_size = 15;
  std::uint64_t seed = 0;
  Weighting weighting = Weighting::kLearned;
  double w_mad = 1.0;  // fixed weighting only
  double w_ce = 1.0;
  int augment_copies = 0;  // extra randomly transformed versions per slice and epoch
  nets::ArchSpec arch;

  /// Throws SpecError when an invariant is broken.
  void validate() const;
};

double lr_at(int epoch, const TrainConfig& cfg);

struct Case {
  std::string id;
  Volume image;  // preprocessed
  LabelVolume labels;
};

struct EpochLog {
  int epoch = 0;
  double lr = 0;
  double train_ce = 0;
  double train_mad = 0;  // 0 without a regularizer
  double val_ce = 0;
  double val_mad = 0;
  double val_dice_mean = 0;
  std::vector<double> val_dice_class;  // classes 1..C-1
  double s1 = 0;
  double s2 = 0;
  double w_mad = 0;  // effective multiplier on the MAD term
  double w_ce = 1;
  bool saved = false;
};

std::string log_header(int num_classes);
std::string log_row(const EpochLog& row);

struct ValidationResult {
  double ce = 0;
  double mad = 0;
  double dice_mean = 0;  // over volumes of the per-volume foreground mean
  std::vector<double> dice_class;
};

/// Eval-mode pass; never touches parameters or running statistics.
ValidationResult validate(nets::ModelParams<float>& params, const std::vector<Case>& cases,
                          int batch_size);

/// Flattened (C-1) x H x W distance-map target of one label slice.
std::vector<float> dm_targets(const LabelSlice& labels, int num_classes, double threshold);

/// FNV-1a over every parameter and buffer value.
std::uint64_t params_hash(const nets::ModelParams<float>& params);

struct TrainResult {
  ckpt::Checkpoint<float> best;
  ckpt::Checkpoint<float> last;
  std::vector<EpochLog> log;
};

struct TrainHooks {
  std::function<void(const EpochLog&)> on_epoch;
};

/// Runs the epoch loop. Throws UsageError on empty data, NumericalError on a
/// non-finite loss. `config_hash` is copied into checkpoint metadata.
TrainResult train(const TrainConfig& cfg, const std::vector<Case>& train_set,
                  const std::vector<Case>& val_set, const std::string& config_hash = {},
                  const TrainHooks& hooks = {});

}  // namespace dmrseg::train

#endif  // DMRSEG_TRAINER_HPP
