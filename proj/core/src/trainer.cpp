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

#include "dmrseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <sstream>

#include "dmrseg/distmap.hpp"
#include "dmrseg/error.hpp"
#include "dmrseg/kv.hpp"
#include "dmrseg/metrics.hpp"
#include "dmrseg/mtl_loss.hpp"
#include "dmrseg/ops.hpp"
#include "dmrseg/preprocess.hpp"

namespace dmrseg::train {
namespace ag = dmrseg::autograd;

template <typename T>
void rmsprop_step(std::span<T> param, std::span<const T> grad, std::span<T> state, T lr) {
  if (param.size() != grad.size() || param.size() != state.size()) {
    throw DimensionError("rmsprop_step: parameter, gradient and state sizes differ");
  }
  const T a = static_cast<T>(kRmsAlpha), eps = static_cast<T>(kRmsEps);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i];
    state[i] = a * state[i] + (T(1) - a) * g * g;
    param[i] -= lr * g / (std::sqrt(state[i]) + eps);
  }
}

template <typename T>
RmsProp<T>::RmsProp(std::vector<Tensor<T>*> params) : params_(std::move(params)) {
  state_.reserve(params_.size());
  for (auto* p : params_) state_.emplace_back(p->numel(), T(0));
}

template <typename T>
void RmsProp<T>::step(T lr) {
  std::vector<T> zeros;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor<T>& p = *params_[i];
    std::span<const T> g = p.grad();
    if (!p.has_grad()) {
      zeros.assign(p.numel(), T(0));
      g = zeros;
    }
    rmsprop_step<T>(p.data(), g, state_[i], lr);
  }
}

template <typename T>
void RmsProp<T>::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

template void rmsprop_step<float>(std::span<float>, std::span<const float>, std::span<float>, float);
template void rmsprop_step<double>(std::span<double>, std::span<const double>, std::span<double>,
                                   double);
template class RmsProp<float>;
template class RmsProp<double>;

std::string weighting_name(Weighting w) { return w == Weighting::kLearned ? "learned" : "fixed"; }

Weighting parse_weighting(const std::string& name) {
  if (name == "learned") return Weighting::kLearned;
  if (name == "fixed") return Weighting::kFixed;
  throw SpecError("unknown weighting '" + name + "' (expected learned or fixed)");
}

void TrainConfig::validate() const {
  if (!(lr0 > 0)) throw SpecError("lr0 must be positive");
  if (!(lr_decay > 0 && lr_decay <= 1)) throw SpecError("lr_decay must be in (0, 1]");
  if (batch_size < 1) throw SpecError("batch_size must be at least 1");
  if (epochs < 0) throw SpecError("epochs must be non-negative");
  if (augment_copies < 0) throw SpecError("augment_copies must be non-negative");
  if (w_mad < 0 || w_ce < 0) throw SpecError("fixed weights must be non-negative");
  arch.validate();
}

double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw UsageError("lr_at: negative epoch");
  return cfg.lr0 * std::pow(cfg.lr_decay, epoch);
}

std::string log_header(int num_classes) {
  std::string h = "epoch,lr,train_ce,train_mad,val_ce,val_mad,val_dice_mean";
  for (int k = 1; k < num_classes; ++k) h += ",val_dice_c" + std::to_string(k);
  h += ",s1,s2,w_mad,w_ce,saved";
  return h;
}

std::string log_row(const EpochLog& r) {
  auto d = [](double v) { return kv::format_double(v); };
  std::string row = std::to_string(r.epoch) + "," + d(r.lr) + "," + d(r.train_ce) + "," +
                    d(r.train_mad) + "," + d(r.val_ce) + "," + d(r.val_mad) + "," + d(r.val_dice_mean);
  for (double v : r.val_dice_class) row += "," + d(v);
  row += "," + d(r.s1) + "," + d(r.s2) + "," + d(r.w_mad) + "," + d(r.w_ce) + "," +
         (r.saved ? "1" : "0");
  return row;
}

std::vector<float> dm_targets(const LabelSlice& labels, int num_classes, double threshold) {
  const auto stack = distmap::dm_stack(labels, num_classes, threshold);
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(num_classes - 1) * labels.size());
  for (const auto& ch : stack.channels) {
    for (double v : ch.values) out.push_back(static_cast<float>(v));
  }
  return out;
}

std::uint64_t params_hash(const nets::ModelParams<float>& params) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&](std::span<const float> xs) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(xs.data());
    for (std::size_t i = 0; i < xs.size_bytes(); ++i) h = (h ^ bytes[i]) * 1099511628211ull;
  };
  for (const auto* g : params.groups()) {
    for (const auto& p : g->params()) mix(p.tensor.data());
    for (const auto& b : g->buffers()) mix(b.tensor.data());
  }
  return h;
}

namespace {

struct SliceRef {
  std::size_t case_index;
  int z;
};

std::vector<SliceRef> enumerate_slices(const std::vector<Case>& cases) {
  std::vector<SliceRef> out;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const Case& cs = cases[c];
    if (cs.image.dims != cs.labels.dims) {
      throw DimensionError("case " + cs.id + ": image and labels differ in extent");
    }
    for (int z = 0; z < cs.image.nz(); ++z) out.push_back({c, z});
  }
  return out;
}

void check_shapes(const std::vector<Case>& cases, const nets::ArchSpec& arch, int& h, int& w) {
  for (const auto& c : cases) {
    c.labels.validate();
    if (c.labels.num_classes != arch.num_classes) {
      throw LabelError("case " + c.id + ": label classes do not match the architecture");
    }
    if (h < 0) {
      h = c.image.ny();
      w = c.image.nx();
    } else if (c.image.ny() != h || c.image.nx() != w) {
      throw DimensionError("case " + c.id + ": slice extent differs from the first case");
    }
  }
}

// One training sample: an original slice or an augmented copy.
struct Sample {
  ImageSlice image;
  LabelSlice labels;
  const std::vector<float>* dm = nullptr;  // cached target for originals
  std::vector<float> dm_own;
};

struct Batch {
  Tensor<float> x;
  std::vector<std::int32_t> labels;
  Tensor<float> dm;
};

Batch assemble(const std::vector<Sample>& samples, std::size_t begin, std::size_t end,
               int channels_dm, bool with_dm) {
  const int nb = static_cast<int>(end - begin);
  const int h = samples[begin].image.height, w = samples[begin].image.width;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Batch b;
  b.x = Tensor<float>({nb, 1, h, w});
  b.labels.resize(nb * plane);
  if (with_dm) b.dm = Tensor<float>({nb, channels_dm, h, w});
  for (int i = 0; i < nb; ++i) {
    const Sample& s = samples[begin + i];
    for (std::size_t p = 0; p < plane; ++p) {
      b.x[i * plane + p] = static_cast<float>(s.image.values[p]);
      b.labels[i * plane + p] = s.labels.values[p];
    }
    if (with_dm) {
      const std::vector<float>& t = s.dm ? *s.dm : s.dm_own;
      std::copy(t.begin(), t.end(), b.dm.data().begin() + static_cast<std::ptrdiff_t>(i * t.size()));
    }
  }
  return b;
}

std::vector<double> per_class_dice(const LabelVolume& pred, const LabelVolume& ref) {
  std::vector<double> out;
  for (int k = 1; k < ref.num_classes; ++k) {
    out.push_back(metrics::dice(pred.mask(k), ref.mask(k)));
  }
  return out;
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

ValidationResult validate(nets::ModelParams<float>& params, const std::vector<Case>& cases,
                          int batch_size) {
  ag::NoGradGuard<float> no_grad;
  ValidationResult res;
  const int C = params.spec.num_classes;
  res.dice_class.assign(C - 1, 0.0);
  if (cases.empty()) return res;
  const bool with_dm = params.dmr_decoder.has_value();
  std::size_t slices = 0;
  for (const Case& cs : cases) {
    LabelVolume pred(cs.labels.dims, cs.labels.spacing, C);
    const int h = cs.image.ny(), w = cs.image.nx();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int z0 = 0; z0 < cs.image.nz(); z0 += batch_size) {
      const int nb = std::min(batch_size, cs.image.nz() - z0);
      std::vector<Sample> samples(nb);
      for (int i = 0; i < nb; ++i) {
        samples[i].image = cs.image.slice(z0 + i);
        samples[i].labels = cs.labels.slice(z0 + i);
        if (with_dm) samples[i].dm_own = dm_targets(samples[i].labels, C, params.spec.dm_threshold);
      }
      Batch b = assemble(samples, 0, nb, C - 1, with_dm);
      auto out = nets::forward(params, b.x, ag::Mode::kEval);
      res.ce += ag::cross_entropy_loss(out.logits, b.labels).item() * nb;
      if (with_dm) res.mad += ag::mad_loss(*out.dm_pred, b.dm).item() * nb;
      const auto lab = nets::argmax_channels(out.logits);
      std::copy(lab.begin(), lab.end(), pred.labels.begin() + static_cast<std::ptrdiff_t>(z0 * plane));
      slices += nb;
    }
    const auto d = per_class_dice(pred, cs.labels);
    for (int k = 0; k < C - 1; ++k) res.dice_class[k] += d[k];
    res.dice_mean += std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  }
  const double n = static_cast<double>(cases.size());
  res.ce /= static_cast<double>(slices);
  res.mad /= static_cast<double>(slices);
  res.dice_mean /= n;
  for (double& v : res.dice_class) v /= n;
  return res;
}

TrainResult train(const TrainConfig& cfg, const std::vector<Case>& train_set,
                  const std::vector<Case>& val_set, const std::string& config_hash,
                  const TrainHooks& hooks) {
  cfg.validate();
  if (train_set.empty()) throw UsageError("train: empty training set");
  if (val_set.empty()) throw UsageError("train: empty validation set");
  int h = -1, w = -1;
  check_shapes(train_set, cfg.arch, h, w);
  check_shapes(val_set, cfg.arch, h, w);

  const int C = cfg.arch.num_classes;
  const bool dmr = cfg.arch.dmr_attached;
  const bool learned = dmr && cfg.weighting == Weighting::kLearned;
  const double T = cfg.arch.dm_threshold;

  auto params = nets::build_model<float>(cfg.arch, cfg.seed);
  auto task = mtl::TaskWeights<float>::init();
  std::vector<Tensor<float>*> learnables = params.learnables();
  if (learned) {
    learnables.push_back(&task.s1);
    learnables.push_back(&task.s2);
  }
  RmsProp<float> opt(learnables);

  const auto refs = enumerate_slices(train_set);
  // Targets of original slices depend only on the labels and T.
  std::vector<std::vector<float>> dm_cache(dmr ? refs.size() : 0);
  if (dmr) {
    for (std::size_t i = 0; i < refs.size(); ++i) {
      dm_cache[i] = dm_targets(train_set[refs[i].case_index].labels.slice(refs[i].z), C, T);
    }
  }

  TrainResult result;
  double best_dice = -1.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const float lr = static_cast<float>(lr_at(epoch, cfg));

    std::vector<Sample> samples;
    samples.reserve(refs.size() * (1 + cfg.augment_copies));
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const Case& cs = train_set[refs[i].case_index];
      Sample s;
      s.image = cs.image.slice(refs[i].z);
      s.labels = cs.labels.slice(refs[i].z);
      if (dmr) s.dm = &dm_cache[i];
      for (int copy = 1; copy <= cfg.augment_copies; ++copy) {
        std::seed_seq seq{cfg.seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(epoch),
                          static_cast<std::uint64_t>(copy)};
        std::mt19937_64 rng(seq);
        auto [ai, al] = prep::augment(s.image, s.labels, rng);
        Sample a;
        a.image = std::move(ai);
        a.labels = std::move(al);
        if (dmr) a.dm_own = dm_targets(a.labels, C, T);
        samples.push_back(std::move(a));
      }
      samples.push_back(std::move(s));
    }
    {
      std::seed_seq seq{cfg.seed, std::uint64_t{0xB47C4ull}, static_cast<std::uint64_t>(epoch)};
      std::mt19937_64 rng(seq);
      std::shuffle(samples.begin(), samples.end(), rng);
    }

    double sum_ce = 0, sum_mad = 0;
    for (std::size_t b0 = 0; b0 < samples.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(samples.size(), b0 + cfg.batch_size);
      const auto nb = static_cast<double>(b1 - b0);
      ag::Tape<float>::current().clear();
      opt.zero_grad();
      Batch batch = assemble(samples, b0, b1, C - 1, dmr);
      auto out = nets::forward(params, batch.x, ag::Mode::kTrain);
      Tensor<float> ce = ag::cross_entropy_loss(out.logits, batch.labels);
      Tensor<float> loss = ce;
      double mad_value = 0;
      if (dmr) {
        Tensor<float> mad = ag::mad_loss(*out.dm_pred, batch.dm);
        mad_value = mad.item();
        loss = learned ? mtl::joint_loss(mad, ce, task)
                       : mtl::fixed_loss(mad, ce, static_cast<float>(cfg.w_mad),
                                         static_cast<float>(cfg.w_ce));
      }
      const double lv = loss.item();
      if (!finite(lv) || !finite(ce.item()) || !finite(mad_value)) {
        ag::Tape<float>::current().clear();
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch " << b0 / cfg.batch_size
            << ": loss " << lv << ", ce " << ce.item() << ", mad " << mad_value << ", s1 "
            << task.s1.item() << ", s2 " << task.s2.item();
        throw NumericalError(msg.str());
      }
      ag::backward(loss);
      opt.step(lr);
      sum_ce += ce.item() * nb;
      sum_mad += mad_value * nb;
    }
    opt.zero_grad();

    const ValidationResult val = validate(params, val_set, cfg.batch_size);
    EpochLog row;
    row.epoch = epoch;
    row.lr = lr;
    row.train_ce = sum_ce / static_cast<double>(samples.size());
    row.train_mad = sum_mad / static_cast<double>(samples.size());
    row.val_ce = val.ce;
    row.val_mad = val.mad;
    row.val_dice_mean = val.dice_mean;
    row.val_dice_class = val.dice_class;
    if (learned) {
      row.s1 = task.s1.item();
      row.s2 = task.s2.item();
      row.w_mad = task.mad_weight();
      row.w_ce = task.ce_weight();
    } else {
      row.w_mad = dmr ? cfg.w_mad : 0.0;
      row.w_ce = dmr ? cfg.w_ce : 1.0;
    }

    ckpt::Checkpoint<float> snap{params.clone(), {epoch, val.dice_mean, config_hash}, std::nullopt};
    if (learned) snap.task = ckpt::TaskScales{task.s1.item(), task.s2.item()};
    if (val.dice_mean > best_dice) {
      best_dice = val.dice_mean;
      result.best = snap;
      row.saved = true;
    }
    result.last = std::move(snap);
    result.log.push_back(row);
    if (hooks.on_epoch) hooks.on_epoch(row);
  }
  if (cfg.epochs == 0) {
    ckpt::Checkpoint<float> snap{params.clone(), {-1, 0.0, config_hash}, std::nullopt};
    result.best = snap;
    result.last = snap;
  }
  return result;
}

}  // namespace dmrseg::train
