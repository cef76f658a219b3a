#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "nextpoi/geo.hpp"
#include "nextpoi/ingest.hpp"
#include "nextpoi/model.hpp"
#include "nextpoi/rng.hpp"

namespace nextpoi::train {

using model::ModelParams;
using model::TrainingInstance;
using model::Trainable;

/// Same-cell negatives first, popularity-weighted fill from every observed
/// POI after that.
class NegativeSampler {
 public:
  /// `cities` indexes the observed (train) POIs; `locations` covers every
  /// POI index so that an unobserved positive still finds its cell.
  NegativeSampler(geo::CityIndex cities, std::vector<geo::GeoPoint> locations,
                  std::vector<std::uint64_t> popularity, double popularity_exponent = 1.0);

  /// Up to n distinct POIs, never `positive`. Uniform without replacement
  /// inside the positive's cell; the shortfall is drawn without replacement
  /// with probability proportional to popularity^exponent. Returns fewer
  /// than n (with a warning) only if fewer observed POIs exist.
  std::vector<PoiIdx> sample(PoiIdx positive, std::size_t n, Rng& rng) const;

  std::size_t observed_count() const { return observed_.size(); }
  /// Calls that returned fewer than n negatives; only the first is logged.
  std::size_t shortfall_count() const { return shortfalls_.load(); }

 private:
  geo::CityIndex cities_;
  std::vector<geo::GeoPoint> locations_;
  std::vector<PoiIdx> observed_;
  std::vector<double> weights_;  // parallel to observed_
  mutable std::atomic<std::size_t> shortfalls_{0};
};

struct InstanceOptions {
  std::size_t negatives = 500;
  std::size_t ltsc_len = 200;
  std::uint64_t seed = 1;
};

/// One instance per (train trajectory, check-in after the first). The STC
/// is the trajectory prefix; the LTSC pool holds the latest ltsc_len own
/// and the latest ltsc_len friend check-ins strictly before the target,
/// drawn from train trajectories only. Negatives use a stream derived from
/// (seed, instance id).
std::vector<TrainingInstance> build_instances(const ingest::Dataset& dataset,
                                              const NegativeSampler& sampler,
                                              const InstanceOptions& options);

/// Same enumeration over test trajectories, with history drawn from train
/// and test check-ins strictly before each target.
std::vector<TrainingInstance> build_eval_instances(const ingest::Dataset& dataset,
                                                   const NegativeSampler& sampler,
                                                   const InstanceOptions& options);

struct TrainConfig {
  std::size_t batch_size = 50;
  std::size_t negatives = 500;
  double lr0 = 0.001;
  double decay = 0.96;
  std::size_t decay_steps = 1000;
  double lambda = 1e-5;
  std::size_t max_iters = 1000;
  std::uint64_t seed = 1;
  bool resample_each_epoch = false;
  double popularity_exponent = 1.0;
  /// Negatives used per instance and step; 0 means all of them.
  std::size_t pairs_per_instance = 0;
  /// Steps between checkpoint callbacks; 0 disables them.
  std::size_t checkpoint_every = 0;
  std::size_t threads = 1;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// lr0 * decay^floor(step / decay_steps), step counted from 0.
double learning_rate(const TrainConfig& config, std::uint64_t step);

/// ln(1 + exp(-(pos - neg))).
double bpr_pair_loss(double o_pos, double o_neg);
/// d loss / d margin at margin = pos - neg: -sigmoid(-margin).
double bpr_pair_grad(double margin);

class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  explicit Adam(const Trainable& like);

  /// Bias-corrected update. Throws NumericalError naming the tensor if any
  /// gradient entry is NaN or infinite; parameters are untouched then.
  void step(Trainable& params, const Trainable& grads, double lr);

  std::uint64_t steps() const { return t_; }
  const Trainable& first_moment() const { return m_; }
  const Trainable& second_moment() const { return v_; }

 private:
  Trainable m_;
  Trainable v_;
  std::uint64_t t_ = 0;
};

/// Sum of BPR pair losses of one instance, with gradients into `grads`
/// (may be null). Candidates are the positive and the first `pairs`
/// negatives (all if 0).
double instance_loss(const ModelParams& params, const TrainingInstance& instance,
                     std::size_t pairs, Trainable* grads);

struct LossRecord {
  std::uint64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  bool operator==(const LossRecord&) const = default;
};

struct TrainResult {
  ModelParams params;
  std::vector<LossRecord> history;
};

using CheckpointFn = std::function<void(const ModelParams&, std::uint64_t step)>;

/// Mini-batch BPR training with Adam. Each step draws the next batch from a
/// per-epoch shuffle, sums the pair losses of every instance plus one
/// (lambda/2)|theta|^2 term, and applies one Adam step. A non-finite loss
/// throws NumericalError after the last checkpoint callback has run.
/// `resampler` is required only with resample_each_epoch.
TrainResult train(ModelParams init, std::vector<TrainingInstance> instances, const TrainConfig& config,
                  const NegativeSampler* resampler = nullptr, const CheckpointFn& on_checkpoint = {});

}  // namespace nextpoi::train
