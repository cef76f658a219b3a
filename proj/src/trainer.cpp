#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <spdlog/spdlog.h>

#include "nextpoi/train.hpp"

namespace nextpoi::train {

double instance_loss(const ModelParams& params, const TrainingInstance& instance, std::size_t pairs,
                     Trainable* grads) {
  const std::size_t k = pairs == 0 ? instance.negatives.size() : std::min(pairs, instance.negatives.size());
  if (k == 0) return 0.0;
  std::vector<PoiIdx> candidates{instance.positive};
  candidates.insert(candidates.end(), instance.negatives.begin(),
                    instance.negatives.begin() + static_cast<std::ptrdiff_t>(k));

  num::Tape tape;
  model::Network net(tape, params, grads);
  const auto ctx = net.encode(instance);
  const num::Var scores = net.score(ctx, candidates);
  // Row i of the difference matrix picks o_neg_i - o_pos.
  num::Tensor diff(k, k + 1);
  for (std::size_t i = 0; i < k; ++i) {
    diff(i, 0) = -1.0;
    diff(i, i + 1) = 1.0;
  }
  const num::Var margins = num::matmul(tape.constant(std::move(diff)), scores);
  const num::Var loss = num::sum(num::softplus(margins));
  if (grads != nullptr) tape.backward(loss);
  return loss.value().item();
}

namespace {

struct BatchResult {
  Trainable grads;
  double loss = 0.0;
};

BatchResult run_batch(const ModelParams& params, const std::vector<TrainingInstance>& instances,
                      std::span<const std::size_t> batch, std::size_t pairs, std::size_t threads) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, batch.size()));
  std::vector<BatchResult> partial(workers);
  for (auto& p : partial) p.grads = params.trainable.zeros_like();
  std::vector<std::exception_ptr> errors(workers);

  auto work = [&](std::size_t w) {
    try {
      const std::size_t lo = batch.size() * w / workers;
      const std::size_t hi = batch.size() * (w + 1) / workers;
      for (std::size_t i = lo; i < hi; ++i) {
        partial[w].loss += instance_loss(params, instances[batch[i]], pairs, &partial[w].grads);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  // Fixed reduction order keeps results independent of scheduling.
  BatchResult total = std::move(partial[0]);
  for (std::size_t w = 1; w < workers; ++w) {
    total.grads.add_scaled(partial[w].grads, 1.0);
    total.loss += partial[w].loss;
  }
  return total;
}

}  // namespace

TrainResult train(ModelParams init, std::vector<TrainingInstance> instances, const TrainConfig& config,
                  const NegativeSampler* resampler, const CheckpointFn& on_checkpoint) {
  config.validate();
  TrainResult result{std::move(init), {}};
  if (config.max_iters == 0) return result;
  if (instances.empty()) throw std::invalid_argument("train: no training instances");
  if (config.resample_each_epoch && resampler == nullptr) {
    throw std::invalid_argument("train: resample_each_epoch needs a negative sampler");
  }

  auto& params = result.params;
  Adam adam(params.trainable);
  Rng shuffle_rng(derive_seed(config.seed, {0xba7c}));
  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), shuffle_rng);
  std::size_t cursor = 0;
  std::uint64_t epoch = 0;

  const std::size_t batch_size = std::min(config.batch_size, instances.size());
  std::vector<std::size_t> batch;
  for (std::uint64_t step = 0; step < config.max_iters; ++step) {
    batch.clear();
    while (batch.size() < batch_size) {
      if (cursor == order.size()) {
        ++epoch;
        cursor = 0;
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        if (config.resample_each_epoch) {
          for (auto& inst : instances) {
            Rng rng(derive_seed(config.seed, {0x7e6b, epoch, inst.id}));
            inst.negatives = resampler->sample(inst.positive, inst.negatives.size(), rng);
          }
        }
      }
      batch.push_back(order[cursor++]);
    }

    auto [grads, loss] = run_batch(params, instances, batch, config.pairs_per_instance, config.threads);
    loss += 0.5 * config.lambda * params.trainable.squared_norm();
    grads.add_scaled(params.trainable, config.lambda);
    const double lr = learning_rate(config, step);
    if (!std::isfinite(loss)) {
      throw NumericalError("training diverged: batch loss is " + std::to_string(loss) + " at step " +
                           std::to_string(step + 1));
    }
    adam.step(params.trainable, grads, lr);
    result.history.push_back({step + 1, lr, loss});
    if (config.checkpoint_every > 0 && (step + 1) % config.checkpoint_every == 0) {
      if (on_checkpoint) on_checkpoint(params, step + 1);
      spdlog::info("step {} lr {:.6g} loss {:.6g}", step + 1, lr, loss);
    }
  }
  return result;
}

}  // namespace nextpoi::train
