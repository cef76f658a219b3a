#include <algorithm>

#include "nextpoi/train.hpp"

namespace nextpoi::train {

namespace {

using ingest::CheckIn;
using ingest::Trajectory;

bool canonical_less(const CheckIn& a, const CheckIn& b) {
  if (a.time != b.time) return a.time < b.time;
  if (a.user != b.user) return a.user < b.user;
  if (a.poi != b.poi) return a.poi < b.poi;
  return a.position < b.position;
}

/// Own and friends' check-ins per user, canonically sorted.
struct HistoryIndex {
  std::vector<std::vector<CheckIn>> own;
  std::vector<std::vector<CheckIn>> friends;

  HistoryIndex(const ingest::Dataset& ds, bool include_test) : own(ds.user_count()), friends(ds.user_count()) {
    auto add = [&](const std::vector<Trajectory>& ts) {
      for (const auto& t : ts) {
        for (const auto& c : t.checkins) own[c.user.get()].push_back(c);
      }
    };
    add(ds.train);
    if (include_test) add(ds.test);
    for (auto& v : own) std::sort(v.begin(), v.end(), canonical_less);
    const auto adj = ds.adjacency();
    for (std::size_t u = 0; u < adj.size(); ++u) {
      for (auto f : adj[u]) {
        const auto& src = own[f.get()];
        friends[u].insert(friends[u].end(), src.begin(), src.end());
      }
      std::sort(friends[u].begin(), friends[u].end(), canonical_less);
    }
  }

  static void append_latest_before(const std::vector<CheckIn>& sorted, Timestamp t, std::size_t limit,
                                   std::vector<CheckIn>& out) {
    const auto end = std::lower_bound(sorted.begin(), sorted.end(), t,
                                      [](const CheckIn& c, Timestamp x) { return c.time < x; });
    const auto count = std::min<std::size_t>(limit, static_cast<std::size_t>(end - sorted.begin()));
    out.insert(out.end(), end - static_cast<std::ptrdiff_t>(count), end);
  }

  std::vector<CheckIn> pool(UserIdx user, Timestamp t, std::size_t limit) const {
    std::vector<CheckIn> out;
    append_latest_before(own[user.get()], t, limit, out);
    append_latest_before(friends[user.get()], t, limit, out);
    std::sort(out.begin(), out.end(), canonical_less);
    return out;
  }
};

std::vector<TrainingInstance> enumerate(const std::vector<Trajectory>& targets,
                                        const HistoryIndex& history, const NegativeSampler& sampler,
                                        const InstanceOptions& options) {
  std::vector<TrainingInstance> out;
  for (const auto& traj : targets) {
    for (std::size_t j = 1; j < traj.checkins.size(); ++j) {
      const auto& target = traj.checkins[j];
      TrainingInstance inst;
      inst.id = out.size();
      inst.user = traj.user;
      inst.stc.assign(traj.checkins.begin(), traj.checkins.begin() + static_cast<std::ptrdiff_t>(j));
      inst.prediction_time = target.time;
      inst.ltsc = history.pool(traj.user, target.time, options.ltsc_len);
      inst.positive = target.poi;
      Rng rng(derive_seed(options.seed, {0x7e6a, inst.id}));
      inst.negatives = sampler.sample(target.poi, options.negatives, rng);
      out.push_back(std::move(inst));
    }
  }
  return out;
}

}  // namespace

std::vector<TrainingInstance> build_instances(const ingest::Dataset& dataset,
                                              const NegativeSampler& sampler,
                                              const InstanceOptions& options) {
  const HistoryIndex history(dataset, false);
  return enumerate(dataset.train, history, sampler, options);
}

std::vector<TrainingInstance> build_eval_instances(const ingest::Dataset& dataset,
                                                   const NegativeSampler& sampler,
                                                   const InstanceOptions& options) {
  const HistoryIndex history(dataset, true);
  return enumerate(dataset.test, history, sampler, options);
}

}  // namespace nextpoi::train
