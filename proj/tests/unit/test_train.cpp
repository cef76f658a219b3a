#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "fixtures.hpp"
#include "nextpoi/grad_check.hpp"
#include "nextpoi/train.hpp"

using namespace nextpoi;
using namespace nextpoi::train;
using std::chrono::seconds;

namespace {

Timestamp at(std::int64_t s) { return Timestamp{seconds{s}}; }

ingest::Trajectory trajectory(std::size_t user, std::vector<std::pair<std::size_t, std::int64_t>> visits) {
  ingest::Trajectory t;
  t.user = UserIdx{user};
  std::uint32_t pos = 1;
  for (auto [poi, time] : visits) t.checkins.push_back({UserIdx{user}, PoiIdx{poi}, LocIdx{poi}, at(time), pos++});
  return t;
}

// Three users (0-1 friends, 2 alone), eight POIs in two cells.
ingest::Dataset small_dataset() {
  ingest::Dataset ds;
  ds.user_ids = {"a", "b", "c"};
  for (std::size_t p = 0; p < 8; ++p) {
    ds.pois.push_back({"p" + std::to_string(p), {p < 4 ? 10.1 + 0.01 * p : 20.1, p < 4 ? 10.1 : 20.1 + 0.01 * p}});
  }
  ds.friend_edges = {{UserIdx{0}, UserIdx{1}}};
  ds.train = {trajectory(0, {{0, 1000}, {1, 2000}, {2, 3000}}), trajectory(1, {{3, 1500}, {0, 2500}}),
              trajectory(2, {{4, 500}, {5, 900}})};
  ds.test = {trajectory(0, {{5, 90000}, {6, 91000}}), trajectory(1, {{7, 95000}, {1, 96000}})};
  ds.poi_popularity = ingest::count_popularity(ds.train, ds.pois.size());
  return ds;
}

NegativeSampler sampler_for(const ingest::Dataset& ds) {
  std::vector<std::uint8_t> observed(ds.poi_count());
  for (std::size_t i = 0; i < observed.size(); ++i) observed[i] = ds.poi_popularity[i] > 0;
  const auto loc = ds.poi_locations();
  return NegativeSampler(geo::CityIndex::build(loc, 0.5, observed), loc, ds.poi_popularity);
}

// n POIs inside one cell around (10.2, 10.2) followed by `outside` POIs elsewhere.
NegativeSampler grid_sampler(std::size_t in_cell, std::vector<std::uint64_t> outside_popularity) {
  std::vector<geo::GeoPoint> loc;
  std::vector<std::uint64_t> pop;
  for (std::size_t i = 0; i < in_cell; ++i) {
    loc.push_back({10.1 + 0.3 * static_cast<double>(i % 30) / 30.0, 10.1 + 0.3 * static_cast<double>(i / 30) / 30.0});
    pop.push_back(1);
  }
  for (std::size_t i = 0; i < outside_popularity.size(); ++i) {
    loc.push_back({-30.0 - static_cast<double>(i), 50.0});
    pop.push_back(outside_popularity[i]);
  }
  std::vector<std::uint8_t> observed(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) observed[i] = pop[i] > 0;
  return NegativeSampler(geo::CityIndex::build(loc, 0.5, observed), loc, pop);
}

}  // namespace

TEST(NegativeSampler, LargeCellStaysInCell) {
  const auto s = grid_sampler(600, std::vector<std::uint64_t>(50, 3));
  Rng rng(1);
  const auto neg = s.sample(PoiIdx{7}, 500, rng);
  ASSERT_EQ(neg.size(), 500u);
  std::set<PoiIdx> unique(neg.begin(), neg.end());
  EXPECT_EQ(unique.size(), 500u);
  EXPECT_FALSE(unique.contains(PoiIdx{7}));
  for (auto p : neg) EXPECT_LT(p.get(), 600u);
}

TEST(NegativeSampler, SmallCellFallsBackToPopularity) {
  const auto s = grid_sampler(3, std::vector<std::uint64_t>(600, 2));
  Rng rng(2);
  const auto neg = s.sample(PoiIdx{0}, 500, rng);
  ASSERT_EQ(neg.size(), 500u);
  std::size_t in_cell = 0;
  for (auto p : neg) in_cell += p.get() < 3;
  EXPECT_EQ(in_cell, 2u);
  EXPECT_EQ(std::set<PoiIdx>(neg.begin(), neg.end()).size(), 500u);
}

TEST(NegativeSampler, FillFollowsPopularity) {
  // One in-cell POI (the positive), so the single negative comes from the
  // popularity fill over weights 1, 2, 7.
  const auto s = grid_sampler(1, {1, 2, 7});
  Rng rng(3);
  std::map<std::size_t, double> hits;
  const int n = 20000;
  for (int i = 0; i < n; ++i) hits[s.sample(PoiIdx{0}, 1, rng)[0].get()] += 1.0;
  for (auto [poi, w] : std::map<std::size_t, double>{{1, 0.1}, {2, 0.2}, {3, 0.7}}) {
    EXPECT_LT(std::abs(hits[poi] - n * w), 4.0 * std::sqrt(n * w * (1 - w))) << poi;
  }
}

TEST(NegativeSampler, DeterministicAndShortfall) {
  const auto s = grid_sampler(5, {4, 0, 1});
  Rng a(9), b(9);
  EXPECT_EQ(s.sample(PoiIdx{1}, 4, a), s.sample(PoiIdx{1}, 4, b));
  EXPECT_EQ(s.observed_count(), 7u);
  Rng rng(4);
  const auto neg = s.sample(PoiIdx{1}, 100, rng);
  EXPECT_EQ(neg.size(), 6u);
  EXPECT_EQ(std::count(neg.begin(), neg.end(), PoiIdx{6}), 0);  // popularity 0: never observed
  EXPECT_EQ(s.shortfall_count(), 1u);
  s.sample(PoiIdx{1}, 100, rng);
  EXPECT_EQ(s.shortfall_count(), 2u);
}

TEST(Instances, EnumerationAndHistory) {
  const auto ds = small_dataset();
  const auto sampler = sampler_for(ds);
  const auto inst = build_instances(ds, sampler, {3, 200, 5});
  // 2 + 1 + 1 targets.
  ASSERT_EQ(inst.size(), 4u);
  std::vector<std::size_t> stc_of_user0;
  for (const auto& i : inst) {
    if (i.user == UserIdx{0}) stc_of_user0.push_back(i.stc.size());
  }
  EXPECT_EQ(stc_of_user0, (std::vector<std::size_t>{1, 2}));
  for (const auto& i : inst) {
    EXPECT_FALSE(std::count(i.negatives.begin(), i.negatives.end(), i.positive));
    for (auto n : i.negatives) EXPECT_GT(ds.poi_popularity[n.get()], 0u);
    for (const auto& c : i.ltsc) EXPECT_LT(c.time, i.prediction_time);
    if (i.user == UserIdx{2}) {
      // Friendless: own prior check-ins only.
      ASSERT_EQ(i.ltsc.size(), 1u);
      EXPECT_EQ(i.ltsc[0].user, UserIdx{2});
    }
  }
  // User 0 predicting POI 2 at t=3000 sees own 1000, 2000 and friend 1500, 2500.
  const auto& last = *std::find_if(inst.begin(), inst.end(), [](auto& i) { return i.positive == PoiIdx{2}; });
  EXPECT_EQ(last.ltsc.size(), 4u);
  EXPECT_EQ(build_instances(ds, sampler, {3, 200, 5})[1].negatives, inst[1].negatives);
}

TEST(Instances, HistoryLimitPerOwnerGroup) {
  const auto ds = small_dataset();
  const auto inst = build_instances(ds, sampler_for(ds), {2, 1, 5});
  for (const auto& i : inst) {
    std::size_t own = 0, friends = 0;
    for (const auto& c : i.ltsc) (c.user == i.user ? own : friends)++;
    EXPECT_LE(own, 1u);
    EXPECT_LE(friends, 1u);
  }
}

TEST(Instances, NoTestLeakage) {
  const auto fx = fixtures::make_planted(3, 20);
  auto ds = ingest::split_dataset(ingest::filter_dataset(fx.checkins, fx.edges, {1, 1, 1, 6.0}), 0.8);
  std::set<std::tuple<std::size_t, std::int64_t, std::size_t>> test_keys;
  for (const auto& t : ds.test) {
    for (const auto& c : t.checkins) test_keys.insert({c.user.get(), c.time.time_since_epoch().count(), c.poi.get()});
  }
  auto key = [](const ingest::CheckIn& c) {
    return std::tuple{c.user.get(), c.time.time_since_epoch().count(), c.poi.get()};
  };
  const auto sampler = sampler_for(ds);
  for (const auto& i : build_instances(ds, sampler, {10, 16, 1})) {
    for (const auto& c : i.stc) EXPECT_FALSE(test_keys.contains(key(c)));
    for (const auto& c : i.ltsc) EXPECT_FALSE(test_keys.contains(key(c)));
  }
  // Evaluation history may use earlier test check-ins, never later ones.
  bool uses_test = false;
  for (const auto& i : build_eval_instances(ds, sampler, {10, 16, 1})) {
    for (const auto& c : i.ltsc) {
      EXPECT_LT(c.time, i.prediction_time);
      uses_test |= test_keys.contains(key(c));
    }
  }
  EXPECT_TRUE(uses_test);
}

TEST(BprLoss, SpotValuesAndAsymptotics) {
  EXPECT_NEAR(bpr_pair_loss(0.3, 0.3), std::log(2.0), 1e-15);
  EXPECT_NEAR(bpr_pair_loss(std::log(3.0), 0.0), std::log(4.0 / 3.0), 1e-15);
  EXPECT_NEAR(bpr_pair_loss(800.0, 0.0), 0.0, 1e-300);
  EXPECT_NEAR(bpr_pair_loss(-800.0, 0.0), 800.0, 1e-12);
  EXPECT_NEAR(bpr_pair_grad(0.0), -0.5, 1e-15);
  for (double m = -30.0; m <= 30.0; m += 0.5) {
    const double h = 1e-5;
    const double fd = (bpr_pair_loss(m + h, 0) - bpr_pair_loss(m - h, 0)) / (2 * h);
    EXPECT_NEAR(bpr_pair_grad(m), fd, 1e-8) << m;
  }
}

TEST(LearningRate, ScheduleFormula) {
  TrainConfig c;
  c.lr0 = 0.01;
  c.decay = 0.5;
  c.decay_steps = 10;
  EXPECT_EQ(learning_rate(c, 0), 0.01);
  EXPECT_EQ(learning_rate(c, 9), 0.01);
  EXPECT_EQ(learning_rate(c, 10), 0.005);
  EXPECT_EQ(learning_rate(c, 25), 0.0025);
  TrainConfig d;
  for (std::uint64_t s = 1; s < 5000; s += 7) EXPECT_LE(learning_rate(d, s), learning_rate(d, s - 1));
}

TEST(Adam, ZeroGradientAndFirstStep) {
  auto p = fixtures::random_params(fixtures::tiny_config(), 2, 3, 4, 1);
  const auto before = p.trainable;
  Adam adam(p.trainable);
  adam.step(p.trainable, p.trainable.zeros_like(), 0.01);
  EXPECT_EQ(p.trainable, before);

  Adam fresh(p.trainable);
  auto g = p.trainable.zeros_like();
  g.w_poi(0, 0) = 3.0;
  g.w_poi(1, 1) = -0.02;
  fresh.step(p.trainable, g, 0.01);
  EXPECT_NEAR(p.trainable.w_poi(0, 0) - before.w_poi(0, 0), -0.01, 1e-8);
  EXPECT_NEAR(p.trainable.w_poi(1, 1) - before.w_poi(1, 1), 0.01, 1e-8);
  EXPECT_EQ(p.trainable.w_user, before.w_user);
}

TEST(Adam, NonFiniteGradientAborts) {
  auto p = fixtures::random_params(fixtures::tiny_config(), 2, 3, 4, 2);
  const auto before = p.trainable;
  Adam adam(p.trainable);
  auto g = p.trainable.zeros_like();
  g.time_table(0, 0) = std::nan("");
  try {
    adam.step(p.trainable, g, 0.01);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("time_table"), std::string::npos);
  }
  EXPECT_EQ(p.trainable, before);
}

namespace {

struct Setup {
  ingest::Dataset ds;
  std::vector<model::TrainingInstance> instances;
  model::ModelParams init;
};

Setup planted_setup() {
  const auto fx = fixtures::make_planted(5, 12);
  Setup s;
  s.ds = ingest::split_dataset(ingest::filter_dataset(fx.checkins, fx.edges, {1, 1, 1, 6.0}), 0.8);
  s.instances = build_instances(s.ds, sampler_for(s.ds), {8, 8, 3});
  auto cfg = fixtures::tiny_config();
  s.init = fixtures::random_params(cfg, s.ds.user_count(), s.ds.poi_count(), 4, 7);
  return s;
}

}  // namespace

TEST(Train, ZeroIterationsReturnsInitialization) {
  const auto s = planted_setup();
  TrainConfig c;
  c.max_iters = 0;
  const auto r = train::train(s.init, s.instances, c);
  EXPECT_EQ(r.params.trainable, s.init.trainable);
  EXPECT_TRUE(r.history.empty());
  c.max_iters = 1;
  EXPECT_THROW(train::train(s.init, {}, c), std::invalid_argument);
}

TEST(Train, FirstStepLossIsPairSumPlusRegularizer) {
  const auto s = planted_setup();
  TrainConfig c;
  c.batch_size = s.instances.size();
  c.max_iters = 1;
  c.lambda = 0.01;
  const auto r = train::train(s.init, s.instances, c);
  double expected = 0.0;
  std::vector<std::size_t> order(s.instances.size());
  std::iota(order.begin(), order.end(), 0);
  for (const auto& inst : s.instances) expected += instance_loss(s.init, inst, 0, nullptr);
  expected += 0.5 * c.lambda * s.init.trainable.squared_norm();
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_NEAR(r.history[0].loss, expected, 1e-9 * expected);
  EXPECT_EQ(r.history[0].step, 1u);
  EXPECT_EQ(r.history[0].lr, c.lr0);
}

TEST(Train, InstanceLossGradientMatchesFiniteDifferences) {
  auto s = planted_setup();
  const auto& inst = s.instances[3];
  auto grads = s.init.trainable.zeros_like();
  instance_loss(s.init, inst, 4, &grads);
  auto named = s.init.trainable.named();
  const auto g = grads.named();
  const auto eval = [&] { return instance_loss(s.init, inst, 4, nullptr); };
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto r = num::compare_with_finite_differences(eval, *named[i].second, *g[i].second);
    EXPECT_LT(r.max_relative_error, 1e-4) << named[i].first;
  }
}

TEST(Train, EqualSeedsGiveIdenticalHistory) {
  const auto s = planted_setup();
  TrainConfig c;
  c.batch_size = 7;
  c.max_iters = 15;
  c.lr0 = 0.01;
  const auto a = train::train(s.init, s.instances, c);
  const auto b = train::train(s.init, s.instances, c);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.params.trainable, b.params.trainable);
  c.threads = 3;
  const auto t1 = train::train(s.init, s.instances, c);
  const auto t2 = train::train(s.init, s.instances, c);
  EXPECT_EQ(t1.history, t2.history);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_NEAR(t1.history[i].loss, a.history[i].loss, 1e-9 * a.history[i].loss);
  }
}

TEST(Train, LossDropsOnPlantedFixture) {
  const auto s = planted_setup();
  TrainConfig c;
  c.batch_size = 20;
  c.max_iters = 200;
  c.lr0 = 0.01;
  const auto r = train::train(s.init, s.instances, c);
  double first = 0, last = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    first += r.history[i].loss;
    last += r.history[190 + i].loss;
  }
  EXPECT_LT(last, 0.5 * first);
}

TEST(Train, CheckpointsAndDivergence) {
  const auto s = planted_setup();
  TrainConfig c;
  c.batch_size = 5;
  c.max_iters = 50;
  c.checkpoint_every = 1;
  c.lr0 = 1e200;
  c.lambda = 1.0;
  std::vector<std::uint64_t> steps;
  EXPECT_THROW(train::train(s.init, s.instances, c, nullptr, [&](const auto&, std::uint64_t st) { steps.push_back(st); }),
               NumericalError);
  ASSERT_FALSE(steps.empty());
  EXPECT_EQ(steps.front(), 1u);
  EXPECT_LT(steps.size(), 50u);
}

TEST(Train, ResamplingNeedsSampler) {
  const auto s = planted_setup();
  TrainConfig c;
  c.max_iters = 2;
  c.resample_each_epoch = true;
  EXPECT_THROW(train::train(s.init, s.instances, c), std::invalid_argument);
  const auto sampler = sampler_for(s.ds);
  c.batch_size = s.instances.size();
  EXPECT_NO_THROW(train::train(s.init, s.instances, c, &sampler));
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.decay = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
