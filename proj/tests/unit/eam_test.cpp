#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <set>

#include "mspm/data/synthetic.hpp"
#include "mspm/eam/dqn.hpp"
#include "mspm/eam/env.hpp"
#include "mspm/eam/qnetwork.hpp"
#include "mspm/eam/signals.hpp"
#include "mspm/eam/trainer.hpp"
#include "support/gradcheck.hpp"
#include "support/mdp.hpp"
#include "support/scenarios.hpp"

namespace mspm::eam {
namespace {

MarketData flat_market(std::size_t len, double price = 1.0) {
  MarketData m;
  m.symbol = "FLAT";
  Date d(2020, 1, 1);
  for (std::size_t i = 0; i < len; ++i) {
    m.dates.push_back(d);
    d = d.plus_days(1);
    m.open.push_back(price);
    m.high.push_back(price);
    m.low.push_back(price);
    m.close.push_back(price);
    m.volume.push_back(1.0);
    m.sentiment.push_back(0.0);
    m.news_buzz.push_back(1.0);
  }
  return m;
}

MarketData random_market(std::size_t len, std::uint64_t seed) {
  auto spec = testing::periodic_market(1, len, seed);
  spec.window = 5;
  return MarketData::from_series(data::generate_synthetic(spec)[0]);
}

TEST(EnvReset, SingleValidStartIsForced) {
  const std::size_t n = 10;
  auto m = flat_market(n + 1);
  TradingEnv env(m, {n, 1, 0.0025, 100});
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(env.reset(rng).index, n - 1);
}

TEST(EnvReset, TooShortSeriesThrows) {
  auto m = flat_market(10);
  EXPECT_THROW(TradingEnv(m, {10, 1, 0.0025, 100}), DataError);
}

TEST(EnvReset, StartsAreUniformByChiSquare) {
  auto m = flat_market(60);
  TradingEnv env(m, {10, 30, 0.0025, 100});
  const std::size_t k = env.last_start() - env.first_start() + 1;
  std::vector<double> counts(k, 0.0);
  std::mt19937_64 rng(42);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) counts[env.reset(rng).index - env.first_start()] += 1;
  const double expected = static_cast<double>(draws) / static_cast<double>(k);
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  boost::math::chi_squared dist(static_cast<double>(k - 1));
  EXPECT_LT(chi2, boost::math::quantile(dist, 0.95));
}

TEST(EnvReset, SameSeedSameStart) {
  auto m = flat_market(500);
  TradingEnv a(m, {10, 50, 0.0025, 100}), b(m, {10, 50, 0.0025, 100});
  std::mt19937_64 r1(7), r2(7);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(a.reset(r1), b.reset(r2));
}

TEST(EnvStep, SkipWhileFlatEarnsNothing) {
  auto m = random_market(200, 3);
  TradingEnv env(m, {10, 50, 0.0025, 100});
  env.reset_at(20);
  auto r = env.step(TradeAction::Skip);
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_EQ(r.taken, TradeAction::Skip);
}

TEST(EnvStep, HoldingEarnsScaledReturn) {
  auto m = flat_market(30);
  m.close[12] = 1.02;
  TradingEnv env(m, {10, 10, 0.0025, 100});
  env.reset_at(10);
  EXPECT_NEAR(env.step(TradeAction::Buy).reward, -0.25, 1e-12);
  // Mid-hold step from close 1.0 to 1.02.
  EXPECT_NEAR(env.step(TradeAction::Skip).reward, 2.0, 1e-12);
}

TEST(EnvStep, RoundTripOnFlatPricesCostsTwoCommissions) {
  auto m = flat_market(30);
  TradingEnv env(m, {10, 10, 0.0025, 100});
  env.reset_at(10);
  double total = env.step(TradeAction::Buy).reward;
  total += env.step(TradeAction::Close).reward;
  EXPECT_NEAR(total, -0.5, 1e-12);
  ASSERT_EQ(env.ledger().trades().size(), 1u);
}

TEST(EnvStep, IllegalActionsDegradeToSkip) {
  auto m = flat_market(30);
  TradingEnv env(m, {10, 10, 0.0025, 100});
  env.reset_at(10);
  auto r = env.step(TradeAction::Close);
  EXPECT_EQ(r.taken, TradeAction::Skip);
  EXPECT_EQ(r.reward, 0.0);
  env.step(TradeAction::Buy);
  r = env.step(TradeAction::Buy);
  EXPECT_EQ(r.taken, TradeAction::Skip);
  EXPECT_TRUE(env.ledger().open());
}

TEST(EnvStep, EpisodeEndsAfterHorizon) {
  auto m = flat_market(40);
  TradingEnv env(m, {10, 5, 0.0025, 100});
  env.reset_at(12);
  for (int i = 0; i < 4; ++i) EXPECT_FALSE(env.step(TradeAction::Skip).done);
  EXPECT_TRUE(env.step(TradeAction::Skip).done);
}

TEST(EnvProperties, LedgerLegalityAndRewardDecomposition) {
  auto m = random_market(400, 11);
  const EnvConfig cfg{10, 300, 0.0025, 100};
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    TradingEnv env(m, cfg);
    env.reset(rng);
    std::vector<double> rewards;
    std::vector<std::size_t> idx;
    bool open = false;
    bool done = false;
    while (!done) {
      idx.push_back(env.observation().index);
      auto r = env.step(static_cast<TradeAction>(std::uniform_int_distribution<int>(0, 2)(rng)));
      if (r.taken == TradeAction::Buy) {
        ASSERT_FALSE(open);
        open = true;
      } else if (r.taken == TradeAction::Close) {
        ASSERT_TRUE(open);
        open = false;
      }
      rewards.push_back(r.reward);
      done = r.done;
    }
    // Sum of rewards over each closed position: 100 * (sum of daily returns - 2 beta).
    for (const auto& t : env.ledger().trades()) {
      double got = 0.0;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] >= t.entry_index && idx[k] <= t.exit_index) got += rewards[k];
      }
      double want = 0.0;
      for (std::size_t s = t.entry_index + 1; s <= t.exit_index; ++s) want += m.close[s] / m.close[s - 1] - 1.0;
      EXPECT_NEAR(got, 100.0 * (want - 2 * cfg.commission), 1e-9);
    }
  }
}

TEST(EpsilonGreedy, GreedyPicksMaxWithLowestIndexTies) {
  std::mt19937_64 rng(0);
  EXPECT_EQ(act_epsilon_greedy(std::vector<double>{1, 3, 2}, 0.0, rng), 1);
  EXPECT_EQ(act_epsilon_greedy(std::vector<double>{5, 5, 1}, 0.0, rng), 0);
}

TEST(EpsilonGreedy, FullExplorationIsUniform) {
  std::mt19937_64 rng(123);
  std::vector<int> counts(3, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[act_epsilon_greedy(std::vector<double>{0, 10, 0}, 1.0, rng)];
  const double p = 1.0 / 3, sd = std::sqrt(draws * p * (1 - p));
  for (int c : counts) EXPECT_LT(std::abs(c - draws * p), 3 * sd);
}

TEST(EpsilonSchedule, LinearThenFlat) {
  EpsilonSchedule s{1.0, 0.02, 100};
  EXPECT_DOUBLE_EQ(s.at(0), 1.0);
  EXPECT_NEAR(s.at(50), 0.51, 1e-12);
  EXPECT_DOUBLE_EQ(s.at(100), 0.02);
  EXPECT_DOUBLE_EQ(s.at(5000), 0.02);
}

TEST(QValues, ZeroAdvantageGivesEqualValues) {
  QNetworkConfig cfg;
  cfg.window = 8;
  cfg.stem_channels = 4;
  cfg.dense_width = 6;
  EamQNetwork net(cfg);
  net.initialize(3);
  auto& head = dynamic_cast<nn::DuelingHead&>(net.head().layer(2));
  head.advantage_weight().fill(0.0);
  head.advantage_bias().fill(0.0);
  auto m = random_market(50, 2);
  auto q = net.forward(make_state(m, {20, false, 0}, cfg));
  EXPECT_EQ(q[0], q[1]);
  EXPECT_EQ(q[1], q[2]);
}

TEST(QValues, HandSetWeightsMatchManualForward) {
  // dense(2 -> 2) with relu, then dueling to 3 actions.
  nn::Graph g({2});
  g.dense(2).relu().dueling(3);
  auto& d = dynamic_cast<nn::Dense&>(g.layer(0));
  d.weight() = nn::Tensor({2, 2}, {1, 2, -1, 1});
  d.bias() = nn::Tensor::vector({0.5, 0});
  auto& h = dynamic_cast<nn::DuelingHead&>(g.layer(2));
  h.value_weight() = nn::Tensor({1, 2}, {1, 1});
  h.value_bias() = nn::Tensor::vector({0.25});
  h.advantage_weight() = nn::Tensor({3, 2}, {1, 0, 0, 1, 2, -1});
  h.advantage_bias() = nn::Tensor::vector({0, 0, 0.3});
  auto q = g.forward(nn::Tensor::vector({1, -2}));
  // hidden = relu([1-4+0.5, -1-2]) = [0, 0]; V = 0.25; A = [0, 0, 0.3], mean 0.1.
  EXPECT_NEAR(q[0], 0.15, 1e-15);
  EXPECT_NEAR(q[1], 0.15, 1e-15);
  EXPECT_NEAR(q[2], 0.45, 1e-15);
  auto q2 = g.forward(nn::Tensor::vector({1, 1}));
  // hidden = [3.5, 0]; V = 3.75; A = [3.5, 0, 7.3], mean 3.6.
  EXPECT_NEAR(q2[0], 3.65, 1e-12);
  EXPECT_NEAR(q2[1], 0.15, 1e-12);
  EXPECT_NEAR(q2[2], 7.45, 1e-12);
}

TEST(QValues, AdvantageShiftKeepsArgmax) {
  QNetworkConfig cfg;
  cfg.window = 8;
  cfg.stem_channels = 4;
  cfg.dense_width = 6;
  EamQNetwork net(cfg);
  net.initialize(9);
  auto m = random_market(60, 4);
  auto s = make_state(m, {30, true, 3}, cfg);
  auto before = net.forward(s);
  auto& head = dynamic_cast<nn::DuelingHead&>(net.head().layer(2));
  for (std::size_t a = 0; a < 3; ++a) head.advantage_bias()[a] += 4.0;
  auto after = net.forward(s);
  for (std::size_t a = 0; a < 3; ++a) EXPECT_NEAR(before[a], after[a], 1e-10);
  EXPECT_EQ(argmax(before), argmax(after));
}

TEST(QValues, NetworkGradientsMatchFiniteDifferences) {
  QNetworkConfig cfg;
  cfg.window = 6;
  cfg.stem_channels = 3;
  cfg.residual_blocks = 1;
  cfg.dense_width = 5;
  EamQNetwork net(cfg);
  net.initialize(21);
  auto m = random_market(40, 8);
  auto s = make_state(m, {20, true, 2}, cfg);
  nn::Tensor r = nn::Tensor::vector({0.3, -1.1, 0.7});
  auto loss = [&] {
    auto q = net.forward(s);
    return 0.3 * q[0] - 1.1 * q[1] + 0.7 * q[2];
  };
  net.zero_grad();
  EamQNetwork::Cache c;
  net.forward(s, c);
  net.backward(r, c);
  std::vector<double> analytic, numeric;
  auto params = net.parameters();
  auto grads = net.gradients();
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t j = 0; j < params[k]->size(); ++j) {
      double& w = (*params[k])[j];
      const double saved = w;
      w = saved + 1e-5;
      const double up = loss();
      w = saved - 1e-5;
      const double down = loss();
      w = saved;
      analytic.push_back((*grads[k])[j]);
      numeric.push_back((up - down) / 2e-5);
    }
  }
  EXPECT_LT(testing::relative_error(analytic, numeric), 1e-4);
}

TEST(StateWindow, EndsAtCurrentStepAndIsScaled) {
  auto m = random_market(80, 6);
  QNetworkConfig cfg;
  cfg.window = 10;
  auto s = make_state(m, {40, true, 4}, cfg);
  EXPECT_EQ(s.window.shape(), (nn::Shape{5, 10}));
  EXPECT_EQ(s.sentiment_window.shape(), (nn::Shape{2, 10}));
  EXPECT_EQ(s.window(0, 9), 0.0);
  EXPECT_NEAR(s.window(0, 8), 10.0 * (m.close[39] / m.close[40] - 1.0), 1e-12);
  EXPECT_NEAR(s.sentiment_window(0, 9), m.sentiment[40] / 5.0, 1e-15);
  EXPECT_THROW(make_state(m, {8, false, 0}, cfg), DataError);
}

TEST(Replay, CapacityAndDistinctSamples) {
  ReplayBuffer<int> buf(50);
  for (int i = 0; i < 120; ++i) buf.push({i, 0, 0.0, i + 1, false, 1});
  EXPECT_EQ(buf.size(), 50u);
  std::set<int> states;
  for (std::size_t i = 0; i < buf.size(); ++i) states.insert(buf[i].state);
  EXPECT_EQ(*states.begin(), 70);
  std::mt19937_64 rng(2);
  for (int k = 0; k < 100; ++k) {
    auto idx = buf.sample_indices(50, rng);
    EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 50u);
  }
  EXPECT_THROW(buf.sample_indices(51, rng), Error);
}

TEST(Replay, SamplingIsUniform) {
  ReplayBuffer<int> buf(20);
  for (int i = 0; i < 20; ++i) buf.push({i, 0, 0.0, 0, false, 1});
  std::mt19937_64 rng(8);
  std::vector<double> counts(20, 0);
  const int rounds = 20000;
  for (int k = 0; k < rounds; ++k) {
    for (auto i : buf.sample_indices(5, rng)) counts[i] += 1;
  }
  const double expected = rounds * 5.0 / 20.0;
  double chi2 = 0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, boost::math::quantile(boost::math::chi_squared(19.0), 0.999));
}

TEST(NStep, AggregatesTwoDiscountedRewardsAndFlushes) {
  NStepAccumulator<int> acc(2, 0.5);
  std::vector<Transition<int>> out;
  auto sink = [&](Transition<int> t) { out.push_back(t); };
  acc.add(0, 1, 1.0, 1, false, false, sink);
  EXPECT_TRUE(out.empty());
  acc.add(1, 0, 2.0, 2, false, false, sink);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].state, 0);
  EXPECT_EQ(out[0].next_state, 2);
  EXPECT_DOUBLE_EQ(out[0].reward, 2.0);
  EXPECT_EQ(out[0].steps, 2);
  acc.add(2, 2, 4.0, 3, true, true, sink);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_DOUBLE_EQ(out[1].reward, 2.0 + 0.5 * 4.0);
  EXPECT_TRUE(out[1].terminal);
  EXPECT_EQ(out[2].steps, 1);
  EXPECT_DOUBLE_EQ(out[2].reward, 4.0);
}

nn::Graph linear_q(std::vector<double> weights) {
  nn::Graph g({2});
  g.dense(2);
  dynamic_cast<nn::Dense&>(g.layer(0)).weight() = nn::Tensor({2, 2}, std::move(weights));
  return g;
}

TEST(DqnTarget, TerminalAndZeroDiscountUseRewardOnly) {
  DqnLearner<nn::Graph> learner(linear_q({1, 2, 3, 4}), {0.9, 0.0, 1.0, 0.0});
  Transition<nn::Tensor> t{nn::Tensor::vector({1, 0}), 0, 1.7, nn::Tensor::vector({1, 1}), true, 2};
  auto id = [](const nn::Tensor& x) { return x; };
  EXPECT_DOUBLE_EQ(learner.targets<nn::Tensor>({&t}, id)[0], 1.7);

  DqnLearner<nn::Graph> myopic(linear_q({1, 2, 3, 4}), {0.0, 0.0, 1.0, 0.0});
  t.terminal = false;
  t.steps = 1;
  EXPECT_DOUBLE_EQ(myopic.targets<nn::Tensor>({&t}, id)[0], 1.7);
}

TEST(DqnTarget, OnlineSelectsTargetEvaluates) {
  // Online prefers action 1 at s'' = (1,1); target prefers action 0.
  DqnLearner<nn::Graph> learner(linear_q({0, 0, 1, 1}), {0.5, 0.0, 1.0, 0.0});
  dynamic_cast<nn::Dense&>(learner.target().layer(0)).weight() = nn::Tensor({2, 2}, {5, 5, 1, 2});
  Transition<nn::Tensor> t{nn::Tensor::vector({1, 0}), 0, 1.0, nn::Tensor::vector({1, 1}), false, 2};
  auto id = [](const nn::Tensor& x) { return x; };
  // Target net at s'': [10, 3]; online argmax is 1 -> 1 + 0.25 * 3.
  EXPECT_DOUBLE_EQ(learner.targets<nn::Tensor>({&t}, id)[0], 1.75);
}

TEST(DqnTarget, TwoStateMdpMatchesValueIteration) {
  EXPECT_LT(testing::TwoStateMdp::train_and_measure(0.9, 1), 1e-6);
}

TEST(DqnLearner, NonFiniteLossAborts) {
  DqnLearner<nn::Graph> learner(linear_q({1, 0, 0, 1}), {0.9, 0.1, 1.0, 0.0});
  Transition<nn::Tensor> t{nn::Tensor::vector({1, 0}), 0, NAN, nn::Tensor::vector({1, 1}), true, 1};
  auto id = [](const nn::Tensor& x) { return x; };
  EXPECT_THROW(learner.train_batch<nn::Tensor>({&t}, id), NumericalError);
}

EamHyperparams tiny_hp() {
  auto hp = testing::small_eam_hyperparams();
  hp.window = hp.network.window = 10;
  hp.episode_length = 30;
  hp.episodes = 4;
  hp.warmup = 40;
  hp.batch_size = 8;
  hp.network.stem_channels = 3;
  hp.network.dense_width = 8;
  return hp;
}

TEST(TrainEam, ZeroLearningRateKeepsInitialParameters) {
  auto m = random_market(200, 1);
  auto hp = tiny_hp();
  hp.learning_rate = 0.0;
  auto res = train_eam(m, hp, 5);
  EamQNetwork init(hp.network);
  init.initialize(5);
  auto a = res.model.parameters(), b = init.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i], *b[i]);
  EXPECT_GT(res.log.back().loss, 0.0);
}

TEST(TrainEam, DeterministicUnderSeed) {
  auto m = random_market(200, 1);
  auto hp = tiny_hp();
  auto a = train_eam(m, hp, 9), b = train_eam(m, hp, 9);
  EXPECT_EQ(training_log_csv(a.log), training_log_csv(b.log));
  auto pa = a.model.parameters(), pb = b.model.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i], *pb[i]);
}

TEST(TrainEam, TransferStartsFromDonorParameters) {
  auto m = random_market(200, 1);
  auto hp = tiny_hp();
  auto donor = train_eam(m, hp, 3);
  auto ckpt = nn::make_checkpoint(donor.model, 3, hp.episodes);
  hp.episodes = 0;
  auto fresh = train_eam(m, hp, 77, &ckpt);
  auto a = donor.model.parameters(), b = fresh.model.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i], *b[i]);
}

TEST(TrainEam, LogCsvHeader) {
  EXPECT_EQ(training_log_csv({{0, 10, 1.5, 0.25}}), "episode,steps,total_reward,loss\n0,10,1.5,0.25\n");
}

TEST(Signals, SkipPreferringModelEmitsZeros) {
  auto hp = tiny_hp();
  EamQNetwork net(hp.network);
  net.initialize(1);
  auto& head = dynamic_cast<nn::DuelingHead&>(net.head().layer(2));
  head.advantage_weight().fill(0.0);
  head.advantage_bias() = nn::Tensor::vector({0, 0, 1});
  auto m = random_market(100, 2);
  auto f = generate_signals(net, m, 9, hp.network);
  EXPECT_EQ(f.size(), 91u);
  for (int s : f.signal) EXPECT_EQ(s, 0);
}

TEST(Signals, RandomModelsEmitLegalSequences) {
  auto hp = tiny_hp();
  auto m = random_market(150, 5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EamQNetwork net(hp.network);
    net.initialize(seed);
    auto f = generate_signals(net, m, 9, hp.network);
    int open = 0;
    for (int s : f.signal) {
      ASSERT_TRUE(s == -1 || s == 0 || s == 1);
      if (s == 1) ASSERT_EQ(open++, 0);
      if (s == -1) ASSERT_EQ(open--, 1);
    }
    EXPECT_NO_THROW(position_report(f));
    EXPECT_EQ(f, generate_signals(net, m, 9, hp.network));
  }
}

TEST(Signals, InsufficientHistoryThrows) {
  auto hp = tiny_hp();
  EamQNetwork net(hp.network);
  auto m = random_market(100, 2);
  EXPECT_THROW(generate_signals(net, m, 8, hp.network), DataError);
}

TEST(Signals, CsvRoundTrip) {
  auto hp = tiny_hp();
  EamQNetwork net(hp.network);
  net.initialize(4);
  auto m = random_market(60, 2);
  auto f = generate_signals(net, m, 9, hp.network);
  auto csv = signal_frame_csv(f);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "date,open,high,low,close,volume,signal");
  EXPECT_EQ(parse_signal_frame_csv(csv, f.symbol), f);
}

SignalFrame frame_from(std::vector<double> closes, std::vector<int> signals) {
  SignalFrame f;
  f.symbol = "X";
  Date d(2021, 1, 4);
  for (std::size_t i = 0; i < closes.size(); ++i) {
    f.dates.push_back(d);
    d = d.plus_days(1);
    f.open.push_back(closes[i]);
    f.high.push_back(closes[i]);
    f.low.push_back(closes[i]);
    f.close.push_back(closes[i]);
    f.volume.push_back(1);
  }
  f.signal = std::move(signals);
  return f;
}

TEST(PositionReport, NoBuysNoPositions) {
  auto r = position_report(frame_from({1, 2, 3}, {0, 0, 0}));
  EXPECT_EQ(r.positions, 0u);
  EXPECT_EQ(r.winning_rate_pct, 0.0);
}

TEST(PositionReport, SingleWinningPosition) {
  auto r = position_report(frame_from({1.0, 1.05, 1.1}, {1, 0, -1}));
  ASSERT_EQ(r.positions, 1u);
  EXPECT_EQ(r.winning, 1u);
  EXPECT_DOUBLE_EQ(r.winning_rate_pct, 100.0);
  EXPECT_NEAR(r.detail[0].arr_pct, 10.0, 1e-12);
}

TEST(PositionReport, MixedAndOpenAtEnd) {
  auto r = position_report(frame_from({1, 0.9, 1, 1.2, 1.1, 1.3}, {1, -1, 1, -1, 1, 0}));
  EXPECT_EQ(r.positions, 2u);
  EXPECT_EQ(r.winning, 1u);
  EXPECT_DOUBLE_EQ(r.winning_rate_pct, 50.0);
  EXPECT_TRUE(r.open_at_end);
  EXPECT_THROW(position_report(frame_from({1, 1}, {-1, 0})), DataError);
}

}  // namespace
}  // namespace mspm::eam
