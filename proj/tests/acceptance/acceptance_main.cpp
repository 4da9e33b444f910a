// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
// Usage: acceptance [id ...]   (no ids = all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "mspm/baselines/baselines.hpp"
#include "mspm/eam/signals.hpp"
#include "mspm/eam/trainer.hpp"
#include "mspm/metrics/performance.hpp"
#include "mspm/metrics/stability.hpp"
#include "mspm/metrics/stats_tests.hpp"
#include "mspm/nn/functional.hpp"
#include "mspm/pipeline/report.hpp"
#include "mspm/sam/trainer.hpp"
#include "support/gradcheck.hpp"
#include "support/mdp.hpp"
#include "support/scenarios.hpp"

using namespace mspm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  /// Wall-clock budget in seconds; 0 = none.
  double budget;
  std::function<Outcome()> run;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

std::vector<double> random_simplex(std::size_t n, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(n);
  double s = 0.0;
  for (auto& v : w) s += (v = e(rng));
  for (auto& v : w) v /= s;
  return w;
}

double rel(double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

// 1 ------------------------------------------------------------------------

Outcome gradient_correctness() {
  std::vector<std::pair<std::string, nn::Graph>> layers;
  auto add = [&](const char* name, nn::Shape in, const std::function<void(nn::Graph&)>& build) {
    nn::Graph g(std::move(in));
    build(g);
    layers.emplace_back(name, std::move(g));
  };
  add("conv1d", {3, 12}, [](nn::Graph& g) { g.conv1d(4, 3, 1, 1); });
  add("conv1d-rows-stride", {2, 3, 11}, [](nn::Graph& g) { g.conv1d(3, 4, 2, 2); });
  add("dense", {2, 5}, [](nn::Graph& g) { g.dense(6); });
  add("relu", {10}, [](nn::Graph& g) { g.relu(); });
  add("residual", {3, 10}, [](nn::Graph& g) {
    g.residual([](nn::Graph& b) { b.conv1d(3, 3, 1, 1).relu().conv1d(3, 3, 1, 1); });
  });
  add("dueling", {7}, [](nn::Graph& g) { g.dueling(3); });
  add("allocation-head", {4, 3, 5}, [](nn::Graph& g) { g.allocation_head(); });
  add("softmax", {6}, [](nn::Graph& g) { g.softmax(); });
  add("mean-pool", {2, 3, 4}, [](nn::Graph& g) { g.mean_pool(); });
  add("q-network-stack", {5, 16}, [](nn::Graph& g) {
    g.conv1d(6, 5, 1, 2).relu();
    g.residual([](nn::Graph& b) { b.conv1d(6, 3, 1, 1).relu().conv1d(6, 3, 1, 1); });
    g.dense(8).relu().dueling(3);
  });
  double worst = 0.0;
  std::string worst_layer;
  int checks = 0;
  for (const auto& [name, proto] : layers) {
    for (int s = 0; s < 20; ++s) {
      nn::Graph g = proto;
      const double e = testing::graph_gradient_error(g, 1000 + s, 1e-5, name == "relu" ? 1e-2 : 0.0);
      ++checks;
      if (!(e <= worst)) {
        worst = e;
        worst_layer = name;
      }
    }
  }
  for (int s = 0; s < 20; ++s) {
    std::mt19937_64 rng(s);
    auto x = testing::random_tensor({5}, rng);
    auto mu = testing::random_tensor({5}, rng);
    const double sigma = 0.3 + 0.1 * s;
    const auto analytic = nn::gaussian_log_prob_grad_mu(x.values(), mu.values(), sigma);
    std::vector<double> numeric(5);
    for (std::size_t i = 0; i < 5; ++i) {
      auto up = mu, down = mu;
      up[i] += 1e-5;
      down[i] -= 1e-5;
      numeric[i] = (nn::gaussian_log_prob(x.values(), up.values(), sigma) -
                    nn::gaussian_log_prob(x.values(), down.values(), sigma)) / 2e-5;
    }
    const double e = testing::relative_error(analytic, numeric);
    ++checks;
    if (!(e <= worst)) {
      worst = e;
      worst_layer = "gaussian-log-prob";
    }
  }
  return {worst < 1e-4, std::to_string(layers.size() + 1) + " layers x 20 seeds (" + std::to_string(checks) +
                            " checks), worst relative error " + sci(worst) + " (" + worst_layer + ")"};
}

// 2 ------------------------------------------------------------------------

Outcome dueling_identity() {
  double worst_identity = 0.0, worst_shift = 0.0;
  bool argmax_stable = true;
  for (int s = 0; s < 200; ++s) {
    std::mt19937_64 rng(s);
    const std::size_t in = 3 + s % 7, actions = 2 + s % 4;
    nn::DuelingHead head(in, actions);
    head.initialize(rng);
    const auto x = testing::random_tensor({in}, rng);
    nn::Activation a;
    const auto q = head.forward(x, a);
    const auto [v, adv] = head.streams(x);
    double mean = 0.0;
    for (std::size_t i = 0; i < actions; ++i) mean += adv[i];
    mean /= static_cast<double>(actions);
    for (std::size_t i = 0; i < actions; ++i) worst_identity = std::max(worst_identity, std::abs(q[i] - (v + adv[i] - mean)));
    const double shift = std::uniform_real_distribution<double>(-50.0, 50.0)(rng);
    for (std::size_t i = 0; i < actions; ++i) head.advantage_bias()[i] += shift;
    const auto q2 = head.forward(x, a);
    for (std::size_t i = 0; i < actions; ++i) worst_shift = std::max(worst_shift, std::abs(q2[i] - q[i]));
    argmax_stable = argmax_stable && eam::argmax(q) == eam::argmax(q2);
  }
  return {worst_identity <= 1e-10 && worst_shift <= 1e-10 && argmax_stable,
          "200 heads: |Q - (V + A - mean A)| <= " + sci(worst_identity) + ", constant shift moves Q by <= " +
              sci(worst_shift) + ", argmax " + (argmax_stable ? "unchanged" : "CHANGED")};
}

// 3 ------------------------------------------------------------------------

Outcome double_dqn_oracle() {
  double worst = 0.0;
  for (double gamma : {0.5, 0.9}) worst = std::max(worst, testing::TwoStateMdp::train_and_measure(gamma, 1));
  return {worst < 1e-6, "2-state MDP, gamma 0.5 and 0.9: max |Q - Q*| = " + sci(worst)};
}

// 4 ------------------------------------------------------------------------

Outcome accounting_oracles() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> yd(0.7, 1.3), beta_d(0.0, 0.01), phi_d(0.0, 0.01);
  double e_drift = 0, e_cost = 0, e_risk = 0, e_reward = 0, e_ledger = 0;
  std::size_t rewards_checked = 0;
  for (int k = 0; k < 10000; ++k) {
    const std::size_t rows = 2 + k % 6;
    const auto a = random_simplex(rows, rng);
    const auto w = random_simplex(rows, rng);
    std::vector<double> y(rows, 1.0);
    for (std::size_t i = 1; i < rows; ++i) y[i] = yd(rng);
    const double beta = beta_d(rng), phi = phi_d(rng);

    // drift: (y * a) / (y . a)
    double g = 0.0;
    for (std::size_t i = 0; i < rows; ++i) g += y[i] * a[i];
    const auto wd = sam::drift_weights(a, y);
    for (std::size_t i = 0; i < rows; ++i) e_drift = std::max(e_drift, std::abs(wd[i] - y[i] * a[i] / g));

    // cost: beta * L1
    double l1 = 0.0;
    for (std::size_t i = 0; i < rows; ++i) l1 += a[i] > w[i] ? a[i] - w[i] : w[i] - a[i];
    e_cost = std::max(e_cost, std::abs(sam::transaction_cost(a, w, beta) - beta * l1));

    // risk penalty over the last n of h vectors
    const std::size_t n = 1 + k % 10, h = n + k % 4;
    std::vector<std::vector<double>> hist(h, std::vector<double>(rows, 1.0));
    for (auto& v : hist)
      for (std::size_t i = 1; i < rows; ++i) v[i] = yd(rng);
    double sigma2 = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      long double sum = 0.0L, sq = 0.0L;
      for (std::size_t s = h - n; s < h; ++s) sum += hist[s][i];
      const long double mean = sum / static_cast<long double>(n);
      for (std::size_t s = h - n; s < h; ++s) sq += (hist[s][i] - mean) * (hist[s][i] - mean);
      sigma2 += static_cast<double>(sq / static_cast<long double>(n));
    }
    e_risk = std::max(e_risk, std::abs(sam::risk_penalty(hist, n) - sigma2));

    // reward: ln(a.y - cost - phi sigma^2)
    const auto r = sam::sam_reward(a, y, w, beta, phi, sigma2);
    const double net = g - beta * l1;
    if (net - phi * sigma2 > 0.0) {
      e_reward = std::max(e_reward, std::abs(r.r_star - std::log(net - phi * sigma2)));
      e_reward = std::max(e_reward, std::abs(r.log_return - std::log(net)));
      ++rewards_checked;
    }

    // ledger: p_t = p_{t-1} (a.y - cost) and p_t = p_0 exp(sum R)
    const std::size_t days = 5 + k % 20;
    sam::AccountingConfig cfg{beta, phi, 3, 10000.0};
    sam::PortfolioSimulator sim(rows, cfg, sam::all_cash(rows));
    double p = cfg.initial_value, sum_r = 0.0;
    std::vector<double> held = sam::all_cash(rows);
    for (std::size_t t = 0; t < days; ++t) {
      const auto at = random_simplex(rows, rng);
      std::vector<double> yt(rows, 1.0);
      for (std::size_t i = 1; i < rows; ++i) yt[i] = yd(rng);
      const auto st = sim.step(Date(2020, 1, 1).plus_days(static_cast<int>(t)), at, yt);
      double gt = 0.0, ct = 0.0;
      for (std::size_t i = 0; i < rows; ++i) {
        gt += at[i] * yt[i];
        ct += std::abs(at[i] - held[i]);
      }
      p *= gt - beta * ct;
      sum_r += st.log_return;
      e_ledger = std::max(e_ledger, rel(sim.value(), p));
      e_ledger = std::max(e_ledger, rel(sim.value(), cfg.initial_value * std::exp(sum_r)));
      for (std::size_t i = 0; i < rows; ++i) held[i] = at[i] * yt[i] / gt;
    }
  }
  const double worst = std::max({e_drift, e_cost, e_risk, e_reward, e_ledger});
  return {worst <= 1e-10 && rewards_checked > 9000,
          "10000 instances: drift " + sci(e_drift) + ", cost " + sci(e_cost) + ", risk " + sci(e_risk) + ", reward " +
              sci(e_reward) + " (" + std::to_string(rewards_checked) + " finite), ledger " + sci(e_ledger)};
}

// 5 ------------------------------------------------------------------------

Outcome simplex_invariants() {
  auto spec = testing::periodic_market(3, 400, 55);
  std::vector<sam::SignalFrame> frames;
  std::mt19937_64 rng(5);
  for (const auto& s : data::generate_synthetic(spec)) {
    auto f = eam::frame_without_signals(eam::MarketData::from_series(s));
    bool open = false;
    for (auto& v : f.signal) {
      if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.1) {
        v = open ? -1 : 1;
        open = !open;
      }
    }
    frames.push_back(f);
  }
  auto hp = testing::small_sam_hyperparams();
  hp.updates = 60;
  const auto train = sam::slice_frames(frames, 0, 250);
  const auto test = sam::slice_frames(frames, 240, 400);
  const auto model = sam::train_sam(train, hp, 5);
  std::vector<sam::PortfolioLedger> ledgers{sam::backtest(model.model.actor, test, hp, 10000.0)};
  for (auto k : {baselines::Kind::kCrp, baselines::Kind::kBah, baselines::Kind::kEg, baselines::Kind::kFtrl}) {
    ledgers.push_back(baselines::run_baseline({k}, test, hp.accounting(10000.0), hp.network.window - 1));
  }
  std::size_t total = 0, bad = 0;
  double worst = 0.0;
  for (const auto& l : ledgers) {
    for (const auto& a : l.allocations) {
      ++total;
      double s = 0.0;
      bool neg = false;
      for (double v : a) {
        s += v;
        neg = neg || v < 0.0;
      }
      worst = std::max(worst, std::abs(s - 1.0));
      if (neg || std::abs(s - 1.0) > 1e-9) ++bad;
    }
  }
  return {bad == 0 && total > 0, std::to_string(total) + " allocations (MSPM, CRP, BAH, EG, FTRL): " +
                                     std::to_string(bad) + " off-simplex, max |sum - 1| = " + sci(worst)};
}

// 6 ------------------------------------------------------------------------

Outcome metric_oracles() {
  std::mt19937_64 rng(6);
  double worst = 0.0;
  std::size_t sortino_defined = 0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t len = 10 + k % 200;
    std::normal_distribution<double> z(0.0005 * (k % 5 - 2), 0.002 + 0.0001 * (k % 50));
    std::vector<double> p{10000.0};
    for (std::size_t t = 0; t < len; ++t) p.push_back(p.back() * std::exp(z(rng)));
    std::vector<double> r;
    for (std::size_t t = 1; t < p.size(); ++t) r.push_back(std::log(p[t] / p[t - 1]));

    // DRR: average of p_t / p_{t-1}
    long double gross = 0.0L;
    for (std::size_t t = 1; t < p.size(); ++t) gross += p[t] / p[t - 1];
    const double drr = static_cast<double>((gross / len - 1.0L) * 100.0L);
    worst = std::max(worst, std::abs(metrics::drr_pct(r) - drr));
    // ARR: p_T / p_0
    worst = std::max(worst, std::abs(metrics::arr(r, p[0]).pct - (p.back() / p[0] - 1.0) * 100.0));
    // MD: worst pairwise decline
    double md = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
      for (std::size_t j = i; j < p.size(); ++j) md = std::min(md, (p[j] - p[i]) / p[i]);
    worst = std::max(worst, std::abs(metrics::max_drawdown_pct(p) - md * 100.0));
    // SR: mean gross minus one over the population deviation of negative returns
    std::vector<double> neg;
    for (double x : r)
      if (x < 0.0) neg.push_back(x);
    if (neg.size() >= 2) {
      long double m = 0.0L, v = 0.0L;
      for (double x : neg) m += x;
      m /= neg.size();
      for (double x : neg) v += (x - m) * (x - m);
      v /= neg.size();
      if (v > 0.0L) {
        const double sr = static_cast<double>((gross / len - 1.0L) / std::sqrt(v));
        worst = std::max(worst, rel(metrics::sortino(r), sr));
        ++sortino_defined;
      }
    }
    // SMA and RstdDRR on the daily-rate series
    const std::size_t n = 2 + k % 9;
    const auto d = metrics::daily_rates(r);
    const auto sm = metrics::sma(d, n);
    const auto rs = metrics::rstd_drr(d, n);
    if (sm.size() != d.size() - n + 1 || rs.size() != sm.size()) return {false, "wrong SMA/RstdDRR length"};
    for (std::size_t i = 0; i + n <= d.size(); ++i) {
      long double s = 0.0L, sq = 0.0L;
      for (std::size_t j = i; j < i + n; ++j) s += d[j];
      const long double mean = s / n;
      for (std::size_t j = i; j < i + n; ++j) sq += (d[j] - mean) * (d[j] - mean);
      worst = std::max(worst, std::abs(sm[i] - static_cast<double>(mean)));
      worst = std::max(worst, std::abs(rs[i] - static_cast<double>(std::sqrt(sq / n))));
    }
  }
  const double md_example = metrics::max_drawdown_pct(std::vector<double>{100, 120, 90, 110});
  return {worst <= 1e-10 && md_example == -25.0 && sortino_defined > 900,
          "1000 paths: max deviation " + sci(worst) + " (" + std::to_string(sortino_defined) +
              " with defined SR); MD[100,120,90,110] = " + text::format_double(md_example) + "%"};
}

// 7 ------------------------------------------------------------------------

Outcome statistics() {
  const auto exact = metrics::mann_whitney_u(std::vector<double>{1, 2}, std::vector<double>{3, 4}, metrics::Tail::kLess);
  const bool sixth = exact.p_value == 1.0 / 6.0;
  std::mt19937_64 rng(7);
  std::size_t sum_bad = 0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n1 = 1 + k % 15, n2 = 1 + (k / 15) % 30;
    std::uniform_int_distribution<int> v(0, k % 3 == 0 ? 5 : 1000);
    std::vector<double> a(n1), b(n2);
    for (auto& x : a) x = v(rng);
    for (auto& x : b) x = v(rng);
    const double u = metrics::mann_whitney_u(a, b, metrics::Tail::kLess).statistic;
    const double u2 = metrics::mann_whitney_u(b, a, metrics::Tail::kLess).statistic;
    if (std::abs(u + u2 - static_cast<double>(n1 * n2)) > 1e-9) ++sum_bad;
  }
  std::ifstream in(std::string(MSPM_FIXTURE_DIR) + "/stats_reference.json");
  const auto ref = nlohmann::json::parse(in);
  double e_sw = 0.0, e_lev = 0.0;
  for (const auto& c : ref["cases"]) {
    const auto a = c["a"].get<std::vector<double>>();
    const auto b = c["b"].get<std::vector<double>>();
    const auto sw = metrics::shapiro_wilk(a);
    e_sw = std::max({e_sw, std::abs(sw.statistic - c["shapiro_w"].get<double>()),
                     std::abs(sw.p_value - c["shapiro_p"].get<double>())});
    const auto lv = metrics::levene(a, b);
    e_lev = std::max({e_lev, rel(lv.statistic, c["levene_stat"].get<double>()),
                      std::abs(lv.p_value - c["levene_p"].get<double>())});
  }
  return {sixth && sum_bad == 0 && e_sw <= 1e-4 && e_lev <= 1e-6 && ref["cases"].size() == 10,
          std::string("exact p({1,2},{3,4}, less) ") + (sixth ? "= 1/6" : "!= 1/6 (" + text::format_double(exact.p_value) + ")") +
              "; U + U' = n1 n2 failures " + std::to_string(sum_bad) + "/1000; Shapiro-Wilk max diff " + sci(e_sw) +
              ", Levene max diff " + sci(e_lev) + " over " + std::to_string(ref["cases"].size()) + " reference cases"};
}

// 8 ------------------------------------------------------------------------

Outcome eam_learnability() {
  int good = 0;
  std::string rows;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto series = data::generate_synthetic(testing::periodic_market(1, 1600, 800 + s));
    const auto market = eam::MarketData::from_series(series[0]);
    const auto hp = testing::small_eam_hyperparams();
    const auto r = eam::train_eam(pipeline::slice_market(market, 0, 1000), hp, s);
    // Held-out days only: the first signal day is the first unseen day.
    const auto frame = eam::generate_signals(r.model, market, 1000, hp.network);
    const auto rep = eam::position_report(frame);
    const bool ok = rep.positions >= 20 && rep.winning_rate_pct >= 70.0;
    good += ok ? 1 : 0;
    rows += (s ? ", " : "") + text::fixed(rep.winning_rate_pct, 1) + "%/" + std::to_string(rep.positions);
  }
  return {good >= 4, std::to_string(good) + "/5 seeds with winning rate >= 70% over >= 20 held-out positions (" + rows + ")"};
}

// 9 ------------------------------------------------------------------------

Outcome sam_learnability() {
  int good = 0;
  std::string rows;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const std::size_t winner = s % 3;
    const auto hp = testing::small_sam_hyperparams();
    const auto train = testing::trending_frames(3, 300, winner);
    const auto eval = testing::trending_frames(3, 120, winner, 0.01, 300);
    const auto r = sam::train_sam(train, hp, s);
    const auto l = sam::backtest(r.model.actor, eval, hp, 10000.0);
    double w = 0.0;
    for (const auto& a : l.allocations) w += a[winner + 1] / static_cast<double>(l.size());
    good += w > 0.8 ? 1 : 0;
    rows += (s ? ", " : "") + text::fixed(w, 3);
  }
  return {good >= 4, std::to_string(good) + "/5 seeds with mean winner weight > 0.8 (" + rows + ")"};
}

// 10 -----------------------------------------------------------------------

Outcome ablation_direction() {
  int good = 0;
  std::string rows;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto series = data::generate_synthetic(testing::periodic_market(3, 1800, 500 + s));
    const auto ehp = testing::small_eam_hyperparams();
    std::vector<sam::SignalFrame> frames;
    for (const auto& raw : series) {
      const auto m = eam::MarketData::from_series(raw);
      const auto r = eam::train_eam(pipeline::slice_market(m, 0, 1000), ehp, s);
      frames.push_back(eam::generate_signals(r.model, m, ehp.window - 1, ehp.network));
    }
    // Frame row k is market row k + window - 1.
    const std::size_t lag = ehp.window - 1;
    auto shp = testing::small_sam_hyperparams();
    shp.network.window = 20;
    shp.updates = 600;
    shp.rollout_length = 128;
    shp.gamma = 0.5;
    shp.actor_learning_rate = 1e-3;
    const auto train = sam::slice_frames(frames, 1000 - lag, 1500 - lag);
    const auto test = sam::slice_frames(frames, 1500 - lag - (shp.network.window - 1), frames[0].size());
    const auto pair = pipeline::ablate_eam(train, nullptr, test, shp, s, 10000.0);
    const double on = metrics::metric_bundle(pair.enabled).arr_pct;
    const double off = metrics::metric_bundle(pair.disabled).arr_pct;
    good += on > off ? 1 : 0;
    rows += (s ? ", " : "") + text::fixed(on, 1) + "% vs " + text::fixed(off, 1) + "%";
  }
  return {good >= 4, std::to_string(good) + "/5 seeds with enabled ARR > disabled ARR (" + rows + "); context: " +
                         pipeline::kAblationPaperContext};
}

// 11 -----------------------------------------------------------------------

std::vector<sam::SignalFrame> walk(std::size_t assets, std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 0.02);
  std::vector<sam::SignalFrame> frames(assets);
  for (std::size_t a = 0; a < assets; ++a) {
    auto& f = frames[a];
    f.symbol = "W" + std::to_string(a);
    double c = 20.0 * static_cast<double>(a + 1);
    Date d(2019, 1, 1);
    for (std::size_t t = 0; t < length; ++t, d = d.plus_days(1)) {
      if (t > 0) c *= std::exp(z(rng));
      f.dates.push_back(d);
      for (auto* v : {&f.open, &f.high, &f.low, &f.close}) v->push_back(c);
      f.volume.push_back(1.0);
      f.signal.push_back(0);
    }
  }
  return frames;
}

Outcome baseline_sanity() {
  double e_bah = 0.0, bah_cost = 0.0, eg_drift = 0.0, ftrl_gap = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto frames = walk(2 + s % 4, 250, 11 + s);
    const std::size_t first = 19, m = frames.size();
    const auto bah = baselines::run_baseline({baselines::Kind::kBah}, frames, {}, first);
    double closed = 0.0;
    for (const auto& f : frames) closed += f.close.back() / f.close[first] / static_cast<double>(m);
    closed *= 10000.0;
    e_bah = std::max(e_bah, std::abs(bah.value.back() - closed));
    for (std::size_t t = 1; t < bah.size(); ++t) bah_cost = std::max(bah_cost, bah.cost[t]);
    const auto eg = baselines::run_baseline({baselines::Kind::kEg, 0.0}, frames, {}, first);
    for (const auto& a : eg.allocations)
      for (std::size_t i = 0; i < a.size(); ++i) eg_drift = std::max(eg_drift, std::abs(a[i] - eg.allocations[0][i]));
  }
  std::mt19937_64 rng(12);
  std::normal_distribution<double> z(0.0, 0.03);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> ys;
    const double drift = 0.004 * (trial % 5 - 2);
    for (int t = 0; t < 50; ++t) ys.push_back({std::exp(z(rng)), std::exp(drift + z(rng))});
    const double reg = trial % 2 ? 0.0 : 2.0;
    const auto a = baselines::ftrl_update(ys, reg);
    double best = -1e300;
    for (int k = 0; k <= 10000; ++k) {
      const double w = k / 10000.0;
      best = std::max(best, baselines::ftrl_objective({w, 1.0 - w}, ys, reg));
    }
    ftrl_gap = std::max(ftrl_gap, best - baselines::ftrl_objective(a, ys, reg));
  }
  return {e_bah <= 1e-8 && bah_cost == 0.0 && eg_drift == 0.0 && ftrl_gap < 1e-4,
          "BAH vs closed form " + sci(e_bah) + ", BAH cost after day 1 " + sci(bah_cost) + ", EG(eta=0) weight change " +
              sci(eg_drift) + ", FTRL grid gap " + sci(ftrl_gap)};
}

// 12 -----------------------------------------------------------------------

pipeline::ExperimentConfig determinism_config(const std::filesystem::path& out) {
  pipeline::ExperimentConfig c;
  c.output_dir = out.string();
  pipeline::SyntheticSource s;
  s.length = 520;
  s.sentiment_missing_fraction = 0.05;
  c.synthetic = s;
  c.split = {{Date(2009, 1, 1), Date(2009, 12, 31)},
             {Date(2010, 1, 1), Date(2010, 12, 31)},
             {Date(2010, 1, 1), Date(2010, 6, 30)},
             {Date(2010, 7, 1), Date(2010, 8, 31)},
             {Date(2010, 9, 1), Date(2010, 12, 31)}};
  c.portfolios = {{"a", {"SYN0", "SYN1"}}, {"b", {"SYN1", "SYN2"}}};
  c.eam = testing::small_eam_hyperparams();
  c.eam.window = c.eam.network.window = 10;
  c.eam.episodes = 10;
  c.sam = testing::small_sam_hyperparams();
  c.sam.updates = 40;
  c.sam.validate_every = 10;
  c.ablation = {{"a"}, {3, 4}};
  return c;
}

Outcome determinism() {
  const auto base = std::filesystem::temp_directory_path() / "mspm_acceptance_determinism";
  std::filesystem::remove_all(base);
  pipeline::Pipeline first(determinism_config(base / "one"), 1, nullptr);
  first.run_all();
  pipeline::Pipeline second(determinism_config(base / "two"), 2, nullptr);
  second.run_all();
  std::size_t files = 0, differing = 0;
  for (const auto& [stage, rec] : first.manifest().stages) {
    for (const auto& [path, digest] : rec.outputs) {
      ++files;
      const auto& other = second.manifest().stages.at(stage).outputs;
      if (!other.contains(path) || other.at(path) != digest) ++differing;
    }
  }
  const auto& d1 = first.manifest().report_digest;
  const auto& d2 = second.manifest().report_digest;
  const bool complete = nlohmann::json::parse(pipeline::Pipeline::read_text(base / "one" / "report.json"))["complete"];
  return {d1 == d2 && differing == 0 && complete,
          "report digests " + d1 + " / " + d2 + "; " + std::to_string(differing) + " of " + std::to_string(files) +
              " stage outputs differ"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "gradient correctness", 60, gradient_correctness},
      {2, "dueling identity", 0, dueling_identity},
      {3, "double-DQN oracle", 120, double_dqn_oracle},
      {4, "accounting oracles", 60, accounting_oracles},
      {5, "simplex invariants", 0, simplex_invariants},
      {6, "metric oracles", 0, metric_oracles},
      {7, "statistics", 0, statistics},
      {8, "EAM learnability", 600, eam_learnability},
      {9, "SAM learnability", 900, sam_learnability},
      {10, "ablation direction", 0, ablation_direction},
      {11, "baseline sanity", 0, baseline_sanity},
      {12, "determinism", 0, determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.contains(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget > 0 && secs > c.budget) {
      o.pass = false;
      o.detail += "; over the " + text::fixed(c.budget, 0) + " s budget";
    }
    failed += o.pass ? 0 : 1;
    std::printf("criterion %2d %s  %s: %s [%.1f s]\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
