#pragma once

#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <mutex>
#include <thread>

#include "mspm/baselines/baselines.hpp"
#include "mspm/data/csv_io.hpp"
#include "mspm/data/synthetic.hpp"
#include "mspm/data/transform.hpp"
#include "mspm/eam/signals.hpp"
#include "mspm/eam/trainer.hpp"
#include "mspm/metrics/stability.hpp"
#include "mspm/metrics/stats_tests.hpp"
#include "mspm/nn/checkpoint.hpp"
#include "mspm/pipeline/compare.hpp"
#include "mspm/pipeline/config.hpp"
#include "mspm/sam/trainer.hpp"

namespace mspm::pipeline {

namespace fs = std::filesystem;

inline constexpr const char* kEngineVersion = "mspm-engine 1.0.0";
inline constexpr int kManifestSchemaVersion = 1;
inline constexpr int kReportSchemaVersion = 1;

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"ingest",   "train-eam", "gen-signals", "train-sam", "backtest",
                                              "baseline", "compare",   "stats",       "ablate"};
  return names;
}

inline bool is_stage(const std::string& s) {
  const auto& n = stage_names();
  return std::find(n.begin(), n.end(), s) != n.end();
}

inline bool reference_is_baseline(const ExperimentConfig& c) {
  return !c.stats.external_returns.contains(c.stats.reference);
}

inline std::vector<std::string> stage_prerequisites(const std::string& stage, const ExperimentConfig& c) {
  if (stage == "ingest") return {};
  if (stage == "train-eam" || stage == "baseline") return {"ingest"};
  if (stage == "gen-signals") return {"train-eam"};
  if (stage == "train-sam" || stage == "ablate") return {"gen-signals"};
  if (stage == "backtest") return {"train-sam"};
  if (stage == "compare") {
    if (c.baselines.empty()) return {"backtest"};
    return {"backtest", "baseline"};
  }
  if (stage == "stats") {
    if (reference_is_baseline(c)) return {"backtest", "baseline"};
    return {"backtest"};
  }
  throw ConfigError("unknown stage '" + stage + "'");
}

/// Stages a complete run of this config produces.
inline std::vector<std::string> planned_stages(const ExperimentConfig& c) {
  std::vector<std::string> out;
  for (const auto& s : stage_names()) {
    if (s == "ablate" && c.ablation.portfolios.empty()) continue;
    if (s == "baseline" && c.baselines.empty()) continue;
    out.push_back(s);
  }
  return out;
}

struct StageRecord {
  /// Path relative to the output directory -> content digest.
  std::map<std::string, std::string> outputs;
  double seconds = 0.0;
};

struct RunManifest {
  std::string config_digest;
  std::string engine_version = kEngineVersion;
  std::map<std::string, StageRecord> stages;
  /// One entry per EAM training run, in training order.
  std::vector<std::string> eam_training_runs;
  std::string report_digest;

  Json to_json() const {
    Json j;
    j["schema_version"] = kManifestSchemaVersion;
    j["config_digest"] = config_digest;
    j["engine_version"] = engine_version;
    j["eam_training_runs"] = eam_training_runs;
    j["report_digest"] = report_digest;
    j["stages"] = Json::object();
    for (const auto& [name, r] : stages) j["stages"][name] = {{"outputs", r.outputs}, {"seconds", r.seconds}};
    return j;
  }

  static RunManifest from_json(const Json& j) {
    try {
      if (j.at("schema_version") != kManifestSchemaVersion) throw DataError("unsupported manifest schema");
      RunManifest m;
      m.config_digest = j.at("config_digest").get<std::string>();
      m.engine_version = j.at("engine_version").get<std::string>();
      m.eam_training_runs = j.at("eam_training_runs").get<std::vector<std::string>>();
      m.report_digest = j.at("report_digest").get<std::string>();
      for (const auto& [name, r] : j.at("stages").items()) {
        m.stages[name] = {r.at("outputs").get<std::map<std::string, std::string>>(), r.at("seconds").get<double>()};
      }
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed manifest: ") + e.what());
    }
  }
};

/// Runs fn(0..count-1) on up to `jobs` threads; the first failure is rethrown.
inline void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(jobs, count); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Stable per-name seed derived from a base seed.
inline std::uint64_t derive_seed(std::uint64_t base, const std::string& name) {
  return fnv1a(std::to_string(base) + "/" + name);
}

/// [lo, hi) of the dates inside `r`.
inline std::pair<std::size_t, std::size_t> index_range(const std::vector<Date>& dates, const DateRange& r,
                                                       const std::string& what) {
  const auto lo = std::lower_bound(dates.begin(), dates.end(), r.first) - dates.begin();
  const auto hi = std::upper_bound(dates.begin(), dates.end(), r.last) - dates.begin();
  if (lo >= hi) {
    throw DataError(what + ": no trading days in " + r.first.to_string() + ".." + r.last.to_string());
  }
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

inline eam::MarketData slice_market(const eam::MarketData& m, std::size_t lo, std::size_t hi) {
  eam::MarketData out;
  out.symbol = m.symbol;
  auto cut = [&](const auto& v) { return std::decay_t<decltype(v)>(v.begin() + static_cast<long>(lo), v.begin() + static_cast<long>(hi)); };
  out.dates = cut(m.dates);
  out.open = cut(m.open);
  out.high = cut(m.high);
  out.low = cut(m.low);
  out.close = cut(m.close);
  out.volume = cut(m.volume);
  out.sentiment = cut(m.sentiment);
  out.news_buzz = cut(m.news_buzz);
  return out;
}

inline eam::SignalFrame truncate_frame(eam::SignalFrame f, std::size_t rows) {
  f.dates.resize(rows);
  f.open.resize(rows);
  f.high.resize(rows);
  f.low.resize(rows);
  f.close.resize(rows);
  f.volume.resize(rows);
  f.signal.resize(rows);
  return f;
}

/// Rows of `r` plus up to window-1 earlier rows, so the first decision can fall on r.first.
inline std::vector<sam::SignalFrame> frames_with_warmup(const std::vector<sam::SignalFrame>& frames, const DateRange& r,
                                                        std::size_t window, const std::string& what) {
  sam::require_aligned(frames);
  const auto [lo, hi] = index_range(frames.front().dates, r, what);
  const std::size_t begin = lo >= window - 1 ? lo - (window - 1) : 0;
  if (hi - begin < window + 1) {
    throw DataError(what + ": range " + r.first.to_string() + ".." + r.last.to_string() +
                    " is too short for a SAM window of " + std::to_string(window));
  }
  return sam::slice_frames(frames, begin, hi);
}

inline std::vector<sam::SignalFrame> strip_signals(std::vector<sam::SignalFrame> frames) {
  for (auto& f : frames) f = eam::without_signals(std::move(f));
  return frames;
}

struct AblationPair {
  sam::PortfolioLedger enabled;
  sam::PortfolioLedger disabled;
};

/// Trains and back-tests two SAMs with identical seeds and hyperparameters; the disabled
/// one sees the same tensors with the signal channel zeroed.
inline AblationPair ablate_eam(const std::vector<sam::SignalFrame>& train, const std::vector<sam::SignalFrame>* validation,
                               const std::vector<sam::SignalFrame>& experiment, const sam::SamHyperparams& hp,
                               std::uint64_t seed, double initial_value) {
  const auto train_off = strip_signals(train);
  const auto exp_off = strip_signals(experiment);
  std::vector<sam::SignalFrame> val_off;
  if (validation) val_off = strip_signals(*validation);
  const auto on = sam::train_sam(train, hp, seed, validation);
  const auto off = sam::train_sam(train_off, hp, seed, validation ? &val_off : nullptr);
  return {sam::backtest(on.model.actor, experiment, hp, initial_value, "MSPM"),
          sam::backtest(off.model.actor, exp_off, hp, initial_value, "MSPM-no-EAM")};
}

inline const char* kAblationPaperContext =
    "published full-scale result: EAM-enabled ARR exceeds EAM-disabled by at least 1341.8%; "
    "not reproducible here (needs the original subscription data and full-scale training)";

inline Json stability_json(const metrics::StabilityReport& r) {
  auto group = [](const metrics::GroupSummary& g) {
    return Json{{"name", g.name},
                {"n", g.n},
                {"mean", g.mean},
                {"sd", g.sd},
                {"shapiro_w", g.normality.statistic},
                {"shapiro_p", g.normality.p_value}};
  };
  return {{"status", "ok"},
          {"a", group(r.a)},
          {"b", group(r.b)},
          {"levene_statistic", r.equal_variance.statistic},
          {"levene_p", r.equal_variance.p_value},
          {"alternative", r.alternative == metrics::Tail::kLess ? "less" : "greater"},
          {"u_statistic", r.u_test.statistic},
          {"u_p", r.u_test.p_value},
          {"alpha", r.alpha},
          {"reject_null", r.reject_null},
          {"null_hypothesis", r.null_hypothesis},
          {"alternative_hypothesis", r.alternative_hypothesis},
          {"verdict", r.verdict}};
}

/// Imported `date,R_t` series (for strategies this engine does not implement).
inline std::pair<std::vector<Date>, std::vector<double>> load_return_series(const std::string& path) {
  const auto lines = text::read_lines(path);
  if (lines.empty() || text::trim(lines[0]) != "date,R_t") throw DataError(path + ": expected header 'date,R_t'");
  std::vector<Date> dates;
  std::vector<double> r;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    const auto cells = text::split_csv(lines[i]);
    double v;
    if (cells.size() != 2 || !text::parse_double(cells[1], v)) throw data::detail::row_error(path, i + 1, "bad row");
    dates.push_back(Date::parse(cells[0]));
    r.push_back(v);
  }
  return {dates, r};
}

/// Writes synthetic sources as raw price and sentiment CSVs (usable as `data.csv` inputs).
inline std::vector<std::string> write_synthetic(const ExperimentConfig& c, const fs::path& dir) {
  if (!c.synthetic) throw ConfigError("synth: config has no data.synthetic section");
  fs::create_directories(dir);
  const auto series =
      data::generate_synthetic(c.synthetic->spec(c.seeds.data, std::max(c.eam.window, c.sam.network.window)));
  std::vector<std::string> files;
  for (const auto& s : series) {
    const auto p = dir / (s.symbol + "_prices.csv");
    const auto q = dir / (s.symbol + "_sentiment.csv");
    text::write_file(p.string(), data::price_csv(s.bars));
    text::write_file(q.string(), data::sentiment_csv(s.sentiments));
    files.push_back(p.string());
    files.push_back(q.string());
  }
  return files;
}

class Pipeline {
 public:
  explicit Pipeline(ExperimentConfig cfg, std::size_t jobs = 1, std::ostream* log = &std::cerr)
      : cfg_(std::move(cfg)), jobs_(std::max<std::size_t>(1, jobs)), log_(log), root_(cfg_.output_dir) {
    cfg_.validate();
    manifest_.config_digest = config_digest(cfg_);
    const auto path = root_ / "manifest.json";
    if (fs::exists(path)) {
      auto existing = RunManifest::from_json(read_json(path));
      if (existing.config_digest != manifest_.config_digest) {
        throw ConfigError("config digest " + manifest_.config_digest + " does not match the manifest in '" +
                          root_.string() + "' (" + existing.config_digest + "); use a fresh output directory");
      }
      manifest_ = std::move(existing);
      manifest_.engine_version = kEngineVersion;
    }
  }

  const ExperimentConfig& config() const { return cfg_; }
  const RunManifest& manifest() const { return manifest_; }
  const fs::path& root() const { return root_; }

  /// Throws PrerequisiteError unless every stage `stage` depends on has recorded outputs on disk.
  void check_prerequisites(const std::string& stage) const {
    for (const auto& p : stage_prerequisites(stage, cfg_)) {
      const auto it = manifest_.stages.find(p);
      if (it == manifest_.stages.end()) {
        throw PrerequisiteError("stage '" + stage + "' needs the output of '" + p + "'; run `mspm " + p + "` first");
      }
      for (const auto& [file, digest] : it->second.outputs) {
        if (!fs::exists(root_ / file)) {
          throw PrerequisiteError("stage '" + stage + "' needs '" + file + "' from '" + p + "', which is missing");
        }
      }
    }
  }

  void run_stage(const std::string& stage) {
    if (!is_stage(stage)) throw ConfigError("unknown stage '" + stage + "'");
    check_prerequisites(stage);
    fs::create_directories(root_);
    current_ = {};
    const auto t0 = std::chrono::steady_clock::now();
    say(stage, "start");
    if (stage == "ingest") ingest();
    else if (stage == "train-eam") train_eam_stage();
    else if (stage == "gen-signals") gen_signals();
    else if (stage == "train-sam") train_sam_stage();
    else if (stage == "backtest") backtest_stage();
    else if (stage == "baseline") baseline_stage();
    else if (stage == "compare") compare_stage();
    else if (stage == "stats") stats_stage();
    else if (stage == "ablate") ablate_stage();
    current_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    manifest_.stages[stage] = current_;
    say(stage, "done in " + text::fixed(current_.seconds, 1) + " s");
    emit_report();
  }

  void run_all() {
    for (const auto& s : planned_stages(cfg_)) run_stage(s);
  }

  /// Writes report.json and report/summary.csv from the stage artifacts on disk.
  Json emit_report();

  eam::MarketData load_market(const std::string& symbol) const {
    const auto path = root_ / "data" / (symbol + ".csv");
    return eam::MarketData::from_series(data::parse_series_csv(read_text(path), symbol, path.string()));
  }

  std::vector<sam::SignalFrame> load_signal_frames(const std::vector<std::string>& assets) const {
    std::vector<sam::SignalFrame> out;
    for (const auto& a : assets) {
      const auto path = root_ / "signals" / (a + ".csv");
      out.push_back(eam::parse_signal_frame_csv(read_text(path), a, path.string()));
    }
    sam::require_aligned(out);
    return out;
  }

  /// Price-only frames over eam_predict (signals all zero), row-aligned with the signal files.
  std::vector<sam::SignalFrame> load_price_frames(const std::vector<std::string>& assets) const {
    std::vector<sam::SignalFrame> out;
    for (const auto& a : assets) {
      const auto m = load_market(a);
      const auto [lo, hi] = index_range(m.dates, cfg_.split.eam_predict, a);
      out.push_back(truncate_frame(eam::frame_without_signals(m, lo), hi - lo));
    }
    sam::require_aligned(out);
    return out;
  }

  std::vector<sam::SignalFrame> experiment_frames(const std::vector<sam::SignalFrame>& frames) const {
    return frames_with_warmup(frames, cfg_.split.sam_experiment, cfg_.sam.network.window, "sam_experiment");
  }

  sam::PortfolioLedger load_ledger(const std::string& portfolio, const std::string& strategy) const {
    const auto path = root_ / "backtest" / (portfolio + "_" + strategy + ".csv");
    const auto exp = experiment_frames(load_price_frames(cfg_.portfolios.at(portfolio)));
    return parse_ledger_csv(read_text(path), cfg_.initial_value, exp.front().dates[cfg_.sam.network.window - 1],
                            path.string());
  }

  static std::string read_text(const fs::path& p) {
    if (!fs::exists(p)) throw PrerequisiteError("missing file '" + p.string() + "'");
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }

  static Json read_json(const fs::path& p) {
    try {
      return Json::parse(read_text(p));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("'" + p.string() + "' is not valid JSON: " + e.what());
    }
  }

  static std::string canonical(const Json& j) { return j.dump(2) + "\n"; }

 private:
  void say(const std::string& stage, const std::string& msg) {
    if (!log_) return;
    std::lock_guard lock(log_mu_);
    *log_ << "[" << stage << "] " << msg << "\n";
  }

  void put(const std::string& rel, std::string_view content) {
    const auto path = root_ / rel;
    fs::create_directories(path.parent_path());
    text::write_file(path.string(), content);
    std::lock_guard lock(out_mu_);
    current_.outputs[rel] = digest_hex(content);
  }

  void put_checkpoint(const std::string& rel, const nn::Checkpoint& c) { put(rel, nn::serialize(c)); }

  void save_manifest() {
    fs::create_directories(root_);
    const auto tmp = root_ / "manifest.json.tmp";
    text::write_file(tmp.string(), canonical(manifest_.to_json()));
    fs::rename(tmp, root_ / "manifest.json");
  }

  std::vector<std::string> portfolio_names() const {
    std::vector<std::string> out;
    for (const auto& [name, assets] : cfg_.portfolios) out.push_back(name);
    return out;
  }

  void ingest() {
    std::vector<data::AssetSeries> series;
    if (cfg_.synthetic) {
      series = data::generate_synthetic(
          cfg_.synthetic->spec(cfg_.seeds.data, std::max(cfg_.eam.window, cfg_.sam.network.window)));
    } else {
      for (const auto& s : cfg_.csv) {
        series.push_back(data::make_series(s.symbol, data::load_price_csv(s.prices), data::load_sentiment_csv(s.sentiment)));
      }
    }
    auto aligned = data::align_calendar(std::move(series));
    data::split(aligned, cfg_.split);
    const auto wanted = cfg_.symbols();
    for (auto& s : aligned) {
      if (std::find(wanted.begin(), wanted.end(), s.symbol) == wanted.end()) continue;
      auto filled = data::fill_sentiment_gaps(std::move(s));
      say("ingest", filled.symbol + ": " + std::to_string(filled.size()) + " trading days, " +
                        text::fixed(100.0 * data::imputed_fraction(filled), 1) + "% sentiment imputed");
      put("data/" + filled.symbol + ".csv", data::series_csv(filled));
    }
  }

  nn::Checkpoint train_one_eam(const std::string& symbol, const nn::Checkpoint* initial) {
    const auto market = load_market(symbol);
    const auto [lo, hi] = index_range(market.dates, cfg_.split.eam_train, symbol + " eam_train");
    const auto seed = derive_seed(cfg_.seeds.eam, symbol);
    say("train-eam", symbol + (initial ? " (from foundational weights)" : " (from scratch)"));
    auto r = eam::train_eam(slice_market(market, lo, hi), cfg_.eam, seed, initial);
    auto ckpt = nn::make_checkpoint(r.model, seed, cfg_.eam.episodes);
    put_checkpoint("eam/" + symbol + ".ckpt", ckpt);
    put("eam/" + symbol + "_training.csv", eam::training_log_csv(r.log));
    return ckpt;
  }

  void train_eam_stage() {
    const auto order = cfg_.eam_training_order();
    auto trained = [&](const std::string& s) {
      const auto& runs = manifest_.eam_training_runs;
      return std::find(runs.begin(), runs.end(), s) != runs.end() && fs::exists(root_ / "eam" / (s + ".ckpt"));
    };
    auto keep = [&](const std::string& s) {
      for (const char* suffix : {".ckpt", "_training.csv"}) {
        const std::string rel = "eam/" + s + suffix;
        current_.outputs[rel] = file_digest((root_ / rel).string());
      }
      say("train-eam", s + ": reusing existing checkpoint");
    };
    const std::string& foundational = order.front();
    nn::Checkpoint base;
    if (trained(foundational)) {
      keep(foundational);
      base = nn::load_checkpoint((root_ / "eam" / (foundational + ".ckpt")).string());
    } else {
      base = train_one_eam(foundational, nullptr);
      manifest_.eam_training_runs.push_back(foundational);
    }
    std::vector<std::string> todo;
    for (std::size_t i = 1; i < order.size(); ++i) {
      if (trained(order[i])) keep(order[i]);
      else todo.push_back(order[i]);
    }
    parallel_for(todo.size(), jobs_, [&](std::size_t i) { train_one_eam(todo[i], cfg_.transfer ? &base : nullptr); });
    for (const auto& s : todo) manifest_.eam_training_runs.push_back(s);
  }

  void gen_signals() {
    const auto symbols = cfg_.symbols();
    std::vector<Json> positions(symbols.size());
    parallel_for(symbols.size(), jobs_, [&](std::size_t i) {
      const auto& s = symbols[i];
      const auto market = load_market(s);
      eam::EamQNetwork net(cfg_.eam.network);
      nn::restore(net, nn::load_checkpoint((root_ / "eam" / (s + ".ckpt")).string()));
      const auto [lo, hi] = index_range(market.dates, cfg_.split.eam_predict, s + " eam_predict");
      const auto frame = truncate_frame(eam::generate_signals(net, market, lo, cfg_.eam.network), hi - lo);
      put("signals/" + s + ".csv", eam::signal_frame_csv(frame));
      const auto rep = eam::position_report(frame);
      positions[i] = {{"positions", rep.positions},
                      {"winning", rep.winning},
                      {"winning_rate_pct", rep.winning_rate_pct},
                      {"open_at_end", rep.open_at_end}};
      say("gen-signals", s + ": " + std::to_string(rep.positions) + " closed positions, winning rate " +
                             text::fixed(rep.winning_rate_pct, 1) + "%");
    });
    Json j = Json::object();
    for (std::size_t i = 0; i < symbols.size(); ++i) j[symbols[i]] = positions[i];
    put("signals/positions.json", canonical(j));
  }

  void train_sam_stage() {
    const auto names = portfolio_names();
    const std::size_t n = cfg_.sam.network.window;
    parallel_for(names.size(), jobs_, [&](std::size_t i) {
      const auto& p = names[i];
      const auto frames = load_signal_frames(cfg_.portfolios.at(p));
      const auto train = frames_with_warmup(frames, cfg_.split.sam_train, n, p + " sam_train");
      const auto val = frames_with_warmup(frames, cfg_.split.sam_validate, n, p + " sam_validate");
      const auto seed = derive_seed(cfg_.seeds.sam, p);
      say("train-sam", p + ": " + std::to_string(cfg_.sam.updates) + " PPO updates");
      auto r = sam::train_sam(train, cfg_.sam, seed, cfg_.sam.validate_every > 0 ? &val : nullptr);
      put_checkpoint("sam/" + p + ".ckpt", nn::make_checkpoint(r.model, seed, r.selected_update));
      put("sam/" + p + "_training.csv", sam::update_log_csv(r.log));
    });
  }

  void backtest_stage() {
    const auto names = portfolio_names();
    parallel_for(names.size(), jobs_, [&](std::size_t i) {
      const auto& p = names[i];
      const auto& assets = cfg_.portfolios.at(p);
      const auto exp = experiment_frames(load_signal_frames(assets));
      sam::PolicyPair pair(cfg_.sam.network, assets.size() + 1);
      nn::restore(pair, nn::load_checkpoint((root_ / "sam" / (p + ".ckpt")).string()));
      auto l = sam::backtest(pair.actor, exp, cfg_.sam, cfg_.initial_value, "MSPM");
      l.verify(1e-9);
      put("backtest/" + p + "_MSPM.csv", sam::ledger_csv(l, true));
      say("backtest", p + ": final value " + text::fixed(l.value.back(), 2));
    });
  }

  void baseline_stage() {
    const auto names = portfolio_names();
    parallel_for(names.size(), jobs_, [&](std::size_t i) {
      const auto& p = names[i];
      const auto exp = experiment_frames(load_price_frames(cfg_.portfolios.at(p)));
      for (const auto& spec : cfg_.baselines) {
        auto l = baselines::run_baseline(spec, exp, cfg_.sam.accounting(cfg_.initial_value), cfg_.sam.network.window - 1);
        l.verify(1e-9);
        put("backtest/" + p + "_" + l.strategy + ".csv", sam::ledger_csv(l, true));
      }
    });
  }

  std::vector<std::string> strategies() const {
    std::vector<std::string> s{"MSPM"};
    for (const auto& b : cfg_.baselines) s.push_back(baselines::kind_name(b.kind));
    return s;
  }

  void compare_stage() {
    for (const auto& p : portfolio_names()) {
      std::vector<sam::PortfolioLedger> ledgers;
      for (const auto& s : strategies()) ledgers.push_back(load_ledger(p, s));
      const auto t = compare_ledgers(ledgers);
      put("compare/" + p + "_table.csv", comparison_csv(t));
      put("compare/" + p + "_metrics.json", canonical(comparison_json(t)));
      put("compare/" + p + "_values.csv", value_curves_csv(ledgers));
      put("compare/" + p + "_underwater.csv", underwater_csv(ledgers));
      put("compare/" + p + "_table.txt", comparison_text(t));
      say("compare", p + "\n" + comparison_text(t));
    }
  }

  void stats_stage() {
    const auto& st = cfg_.stats;
    for (const auto& p : portfolio_names()) {
      const auto mspm = load_ledger(p, "MSPM");
      std::vector<double> ref_r;
      if (reference_is_baseline(cfg_)) {
        ref_r = load_ledger(p, st.reference).log_return;
      } else {
        ref_r = load_return_series(st.external_returns.at(st.reference)).second;
      }
      Json j;
      try {
        const auto a = metrics::rstd_drr(metrics::daily_rates(mspm.log_return), st.window);
        const auto b = metrics::rstd_drr(metrics::daily_rates(ref_r), st.window);
        j = stability_json(metrics::stability_protocol(a, b, "MSPM", st.reference, st.alpha));
      } catch (const Error& e) {
        j = {{"status", "undefined"}, {"reason", e.what()}};
      }
      j["rstd_window"] = st.window;
      j["reference"] = st.reference;
      put("stats/" + p + ".json", canonical(j));
      say("stats", p + ": " + (j["status"] == "ok" ? j["verdict"].get<std::string>() : j["reason"].get<std::string>()));
    }
  }

  void ablate_stage() {
    struct Job {
      std::string portfolio;
      std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (const auto& p : cfg_.ablation.portfolios)
      for (auto s : cfg_.ablation.seeds) jobs.push_back({p, s});
    std::vector<Json> rows(jobs.size());
    const std::size_t n = cfg_.sam.network.window;
    parallel_for(jobs.size(), jobs_, [&](std::size_t i) {
      const auto& [p, seed] = jobs[i];
      const auto frames = load_signal_frames(cfg_.portfolios.at(p));
      const auto train = frames_with_warmup(frames, cfg_.split.sam_train, n, p + " sam_train");
      const auto val = frames_with_warmup(frames, cfg_.split.sam_validate, n, p + " sam_validate");
      const auto exp = experiment_frames(frames);
      say("ablate", p + " seed " + std::to_string(seed));
      const auto pair = ablate_eam(train, cfg_.sam.validate_every > 0 ? &val : nullptr, exp, cfg_.sam, seed,
                                   cfg_.initial_value);
      const std::string stem = "ablation/" + p + "_seed" + std::to_string(seed);
      put(stem + "_enabled.csv", sam::ledger_csv(pair.enabled, true));
      put(stem + "_disabled.csv", sam::ledger_csv(pair.disabled, true));
      const auto on = metrics::metric_bundle(pair.enabled);
      const auto off = metrics::metric_bundle(pair.disabled);
      rows[i] = {{"seed", seed},
                 {"enabled", bundle_json(on)},
                 {"disabled", bundle_json(off)},
                 {"arr_gap_pct", on.arr_pct - off.arr_pct},
                 {"enabled_better", on.arr_pct > off.arr_pct}};
    });
    for (const auto& p : cfg_.ablation.portfolios) {
      Json j;
      j["runs"] = Json::array();
      std::size_t wins = 0;
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (jobs[i].portfolio != p) continue;
        j["runs"].push_back(rows[i]);
        wins += rows[i]["enabled_better"].get<bool>() ? 1 : 0;
      }
      j["enabled_better_count"] = wins;
      j["paper_context"] = {{"claim", kAblationPaperContext}, {"reproducible", false}};
      put("ablation/" + p + ".json", canonical(j));
      say("ablate", p + ": EAM-enabled ARR higher in " + std::to_string(wins) + " of " +
                        std::to_string(j["runs"].size()) + " seeds");
    }
  }

  ExperimentConfig cfg_;
  std::size_t jobs_;
  std::ostream* log_;
  fs::path root_;
  RunManifest manifest_;
  StageRecord current_;
  std::mutex out_mu_, log_mu_;
};

}  // namespace mspm::pipeline

#include "mspm/pipeline/report.hpp"
