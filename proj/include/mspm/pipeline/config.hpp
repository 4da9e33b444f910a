#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "mspm/baselines/baselines.hpp"
#include "mspm/core/date.hpp"
#include "mspm/core/digest.hpp"
#include "mspm/core/error.hpp"
#include "mspm/data/types.hpp"
#include "mspm/eam/trainer.hpp"
#include "mspm/sam/trainer.hpp"

namespace mspm::pipeline {

using Json = nlohmann::json;

inline constexpr int kConfigSchemaVersion = 1;

struct SyntheticSource {
  std::size_t num_assets = 3;
  std::size_t length = 750;
  std::size_t half_period = 10;
  double drift = 0.01;
  double volatility = 0.004;
  double sentiment_bias = 3.0;
  double random_segment_mean = 10.0;
  double sentiment_noise = 0.5;
  double sentiment_missing_fraction = 0.0;
  Date start_date = Date(2009, 1, 2);
  std::vector<std::string> symbols;

  data::SyntheticMarketSpec spec(std::uint64_t seed, std::size_t window) const {
    data::SyntheticMarketSpec s;
    s.num_assets = num_assets;
    s.length = length;
    s.window = window;
    s.regimes = {data::periodic_trend_plan(half_period, drift, volatility, sentiment_bias)};
    s.random_segment_mean = random_segment_mean;
    s.sentiment_noise = sentiment_noise;
    s.sentiment_missing_fraction = sentiment_missing_fraction;
    s.start_date = start_date;
    s.symbols = symbols;
    s.seed = seed;
    return s;
  }
};

struct CsvSource {
  std::string symbol;
  std::string prices;
  std::string sentiment;
};

struct Seeds {
  std::uint64_t data = 1;
  std::uint64_t eam = 2;
  std::uint64_t sam = 3;
};

struct AblationConfig {
  std::vector<std::string> portfolios;
  /// SAM seeds; each trains one enabled and one disabled variant.
  std::vector<std::uint64_t> seeds{3};
};

struct StatsConfig {
  /// Strategy whose RstdDRR is compared against MSPM.
  std::string reference = "CRP";
  std::size_t window = 5;
  double alpha = 0.05;
  /// Optional imported return series (`date,R_t`) keyed by strategy name.
  std::map<std::string, std::string> external_returns;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string output_dir = "mspm_out";
  double initial_value = 10000.0;
  std::optional<SyntheticSource> synthetic;
  std::vector<CsvSource> csv;
  data::DatasetSplit split = data::DatasetSplit::paper_default();
  /// Portfolio name -> asset symbols, in row order.
  std::map<std::string, std::vector<std::string>> portfolios;
  /// Symbol whose EAM trains first from scratch; others start from its weights.
  std::string foundational_symbol;
  bool transfer = true;
  eam::EamHyperparams eam;
  sam::SamHyperparams sam;
  std::vector<baselines::BaselineSpec> baselines{{baselines::Kind::kCrp},
                                                 {baselines::Kind::kBah},
                                                 {baselines::Kind::kEg},
                                                 {baselines::Kind::kFtrl}};
  Seeds seeds;
  AblationConfig ablation;
  StatsConfig stats;

  /// Every symbol used by a portfolio, sorted.
  std::vector<std::string> symbols() const {
    std::set<std::string> s;
    for (const auto& [name, assets] : portfolios) s.insert(assets.begin(), assets.end());
    return {s.begin(), s.end()};
  }

  /// Foundational symbol first, then the rest in sorted order.
  std::vector<std::string> eam_training_order() const {
    auto all = symbols();
    const std::string first = foundational_symbol.empty() ? all.front() : foundational_symbol;
    std::vector<std::string> order{first};
    for (const auto& s : all)
      if (s != first) order.push_back(s);
    return order;
  }

  std::vector<std::string> source_symbols() const {
    std::vector<std::string> out;
    if (synthetic) {
      for (std::size_t i = 0; i < synthetic->num_assets; ++i) {
        out.push_back(synthetic->symbols.empty() ? "SYN" + std::to_string(i) : synthetic->symbols[i]);
      }
    }
    for (const auto& c : csv) out.push_back(c.symbol);
    return out;
  }

  void validate() const {
    if (!(initial_value > 0.0)) throw ConfigError("initial_value must be positive");
    if (synthetic.has_value() == !csv.empty()) throw ConfigError("data: give exactly one of 'synthetic' or 'csv'");
    if (synthetic && !synthetic->symbols.empty() && synthetic->symbols.size() != synthetic->num_assets) {
      throw ConfigError("data.synthetic.symbols must list num_assets names");
    }
    if (portfolios.empty()) throw ConfigError("at least one portfolio is required");
    const auto sources = source_symbols();
    const std::set<std::string> have(sources.begin(), sources.end());
    if (have.size() != sources.size()) throw ConfigError("data: duplicate symbol");
    for (const auto& [name, assets] : portfolios) {
      if (assets.empty()) throw ConfigError("portfolio '" + name + "' has no assets");
      std::set<std::string> uniq(assets.begin(), assets.end());
      if (uniq.size() != assets.size()) throw ConfigError("portfolio '" + name + "' lists an asset twice");
      for (const auto& a : assets) {
        if (!have.contains(a)) throw ConfigError("portfolio '" + name + "': no data source for '" + a + "'");
      }
    }
    if (!foundational_symbol.empty()) {
      const auto s = symbols();
      if (std::find(s.begin(), s.end(), foundational_symbol) == s.end()) {
        throw ConfigError("foundational_symbol '" + foundational_symbol + "' is not in any portfolio");
      }
    }
    try {
      data::validate_split(split);
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
    eam.validate();
    sam.validate();
    std::set<std::string> kinds;
    for (const auto& b : baselines) {
      b.validate();
      if (!kinds.insert(baselines::kind_name(b.kind)).second) {
        throw ConfigError("baselines: " + baselines::kind_name(b.kind) + " listed twice");
      }
    }
    if (!kinds.contains(stats.reference) && !stats.external_returns.contains(stats.reference)) {
      throw ConfigError("stats.reference '" + stats.reference + "' is neither a configured baseline nor an external series");
    }
    for (const auto& p : ablation.portfolios) {
      if (!portfolios.contains(p)) throw ConfigError("ablation: unknown portfolio '" + p + "'");
    }
    if (!ablation.portfolios.empty() && ablation.seeds.empty()) throw ConfigError("ablation.seeds must not be empty");
    if (stats.window < 2) throw ConfigError("stats.window must be at least 2");
    if (!(stats.alpha > 0.0 && stats.alpha < 1.0)) throw ConfigError("stats.alpha must lie in (0, 1)");
  }
};

namespace detail {

/// Object view that rejects unknown keys once every expected one was read.
class Fields {
 public:
  Fields(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + " must be an object");
  }
  ~Fields() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) throw ConfigError("unknown key '" + where_ + "." + k + "'");
    }
  }

  bool has(const std::string& k) {
    seen_.insert(k);
    return j_.contains(k);
  }
  const Json& at(const std::string& k) {
    seen_.insert(k);
    if (!j_.contains(k)) throw ConfigError("missing key '" + where_ + "." + k + "'");
    return j_.at(k);
  }
  std::string path(const std::string& k) const { return where_ + "." + k; }

  template <class T>
  void get(const std::string& k, T& out) {
    if (!has(k)) return;
    try {
      out = j_.at(k).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("bad value for '" + path(k) + "'");
    }
  }
  void get_date(const std::string& k, Date& out) {
    if (!has(k)) return;
    try {
      out = Date::parse(j_.at(k).get<std::string>());
    } catch (const std::exception&) {
      throw ConfigError("bad date for '" + path(k) + "'");
    }
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline DateRange parse_range(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(where + " must be [first, last]");
  try {
    return {Date::parse(j[0].get<std::string>()), Date::parse(j[1].get<std::string>())};
  } catch (const std::exception&) {
    throw ConfigError("bad date in " + where);
  }
}

inline Json range_json(const DateRange& r) { return Json::array({r.first.to_string(), r.last.to_string()}); }

inline void read_eam(const Json& j, eam::EamHyperparams& h) {
  Fields f(j, "eam");
  f.get("gamma", h.gamma);
  f.get("commission", h.commission);
  f.get("reward_scale", h.reward_scale);
  f.get("window", h.window);
  f.get("episode_length", h.episode_length);
  f.get("episodes", h.episodes);
  f.get("n_step", h.n_step);
  f.get("epsilon_start", h.epsilon.start);
  f.get("epsilon_end", h.epsilon.end);
  f.get("epsilon_decay_steps", h.epsilon.steps);
  f.get("target_sync", h.target_sync);
  f.get("buffer_capacity", h.buffer_capacity);
  f.get("batch_size", h.batch_size);
  f.get("learning_rate", h.learning_rate);
  f.get("train_every", h.train_every);
  f.get("warmup", h.warmup);
  f.get("grad_clip", h.grad_clip);
  h.network.window = h.window;
  if (f.has("network")) {
    Fields n(f.at("network"), "eam.network");
    n.get("stem_channels", h.network.stem_channels);
    n.get("stem_kernel", h.network.stem_kernel);
    n.get("residual_blocks", h.network.residual_blocks);
    n.get("residual_kernel", h.network.residual_kernel);
    n.get("dense_width", h.network.dense_width);
    n.get("price_scale", h.network.price_scale);
  }
}

inline Json eam_json(const eam::EamHyperparams& h) {
  return {{"gamma", h.gamma},
          {"commission", h.commission},
          {"reward_scale", h.reward_scale},
          {"window", h.window},
          {"episode_length", h.episode_length},
          {"episodes", h.episodes},
          {"n_step", h.n_step},
          {"epsilon_start", h.epsilon.start},
          {"epsilon_end", h.epsilon.end},
          {"epsilon_decay_steps", h.epsilon.steps},
          {"target_sync", h.target_sync},
          {"buffer_capacity", h.buffer_capacity},
          {"batch_size", h.batch_size},
          {"learning_rate", h.learning_rate},
          {"train_every", h.train_every},
          {"warmup", h.warmup},
          {"grad_clip", h.grad_clip},
          {"network",
           {{"stem_channels", h.network.stem_channels},
            {"stem_kernel", h.network.stem_kernel},
            {"residual_blocks", h.network.residual_blocks},
            {"residual_kernel", h.network.residual_kernel},
            {"dense_width", h.network.dense_width},
            {"price_scale", h.network.price_scale}}}};
}

inline void read_sam(const Json& j, sam::SamHyperparams& h) {
  Fields f(j, "sam");
  f.get("commission", h.commission);
  f.get("risk_discount", h.risk_discount);
  f.get("clip", h.clip);
  f.get("gamma", h.gamma);
  f.get("lambda", h.lambda);
  f.get("epochs", h.epochs);
  f.get("rollout_length", h.rollout_length);
  f.get("minibatch", h.minibatch);
  f.get("updates", h.updates);
  f.get("sigma_train", h.sigma_train);
  f.get("sigma_final", h.sigma_final);
  f.get("actor_learning_rate", h.actor_learning_rate);
  f.get("critic_learning_rate", h.critic_learning_rate);
  f.get("grad_clip", h.grad_clip);
  f.get("reward_scale", h.reward_scale);
  f.get("catastrophic_reward", h.catastrophic_reward);
  f.get("validate_every", h.validate_every);
  f.get("window", h.network.window);
  if (f.has("network")) {
    Fields n(f.at("network"), "sam.network");
    n.get("conv_channels", h.network.conv_channels);
    n.get("conv_kernel", h.network.conv_kernel);
    n.get("fusion_channels", h.network.fusion_channels);
    n.get("price_scale", h.network.price_scale);
  }
}

inline Json sam_json(const sam::SamHyperparams& h) {
  return {{"commission", h.commission},
          {"risk_discount", h.risk_discount},
          {"clip", h.clip},
          {"gamma", h.gamma},
          {"lambda", h.lambda},
          {"epochs", h.epochs},
          {"rollout_length", h.rollout_length},
          {"minibatch", h.minibatch},
          {"updates", h.updates},
          {"sigma_train", h.sigma_train},
          {"sigma_final", h.sigma_final},
          {"actor_learning_rate", h.actor_learning_rate},
          {"critic_learning_rate", h.critic_learning_rate},
          {"grad_clip", h.grad_clip},
          {"reward_scale", h.reward_scale},
          {"catastrophic_reward", h.catastrophic_reward},
          {"validate_every", h.validate_every},
          {"window", h.network.window},
          {"network",
           {{"conv_channels", h.network.conv_channels},
            {"conv_kernel", h.network.conv_kernel},
            {"fusion_channels", h.network.fusion_channels},
            {"price_scale", h.network.price_scale}}}};
}

}  // namespace detail

inline ExperimentConfig parse_config(const Json& j) {
  ExperimentConfig c;
  c.synthetic.reset();
  detail::Fields f(j, "config");
  if (f.has("schema_version") && j.at("schema_version") != kConfigSchemaVersion) {
    throw ConfigError("unsupported config schema_version");
  }
  f.get("name", c.name);
  f.get("output_dir", c.output_dir);
  f.get("initial_value", c.initial_value);
  {
    detail::Fields d(f.at("data"), "data");
    if (d.has("synthetic")) {
      SyntheticSource s;
      detail::Fields g(d.at("synthetic"), "data.synthetic");
      g.get("num_assets", s.num_assets);
      g.get("length", s.length);
      g.get("half_period", s.half_period);
      g.get("drift", s.drift);
      g.get("volatility", s.volatility);
      g.get("sentiment_bias", s.sentiment_bias);
      g.get("random_segment_mean", s.random_segment_mean);
      g.get("sentiment_noise", s.sentiment_noise);
      g.get("sentiment_missing_fraction", s.sentiment_missing_fraction);
      g.get_date("start_date", s.start_date);
      g.get("symbols", s.symbols);
      c.synthetic = s;
    }
    if (d.has("csv")) {
      const auto& arr = d.at("csv");
      if (!arr.is_array()) throw ConfigError("data.csv must be an array");
      for (const auto& e : arr) {
        detail::Fields g(e, "data.csv[]");
        CsvSource s;
        g.get("symbol", s.symbol);
        g.get("prices", s.prices);
        g.get("sentiment", s.sentiment);
        if (s.symbol.empty() || s.prices.empty() || s.sentiment.empty()) {
          throw ConfigError("data.csv entries need symbol, prices and sentiment");
        }
        c.csv.push_back(s);
      }
    }
  }
  if (f.has("split")) {
    detail::Fields s(j.at("split"), "split");
    c.split.eam_train = detail::parse_range(s.at("eam_train"), "split.eam_train");
    c.split.eam_predict = detail::parse_range(s.at("eam_predict"), "split.eam_predict");
    c.split.sam_train = detail::parse_range(s.at("sam_train"), "split.sam_train");
    c.split.sam_validate = detail::parse_range(s.at("sam_validate"), "split.sam_validate");
    c.split.sam_experiment = detail::parse_range(s.at("sam_experiment"), "split.sam_experiment");
  }
  f.get("portfolios", c.portfolios);
  f.get("foundational_symbol", c.foundational_symbol);
  f.get("transfer", c.transfer);
  if (f.has("eam")) detail::read_eam(j.at("eam"), c.eam);
  if (f.has("sam")) detail::read_sam(j.at("sam"), c.sam);
  if (f.has("baselines")) {
    c.baselines.clear();
    for (const auto& e : j.at("baselines")) {
      detail::Fields b(e, "baselines[]");
      baselines::BaselineSpec spec;
      std::string kind;
      b.get("kind", kind);
      spec.kind = baselines::parse_kind(kind);
      b.get("eta", spec.eta);
      b.get("regularization", spec.regularization);
      c.baselines.push_back(spec);
    }
  }
  if (f.has("seeds")) {
    detail::Fields s(j.at("seeds"), "seeds");
    s.get("data", c.seeds.data);
    s.get("eam", c.seeds.eam);
    s.get("sam", c.seeds.sam);
  }
  if (f.has("ablation")) {
    detail::Fields a(j.at("ablation"), "ablation");
    a.get("portfolios", c.ablation.portfolios);
    a.get("seeds", c.ablation.seeds);
  }
  if (f.has("stats")) {
    detail::Fields s(j.at("stats"), "stats");
    s.get("reference", c.stats.reference);
    s.get("window", c.stats.window);
    s.get("alpha", c.stats.alpha);
    s.get("external_returns", c.stats.external_returns);
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    const auto lines = text::read_lines(path);
    for (const auto& l : lines) text += l + "\n";
  } catch (const Error& e) {
    throw ConfigError("cannot read config '" + path + "': " + e.what());
  }
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

/// Full config with every default filled in (canonical form; also used for digests).
inline Json config_json(const ExperimentConfig& c) {
  Json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["name"] = c.name;
  j["output_dir"] = c.output_dir;
  j["initial_value"] = c.initial_value;
  if (c.synthetic) {
    const auto& s = *c.synthetic;
    j["data"]["synthetic"] = {{"num_assets", s.num_assets},
                              {"length", s.length},
                              {"half_period", s.half_period},
                              {"drift", s.drift},
                              {"volatility", s.volatility},
                              {"sentiment_bias", s.sentiment_bias},
                              {"random_segment_mean", s.random_segment_mean},
                              {"sentiment_noise", s.sentiment_noise},
                              {"sentiment_missing_fraction", s.sentiment_missing_fraction},
                              {"start_date", s.start_date.to_string()},
                              {"symbols", s.symbols}};
  } else {
    j["data"]["csv"] = Json::array();
    for (const auto& s : c.csv) {
      j["data"]["csv"].push_back({{"symbol", s.symbol}, {"prices", s.prices}, {"sentiment", s.sentiment}});
    }
  }
  j["split"] = {{"eam_train", detail::range_json(c.split.eam_train)},
                {"eam_predict", detail::range_json(c.split.eam_predict)},
                {"sam_train", detail::range_json(c.split.sam_train)},
                {"sam_validate", detail::range_json(c.split.sam_validate)},
                {"sam_experiment", detail::range_json(c.split.sam_experiment)}};
  j["portfolios"] = c.portfolios;
  j["foundational_symbol"] = c.foundational_symbol;
  j["transfer"] = c.transfer;
  j["eam"] = detail::eam_json(c.eam);
  j["sam"] = detail::sam_json(c.sam);
  j["baselines"] = Json::array();
  for (const auto& b : c.baselines) {
    j["baselines"].push_back({{"kind", baselines::kind_name(b.kind)}, {"eta", b.eta}, {"regularization", b.regularization}});
  }
  j["seeds"] = {{"data", c.seeds.data}, {"eam", c.seeds.eam}, {"sam", c.seeds.sam}};
  j["ablation"] = {{"portfolios", c.ablation.portfolios}, {"seeds", c.ablation.seeds}};
  j["stats"] = {{"reference", c.stats.reference},
                {"window", c.stats.window},
                {"alpha", c.stats.alpha},
                {"external_returns", c.stats.external_returns}};
  return j;
}

/// Defaults printed by `print-defaults`: a small synthetic market and one portfolio.
inline ExperimentConfig default_config() {
  ExperimentConfig c;
  c.synthetic = SyntheticSource{};
  c.portfolios = {{"a", {"SYN0", "SYN1", "SYN2"}}};
  return c;
}

/// Digest of everything that affects results (the output directory does not).
inline std::string config_digest(const ExperimentConfig& c) {
  Json j = config_json(c);
  j.erase("output_dir");
  return digest_hex(j.dump());
}

/// Replaces every named seed with `seed` plus a fixed per-name offset.
inline void override_seeds(ExperimentConfig& c, std::uint64_t seed) {
  c.seeds = {seed, seed + 1, seed + 2};
  for (std::size_t i = 0; i < c.ablation.seeds.size(); ++i) c.ablation.seeds[i] = seed + 2 + i;
}

}  // namespace mspm::pipeline
