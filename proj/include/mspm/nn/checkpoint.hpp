#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "mspm/core/error.hpp"
#include "mspm/nn/adam.hpp"
#include "mspm/nn/graph.hpp"

namespace mspm::nn {

inline constexpr char kCheckpointMagic[8] = {'M', 'S', 'P', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t topology_digest = 0;
  std::vector<Tensor> parameters;
  std::optional<AdamState> optimizer;
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Snapshot of any model exposing `parameters()` and `topology()`.
template <class Model>
Checkpoint make_checkpoint(Model& model, std::uint64_t seed, std::uint64_t epoch,
                           const AdamState* optimizer = nullptr) {
  Checkpoint c;
  c.topology_digest = topology_digest(model.topology());
  for (const auto* p : model.parameters()) {
    p->require_finite("checkpoint parameters");
    c.parameters.push_back(*p);
  }
  if (optimizer) c.optimizer = *optimizer;
  c.seed = seed;
  c.epoch = epoch;
  return c;
}

/// Writes checkpoint parameters into `model` after checking the topology digest.
template <class Model>
void restore(Model& model, const Checkpoint& c) {
  if (c.topology_digest != topology_digest(model.topology())) {
    throw CheckpointError("checkpoint topology digest " + to_hex(c.topology_digest) + " does not match model " +
                          to_hex(topology_digest(model.topology())));
  }
  auto params = model.parameters();
  if (params.size() != c.parameters.size()) throw CheckpointError("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != c.parameters[i].shape()) throw CheckpointError("checkpoint parameter shape mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) *params[i] = c.parameters[i];
}

/// Optimizer state from the checkpoint, or fresh accumulators when it carries none.
template <class Model>
AdamState optimizer_or_fresh(Model& model, const Checkpoint& c, double learning_rate) {
  if (c.optimizer) return *c.optimizer;
  return AdamState::for_parameters(model.parameters(), learning_rate);
}

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

class Writer {
 public:
  template <class T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void tensor(const Tensor& t) {
    put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint64_t>(d);
    out_.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  Tensor tensor() {
    const auto rank = get<std::uint32_t>();
    if (rank > 8) throw CheckpointError("checkpoint: implausible tensor rank");
    Shape s(rank);
    for (auto& d : s) d = get<std::uint64_t>();
    Tensor t(s);
    need(t.size() * sizeof(double));
    std::memcpy(t.data(), in_.data() + pos_, t.size() * sizeof(double));
    pos_ += t.size() * sizeof(double);
    return t;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto v = in_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw CheckpointError("checkpoint: truncated file");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize(const Checkpoint& c) {
  detail::Writer w;
  w.raw(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.put<std::uint32_t>(c.version);
  w.put<std::uint64_t>(c.topology_digest);
  w.put<std::uint64_t>(c.seed);
  w.put<std::uint64_t>(c.epoch);
  w.put<std::uint64_t>(c.parameters.size());
  for (const auto& t : c.parameters) w.tensor(t);
  w.put<std::uint8_t>(c.optimizer ? 1 : 0);
  if (c.optimizer) {
    const auto& o = *c.optimizer;
    w.put<std::uint64_t>(o.step);
    w.put<double>(o.learning_rate);
    w.put<double>(o.beta1);
    w.put<double>(o.beta2);
    w.put<double>(o.epsilon);
    w.put<std::uint64_t>(o.first_moment.size());
    for (const auto& t : o.first_moment) w.tensor(t);
    for (const auto& t : o.second_moment) w.tensor(t);
  }
  return w.take();
}

inline Checkpoint deserialize(std::string_view bytes) {
  detail::Reader r(bytes);
  if (r.raw(sizeof(kCheckpointMagic)) != std::string_view(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  Checkpoint c;
  c.version = r.get<std::uint32_t>();
  if (c.version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(c.version));
  }
  c.topology_digest = r.get<std::uint64_t>();
  c.seed = r.get<std::uint64_t>();
  c.epoch = r.get<std::uint64_t>();
  const auto n = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n; ++i) c.parameters.push_back(r.tensor());
  if (r.get<std::uint8_t>()) {
    AdamState o;
    o.step = r.get<std::uint64_t>();
    o.learning_rate = r.get<double>();
    o.beta1 = r.get<double>();
    o.beta2 = r.get<double>();
    o.epsilon = r.get<double>();
    const auto k = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < k; ++i) o.first_moment.push_back(r.tensor());
    for (std::uint64_t i = 0; i < k; ++i) o.second_moment.push_back(r.tensor());
    c.optimizer = std::move(o);
  }
  if (!r.done()) throw CheckpointError("checkpoint: trailing bytes");
  return c;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
  const auto bytes = serialize(c);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace mspm::nn
