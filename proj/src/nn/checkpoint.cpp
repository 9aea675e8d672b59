#include "rldsm/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rldsm::nn {

namespace {

constexpr char kMagic[8] = {'R', 'L', 'D', 'S', 'M', 'C', 'K', 'P'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void tensor(const std::string& name, const Tensor& t) {
    str(name);
    u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) u64(d);
    for (std::size_t i = 0; i < t.size(); ++i) f32(t[i]);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  void bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{u8()} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{u8()} << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  /// Reads a tensor into `dst`, which must already have the stored shape.
  void tensor_into(const std::string& expected_name, Tensor& dst) {
    const auto name = str();
    if (name != expected_name)
      throw CheckpointError("checkpoint tensor '" + name + "' where '" + expected_name +
                            "' was expected");
    const auto rank = u32();
    Shape shape(rank);
    for (auto& d : shape) d = u64();
    if (shape != dst.shape())
      throw CheckpointError("checkpoint tensor '" + name + "' has shape " + shape_string(shape) +
                            ", network expects " + shape_string(dst.shape()));
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = f32();
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw CheckpointError("checkpoint truncated");
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

std::vector<std::string> buffer_names(const QNetwork& net) {
  std::vector<std::string> names;
  const std::size_t layers = net.config().conv_channels.size();
  for (std::size_t i = 0; i < layers; ++i) {
    names.push_back("conv" + std::to_string(i + 1) + ".bn.running_mean");
    names.push_back("conv" + std::to_string(i + 1) + ".bn.running_var");
  }
  return names;
}

void write_network(Writer& w, const QNetwork& net) {
  const auto params = net.parameters();
  const auto bufs = net.buffers();
  const auto names = buffer_names(net);
  w.u32(static_cast<std::uint32_t>(params.size() + bufs.size()));
  for (const auto* p : params) w.tensor(p->name, p->value);
  for (std::size_t i = 0; i < bufs.size(); ++i) w.tensor(names[i], *bufs[i]);
}

void read_network(Reader& r, QNetwork& net) {
  auto params = net.parameters();
  auto bufs = net.buffers();
  const auto names = buffer_names(net);
  if (r.u32() != params.size() + bufs.size())
    throw CheckpointError("checkpoint tensor count does not match the architecture");
  for (auto* p : params) r.tensor_into(p->name, p->value);
  for (std::size_t i = 0; i < bufs.size(); ++i) r.tensor_into(names[i], *bufs[i]);
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  const auto& c = ckpt.policy.config();
  w.u32(static_cast<std::uint32_t>(c.in_planes));
  w.u32(static_cast<std::uint32_t>(c.in_rows));
  w.u32(static_cast<std::uint32_t>(c.in_cols));
  w.u32(static_cast<std::uint32_t>(c.conv_channels.size()));
  for (auto ch : c.conv_channels) w.u32(static_cast<std::uint32_t>(ch));
  for (auto v : {c.kernel, c.stride, c.padding, c.fc_hidden, c.actions})
    w.u32(static_cast<std::uint32_t>(v));

  w.u32(ckpt.target ? 2 : 1);
  write_network(w, ckpt.policy);
  if (ckpt.target) write_network(w, *ckpt.target);

  w.u8(ckpt.optimizer ? 1 : 0);
  if (ckpt.optimizer) {
    const auto& o = *ckpt.optimizer;
    w.f64(o.config.learning_rate);
    w.f64(o.config.decay);
    w.f64(o.config.epsilon);
    w.u64(o.steps);
    w.u32(static_cast<std::uint32_t>(o.mean_square.size()));
    const auto params = ckpt.policy.parameters();
    for (std::size_t i = 0; i < o.mean_square.size(); ++i)
      w.tensor(params.at(i)->name + ".mean_square", o.mean_square[i]);
  }
  w.u64(ckpt.steps_done);
  w.u64(ckpt.episodes_done);
  w.str(ckpt.rng_state);
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw CheckpointError("not a checkpoint file");
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));

  NetConfig c;
  c.in_planes = r.u32();
  c.in_rows = r.u32();
  c.in_cols = r.u32();
  c.conv_channels.resize(r.u32());
  for (auto& ch : c.conv_channels) ch = r.u32();
  c.kernel = r.u32();
  c.stride = r.u32();
  c.padding = r.u32();
  c.fc_hidden = r.u32();
  c.actions = r.u32();

  Checkpoint ckpt;
  const auto nets = r.u32();
  if (nets < 1 || nets > 2) throw CheckpointError("bad network count in checkpoint");
  ckpt.policy = QNetwork(c, 0);
  read_network(r, ckpt.policy);
  if (nets == 2) {
    ckpt.target = QNetwork(c, 0);
    read_network(r, *ckpt.target);
  }
  if (r.u8()) {
    auto params = ckpt.policy.parameters();
    OptimizerState<float> o = make_optimizer_state(params);
    o.config.learning_rate = r.f64();
    o.config.decay = r.f64();
    o.config.epsilon = r.f64();
    o.steps = r.u64();
    if (r.u32() != params.size()) throw CheckpointError("optimizer state size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i)
      r.tensor_into(params[i]->name + ".mean_square", o.mean_square[i]);
    ckpt.optimizer = std::move(o);
  }
  ckpt.steps_done = r.u64();
  ckpt.episodes_done = r.u64();
  ckpt.rng_state = r.str();
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace rldsm::nn
