#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "wsc/error.hpp"
#include "wsc/graph.hpp"
#include "wsc/rng.hpp"

namespace wsc {

// FNV-1a, used to fingerprint configurations in checkpoints and reports.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// A named view over one trainable tensor (values + gradient accumulator).
// Modules own the storage; the optimizer and checkpoints reach it through
// registered views, each paired with an equally-shaped momentum buffer.
template <typename S>
struct ParamView {
  std::string name;
  S* values = nullptr;
  S* grads = nullptr;
  Eigen::Index size = 0;
};

template <typename S>
class ParamRegistry {
 public:
  void add(std::string name, S* values, S* grads, Eigen::Index size) {
    WSC_REQUIRE(values && grads && size > 0, UsageError, "bad parameter view: ", name);
    for (const auto& v : views_)
      WSC_REQUIRE(v.name != name, UsageError, "duplicate parameter name: ", name);
    views_.push_back({std::move(name), values, grads, size});
  }

  const std::vector<ParamView<S>>& views() const { return views_; }

  Eigen::Index total_size() const {
    Eigen::Index n = 0;
    for (const auto& v : views_) n += v.size;
    return n;
  }

  void clear_grads() {
    for (auto& v : views_) Eigen::Map<Vec<S>>(v.grads, v.size).setZero();
  }

 private:
  std::vector<ParamView<S>> views_;
};

// Classic momentum SGD: buf <- beta*buf + grad; values <- values - lr*buf.
// Gradients are zeroed after the step. Buffers are keyed by parameter name
// so repeated registration orders cannot shuffle state.
template <typename S>
class Sgd {
 public:
  Sgd(S learning_rate, S momentum) : lr_(learning_rate), momentum_(momentum) {
    WSC_REQUIRE(learning_rate > S(0), ConfigError, "learning rate must be > 0");
  }

  void step(const std::vector<ParamView<S>>& params) {
    for (const auto& p : params) {
      Vec<S>& buf = buffers_[p.name];
      if (buf.size() == 0) buf = Vec<S>::Zero(p.size);
      WSC_REQUIRE(buf.size() == p.size, UsageError, "momentum shape drifted for ", p.name);
      Eigen::Map<Vec<S>> values(p.values, p.size);
      Eigen::Map<Vec<S>> grads(p.grads, p.size);
      buf = momentum_ * buf + grads;
      values -= lr_ * buf;
      grads.setZero();
    }
  }

 private:
  S lr_, momentum_;
  std::map<std::string, Vec<S>> buffers_;
};

// Dense affine map y = Wx + b with Glorot-uniform W and zero b.
template <typename S>
struct Affine {
  int in = 0, out = 0;
  RowMat<S> w;  // out x in
  Vec<S> b;
  RowMat<S> grad_w;
  Vec<S> grad_b;

  // He-style fan-in bound suits the ReLU stages these layers feed; the small
  // uniform bias keeps rectified units recoverable when large momentum steps
  // push their pre-activations negative early in training (output heads are
  // unaffected: a constant shift of every logit cancels in the softmax).
  static Affine init(int in, int out, Rng& rng) {
    WSC_REQUIRE(in >= 1 && out >= 1, ConfigError, "affine needs in, out >= 1");
    Affine a;
    a.in = in;
    a.out = out;
    a.w.resize(out, in);
    const S limit = std::sqrt(S(6) / S(in));
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j)
        a.w(i, j) = static_cast<S>(2 * rng.uniform() - 1) * limit;
    a.b = Vec<S>::Constant(out, S(0.05));
    a.grad_w = RowMat<S>::Zero(out, in);
    a.grad_b = Vec<S>::Zero(out);
    return a;
  }

  Vec<S> forward(const Vec<S>& x) const {
    WSC_REQUIRE(x.size() == in, DomainError, "affine input size ", x.size(), " != ", in);
    return w * x + b;
  }

  // Accumulates parameter gradients for one (x, dy) pair; returns dx.
  Vec<S> backward(const Vec<S>& x, const Vec<S>& dy) {
    grad_w.noalias() += dy * x.transpose();
    grad_b += dy;
    return w.transpose() * dy;
  }

  void register_params(ParamRegistry<S>& reg, const std::string& prefix) {
    reg.add(prefix + ".w", w.data(), grad_w.data(), w.size());
    reg.add(prefix + ".b", b.data(), grad_b.data(), b.size());
  }
};

template <typename S>
Vec<S> relu(const Vec<S>& x) {
  return x.cwiseMax(S(0));
}

template <typename S>
Vec<S> relu_backward(const Vec<S>& x, const Vec<S>& dy) {
  return (x.array() > S(0)).select(dy, Vec<S>::Zero(dy.size()));
}

// Inverted dropout: training zeroes entries with probability rate and scales
// survivors by 1/(1-rate); evaluation is the identity. The returned mask
// already carries the scale so backward is an elementwise product.
template <typename S>
Vec<S> dropout_mask(Eigen::Index size, S rate, bool training, Rng& rng) {
  WSC_REQUIRE(rate >= S(0) && rate < S(1), ConfigError, "dropout rate must be in [0,1)");
  if (!training || rate == S(0)) return Vec<S>::Ones(size);
  const S scale = S(1) / (S(1) - rate);
  Vec<S> mask(size);
  for (Eigen::Index i = 0; i < size; ++i)
    mask[i] = static_cast<S>(rng.uniform()) < rate ? S(0) : scale;
  return mask;
}

// Mean negative log-likelihood under a row softmax plus its logit gradient
// (softmax - onehot)/n. Non-finite logits are surfaced, never clipped.
template <typename S>
struct CrossEntropyResult {
  S loss;
  RowMat<S> grad;  // n x l
};

template <typename S>
CrossEntropyResult<S> softmax_cross_entropy(const RowMat<S>& logits,
                                            const std::vector<int>& labels) {
  const int n = static_cast<int>(logits.rows()), l = static_cast<int>(logits.cols());
  WSC_REQUIRE(n >= 1 && l >= 1, DomainError, "empty logits");
  WSC_REQUIRE(static_cast<int>(labels.size()) == n, DomainError,
              "labels size ", labels.size(), " != batch size ", n);
  WSC_REQUIRE(logits.allFinite(), NumericError, "non-finite logits in cross-entropy");

  CrossEntropyResult<S> res;
  res.loss = S(0);
  res.grad.resize(n, l);
  for (int i = 0; i < n; ++i) {
    WSC_REQUIRE(labels[i] >= 0 && labels[i] < l, DomainError,
                "label ", labels[i], " out of range [0,", l, ")");
    const S m = logits.row(i).maxCoeff();
    const auto shifted = (logits.row(i).array() - m);
    const S log_z = std::log(shifted.exp().sum());
    res.loss -= (shifted[labels[i]] - log_z);
    res.grad.row(i) = (shifted - log_z).exp() / S(n);
    res.grad(i, labels[i]) -= S(1) / S(n);
  }
  res.loss /= S(n);
  return res;
}

// Versioned binary checkpoint: magic, format version, config fingerprint,
// then each parameter by name with float64 payload (portable across the
// scalar type used at runtime).
inline constexpr char kCheckpointMagic[8] = {'W', 'S', 'C', 'C', 'K', 'P', 'T', '1'};

namespace detail {

inline void write_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    const int c = in.get();
    WSC_REQUIRE(c != EOF, FormatError, "checkpoint truncated");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

}  // namespace detail

template <typename S>
void save_checkpoint(const std::string& path, std::uint64_t config_hash,
                     const std::vector<ParamView<S>>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_u64(out, config_hash);
  detail::write_u64(out, params.size());
  for (const auto& p : params) {
    detail::write_u64(out, p.name.size());
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    detail::write_u64(out, static_cast<std::uint64_t>(p.size));
    for (Eigen::Index i = 0; i < p.size; ++i) {
      const double v = static_cast<double>(p.values[i]);
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      detail::write_u64(out, bits);
    }
  }
  WSC_REQUIRE(out.good(), IoError, "short write to checkpoint: ", path);
}

template <typename S>
std::uint64_t load_checkpoint(const std::string& path, const std::vector<ParamView<S>>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  WSC_REQUIRE(in.gcount() == 8 && std::memcmp(magic, kCheckpointMagic, 8) == 0, FormatError,
              "not a checkpoint file (bad magic): ", path);
  const std::uint64_t config_hash = detail::read_u64(in);
  const std::uint64_t count = detail::read_u64(in);
  WSC_REQUIRE(count == params.size(), FormatError, "checkpoint holds ", count,
              " parameters, model has ", params.size());
  for (const auto& p : params) {
    const std::uint64_t name_len = detail::read_u64(in);
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    WSC_REQUIRE(in.gcount() == static_cast<std::streamsize>(name_len), FormatError,
                "checkpoint truncated in name");
    WSC_REQUIRE(name == p.name, FormatError, "checkpoint parameter '", name,
                "' does not match model parameter '", p.name, "'");
    const std::uint64_t size = detail::read_u64(in);
    WSC_REQUIRE(size == static_cast<std::uint64_t>(p.size), FormatError, "parameter ", name,
                " has size ", size, ", expected ", p.size);
    for (Eigen::Index i = 0; i < p.size; ++i) {
      const std::uint64_t bits = detail::read_u64(in);
      double v;
      std::memcpy(&v, &bits, 8);
      p.values[i] = static_cast<S>(v);
    }
  }
  return config_hash;
}

}  // namespace wsc
