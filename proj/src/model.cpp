#include "bitloupe/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "bitloupe/kernels.hpp"

namespace bitloupe {

void ModelConfig::validate() const {
  if (n_blocks < 1 || d_model < 1 || n_heads < 1 || d_ff < 1 ||
      vocab_size < 1 || max_seq_len < 1) {
    throw std::invalid_argument("all model extents must be >= 1");
  }
  if (d_model % n_heads != 0) {
    throw std::invalid_argument("n_heads must divide d_model");
  }
}

const WeightTensor& ModelState::tensor(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) {
    throw std::out_of_range("model has no tensor named " + name);
  }
  return *it->second;
}

std::string block_tensor_name(int block, std::string_view sublayer) {
  return "block." + std::to_string(block) + "." + std::string(sublayer);
}

bool parse_block_tensor_name(const std::string& name, int& block,
                             std::string& sublayer) {
  if (!name.starts_with("block.")) {
    return false;
  }
  const std::size_t dot = name.find('.', 6);
  if (dot == std::string::npos) {
    return false;
  }
  block = std::stoi(name.substr(6, dot - 6));
  sublayer = name.substr(dot + 1);
  return true;
}

std::vector<std::string> schema_tensor_names(const ModelConfig& config) {
  std::vector<std::string> names;
  names.reserve(2 + 6 * static_cast<std::size_t>(config.n_blocks));
  names.emplace_back("embed.tok");
  names.emplace_back("unembed");
  for (int b = 0; b < config.n_blocks; ++b) {
    for (const char* tag : kSublayerTags) {
      names.push_back(block_tensor_name(b, tag));
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::vector<std::int64_t> schema_tensor_shape(const ModelConfig& config,
                                              const std::string& name) {
  // Linear weights are stored row-major [out_dim, in_dim].
  if (name == "embed.tok" || name == "unembed") {
    return {config.vocab_size, config.d_model};
  }
  int block = 0;
  std::string sublayer;
  if (!parse_block_tensor_name(name, block, sublayer) || block < 0 ||
      block >= config.n_blocks) {
    throw std::invalid_argument("not a schema tensor: " + name);
  }
  if (sublayer == "mlp.up") {
    return {config.d_ff, config.d_model};
  }
  if (sublayer == "mlp.down") {
    return {config.d_model, config.d_ff};
  }
  if (sublayer == "attn.q" || sublayer == "attn.k" || sublayer == "attn.v" ||
      sublayer == "attn.o") {
    return {config.d_model, config.d_model};
  }
  throw std::invalid_argument("not a schema tensor: " + name);
}

void ModelState::validate() const {
  config.validate();
  const auto names = schema_tensor_names(config);
  if (tensors.size() != names.size()) {
    throw std::invalid_argument("tensor map does not match architecture schema");
  }
  for (const auto& name : names) {
    const WeightTensor& t = tensor(name);
    if (t.shape() != schema_tensor_shape(config, name)) {
      throw std::invalid_argument("tensor " + name + " has a non-schema shape");
    }
  }
  if (alpha.size() != static_cast<std::size_t>(config.n_blocks)) {
    throw std::invalid_argument("alpha length must equal n_blocks");
  }
  for (float a : alpha) {
    if (!(a >= 0.0f)) {
      throw std::invalid_argument("alpha entries must be non-negative");
    }
  }
}

ModelState init_model(const ModelConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  // Symmetric uniform init, half-width sqrt(6 / (fan_in + fan_out)).
  const auto next_uniform = [&rng]() {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  ModelState m;
  m.config = config;
  m.alpha.assign(static_cast<std::size_t>(config.n_blocks), 1.0f);
  for (const auto& name : schema_tensor_names(config)) {
    const auto shape = schema_tensor_shape(config, name);
    const double fan_out = static_cast<double>(shape[0]);
    const double fan_in = static_cast<double>(shape[1]);
    const double half_width = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<float> values(shape_element_count(shape));
    for (float& v : values) {
      v = static_cast<float>((2.0 * next_uniform() - 1.0) * half_width);
    }
    m.tensors.emplace(name, std::make_shared<WeightTensor>(
                                WeightTensor::from_floats(name, shape,
                                                          std::move(values))));
  }
  return m;
}

float rms_inverse_scale(const float* x, int n) {
  constexpr float kRmsEps = 1e-6f;
  const float ss = kern::active().sum_squares(x, static_cast<std::size_t>(n));
  return 1.0f / std::sqrt(ss / static_cast<float>(n) + kRmsEps);
}

namespace {

void rms_normalize(const float* in, float* out, int n) {
  const float scale = rms_inverse_scale(in, n);
  for (int i = 0; i < n; ++i) {
    out[i] = in[i] * scale;
  }
}

float silu(float x) { return x / (1.0f + std::exp(-x)); }

// Softmax over scores[0..n); serial max/sum so every kernel variant sees the
// same arithmetic.
void softmax_inplace(float* scores, int n) {
  float mx = scores[0];
  for (int i = 1; i < n; ++i) {
    mx = std::max(mx, scores[i]);
  }
  float sum = 0.0f;
  for (int i = 0; i < n; ++i) {
    scores[i] = std::exp(scores[i] - mx);
    sum += scores[i];
  }
  const float inv = 1.0f / sum;
  for (int i = 0; i < n; ++i) {
    scores[i] *= inv;
  }
}

bool all_finite(const Matrix& m) {
  for (float v : m.data) {
    if (!std::isfinite(v)) {
      return false;
    }
  }
  return true;
}

}  // namespace

// Fixed sinusoidal position table; parameter-free so the tensor schema stays
// exactly {embed, unembed, per-block projections}.
Matrix sinusoidal_positions(int seq_len, int d_model) {
  Matrix p(seq_len, d_model);
  for (int pos = 0; pos < seq_len; ++pos) {
    for (int c = 0; c < d_model; ++c) {
      const int pair = c / 2;
      const double freq =
          std::pow(10000.0, -2.0 * static_cast<double>(pair) / d_model);
      const double angle = pos * freq;
      p.at(pos, c) = static_cast<float>(c % 2 == 0 ? std::sin(angle)
                                                   : std::cos(angle));
    }
  }
  return p;
}

ForwardTrace forward(const ModelState& m, std::span<const int> tokens,
                     const CaptureFlags& capture) {
  const ModelConfig& cfg = m.config;
  if (tokens.empty()) {
    throw std::invalid_argument("token sequence is empty");
  }
  if (static_cast<int>(tokens.size()) > cfg.max_seq_len) {
    throw std::invalid_argument("token sequence exceeds max_seq_len");
  }
  for (int t : tokens) {
    if (t < 0 || t >= cfg.vocab_size) {
      throw std::invalid_argument("token id out of vocabulary range");
    }
  }

  const auto& k = kern::active();
  const int T = static_cast<int>(tokens.size());
  const int d = cfg.d_model;
  const int heads = cfg.n_heads;
  const int hd = d / heads;
  const float inv_sqrt_hd = 1.0f / std::sqrt(static_cast<float>(hd));

  const WeightTensor& embed = m.tensor("embed.tok");
  const WeightTensor& unembed = m.tensor("unembed");

  ForwardTrace trace;
  Matrix h(T, d);
  const Matrix pos = sinusoidal_positions(T, d);
  for (int t = 0; t < T; ++t) {
    const float* row = embed.floats().data() +
                       static_cast<std::size_t>(tokens[t]) * d;
    for (int c = 0; c < d; ++c) {
      h.at(t, c) = row[c] + pos.at(t, c);
    }
  }

  if (capture.hidden_states) {
    trace.hidden.push_back(h);
  }

  Matrix x(T, d), q(T, d), kk(T, d), v(T, d), av(T, d);
  Matrix attn_out(T, d), mlp_out(T, d);
  std::vector<float> scores(static_cast<std::size_t>(T));
  std::vector<float> ff(static_cast<std::size_t>(cfg.d_ff));

  for (int b = 0; b < cfg.n_blocks; ++b) {
    const float* wq = m.tensor(block_tensor_name(b, "attn.q")).floats().data();
    const float* wk = m.tensor(block_tensor_name(b, "attn.k")).floats().data();
    const float* wv = m.tensor(block_tensor_name(b, "attn.v")).floats().data();
    const float* wo = m.tensor(block_tensor_name(b, "attn.o")).floats().data();
    const float* wup = m.tensor(block_tensor_name(b, "mlp.up")).floats().data();
    const float* wdown =
        m.tensor(block_tensor_name(b, "mlp.down")).floats().data();

    // Attention sublayer.
    for (int t = 0; t < T; ++t) {
      rms_normalize(h.row(t), x.row(t), d);
    }
    for (int t = 0; t < T; ++t) {
      k.matvec_rows(wq, x.row(t), q.row(t), d, d);
      k.matvec_rows(wk, x.row(t), kk.row(t), d, d);
      k.matvec_rows(wv, x.row(t), v.row(t), d, d);
    }
    av.data.assign(av.data.size(), 0.0f);
    for (int head = 0; head < heads; ++head) {
      const int off = head * hd;
      for (int t = 0; t < T; ++t) {
        for (int s = 0; s <= t; ++s) {
          scores[s] = k.dot(q.row(t) + off, kk.row(s) + off, hd) * inv_sqrt_hd;
        }
        softmax_inplace(scores.data(), t + 1);
        for (int s = 0; s <= t; ++s) {
          k.axpy(scores[s], v.row(s) + off, av.row(t) + off, hd);
        }
      }
    }
    for (int t = 0; t < T; ++t) {
      k.matvec_rows(wo, av.row(t), attn_out.row(t), d, d);
    }

    // MLP sublayer reads the post-attention stream u = h + attn_out.
    Matrix u(T, d);
    for (int t = 0; t < T; ++t) {
      for (int c = 0; c < d; ++c) {
        u.at(t, c) = h.at(t, c) + attn_out.at(t, c);
      }
    }
    for (int t = 0; t < T; ++t) {
      rms_normalize(u.row(t), x.row(t), d);
      k.matvec_rows(wup, x.row(t), ff.data(), cfg.d_ff, d);
      for (int j = 0; j < cfg.d_ff; ++j) {
        ff[j] = silu(ff[j]);
      }
      k.matvec_rows(wdown, ff.data(), mlp_out.row(t), d, cfg.d_ff);
    }

    const float a = m.alpha[b];
    if (a == 1.0f) {
      for (int t = 0; t < T; ++t) {
        for (int c = 0; c < d; ++c) {
          h.at(t, c) = u.at(t, c) + mlp_out.at(t, c);
        }
      }
    } else if (a == 0.0f) {
      // Zero scaling skips the block entirely, so a non-finite block output
      // cannot leak into the stream: h_{i+1} == h_i holds exactly.
    } else {
      for (int t = 0; t < T; ++t) {
        for (int c = 0; c < d; ++c) {
          const float total = u.at(t, c) + mlp_out.at(t, c);
          const float delta = total - h.at(t, c);
          h.at(t, c) = h.at(t, c) + a * delta;
        }
      }
    }

    if (!all_finite(h) || !all_finite(attn_out) || !all_finite(mlp_out)) {
      trace.saw_nonfinite = true;
    }
    if (capture.hidden_states) {
      trace.hidden.push_back(h);
    }
    if (capture.sublayers) {
      trace.attn_out.push_back(attn_out);
      trace.mlp_out.push_back(mlp_out);
    }
  }

  trace.logits = Matrix(T, cfg.vocab_size);
  for (int t = 0; t < T; ++t) {
    rms_normalize(h.row(t), x.row(t), d);
    k.matvec_rows(unembed.floats().data(), x.row(t), trace.logits.row(t),
                  cfg.vocab_size, d);
  }
  if (!all_finite(trace.logits)) {
    trace.saw_nonfinite = true;
  }
  return trace;
}

ModelState with_alpha(const ModelState& m, int block, float value) {
  if (block < 0 || block >= m.config.n_blocks) {
    throw std::out_of_range("block index out of range");
  }
  if (!(value >= 0.0f)) {
    throw std::invalid_argument("alpha must be non-negative");
  }
  ModelState out = m;  // tensors shared via shared_ptr
  out.alpha[static_cast<std::size_t>(block)] = value;
  return out;
}

}  // namespace bitloupe
