#include "bitloupe/fit.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <vector>

#include "bitloupe/kernels.hpp"
#include "bitloupe/parallel.hpp"

namespace bitloupe {
namespace {

using kern::KernelTable;

struct BlockWeights {
  const float* q;
  const float* k;
  const float* v;
  const float* o;
  const float* up;
  const float* down;
};

struct BlockGrads {
  float* q;
  float* k;
  float* v;
  float* o;
  float* up;
  float* down;
};

float silu(float x) { return x / (1.0f + std::exp(-x)); }

float silu_grad(float x) {
  const float s = 1.0f / (1.0f + std::exp(-x));
  return s * (1.0f + x * (1.0f - s));
}

// dx += s*dy - (s^3 * dot(dy, x) / n) * x, the gradient through
// y = x * rms_inverse_scale(x).
void rms_backward(const float* x, float s, const float* dy, float* dx, int n) {
  const auto& k = kern::active();
  const float t = k.dot(dy, x, static_cast<std::size_t>(n));
  const float factor = s * s * s * t / static_cast<float>(n);
  for (int i = 0; i < n; ++i) {
    dx[i] += s * dy[i] - factor * x[i];
  }
}

struct BlockCache {
  Matrix h_in;
  Matrix x_attn;
  std::vector<float> inv_rms_attn;
  Matrix q, k, v;
  std::vector<Matrix> probs;  // per head, T x T, rows causal
  Matrix av;
  Matrix u;
  Matrix x_mlp;
  std::vector<float> inv_rms_mlp;
  Matrix ff_pre, ff_act;
};

struct SeqCache {
  std::vector<BlockCache> blocks;
  std::vector<float> alphas;  // per-block residual scale for this pass
  Matrix h_final;
  Matrix x_final;
  std::vector<float> inv_rms_final;
  Matrix logits;
};

struct Workspace {
  const ModelConfig* cfg;
  const float* embed;
  const float* unembed;
  std::vector<BlockWeights> blocks;
  Matrix positions;
};

void forward_train(const Workspace& w, std::span<const int> tokens,
                   SeqCache& cache) {
  const auto& kt = kern::active();
  const ModelConfig& cfg = *w.cfg;
  const int T = static_cast<int>(tokens.size());
  const int d = cfg.d_model;
  const int heads = cfg.n_heads;
  const int hd = d / heads;
  const float inv_sqrt_hd = 1.0f / std::sqrt(static_cast<float>(hd));

  Matrix h(T, d);
  for (int t = 0; t < T; ++t) {
    const float* row = w.embed + static_cast<std::size_t>(tokens[t]) * d;
    for (int c = 0; c < d; ++c) {
      h.at(t, c) = row[c] + w.positions.at(t, c);
    }
  }

  cache.blocks.resize(static_cast<std::size_t>(cfg.n_blocks));
  for (int b = 0; b < cfg.n_blocks; ++b) {
    BlockCache& bc = cache.blocks[static_cast<std::size_t>(b)];
    const BlockWeights& bw = w.blocks[static_cast<std::size_t>(b)];
    bc.h_in = h;
    bc.x_attn = Matrix(T, d);
    bc.inv_rms_attn.resize(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      const float s = rms_inverse_scale(h.row(t), d);
      bc.inv_rms_attn[static_cast<std::size_t>(t)] = s;
      for (int c = 0; c < d; ++c) {
        bc.x_attn.at(t, c) = h.at(t, c) * s;
      }
    }
    bc.q = Matrix(T, d);
    bc.k = Matrix(T, d);
    bc.v = Matrix(T, d);
    for (int t = 0; t < T; ++t) {
      kt.matvec_rows(bw.q, bc.x_attn.row(t), bc.q.row(t), d, d);
      kt.matvec_rows(bw.k, bc.x_attn.row(t), bc.k.row(t), d, d);
      kt.matvec_rows(bw.v, bc.x_attn.row(t), bc.v.row(t), d, d);
    }
    bc.probs.assign(static_cast<std::size_t>(heads), Matrix(T, T));
    bc.av = Matrix(T, d);
    for (int head = 0; head < heads; ++head) {
      const int off = head * hd;
      Matrix& p = bc.probs[static_cast<std::size_t>(head)];
      for (int t = 0; t < T; ++t) {
        float* prow = p.row(t);
        float mx = -std::numeric_limits<float>::infinity();
        for (int s = 0; s <= t; ++s) {
          prow[s] = kt.dot(bc.q.row(t) + off, bc.k.row(s) + off,
                           static_cast<std::size_t>(hd)) *
                    inv_sqrt_hd;
          mx = std::max(mx, prow[s]);
        }
        float sum = 0.0f;
        for (int s = 0; s <= t; ++s) {
          prow[s] = std::exp(prow[s] - mx);
          sum += prow[s];
        }
        const float inv = 1.0f / sum;
        for (int s = 0; s <= t; ++s) {
          prow[s] *= inv;
          kt.axpy(prow[s], bc.v.row(s) + off, bc.av.row(t) + off,
                  static_cast<std::size_t>(hd));
        }
      }
    }
    bc.u = Matrix(T, d);
    for (int t = 0; t < T; ++t) {
      // attn_out = Wo @ av, folded straight into u = h + attn_out
      std::vector<float> attn_out(static_cast<std::size_t>(d));
      kt.matvec_rows(bw.o, bc.av.row(t), attn_out.data(), d, d);
      for (int c = 0; c < d; ++c) {
        bc.u.at(t, c) = h.at(t, c) + attn_out[static_cast<std::size_t>(c)];
      }
    }
    bc.x_mlp = Matrix(T, d);
    bc.inv_rms_mlp.resize(static_cast<std::size_t>(T));
    bc.ff_pre = Matrix(T, cfg.d_ff);
    bc.ff_act = Matrix(T, cfg.d_ff);
    for (int t = 0; t < T; ++t) {
      const float s = rms_inverse_scale(bc.u.row(t), d);
      bc.inv_rms_mlp[static_cast<std::size_t>(t)] = s;
      for (int c = 0; c < d; ++c) {
        bc.x_mlp.at(t, c) = bc.u.at(t, c) * s;
      }
      kt.matvec_rows(bw.up, bc.x_mlp.row(t), bc.ff_pre.row(t), cfg.d_ff, d);
      for (int j = 0; j < cfg.d_ff; ++j) {
        bc.ff_act.at(t, j) = silu(bc.ff_pre.at(t, j));
      }
      std::vector<float> mlp_out(static_cast<std::size_t>(d));
      kt.matvec_rows(bw.down, bc.ff_act.row(t), mlp_out.data(), d, cfg.d_ff);
      const float a = cache.alphas[static_cast<std::size_t>(b)];
      for (int c = 0; c < d; ++c) {
        const float total = bc.u.at(t, c) + mlp_out[static_cast<std::size_t>(c)];
        h.at(t, c) = h.at(t, c) + a * (total - h.at(t, c));
      }
    }
  }

  cache.h_final = h;
  cache.x_final = Matrix(T, d);
  cache.inv_rms_final.resize(static_cast<std::size_t>(T));
  cache.logits = Matrix(T, cfg.vocab_size);
  for (int t = 0; t < T; ++t) {
    const float s = rms_inverse_scale(h.row(t), d);
    cache.inv_rms_final[static_cast<std::size_t>(t)] = s;
    for (int c = 0; c < d; ++c) {
      cache.x_final.at(t, c) = h.at(t, c) * s;
    }
    kt.matvec_rows(w.unembed, cache.x_final.row(t), cache.logits.row(t),
                   cfg.vocab_size, d);
  }
}

struct GradSet {
  std::vector<float> embed;
  std::vector<float> unembed;
  std::vector<std::vector<float>> storage;  // per-block q,k,v,o,up,down

  explicit GradSet(const ModelConfig& cfg) {
    const std::size_t d = static_cast<std::size_t>(cfg.d_model);
    const std::size_t ff = static_cast<std::size_t>(cfg.d_ff);
    const std::size_t vocab = static_cast<std::size_t>(cfg.vocab_size);
    embed.assign(vocab * d, 0.0f);
    unembed.assign(vocab * d, 0.0f);
    storage.resize(static_cast<std::size_t>(cfg.n_blocks) * 6);
    for (int b = 0; b < cfg.n_blocks; ++b) {
      auto* s = &storage[static_cast<std::size_t>(b) * 6];
      s[0].assign(d * d, 0.0f);
      s[1].assign(d * d, 0.0f);
      s[2].assign(d * d, 0.0f);
      s[3].assign(d * d, 0.0f);
      s[4].assign(ff * d, 0.0f);
      s[5].assign(d * ff, 0.0f);
    }
  }

  BlockGrads block(int b) {
    auto* s = &storage[static_cast<std::size_t>(b) * 6];
    return {s[0].data(), s[1].data(), s[2].data(),
            s[3].data(), s[4].data(), s[5].data()};
  }

  void add(const GradSet& other) {
    const auto merge = [](std::vector<float>& into, const std::vector<float>& from) {
      for (std::size_t i = 0; i < into.size(); ++i) {
        into[i] += from[i];
      }
    };
    merge(embed, other.embed);
    merge(unembed, other.unembed);
    for (std::size_t i = 0; i < storage.size(); ++i) {
      merge(storage[i], other.storage[i]);
    }
  }
};

// Backprop of the mean cross-entropy; grads scaled by 1 / (batch * T).
double backward_train(const Workspace& w, std::span<const int> tokens,
                      std::span<const int> targets, const SeqCache& cache,
                      GradSet& g, float inv_batch) {
  const auto& kt = kern::active();
  const ModelConfig& cfg = *w.cfg;
  const int T = static_cast<int>(tokens.size());
  const int d = cfg.d_model;
  const int heads = cfg.n_heads;
  const int hd = d / heads;
  const float inv_sqrt_hd = 1.0f / std::sqrt(static_cast<float>(hd));
  const float scale = inv_batch / static_cast<float>(T);

  double loss = 0.0;
  Matrix dlogits(T, cfg.vocab_size);
  for (int t = 0; t < T; ++t) {
    const float* row = cache.logits.row(t);
    float mx = row[0];
    for (int c = 1; c < cfg.vocab_size; ++c) {
      mx = std::max(mx, row[c]);
    }
    double sum = 0.0;
    for (int c = 0; c < cfg.vocab_size; ++c) {
      sum += std::exp(static_cast<double>(row[c]) - mx);
    }
    const int target = targets[static_cast<std::size_t>(t)];
    loss += (static_cast<double>(mx) + std::log(sum) -
             static_cast<double>(row[target])) /
            T;
    for (int c = 0; c < cfg.vocab_size; ++c) {
      const double p = std::exp(static_cast<double>(row[c]) - mx) / sum;
      dlogits.at(t, c) =
          (static_cast<float>(p) - (c == target ? 1.0f : 0.0f)) * scale;
    }
  }

  // Unembedding and final normalization.
  Matrix dh(T, d);
  for (int t = 0; t < T; ++t) {
    std::vector<float> dxf(static_cast<std::size_t>(d), 0.0f);
    for (int o = 0; o < cfg.vocab_size; ++o) {
      const float a = dlogits.at(t, o);
      if (a != 0.0f) {
        kt.axpy(a, cache.x_final.row(t),
                g.unembed.data() + static_cast<std::size_t>(o) * d,
                static_cast<std::size_t>(d));
        kt.axpy(a, w.unembed + static_cast<std::size_t>(o) * d, dxf.data(),
                static_cast<std::size_t>(d));
      }
    }
    rms_backward(cache.h_final.row(t), cache.inv_rms_final[static_cast<std::size_t>(t)],
                 dxf.data(), dh.row(t), d);
  }

  for (int b = cfg.n_blocks - 1; b >= 0; --b) {
    const BlockCache& bc = cache.blocks[static_cast<std::size_t>(b)];
    const BlockWeights& bw = w.blocks[static_cast<std::size_t>(b)];
    const BlockGrads bg = g.block(b);
    const float ba = cache.alphas[static_cast<std::size_t>(b)];

    // h_next = h + ba * ((u + mlp_out) - h): the scaled path carries ba,
    // the skip path (1 - ba).
    Matrix dt(T, d);
    for (int t = 0; t < T; ++t) {
      for (int c = 0; c < d; ++c) {
        dt.at(t, c) = ba * dh.at(t, c);
      }
    }
    Matrix du = dt;
    Matrix dx_mlp(T, d);
    for (int t = 0; t < T; ++t) {
      // mlp_out = Wdown @ ff_act
      std::vector<float> dff(static_cast<std::size_t>(cfg.d_ff), 0.0f);
      for (int o = 0; o < d; ++o) {
        const float a = dt.at(t, o);
        if (a != 0.0f) {
          kt.axpy(a, bc.ff_act.row(t),
                  bg.down + static_cast<std::size_t>(o) * cfg.d_ff,
                  static_cast<std::size_t>(cfg.d_ff));
          kt.axpy(a, bw.down + static_cast<std::size_t>(o) * cfg.d_ff,
                  dff.data(), static_cast<std::size_t>(cfg.d_ff));
        }
      }
      for (int j = 0; j < cfg.d_ff; ++j) {
        dff[static_cast<std::size_t>(j)] *= silu_grad(bc.ff_pre.at(t, j));
      }
      for (int j = 0; j < cfg.d_ff; ++j) {
        const float a = dff[static_cast<std::size_t>(j)];
        if (a != 0.0f) {
          kt.axpy(a, bc.x_mlp.row(t), bg.up + static_cast<std::size_t>(j) * d,
                  static_cast<std::size_t>(d));
          kt.axpy(a, bw.up + static_cast<std::size_t>(j) * d, dx_mlp.row(t),
                  static_cast<std::size_t>(d));
        }
      }
      rms_backward(bc.u.row(t), bc.inv_rms_mlp[static_cast<std::size_t>(t)],
                   dx_mlp.row(t), du.row(t), d);
    }

    // u = h_in + attn_out, attn_out = Wo @ av
    Matrix dav(T, d);
    for (int t = 0; t < T; ++t) {
      for (int o = 0; o < d; ++o) {
        const float a = du.at(t, o);
        if (a != 0.0f) {
          kt.axpy(a, bc.av.row(t), bg.o + static_cast<std::size_t>(o) * d,
                  static_cast<std::size_t>(d));
          kt.axpy(a, bw.o + static_cast<std::size_t>(o) * d, dav.row(t),
                  static_cast<std::size_t>(d));
        }
      }
    }

    Matrix dq(T, d), dk(T, d), dv(T, d);
    std::vector<float> dprow(static_cast<std::size_t>(T));
    for (int head = 0; head < heads; ++head) {
      const int off = head * hd;
      const Matrix& p = bc.probs[static_cast<std::size_t>(head)];
      for (int t = 0; t < T; ++t) {
        for (int s = 0; s <= t; ++s) {
          dprow[static_cast<std::size_t>(s)] =
              kt.dot(dav.row(t) + off, bc.v.row(s) + off,
                     static_cast<std::size_t>(hd));
          kt.axpy(p.at(t, s), dav.row(t) + off, dv.row(s) + off,
                  static_cast<std::size_t>(hd));
        }
        float inner = 0.0f;
        for (int s = 0; s <= t; ++s) {
          inner += dprow[static_cast<std::size_t>(s)] * p.at(t, s);
        }
        for (int s = 0; s <= t; ++s) {
          const float ds =
              p.at(t, s) * (dprow[static_cast<std::size_t>(s)] - inner) *
              inv_sqrt_hd;
          if (ds != 0.0f) {
            kt.axpy(ds, bc.k.row(s) + off, dq.row(t) + off,
                    static_cast<std::size_t>(hd));
            kt.axpy(ds, bc.q.row(t) + off, dk.row(s) + off,
                    static_cast<std::size_t>(hd));
          }
        }
      }
    }

    Matrix dx_attn(T, d);
    const auto project_back = [&](const Matrix& dout, const float* weights,
                                  float* grad_out) {
      for (int t = 0; t < T; ++t) {
        for (int o = 0; o < d; ++o) {
          const float a = dout.at(t, o);
          if (a != 0.0f) {
            kt.axpy(a, bc.x_attn.row(t), grad_out + static_cast<std::size_t>(o) * d,
                    static_cast<std::size_t>(d));
            kt.axpy(a, weights + static_cast<std::size_t>(o) * d, dx_attn.row(t),
                    static_cast<std::size_t>(d));
          }
        }
      }
    };
    project_back(dq, bw.q, bg.q);
    project_back(dk, bw.k, bg.k);
    project_back(dv, bw.v, bg.v);

    // h_in feeds the attention branch, the residual into u, and the skip
    // path around the whole block.
    Matrix dh_in = du;
    for (int t = 0; t < T; ++t) {
      for (int c = 0; c < d; ++c) {
        dh_in.at(t, c) += (1.0f - ba) * dh.at(t, c);
      }
      rms_backward(bc.h_in.row(t), bc.inv_rms_attn[static_cast<std::size_t>(t)],
                   dx_attn.row(t), dh_in.row(t), d);
    }
    dh = std::move(dh_in);
  }

  for (int t = 0; t < T; ++t) {
    kt.axpy(1.0f, dh.row(t),
            g.embed.data() + static_cast<std::size_t>(tokens[t]) * d,
            static_cast<std::size_t>(d));
  }
  return loss;
}

}  // namespace

ModelState fit_model(const ModelState& init, const FitOptions& opts) {
  init.validate();
  const ModelConfig& cfg = init.config;
  if (opts.batch < 1 || opts.steps < 0 || !(opts.lr > 0.0f)) {
    throw std::invalid_argument("bad fit options");
  }
  for (const auto& [name, tensor] : init.tensors) {
    if (tensor->dtype() != Dtype::f32) {
      throw std::invalid_argument("fitting requires float32 tensors, got " +
                                  std::string(dtype_name(tensor->dtype())) +
                                  " for " + name);
    }
  }
  if (opts.data.length > cfg.max_seq_len) {
    throw std::invalid_argument("training sequences exceed max_seq_len");
  }

  const SyntheticTaskSet train = generate_tasks(opts.data, cfg.vocab_size);

  // Mutable parameter buffers, canonical name order.
  std::map<std::string, std::vector<float>> weights;
  for (const auto& [name, tensor] : init.tensors) {
    weights.emplace(name, tensor->floats());
  }

  Workspace w;
  w.cfg = &cfg;
  w.embed = weights.at("embed.tok").data();
  w.unembed = weights.at("unembed").data();
  w.blocks.resize(static_cast<std::size_t>(cfg.n_blocks));
  for (int b = 0; b < cfg.n_blocks; ++b) {
    w.blocks[static_cast<std::size_t>(b)] = {
        weights.at(block_tensor_name(b, "attn.q")).data(),
        weights.at(block_tensor_name(b, "attn.k")).data(),
        weights.at(block_tensor_name(b, "attn.v")).data(),
        weights.at(block_tensor_name(b, "attn.o")).data(),
        weights.at(block_tensor_name(b, "mlp.up")).data(),
        weights.at(block_tensor_name(b, "mlp.down")).data(),
    };
  }
  w.positions = sinusoidal_positions(opts.data.length, cfg.d_model);

  // Adam state, canonical order.
  std::map<std::string, std::pair<std::vector<float>, std::vector<float>>> adam;
  for (const auto& [name, buf] : weights) {
    adam.emplace(name, std::make_pair(std::vector<float>(buf.size(), 0.0f),
                                      std::vector<float>(buf.size(), 0.0f)));
  }

  const auto grad_buffer_of = [&](GradSet& g, const std::string& name) -> float* {
    if (name == "embed.tok") return g.embed.data();
    if (name == "unembed") return g.unembed.data();
    int b = 0;
    std::string tag;
    parse_block_tensor_name(name, b, tag);
    const BlockGrads bg = g.block(b);
    if (tag == "attn.q") return bg.q;
    if (tag == "attn.k") return bg.k;
    if (tag == "attn.v") return bg.v;
    if (tag == "attn.o") return bg.o;
    if (tag == "mlp.up") return bg.up;
    return bg.down;
  };

  const float inv_batch = 1.0f / static_cast<float>(opts.batch);
  std::mt19937_64 jitter_rng(opts.jitter_seed);
  const auto next_unit = [&jitter_rng]() {
    return static_cast<double>(jitter_rng() >> 11) * 0x1.0p-53;
  };
  for (int step = 0; step < opts.steps; ++step) {
    std::vector<GradSet> grads;
    grads.reserve(static_cast<std::size_t>(opts.batch));
    for (int i = 0; i < opts.batch; ++i) {
      grads.emplace_back(cfg);
    }
    // Per-(sequence, block) residual scales, drawn serially so thread
    // scheduling cannot change them.
    std::vector<std::vector<float>> alphas(
        static_cast<std::size_t>(opts.batch),
        std::vector<float>(static_cast<std::size_t>(cfg.n_blocks), 1.0f));
    if (opts.scale_jitter) {
      for (auto& per_seq : alphas) {
        for (float& a : per_seq) {
          if (next_unit() < opts.drop_prob) {
            a = 0.0f;
          } else {
            a = opts.jitter_lo +
                static_cast<float>(next_unit()) * (opts.jitter_hi - opts.jitter_lo);
          }
        }
      }
    }
    std::vector<double> losses(static_cast<std::size_t>(opts.batch), 0.0);
    parallel_for(static_cast<std::size_t>(opts.batch), [&](std::size_t i) {
      const std::size_t item =
          (static_cast<std::size_t>(step) * opts.batch + i) % train.items.size();
      const TaskItem& seq = train.items[item];
      SeqCache cache;
      cache.alphas = alphas[i];
      forward_train(w, seq.tokens, cache);
      losses[i] = backward_train(w, seq.tokens, seq.targets, cache, grads[i],
                                 inv_batch);
    });
    for (std::size_t i = 1; i < grads.size(); ++i) {
      grads[0].add(grads[i]);
    }
    double step_loss = 0.0;
    for (double l : losses) {
      step_loss += l;
    }
    step_loss *= inv_batch;

    const float t = static_cast<float>(step + 1);
    const float bc1 = 1.0f - std::pow(opts.beta1, t);
    const float bc2 = 1.0f - std::pow(opts.beta2, t);
    for (auto& [name, buf] : weights) {
      auto& [m1, m2] = adam.at(name);
      const float* grad = grad_buffer_of(grads[0], name);
      for (std::size_t i = 0; i < buf.size(); ++i) {
        m1[i] = opts.beta1 * m1[i] + (1.0f - opts.beta1) * grad[i];
        m2[i] = opts.beta2 * m2[i] + (1.0f - opts.beta2) * grad[i] * grad[i];
        const float mhat = m1[i] / bc1;
        const float vhat = m2[i] / bc2;
        buf[i] -= opts.lr * mhat / (std::sqrt(vhat) + opts.adam_eps);
      }
    }
    if (opts.on_step) {
      opts.on_step(step, step_loss);
    }
  }

  ModelState out;
  out.config = cfg;
  out.alpha.assign(static_cast<std::size_t>(cfg.n_blocks), 1.0f);
  for (auto& [name, buf] : weights) {
    const auto shape = schema_tensor_shape(cfg, name);
    out.tensors.emplace(name, std::make_shared<WeightTensor>(
                                  WeightTensor::from_floats(name, shape,
                                                            std::move(buf))));
  }
  return out;
}

}  // namespace bitloupe
