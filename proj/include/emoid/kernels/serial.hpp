#pragma once

// Serial reference kernels. The OpenMP kernels are tested against these,
// and the encoder can run on either.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>

#include "emoid/kernels/layout.hpp"

namespace emoid::kernels {

inline constexpr double kLayerNormEps = 1e-5;

template <class T>
T gelu(T x) {
  const T c = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  return static_cast<T>(0.5) * x * (1 + std::tanh(c * (x + static_cast<T>(0.044715) * x * x * x)));
}

template <class T>
T gelu_grad(T x) {
  const T c = static_cast<T>(0.7978845608028654);
  const T cube = static_cast<T>(0.044715) * x * x * x;
  const T t = std::tanh(c * (x + cube));
  const T sech2 = 1 - t * t;
  return static_cast<T>(0.5) * (1 + t) +
         static_cast<T>(0.5) * x * sech2 * c * (1 + static_cast<T>(3 * 0.044715) * x * x);
}

struct Serial {
  // out[n,o] = b[o] + sum_i in[n,i] * w[o,i]. `b` may be empty.
  template <class T>
  static void linear_forward(std::span<T> out, std::span<const T> in, std::span<const T> w,
                             std::span<const T> b, std::size_t N, std::size_t I, std::size_t O) {
    check(out.size() == N * O && in.size() == N * I && w.size() == O * I && (b.empty() || b.size() == O),
          "linear_forward: shape mismatch");
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t o = 0; o < O; ++o) {
        T acc = b.empty() ? T(0) : b[o];
        for (std::size_t i = 0; i < I; ++i) acc += in[n * I + i] * w[o * I + i];
        out[n * O + o] = acc;
      }
    }
  }

  // Accumulates into din, dw, db. `din` and `db` may be empty.
  template <class T>
  static void linear_backward(std::span<T> din, std::span<T> dw, std::span<T> db, std::span<const T> dout,
                              std::span<const T> in, std::span<const T> w, std::size_t N, std::size_t I,
                              std::size_t O) {
    check(dout.size() == N * O && in.size() == N * I && w.size() == O * I && dw.size() == O * I,
          "linear_backward: shape mismatch");
    if (!din.empty()) {
      for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t o = 0; o < O; ++o) {
          const T d = dout[n * O + o];
          for (std::size_t i = 0; i < I; ++i) din[n * I + i] += d * w[o * I + i];
        }
      }
    }
    for (std::size_t o = 0; o < O; ++o) {
      for (std::size_t n = 0; n < N; ++n) {
        const T d = dout[n * O + o];
        for (std::size_t i = 0; i < I; ++i) dw[o * I + i] += d * in[n * I + i];
        if (!db.empty()) db[o] += d;
      }
    }
  }

  template <class T>
  static void layernorm_forward(std::span<T> out, std::span<T> mean, std::span<T> rstd, std::span<const T> in,
                                std::span<const T> g, std::span<const T> b, std::size_t N, std::size_t C) {
    for (std::size_t n = 0; n < N; ++n) {
      const T* x = in.data() + n * C;
      T m = 0;
      for (std::size_t c = 0; c < C; ++c) m += x[c];
      m /= static_cast<T>(C);
      T var = 0;
      for (std::size_t c = 0; c < C; ++c) var += (x[c] - m) * (x[c] - m);
      var /= static_cast<T>(C);
      const T r = 1 / std::sqrt(var + static_cast<T>(kLayerNormEps));
      for (std::size_t c = 0; c < C; ++c) out[n * C + c] = (x[c] - m) * r * g[c] + b[c];
      mean[n] = m;
      rstd[n] = r;
    }
  }

  template <class T>
  static void layernorm_backward(std::span<T> din, std::span<T> dg, std::span<T> db, std::span<const T> dout,
                                 std::span<const T> in, std::span<const T> g, std::span<const T> mean,
                                 std::span<const T> rstd, std::size_t N, std::size_t C) {
    for (std::size_t n = 0; n < N; ++n) {
      const T* x = in.data() + n * C;
      const T* dy = dout.data() + n * C;
      T dnorm_mean = 0, dnorm_norm_mean = 0;
      for (std::size_t c = 0; c < C; ++c) {
        const T norm = (x[c] - mean[n]) * rstd[n];
        const T dnorm = dy[c] * g[c];
        dnorm_mean += dnorm;
        dnorm_norm_mean += dnorm * norm;
      }
      dnorm_mean /= static_cast<T>(C);
      dnorm_norm_mean /= static_cast<T>(C);
      for (std::size_t c = 0; c < C; ++c) {
        const T norm = (x[c] - mean[n]) * rstd[n];
        const T dnorm = dy[c] * g[c];
        dg[c] += dy[c] * norm;
        db[c] += dy[c];
        din[n * C + c] += (dnorm - dnorm_mean - norm * dnorm_norm_mean) * rstd[n];
      }
    }
  }

  template <class T>
  static void gelu_forward(std::span<T> out, std::span<const T> in) {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = gelu(in[i]);
  }

  template <class T>
  static void gelu_backward(std::span<T> din, std::span<const T> in, std::span<const T> dout) {
    for (std::size_t i = 0; i < in.size(); ++i) din[i] += gelu_grad(in[i]) * dout[i];
  }

  // Bidirectional multi-head attention over a ragged batch.
  // qkv rows are [q | k | v], each C wide; head h uses columns [h*hs, (h+1)*hs).
  template <class T>
  static void attention_forward(std::span<T> out, std::span<T> att, std::span<const T> qkv,
                                const SeqLayout& layout, std::size_t C) {
    const std::size_t H = layout.heads, hs = C / H, C3 = 3 * C;
    const T scale = 1 / std::sqrt(static_cast<T>(hs));
    for (std::size_t s = 0; s < layout.sequences(); ++s) {
      const std::size_t L = layout.length(s), base = layout.offsets[s];
      for (std::size_t h = 0; h < H; ++h) {
        T* a = att.data() + layout.att_offsets[s] + h * L * L;
        for (std::size_t i = 0; i < L; ++i) {
          const T* q = qkv.data() + (base + i) * C3 + h * hs;
          T mx = -INFINITY;
          for (std::size_t j = 0; j < L; ++j) {
            const T* k = qkv.data() + (base + j) * C3 + C + h * hs;
            T dot = 0;
            for (std::size_t d = 0; d < hs; ++d) dot += q[d] * k[d];
            a[i * L + j] = dot * scale;
            mx = std::max(mx, a[i * L + j]);
          }
          T sum = 0;
          for (std::size_t j = 0; j < L; ++j) {
            a[i * L + j] = std::exp(a[i * L + j] - mx);
            sum += a[i * L + j];
          }
          for (std::size_t j = 0; j < L; ++j) a[i * L + j] /= sum;
          T* o = out.data() + (base + i) * C + h * hs;
          for (std::size_t d = 0; d < hs; ++d) o[d] = 0;
          for (std::size_t j = 0; j < L; ++j) {
            const T* v = qkv.data() + (base + j) * C3 + 2 * C + h * hs;
            for (std::size_t d = 0; d < hs; ++d) o[d] += a[i * L + j] * v[d];
          }
        }
      }
    }
  }

  template <class T>
  static void attention_backward(std::span<T> dqkv, std::span<const T> dout, std::span<const T> qkv,
                                 std::span<const T> att, const SeqLayout& layout, std::size_t C) {
    const std::size_t H = layout.heads, hs = C / H, C3 = 3 * C;
    const T scale = 1 / std::sqrt(static_cast<T>(hs));
    std::vector<T> datt;
    for (std::size_t s = 0; s < layout.sequences(); ++s) {
      const std::size_t L = layout.length(s), base = layout.offsets[s];
      datt.assign(L, T(0));
      for (std::size_t h = 0; h < H; ++h) {
        const T* a = att.data() + layout.att_offsets[s] + h * L * L;
        for (std::size_t i = 0; i < L; ++i) {
          const T* dy = dout.data() + (base + i) * C + h * hs;
          T weighted = 0;
          for (std::size_t j = 0; j < L; ++j) {
            const T* v = qkv.data() + (base + j) * C3 + 2 * C + h * hs;
            T* dv = dqkv.data() + (base + j) * C3 + 2 * C + h * hs;
            T dot = 0;
            for (std::size_t d = 0; d < hs; ++d) {
              dot += dy[d] * v[d];
              dv[d] += a[i * L + j] * dy[d];
            }
            datt[j] = dot;
            weighted += a[i * L + j] * dot;
          }
          const T* q = qkv.data() + (base + i) * C3 + h * hs;
          T* dq = dqkv.data() + (base + i) * C3 + h * hs;
          for (std::size_t j = 0; j < L; ++j) {
            const T dpre = a[i * L + j] * (datt[j] - weighted) * scale;
            const T* k = qkv.data() + (base + j) * C3 + C + h * hs;
            T* dk = dqkv.data() + (base + j) * C3 + C + h * hs;
            for (std::size_t d = 0; d < hs; ++d) {
              dq[d] += dpre * k[d];
              dk[d] += dpre * q[d];
            }
          }
        }
      }
    }
  }

  template <class T>
  static void embedding_forward(std::span<T> out, std::span<const std::int32_t> ids,
                                std::span<const std::int32_t> positions, std::span<const T> wte,
                                std::span<const T> wpe, std::size_t C) {
    for (std::size_t n = 0; n < ids.size(); ++n) {
      const T* te = wte.data() + static_cast<std::size_t>(ids[n]) * C;
      const T* pe = wpe.data() + static_cast<std::size_t>(positions[n]) * C;
      for (std::size_t c = 0; c < C; ++c) out[n * C + c] = te[c] + pe[c];
    }
  }

  template <class T>
  static void embedding_backward(std::span<T> dwte, std::span<T> dwpe, std::span<const T> dout,
                                 std::span<const std::int32_t> ids, std::span<const std::int32_t> positions,
                                 std::size_t C) {
    for (std::size_t n = 0; n < ids.size(); ++n) {
      T* dte = dwte.data() + static_cast<std::size_t>(ids[n]) * C;
      T* dpe = dwpe.data() + static_cast<std::size_t>(positions[n]) * C;
      for (std::size_t c = 0; c < C; ++c) {
        dte[c] += dout[n * C + c];
        dpe[c] += dout[n * C + c];
      }
    }
  }

  // Row-wise softmax and negative log-likelihood of `targets`.
  template <class T>
  static void softmax_xent_forward(std::span<T> probs, std::span<T> losses, std::span<const T> logits,
                                   std::span<const std::int32_t> targets, std::size_t M, std::size_t V) {
    for (std::size_t m = 0; m < M; ++m) {
      const T* z = logits.data() + m * V;
      T* p = probs.data() + m * V;
      T mx = -INFINITY;
      for (std::size_t v = 0; v < V; ++v) mx = std::max(mx, z[v]);
      T sum = 0;
      for (std::size_t v = 0; v < V; ++v) {
        p[v] = std::exp(z[v] - mx);
        sum += p[v];
      }
      for (std::size_t v = 0; v < V; ++v) p[v] /= sum;
      losses[m] = -(z[targets[m]] - mx - std::log(sum));
    }
  }

  // dlogits = scale * (probs - onehot(target)). Overwrites.
  template <class T>
  static void softmax_xent_backward(std::span<T> dlogits, std::span<const T> probs,
                                    std::span<const std::int32_t> targets, T scale, std::size_t M, std::size_t V) {
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t v = 0; v < V; ++v) {
        const T indicator = static_cast<std::size_t>(targets[m]) == v ? T(1) : T(0);
        dlogits[m * V + v] = scale * (probs[m * V + v] - indicator);
      }
    }
  }

  template <class T>
  static void add(std::span<T> out, std::span<const T> a, std::span<const T> b) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  }

  // Decoupled weight decay Adam; `t` is the 1-based step count.
  template <class T>
  static void adamw_step(std::span<T> params, std::span<const T> grads, std::span<T> m, std::span<T> v, double lr,
                         double beta1, double beta2, double eps, double weight_decay, std::int64_t t) {
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grads[i];
      const double mi = beta1 * m[i] + (1 - beta1) * g;
      const double vi = beta2 * v[i] + (1 - beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double step = (mi / c1) / (std::sqrt(vi / c2) + eps) + weight_decay * params[i];
      params[i] = static_cast<T>(params[i] - lr * step);
    }
  }
};

}  // namespace emoid::kernels
