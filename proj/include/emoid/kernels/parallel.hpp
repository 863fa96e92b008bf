#pragma once

// OpenMP kernels. Every output element is owned by exactly one thread and
// reduced in a fixed order, so results do not depend on the thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "emoid/kernels/layout.hpp"
#include "emoid/kernels/serial.hpp"

namespace emoid::kernels {

struct Parallel {
  template <class T>
  static void linear_forward(std::span<T> out, std::span<const T> in, std::span<const T> w,
                             std::span<const T> b, std::size_t N, std::size_t I, std::size_t O) {
    check(out.size() == N * O && in.size() == N * I && w.size() == O * I && (b.empty() || b.size() == O),
          "linear_forward: shape mismatch");
    const auto rows = static_cast<std::int64_t>(N);
#pragma omp parallel for schedule(static)
    for (std::int64_t n = 0; n < rows; ++n) {
      const T* x = in.data() + n * I;
      T* y = out.data() + n * O;
      for (std::size_t o = 0; o < O; ++o) {
        const T* wr = w.data() + o * I;
        T acc = b.empty() ? T(0) : b[o];
        for (std::size_t i = 0; i < I; ++i) acc += x[i] * wr[i];
        y[o] = acc;
      }
    }
  }

  template <class T>
  static void linear_backward(std::span<T> din, std::span<T> dw, std::span<T> db, std::span<const T> dout,
                              std::span<const T> in, std::span<const T> w, std::size_t N, std::size_t I,
                              std::size_t O) {
    check(dout.size() == N * O && in.size() == N * I && w.size() == O * I && dw.size() == O * I,
          "linear_backward: shape mismatch");
    if (!din.empty()) {
      const auto rows = static_cast<std::int64_t>(N);
#pragma omp parallel for schedule(static)
      for (std::int64_t n = 0; n < rows; ++n) {
        T* dx = din.data() + n * I;
        const T* dy = dout.data() + n * O;
        for (std::size_t o = 0; o < O; ++o) {
          const T d = dy[o];
          const T* wr = w.data() + o * I;
          for (std::size_t i = 0; i < I; ++i) dx[i] += d * wr[i];
        }
      }
    }
    const auto outs = static_cast<std::int64_t>(O);
#pragma omp parallel for schedule(static)
    for (std::int64_t o = 0; o < outs; ++o) {
      T* dwr = dw.data() + o * I;
      for (std::size_t n = 0; n < N; ++n) {
        const T d = dout[n * O + o];
        if (!db.empty()) db[o] += d;
        if (d == T(0)) continue;
        const T* x = in.data() + n * I;
        for (std::size_t i = 0; i < I; ++i) dwr[i] += d * x[i];
      }
    }
  }

  template <class T>
  static void layernorm_forward(std::span<T> out, std::span<T> mean, std::span<T> rstd, std::span<const T> in,
                                std::span<const T> g, std::span<const T> b, std::size_t N, std::size_t C) {
    const auto rows = static_cast<std::int64_t>(N);
#pragma omp parallel for schedule(static)
    for (std::int64_t n = 0; n < rows; ++n) {
      const T* x = in.data() + n * C;
      T m = 0;
      for (std::size_t c = 0; c < C; ++c) m += x[c];
      m /= static_cast<T>(C);
      T var = 0;
      for (std::size_t c = 0; c < C; ++c) var += (x[c] - m) * (x[c] - m);
      var /= static_cast<T>(C);
      const T r = 1 / std::sqrt(var + static_cast<T>(kLayerNormEps));
      T* y = out.data() + n * C;
      for (std::size_t c = 0; c < C; ++c) y[c] = (x[c] - m) * r * g[c] + b[c];
      mean[n] = m;
      rstd[n] = r;
    }
  }

  template <class T>
  static void layernorm_backward(std::span<T> din, std::span<T> dg, std::span<T> db, std::span<const T> dout,
                                 std::span<const T> in, std::span<const T> g, std::span<const T> mean,
                                 std::span<const T> rstd, std::size_t N, std::size_t C) {
    const auto rows = static_cast<std::int64_t>(N);
#pragma omp parallel for schedule(static)
    for (std::int64_t n = 0; n < rows; ++n) {
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
      T* dx = din.data() + n * C;
      for (std::size_t c = 0; c < C; ++c) {
        const T norm = (x[c] - mean[n]) * rstd[n];
        dx[c] += (dy[c] * g[c] - dnorm_mean - norm * dnorm_norm_mean) * rstd[n];
      }
    }
    // Parameter gradients reduce over rows; split by channel instead.
    const auto chans = static_cast<std::int64_t>(C);
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < chans; ++c) {
      for (std::size_t n = 0; n < N; ++n) {
        const T d = dout[n * C + c];
        dg[c] += d * ((in[n * C + c] - mean[n]) * rstd[n]);
        db[c] += d;
      }
    }
  }

  template <class T>
  static void gelu_forward(std::span<T> out, std::span<const T> in) {
    const auto n = static_cast<std::int64_t>(in.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) out[i] = gelu(in[i]);
  }

  template <class T>
  static void gelu_backward(std::span<T> din, std::span<const T> in, std::span<const T> dout) {
    const auto n = static_cast<std::int64_t>(in.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) din[i] += gelu_grad(in[i]) * dout[i];
  }

  // One task per (sequence, head); heads write disjoint column slices.
  template <class T>
  static void attention_forward(std::span<T> out, std::span<T> att, std::span<const T> qkv,
                                const SeqLayout& layout, std::size_t C) {
    const std::size_t H = layout.heads, hs = C / H, C3 = 3 * C;
    const T scale = 1 / std::sqrt(static_cast<T>(hs));
    const auto tasks = static_cast<std::int64_t>(layout.sequences() * H);
#pragma omp parallel for schedule(dynamic, 4)
    for (std::int64_t task = 0; task < tasks; ++task) {
      const std::size_t s = static_cast<std::size_t>(task) / H, h = static_cast<std::size_t>(task) % H;
      const std::size_t L = layout.length(s), base = layout.offsets[s];
      T* a = att.data() + layout.att_offsets[s] + h * L * L;
      for (std::size_t i = 0; i < L; ++i) {
        const T* q = qkv.data() + (base + i) * C3 + h * hs;
        T* row = a + i * L;
        T mx = -INFINITY;
        for (std::size_t j = 0; j < L; ++j) {
          const T* k = qkv.data() + (base + j) * C3 + C + h * hs;
          T dot = 0;
          for (std::size_t d = 0; d < hs; ++d) dot += q[d] * k[d];
          row[j] = dot * scale;
          mx = std::max(mx, row[j]);
        }
        T sum = 0;
        for (std::size_t j = 0; j < L; ++j) {
          row[j] = std::exp(row[j] - mx);
          sum += row[j];
        }
        for (std::size_t j = 0; j < L; ++j) row[j] /= sum;
        T* o = out.data() + (base + i) * C + h * hs;
        std::fill(o, o + hs, T(0));
        for (std::size_t j = 0; j < L; ++j) {
          const T* v = qkv.data() + (base + j) * C3 + 2 * C + h * hs;
          for (std::size_t d = 0; d < hs; ++d) o[d] += row[j] * v[d];
        }
      }
    }
  }

  template <class T>
  static void attention_backward(std::span<T> dqkv, std::span<const T> dout, std::span<const T> qkv,
                                 std::span<const T> att, const SeqLayout& layout, std::size_t C) {
    const std::size_t H = layout.heads, hs = C / H, C3 = 3 * C;
    const T scale = 1 / std::sqrt(static_cast<T>(hs));
    const auto tasks = static_cast<std::int64_t>(layout.sequences() * H);
#pragma omp parallel for schedule(dynamic, 4)
    for (std::int64_t task = 0; task < tasks; ++task) {
      const std::size_t s = static_cast<std::size_t>(task) / H, h = static_cast<std::size_t>(task) % H;
      const std::size_t L = layout.length(s), base = layout.offsets[s];
      const T* a = att.data() + layout.att_offsets[s] + h * L * L;
      std::vector<T> datt(L);
      for (std::size_t i = 0; i < L; ++i) {
        const T* dy = dout.data() + (base + i) * C + h * hs;
        const T* row = a + i * L;
        T weighted = 0;
        for (std::size_t j = 0; j < L; ++j) {
          const T* v = qkv.data() + (base + j) * C3 + 2 * C + h * hs;
          T* dv = dqkv.data() + (base + j) * C3 + 2 * C + h * hs;
          T dot = 0;
          for (std::size_t d = 0; d < hs; ++d) {
            dot += dy[d] * v[d];
            dv[d] += row[j] * dy[d];
          }
          datt[j] = dot;
          weighted += row[j] * dot;
        }
        const T* q = qkv.data() + (base + i) * C3 + h * hs;
        T* dq = dqkv.data() + (base + i) * C3 + h * hs;
        for (std::size_t j = 0; j < L; ++j) {
          const T dpre = row[j] * (datt[j] - weighted) * scale;
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

  template <class T>
  static void embedding_forward(std::span<T> out, std::span<const std::int32_t> ids,
                                std::span<const std::int32_t> positions, std::span<const T> wte,
                                std::span<const T> wpe, std::size_t C) {
    const auto rows = static_cast<std::int64_t>(ids.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t n = 0; n < rows; ++n) {
      const T* te = wte.data() + static_cast<std::size_t>(ids[n]) * C;
      const T* pe = wpe.data() + static_cast<std::size_t>(positions[n]) * C;
      T* y = out.data() + n * C;
      for (std::size_t c = 0; c < C; ++c) y[c] = te[c] + pe[c];
    }
  }

  // Rows of the same id collide, so threads split the channel axis.
  template <class T>
  static void embedding_backward(std::span<T> dwte, std::span<T> dwpe, std::span<const T> dout,
                                 std::span<const std::int32_t> ids, std::span<const std::int32_t> positions,
                                 std::size_t C) {
    const auto chans = static_cast<std::int64_t>(C);
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < chans; ++c) {
      for (std::size_t n = 0; n < ids.size(); ++n) {
        const T d = dout[n * C + c];
        dwte[static_cast<std::size_t>(ids[n]) * C + c] += d;
        dwpe[static_cast<std::size_t>(positions[n]) * C + c] += d;
      }
    }
  }

  template <class T>
  static void softmax_xent_forward(std::span<T> probs, std::span<T> losses, std::span<const T> logits,
                                   std::span<const std::int32_t> targets, std::size_t M, std::size_t V) {
    const auto rows = static_cast<std::int64_t>(M);
#pragma omp parallel for schedule(static)
    for (std::int64_t m = 0; m < rows; ++m) {
      const T* z = logits.data() + m * V;
      T* p = probs.data() + m * V;
      const T mx = *std::max_element(z, z + V);
      T sum = 0;
      for (std::size_t v = 0; v < V; ++v) {
        p[v] = std::exp(z[v] - mx);
        sum += p[v];
      }
      for (std::size_t v = 0; v < V; ++v) p[v] /= sum;
      losses[m] = -(z[targets[m]] - mx - std::log(sum));
    }
  }

  template <class T>
  static void softmax_xent_backward(std::span<T> dlogits, std::span<const T> probs,
                                    std::span<const std::int32_t> targets, T scale, std::size_t M, std::size_t V) {
    const auto rows = static_cast<std::int64_t>(M);
#pragma omp parallel for schedule(static)
    for (std::int64_t m = 0; m < rows; ++m) {
      T* d = dlogits.data() + m * V;
      const T* p = probs.data() + m * V;
      for (std::size_t v = 0; v < V; ++v) d[v] = scale * p[v];
      d[targets[m]] -= scale;
    }
  }

  template <class T>
  static void add(std::span<T> out, std::span<const T> a, std::span<const T> b) {
    const auto n = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
  }

  template <class T>
  static void adamw_step(std::span<T> params, std::span<const T> grads, std::span<T> m, std::span<T> v, double lr,
                         double beta1, double beta2, double eps, double weight_decay, std::int64_t t) {
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    const auto n = static_cast<std::int64_t>(params.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      const double g = grads[i];
      const double mi = beta1 * m[i] + (1 - beta1) * g;
      const double vi = beta2 * v[i] + (1 - beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      params[i] = static_cast<T>(params[i] - lr * ((mi / c1) / (std::sqrt(vi / c2) + eps) + weight_decay * params[i]));
    }
  }
};

enum class Backend : std::uint8_t { Serial, Parallel };

}  // namespace emoid::kernels
