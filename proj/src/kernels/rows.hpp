#pragma once

// Per-row kernel bodies shared by the serial and OpenMP drivers.

#include <algorithm>
#include <cmath>
#include <vector>

#include "vqa/kernels.hpp"

namespace vqa::kernels::detail {

inline std::vector<float> gaussian_weights(double sigma) {
  const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
  std::vector<float> w(2 * radius + 1);
  double sum = 0;
  for (int t = -radius; t <= radius; ++t) sum += std::exp(-0.5 * t * t / (sigma * sigma));
  for (int t = -radius; t <= radius; ++t) w[t + radius] = float(std::exp(-0.5 * t * t / (sigma * sigma)) / sum);
  return w;
}

// Smooth along x for row (j, k).
inline void smooth_x_row(const float* in, float* out, const Grid& g, const std::vector<float>& w, int j, int k) {
  const int radius = int(w.size() / 2);
  const float* src = in + (std::size_t(k) * g.ny + j) * g.nx;
  float* dst = out + (std::size_t(k) * g.ny + j) * g.nx;
  for (int i = 0; i < g.nx; ++i) {
    float acc = 0;
    for (int t = -radius; t <= radius; ++t) acc += w[t + radius] * src[std::clamp(i + t, 0, g.nx - 1)];
    dst[i] = acc;
  }
}

// Smooth along y for row (j, k), accumulating whole x rows.
inline void smooth_y_row(const float* in, float* out, const Grid& g, const std::vector<float>& w, int j, int k) {
  const int radius = int(w.size() / 2);
  float* dst = out + (std::size_t(k) * g.ny + j) * g.nx;
  std::fill(dst, dst + g.nx, 0.0f);
  for (int t = -radius; t <= radius; ++t) {
    const float* src = in + (std::size_t(k) * g.ny + std::clamp(j + t, 0, g.ny - 1)) * g.nx;
    const float wt = w[t + radius];
    for (int i = 0; i < g.nx; ++i) dst[i] += wt * src[i];
  }
}

inline void smooth_z_row(const float* in, float* out, const Grid& g, const std::vector<float>& w, int j, int k) {
  const int radius = int(w.size() / 2);
  float* dst = out + (std::size_t(k) * g.ny + j) * g.nx;
  std::fill(dst, dst + g.nx, 0.0f);
  for (int t = -radius; t <= radius; ++t) {
    const float* src = in + (std::size_t(std::clamp(k + t, 0, g.nz - 1)) * g.ny + j) * g.nx;
    const float wt = w[t + radius];
    for (int i = 0; i < g.nx; ++i) dst[i] += wt * src[i];
  }
}

struct SamplePlan {
  AffineMap to_source;  // target index -> source index, without displacement
  Mat3 disp_to_source;  // world displacement -> source index offset
};

inline SamplePlan make_plan(const SampleSpec& s) {
  const AffineMap ws = s.world_to_source_index * s.post;
  return {ws * s.target_index_to_world, ws.linear};
}

inline float sample_linear(const float* src, const Grid& g, double x, double y, double z) {
  x = std::clamp(x, 0.0, double(g.nx - 1));
  y = std::clamp(y, 0.0, double(g.ny - 1));
  z = std::clamp(z, 0.0, double(g.nz - 1));
  const int x0 = int(x), y0 = int(y), z0 = int(z);
  const int x1 = std::min(x0 + 1, g.nx - 1), y1 = std::min(y0 + 1, g.ny - 1), z1 = std::min(z0 + 1, g.nz - 1);
  const double fx = x - x0, fy = y - y0, fz = z - z0;
  const std::size_t sx = 1, sy = std::size_t(g.nx), sz = std::size_t(g.nx) * g.ny;
  auto at = [&](int i, int j, int k) { return double(src[i * sx + j * sy + k * sz]); };
  const double c00 = at(x0, y0, z0) * (1 - fx) + at(x1, y0, z0) * fx;
  const double c10 = at(x0, y1, z0) * (1 - fx) + at(x1, y1, z0) * fx;
  const double c01 = at(x0, y0, z1) * (1 - fx) + at(x1, y0, z1) * fx;
  const double c11 = at(x0, y1, z1) * (1 - fx) + at(x1, y1, z1) * fx;
  const double c0 = c00 * (1 - fy) + c10 * fy;
  const double c1 = c01 * (1 - fy) + c11 * fy;
  return float(c0 * (1 - fz) + c1 * fz);
}

inline float sample_nearest(const float* src, const Grid& g, double x, double y, double z) {
  const int i = std::clamp(int(std::floor(x + 0.5)), 0, g.nx - 1);
  const int j = std::clamp(int(std::floor(y + 0.5)), 0, g.ny - 1);
  const int k = std::clamp(int(std::floor(z + 0.5)), 0, g.nz - 1);
  return src[i + std::size_t(g.nx) * (j + std::size_t(g.ny) * k)];
}

inline bool outside(const Grid& g, double x, double y, double z) {
  return x < -0.5 || y < -0.5 || z < -0.5 || x > g.nx - 0.5 || y > g.ny - 0.5 || z > g.nz - 0.5;
}

inline void sample_row(const SampleSpec& s, const SamplePlan& plan, std::span<const float* const> sources,
                       std::span<float* const> outputs, int j, int k) {
  const Grid& t = s.target;
  const std::size_t row = (std::size_t(k) * t.ny + j) * t.nx;
  const bool has_disp = s.displacement[0] != nullptr;
  for (int i = 0; i < t.nx; ++i) {
    Vec3 c = plan.to_source.apply({double(i), double(j), double(k)});
    if (has_disp) {
      const Vec3 u{s.displacement[0][row + i], s.displacement[1][row + i], s.displacement[2][row + i]};
      c = c + mul(plan.disp_to_source, u);
    }
    const bool zero = s.boundary == Boundary::Zero && outside(s.source, c[0], c[1], c[2]);
    for (std::size_t ch = 0; ch < sources.size(); ++ch) {
      float v = 0.0f;
      if (!zero) {
        v = s.interp == Interp::Linear ? sample_linear(sources[ch], s.source, c[0], c[1], c[2])
                                       : sample_nearest(sources[ch], s.source, c[0], c[1], c[2]);
      }
      outputs[ch][row + i] = v;
    }
  }
}

inline void gradient_row(const float* in, const Grid& g, Field3 out, int j, int k) {
  const std::size_t sy = g.nx, sz = std::size_t(g.nx) * g.ny;
  const std::size_t row = k * sz + j * sy;
  const int jm = std::max(j - 1, 0), jp = std::min(j + 1, g.ny - 1);
  const int km = std::max(k - 1, 0), kp = std::min(k + 1, g.nz - 1);
  const float dy = jp - jm > 0 ? 1.0f / float(jp - jm) : 0.0f;
  const float dz = kp - km > 0 ? 1.0f / float(kp - km) : 0.0f;
  for (int i = 0; i < g.nx; ++i) {
    const int im = std::max(i - 1, 0), ip = std::min(i + 1, g.nx - 1);
    const float dx = ip - im > 0 ? 1.0f / float(ip - im) : 0.0f;
    out[0][row + i] = (in[row + ip] - in[row + im]) * dx;
    out[1][row + i] = (in[k * sz + jp * sy + i] - in[k * sz + jm * sy + i]) * dy;
    out[2][row + i] = (in[kp * sz + j * sy + i] - in[km * sz + j * sy + i]) * dz;
  }
}

inline Confusion confusion_slice(const std::uint8_t* a, const std::uint8_t* b, std::size_t n) {
  Confusion c;
  for (std::size_t i = 0; i < n; ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    c.tp += x && y;
    c.fn += x && !y;
    c.fp += !x && y;
    c.tn += !x && !y;
  }
  return c;
}

inline PairMoments moments_slice(const float* a, const float* b, std::size_t n) {
  PairMoments m;
  m.n = double(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a[i], y = b[i];
    m.sa += x;
    m.sb += y;
    m.saa += x * x;
    m.sbb += y * y;
    m.sab += x * y;
  }
  return m;
}

inline double demons_slice(const float* f, const float* w, ConstField3 gf, ConstField3 gw, double step,
                           Field3 du, std::size_t begin, std::size_t end) {
  double ssd = 0;
  for (std::size_t i = begin; i < end; ++i) {
    const double diff = double(w[i]) - double(f[i]);
    const double gx = 0.5 * (double(gf[0][i]) + double(gw[0][i]));
    const double gy = 0.5 * (double(gf[1][i]) + double(gw[1][i]));
    const double gz = 0.5 * (double(gf[2][i]) + double(gw[2][i]));
    const double denom = gx * gx + gy * gy + gz * gz + diff * diff;
    ssd += diff * diff;
    if (denom < 1e-12) {
      du[0][i] = du[1][i] = du[2][i] = 0.0f;
      continue;
    }
    const double s = -step * diff / denom;
    du[0][i] = float(s * gx);
    du[1][i] = float(s * gy);
    du[2][i] = float(s * gz);
  }
  return ssd;
}

inline AffineMoments affine_slice(const float* f, const float* w, ConstField3 gw, const AffineMap& to_coords,
                                  const Grid& g, int k) {
  AffineMoments m;
  const std::size_t sy = g.nx, sz = std::size_t(g.nx) * g.ny;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t idx = k * sz + j * sy + i;
      const double r = double(w[idx]) - double(f[idx]);
      m.ssd += r * r;
      if (r == 0) continue;
      const Vec3 x = to_coords.apply({double(i), double(j), double(k)});
      const double ga[3] = {r * gw[0][idx], r * gw[1][idx], r * gw[2][idx]};
      for (int a = 0; a < 3; ++a) {
        m.grad[3 * a] += ga[a] * x[0];
        m.grad[3 * a + 1] += ga[a] * x[1];
        m.grad[3 * a + 2] += ga[a] * x[2];
        m.grad[9 + a] += ga[a];
      }
    }
  return m;
}

inline void add(AffineMoments& a, const AffineMoments& b) {
  a.ssd += b.ssd;
  for (int i = 0; i < 12; ++i) a.grad[i] += b.grad[i];
}

inline void add(Confusion& a, const Confusion& b) {
  a.tp += b.tp;
  a.fp += b.fp;
  a.fn += b.fn;
  a.tn += b.tn;
}

inline void add(PairMoments& a, const PairMoments& b) {
  a.n += b.n;
  a.sa += b.sa;
  a.sb += b.sb;
  a.saa += b.saa;
  a.sbb += b.sbb;
  a.sab += b.sab;
}

}  // namespace vqa::kernels::detail
