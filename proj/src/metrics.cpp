#include "nsf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "nsf/error.hpp"

namespace nsf::metrics {

namespace {

constexpr double kPi = 3.14159265358979323846;

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

struct Plane {
  int w = 0;
  int h = 0;
  std::vector<double> v;

  Plane() = default;
  Plane(int w_, int h_) : w(w_), h(h_), v(size_t(w_) * size_t(h_), 0.0) {}
  double at(int x, int y) const { return v[size_t(y) * w + x]; }
};

Plane to_plane(const GrayImage& img) {
  Plane p;
  p.w = img.width;
  p.h = img.height;
  p.v = img.data;
  return p;
}

// Sobel gradients with replicated borders.
void sobel(const Plane& p, Plane& gx, Plane& gy) {
  gx = Plane(p.w, p.h);
  gy = Plane(p.w, p.h);
  for (int y = 0; y < p.h; ++y) {
    const int ym = clampi(y - 1, 0, p.h - 1), yp = clampi(y + 1, 0, p.h - 1);
    for (int x = 0; x < p.w; ++x) {
      const int xm = clampi(x - 1, 0, p.w - 1), xp = clampi(x + 1, 0, p.w - 1);
      const double tl = p.at(xm, ym), tc = p.at(x, ym), tr = p.at(xp, ym);
      const double ml = p.at(xm, y), mr = p.at(xp, y);
      const double bl = p.at(xm, yp), bc = p.at(x, yp), br = p.at(xp, yp);
      gx.v[size_t(y) * p.w + x] = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl);
      gy.v[size_t(y) * p.w + x] = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr);
    }
  }
}

Plane sobel_magnitude(const Plane& p) {
  Plane gx, gy;
  sobel(p, gx, gy);
  Plane mag(p.w, p.h);
  for (size_t i = 0; i < mag.v.size(); ++i)
    mag.v[i] = std::sqrt(gx.v[i] * gx.v[i] + gy.v[i] * gy.v[i]);
  return mag;
}

// Pearson correlation; either argument having zero variance yields 0.
double correlation(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

// ---- multi-scale structural similarity --------------------------------

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kMsWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

std::vector<double> gaussian_taps() {
  std::vector<double> k(static_cast<size_t>(kSsimWindow));
  const int c = kSsimWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = double(i - c);
    k[size_t(i)] = std::exp(-0.5 * d * d / (kSsimSigma * kSsimSigma));
    sum += k[size_t(i)];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable valid-region convolution with a symmetric 1-D kernel.
Plane conv_valid(const Plane& p, const std::vector<double>& k) {
  const int klen = int(k.size());
  Plane hpass(p.w - klen + 1, p.h);
  for (int y = 0; y < p.h; ++y)
    for (int x = 0; x < hpass.w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < klen; ++i) acc += k[size_t(i)] * p.at(x + i, y);
      hpass.v[size_t(y) * hpass.w + x] = acc;
    }
  Plane out(hpass.w, p.h - klen + 1);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < klen; ++i) acc += k[size_t(i)] * hpass.at(x, y + i);
      out.v[size_t(y) * out.w + x] = acc;
    }
  return out;
}

Plane multiply(const Plane& a, const Plane& b) {
  Plane out(a.w, a.h);
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
  return out;
}

Plane downsample2(const Plane& p) {
  Plane out(p.w / 2, p.h / 2);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x)
      out.v[size_t(y) * out.w + x] =
          0.25 * (p.at(2 * x, 2 * y) + p.at(2 * x + 1, 2 * y) +
                  p.at(2 * x, 2 * y + 1) + p.at(2 * x + 1, 2 * y + 1));
  return out;
}

struct SsimScale {
  double mean_l = 0.0;
  double mean_cs = 0.0;
};

SsimScale ssim_scale(const Plane& x, const Plane& y) {
  static const std::vector<double> win = gaussian_taps();
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);

  Plane mx = conv_valid(x, win), my = conv_valid(y, win);
  Plane exx = conv_valid(multiply(x, x), win);
  Plane eyy = conv_valid(multiply(y, y), win);
  Plane exy = conv_valid(multiply(x, y), win);

  double sum_l = 0.0, sum_cs = 0.0;
  const size_t n = mx.v.size();
  for (size_t i = 0; i < n; ++i) {
    const double ux = mx.v[i], uy = my.v[i];
    const double vx = exx.v[i] - ux * ux;
    const double vy = eyy.v[i] - uy * uy;
    const double cov = exy.v[i] - ux * uy;
    sum_l += (2.0 * ux * uy + c1) / (ux * ux + uy * uy + c1);
    sum_cs += (2.0 * cov + c2) / (vx + vy + c2);
  }
  return {sum_l / double(n), sum_cs / double(n)};
}

// ---- universal-quality-index machinery ----------------------------------

// Inclusive (h+1) x (w+1) prefix sums for O(1) window sums.
struct Sat {
  int w = 0;
  int h = 0;
  std::vector<double> s;

  explicit Sat(const Plane& p) : w(p.w), h(p.h), s(size_t(w + 1) * (h + 1), 0.0) {
    for (int y = 0; y < h; ++y) {
      double row = 0.0;
      for (int x = 0; x < w; ++x) {
        row += p.at(x, y);
        s[size_t(y + 1) * (w + 1) + (x + 1)] =
            s[size_t(y) * (w + 1) + (x + 1)] + row;
      }
    }
  }

  double window(int x0, int y0, int size) const {
    const int x1 = x0 + size, y1 = y0 + size;
    return s[size_t(y1) * (w + 1) + x1] - s[size_t(y0) * (w + 1) + x1] -
           s[size_t(y1) * (w + 1) + x0] + s[size_t(y0) * (w + 1) + x0];
  }
};

// Universal quality index of one window from its moments, with the
// degenerate luminance/contrast factors dropping out symmetrically.
double q0_from_moments(double mu_a, double mu_b, double va, double vb,
                       double cov) {
  const double den_mu = mu_a * mu_a + mu_b * mu_b;
  const double den_sig = va + vb;
  if (den_mu == 0.0 && den_sig == 0.0) return 1.0;
  if (den_mu == 0.0) return 2.0 * cov / den_sig;
  if (den_sig == 0.0) return 2.0 * mu_a * mu_b / den_mu;
  return 4.0 * cov * mu_a * mu_b / (den_mu * den_sig);
}

constexpr int kQWindow = 8;

struct QwResult {
  double q = 0.0;
  double qw = 0.0;
};

QwResult piella_window_scores(const Plane& a, const Plane& b, const Plane& f) {
  if (a.w < kQWindow || a.h < kQWindow)
    fail(ErrorCode::too_small, "images smaller than the quality window");

  Sat sa(a), sb(b), sf(f);
  Sat sa2(multiply(a, a)), sb2(multiply(b, b)), sf2(multiply(f, f));
  Sat saf(multiply(a, f)), sbf(multiply(b, f));

  const double inv_n = 1.0 / double(kQWindow * kQWindow);
  double q_sum = 0.0, qw_sum = 0.0, c_sum = 0.0;
  size_t count = 0;

  for (int y = 0; y + kQWindow <= a.h; ++y) {
    for (int x = 0; x + kQWindow <= a.w; ++x) {
      const double mu_a = sa.window(x, y, kQWindow) * inv_n;
      const double mu_b = sb.window(x, y, kQWindow) * inv_n;
      const double mu_f = sf.window(x, y, kQWindow) * inv_n;
      const double va =
          std::max(0.0, sa2.window(x, y, kQWindow) * inv_n - mu_a * mu_a);
      const double vb =
          std::max(0.0, sb2.window(x, y, kQWindow) * inv_n - mu_b * mu_b);
      const double vf =
          std::max(0.0, sf2.window(x, y, kQWindow) * inv_n - mu_f * mu_f);
      const double cov_af = saf.window(x, y, kQWindow) * inv_n - mu_a * mu_f;
      const double cov_bf = sbf.window(x, y, kQWindow) * inv_n - mu_b * mu_f;

      const double q_af = q0_from_moments(mu_a, mu_f, va, vf, cov_af);
      const double q_bf = q0_from_moments(mu_b, mu_f, vb, vf, cov_bf);
      const double lambda = (va + vb) > 0.0 ? va / (va + vb) : 0.5;
      const double qwin = lambda * q_af + (1.0 - lambda) * q_bf;

      q_sum += qwin;
      const double c = std::max(va, vb);
      qw_sum += c * qwin;
      c_sum += c;
      ++count;
    }
  }

  QwResult r;
  r.q = q_sum / double(count);
  r.qw = c_sum > 0.0 ? qw_sum / c_sum : r.q;
  return r;
}

void check_triple(const GrayImage& a, const GrayImage& b, const GrayImage& f) {
  check_pair(a, b);
  check_pair(a, f);
}

}  // namespace

double avg_gradient(const GrayImage& img) {
  img.validate();
  if (img.width < 2 || img.height < 2) return 0.0;
  double acc = 0.0;
  for (int y = 0; y + 1 < img.height; ++y)
    for (int x = 0; x + 1 < img.width; ++x) {
      const double dx = img.at(x + 1, y) - img.at(x, y);
      const double dy = img.at(x, y + 1) - img.at(x, y);
      acc += std::sqrt(0.5 * (dx * dx + dy * dy));
    }
  return acc / (double(img.width - 1) * double(img.height - 1));
}

double edge_intensity(const GrayImage& img) {
  img.validate();
  Plane mag = sobel_magnitude(to_plane(img));
  double acc = 0.0;
  for (double v : mag.v) acc += v;
  return acc / double(mag.v.size());
}

double spatial_frequency(const GrayImage& img) {
  img.validate();
  if (img.width < 2 || img.height < 2) return 0.0;
  double rf = 0.0, cf = 0.0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 1; x < img.width; ++x) {
      const double d = img.at(x, y) - img.at(x - 1, y);
      rf += d * d;
    }
  for (int y = 1; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double d = img.at(x, y) - img.at(x, y - 1);
      cf += d * d;
    }
  rf /= double(img.height) * double(img.width - 1);
  cf /= double(img.height - 1) * double(img.width);
  return std::sqrt(rf + cf);
}

double scd(const GrayImage& a, const GrayImage& b, const GrayImage& f) {
  check_triple(a, b, f);
  const size_t n = f.size();
  std::vector<double> diff_fb(n), diff_fa(n);
  for (size_t i = 0; i < n; ++i) {
    diff_fb[i] = f.data[i] - b.data[i];
    diff_fa[i] = f.data[i] - a.data[i];
  }
  return correlation(diff_fb, a.data) + correlation(diff_fa, b.data);
}

double ms_ssim_pair(const GrayImage& x, const GrayImage& y) {
  check_pair(x, y);

  // Count the dyadic scales that still fit an 11x11 window.
  int scales = 0;
  for (int w = x.width, h = x.height;
       scales < 5 && std::min(w, h) >= kSsimWindow; w /= 2, h /= 2)
    ++scales;
  if (scales == 0)
    fail(ErrorCode::too_small, "images smaller than the similarity window");

  double weight_sum = 0.0;
  for (int s = 0; s < scales; ++s) weight_sum += kMsWeights[s];

  Plane px = to_plane(x), py = to_plane(y);
  double total = 1.0;
  for (int s = 0; s < scales; ++s) {
    const SsimScale r = ssim_scale(px, py);
    const double w = kMsWeights[s] / weight_sum;
    total *= std::pow(std::max(r.mean_cs, 0.0), w);
    if (s == scales - 1) total *= std::pow(std::max(r.mean_l, 0.0), w);
    if (s + 1 < scales) {
      px = downsample2(px);
      py = downsample2(py);
    }
  }
  return total;
}

double ms_ssim(const GrayImage& a, const GrayImage& b, const GrayImage& f) {
  check_triple(a, b, f);
  return 0.5 * (ms_ssim_pair(a, f) + ms_ssim_pair(b, f));
}

double qabf(const GrayImage& a, const GrayImage& b, const GrayImage& f) {
  check_triple(a, b, f);

  Plane ga_x, ga_y, gb_x, gb_y, gf_x, gf_y;
  sobel(to_plane(a), ga_x, ga_y);
  sobel(to_plane(b), gb_x, gb_y);
  sobel(to_plane(f), gf_x, gf_y);

  // Sigmoids scaled so a perfectly preserved edge scores exactly 1.
  const double kg = -15.0, sg = 0.5;
  const double ka = -22.0, sa = 0.8;
  const double norm_g = 1.0 + std::exp(kg * (1.0 - sg));
  const double norm_a = 1.0 + std::exp(ka * (1.0 - sa));

  auto preservation = [&](double sx, double sy, double fx, double fy) {
    const double gs = std::sqrt(sx * sx + sy * sy);
    const double gf = std::sqrt(fx * fx + fy * fy);
    const double g_max = std::max(gs, gf);
    const double g_rel = g_max > 0.0 ? std::min(gs, gf) / g_max : 0.0;

    double d = std::abs(std::atan2(sy, sx) - std::atan2(fy, fx));
    if (d > kPi) d = 2.0 * kPi - d;  // fold the circle
    if (d > kPi / 2.0) d = kPi - d;  // opposite directions share orientation
    const double a_rel = 1.0 - d / (kPi / 2.0);

    const double qg = norm_g / (1.0 + std::exp(kg * (g_rel - sg)));
    const double qa = norm_a / (1.0 + std::exp(ka * (a_rel - sa)));
    return std::make_pair(qg * qa, gs);
  };

  double num = 0.0, den = 0.0;
  const size_t n = f.size();
  for (size_t i = 0; i < n; ++i) {
    auto [q_af, w_a] = preservation(ga_x.v[i], ga_y.v[i], gf_x.v[i], gf_y.v[i]);
    auto [q_bf, w_b] = preservation(gb_x.v[i], gb_y.v[i], gf_x.v[i], gf_y.v[i]);
    num += q_af * w_a + q_bf * w_b;
    den += w_a + w_b;
  }
  return den > 0.0 ? num / den : 0.0;
}

PiellaResult piella(const GrayImage& a, const GrayImage& b,
                    const GrayImage& f) {
  check_triple(a, b, f);

  const Plane pa = to_plane(a), pb = to_plane(b), pf = to_plane(f);
  const QwResult base = piella_window_scores(pa, pb, pf);
  const QwResult edges = piella_window_scores(
      sobel_magnitude(pa), sobel_magnitude(pb), sobel_magnitude(pf));

  PiellaResult r;
  r.q = base.q;
  r.qw = base.qw;
  r.qe = base.qw * edges.qw;
  return r;
}

MetricsReport report(const GrayImage& a, const GrayImage& b,
                     const GrayImage& f) {
  check_triple(a, b, f);
  MetricsReport r;
  r.qabf = qabf(a, b, f);
  r.scd = scd(a, b, f);
  r.ms_ssim = ms_ssim(a, b, f);
  r.ag = avg_gradient(f);
  r.ei = edge_intensity(f);
  const PiellaResult p = piella(a, b, f);
  r.q = p.q;
  r.qw = p.qw;
  r.qe = p.qe;
  r.sf = spatial_frequency(f);
  return r;
}

std::string to_json(const MetricsReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "{\"qabf\":%.6f,\"scd\":%.6f,\"ms_ssim\":%.6f,\"ag\":%.6f,"
                "\"ei\":%.6f,\"q\":%.6f,\"qw\":%.6f,\"qe\":%.6f,\"sf\":%.6f}",
                r.qabf, r.scd, r.ms_ssim, r.ag, r.ei, r.q, r.qw, r.qe, r.sf);
  return std::string(buf);
}

}  // namespace nsf::metrics
