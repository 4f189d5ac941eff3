#include "core/ssim.hpp"

#include <array>
#include <cmath>

#include "core/error.hpp"

namespace bs {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWin> window_1d() {
    std::array<double, kWin> g{};
    double sum = 0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2.0;
        g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        sum += g[i];
    }
    for (double& v : g) v /= sum;
    return g;
}

using Plane = std::vector<double>;

// Valid separable convolution: (w, h) -> (w - kWin + 1, h - kWin + 1).
Plane conv_valid(const Plane& in, int w, int h) {
    const auto g = window_1d();
    const int vw = w - kWin + 1, vh = h - kWin + 1;
    Plane tmp(static_cast<size_t>(vw) * h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < vw; ++x) {
            double s = 0;
            for (int i = 0; i < kWin; ++i) s += g[i] * in[static_cast<size_t>(y) * w + x + i];
            tmp[static_cast<size_t>(y) * vw + x] = s;
        }
    Plane out(static_cast<size_t>(vw) * vh, 0.0);
    for (int y = 0; y < vh; ++y)
        for (int x = 0; x < vw; ++x) {
            double s = 0;
            for (int j = 0; j < kWin; ++j) s += g[j] * tmp[static_cast<size_t>(y + j) * vw + x];
            out[static_cast<size_t>(y) * vw + x] = s;
        }
    return out;
}

// Transpose of conv_valid: scatters (vw, vh) back to (w, h).
Plane conv_valid_transpose(const Plane& in, int w, int h) {
    const auto g = window_1d();
    const int vw = w - kWin + 1, vh = h - kWin + 1;
    Plane tmp(static_cast<size_t>(vw) * h, 0.0);
    for (int y = 0; y < vh; ++y)
        for (int x = 0; x < vw; ++x) {
            const double v = in[static_cast<size_t>(y) * vw + x];
            for (int j = 0; j < kWin; ++j) tmp[static_cast<size_t>(y + j) * vw + x] += g[j] * v;
        }
    Plane out(static_cast<size_t>(w) * h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < vw; ++x) {
            const double v = tmp[static_cast<size_t>(y) * vw + x];
            for (int i = 0; i < kWin; ++i) out[static_cast<size_t>(y) * w + x + i] += g[i] * v;
        }
    return out;
}

Plane channel_plane(const ImageBuffer& img, int c) {
    Plane p(img.pixel_count());
    for (size_t i = 0; i < p.size(); ++i) p[i] = img.data[i * img.channels + c];
    return p;
}

void check_inputs(const ImageBuffer& a, const ImageBuffer& b) {
    require(a.same_shape(b), "ssim: image shapes differ");
    require(a.width >= kWin && a.height >= kWin,
            "ssim: image smaller than the 11x11 window");
}

}  // namespace

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
    check_inputs(a, b);
    const int w = a.width, h = a.height;
    const int vw = w - kWin + 1, vh = h - kWin + 1;

    double total = 0;
    for (int c = 0; c < a.channels; ++c) {
        const Plane x = channel_plane(a, c);
        const Plane y = channel_plane(b, c);
        Plane xx(x.size()), yy(x.size()), xy(x.size());
        for (size_t i = 0; i < x.size(); ++i) {
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const Plane mu_x = conv_valid(x, w, h);
        const Plane mu_y = conv_valid(y, w, h);
        const Plane e_xx = conv_valid(xx, w, h);
        const Plane e_yy = conv_valid(yy, w, h);
        const Plane e_xy = conv_valid(xy, w, h);
        for (size_t i = 0; i < mu_x.size(); ++i) {
            const double var_x = e_xx[i] - mu_x[i] * mu_x[i];
            const double var_y = e_yy[i] - mu_y[i] * mu_y[i];
            const double cov = e_xy[i] - mu_x[i] * mu_y[i];
            const double a1 = 2 * mu_x[i] * mu_y[i] + kC1;
            const double a2 = 2 * cov + kC2;
            const double b1 = mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + kC1;
            const double b2 = var_x + var_y + kC2;
            total += (a1 * a2) / (b1 * b2);
        }
    }
    return total / (static_cast<double>(vw) * vh * a.channels);
}

std::vector<double> ssim_backward(const ImageBuffer& a, const ImageBuffer& b) {
    check_inputs(a, b);
    const int w = a.width, h = a.height;
    const int vw = w - kWin + 1, vh = h - kWin + 1;
    const double inv_count = 1.0 / (static_cast<double>(vw) * vh * a.channels);

    std::vector<double> grad(a.data.size(), 0.0);
    for (int c = 0; c < a.channels; ++c) {
        const Plane x = channel_plane(a, c);
        const Plane y = channel_plane(b, c);
        Plane xx(x.size()), yy(x.size()), xy(x.size());
        for (size_t i = 0; i < x.size(); ++i) {
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const Plane mu_x = conv_valid(x, w, h);
        const Plane mu_y = conv_valid(y, w, h);
        const Plane e_xx = conv_valid(xx, w, h);
        const Plane e_yy = conv_valid(yy, w, h);
        const Plane e_xy = conv_valid(xy, w, h);

        // d(ssim)/d(mu_x), d/d(var_x), d/d(cov) per window position, then the
        // pixel gradient is w * (g1 + g2 * x_p + g3 * y_p) scattered back.
        Plane g1(mu_x.size()), g2(mu_x.size()), g3(mu_x.size());
        for (size_t i = 0; i < mu_x.size(); ++i) {
            const double var_x = e_xx[i] - mu_x[i] * mu_x[i];
            const double var_y = e_yy[i] - mu_y[i] * mu_y[i];
            const double cov = e_xy[i] - mu_x[i] * mu_y[i];
            const double a1 = 2 * mu_x[i] * mu_y[i] + kC1;
            const double a2 = 2 * cov + kC2;
            const double b1 = mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + kC1;
            const double b2 = var_x + var_y + kC2;
            const double d = b1 * b2;
            const double d_mu = 2 * a2 * (mu_y[i] * b1 - mu_x[i] * a1) / (b1 * b1 * b2);
            const double d_var = -a1 * a2 / (b1 * b2 * b2);
            const double d_cov = 2 * a1 / d;
            g1[i] = (d_mu - 2 * mu_x[i] * d_var - mu_y[i] * d_cov) * inv_count;
            g2[i] = 2 * d_var * inv_count;
            g3[i] = d_cov * inv_count;
        }
        const Plane s1 = conv_valid_transpose(g1, w, h);
        const Plane s2 = conv_valid_transpose(g2, w, h);
        const Plane s3 = conv_valid_transpose(g3, w, h);
        for (size_t i = 0; i < x.size(); ++i)
            grad[i * a.channels + c] = s1[i] + s2[i] * x[i] + s3[i] * y[i];
    }
    return grad;
}

}  // namespace bs
