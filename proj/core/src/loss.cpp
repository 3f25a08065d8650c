#include "gsrec/loss.hpp"

#include <cmath>
#include <vector>

namespace gsrec {

namespace {

constexpr double kC1 = 0.01 * 0.01;  // (k1 * dynamic_range)^2
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_window(int window, double sigma) {
    std::vector<double> w(static_cast<size_t>(window) * window);
    const int r = window / 2;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            w[static_cast<size_t>(dy + r) * window + (dx + r)] =
                std::exp(-0.5 * (dx * dx + dy * dy) / (sigma * sigma));
    return w;
}

struct SsimPlanes {
    // Per pixel and channel: local means and the partials of ssim_p with
    // respect to (mu_x, var_x, cov_xy), plus 1/sum(w) for the clipped window.
    Image mu_x, mu_y, d_mu, d_var, d_cov, inv_sw;
    double mean_ssim = 0.0;
    double pixel_count = 0.0;  // pixel-channel terms entering the mean
};

SsimPlanes ssim_forward(const Image& x, const Image& y, const Image* mask, int window,
                        double sigma, bool want_partials) {
    const int w = x.width(), h = x.height(), ch = x.channels();
    const int r = window / 2;
    const auto win = gaussian_window(window, sigma);

    SsimPlanes p;
    if (want_partials) {
        p.mu_x = Image(w, h, ch);
        p.mu_y = Image(w, h, ch);
        p.d_mu = Image(w, h, ch);
        p.d_var = Image(w, h, ch);
        p.d_cov = Image(w, h, ch);
        p.inv_sw = Image(w, h, 1);
    }

    double total = 0.0;
    double count = 0.0;
    for (int py = 0; py < h; ++py) {
        for (int px = 0; px < w; ++px) {
            if (mask && mask->at(px, py) <= 0.5) continue;
            double sw = 0.0;
            double sx[3] = {0, 0, 0}, sy[3] = {0, 0, 0};
            double sxx[3] = {0, 0, 0}, syy[3] = {0, 0, 0}, sxy[3] = {0, 0, 0};
            for (int dy = -r; dy <= r; ++dy) {
                const int qy = py + dy;
                if (qy < 0 || qy >= h) continue;
                for (int dx = -r; dx <= r; ++dx) {
                    const int qx = px + dx;
                    if (qx < 0 || qx >= w) continue;
                    const double wv = win[static_cast<size_t>(dy + r) * window + (dx + r)];
                    sw += wv;
                    for (int c = 0; c < ch; ++c) {
                        const double xv = x.at(qx, qy, c);
                        const double yv = y.at(qx, qy, c);
                        sx[c] += wv * xv;
                        sy[c] += wv * yv;
                        sxx[c] += wv * xv * xv;
                        syy[c] += wv * yv * yv;
                        sxy[c] += wv * xv * yv;
                    }
                }
            }
            const double inv = 1.0 / sw;
            if (want_partials) p.inv_sw.at(px, py) = inv;
            for (int c = 0; c < ch; ++c) {
                const double mx = sx[c] * inv;
                const double my = sy[c] * inv;
                const double vx = sxx[c] * inv - mx * mx;
                const double vy = syy[c] * inv - my * my;
                const double cxy = sxy[c] * inv - mx * my;
                const double a1 = 2.0 * mx * my + kC1;
                const double a2 = 2.0 * cxy + kC2;
                const double b1 = mx * mx + my * my + kC1;
                const double b2 = vx + vy + kC2;
                const double denom = b1 * b2;
                const double s = a1 * a2 / denom;
                total += s;
                count += 1.0;
                if (want_partials) {
                    p.mu_x.at(px, py, c) = mx;
                    p.mu_y.at(px, py, c) = my;
                    p.d_mu.at(px, py, c) = 2.0 * my * a2 / denom - s * 2.0 * mx / b1;
                    p.d_var.at(px, py, c) = -s / b2;
                    p.d_cov.at(px, py, c) = 2.0 * a1 / denom;
                }
            }
        }
    }
    p.pixel_count = count;
    p.mean_ssim = count > 0.0 ? total / count : 1.0;
    return p;
}

}  // namespace

double ssim_mean(const Image& a, const Image& b, int window, double sigma) {
    GSREC_CHECK_ARG(a.same_shape(b), "ssim inputs must share a shape");
    GSREC_CHECK_ARG(window >= 3 && window % 2 == 1, "ssim window must be odd and >= 3");
    return ssim_forward(a, b, nullptr, window, sigma, false).mean_ssim;
}

LossResult reconstruction_loss(const Image& rendered, const Image& target, const Image* mask,
                               const LossConfig& cfg) {
    cfg.validate();
    GSREC_CHECK_ARG(rendered.same_shape(target), "loss inputs must share a shape, got ",
                    rendered.width(), "x", rendered.height(), " vs ", target.width(), "x",
                    target.height());
    if (mask) {
        GSREC_CHECK_ARG(mask->width() == rendered.width() &&
                            mask->height() == rendered.height() && mask->channels() == 1,
                        "mask shape mismatch");
    }

    const int w = rendered.width(), h = rendered.height(), ch = rendered.channels();
    LossResult out;
    out.grad = Image(w, h, ch);

    // L1 term over (masked) pixels.
    double l1 = 0.0;
    double count = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (mask && mask->at(x, y) <= 0.5) continue;
            for (int c = 0; c < ch; ++c) {
                l1 += std::abs(rendered.at(x, y, c) - target.at(x, y, c));
                count += 1.0;
            }
        }
    }
    if (count > 0.0) l1 /= count;
    const double l1_weight = (1.0 - cfg.lambda) / (count > 0.0 ? count : 1.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (mask && mask->at(x, y) <= 0.5) continue;
            for (int c = 0; c < ch; ++c) {
                const double d = rendered.at(x, y, c) - target.at(x, y, c);
                out.grad.at(x, y, c) = l1_weight * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
            }
        }
    }

    double ssim = 1.0;
    if (cfg.lambda > 0.0) {
        const auto planes =
            ssim_forward(rendered, target, mask, cfg.ssim_window, cfg.ssim_sigma, true);
        ssim = planes.mean_ssim;

        // d(mean ssim)/dx gathered per source pixel q over the windows that
        // contain it; weights renormalize with the same clipped sums as the
        // forward pass so the gradient stays exact at the border.
        const int r = cfg.ssim_window / 2;
        const auto win = gaussian_window(cfg.ssim_window, cfg.ssim_sigma);
        const double norm =
            planes.pixel_count > 0.0 ? cfg.lambda / planes.pixel_count : 0.0;
        for (int qy = 0; qy < h; ++qy) {
            for (int qx = 0; qx < w; ++qx) {
                for (int c = 0; c < ch; ++c) {
                    const double xv = rendered.at(qx, qy, c);
                    const double yv = target.at(qx, qy, c);
                    double acc = 0.0;
                    for (int dy = -r; dy <= r; ++dy) {
                        const int py = qy + dy;
                        if (py < 0 || py >= h) continue;
                        for (int dx = -r; dx <= r; ++dx) {
                            const int px = qx + dx;
                            if (px < 0 || px >= w) continue;
                            if (mask && mask->at(px, py) <= 0.5) continue;
                            const double wv =
                                win[static_cast<size_t>(-dy + r) * cfg.ssim_window + (-dx + r)] *
                                planes.inv_sw.at(px, py);
                            acc += wv * (planes.d_mu.at(px, py, c) +
                                         2.0 * (xv - planes.mu_x.at(px, py, c)) *
                                             planes.d_var.at(px, py, c) +
                                         (yv - planes.mu_y.at(px, py, c)) *
                                             planes.d_cov.at(px, py, c));
                        }
                    }
                    // L = ... + lambda * (1 - mean ssim)
                    out.grad.at(qx, qy, c) -= norm * acc;
                }
            }
        }
    }

    out.value = (1.0 - cfg.lambda) * l1 + cfg.lambda * (1.0 - ssim);
    return out;
}

}  // namespace gsrec
