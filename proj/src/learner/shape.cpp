#include <cmath>
#include <iostream>

#include "kpl/error.hpp"
#include "kpl/learner.hpp"

namespace kpl::learner {

ShapeTemplate shape_template(double alpha, double beta, int size) {
    if (!(alpha > 0.0) || !(beta > 0.0))
        throw ContractError("shape_template: alpha and beta must be positive");
    if (size <= 0 || size % 2 == 0)
        throw ContractError("shape_template: size must be odd and positive");
    ShapeTemplate t;
    t.alpha = alpha;
    t.beta = beta;
    t.size = size;
    t.h = img::Filter2d(size);
    const int r0 = (size - 1) / 2;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double r = std::hypot(x - r0, y - r0);
            t.h.at(x, y) = std::exp(alpha * (1.0 - r / beta)) - 1.0;
        }
    img::ChannelImage ch(size, size);
    ch.data = t.h.taps;
    t.H = img::dft2(ch);
    const double scale = 1.0 / size;
    for (auto& v : t.H.data) v *= scale;
    t.h_norm2 = 0.0;
    for (double v : t.h.taps) t.h_norm2 += v * v;
    return t;
}

double loss_shape_spatial(const ghh::GhhModel& model, const trainset::TrainingSet& ts,
                          const ShapeTemplate& tmpl, double gamma_s) {
    const int p = model.patch_size;
    const int p2 = p * p;
    if (tmpl.size != p) throw ContractError("shape loss: template size mismatch");
    if (ts.dim() != model.dim())
        throw ContractError("shape loss: spatial form needs full tap space");
    const int kp = ts.positive_count();
    if (kp == 0) {
        std::cerr << "note: shape loss over zero positives\n";
        return 0.0;
    }

    // Corner-indexed circular convolution; the frequency-domain path uses
    // the same indexing, so the two must agree exactly.
    std::vector<double> conv(static_cast<std::size_t>(p2));
    double acc = 0.0;
    for (int i = 0; i < ts.count(); ++i) {
        if (ts.samples[static_cast<std::size_t>(i)].label <= 0) continue;
        const Eigen::VectorXd patch = ts.patches.row(i);
        for (int n = 0; n < model.num_components(); ++n) {
            const int m = ghh::active_index(model, patch, n);
            const Eigen::VectorXd& w = model.filters[static_cast<std::size_t>(n)][static_cast<std::size_t>(m)].taps;
            for (int c = 0; c < img::kFeatureChannels; ++c) {
                const double* wc = w.data() + c * p2;
                const double* xc = patch.data() + c * p2;
                double dot = 0.0;
                for (int j = 0; j < p2; ++j) dot += wc[j] * xc[j];
                for (int ty = 0; ty < p; ++ty)
                    for (int tx = 0; tx < p; ++tx) {
                        double s = 0.0;
                        for (int ay = 0; ay < p; ++ay) {
                            const int sy = (ty - ay + p) % p;
                            const double* wrow = wc + ay * p;
                            const double* xrow = xc + sy * p;
                            for (int ax = 0; ax < p; ++ax) {
                                const int sx = (tx - ax + p) % p;
                                s += wrow[ax] * xrow[sx];
                            }
                        }
                        conv[static_cast<std::size_t>(ty) * p + tx] = s;
                    }
                for (int j = 0; j < p2; ++j) {
                    const double res = conv[static_cast<std::size_t>(j)] - dot * tmpl.h.taps[static_cast<std::size_t>(j)];
                    acc += res * res;
                }
            }
        }
    }
    return gamma_s / kp * acc;
}

}  // namespace kpl::learner
