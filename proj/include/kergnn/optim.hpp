#pragma once

#include <cmath>

#include "kergnn/model.hpp"

namespace kergnn {

/// Adam over every tensor of a ModelParams.
class Adam {
public:
    Adam(const ModelParams& params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : m_(params.zeros_like()), v_(params.zeros_like()), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ModelParams& params, const ModelParams& grad, double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        auto p = tensor_views(params);
        auto g = tensor_views(grad);
        auto m = tensor_views(m_);
        auto v = tensor_views(v_);
        for (std::size_t k = 0; k < p.size(); ++k) {
            for (std::size_t i = 0; i < p[k].data.size(); ++i) {
                const double gi = g[k].data[i];
                m[k].data[i] = beta1_ * m[k].data[i] + (1.0 - beta1_) * gi;
                v[k].data[i] = beta2_ * v[k].data[i] + (1.0 - beta2_) * gi * gi;
                const double mhat = m[k].data[i] / c1;
                const double vhat = v[k].data[i] / c2;
                p[k].data[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    long steps() const { return t_; }

private:
    ModelParams m_;
    ModelParams v_;
    double beta1_, beta2_, eps_;
    long t_ = 0;
};

/// L2 norm over all gradient slots; a symmetric pair counts once.
inline double gradient_norm(const ModelParams& grad) {
    double sq = 0.0;
    for (const auto& t : tensor_views(grad)) {
        for (Index r = 0; r < t.rows; ++r) {
            for (Index c = 0; c < t.cols; ++c) {
                if (t.symmetric && c <= r) continue;
                const double x = t.data[static_cast<std::size_t>(r + c * t.rows)];
                sq += x * x;
            }
        }
    }
    return std::sqrt(sq);
}

inline void scale_gradient(ModelParams& grad, double s) {
    for (auto& t : tensor_views(grad)) {
        for (auto& x : t.data) x *= s;
    }
}

} // namespace kergnn
