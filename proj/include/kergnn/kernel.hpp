#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "kergnn/error.hpp"
#include "kergnn/filter.hpp"
#include "kergnn/graph.hpp"

namespace kergnn {

enum class KernelVariant { plain, deep };

inline const char* to_string(KernelVariant v) { return v == KernelVariant::plain ? "plain" : "deep"; }

inline KernelVariant kernel_variant_from_string(const std::string& s) {
    if (s == "plain") return KernelVariant::plain;
    if (s == "deep") return KernelVariant::deep;
    throw ArgumentError("unknown kernel variant '" + s + "' (expected plain or deep)");
}

/// P-step random walk kernel settings: walks of length 0..P weighted by lambdas.
struct RWKernelConfig {
    int max_steps = 2;
    std::vector<double> lambdas{1.0, 1.0, 1.0};
    KernelVariant variant = KernelVariant::plain;
    /// Divide by sqrt(K(sub, sub) * K(filter, filter)); plain variant only.
    bool normalize = false;

    static RWKernelConfig uniform(int max_steps, KernelVariant variant = KernelVariant::plain) {
        RWKernelConfig cfg;
        cfg.max_steps = max_steps;
        cfg.lambdas.assign(static_cast<std::size_t>(std::max(max_steps, 0) + 1), 1.0);
        cfg.variant = variant;
        return cfg;
    }

    void validate() const {
        detail::require(max_steps >= 0, "random walk length P must be >= 0");
        detail::require(lambdas.size() == static_cast<std::size_t>(max_steps) + 1,
                        "lambdas must have exactly P+1 entries");
        for (double l : lambdas) detail::require(l >= 0.0 && std::isfinite(l), "lambdas must be finite and >= 0");
        detail::require(!(normalize && variant == KernelVariant::deep),
                        "kernel normalization is only defined for the plain variant");
    }
};

struct KernelGradients {
    /// Symmetrized: (G + G^T) / 2 of the unconstrained derivative.
    Matrix d_adjacency;
    Matrix d_attributes;
    /// Present for the deep variant; shape (filter nodes x k_max).
    std::optional<Matrix> d_deep_weights;
    /// Derivative with respect to the (padded) subgraph attribute rows.
    Matrix d_subgraph_attributes;
};

struct KernelResult {
    double value = 0.0;
    KernelGradients grads;
};

/// Plain adjacency/attribute pair used by the direct-product oracle.
struct WeightedGraph {
    Matrix adjacency;
    Matrix attributes;
};

inline WeightedGraph as_weighted(const Graph& g) { return {g.adjacency(), g.attributes()}; }
inline WeightedGraph as_weighted(const GraphFilter& f) { return {f.adjacency, f.attributes}; }
/// Drops the padding slots.
inline WeightedGraph as_weighted(const Subgraph& s) {
    const Index k = s.size();
    return {s.adjacency.topLeftCorner(k, k), s.attributes.topRows(k)};
}

struct DirectProduct {
    /// Node (i, j) of the product has index i + n1 * j.
    Matrix adjacency;
    /// s = vec(X1 X2^T), column-stacked.
    Vector similarity;
};

/// Explicit direct product graph. Edge weight between (i, j) and (u, w) is
/// A1(i, u) * A2(j, w), so binary inputs give the usual product edge set.
inline DirectProduct direct_product_graph(const WeightedGraph& g1, const WeightedGraph& g2) {
    if (g1.attributes.cols() != g2.attributes.cols()) {
        throw ArgumentError("direct_product_graph: attribute widths differ (" +
                            std::to_string(g1.attributes.cols()) + " vs " +
                            std::to_string(g2.attributes.cols()) + ")");
    }
    const Index n1 = g1.adjacency.rows();
    const Index n2 = g2.adjacency.rows();
    const Index n = n1 * n2;
    DirectProduct dp{Matrix::Zero(n, n), Vector::Zero(n)};
    for (Index j = 0; j < n2; ++j) {
        for (Index i = 0; i < n1; ++i) {
            const Index row = i + n1 * j;
            dp.similarity(row) = g1.attributes.row(i).dot(g2.attributes.row(j));
            for (Index w = 0; w < n2; ++w) {
                if (g2.adjacency(j, w) == 0.0) continue;
                for (Index u = 0; u < n1; ++u) {
                    dp.adjacency(row, u + n1 * w) = g1.adjacency(i, u) * g2.adjacency(j, w);
                }
            }
        }
    }
    return dp;
}

/// Brute-force kernel: sum_p lambda_p * s^T A_x^p s on the explicit product graph.
/// Slow; meant as a reference for the Hadamard-form evaluation.
inline double rw_kernel_oracle(const WeightedGraph& g1, const WeightedGraph& g2, const RWKernelConfig& cfg) {
    cfg.validate();
    if (cfg.variant != KernelVariant::plain) throw ArgumentError("rw_kernel_oracle evaluates the plain kernel only");
    auto raw = [&](const WeightedGraph& a, const WeightedGraph& b) {
        const DirectProduct dp = direct_product_graph(a, b);
        Matrix power = Matrix::Identity(dp.adjacency.rows(), dp.adjacency.cols());
        double k = 0.0;
        for (int p = 0; p <= cfg.max_steps; ++p) {
            if (p > 0) power = power * dp.adjacency;
            k += cfg.lambdas[static_cast<std::size_t>(p)] * dp.similarity.dot(power * dp.similarity);
        }
        return k;
    };
    const double k = raw(g1, g2);
    if (!cfg.normalize) return k;
    const double denom = std::sqrt(raw(g1, g1) * raw(g2, g2));
    return denom > 0.0 ? k / denom : 0.0;
}

namespace kernel_detail {

struct PairTerms {
    double value = 0.0;
    Matrix d_x1;     // n1 x d
    Matrix d_x2;     // n2 x d
    Matrix d_a1;     // n1 x n1, unsymmetrized
    Matrix d_omega;  // n1 x n2
};

struct Wants {
    bool x1 = false;
    bool x2 = false;
    bool a1 = false;
    bool omega = false;
    bool any() const { return x1 || x2 || a1 || omega; }
};

/// K = sum_p lambda_p <Omega . S, A1^p S A2^p>, S = X1 X2^T, with A1 and A2
/// symmetric. Omega = all-ones when `omega` is null.
template <typename A1T, typename X1T, typename A2T, typename X2T>
PairTerms pair_kernel(const A1T& a1, const X1T& x1, const A2T& a2, const X2T& x2,
                      const std::vector<double>& lambdas, const Matrix* omega, Wants wants) {
    const int steps = static_cast<int>(lambdas.size()) - 1;
    const Matrix s = x1 * x2.transpose();
    Matrix walk = s;
    Matrix t = lambdas[0] * s;
    for (int p = 1; p <= steps; ++p) {
        walk = a1 * walk * a2;
        t.noalias() += lambdas[static_cast<std::size_t>(p)] * walk;
    }
    PairTerms out;
    const Matrix u = omega ? Matrix(omega->cwiseProduct(s)) : s;
    out.value = u.cwiseProduct(t).sum();
    if (!wants.any()) return out;

    if (wants.omega) out.d_omega = s.cwiseProduct(t);

    if (wants.x1 || wants.x2) {
        Matrix g_s;
        if (omega) {
            g_s = omega->cwiseProduct(t);
            Matrix z = u;
            g_s.noalias() += lambdas[0] * u;
            for (int p = 1; p <= steps; ++p) {
                z = a1 * z * a2;
                g_s.noalias() += lambdas[static_cast<std::size_t>(p)] * z;
            }
        } else {
            g_s = 2.0 * t;
        }
        if (wants.x1) out.d_x1 = g_s * x2;
        if (wants.x2) out.d_x2 = g_s.transpose() * x1;
    }

    if (wants.a1) {
        const Index n1 = a1.rows();
        out.d_a1 = Matrix::Zero(n1, n1);
        if (steps >= 1) {
            std::vector<Matrix> a1_pow(static_cast<std::size_t>(steps));
            a1_pow[0] = Matrix::Identity(n1, n1);
            for (int r = 1; r < steps; ++r) a1_pow[static_cast<std::size_t>(r)] = a1_pow[static_cast<std::size_t>(r - 1)] * a1;
            Matrix s_a2 = s;  // S A2^p
            for (int p = 1; p <= steps; ++p) {
                s_a2 = s_a2 * a2;
                const double lam = lambdas[static_cast<std::size_t>(p)];
                if (lam == 0.0) continue;
                const Matrix q = u * s_a2.transpose();
                for (int r = 0; r < p; ++r) {
                    out.d_a1.noalias() += lam * (a1_pow[static_cast<std::size_t>(r)] * q *
                                                 a1_pow[static_cast<std::size_t>(p - 1 - r)]);
                }
            }
        }
    }
    return out;
}

inline void check_inputs(const Subgraph& sub, const GraphFilter& filt, const RWKernelConfig& cfg,
                         const Matrix* deep_weights) {
    cfg.validate();
    if (filt.attr_dim() != sub.attributes.cols()) {
        throw ArgumentError("rw_kernel: filter attribute width " + std::to_string(filt.attr_dim()) +
                            " != subgraph attribute width " + std::to_string(sub.attributes.cols()));
    }
    detail::require(filt.adjacency.rows() == filt.adjacency.cols() && filt.attributes.rows() == filt.n_nodes(),
                    "rw_kernel: malformed filter shapes");
    detail::require(sub.adjacency.rows() == sub.adjacency.cols() && sub.attributes.rows() == sub.capacity() &&
                        sub.size() <= sub.capacity(),
                    "rw_kernel: malformed subgraph shapes");
    if (cfg.variant == KernelVariant::deep) {
        if (deep_weights == nullptr) throw ArgumentError("rw_kernel: deep variant requires deep weights");
        if (deep_weights->rows() != filt.n_nodes() || deep_weights->cols() != sub.capacity()) {
            throw ArgumentError("rw_kernel: deep weights must have shape (filter nodes x k_max)");
        }
    }
}

} // namespace kernel_detail

/// Hadamard-form kernel between a padded subgraph and a filter:
/// sum_p lambda_p * sum_ij [(W X^T) . (A^p W (B^p X)^T)]_ij, where (A, W) is the
/// filter and (B, X) the subgraph. For the deep variant every (i, j) summand
/// is scaled by deep_weights(i, j). Padding slots never contribute.
inline double rw_kernel(const Subgraph& sub, const GraphFilter& filt, const RWKernelConfig& cfg,
                        const Matrix* deep_weights = nullptr) {
    kernel_detail::check_inputs(sub, filt, cfg, deep_weights);
    const Index k = sub.size();
    const auto b = sub.adjacency.topLeftCorner(k, k);
    const auto x = sub.attributes.topRows(k);
    if (cfg.variant == KernelVariant::deep) {
        const Matrix omega = deep_weights->leftCols(k);
        return kernel_detail::pair_kernel(filt.adjacency, filt.attributes, b, x, cfg.lambdas, &omega, {}).value;
    }
    const double value = kernel_detail::pair_kernel(filt.adjacency, filt.attributes, b, x, cfg.lambdas, nullptr, {}).value;
    if (!cfg.normalize) return value;
    const double kss = kernel_detail::pair_kernel(b, x, b, x, cfg.lambdas, nullptr, {}).value;
    const double khh =
        kernel_detail::pair_kernel(filt.adjacency, filt.attributes, filt.adjacency, filt.attributes, cfg.lambdas, nullptr, {}).value;
    const double denom = std::sqrt(kss * khh);
    return denom > 0.0 ? value / denom : 0.0;
}

/// Kernel value together with exact derivatives with respect to the filter
/// parameters, the deep weights and the subgraph attributes.
/// `with_subgraph_grad = false` skips d_subgraph_attributes (left empty).
inline KernelResult rw_kernel_grad(const Subgraph& sub, const GraphFilter& filt, const RWKernelConfig& cfg,
                                   const Matrix* deep_weights = nullptr, bool with_subgraph_grad = true) {
    using kernel_detail::pair_kernel;
    kernel_detail::check_inputs(sub, filt, cfg, deep_weights);
    const Index k = sub.size();
    const Index n = filt.n_nodes();
    const auto b = sub.adjacency.topLeftCorner(k, k);
    const auto x = sub.attributes.topRows(k);
    const bool deep = cfg.variant == KernelVariant::deep;

    Matrix omega;
    if (deep) omega = deep_weights->leftCols(k);
    kernel_detail::Wants wants{true, with_subgraph_grad, true, deep};
    auto terms = pair_kernel(filt.adjacency, filt.attributes, b, x, cfg.lambdas, deep ? &omega : nullptr, wants);

    KernelResult res;
    Matrix d_a = std::move(terms.d_a1);
    Matrix d_w = std::move(terms.d_x1);
    Matrix d_x = with_subgraph_grad ? std::move(terms.d_x2) : Matrix();
    res.value = terms.value;

    if (cfg.normalize) {
        const auto self_sub = pair_kernel(b, x, b, x, cfg.lambdas, nullptr, {true, true, false, false});
        const auto self_filt = pair_kernel(filt.adjacency, filt.attributes, filt.adjacency, filt.attributes,
                                           cfg.lambdas, nullptr, {true, true, true, false});
        const double kss = self_sub.value;
        const double khh = self_filt.value;
        const double denom = std::sqrt(kss * khh);
        if (!(denom > 0.0)) {
            res.value = 0.0;
            d_a.setZero();
            d_w.setZero();
            if (with_subgraph_grad) d_x.setZero();
        } else {
            const double kn = terms.value / denom;
            res.value = kn;
            // d(K / sqrt(Kss Khh)) = dK / D - Kn / 2 * (dKss / Kss + dKhh / Khh)
            d_a = d_a / denom - (kn / (2.0 * khh)) * (2.0 * self_filt.d_a1);
            d_w = d_w / denom - (kn / (2.0 * khh)) * (self_filt.d_x1 + self_filt.d_x2);
            if (with_subgraph_grad) d_x = d_x / denom - (kn / (2.0 * kss)) * (self_sub.d_x1 + self_sub.d_x2);
        }
    }

    res.grads.d_adjacency = 0.5 * (d_a + d_a.transpose());
    res.grads.d_attributes = std::move(d_w);
    if (deep) {
        res.grads.d_deep_weights = Matrix::Zero(n, sub.capacity());
        res.grads.d_deep_weights->leftCols(k) = terms.d_omega;
    }
    if (with_subgraph_grad) {
        res.grads.d_subgraph_attributes = Matrix::Zero(sub.capacity(), sub.attributes.cols());
        res.grads.d_subgraph_attributes.topRows(k) = d_x;
    }
    return res;
}

} // namespace kergnn
