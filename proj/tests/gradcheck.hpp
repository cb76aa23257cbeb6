#pragma once

// Central finite-difference gradient checks over every graph op and loss, in double.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tslearn/autodiff.hpp"

namespace gradcheck {

using tsl::Graph;
using tsl::LossValue;
using tsl::Tensor;
using tsl::Var;

inline constexpr double kStep = 1e-5;
// Below this magnitude a coordinate is compared absolutely (|a-n| / kFloor);
// central differences carry roughly eps*|loss|/h of rounding noise.
inline constexpr double kFloor = 1e-3;

struct OpReport {
    std::string op;
    int instances = 0;
    double max_rel = 0.0;
};

using Builder = std::function<LossValue<double>(Graph<double>&, std::vector<Var>&)>;

// Largest per-coordinate relative error |a-n| / max(|a|,|n|,kFloor) over all parameters.
inline double check(std::vector<Tensor<double>>& params, const Builder& build) {
    for (auto& p : params) p.clear_grad();
    {
        Graph<double> g;
        std::vector<Var> vars;
        for (auto& p : params) vars.push_back(g.parameter(p));
        g.backward(build(g, vars));
    }
    auto loss_at = [&]() {
        Graph<double> g;
        std::vector<Var> vars;
        for (auto& p : params) vars.push_back(g.parameter(p));
        return build(g, vars).value;
    };
    double worst = 0.0;
    for (auto& p : params) {
        const std::vector<double> analytic(p.grad().begin(), p.grad().end());
        p.clear_grad();
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double keep = p[i];
            p[i] = keep + kStep;
            const double up = loss_at();
            p[i] = keep - kStep;
            const double down = loss_at();
            p[i] = keep;
            const double numeric = (up - down) / (2.0 * kStep);
            const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), kFloor});
            worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);

        }
    }
    return worst;
}

// Values at least `gap` apart in random order, so no window has a near-tie.
inline std::vector<double> spaced(std::size_t n, std::mt19937_64& rng, double gap = 0.01) {
    std::vector<double> v(n);
    std::iota(v.begin(), v.end(), 0.0);
    std::shuffle(v.begin(), v.end(), rng);
    const double mid = 0.5 * static_cast<double>(n);
    for (auto& x : v) x = (x - mid) * gap;
    return v;
}

inline std::vector<double> away_from_zero(std::size_t n, std::mt19937_64& rng, double margin = 1e-2) {
    std::uniform_real_distribution<double> d(margin, 1.0);
    std::bernoulli_distribution sign(0.5);
    std::vector<double> v(n);
    for (auto& x : v) x = sign(rng) ? d(rng) : -d(rng);
    return v;
}

inline Tensor<double> one_hot_rows(std::size_t m, std::size_t c, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, c - 1);
    Tensor<double> t({m, c});
    for (std::size_t i = 0; i < m; ++i) t[i * c + pick(rng)] = 1.0;
    return t;
}

// True when every relu input in `pre` is at least 1e-3 from zero.
inline bool clear_of_kinks(const Tensor<double>& pre) {
    return std::all_of(pre.values().begin(), pre.values().end(), [](double v) { return std::abs(v) > 1e-3; });
}

// True when every pooling window has a unique maximum by at least 1e-3.
inline bool clear_of_ties(const Tensor<double>& x, std::size_t window, std::size_t stride) {
    const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t oh = (h - window) / stride + 1, ow = (w - window) / stride + 1;
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t r = 0; r < oh; ++r)
            for (std::size_t c = 0; c < ow; ++c) {
                double best = -INFINITY, second = -INFINITY;
                for (std::size_t u = 0; u < window; ++u)
                    for (std::size_t v = 0; v < window; ++v) {
                        const double val = x[(p * h + r * stride + u) * w + c * stride + v];
                        if (val > best) {
                            second = best;
                            best = val;
                        } else if (val > second) {
                            second = val;
                        }
                    }
                if (window * window > 1 && best - second < 1e-3) return false;
            }
    return true;
}

// Runs `instances` random cases for each op and loss.
inline std::vector<OpReport> run_suite(int instances, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> small(1, 4), side(3, 6), kern(1, 3), cls(2, 6);
    std::vector<OpReport> out;
    auto record = [&](const std::string& name, auto&& one) {
        OpReport r{name};
        while (r.instances < instances) {
            const double e = one();
            if (e < 0) continue;  // instance rejected (kink or tie)
            r.max_rel = std::max(r.max_rel, e);
            ++r.instances;
        }
        out.push_back(r);
    };

    record("linear", [&] {
        const std::size_t m = small(rng), k = small(rng) + 1, n = small(rng);
        std::vector<Tensor<double>> p{oracle::random_tensor({m, k}, rng), oracle::random_tensor({k, n}, rng),
                                      oracle::random_tensor({n}, rng)};
        const auto target = oracle::random_tensor({m, n}, rng);
        return check(p, [&](Graph<double>& g, std::vector<Var>& v) {
            return g.mse_feature(g.linear(v[0], v[1], v[2]), target);
        });
    });

    record("conv2d", [&] {
        std::size_t n = small(rng), ci = small(rng), h = side(rng), w = side(rng), co = small(rng), k = kern(rng);
        std::size_t stride = 1 + rng() % 2, pad = rng() % 2;
        if ((h + 2 * pad < k) || (w + 2 * pad < k) || (h + 2 * pad - k) % stride || (w + 2 * pad - k) % stride)
            return -1.0;
        const std::size_t oh = (h + 2 * pad - k) / stride + 1, ow = (w + 2 * pad - k) / stride + 1;
        std::vector<Tensor<double>> p{oracle::random_tensor({n, ci, h, w}, rng),
                                      oracle::random_tensor({co, ci, k, k}, rng), oracle::random_tensor({co}, rng)};
        const auto target = oracle::random_tensor({n, co * oh * ow}, rng);
        return check(p, [&](Graph<double>& g, std::vector<Var>& v) {
            return g.mse_feature(g.flatten(g.conv2d(v[0], v[1], v[2], stride, pad)), target);
        });
    });

    record("relu", [&] {
        const std::size_t m = small(rng), d = small(rng) + 2;
        std::vector<Tensor<double>> p{Tensor<double>({m, d}, away_from_zero(m * d, rng))};
        const auto target = oracle::random_tensor({m, d}, rng);
        return check(p, [&](Graph<double>& g, std::vector<Var>& v) { return g.mse_feature(g.relu(v[0]), target); });
    });

    record("maxpool2d", [&] {
        const std::size_t window = 1 + rng() % 3, stride = 1 + rng() % 3, oh = small(rng), ow = small(rng);
        const std::size_t n = small(rng), c = small(rng);
        const std::size_t h = (oh - 1) * stride + window, w = (ow - 1) * stride + window;
        std::vector<Tensor<double>> p{Tensor<double>({n, c, h, w}, spaced(n * c * h * w, rng))};
        const auto target = oracle::random_tensor({n, c * oh * ow}, rng);
        return check(p, [&](Graph<double>& g, std::vector<Var>& v) {
            return g.mse_feature(g.flatten(g.maxpool2d(v[0], window, stride)), target);
        });
    });

    record("flatten", [&] {
        const std::size_t n = small(rng), c = small(rng), h = small(rng), w = small(rng);
        std::vector<Tensor<double>> p{oracle::random_tensor({n, c, h, w}, rng)};
        const auto target = oracle::random_tensor({n, c * h * w}, rng);
        return check(p, [&](Graph<double>& g, std::vector<Var>& v) { return g.mse_feature(g.flatten(v[0]), target); });
    });

    for (auto red : {tsl::Reduction::Mean, tsl::Reduction::Sum}) {
        record(red == tsl::Reduction::Mean ? "cross_entropy(mean)" : "cross_entropy(sum)", [&] {
            const std::size_t m = small(rng), c = cls(rng);
            std::vector<Tensor<double>> p{oracle::random_tensor({m, c}, rng, -3.0, 3.0)};
            const auto y = one_hot_rows(m, c, rng);
            return check(p, [&](Graph<double>& g, std::vector<Var>& v) { return g.cross_entropy(v[0], y, red); });
        });
    }

    record("mse_feature", [&] {
        const std::size_t m = small(rng), d = small(rng) + 1;
        std::vector<Tensor<double>> p{oracle::random_tensor({m, d}, rng)};
        const auto teacher = oracle::random_tensor({m, d}, rng);
        return check(p, [&](Graph<double>& g, std::vector<Var>& v) { return g.mse_feature(v[0], teacher); });
    });

    record("combined", [&] {
        const std::size_t m = small(rng), d = small(rng) + 1, c = cls(rng);
        std::uniform_real_distribution<double> lam(0.0, 2.0);
        const double lm = lam(rng), lx = lam(rng);
        std::vector<Tensor<double>> p{oracle::random_tensor({m, d}, rng), oracle::random_tensor({d, c}, rng),
                                      oracle::random_tensor({c}, rng)};
        const auto teacher = oracle::random_tensor({m, d}, rng);
        const auto y = one_hot_rows(m, c, rng);
        return check(p, [&](Graph<double>& g, std::vector<Var>& v) {
            const auto mse = g.mse_feature(v[0], teacher);
            const auto xent = g.cross_entropy(g.linear(v[0], v[1], v[2]), y);
            return g.combined(mse, xent, lm, lx);
        });
    });

    record("scale", [&] {
        const std::size_t m = small(rng), c = cls(rng);
        const double w = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
        std::vector<Tensor<double>> p{oracle::random_tensor({m, c}, rng, -3.0, 3.0)};
        const auto y = one_hot_rows(m, c, rng);
        return check(p, [&](Graph<double>& g, std::vector<Var>& v) { return g.scale(g.cross_entropy(v[0], y), w); });
    });

    // conv -> relu -> pool -> flatten -> linear -> relu -> head, combined loss.
    record("network", [&] {
        const std::size_t n = small(rng), ci = small(rng), co = small(rng), d = 3, c = cls(rng);
        std::vector<Tensor<double>> p{oracle::random_tensor({n, ci, 6, 6}, rng),
                                      oracle::random_tensor({co, ci, 3, 3}, rng, -0.5, 0.5),
                                      oracle::random_tensor({co}, rng, -0.5, 0.5),
                                      oracle::random_tensor({co * 9, d}, rng, -0.5, 0.5),
                                      oracle::random_tensor({d}, rng, -0.5, 0.5),
                                      oracle::random_tensor({d, c}, rng), oracle::random_tensor({c}, rng)};
        const auto teacher = oracle::random_tensor({n, d}, rng, 0.0, 1.0);
        const auto y = one_hot_rows(n, c, rng);
        {
            Graph<double> g;
            std::vector<Var> v;
            for (auto& t : p) v.push_back(g.constant(t));
            const Var conv = g.conv2d(v[0], v[1], v[2], 1, 1);
            const Var pooled = g.maxpool2d(g.relu(conv), 2, 2);
            const Var hidden = g.linear(g.flatten(pooled), v[3], v[4]);
            const Tensor<double> relu_out = g.value(g.relu(conv));
            if (!clear_of_kinks(g.value(conv)) || !clear_of_kinks(g.value(hidden)) ||
                !clear_of_ties(relu_out, 2, 2))
                return -1.0;
        }
        return check(p, [&](Graph<double>& g, std::vector<Var>& v) {
            const Var pooled = g.maxpool2d(g.relu(g.conv2d(v[0], v[1], v[2], 1, 1)), 2, 2);
            const Var feat = g.relu(g.linear(g.flatten(pooled), v[3], v[4]));
            const Var logits = g.linear(feat, v[5], v[6]);
            return g.combined(g.mse_feature(feat, teacher), g.cross_entropy(logits, y), 1.0, 1.0);
        });
    });
    return out;
}

}  // namespace gradcheck
