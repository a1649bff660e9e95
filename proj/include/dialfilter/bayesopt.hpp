#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "dialfilter/common.hpp"

namespace dialfilter {

struct Observation {
    std::vector<double> x;
    double y = 0.0;
    int iteration = 0;
};

struct Interval {
    double lo = -1.0;
    double hi = 1.0;
};

// Fixed GP hyperparameters; no marginal-likelihood fitting.
struct GpConfig {
    double signal_variance = 1.0;           // sigma_f^2
    double length_scale = 0.5;              // l
    double noise_variance = 1e-4;           // sigma^2
    std::vector<Interval> domain = std::vector<Interval>(7);
    int candidates = 1000;                  // m
    int initial_design = 5;

    std::size_t dim() const { return domain.size(); }

    void validate() const {
        if (signal_variance <= 0 || length_scale <= 0 || noise_variance <= 0)
            throw std::runtime_error("GpConfig: variances and length scale must be positive");
        if (domain.empty()) throw std::runtime_error("GpConfig: empty domain");
        for (const auto& iv : domain)
            if (!(iv.lo < iv.hi)) throw std::runtime_error("GpConfig: domain lower must be < upper");
        if (candidates < 1 || initial_design < 1)
            throw std::runtime_error("GpConfig: candidates and initial_design must be >= 1");
    }
};

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double t = a[i] - b[i];
        d += t * t;
    }
    return d;
}

inline double kernel(const std::vector<double>& a, const std::vector<double>& b,
                     const GpConfig& cfg) {
    return cfg.signal_variance *
           std::exp(-sq_dist(a, b) / (2.0 * cfg.length_scale * cfg.length_scale));
}

// In-place lower Cholesky of a dense n x n matrix; returns false on a
// non-positive pivot.
inline bool cholesky(std::vector<double>& m, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = m[i * n + j];
            for (std::size_t k = 0; k < j; ++k) sum -= m[i * n + k] * m[j * n + k];
            if (i == j) {
                if (sum <= 0.0) return false;
                m[i * n + i] = std::sqrt(sum);
            } else {
                m[i * n + j] = sum / m[j * n + j];
            }
        }
        for (std::size_t j = i + 1; j < n; ++j) m[i * n + j] = 0.0;
    }
    return true;
}

inline void forward_solve(const std::vector<double>& L, std::size_t n, std::vector<double>& b) {
    for (std::size_t i = 0; i < n; ++i) {
        double sum = b[i];
        for (std::size_t k = 0; k < i; ++k) sum -= L[i * n + k] * b[k];
        b[i] = sum / L[i * n + i];
    }
}

inline void backward_solve(const std::vector<double>& L, std::size_t n, std::vector<double>& b) {
    for (std::size_t i = n; i-- > 0;) {
        double sum = b[i];
        for (std::size_t k = i + 1; k < n; ++k) sum -= L[k * n + i] * b[k];
        b[i] = sum / L[i * n + i];
    }
}

inline double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) * 0.39894228040143267794;  // 1/sqrt(2*pi)
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.70710678118654752440); }

}  // namespace detail

// GP with squared-exponential kernel, conditioned on all observations via a
// cached Cholesky factorization of K + sigma^2 I.
struct GpModel {
    GpConfig config;
    std::vector<Observation> observations;
    std::vector<double> chol;   // lower factor, n x n
    std::vector<double> alpha;  // (K + sigma^2 I)^-1 y
    std::size_t best_index = 0;

    double best_y() const { return observations[best_index].y; }
    const std::vector<double>& best_x() const { return observations[best_index].x; }
};

inline GpModel gp_fit(const std::vector<Observation>& observations, const GpConfig& config) {
    config.validate();
    if (observations.empty()) throw std::runtime_error("gp_fit: need at least one observation");
    for (const auto& o : observations)
        if (o.x.size() != config.dim())
            throw std::runtime_error("gp_fit: observation dimension mismatch");

    std::size_t n = observations.size();
    std::vector<double> base(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double k = detail::kernel(observations[i].x, observations[j].x, config);
            base[i * n + j] = k;
            base[j * n + i] = k;
        }

    GpModel model;
    model.config = config;
    model.observations = observations;

    // escalate the diagonal jitter a decade at a time
    bool ok = false;
    for (double jitter : {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6}) {
        model.chol = base;
        for (std::size_t i = 0; i < n; ++i) model.chol[i * n + i] += config.noise_variance + jitter;
        if (detail::cholesky(model.chol, n)) {
            ok = true;
            break;
        }
    }
    if (!ok) throw std::runtime_error("gp_fit: kernel matrix not positive definite after jitter");

    model.alpha.resize(n);
    for (std::size_t i = 0; i < n; ++i) model.alpha[i] = observations[i].y;
    detail::forward_solve(model.chol, n, model.alpha);
    detail::backward_solve(model.chol, n, model.alpha);

    for (std::size_t i = 1; i < n; ++i)
        if (observations[i].y < observations[model.best_index].y) model.best_index = i;
    return model;
}

struct Posterior {
    double mean = 0.0;
    double variance = 0.0;
};

inline Posterior gp_posterior(const GpModel& model, const std::vector<double>& x) {
    std::size_t n = model.observations.size();
    std::vector<double> kstar(n);
    for (std::size_t i = 0; i < n; ++i)
        kstar[i] = detail::kernel(x, model.observations[i].x, model.config);

    Posterior post;
    for (std::size_t i = 0; i < n; ++i) post.mean += kstar[i] * model.alpha[i];

    // v = L^-1 k*;  var = k(x,x) - v.v
    detail::forward_solve(model.chol, n, kstar);
    double quad = 0.0;
    for (double v : kstar) quad += v * v;
    post.variance = std::max(0.0, detail::kernel(x, x, model.config) - quad);
    return post;
}

// EI for minimization. With sigma ~ 0 this degenerates to the deterministic
// improvement max(y_best - mu, 0).
inline double expected_improvement(const GpModel& model, const std::vector<double>& x,
                                   double y_best) {
    Posterior post = gp_posterior(model, x);
    double sigma = std::sqrt(post.variance);
    double delta = y_best - post.mean;
    if (sigma < 1e-12) return std::max(delta, 0.0);
    double z = delta / sigma;
    return delta * detail::normal_cdf(z) + sigma * detail::normal_pdf(z);
}

// Monte Carlo acquisition: the first half of the m candidates is uniform over
// the box, the rest are Gaussian perturbations of the incumbent at cycling
// scales so late iterations can refine below the uniform-sampling resolution.
// Ties go to the first candidate drawn.
inline std::vector<double> propose(const GpModel& model, const GpConfig& config, Rng& rng) {
    config.validate();
    std::size_t dim = config.dim();
    std::size_t m = static_cast<std::size_t>(config.candidates);
    std::size_t n_uniform = (m + 1) / 2;
    static constexpr double kLocalScales[3] = {0.2, 0.05, 0.0125};

    const std::vector<double>& incumbent = model.best_x();
    double y_best = model.best_y();

    std::vector<double> best_cand;
    double best_ei = -1.0;
    std::vector<double> cand(dim);
    for (std::size_t c = 0; c < m; ++c) {
        if (c < n_uniform) {
            for (std::size_t d = 0; d < dim; ++d)
                cand[d] = rng.uniform(config.domain[d].lo, config.domain[d].hi);
        } else {
            double scale = kLocalScales[(c - n_uniform) % 3];
            for (std::size_t d = 0; d < dim; ++d) {
                double range = config.domain[d].hi - config.domain[d].lo;
                double v = incumbent[d] + scale * range * rng.normal();
                cand[d] = std::clamp(v, config.domain[d].lo, config.domain[d].hi);
            }
        }
        double ei = expected_improvement(model, cand, y_best);
        if (ei > best_ei) {
            best_ei = ei;
            best_cand = cand;
        }
    }
    return best_cand;
}

struct TraceRow {
    int t = 0;
    std::vector<double> x;
    double y = 0.0;
    double best = 0.0;
};

struct OptimizeTrace {
    std::vector<TraceRow> rows;
    std::vector<double> best_x;
    double best_y = std::numeric_limits<double>::infinity();
};

using Blackbox = std::function<double(const std::vector<double>&)>;
using TraceSink = std::function<void(const TraceRow&)>;

// The iterate loop: evaluate a seeded uniform initial design, then k rounds
// of fit / propose / evaluate. The surrogate is fit on mean-centered values
// (a constant-mean GP): with raw objectives the zero-mean prior makes every
// unexplored point look better than the incumbent and EI never exploits.
// Rows stream to on_row as they are produced so a partial trace survives a
// blackbox failure.
inline OptimizeTrace optimize(const Blackbox& blackbox, const GpConfig& config, int iterations,
                              std::uint64_t seed, const TraceSink& on_row = {}) {
    config.validate();
    if (iterations < 1) throw std::runtime_error("optimize: iterations must be >= 1");

    Rng rng(seed);
    std::vector<Observation> observations;
    OptimizeTrace trace;
    int t = 0;

    auto evaluate = [&](const std::vector<double>& x) {
        double y = blackbox(x);
        observations.push_back({x, y, t});
        if (y < trace.best_y) {
            trace.best_y = y;
            trace.best_x = x;
        }
        TraceRow row{t, x, y, trace.best_y};
        trace.rows.push_back(row);
        if (on_row) on_row(row);
        ++t;
    };

    for (int i = 0; i < config.initial_design; ++i) {
        std::vector<double> x(config.dim());
        for (std::size_t d = 0; d < config.dim(); ++d)
            x[d] = rng.uniform(config.domain[d].lo, config.domain[d].hi);
        evaluate(x);
    }
    for (int i = 0; i < iterations; ++i) {
        double mean_y = 0.0;
        for (const auto& o : observations) mean_y += o.y;
        mean_y /= static_cast<double>(observations.size());
        std::vector<Observation> centered = observations;
        for (auto& o : centered) o.y -= mean_y;

        GpModel model = gp_fit(centered, config);
        evaluate(propose(model, config, rng));
    }
    return trace;
}

// CSV with header t,w1..wD,J,bestJ
inline void write_trace_csv(const OptimizeTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace: " + path);
    std::size_t dim = trace.rows.empty() ? 0 : trace.rows.front().x.size();
    out << "t";
    for (std::size_t d = 1; d <= dim; ++d) out << ",w" << d;
    out << ",J,bestJ\n";
    for (const auto& row : trace.rows) {
        out << row.t;
        for (double v : row.x) out << ',' << fmt_g17(v);
        out << ',' << fmt_g17(row.y) << ',' << fmt_g17(row.best) << '\n';
    }
}

}  // namespace dialfilter
