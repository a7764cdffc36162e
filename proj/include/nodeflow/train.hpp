#pragma once

#include <nodeflow/approx.hpp>
#include <nodeflow/fields.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

namespace nodeflow {

/// Settings for fitting an MLP field by minibatch Adam on mean-squared error.
struct TrainConfig {
    long sample_count = 2048;
    long epoch_count = 500;
    long batch_size = 64;
    double learning_rate = 1e-2;
    std::uint64_t seed = 7;
    std::vector<long> hidden = {16};
    Activation activation = Activation::tanh;
    /// Points per axis of the reference grid. delta is measured on the
    /// interval-doubled grid with 2 * resolution - 1 points per axis.
    long resolution = 21;
    /// Full-batch L-BFGS iterations run after the stochastic phase (0 = off).
    long refine_iterations = 0;

    void validate() const
    {
        if (sample_count < 1 || epoch_count < 1 || batch_size < 1) {
            throw InvalidArgument("TrainConfig: sample_count, epoch_count and batch_size must be positive");
        }
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
            throw InvalidArgument("TrainConfig: learning_rate must be positive");
        }
        if (refine_iterations < 0) {
            throw InvalidArgument("TrainConfig: refine_iterations must be >= 0");
        }
        if (resolution < 2) {
            throw InvalidArgument("TrainConfig: resolution must be >= 2");
        }
        for (const long w : hidden) {
            if (w < 1) {
                throw InvalidArgument("TrainConfig: hidden widths must be positive");
            }
        }
    }
};

struct FitResult {
    VectorFieldSpec field;
    double delta = 0.0;
    long delta_resolution = 0;
    double final_loss = 0.0;
};

namespace detail {

struct AdamState {
    Matrix m_w, v_w;
    Vector m_b, v_b;
};

inline void activate_into(const Matrix& z, Matrix& out, Activation act)
{
    if (act == Activation::tanh) {
        out = z.array().tanh().matrix();
    } else {
        out = z.cwiseMax(0.0);
    }
}

// delta *= act'(z), with a = act(z) already computed.
inline void scale_by_slope(Matrix& delta, const Matrix& z, const Matrix& a, Activation act)
{
    if (act == Activation::tanh) {
        delta.array() *= 1.0 - a.array().square();
    } else {
        delta.array() *= (z.array() > 0.0).cast<double>();
    }
}

inline constexpr double kFinalLrFraction = 0.01;

inline long parameter_count(const MlpParams& p)
{
    long n = 0;
    for (const auto& l : p.layers) {
        n += l.weight.size() + l.bias.size();
    }
    return n;
}

inline Vector flatten(const MlpParams& p)
{
    Vector theta(parameter_count(p));
    long k = 0;
    for (const auto& l : p.layers) {
        theta.segment(k, l.weight.size()) = l.weight.reshaped();
        k += l.weight.size();
        theta.segment(k, l.bias.size()) = l.bias;
        k += l.bias.size();
    }
    return theta;
}

inline void unflatten(const Vector& theta, MlpParams& p)
{
    long k = 0;
    for (auto& l : p.layers) {
        l.weight.reshaped() = theta.segment(k, l.weight.size());
        k += l.weight.size();
        l.bias = theta.segment(k, l.bias.size());
        k += l.bias.size();
    }
}

/// Mean over samples of |net(x) - y|^2 and its gradient, flattened like flatten().
inline double full_batch_loss(const MlpParams& p, const Matrix& x, const Matrix& y, Vector& grad)
{
    const std::size_t n = p.layers.size();
    std::vector<Matrix> pre(n), post(n + 1);
    post[0] = x;
    for (std::size_t l = 0; l < n; ++l) {
        pre[l].noalias() = p.layers[l].weight * post[l];
        pre[l].colwise() += p.layers[l].bias;
        if (l + 1 < n) {
            activate_into(pre[l], post[l + 1], p.activation);
        }
    }
    const double count = static_cast<double>(x.cols());
    Matrix delta = pre[n - 1] - y;
    const double loss = delta.squaredNorm() / count;
    delta *= 2.0 / count;
    grad.resize(parameter_count(p));
    std::vector<long> offsets(n);
    long k = 0;
    for (std::size_t l = 0; l < n; ++l) {
        offsets[l] = k;
        k += p.layers[l].weight.size() + p.layers[l].bias.size();
    }
    for (std::size_t l = n; l-- > 0;) {
        const auto& w = p.layers[l].weight;
        Matrix gw = delta * post[l].transpose();
        grad.segment(offsets[l], w.size()) = gw.reshaped();
        grad.segment(offsets[l] + w.size(), w.rows()) = delta.rowwise().sum();
        if (l > 0) {
            Matrix next = w.transpose() * delta;
            scale_by_slope(next, pre[l - 1], post[l], p.activation);
            delta = std::move(next);
        }
    }
    return loss;
}

/// L-BFGS (memory 20) with Armijo backtracking on the full-batch loss.
inline double lbfgs_refine(MlpParams& p, const Matrix& x, const Matrix& y, long iterations)
{
    constexpr int memory = 20;
    Vector theta = flatten(p);
    Vector grad;
    double loss = full_batch_loss(p, x, y, grad);
    std::vector<Vector> s_hist, y_hist;
    std::vector<double> rho_hist;
    for (long it = 0; it < iterations; ++it) {
        Vector q = grad;
        const std::size_t m = s_hist.size();
        std::vector<double> alpha(m);
        for (std::size_t i = m; i-- > 0;) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alpha[i] * y_hist[i];
        }
        double gamma = 1e-3;
        if (m > 0) {
            gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        }
        q *= gamma;
        for (std::size_t i = 0; i < m; ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(q);
            q += (alpha[i] - beta) * s_hist[i];
        }
        Vector dir = -q;
        double slope = grad.dot(dir);
        if (!(slope < 0.0)) {
            dir = -grad;
            slope = -grad.squaredNorm();
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }
        if (slope == 0.0) {
            break;
        }
        double step = 1.0;
        Vector trial_grad;
        double trial_loss = 0.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            unflatten(theta + step * dir, p);
            trial_loss = full_batch_loss(p, x, y, trial_grad);
            if (std::isfinite(trial_loss) && trial_loss <= loss + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            unflatten(theta, p);
            break;
        }
        const Vector s = step * dir;
        const Vector yk = trial_grad - grad;
        theta += s;
        grad = std::move(trial_grad);
        loss = trial_loss;
        const double sy = s.dot(yk);
        if (sy > 1e-16 * s.norm() * yk.norm()) {
            if (s_hist.size() == memory) {
                s_hist.erase(s_hist.begin());
                y_hist.erase(y_hist.begin());
                rho_hist.erase(rho_hist.begin());
            }
            s_hist.push_back(s);
            y_hist.push_back(yk);
            rho_hist.push_back(1.0 / sy);
        }
    }
    unflatten(theta, p);
    return loss;
}

} // namespace detail

/// Trains an MLP field approximating `target` on the box.
///
/// Inputs are standardised to [-1, 1]^d and targets divided by their largest
/// sampled magnitude during training; both transforms are folded back into
/// the first and last layers, so the returned field acts on raw coordinates.
/// The learning rate follows a cosine decay to 1% of its initial value. An
/// optional deterministic full-batch L-BFGS phase then polishes the weights.
template <class Target>
FitResult fit_field(const Target& target, const Box& box, const TrainConfig& tc, int threads = 1)
{
    tc.validate();
    const long d = box.dim();
    std::mt19937_64 rng(tc.seed);

    const Vector center = 0.5 * (box.lower + box.upper);
    Vector half = 0.5 * (box.upper - box.lower);
    for (Eigen::Index i = 0; i < half.size(); ++i) {
        if (half[i] == 0.0) {
            half[i] = 1.0;
        }
    }

    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Matrix inputs(d, tc.sample_count);
    Matrix outputs(d, tc.sample_count);
    for (long s = 0; s < tc.sample_count; ++s) {
        Vector u(d);
        for (long i = 0; i < d; ++i) {
            u[i] = box.lower[i] == box.upper[i] ? 0.0 : unit(rng);
        }
        inputs.col(s) = u;
        const Vector y = target(Vector(center + half.cwiseProduct(u)));
        check_dim(d, y.size());
        outputs.col(s) = y;
    }
    double out_scale = outputs.cwiseAbs().maxCoeff();
    if (!(out_scale > 0.0) || !std::isfinite(out_scale)) {
        out_scale = 1.0;
    }
    outputs /= out_scale;

    std::vector<long> widths;
    widths.push_back(d);
    widths.insert(widths.end(), tc.hidden.begin(), tc.hidden.end());
    widths.push_back(d);
    const std::size_t n_layers = widths.size() - 1;

    MlpParams params;
    params.activation = tc.activation;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const long fan_in = widths[l];
        const long fan_out = widths[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> init(-limit, limit);
        MlpLayer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
        for (long c = 0; c < fan_in; ++c) {
            for (long r = 0; r < fan_out; ++r) {
                layer.weight(r, c) = init(rng);
            }
        }
        params.layers.push_back(std::move(layer));
    }

    std::vector<detail::AdamState> adam(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        const auto& w = params.layers[l].weight;
        adam[l] = {Matrix::Zero(w.rows(), w.cols()), Matrix::Zero(w.rows(), w.cols()), Vector::Zero(w.rows()),
                   Vector::Zero(w.rows())};
    }
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;
    constexpr double pi = 3.14159265358979323846;

    std::vector<long> order(static_cast<std::size_t>(tc.sample_count));
    std::iota(order.begin(), order.end(), 0L);
    std::vector<Matrix> pre(n_layers), post(n_layers + 1), delta(n_layers), grad_w(n_layers);
    std::vector<Vector> grad_b(n_layers);
    Matrix target_batch;
    long step = 0;
    double epoch_loss = 0.0;

    for (long epoch = 0; epoch < tc.epoch_count; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        const double progress = static_cast<double>(epoch) / static_cast<double>(tc.epoch_count);
        const double lr = tc.learning_rate * (detail::kFinalLrFraction + (1.0 - detail::kFinalLrFraction) * 0.5 *
                                                                     (1.0 + std::cos(pi * progress)));
        epoch_loss = 0.0;
        for (long start = 0; start < tc.sample_count; start += tc.batch_size) {
            const long b = std::min(tc.batch_size, tc.sample_count - start);
            post[0].resize(d, b);
            target_batch.resize(d, b);
            for (long j = 0; j < b; ++j) {
                const long k = order[static_cast<std::size_t>(start + j)];
                post[0].col(j) = inputs.col(k);
                target_batch.col(j) = outputs.col(k);
            }
            for (std::size_t l = 0; l < n_layers; ++l) {
                pre[l].noalias() = params.layers[l].weight * post[l];
                pre[l].colwise() += params.layers[l].bias;
                if (l + 1 < n_layers) {
                    detail::activate_into(pre[l], post[l + 1], tc.activation);
                }
            }
            delta[n_layers - 1] = pre[n_layers - 1] - target_batch;
            const double loss = delta[n_layers - 1].squaredNorm() / static_cast<double>(b);
            if (!std::isfinite(loss)) {
                throw NonFiniteLoss("fit_field: loss diverged at epoch " + std::to_string(epoch) +
                                    " (learning rate too high?)");
            }
            epoch_loss += loss * static_cast<double>(b);
            delta[n_layers - 1] *= 2.0 / static_cast<double>(b);

            for (std::size_t l = n_layers; l-- > 0;) {
                grad_w[l].noalias() = delta[l] * post[l].transpose();
                grad_b[l] = delta[l].rowwise().sum();
                if (l > 0) {
                    delta[l - 1].noalias() = params.layers[l].weight.transpose() * delta[l];
                    detail::scale_by_slope(delta[l - 1], pre[l - 1], post[l], tc.activation);
                }
            }
            ++step;
            const double corr1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double corr2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (std::size_t l = 0; l < n_layers; ++l) {
                auto& st = adam[l];
                st.m_w = beta1 * st.m_w + (1.0 - beta1) * grad_w[l];
                st.v_w = beta2 * st.v_w + (1.0 - beta2) * grad_w[l].cwiseProduct(grad_w[l]);
                st.m_b = beta1 * st.m_b + (1.0 - beta1) * grad_b[l];
                st.v_b = beta2 * st.v_b + (1.0 - beta2) * grad_b[l].cwiseProduct(grad_b[l]);
                params.layers[l].weight.array() -=
                    lr * (st.m_w.array() / corr1) / ((st.v_w.array() / corr2).sqrt() + eps);
                params.layers[l].bias.array() -=
                    lr * (st.m_b.array() / corr1) / ((st.v_b.array() / corr2).sqrt() + eps);
            }
        }
        epoch_loss /= static_cast<double>(tc.sample_count);
    }

    if (tc.refine_iterations > 0) {
        epoch_loss = detail::lbfgs_refine(params, inputs, outputs, tc.refine_iterations);
        if (!std::isfinite(epoch_loss)) {
            throw NonFiniteLoss("fit_field: refinement produced a non-finite loss");
        }
    }

    // Fold input standardisation and output scaling into the outer layers.
    auto& first = params.layers.front();
    const Matrix w_raw = first.weight * half.cwiseInverse().asDiagonal();
    first.bias -= w_raw * center;
    first.weight = w_raw;
    auto& last = params.layers.back();
    last.weight *= out_scale;
    last.bias *= out_scale;

    FitResult result{VectorFieldSpec::mlp(std::move(params)), 0.0, 2 * tc.resolution - 1, epoch_loss};
    result.delta = sup_distance(result.field, target, box, result.delta_resolution, threads);
    return result;
}

} // namespace nodeflow
