#pragma once

// The implicit ESDF network: an off-axis positional embedding feeding a
// Softplus MLP whose third hidden layer also receives the embedding.
//
// Two evaluation paths exist:
//  * query(): forward-only, coefficient-wise products; every point's result
//    is bitwise independent of how points are batched.
//  * FieldWorkspace: GEMM-based batched evaluation of values, input
//    gradients, and exact parameter gradients of the training loss. The
//    losses depend on the input gradient, so parameter gradients are
//    obtained by differentiating the input-gradient backward pass itself.

#include "lgsdf/core.hpp"
#include "lgsdf/losses.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <vector>

namespace lgsdf {

struct EmbeddingConfig {
    std::vector<Vec3> directions = lattice_directions();
    int octaves = 6;
    double base_frequency = 0.3;  ///< radians per meter; doubles per octave
    bool include_input = true;

    /// The 13 distinct axes of a 3x3x3 lattice: 3 axis, 6 face-diagonal and 4
    /// corner-diagonal directions, normalized.
    static std::vector<Vec3> lattice_directions() {
        std::vector<Vec3> dirs = {{1, 0, 0},  {0, 1, 0},  {0, 0, 1},  {1, 1, 0},  {1, -1, 0},
                                  {1, 0, 1},  {1, 0, -1}, {0, 1, 1},  {0, 1, -1}, {1, 1, 1},
                                  {1, 1, -1}, {1, -1, 1}, {1, -1, -1}};
        for (auto& d : dirs) d.normalize();
        return dirs;
    }

    int dim() const {
        return (include_input ? 3 : 0) + 2 * static_cast<int>(directions.size()) * octaves;
    }
    double frequency(int octave) const { return base_frequency * std::ldexp(1.0, octave); }

    void validate() const {
        if (octaves < 1) throw Error("embedding.octaves must be >= 1");
        if (directions.empty()) throw Error("embedding.directions must not be empty");
        for (const auto& d : directions)
            if (std::abs(d.norm() - 1.0) > 1e-9) throw Error("embedding.directions must be unit vectors");
        if (!(base_frequency > 0)) throw Error("embedding.base_frequency must be > 0");
    }
};

/// Embedding layout: [q (if included)], then for each direction u and each
/// octave k the pair sin(f_k <q,u>), cos(f_k <q,u>).
inline Eigen::VectorXd embed(const Vec3& q, const EmbeddingConfig& cfg) {
    Eigen::VectorXd e(cfg.dim());
    int r = 0;
    if (cfg.include_input) {
        e.head<3>() = q;
        r = 3;
    }
    for (const Vec3& u : cfg.directions) {
        const double proj = q.dot(u);
        for (int k = 0; k < cfg.octaves; ++k) {
            const double phase = cfg.frequency(k) * proj;
            e[r++] = std::sin(phase);
            e[r++] = std::cos(phase);
        }
    }
    return e;
}

struct NetworkConfig {
    int hidden_layers = 6;
    int width = 256;
    int skip_layer = 3;  ///< 1-based hidden layer that also receives the embedding; 0 = none
    double output_init_scale = 0.01;  ///< multiplies the output layer's initial weight bound

    void validate() const {
        if (hidden_layers < 1) throw Error("network.hidden_layers must be >= 1");
        if (width < 1) throw Error("network.width must be >= 1");
        if (skip_layer < 0 || skip_layer > hidden_layers || skip_layer == 1)
            throw Error("network.skip_layer must be 0 or in [2, hidden_layers]");
        if (!(output_init_scale > 0)) throw Error("network.output_init_scale must be > 0");
    }
};

template <typename S>
struct DenseLayer {
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> weight;
    Eigen::Matrix<S, Eigen::Dynamic, 1> bias;
};

/// All network parameters: `layers[0..hidden_layers-1]` are the Softplus
/// layers, `layers.back()` the linear output layer.
template <typename S>
struct FieldParams {
    EmbeddingConfig embedding;
    NetworkConfig network;
    std::vector<DenseLayer<S>> layers;

    static FieldParams zeros(const EmbeddingConfig& emb, const NetworkConfig& net) {
        emb.validate();
        net.validate();
        FieldParams p;
        p.embedding = emb;
        p.network = net;
        for (int k = 1; k <= net.hidden_layers + 1; ++k) {
            const int rows = k > net.hidden_layers ? 1 : net.width;
            DenseLayer<S> layer;
            layer.weight.setZero(rows, p.input_dim(k));
            layer.bias.setZero(rows);
            p.layers.push_back(std::move(layer));
        }
        return p;
    }

    /// Input width of 1-based layer k (k = hidden_layers + 1 is the output).
    int input_dim(int k) const {
        if (k == 1) return embedding.dim();
        if (k == network.skip_layer) return network.width + embedding.dim();
        return network.width;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weight.size() + l.bias.size();
        return n;
    }

    bool all_finite() const {
        for (const auto& l : layers)
            if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
        return true;
    }

    bool same_shape(const FieldParams& o) const {
        if (layers.size() != o.layers.size()) return false;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (layers[i].weight.rows() != o.layers[i].weight.rows() ||
                layers[i].weight.cols() != o.layers[i].weight.cols() ||
                layers[i].bias.size() != o.layers[i].bias.size())
                return false;
        }
        return true;
    }

    template <typename T>
    FieldParams<T> cast() const {
        FieldParams<T> out;
        out.embedding = embedding;
        out.network = network;
        for (const auto& l : layers) out.layers.push_back({l.weight.template cast<T>(), l.bias.template cast<T>()});
        return out;
    }
};

/// Half-width of the uniform initialization range of layer `k` (1-based).
inline double init_bound(const NetworkConfig& net, int k, int fan_in, int fan_out) {
    const double xavier = std::sqrt(6.0 / (fan_in + fan_out));
    return k == net.hidden_layers + 1 ? net.output_init_scale * xavier : xavier;
}

/// Xavier-uniform weights (output layer shrunk by `output_init_scale`), zero
/// biases; draws row by row, layer by layer.
template <typename S>
FieldParams<S> init_params(const EmbeddingConfig& emb, const NetworkConfig& net, Rng& rng) {
    auto p = FieldParams<S>::zeros(emb, net);
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        auto& layer = p.layers[i];
        const double a = init_bound(net, static_cast<int>(i) + 1, static_cast<int>(layer.weight.cols()),
                                    static_cast<int>(layer.weight.rows()));
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
                layer.weight(r, c) = static_cast<S>(uniform(rng, -a, a));
    }
    return p;
}

namespace detail {

template <typename S>
S softplus_scalar(S x) {
    return std::max(x, S(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename S>
void check_finite_params(const FieldParams<S>& p) {
    if (!p.all_finite()) throw Error("field: parameters are not finite");
}

}  // namespace detail

/// Forward-only batched evaluation. Each output depends only on its own point
/// (coefficient-wise products, scalar activations), so batching never changes
/// a result bit.
template <typename S>
std::vector<S> query(const FieldParams<S>& p, const std::vector<Vec3>& points,
                     std::size_t chunk = 512) {
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    detail::check_finite_params(p);
    std::vector<S> out(points.size());
    const int e_dim = p.embedding.dim();
    const int width = p.network.width;
    const int hidden = p.network.hidden_layers;
    Mat emb, x, z;
    for (std::size_t start = 0; start < points.size(); start += chunk) {
        const auto n = static_cast<Eigen::Index>(std::min(chunk, points.size() - start));
        emb.resize(e_dim, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!points[start + i].allFinite()) throw Error("query: non-finite point");
            emb.col(i) = embed(points[start + i], p.embedding).template cast<S>();
        }
        x = emb;
        for (int k = 1; k <= hidden + 1; ++k) {
            const auto& layer = p.layers[k - 1];
            if (k == p.network.skip_layer) {
                Mat cat(width + e_dim, n);
                cat.topRows(width) = x;
                cat.bottomRows(e_dim) = emb;
                x.swap(cat);
            }
            z.noalias() = layer.weight.lazyProduct(x);
            z.colwise() += layer.bias;
            if (k <= hidden) x = z.unaryExpr([](S v) { return detail::softplus_scalar(v); });
        }
        for (Eigen::Index i = 0; i < n; ++i) out[start + i] = z(0, i);
    }
    return out;
}

template <typename S>
S forward(const FieldParams<S>& p, const Vec3& q) {
    return query(p, std::vector<Vec3>{q}).front();
}

/// Scratch buffers and the batched value/gradient machinery. Reusing one
/// workspace across iterations avoids reallocating the per-layer buffers.
template <typename S>
class FieldWorkspace {
public:
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

    /// Values and input gradients of the field at `points`.
    void evaluate(const FieldParams<S>& p, const std::vector<Vec3>& points, std::vector<double>& values,
                  std::vector<Vec3>& gradients) {
        detail::check_finite_params(p);
        forward_pass(p, points);
        backward_input(p);
        values.resize(points.size());
        gradients.resize(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) {
            values[i] = static_cast<double>(f_(0, i));
            gradients[i] = input_grad_[i];
        }
    }

    /// Mean loss over `batch` and its exact gradient with respect to every
    /// parameter, written into `grads` (reshaped to match `p`).
    LossTerms loss_and_gradients(const FieldParams<S>& p, const TrainBatch& batch,
                                 const LossConfig& cfg, FieldParams<S>& grads) {
        if (batch.empty()) throw Error("loss_gradients: empty batch");
        detail::check_finite_params(p);
        if (!grads.same_shape(p)) grads = FieldParams<S>::zeros(p.embedding, p.network);
        const auto b = static_cast<Eigen::Index>(batch.size());
        points_.resize(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) points_[i] = batch[i].position;
        forward_pass(p, points_);
        backward_input(p);

        // Per-item losses and adjoints of f and grad f under mean reduction.
        LossTerms sum;
        f_bar_.resize(1, b);
        g_bar_.resize(3, b);
        const double inv_b = 1.0 / static_cast<double>(b);
        for (Eigen::Index i = 0; i < b; ++i) {
            const ItemLoss l = item_loss(static_cast<double>(f_(0, i)), input_grad_[i], batch[i], cfg);
            if (!std::isfinite(l.terms.total) || !std::isfinite(l.d_pred) || !l.d_grad.allFinite()) {
                std::ostringstream msg;
                msg << "loss_gradients: non-finite loss at batch item " << i << " (position "
                    << batch[i].position.transpose() << ")";
                throw Error(msg.str());
            }
            sum.total += l.terms.total;
            sum.sdf += l.terms.sdf;
            sum.grad += l.terms.grad;
            sum.eik += l.terms.eik;
            f_bar_(0, i) = static_cast<S>(l.d_pred * inv_b);
            g_bar_.col(i) = (l.d_grad * inv_b).template cast<S>();
        }
        backward_params(p, grads);
        return {sum.total * inv_b, sum.sdf * inv_b, sum.grad * inv_b, sum.eik * inv_b};
    }

private:
    static void softplus_parts(const Mat& z, Mat& h, Mat& s1, Mat& s2) {
        const auto za = z.array();
        const auto e = (-za.abs()).exp().eval();
        h = (za.max(S(0)) + e.log1p()).matrix();
        const auto inv = (S(1) + e).inverse().eval();
        s1 = (za >= S(0)).select(inv, e * inv).matrix();
        s2 = (s1.array() * (S(1) - s1.array())).matrix();
    }

    void forward_pass(const FieldParams<S>& p, const std::vector<Vec3>& points) {
        const int hidden = p.network.hidden_layers;
        const int e_dim = p.embedding.dim();
        const auto b = static_cast<Eigen::Index>(points.size());
        emb_.resize(e_dim, b);
        sin_.resize(p.embedding.directions.size() * p.embedding.octaves, b);
        cos_.resize(sin_.rows(), b);
        for (Eigen::Index i = 0; i < b; ++i) {
            if (!points[i].allFinite()) throw Error("field: non-finite input point");
            const Eigen::VectorXd e = embed(points[i], p.embedding);
            emb_.col(i) = e.cast<S>();
            const int off = p.embedding.include_input ? 3 : 0;
            for (Eigen::Index j = 0; j < sin_.rows(); ++j) {
                sin_(j, i) = e[off + 2 * j];
                cos_(j, i) = e[off + 2 * j + 1];
            }
        }
        h_.resize(hidden + 1);
        s1_.resize(hidden + 1);
        s2_.resize(hidden + 1);
        for (int k = 1; k <= hidden; ++k) {
            const Mat& x = layer_input(p, k);
            z_.noalias() = p.layers[k - 1].weight * x;
            z_.colwise() += p.layers[k - 1].bias;
            softplus_parts(z_, h_[k], s1_[k], s2_[k]);
            if (k + 1 == p.network.skip_layer) {
                skip_in_.resize(p.network.width + e_dim, b);
                skip_in_.topRows(p.network.width) = h_[k];
                skip_in_.bottomRows(e_dim) = emb_;
            }
        }
        const auto& out = p.layers[hidden];
        f_.noalias() = out.weight * h_[hidden];
        f_.array() += out.bias(0);
    }

    const Mat& layer_input(const FieldParams<S>& p, int k) const {
        if (k == 1) return emb_;
        if (k == p.network.skip_layer) return skip_in_;
        return h_[k - 1];
    }

    /// Reverse pass for d f / d q; keeps dH_k and dZ_k for the parameter pass.
    void backward_input(const FieldParams<S>& p) {
        const int hidden = p.network.hidden_layers;
        const int width = p.network.width;
        const int e_dim = p.embedding.dim();
        const Eigen::Index b = f_.cols();
        dh_.resize(hidden + 1);
        dz_.resize(hidden + 1);
        dh_[hidden] = p.layers[hidden].weight.transpose().replicate(1, b);
        demb_.setZero(e_dim, b);
        for (int k = hidden; k >= 1; --k) {
            dz_[k] = (s1_[k].array() * dh_[k].array()).matrix();
            const auto& w = p.layers[k - 1].weight;
            if (k == 1) {
                demb_.noalias() += w.transpose() * dz_[k];
            } else if (k == p.network.skip_layer) {
                dh_[k - 1].noalias() = w.leftCols(width).transpose() * dz_[k];
                demb_.noalias() += w.rightCols(e_dim).transpose() * dz_[k];
            } else {
                dh_[k - 1].noalias() = w.transpose() * dz_[k];
            }
        }
        // Chain through the embedding Jacobian.
        input_grad_.resize(b);
        const int off = p.embedding.include_input ? 3 : 0;
        const int octaves = p.embedding.octaves;
        for (Eigen::Index i = 0; i < b; ++i) {
            Vec3 g = Vec3::Zero();
            if (off) g = demb_.col(i).template head<3>().template cast<double>();
            for (std::size_t d = 0; d < p.embedding.directions.size(); ++d) {
                double acc = 0.0;
                for (int k = 0; k < octaves; ++k) {
                    const Eigen::Index j = static_cast<Eigen::Index>(d) * octaves + k;
                    const double f = p.embedding.frequency(k);
                    acc += f * (static_cast<double>(cos_(j, i)) * demb_(off + 2 * j, i) -
                                static_cast<double>(sin_(j, i)) * demb_(off + 2 * j + 1, i));
                }
                g += acc * p.embedding.directions[d];
            }
            input_grad_[i] = g;
        }
    }

    /// Parameter gradients given the adjoints f_bar_ and g_bar_.
    void backward_params(const FieldParams<S>& p, FieldParams<S>& grads) {
        const int hidden = p.network.hidden_layers;
        const int width = p.network.width;
        const int e_dim = p.embedding.dim();
        const int off = p.embedding.include_input ? 3 : 0;
        const int octaves = p.embedding.octaves;
        const Eigen::Index b = f_.cols();

        // Adjoint of the embedding-space gradient: J_e * g_bar.
        emb_bar_.resize(e_dim, b);
        for (Eigen::Index i = 0; i < b; ++i) {
            const Vec3 gb = g_bar_.col(i).template cast<double>();
            if (off) emb_bar_.col(i).template head<3>() = g_bar_.col(i);
            for (std::size_t d = 0; d < p.embedding.directions.size(); ++d) {
                const double proj = p.embedding.directions[d].dot(gb);
                for (int k = 0; k < octaves; ++k) {
                    const Eigen::Index j = static_cast<Eigen::Index>(d) * octaves + k;
                    const double f = p.embedding.frequency(k);
                    emb_bar_(off + 2 * j, i) = static_cast<S>(f * cos_(j, i) * proj);
                    emb_bar_(off + 2 * j + 1, i) = static_cast<S>(-f * sin_(j, i) * proj);
                }
            }
        }

        // Upward sweep: reverse of the input-gradient pass.
        zbar_.resize(hidden + 1);
        for (int k = 1; k <= hidden; ++k) {
            const auto& w = p.layers[k - 1].weight;
            auto& gw = grads.layers[k - 1].weight;
            if (k == 1) {
                dz_bar_.noalias() = w * emb_bar_;
                gw.noalias() = dz_[k] * emb_bar_.transpose();
            } else if (k == p.network.skip_layer) {
                dz_bar_.noalias() = w.leftCols(width) * dh_bar_;
                dz_bar_.noalias() += w.rightCols(e_dim) * emb_bar_;
                gw.leftCols(width).noalias() = dz_[k] * dh_bar_.transpose();
                gw.rightCols(e_dim).noalias() = dz_[k] * emb_bar_.transpose();
            } else {
                dz_bar_.noalias() = w * dh_bar_;
                gw.noalias() = dz_[k] * dh_bar_.transpose();
            }
            dh_bar_ = (s1_[k].array() * dz_bar_.array()).matrix();
            zbar_[k] = (s2_[k].array() * dh_[k].array() * dz_bar_.array()).matrix();
        }
        auto& out_grad = grads.layers[hidden];
        const auto& w_out = p.layers[hidden].weight;
        out_grad.weight = dh_bar_.rowwise().sum().transpose();

        // Reverse of the forward pass.
        out_grad.weight.noalias() += f_bar_ * h_[hidden].transpose();
        out_grad.bias(0) = f_bar_.sum();
        hbar_.noalias() = w_out.transpose() * f_bar_;
        for (int k = hidden; k >= 1; --k) {
            zbar_[k].array() += s1_[k].array() * hbar_.array();
            auto& g = grads.layers[k - 1];
            g.weight.noalias() += zbar_[k] * layer_input(p, k).transpose();
            g.bias = zbar_[k].rowwise().sum();
            if (k > 1) {
                const auto& w = p.layers[k - 1].weight;
                if (k == p.network.skip_layer) hbar_.noalias() = w.leftCols(width).transpose() * zbar_[k];
                else hbar_.noalias() = w.transpose() * zbar_[k];
            }
        }
    }

    std::vector<Vec3> points_;
    Mat emb_, sin_, cos_, skip_in_, z_, f_;
    std::vector<Mat> h_, s1_, s2_, dh_, dz_, zbar_;
    Mat demb_;
    std::vector<Vec3> input_grad_;
    Mat f_bar_, g_bar_, emb_bar_, dz_bar_, dh_bar_, hbar_;
};

/// Exact input-space gradient at one point.
template <typename S>
Vec3 input_gradient(const FieldParams<S>& p, const Vec3& q) {
    FieldWorkspace<S> ws;
    std::vector<double> values;
    std::vector<Vec3> grads;
    ws.evaluate(p, {q}, values, grads);
    return grads.front();
}

template <typename S>
FieldParams<S> loss_gradients(const FieldParams<S>& p, const TrainBatch& batch, const LossConfig& cfg,
                              LossTerms* terms = nullptr) {
    FieldWorkspace<S> ws;
    auto grads = FieldParams<S>::zeros(p.embedding, p.network);
    const LossTerms t = ws.loss_and_gradients(p, batch, cfg, grads);
    if (terms) *terms = t;
    return grads;
}

/// Mean training loss of `batch` with its per-term breakdown.
template <typename S>
LossTerms total_loss(const FieldParams<S>& p, const TrainBatch& batch, const LossConfig& cfg) {
    if (batch.empty()) throw Error("total_loss: empty batch");
    FieldWorkspace<S> ws;
    std::vector<Vec3> pts;
    pts.reserve(batch.size());
    for (const auto& item : batch) pts.push_back(item.position);
    std::vector<double> values;
    std::vector<Vec3> grads;
    ws.evaluate(p, pts, values, grads);
    LossTerms sum;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const ItemLoss l = item_loss(values[i], grads[i], batch[i], cfg);
        sum.total += l.terms.total;
        sum.sdf += l.terms.sdf;
        sum.grad += l.terms.grad;
        sum.eik += l.terms.eik;
    }
    const double n = static_cast<double>(batch.size());
    return {sum.total / n, sum.sdf / n, sum.grad / n, sum.eik / n};
}

}  // namespace lgsdf
