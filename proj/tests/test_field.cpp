#include "lgsdf/checkpoint.hpp"
#include "lgsdf/field.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace lgsdf;

namespace {

NetworkConfig small_net() {
    NetworkConfig net;
    net.hidden_layers = 2;
    net.width = 8;
    net.skip_layer = 2;
    return net;
}

FieldParams<double> random_params(const NetworkConfig& net, std::uint64_t seed, double bias_scale = 0.3) {
    Rng rng(seed);
    auto p = init_params<double>(EmbeddingConfig{}, net, rng);
    for (auto& l : p.layers)
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = uniform(rng, -bias_scale, bias_scale);
    return p;
}

TrainBatch random_batch(std::size_t n, std::uint64_t seed, const LossConfig& cfg) {
    Rng rng(seed);
    TrainBatch batch;
    for (std::size_t i = 0; i < n; ++i) {
        TrainItem item;
        item.position = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
        item.distance = i % 2 == 0 ? uniform(rng, -0.08, 0.08) : uniform(rng, 0.2, 1.0);
        item.gradient = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)).normalized();
        item.near_surface = std::abs(item.distance) < cfg.truncation;
        batch.push_back(item);
    }
    return batch;
}

double relative_error(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale < 1e-9 ? std::abs(a - b) / 1e-9 : std::abs(a - b) / scale;
}

}  // namespace

TEST(Embedding, ZeroInput) {
    EmbeddingConfig cfg;
    const Eigen::VectorXd e = embed(Vec3::Zero(), cfg);
    ASSERT_EQ(e.size(), 3 + 2 * 13 * 6);
    EXPECT_EQ(e.head<3>().norm(), 0.0);
    for (int j = 3; j < e.size(); j += 2) {
        EXPECT_EQ(e[j], 0.0);
        EXPECT_EQ(e[j + 1], 1.0);
    }
}

TEST(Embedding, LengthWithoutRawInput) {
    EmbeddingConfig cfg;
    cfg.include_input = false;
    cfg.octaves = 4;
    EXPECT_EQ(embed(Vec3(0.1, 0.2, 0.3), cfg).size(), 2 * 13 * 4);
}

TEST(Embedding, PeriodicAlongEachDirection) {
    EmbeddingConfig cfg;
    const Vec3 q(0.31, -0.72, 0.15);
    const double period = 2 * kPi / cfg.frequency(0);
    for (std::size_t d = 0; d < cfg.directions.size(); ++d) {
        const Eigen::VectorXd a = embed(q, cfg);
        const Eigen::VectorXd b = embed(q + period * cfg.directions[d], cfg);
        // Components of direction d: sin/cos pairs for every octave are periodic
        // in 2*pi/f_1 since higher octaves are integer multiples.
        for (int k = 0; k < cfg.octaves; ++k) {
            const int r = 3 + 2 * (static_cast<int>(d) * cfg.octaves + k);
            EXPECT_NEAR(a[r], b[r], 1e-9);
            EXPECT_NEAR(a[r + 1], b[r + 1], 1e-9);
        }
    }
}

TEST(Field, ZeroNetworkIsZero) {
    const auto p = FieldParams<double>::zeros(EmbeddingConfig{}, NetworkConfig{});
    EXPECT_EQ(forward(p, Vec3(0.3, -2.0, 1.0)), 0.0);
    EXPECT_EQ(input_gradient(p, Vec3(0.3, -2.0, 1.0)).norm(), 0.0);
}

TEST(Field, OutputBiasOnlyIsConstant) {
    auto p = FieldParams<double>::zeros(EmbeddingConfig{}, small_net());
    p.layers.back().bias[0] = 0.75;
    for (const Vec3& q : {Vec3(0, 0, 0), Vec3(1, -3, 2), Vec3(-0.4, 0.2, 9)}) EXPECT_EQ(forward(p, q), 0.75);
}

TEST(Field, BatchedQueryMatchesPerPointBitwise) {
    Rng rng(3);
    const auto p = init_params<float>(EmbeddingConfig{}, NetworkConfig{}, rng);
    std::vector<Vec3> pts;
    for (int i = 0; i < 37; ++i) pts.emplace_back(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2));
    const auto batched = query(p, pts, 16);
    for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(batched[i], forward(p, pts[i])) << i;
}

TEST(Field, WorkspaceValuesMatchQuery) {
    const auto p = random_params(NetworkConfig{}, 11);
    std::vector<Vec3> pts = {Vec3(0.1, 0.2, 0.3), Vec3(-1.0, 0.5, 0.0), Vec3(0.7, -0.7, 1.1)};
    FieldWorkspace<double> ws;
    std::vector<double> values;
    std::vector<Vec3> grads;
    ws.evaluate(p, pts, values, grads);
    const auto ref = query(p, pts);
    for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_NEAR(values[i], ref[i], 1e-12);
}

TEST(Field, InitBounds) {
    NetworkConfig net;
    EXPECT_DOUBLE_EQ(init_bound(net, 2, 256, 256), std::sqrt(6.0 / 512));
    EXPECT_DOUBLE_EQ(init_bound(net, 7, 256, 1), 0.01 * std::sqrt(6.0 / 257));
    net.output_init_scale = 1.0;
    EXPECT_DOUBLE_EQ(init_bound(net, 7, 256, 1), std::sqrt(6.0 / 257));
}

TEST(Field, InitIsDeterministicAndScaled) {
    Rng a(42), b(42);
    const auto pa = init_params<float>(EmbeddingConfig{}, NetworkConfig{}, a);
    const auto pb = init_params<float>(EmbeddingConfig{}, NetworkConfig{}, b);
    EXPECT_EQ(encode_checkpoint(pa), encode_checkpoint(pb));
    const NetworkConfig net;
    for (std::size_t k = 0; k < pa.layers.size(); ++k) {
        const auto& l = pa.layers[k];
        const double a = init_bound(net, static_cast<int>(k) + 1, static_cast<int>(l.weight.cols()),
                                    static_cast<int>(l.weight.rows()));
        const double target = a * a / 3.0;
        const double mean = l.weight.template cast<double>().mean();
        const double var = (l.weight.template cast<double>().array() - mean).square().mean();
        EXPECT_NEAR(var / target, 1.0, 0.2);
        EXPECT_EQ(l.bias.norm(), 0.0f);
    }
    const float f0 = forward(pa, Vec3::Zero());
    EXPECT_TRUE(std::isfinite(f0));
    EXPECT_LT(std::abs(f0), 10.0f);
}

TEST(Field, InputGradientMatchesCentralDifferences) {
    Rng init(5);
    const auto p = init_params<double>(EmbeddingConfig{}, NetworkConfig{}, init);
    Rng rng(9);
    const double h = 1e-4;
    for (int trial = 0; trial < 5; ++trial) {
        const Vec3 q(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
        const Vec3 g = input_gradient(p, q);
        for (int a = 0; a < 3; ++a) {
            const Vec3 e = Vec3::Unit(a) * h;
            const double fd = (forward(p, Vec3(q + e)) - forward(p, Vec3(q - e))) / (2 * h);
            EXPECT_LT(relative_error(g[a], fd), 1e-5) << "trial " << trial << " axis " << a;
        }
    }
}

TEST(Field, InputGradientMatchesExtrapolatedDifferencesAtDefaultEmbedding) {
    const auto p = random_params(NetworkConfig{}, 5);
    Rng rng(9);
    const double h = 1e-4;
    for (int trial = 0; trial < 5; ++trial) {
        const Vec3 q(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
        const Vec3 g = input_gradient(p, q);
        for (int a = 0; a < 3; ++a) {
            auto central = [&](double step) {
                const Vec3 e = Vec3::Unit(a) * step;
                return (forward(p, Vec3(q + e)) - forward(p, Vec3(q - e))) / (2 * step);
            };
            const double fd = (4 * central(h / 2) - central(h)) / 3;  // Richardson, O(h^4)
            EXPECT_NEAR(g[a], fd, 1e-7 * std::max(1.0, std::abs(fd))) << "trial " << trial << " axis " << a;
        }
    }
}

TEST(Field, LossGradientsMatchCentralDifferences) {
    LossConfig cfg;
    const auto net = small_net();
    const auto p = random_params(net, 17);
    const auto batch = random_batch(4, 23, cfg);
    const auto grads = loss_gradients(p, batch, cfg);
    const double h = 1e-5;
    double worst = 0;
    for (std::size_t li = 0; li < p.layers.size(); ++li) {
        for (int part = 0; part < 2; ++part) {
            const Eigen::Index n = part == 0 ? p.layers[li].weight.size() : p.layers[li].bias.size();
            for (Eigen::Index j = 0; j < n; ++j) {
                auto plus = p, minus = p;
                double* vp = part == 0 ? plus.layers[li].weight.data() : plus.layers[li].bias.data();
                double* vm = part == 0 ? minus.layers[li].weight.data() : minus.layers[li].bias.data();
                vp[j] += h;
                vm[j] -= h;
                const double fd = (total_loss(plus, batch, cfg).total - total_loss(minus, batch, cfg).total) / (2 * h);
                const double an = part == 0 ? grads.layers[li].weight.data()[j] : grads.layers[li].bias.data()[j];
                const double err = relative_error(an, fd);
                worst = std::max(worst, err);
                EXPECT_LT(err, 1e-4) << "layer " << li << " part " << part << " index " << j << " analytic "
                                     << an << " fd " << fd;
            }
        }
    }
    RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(Field, FlatLossGivesZeroGradient) {
    // Zero network on free-space items with D > 0: the prediction sits inside
    // the bounds, and the gradient terms are switched off.
    LossConfig cfg;
    cfg.lambda_grad = 0.0;
    auto p = FieldParams<double>::zeros(EmbeddingConfig{}, small_net());
    TrainBatch batch(3);
    for (int i = 0; i < 3; ++i) {
        batch[i].position = Vec3(0.1 * i, 0.2, -0.3);
        batch[i].distance = 0.5;
        batch[i].near_surface = false;
    }
    cfg.lambda_eik = 0.0;
    const auto g = loss_gradients(p, batch, cfg);
    for (const auto& l : g.layers) {
        EXPECT_EQ(l.weight.norm(), 0.0);
        EXPECT_EQ(l.bias.norm(), 0.0);
    }
}

TEST(Field, GradientsAreMeanAdditiveOverBatches) {
    LossConfig cfg;
    const auto p = random_params(small_net(), 31);
    const auto a = random_batch(3, 1, cfg);
    const auto b = random_batch(5, 2, cfg);
    TrainBatch ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    const auto ga = loss_gradients(p, a, cfg);
    const auto gb = loss_gradients(p, b, cfg);
    const auto gab = loss_gradients(p, ab, cfg);
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        const Eigen::MatrixXd w = ga.layers[i].weight * (3.0 / 8) + gb.layers[i].weight * (5.0 / 8);
        EXPECT_LT((w - gab.layers[i].weight).cwiseAbs().maxCoeff(), 1e-12);
        const Eigen::VectorXd bb = ga.layers[i].bias * (3.0 / 8) + gb.layers[i].bias * (5.0 / 8);
        EXPECT_LT((bb - gab.layers[i].bias).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Checkpoint, RoundTripAndShapeRejection) {
    Rng rng(8);
    const auto p = init_params<float>(EmbeddingConfig{}, small_net(), rng);
    const std::string bytes = encode_checkpoint(p);
    const auto back = decode_checkpoint<float>(bytes, &p);
    EXPECT_EQ(encode_checkpoint(back), bytes);

    const auto other = FieldParams<float>::zeros(EmbeddingConfig{}, NetworkConfig{});
    EXPECT_THROW(decode_checkpoint<float>(bytes, &other), Error);
    EXPECT_THROW(decode_checkpoint<float>(bytes.substr(0, bytes.size() - 3)), Error);
    EXPECT_THROW(load_checkpoint<float>("/nonexistent/ckpt.bin"), Error);
}
