#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hgdomain/dataio.hpp"
#include "hgdomain/errors.hpp"
#include "hgdomain/neuralnet.hpp"
#include "test_util.hpp"

#include <cmath>
#include <random>

using namespace hgdomain;

namespace {

double sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

SpatialCoords random_coords(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 10);
    SpatialCoords c;
    c.positions.resize(n, 2);
    for (int i = 0; i < n; ++i) {
        c.positions.row(i) << u(rng), u(rng);
        c.spot_ids.push_back(std::to_string(i));
    }
    return c;
}

Eigen::MatrixXd uniform_matrix(int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 2);
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            m(i, j) = u(rng);
        }
    }
    return m;
}

struct Fixture {
    Hypergraph hg;
    DegreeNormalization norm;
    Objective objective;
    ModelParams params;
};

Fixture small_fixture(std::uint64_t seed, int n = 30, int m = 20, int r = 8, int hidden = 16) {
    Fixture f;
    f.hg = build_knn_hypergraph(random_coords(n, seed), 4);
    f.norm = degree_normalization(incidence_matrix(f.hg), f.hg.edge_weights);
    Architecture arch;
    arch.n_genes = m;
    arch.encoder_hidden = {hidden};
    arch.decoder_hidden = {hidden};
    arch.hgcn_hidden = {hidden};
    arch.latent_dim = r;
    arch.spatial_dim = r;
    f.params = init_params(arch, seed);
    f.objective.X = uniform_matrix(n, m, seed + 1);
    f.objective.propagation = f.norm.propagation;
    f.objective.adjacency = adjacency_from_incidence(incidence_matrix(f.hg));
    f.objective.noise = gaussian_noise(n, r, 0.1, seed + 2);
    f.objective.pos_weight = default_pos_weight(f.objective.adjacency);
    return f;
}

DenseLayer dense_layer(Eigen::MatrixXd w, Eigen::RowVectorXd b, Activation a = Activation::identity) {
    DenseLayer l;
    l.weight = std::move(w);
    l.bias = std::move(b);
    l.activation = a;
    return l;
}

}

TEST_CASE("add_noise with zero sd returns the input") {
    Eigen::MatrixXd l = uniform_matrix(4, 3, 1);
    CHECK(add_noise(l, 0.0, 5) == l);
    CHECK(add_noise(l, 0.3, 5) == add_noise(l, 0.3, 5));
    CHECK(add_noise(l, 0.3, 5) != add_noise(l, 0.3, 6));
    CHECK_THROWS_AS(add_noise(l, -1.0, 5), std::invalid_argument);
}

TEST_CASE("unit gaussian noise has mean 0 and sd 1 over many entries") {
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(100, 100);
    Eigen::MatrixXd d = add_noise(l, 1.0, 42) - l;
    double mean = d.mean();
    double sd = std::sqrt((d.array() - mean).square().sum() / (d.size() - 1));
    CHECK(std::abs(mean) <= 0.05);
    CHECK(std::abs(sd - 1) <= 0.05);
}

TEST_CASE("init_params follows the Glorot range with zero biases") {
    Architecture arch;
    arch.n_genes = 20;
    auto p = init_params(arch, 3);
    p.validate();
    CHECK(p.input_dim() == 20);
    CHECK(p.latent_dim() == 32);
    CHECK(p.spatial_dim() == 32);
    CHECK(p.decoder.front().weight.rows() == 64);
    CHECK(p.decoder.back().weight.cols() == 20);
    for (const auto& l : p.encoder) {
        double bound = std::sqrt(6.0 / static_cast<double>(l.weight.rows() + l.weight.cols()));
        CHECK(l.weight.cwiseAbs().maxCoeff() <= bound);
        CHECK(l.bias.isZero());
    }
    CHECK(p.encoder.front().activation == Activation::leaky_relu);
    CHECK(p.encoder.back().activation == Activation::identity);
    CHECK(init_params(arch, 3).encoder[0].weight == p.encoder[0].weight);
}

TEST_CASE("zero weights and biases decode to zero") {
    Architecture arch;
    arch.n_genes = 5;
    arch.latent_dim = 3;
    arch.spatial_dim = 2;
    auto p = init_params(arch, 1).zeros_like();
    auto out = dae_forward(uniform_matrix(4, 5, 2), p, Eigen::MatrixXd::Ones(4, 2), 0.1, 9);
    CHECK(out.reconstruction.isZero());
    CHECK(out.reconstruction.rows() == 4);
    CHECK(out.reconstruction.cols() == 5);
}

TEST_CASE("duplicated rows give identical outputs without noise") {
    Architecture arch;
    arch.n_genes = 6;
    arch.latent_dim = 4;
    arch.spatial_dim = 3;
    auto p = init_params(arch, 8);
    Eigen::MatrixXd x(2, 6);
    x.row(0) = uniform_matrix(1, 6, 4);
    x.row(1) = x.row(0);
    Eigen::MatrixXd spatial(2, 3);
    spatial.row(0) << 1, -2, 0.5;
    spatial.row(1) = spatial.row(0);
    auto out = dae_forward(x, p, spatial, 0.0, 0);
    CHECK(out.reconstruction.row(0) == out.reconstruction.row(1));
    CHECK(out.latent.row(0) == out.latent.row(1));
}

TEST_CASE("single linear layers match hand-computed products") {
    ModelParams p;
    Eigen::Matrix2d we;
    we << 1, 2, 3, 4;
    p.encoder.push_back(dense_layer(we, Eigen::RowVector2d(0.5, -1)));
    Eigen::MatrixXd wd(3, 2);
    wd << 1, 0, 0, 1, 2, -1;
    p.decoder.push_back(dense_layer(wd, Eigen::RowVector2d(0, 1)));
    HgcnLayer h;
    h.weight = Eigen::MatrixXd::Ones(2, 1);
    p.hgcn.push_back(h);

    Eigen::MatrixXd x(1, 2);
    x << 1, 1;
    Eigen::MatrixXd spatial(1, 1);
    spatial << 3;
    auto out = dae_forward(x, p, spatial, 0.0, 0);
    // latent = [1*1 + 1*3 + 0.5, 1*2 + 1*4 - 1] = [4.5, 5]
    CHECK(out.latent(0, 0) == 4.5);
    CHECK(out.latent(0, 1) == 5);
    // [4.5, 5, 3] * wd + [0, 1] = [4.5 + 6, 5 - 3 + 1]
    CHECK(out.reconstruction(0, 0) == 10.5);
    CHECK(out.reconstruction(0, 1) == 3);

    CHECK_THROWS_AS(dae_forward(x, p, Eigen::MatrixXd::Zero(2, 1), 0.0, 0), std::invalid_argument);
}

TEST_CASE("leaky rectifier in hidden layers") {
    std::vector<DenseLayer> layers{dense_layer(Eigen::MatrixXd::Identity(2, 2), Eigen::RowVector2d(0, 0), Activation::leaky_relu)};
    Eigen::MatrixXd x(1, 2);
    x << -2, 3;
    auto y = dense_forward(x, layers, 0.01);
    CHECK(y(0, 0) == -0.02);
    CHECK(y(0, 1) == 3);
}

TEST_CASE("mse_loss hand cases") {
    Eigen::MatrixXd a(2, 2);
    a << 1, 2, 3, 4;
    CHECK(mse_loss(a, a) == 0);
    CHECK(mse_loss(Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Constant(1, 1, 3)) == 9);
    CHECK(mse_loss(a, Eigen::MatrixXd::Zero(2, 2)) == 7.5);
    CHECK(mse_loss(a, a.array() + 1e-9) > 0);
    CHECK_THROWS_AS(mse_loss(a, Eigen::MatrixXd::Zero(1, 2)), std::invalid_argument);
}

TEST_CASE("node to edge aggregation takes member means") {
    Hypergraph hg;
    hg.n_vertices = 3;
    hg.hyperedges = {{0, 1, 2}, {1}, {0, 2}};
    hg.edge_weights = {1, 1, 1};
    Eigen::MatrixXd x(3, 2);
    x << 1, 0, 0, 1, 2, 2;
    auto h = node_to_edge_aggregate(x, hg);
    CHECK(h.row(0) == Eigen::RowVector2d(1, 1));
    CHECK(h.row(1) == x.row(1));
    CHECK(h.row(2) == Eigen::RowVector2d(1.5, 1));

    Hypergraph pair;
    pair.n_vertices = 2;
    pair.hyperedges = {{0, 1}};
    pair.edge_weights = {1};
    Eigen::MatrixXd s(2, 1);
    s << 1, 3;
    CHECK(node_to_edge_aggregate(s, pair)(0, 0) == 2);
}

TEST_CASE("edge to node aggregation takes incident-edge means") {
    Hypergraph hg;
    hg.n_vertices = 2;
    hg.hyperedges = {{0, 1}, {1}};
    hg.edge_weights = {1, 1};
    Eigen::MatrixXd he(2, 1);
    he << 0, 4;
    auto x = edge_to_node_aggregate(he, hg);
    CHECK(x(0, 0) == 0);
    CHECK(x(1, 0) == 2);

    Hypergraph id;
    id.n_vertices = 4;
    id.hyperedges = {{0}, {1}, {2}, {3}};
    id.edge_weights = {1, 1, 1, 1};
    Eigen::MatrixXd v = uniform_matrix(4, 3, 7);
    CHECK(edge_to_node_aggregate(node_to_edge_aggregate(v, id), id) == v);
}

TEST_CASE("two-stage message passing reproduces the propagation operator") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto hg = build_knn_hypergraph(random_coords(25, seed), 1 + static_cast<int>(seed % 6));
        auto norm = degree_normalization(incidence_matrix(hg), hg.edge_weights);
        Eigen::MatrixXd x = uniform_matrix(25, 4, seed + 100);
        Eigen::VectorXd root = norm.vertex_degree.cwiseSqrt();
        Eigen::MatrixXd scaled = root.cwiseInverse().asDiagonal() * x;
        Eigen::MatrixXd passed = root.asDiagonal() * edge_to_node_aggregate(node_to_edge_aggregate(scaled, hg), hg);
        Eigen::MatrixXd direct = norm.propagation * x;
        CHECK((passed - direct).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("hgcn_forward identity and averaging cases") {
    ModelParams p;
    HgcnLayer h;
    h.weight = Eigen::MatrixXd::Identity(3, 3);
    p.hgcn.push_back(h);
    Eigen::MatrixXd x = uniform_matrix(5, 3, 2);

    SparseMatrix eye(5, 5);
    eye.setIdentity();
    CHECK(hgcn_forward(x, eye, p) == x);

    Hypergraph all;
    all.n_vertices = 5;
    all.hyperedges = {{0, 1, 2, 3, 4}};
    all.edge_weights = {1};
    auto norm = degree_normalization(incidence_matrix(all), all.edge_weights);
    Eigen::MatrixXd z = hgcn_forward(x, norm, p);
    Eigen::RowVectorXd means = x.colwise().mean();
    for (int i = 0; i < 5; ++i) {
        CHECK((z.row(i) - means).cwiseAbs().maxCoeff() < 1e-14);
    }

    Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(5, 3, 2.5);
    Eigen::MatrixXd zc = hgcn_forward(constant, norm, p);
    CHECK((zc.array() - 2.5).abs().maxCoeff() < 1e-14);
}

TEST_CASE("similarity decoding") {
    CHECK(similarity_decode(Eigen::MatrixXd::Zero(3, 2)) == Eigen::MatrixXd::Constant(3, 3, 0.5));

    Eigen::MatrixXd same(2, 2);
    same << 1, 0, 1, 0;
    CHECK(similarity_decode(same)(0, 1) == doctest::Approx(sigmoid(1.0)).epsilon(1e-15));
    CHECK(sigmoid(1.0) == doctest::Approx(0.7311).epsilon(1e-4));

    Eigen::MatrixXd ortho(2, 2);
    ortho << 1, 0, 0, 1;
    CHECK(similarity_decode(ortho)(0, 1) == 0.5);

    Eigen::MatrixXd z = uniform_matrix(12, 5, 3).array() - 1;
    auto s = similarity_decode(z);
    CHECK(s == s.transpose());
    CHECK(s.minCoeff() > 0);
    CHECK(s.maxCoeff() < 1);
}

TEST_CASE("weighted binary cross-entropy anchors") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 4);
    a(0, 1) = a(1, 0) = a(2, 3) = a(3, 2) = 1;
    CHECK(std::abs(weighted_bce_loss(Eigen::MatrixXd::Constant(4, 4, 0.5), a, 1.0) - std::log(2.0)) <= 1e-10);
    CHECK(weighted_bce_loss(a, a, 1.0) <= 1e-5);
    CHECK(weighted_bce_loss(a, a, 1.0) >= 0);

    Eigen::Matrix2d a2;
    a2 << 0, 1, 1, 0;
    double expected = (2 * 3 * std::log(2.0) + 2 * std::log(2.0)) / 4;
    CHECK(weighted_bce_loss(Eigen::MatrixXd::Constant(2, 2, 0.5), a2, 3.0) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(expected == doctest::Approx(2 * std::log(2.0)).epsilon(1e-15));

    Eigen::Matrix2d s;
    s << 0.9, 0.2, 0.2, 0.7;
    Eigen::Matrix2d b;
    b << 1, 0, 0, 1;
    double by_hand = -(2.0 * std::log(0.9) + std::log(0.8) * 2 + 2.0 * std::log(0.7)) / 4;
    CHECK(weighted_bce_loss(s, b, 2.0) == doctest::Approx(by_hand).epsilon(1e-14));

    CHECK(default_pos_weight(a) == 12.0 / 4.0);
    CHECK(default_pos_weight(Eigen::MatrixXd::Zero(3, 3)) == 1);
}

TEST_CASE("gradients match central differences on small models") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto f = small_fixture(seed);
        double err = gradient_check(f.params, f.objective, 1e-5, seed, 200);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("gradient check rejects a corrupted gradient") {
    auto f = small_fixture(3);
    GradientFunction corrupted = [](const ModelParams& p, const Objective& o, ModelParams& g) {
        loss_and_gradient(p, o, g);
        for (auto block : g.blocks()) {
            for (double& v : block) {
                v *= 1.1;
            }
        }
    };
    CHECK(gradient_check(f.params, f.objective, 1e-5, 3, corrupted, 64) > 1e-2);
    CHECK_THROWS_AS(gradient_check(f.params, f.objective, 1e-2, 3), std::invalid_argument);
}

TEST_CASE("zero-loss configuration has a vanishing gradient") {
    auto f = small_fixture(2, 10, 6, 3, 4);
    f.params = f.params.zeros_like();
    f.objective.X.setZero();
    f.objective.noise.setZero();
    f.objective.structure_weight = 0;
    ModelParams g;
    auto terms = loss_and_gradient(f.params, f.objective, g);
    CHECK(terms.total == 0);
    for (auto block : std::as_const(g).blocks()) {
        for (double v : block) {
            CHECK(v == 0);
        }
    }
    CHECK(gradient_check(f.params, f.objective, 1e-5, 2) < 1e-4);
}

TEST_CASE("loss terms combine with their weights") {
    auto f = small_fixture(4);
    f.objective.reconstruction_weight = 0.5;
    f.objective.structure_weight = 2;
    auto t = evaluate_loss(f.params, f.objective);
    CHECK(t.total == doctest::Approx(0.5 * t.reconstruction + 2 * t.structure).epsilon(1e-14));
    ModelParams g;
    auto t2 = loss_and_gradient(f.params, f.objective, g);
    CHECK(t2.total == t.total);
}

namespace {

struct TrainFixture {
    Eigen::MatrixXd X;
    DegreeNormalization norm;
    Eigen::MatrixXd A;
    Architecture arch;
};

TrainFixture synthetic_fixture() {
    SyntheticOptions o;
    o.seed = 7;
    auto d = generate_synthetic(o);
    TrainFixture f;
    f.X = log1p_normalize(d.expression).values;
    auto hg = build_knn_hypergraph(d.coords, 6);
    auto H = incidence_matrix(hg);
    f.norm = degree_normalization(H, hg.edge_weights);
    f.A = adjacency_from_incidence(H);
    f.arch.n_genes = 40;
    return f;
}

}

TEST_CASE("joint training lowers the loss and is deterministic") {
    auto f = synthetic_fixture();
    TrainConfig c;
    c.epochs = 200;
    c.seed = 7;
    auto r = train_joint(f.X, f.norm, f.A, f.arch, c);
    REQUIRE(r.trace.size() == 200);
    CHECK(r.trace.back().total < r.trace.front().total);
    for (const auto& rec : r.trace) {
        CHECK(std::isfinite(rec.total));
    }
    CHECK(r.embeddings.fused.cols() == 64);
    CHECK(r.embeddings.fused.leftCols(32) == r.embeddings.latent);
    CHECK(r.embeddings.fused.rightCols(32) == r.embeddings.spatial);

    auto again = train_joint(f.X, f.norm, f.A, f.arch, c);
    for (std::size_t i = 0; i < r.trace.size(); ++i) {
        CHECK(again.trace[i].total == r.trace[i].total);
    }
    CHECK(again.embeddings.fused == r.embeddings.fused);
}

TEST_CASE("without the structure term the trace total is the reconstruction loss") {
    auto f = synthetic_fixture();
    TrainConfig c;
    c.epochs = 30;
    c.lambda_re = 0;
    auto r = train_joint(f.X, f.norm, f.A, f.arch, c);
    for (const auto& rec : r.trace) {
        CHECK(rec.total == rec.reconstruction);
    }
}

TEST_CASE("phased training records both phases") {
    auto f = synthetic_fixture();
    TrainConfig c;
    c.epochs = 20;
    c.phased = true;
    auto r = train_joint(f.X, f.norm, f.A, f.arch, c);
    CHECK(r.trace.size() == 40);
    CHECK(r.trace[39].epoch == 39);
}

TEST_CASE("an overflowing loss is reported as a numeric failure") {
    auto f = synthetic_fixture();
    TrainConfig c;
    c.epochs = 5;
    f.X(0, 0) = 1e200;
    CHECK_THROWS_AS(train_joint(f.X, f.norm, f.A, f.arch, c), NumericError);
}

TEST_CASE("checkpoint and loss trace files") {
    testutil::TempDir dir("neuralnet");
    auto f = small_fixture(6);
    write_checkpoint(f.params, dir / "m.txt");
    auto back = load_checkpoint(dir / "m.txt");
    auto a = std::as_const(f.params).blocks();
    auto b = std::as_const(back).blocks();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(std::equal(a[i].begin(), a[i].end(), b[i].begin(), b[i].end()));
    }
    CHECK(back.leaky_slope == f.params.leaky_slope);
    auto e1 = embed(f.objective.X, f.objective.propagation, f.params);
    auto e2 = embed(f.objective.X, f.objective.propagation, back);
    CHECK(e1.fused == e2.fused);

    testutil::write_file(dir / "bad.txt", "not a checkpoint\n");
    CHECK_THROWS_AS(load_checkpoint(dir / "bad.txt"), DataError);

    write_loss_trace({{0, 1.5, 0.25, 1.75}}, dir / "t.csv");
    CHECK(testutil::read_file(dir / "t.csv") == "epoch,F_l,L_re,total\n0,1.5,0.25,1.75\n");
}
