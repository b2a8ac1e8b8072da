#include <catch2/catch_amalgamated.hpp>

#include <sasnet/maskfield.hpp>

#include <random>
#include <set>

using namespace sasnet;
using ad::Mat;

namespace {

mask::HashGrid small_grid(std::mt19937_64& rng) {
    mask::HashGridConfig cfg;
    cfg.levels = 4;
    cfg.base_resolution = 4;
    cfg.finest_resolution = 32;
    cfg.feature_dim = 2;
    cfg.table_size = 64;
    return mask::HashGrid::create(cfg, rng);
}

}  // namespace

TEST_CASE("level resolutions grow geometrically and monotonically") {
    mask::HashGridConfig cfg;
    auto res = mask::level_resolutions(cfg);
    REQUIRE(res.size() == 10);
    CHECK(res.front() == 4);
    CHECK(res.back() == 128);
    for (size_t i = 1; i < res.size(); ++i) CHECK(res[i] >= res[i - 1]);
}

TEST_CASE("dense levels are collision-free") {
    std::mt19937_64 rng(1);
    auto grid = small_grid(rng);
    for (int l = 0; l < grid.cfg.levels; ++l) {
        if (!grid.dense(l)) continue;
        std::set<int> slots;
        const int r = grid.resolutions[l];
        for (int vy = 0; vy <= r; ++vy)
            for (int vx = 0; vx <= r; ++vx) CHECK(slots.insert(grid.slot(l, vx, vy)).second);
    }
}

TEST_CASE("query at a vertex returns that vertex's features") {
    std::mt19937_64 rng(2);
    auto grid = small_grid(rng);
    // vertex (1,2) of level 0 (res 4): x = -1 + 2*1/4, y = -1 + 2*2/4
    Mat coords(1, 2);
    coords << -0.5, 0.0;
    auto plan = mask::plan_interpolation(grid, coords);
    auto feat = mask::interpolate_features(grid, plan);
    const int slot = grid.slot(0, 1, 2);
    CHECK(feat->val(0, 0) == Catch::Approx(grid.tables[0]->val(slot, 0)).margin(1e-12));
    CHECK(feat->val(0, 1) == Catch::Approx(grid.tables[0]->val(slot, 1)).margin(1e-12));
}

TEST_CASE("query at a cell center averages the four corners") {
    std::mt19937_64 rng(3);
    auto grid = small_grid(rng);
    Mat coords(1, 2);
    coords << -1.0 + 2.0 * 0.5 / 4.0, -1.0 + 2.0 * 0.5 / 4.0;  // center of cell (0,0), level 0
    auto plan = mask::plan_interpolation(grid, coords);
    auto feat = mask::interpolate_features(grid, plan);
    Mat expect = 0.25 * (grid.tables[0]->val.row(grid.slot(0, 0, 0)) +
                         grid.tables[0]->val.row(grid.slot(0, 1, 0)) +
                         grid.tables[0]->val.row(grid.slot(0, 0, 1)) +
                         grid.tables[0]->val.row(grid.slot(0, 1, 1)));
    CHECK(feat->val(0, 0) == Catch::Approx(expect(0, 0)).margin(1e-12));
    CHECK(feat->val(0, 1) == Catch::Approx(expect(0, 1)).margin(1e-12));
}

TEST_CASE("random queries match a brute-force bilinear oracle") {
    std::mt19937_64 rng(4);
    auto grid = small_grid(rng);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Mat coords(50, 2);
    for (int i = 0; i < 50; ++i) { coords(i, 0) = u(rng); coords(i, 1) = u(rng); }
    auto plan = mask::plan_interpolation(grid, coords);
    auto feat = mask::interpolate_features(grid, plan);
    for (int i = 0; i < 50; ++i) {
        long off = 0;
        for (int l = 0; l < grid.cfg.levels; ++l) {
            const int res = grid.resolutions[l];
            const double px = (coords(i, 0) + 1.0) * 0.5 * res;
            const double py = (coords(i, 1) + 1.0) * 0.5 * res;
            const int cx = std::min(static_cast<int>(px), res - 1);
            const int cy = std::min(static_cast<int>(py), res - 1);
            const double fx = px - cx, fy = py - cy;
            for (int f = 0; f < 2; ++f) {
                const double v =
                    (1 - fx) * (1 - fy) * grid.tables[l]->val(grid.slot(l, cx, cy), f) +
                    fx * (1 - fy) * grid.tables[l]->val(grid.slot(l, cx + 1, cy), f) +
                    (1 - fx) * fy * grid.tables[l]->val(grid.slot(l, cx, cy + 1), f) +
                    fx * fy * grid.tables[l]->val(grid.slot(l, cx + 1, cy + 1), f);
                CHECK(feat->val(i, off + f) == Catch::Approx(v).margin(1e-12));
            }
            off += 2;
        }
    }
}

TEST_CASE("interpolation weights form a partition of unity") {
    std::mt19937_64 rng(5);
    auto grid = small_grid(rng);
    std::uniform_real_distribution<double> u(-1.2, 1.2);  // include clamped queries
    Mat coords(100000, 2);
    for (long i = 0; i < coords.rows(); ++i) { coords(i, 0) = u(rng); coords(i, 1) = u(rng); }
    auto plan = mask::plan_interpolation(grid, coords);
    for (int l = 0; l < grid.cfg.levels; ++l)
        CHECK((plan.weights[l].rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("zero-initialized decoder head gives masks of 0.5 everywhere") {
    std::mt19937_64 rng(6);
    auto grid = small_grid(rng);
    auto dec = mask::MaskDecoder::create(grid.feature_width(), 16, 3, rng);
    dec.W2->val.setZero();
    dec.b2->val.setZero();
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Mat coords(20, 2);
    for (int i = 0; i < 20; ++i) { coords(i, 0) = u(rng); coords(i, 1) = u(rng); }
    auto plan = mask::plan_interpolation(grid, coords);
    auto m = mask::decode_masks(mask::interpolate_features(grid, plan), dec);
    CHECK((m->val.array() - 0.5).abs().maxCoeff() == 0.0);
}

TEST_CASE("decoded masks stay in (0,1) and fixed channels are exactly one") {
    std::mt19937_64 rng(7);
    auto grid = small_grid(rng);
    auto dec = mask::MaskDecoder::create(grid.feature_width(), 16, 4, rng);
    dec.b2->val.setRandom();
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Mat coords(64, 2);
    for (int i = 0; i < 64; ++i) { coords(i, 0) = u(rng); coords(i, 1) = u(rng); }
    auto plan = mask::plan_interpolation(grid, coords);
    auto learned = mask::decode_masks(mask::interpolate_features(grid, plan), dec);
    CHECK((learned->val.array() > 0.0).all());
    CHECK((learned->val.array() < 1.0).all());
    mask::MaskAssembly assembly{{-1, 0, 1, 2, 3}};
    auto layer = mask::assemble_layer_masks(learned, assembly);
    CHECK((layer->val.col(0).array() == 1.0).all());
    CHECK(layer->val.col(1) == learned->val.col(0));
    // fixed channel receives no gradient: backward through the layer only
    ad::backward(ad::sum(layer));
    CHECK(dec.b2->grad.size() > 0);
}

TEST_CASE("increasing a head bias strictly increases that channel everywhere") {
    std::mt19937_64 rng(8);
    auto grid = small_grid(rng);
    auto dec = mask::MaskDecoder::create(grid.feature_width(), 16, 2, rng);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Mat coords(32, 2);
    for (int i = 0; i < 32; ++i) { coords(i, 0) = u(rng); coords(i, 1) = u(rng); }
    auto plan = mask::plan_interpolation(grid, coords);
    auto before = mask::decode_masks(mask::interpolate_features(grid, plan), dec);
    dec.b2->val(0, 1) += 0.3;
    auto after = mask::decode_masks(mask::interpolate_features(grid, plan), dec);
    CHECK((after->val.col(1).array() > before->val.col(1).array()).all());
    CHECK(after->val.col(0) == before->val.col(0));
}

TEST_CASE("mask spatial gradient: constant features give zero gradient") {
    std::mt19937_64 rng(9);
    auto grid = small_grid(rng);
    for (auto& t : grid.tables) t->val.setConstant(0.25);
    auto dec = mask::MaskDecoder::create(grid.feature_width(), 16, 2, rng);
    Mat coords(10, 2);
    std::uniform_real_distribution<double> u(-0.9, 0.9);
    for (int i = 0; i < 10; ++i) { coords(i, 0) = u(rng); coords(i, 1) = u(rng); }
    auto plan = mask::plan_interpolation(grid, coords);
    auto feat = mask::interpolate_features_with_gradient(grid, plan);
    auto ev = mask::decode_masks_with_gradient(feat, dec);
    CHECK(ev.dmask_dx.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(ev.dmask_dy.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mask spatial gradient matches central finite differences") {
    std::mt19937_64 rng(10);
    auto grid = small_grid(rng);
    for (auto& t : grid.tables) t->val.setRandom();  // order-1 features
    auto dec = mask::MaskDecoder::create(grid.feature_width(), 16, 3, rng);
    dec.W2->val.setRandom();
    dec.b2->val.setRandom();

    auto eval = [&](double x, double y) {
        Mat c(1, 2);
        c << x, y;
        auto plan = mask::plan_interpolation(grid, c);
        return mask::decode_masks_with_gradient(
                   mask::interpolate_features_with_gradient(grid, plan), dec)
            .masks;
    };

    std::uniform_real_distribution<double> u(-0.9, 0.9);
    const double h = 1e-7;
    int tested = 0;
    for (int trial = 0; trial < 200 && tested < 40; ++trial) {
        const double x = u(rng), y = u(rng);
        // stay away from cell boundaries on every level
        bool interior = true;
        for (int res : grid.resolutions) {
            const double px = (x + 1.0) * 0.5 * res, py = (y + 1.0) * 0.5 * res;
            if (std::abs(px - std::round(px)) < 1e-3 || std::abs(py - std::round(py)) < 1e-3)
                interior = false;
        }
        if (!interior) continue;
        ++tested;
        Mat c(1, 2);
        c << x, y;
        auto plan = mask::plan_interpolation(grid, c);
        auto ev = mask::decode_masks_with_gradient(
            mask::interpolate_features_with_gradient(grid, plan), dec);
        Mat fdx = (eval(x + h, y) - eval(x - h, y)) / (2 * h);
        Mat fdy = (eval(x, y + h) - eval(x, y - h)) / (2 * h);
        for (int ch = 0; ch < 3; ++ch) {
            const double sx = std::max(1.0, std::abs(fdx(0, ch)));
            const double sy = std::max(1.0, std::abs(fdy(0, ch)));
            CHECK(std::abs(ev.dmask_dx(0, ch) - fdx(0, ch)) / sx < 1e-5);
            CHECK(std::abs(ev.dmask_dy(0, ch) - fdy(0, ch)) / sy < 1e-5);
        }
    }
    CHECK(tested == 40);
}

TEST_CASE("even group split differs by at most one and broadcast reindexes") {
    auto map = mask::even_group_map(116, 8);
    std::vector<int> sizes(8, 0);
    for (int g : map) ++sizes[g];
    const auto [mn, mx] = std::minmax_element(sizes.begin(), sizes.end());
    CHECK(*mx - *mn <= 1);

    Mat layer_masks(2, 8);
    layer_masks.setRandom();
    Mat neurons = mask::broadcast_to_neurons(layer_masks, map);
    REQUIRE(neurons.cols() == 116);
    for (int j = 0; j < 116; ++j) CHECK(neurons.col(j) == layer_masks.col(map[j]));

    // G=1: all neurons share one column
    Mat one(2, 1);
    one << 0.3, 0.7;
    Mat shared = mask::broadcast_to_neurons(one, mask::even_group_map(5, 1));
    for (int j = 0; j < 5; ++j) CHECK(shared.col(j) == one.col(0));

    CHECK_THROWS(mask::broadcast_to_neurons(one, std::vector<int>{0, 1}));
}

TEST_CASE("tape broadcast backward sums group contributions") {
    auto layer = ad::make_leaf(Mat::Ones(3, 2), true, "m");
    auto out = mask::broadcast_to_neurons(layer, std::vector<int>{0, 0, 1});
    ad::backward(ad::sum(out));
    CHECK(layer->grad.col(0).isApprox(Mat::Constant(3, 1, 2.0)));
    CHECK(layer->grad.col(1).isApprox(Mat::Constant(3, 1, 1.0)));
}
