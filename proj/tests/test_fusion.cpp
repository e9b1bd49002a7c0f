#include "lgsdf/fusion.hpp"
#include "lgsdf/kdtree.hpp"
#include "lgsdf/sampling.hpp"

#include <gtest/gtest.h>

using namespace lgsdf;

namespace {

Vec3 random_point(Rng& rng, double extent) {
    return {uniform(rng, -extent, extent), uniform(rng, -extent, extent), uniform(rng, -extent, extent)};
}

SurfaceSet random_surface(Rng& rng, int n) {
    std::vector<Vec3> pts, nrm;
    for (int i = 0; i < n; ++i) {
        pts.push_back(random_point(rng, 2.0));
        nrm.push_back(random_point(rng, 1.0).normalized());
    }
    return SurfaceSet(pts, nrm);
}

struct FrameSamples {
    std::vector<RaySample> rays;
    SurfaceSet surface;
};

FrameSamples sample_frame(const DepthFrame& f, const SamplingConfig& cfg, Rng& rng) {
    const NormalImage normals = normal_render(f);
    const PixelSample px = sample_pixels(f, block_irregularity(f, normals, cfg), cfg, rng);
    FrameSamples out;
    for (const Pixel& p : px.pixels) out.rays.push_back(sample_points(f, p, cfg, rng));
    out.surface = SurfaceSet::from_rays(out.rays, normals);
    return out;
}

}  // namespace

TEST(KdTree, MatchesBruteForce) {
    Rng rng(1);
    for (int n : {1, 2, 7, 8, 9, 200, 1000}) {
        std::vector<Vec3> pts;
        for (int i = 0; i < n; ++i) pts.push_back(random_point(rng, 1.0));
        const KdTree tree(pts);
        for (int q = 0; q < 300; ++q) {
            const Vec3 p = random_point(rng, 1.5);
            const NearestResult a = tree.nearest(p);
            const NearestResult b = nearest_brute_force(pts, p);
            EXPECT_EQ(a.index, b.index);
            EXPECT_EQ(a.squared_distance, b.squared_distance);
        }
    }
}

TEST(KdTree, TiesResolveToLowestIndex) {
    const std::vector<Vec3> pts = {Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0), Vec3(1, 0, 0)};
    const KdTree tree(pts);
    EXPECT_EQ(tree.nearest(Vec3::Zero()).index, 0u);
    EXPECT_EQ(tree.nearest(Vec3(2, 0, 0)).index, 0u);
}

TEST(CaptureDistance, SurfaceSampleUsesPixelNormal) {
    const SurfaceSet s({Vec3(0, 0, 2), Vec3(1, 0, 2)}, {Vec3(0, 0, -1), Vec3(0, 1, 0)});
    const PointSample sample{2.0, Vec3(0, 0, 2), SampleKind::Surface};
    const Capture c = capture_distance(sample, 2.0, 0, s);
    EXPECT_EQ(c.distance, 0.0);
    EXPECT_EQ(c.gradient, Vec3(0, 0, -1));
}

TEST(CaptureDistance, BehindOwnSurfaceIsNegative) {
    const SurfaceSet s({Vec3(0, 0, 2), Vec3(3, 0, 2)}, {Vec3(0, 0, -1), Vec3(0, 0, -1)});
    const PointSample behind{2.07, Vec3(0, 0, 2.07), SampleKind::NearSurface};
    const Capture c = capture_distance(behind, 2.0, 0, s);
    EXPECT_NEAR(c.distance, -(2.07 - 2.0), 1e-12);
    // SDF gradient points back toward the camera, out of the solid.
    EXPECT_NEAR((c.gradient - Vec3(0, 0, -1)).norm(), 0.0, 1e-12);
    const PointSample front{1.5, Vec3(0, 0, 1.5), SampleKind::Stratified};
    const Capture f = capture_distance(front, 2.0, 0, s);
    EXPECT_NEAR(f.distance, 0.5, 1e-12);
    EXPECT_NEAR((f.gradient - Vec3(0, 0, -1)).norm(), 0.0, 1e-12);
}

TEST(CaptureDistance, MatchesExhaustiveScan) {
    Rng rng(7);
    const SurfaceSet s = random_surface(rng, 200);
    for (int i = 0; i < 500; ++i) {
        const Vec3 p = random_point(rng, 2.5);
        const double range = uniform(rng, 0.1, 3.0), surface_range = uniform(rng, 0.1, 3.0);
        const Capture c = capture_distance({range, p, SampleKind::Stratified}, surface_range, 0, s);
        const NearestResult brute = nearest_brute_force(s.points(), p);
        const double d = std::sqrt(brute.squared_distance);
        const double sign = surface_range > range ? 1.0 : -1.0;
        EXPECT_DOUBLE_EQ(c.distance, sign * d);
        const Vec3 g = sign * (p - s.points()[brute.index]) / d;
        EXPECT_NEAR((c.gradient - g).norm(), 0.0, 1e-12);
    }
}

TEST(PointWeight, Values) {
    const FusionConfig cfg;
    EXPECT_DOUBLE_EQ(point_weight(0.0, cfg), 1.0);
    EXPECT_DOUBLE_EQ(point_weight(1.0, cfg), 1e-5);
    EXPECT_NEAR(point_weight(0.01, cfg), 0.60653065971, 1e-10);
    EXPECT_NEAR(point_weight(-0.01, cfg), 0.60653065971, 1e-10);
}

TEST(FusePoint, FirstObservation) {
    const GridCell c = fuse_point(GridCell{}, 0.37, 0.4, Vec3(0, 1, 0), 10.0);
    EXPECT_DOUBLE_EQ(c.distance, 0.37);
    EXPECT_DOUBLE_EQ(c.weight, 0.4);
    EXPECT_EQ(c.gradient, Vec3(0, 1, 0));
}

TEST(FusePoint, EqualWeightAverage) {
    GridCell cell;
    cell.distance = 0.2;
    cell.weight = 1.0;
    cell.gradient = Vec3::UnitX();
    const GridCell c = fuse_point(cell, 0.4, 1.0, Vec3::UnitX(), 10.0);
    EXPECT_NEAR(c.distance, 0.3, 1e-15);
    EXPECT_DOUBLE_EQ(c.weight, 2.0);
}

TEST(FusePoint, WeightClampUsesPreviousWeightForAverage) {
    GridCell cell;
    cell.distance = 0.0;
    cell.weight = 9.5;
    cell.gradient = Vec3::UnitZ();
    const GridCell c = fuse_point(cell, 1.05, 1.0, Vec3::UnitZ(), 10.0);
    EXPECT_DOUBLE_EQ(c.weight, 10.0);
    EXPECT_NEAR(c.distance, 1.05 / 10.5, 1e-15);
}

TEST(FusePoint, GradientRenormalized) {
    GridCell cell;
    cell.weight = 1.0;
    cell.gradient = Vec3::UnitX();
    const GridCell c = fuse_point(cell, 0.0, 1.0, Vec3::UnitY(), 10.0);
    EXPECT_NEAR(c.gradient.norm(), 1.0, 1e-15);
    EXPECT_NEAR((c.gradient - Vec3(1, 1, 0).normalized()).norm(), 0.0, 1e-15);
}

TEST(FusePoint, ConvexAndMonotoneProperties) {
    Rng rng(99);
    for (int trial = 0; trial < 10000; ++trial) {
        GridCell cell;
        if (uniform01(rng) < 0.9) {
            cell.distance = uniform(rng, -2, 2);
            cell.weight = uniform(rng, 1e-5, 10.0);
            cell.gradient = random_point(rng, 1.0).normalized();
        }
        const double d = uniform(rng, -2, 2);
        const double w = point_weight(d, FusionConfig{});
        const GridCell out = fuse_point(cell, d, w, random_point(rng, 1.0).normalized(), 10.0);
        if (cell.weight > 0) {
            EXPECT_GE(out.distance, std::min(cell.distance, d) - 1e-12);
            EXPECT_LE(out.distance, std::max(cell.distance, d) + 1e-12);
        } else {
            EXPECT_NEAR(out.distance, d, 1e-15);
        }
        EXPECT_GE(out.weight, cell.weight);
        EXPECT_LE(out.weight, 10.0);
    }
}

TEST(GridStore, BinningIsExact) {
    GridStore store(0.05, Vec3(0.01, -0.02, 0.0));
    Rng rng(4);
    for (int i = 0; i < 5000; ++i) {
        const Vec3 p = random_point(rng, 1.0);
        const CellIndex c = store.cell_of(p);
        const Vec3 lo = store.center(c) - Vec3::Constant(0.025);
        for (int a = 0; a < 3; ++a) {
            EXPECT_GE(p[a], lo[a] - 1e-12);
            EXPECT_LT(p[a], lo[a] + 0.05 + 1e-12);
        }
    }
    // Half-open boxes: the lower face belongs to the cell, the upper one does not.
    const GridStore unit(0.25, Vec3::Zero());
    EXPECT_EQ(unit.cell_of(Vec3(0.25, 0, 0)).x, 1);
    EXPECT_EQ(unit.cell_of(Vec3(0.0, 0, 0)).x, 0);
    EXPECT_EQ(unit.cell_of(Vec3(-0.25, 0, 0)).x, -1);
}

TEST(GridStore, TwoPointsInOneCell) {
    GridStore store(0.05, Vec3::Zero());
    const double d1 = 0.02, d2 = 0.03;
    const double w1 = point_weight(d1, FusionConfig{}), w2 = point_weight(d2, FusionConfig{});
    store.begin_frame();
    store.fuse(Vec3(0.01, 0.01, 0.01), d1, w1, Vec3::UnitX(), 10.0, 0);
    store.fuse(Vec3(0.04, 0.02, 0.01), d2, w2, Vec3::UnitX(), 10.0, 0);
    ASSERT_EQ(store.size(), 1u);
    const GridCell* c = store.find({0, 0, 0});
    EXPECT_NEAR(c->distance, (w1 * d1 + w2 * d2) / (w1 + w2), 1e-15);
    EXPECT_EQ(store.current().size(), 1u);
    EXPECT_EQ(store.history().size(), 1u);
}

TEST(IntegrateFrame, EmptyFrameLeavesStoreUnchanged) {
    GridStore store(0.05, Vec3::Zero());
    store.fuse(Vec3(1, 1, 1), 0.1, 0.5, Vec3::UnitZ(), 10.0, 0);
    const std::string before = export_grid(store);
    integrate_frame(store, {}, SurfaceSet{}, FusionConfig{}, 1);
    EXPECT_EQ(export_grid(store), before);
    EXPECT_TRUE(store.current().empty());
}

TEST(IntegrateFrame, DeterministicAndCurrentSubsetOfHistory) {
    const Scene s{{Sphere{Vec3::Zero(), 0.5}, Plane{Vec3(0, 0, -0.5), Vec3::UnitZ()}}};
    const DepthFrame f = render_depth(s, look_at(Vec3(1.5, 0.3, 0.6), Vec3::Zero()), CameraModel{});
    std::string snapshots[2];
    for (int run = 0; run < 2; ++run) {
        Rng rng(12);
        GridStore store(FusionConfig{});
        const FrameSamples fs = sample_frame(f, SamplingConfig{}, rng);
        integrate_frame(store, fs.rays, fs.surface, FusionConfig{}, 0);
        for (const auto& idx : store.current()) EXPECT_NE(store.find(idx), nullptr);
        EXPECT_EQ(store.current().size(), store.history().size());
        snapshots[run] = export_grid(store);
    }
    EXPECT_EQ(snapshots[0], snapshots[1]);
}

TEST(IntegrateFrame, NearSurfaceCellsApproachTruth) {
    const Scene s{{Sphere{Vec3::Zero(), 0.5}}};
    TrajectoryConfig traj;
    traj.n_frames = 50;
    traj.radius = 1.5;
    traj.height = 0.4;
    GridStore store(FusionConfig{});
    Rng rng(21);
    int frame = 0;
    for (const Pose& pose : generate_trajectory(s, traj)) {
        const DepthFrame f = render_depth(s, pose, CameraModel{}, frame);
        const FrameSamples fs = sample_frame(f, SamplingConfig{}, rng);
        integrate_frame(store, fs.rays, fs.surface, FusionConfig{}, frame++);
    }
    double err = 0;
    int n = 0;
    for (const auto& idx : store.history()) {
        const GridCell* c = store.find(idx);
        if (std::abs(c->distance) >= 2 * store.resolution()) continue;
        err += std::abs(c->distance - s.sdf(store.center(idx)));
        ++n;
    }
    ASSERT_GT(n, 100);
    EXPECT_LT(err / n, store.resolution());
}

TEST(GridSnapshot, RoundTrip) {
    GridStore store(0.05, Vec3(0.1, 0.2, 0.3));
    Rng rng(8);
    for (int i = 0; i < 300; ++i)
        store.fuse(random_point(rng, 1.0), uniform(rng, -1, 1), uniform(rng, 1e-5, 1), random_point(rng, 1).normalized(),
                   10.0, i);
    const GridStore back = import_grid(export_grid(store));
    EXPECT_EQ(export_grid(back), export_grid(store));
    ASSERT_EQ(back.history().size(), store.history().size());
    for (const auto& idx : store.history()) EXPECT_EQ(back.find(idx)->distance, store.find(idx)->distance);
    EXPECT_THROW(import_grid("garbage"), Error);
}

TEST(FusionConfig, Validation) {
    FusionConfig c;
    EXPECT_NO_THROW(c.validate());
    c.decay = 0;
    EXPECT_THROW(c.validate(), Error);
    c = FusionConfig{};
    c.min_weight = 0;
    EXPECT_THROW(c.validate(), Error);
}
