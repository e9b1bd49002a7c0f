#pragma once

// Active sampling: pixels are allocated to an 8x8 block grid in proportion to
// each block's geometric irregularity, then points are drawn along each
// selected pixel ray.

#include "lgsdf/core.hpp"
#include "lgsdf/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace lgsdf {

inline constexpr int kBlocksPerSide = 8;
inline constexpr int kBlockCount = kBlocksPerSide * kBlocksPerSide;

using BlockValues = std::array<double, kBlockCount>;
using BlockCounts = std::array<int, kBlockCount>;

enum class PixelSamplingMode { Irregularity, UniformRandom };

/// How the real-valued per-block quotas are turned into integer counts.
/// Both keep the total exact and every count within one of its quota.
enum class QuotaRounding {
    Randomized,       ///< floors plus systematic sampling of the fractional parts (unbiased)
    LargestRemainder  ///< deterministic, ties to the lower block index
};

struct SamplingConfig {
    int pixels_per_frame = 200;    // M
    double lambda_depth = 0.7;
    double lambda_normal = 0.3;
    int n_stratified = 22;         // N_f
    int n_near_surface = 5;        // N_s
    double min_depth = 0.07;       // l_min, meters along the ray
    double behind_surface = 0.10;  // delta
    double near_surface_std = 0.10;
    PixelSamplingMode mode = PixelSamplingMode::Irregularity;
    QuotaRounding rounding = QuotaRounding::Randomized;

    void validate() const {
        if (pixels_per_frame < 64) throw Error("sampling.pixels_per_frame must be >= 64");
        if (lambda_depth < 0 || lambda_normal < 0 || (lambda_depth == 0 && lambda_normal == 0))
            throw Error("sampling.lambda_depth/lambda_normal must be >= 0 and not both zero");
        if (n_stratified < 1) throw Error("sampling.n_stratified must be >= 1");
        if (n_near_surface < 0) throw Error("sampling.n_near_surface must be >= 0");
        if (!(min_depth > 0)) throw Error("sampling.min_depth must be > 0");
        if (!(behind_surface > 0)) throw Error("sampling.behind_surface must be > 0");
        if (!(near_surface_std > 0)) throw Error("sampling.near_surface_std must be > 0");
    }
};

struct PixelRange {
    int begin;
    int end;
};

/// Pixel span of block `i` along an axis of `extent` pixels; the last block
/// absorbs the remainder.
inline PixelRange block_span(int extent, int i) {
    const int step = extent / kBlocksPerSide;
    return {i * step, i == kBlocksPerSide - 1 ? extent : (i + 1) * step};
}

inline int block_of(int u, int v, int width, int height) {
    const int bx = std::min(u / std::max(width / kBlocksPerSide, 1), kBlocksPerSide - 1);
    const int by = std::min(v / std::max(height / kBlocksPerSide, 1), kBlocksPerSide - 1);
    return by * kBlocksPerSide + bx;
}

// ---------------------------------------------------------------------------
// Normal rendering

/// Per-pixel cosine between the optical axis and the camera-facing surface
/// normal, plus the world-frame normal itself. NaN marks invalid pixels.
struct NormalImage {
    int width = 0;
    int height = 0;
    std::vector<double> cosine;
    std::vector<Vec3> normal_world;

    std::optional<double> at(int u, int v) const {
        const double c = cosine[static_cast<std::size_t>(v) * width + u];
        if (std::isnan(c)) return std::nullopt;
        return c;
    }
    std::optional<Vec3> normal(int u, int v) const {
        if (!at(u, v)) return std::nullopt;
        return normal_world[static_cast<std::size_t>(v) * width + u];
    }
};

inline NormalImage normal_render(const DepthFrame& frame) {
    const int w = frame.width();
    const int h = frame.height();
    const CameraModel& cam = frame.camera();
    NormalImage out;
    out.width = w;
    out.height = h;
    out.cosine.assign(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::quiet_NaN());
    out.normal_world.assign(static_cast<std::size_t>(w) * h, Vec3::Zero());

    auto point = [&](int u, int v) { return Vec3(cam.unproject(u, v) * *frame.depth(u, v)); };
    const Mat3 rot = frame.pose().linear();
    for (int v = 1; v + 1 < h; ++v) {
        for (int u = 1; u + 1 < w; ++u) {
            if (!frame.valid(u, v) || !frame.valid(u - 1, v) || !frame.valid(u + 1, v) ||
                !frame.valid(u, v - 1) || !frame.valid(u, v + 1))
                continue;
            const Vec3 du = point(u + 1, v) - point(u - 1, v);
            const Vec3 dv = point(u, v + 1) - point(u, v - 1);
            Vec3 n = du.cross(dv);
            const double len = n.norm();
            if (!(len > 0)) continue;
            n /= len;
            if (n.z() > 0) n = -n;  // face the camera
            const std::size_t i = static_cast<std::size_t>(v) * w + u;
            out.cosine[i] = -n.z();
            out.normal_world[i] = rot * n;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pixel sampling

namespace detail {

/// Population variance; zero with fewer than two values.
inline double population_variance(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return acc / xs.size();
}

}  // namespace detail

inline BlockValues block_irregularity(const DepthFrame& frame, const NormalImage& normals,
                                      const SamplingConfig& cfg) {
    if (frame.width() < kBlocksPerSide || frame.height() < kBlocksPerSide)
        throw Error("block_irregularity: image smaller than the block grid");
    BlockValues xi{};
    std::vector<double> depths;
    std::vector<double> cosines;
    for (int by = 0; by < kBlocksPerSide; ++by) {
        const PixelRange rows = block_span(frame.height(), by);
        for (int bx = 0; bx < kBlocksPerSide; ++bx) {
            const PixelRange cols = block_span(frame.width(), bx);
            depths.clear();
            cosines.clear();
            for (int v = rows.begin; v < rows.end; ++v) {
                for (int u = cols.begin; u < cols.end; ++u) {
                    if (auto d = frame.depth(u, v)) depths.push_back(*d);
                    if (auto c = normals.at(u, v)) cosines.push_back(*c);
                }
            }
            double value = 0.0;
            if (depths.size() >= 2) {
                value = cfg.lambda_depth * detail::population_variance(depths) +
                        cfg.lambda_normal * detail::population_variance(cosines);
            }
            xi[by * kBlocksPerSide + bx] = value;
        }
    }
    return xi;
}

/// Integer per-block pixel counts summing exactly to `total`, each within one
/// of its proportional quota total * xi_b / sum(xi).
inline BlockCounts allocate_block_counts(const BlockValues& xi, int total, QuotaRounding rounding,
                                         Rng& rng) {
    double sum = 0.0;
    for (double x : xi) {
        if (!(x >= 0) || !std::isfinite(x)) throw Error("allocate_block_counts: invalid irregularity");
        sum += x;
    }
    if (!(sum > 0)) throw Error("allocate_block_counts: all irregularities are zero");

    BlockCounts counts{};
    std::array<double, kBlockCount> frac{};
    int assigned = 0;
    for (int b = 0; b < kBlockCount; ++b) {
        const double quota = total * (xi[b] / sum);
        const double fl = std::floor(quota);
        counts[b] = static_cast<int>(fl);
        frac[b] = quota - fl;
        assigned += counts[b];
    }
    const int remainder = total - assigned;
    if (remainder <= 0) return counts;

    if (rounding == QuotaRounding::LargestRemainder) {
        std::array<int, kBlockCount> order{};
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return frac[a] > frac[b]; });
        for (int i = 0; i < remainder; ++i) ++counts[order[i]];
        return counts;
    }

    // Systematic sampling over the fractional parts: block b receives its
    // extra pixel with probability exactly frac[b].
    double frac_sum = 0.0;
    for (double f : frac) frac_sum += f;
    const double scale = remainder / frac_sum;
    const double start = uniform01(rng);
    double cum = 0.0;
    int next = 0;
    for (int b = 0; b < kBlockCount && next < remainder; ++b) {
        cum += frac[b] * scale;
        if (start + next < cum) {
            ++counts[b];
            ++next;
        }
    }
    // Rounding in the cumulative sum can leave the last pointer unplaced.
    for (int b = kBlockCount - 1; next < remainder && b >= 0; --b) {
        if (frac[b] > 0 && counts[b] == static_cast<int>(std::floor(total * (xi[b] / sum)))) {
            ++counts[b];
            ++next;
        }
    }
    return counts;
}

struct Pixel {
    int u;
    int v;
    bool operator==(const Pixel&) const = default;
};

struct PixelSample {
    std::vector<Pixel> pixels;
    BlockCounts counts{};
};

namespace detail {

/// Draws `k` entries from `pool`; without replacement when the pool is large
/// enough, otherwise with replacement. Reorders `pool`.
inline void draw_pixels(std::vector<Pixel>& pool, int k, Rng& rng, std::vector<Pixel>& out) {
    const std::size_t n = pool.size();
    if (n == 0 || k <= 0) return;
    if (static_cast<std::size_t>(k) <= n) {
        for (int i = 0; i < k; ++i) {
            const std::size_t j = i + uniform_index(rng, n - i);
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
    } else {
        for (int i = 0; i < k; ++i) out.push_back(pool[uniform_index(rng, n)]);
    }
}

}  // namespace detail

inline PixelSample sample_pixels(const DepthFrame& frame, const BlockValues& xi,
                                 const SamplingConfig& cfg, Rng& rng) {
    const int w = frame.width();
    const int h = frame.height();
    std::array<std::vector<Pixel>, kBlockCount> valid;
    std::size_t total_valid = 0;
    for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
            if (!frame.valid(u, v)) continue;
            valid[block_of(u, v, w, h)].push_back({u, v});
            ++total_valid;
        }
    }
    if (total_valid == 0) throw Error("sample_pixels: frame has no valid pixels");

    PixelSample result;
    const int m = cfg.pixels_per_frame;
    result.pixels.reserve(m);
    const bool any_mass = std::any_of(xi.begin(), xi.end(), [](double x) { return x > 0; });

    if (cfg.mode == PixelSamplingMode::UniformRandom || !any_mass) {
        std::vector<Pixel> pool;
        pool.reserve(total_valid);
        for (const auto& block : valid) pool.insert(pool.end(), block.begin(), block.end());
        detail::draw_pixels(pool, m, rng, result.pixels);
        for (const Pixel& p : result.pixels) ++result.counts[block_of(p.u, p.v, w, h)];
        return result;
    }

    result.counts = allocate_block_counts(xi, m, cfg.rounding, rng);
    for (int b = 0; b < kBlockCount; ++b) {
        if (result.counts[b] > 0 && valid[b].empty())
            throw Error("sample_pixels: block with positive irregularity has no valid pixels");
        detail::draw_pixels(valid[b], result.counts[b], rng, result.pixels);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Point sampling along rays

enum class SampleKind { Stratified, NearSurface, Surface };

struct PointSample {
    double range;  ///< distance from the camera center along the unit ray
    Vec3 point;
    SampleKind kind;
};

/// Samples along one pixel ray. Depths along the ray are Euclidean ranges, so
/// the surface sample sits at the observed z-depth converted to range.
struct RaySample {
    Pixel pixel{};
    Vec3 origin = Vec3::Zero();
    Vec3 direction = Vec3::UnitZ();  ///< unit, world frame
    double surface_range = 0.0;
    std::vector<PointSample> samples;

    const PointSample& surface() const { return samples.back(); }
};

inline RaySample sample_points(const DepthFrame& frame, Pixel pixel, const SamplingConfig& cfg,
                               Rng& rng) {
    const auto depth = frame.depth(pixel.u, pixel.v);
    if (!depth) throw Error("sample_points: pixel has no valid depth");
    const Vec3 ray_cam = frame.camera().unproject(pixel.u, pixel.v);
    const double ray_len = ray_cam.norm();

    RaySample ray;
    ray.pixel = pixel;
    ray.origin = frame.origin();
    ray.direction = frame.pose().linear() * (ray_cam / ray_len);
    ray.surface_range = *depth * ray_len;

    const double lo = cfg.min_depth;
    const double hi = ray.surface_range + cfg.behind_surface;
    if (!(hi > lo)) throw Error("sample_points: surface closer than the minimum sampling depth");

    ray.samples.reserve(cfg.n_stratified + cfg.n_near_surface + 1);
    auto push = [&](double l, SampleKind kind) {
        ray.samples.push_back({l, ray.origin + l * ray.direction, kind});
    };
    const double bin = (hi - lo) / cfg.n_stratified;
    for (int k = 0; k < cfg.n_stratified; ++k) {
        const double l = lo + bin * (k + uniform01(rng));
        push(std::min(l, lo + bin * (k + 1)), SampleKind::Stratified);
    }
    for (int k = 0; k < cfg.n_near_surface; ++k) {
        const double l = normal(rng, ray.surface_range, cfg.near_surface_std);
        push(std::clamp(l, lo, hi), SampleKind::NearSurface);
    }
    push(ray.surface_range, SampleKind::Surface);
    return ray;
}

}  // namespace lgsdf
