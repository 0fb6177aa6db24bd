#include "orbit/scene_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "orbit/rng.hpp"

namespace orbit::sim {

namespace {

// ---------------------------------------------------------------------------
// Hash-based value noise. Lattice values come from mixing the seed with the
// integer cell coordinates, so the field is a pure function of (seed, x, y).
// ---------------------------------------------------------------------------

double lattice_value(uint64_t seed, int64_t xi, int64_t yi) {
    uint64_t h = mix64(seed ^ mix64(static_cast<uint64_t>(xi) * 0x9e3779b97f4a7c15ull ^
                                    static_cast<uint64_t>(yi)));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(uint64_t seed, double x, double y) {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const auto xi = static_cast<int64_t>(fx);
    const auto yi = static_cast<int64_t>(fy);
    const double tx = smoothstep(x - fx);
    const double ty = smoothstep(y - fy);
    const double v00 = lattice_value(seed, xi, yi);
    const double v10 = lattice_value(seed, xi + 1, yi);
    const double v01 = lattice_value(seed, xi, yi + 1);
    const double v11 = lattice_value(seed, xi + 1, yi + 1);
    const double top = v00 + (v10 - v00) * tx;
    const double bot = v01 + (v11 - v01) * tx;
    return top + (bot - top) * ty;
}

/// Layered value noise in [0,1]; persistence grows with roughness so rough
/// terrain keeps more high-frequency detail.
double fbm(uint64_t seed, double x, double y, double roughness) {
    const int octaves = 4;
    const double persistence = 0.35 + 0.45 * roughness;
    double amplitude = 1.0;
    double total_amplitude = 0.0;
    double sum = 0.0;
    double fx = x;
    double fy = y;
    for (int o = 0; o < octaves; ++o) {
        sum += amplitude * value_noise(seed + 101 * o, fx, fy);
        total_amplitude += amplitude;
        amplitude *= persistence;
        fx *= 2.0;
        fy *= 2.0;
    }
    return sum / total_amplitude;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

constexpr double kMaxSkyFraction = 0.8;
constexpr double kBigRockRadius = 3.0;

double pitch_norm(const SceneConfig& c) {
    const auto& ranges = scene_field_ranges();
    return (c.camera_pitch - ranges[0].lo) / (ranges[0].hi - ranges[0].lo);
}

/// Horizon line (fractional row) for a column; rows above it are sky.
/// Monotone in camera_pitch since the wiggle term does not depend on it.
/// The steep response keeps typical pitches to ground-hugging frames with at
/// most a sliver of sky; panoramic or sky-dominated framings require pushing
/// the pitch toward the top of its range.
double horizon_row(const SceneConfig& c, uint64_t seed, int h, int col) {
    const double p = pitch_norm(c);
    const double p4 = p * p * p * p;
    const double base = h * kMaxSkyFraction * p4 * p4 * p4;
    const double amp = 3.0 * c.terrain_roughness;
    const double wiggle = (value_noise(derive_seed(seed, "horizon"), col * 0.11, 0.0) - 0.5) * 2.0 * amp;
    return std::clamp(base + wiggle, 0.0, static_cast<double>(h));
}

}  // namespace

void validate_genome(const Genome& g, int expected_length) {
    if (expected_length >= 0 && static_cast<int>(g.genes.size()) != expected_length) {
        throw std::invalid_argument("genome length " + std::to_string(g.genes.size()) +
                                    " != expected " + std::to_string(expected_length));
    }
    for (double v : g.genes) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("gene outside [0,1]: " + std::to_string(v));
        }
    }
}

const std::vector<FieldRange>& scene_field_ranges() {
    static const std::vector<FieldRange> ranges = {
        {"camera_pitch", 0.0, 0.9},
        {"lateral_offset", -8.0, 8.0},
        {"terrain_roughness", 0.0, 1.0},
        {"rock_density", 0.0, 16.0},
        {"rock_size_scale", 0.5, 2.5},
        {"sand_coverage", 0.0, 1.0},
        {"bedrock_exposure", 0.0, 1.0},
        {"illumination_angle", 0.0, 3.14159265358979323846},
    };
    return ranges;
}

SceneConfig genome_to_scene(const Genome& g) {
    validate_genome(g, kSceneGenomeLength);
    const auto& ranges = scene_field_ranges();
    auto map = [&](int i) { return ranges[i].lo + (ranges[i].hi - ranges[i].lo) * g.genes[i]; };
    SceneConfig c;
    c.camera_pitch = map(0);
    c.lateral_offset = map(1);
    c.terrain_roughness = map(2);
    c.rock_density = map(3);
    c.rock_size_scale = map(4);
    c.sand_coverage = map(5);
    c.bedrock_exposure = map(6);
    c.illumination_angle = map(7);
    return c;
}

RenderTrace render_scene_traced(const SceneConfig& config, uint64_t seed, int h, int w) {
    RenderTrace trace;
    LabeledScene& scene = trace.scene;
    scene.config = config;
    scene.seed = seed;
    scene.image = Image(h, w);
    scene.mask = Mask(h, w, kSoil);

    const uint64_t terrain_seed = derive_seed(seed, "terrain");
    const uint64_t texture_seed = derive_seed(seed, "texture");
    const double freq = 0.06;
    const double xshift = config.lateral_offset;

    std::vector<double> horizon(w);
    for (int c = 0; c < w; ++c) horizon[c] = horizon_row(config, seed, h, c);

    // Ground classes from the terrain field: high ground exposes bedrock,
    // basins collect sand, the rest is soil. The quartic response keeps
    // moderate settings mostly soil; broad sand fields and bedrock shelves
    // appear only toward the top of each range.
    const double sand4 = std::pow(config.sand_coverage, 4.0);
    const double bed4 = std::pow(config.bedrock_exposure, 4.0);
    const double bedrock_cut = 1.0 - 0.50 * bed4;
    const double sand_cut = 0.55 * sand4;
    std::vector<double> height(static_cast<size_t>(h) * w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double u = fbm(terrain_seed, (c + xshift) * freq, r * freq,
                                 config.terrain_roughness);
            height[static_cast<size_t>(r) * w + c] = u;
            if (r < horizon[c]) {
                scene.mask.at(r, c) = kSky;
            } else if (u >= bedrock_cut) {
                scene.mask.at(r, c) = kBedrock;
            } else if (u <= sand_cut) {
                scene.mask.at(r, c) = kSand;
            } else {
                scene.mask.at(r, c) = kSoil;
            }
        }
    }

    // Rock blobs. Count scales with density per 64x64 tile, with a convex
    // response so rock fields stay sparse until the density setting is pushed
    // high; each blob is an ellipse clipped to the ground region and
    // registered for auditing.
    const double density_norm = config.rock_density / 16.0;
    const double density_response = std::pow(density_norm, 2.5);
    const int rock_count = static_cast<int>(std::lround(
        16.0 * density_response * (static_cast<double>(h) * w) / 4096.0));
    const double cos_ill = std::cos(config.illumination_angle);
    const double sin_ill = std::sin(config.illumination_angle);
    std::vector<uint8_t> shadow(static_cast<size_t>(h) * w, 0);
    Rng rock_rng(derive_seed(seed, "rocks"));
    for (int i = 0; i < rock_count; ++i) {
        const double cx = rock_rng.uniform(0.0, w);
        const double rx = (0.8 + 2.2 * rock_rng.uniform()) * config.rock_size_scale;
        const double ry = (0.8 + 2.2 * rock_rng.uniform()) * config.rock_size_scale;
        const int col = std::clamp(static_cast<int>(cx), 0, w - 1);
        const double ground_top = horizon[col];
        if (ground_top >= h - 1.0) continue;  // no ground at this column
        const double cy = rock_rng.uniform(ground_top, static_cast<double>(h));

        RockBlob blob;
        blob.cx = cx;
        blob.cy = cy;
        blob.rx = rx;
        blob.ry = ry;
        blob.scene_class = (std::max(rx, ry) >= kBigRockRadius) ? kBigRock : kSmallRock;
        trace.blobs.push_back(blob);

        const int r0 = std::max(0, static_cast<int>(std::floor(cy - ry)));
        const int r1 = std::min(h - 1, static_cast<int>(std::ceil(cy + ry)));
        const int c0 = std::max(0, static_cast<int>(std::floor(cx - rx)));
        const int c1 = std::min(w - 1, static_cast<int>(std::ceil(cx + rx)));
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                const double dy = (r - cy) / ry;
                const double dx = (c - cx) / rx;
                if (dy * dy + dx * dx <= 1.0 && r >= horizon[c]) {
                    scene.mask.at(r, c) = blob.scene_class;
                }
            }
        }

        // Cast shadow: a displaced ellipse on the sun-away side of the blob.
        const double sx = cx + 1.3 * rx * cos_ill;
        const double sy = cy + 0.6 * ry * std::abs(sin_ill) + 0.4 * ry;
        const int sr0 = std::max(0, static_cast<int>(std::floor(sy - ry)));
        const int sr1 = std::min(h - 1, static_cast<int>(std::ceil(sy + ry)));
        const int sc0 = std::max(0, static_cast<int>(std::floor(sx - rx)));
        const int sc1 = std::min(w - 1, static_cast<int>(std::ceil(sx + rx)));
        for (int r = sr0; r <= sr1; ++r) {
            for (int c = sc0; c <= sc1; ++c) {
                const double dy = (r - sy) / ry;
                const double dx = (c - sx) / rx;
                if (dy * dy + dx * dx <= 1.0 && r >= horizon[c]) {
                    shadow[static_cast<size_t>(r) * w + c] = 1;
                }
            }
        }
    }

    // Shade the image from class base levels, terrain slope, illumination and
    // rock shadows. Texture strength grows quadratically with roughness so
    // smooth terrain stays clean while rough terrain turns visibly gritty.
    const double rough2 = config.terrain_roughness * config.terrain_roughness;
    const double texture_amp = 0.01 + 0.18 * rough2 * rough2;
    auto height_at = [&](int r, int c) {
        r = std::clamp(r, 0, h - 1);
        c = std::clamp(c, 0, w - 1);
        return height[static_cast<size_t>(r) * w + c];
    };
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const uint8_t cls = scene.mask.at(r, c);
            double v = 0.0;
            if (cls == kSky) {
                const double hor = std::max(horizon[c], 1.0);
                v = 0.96 - 0.04 * (r / hor) + 0.02 * cos_ill;
            } else {
                static constexpr double kBase[5] = {0.45, 0.62, 0.72, 0.34, 0.30};
                v = kBase[cls];
                const double slope_x = height_at(r, c + 1) - height_at(r, c - 1);
                const double slope_y = height_at(r + 1, c) - height_at(r - 1, c);
                v += 0.18 * (height_at(r, c) - 0.5);
                v += 0.38 * (slope_x * cos_ill + slope_y * sin_ill);
                v += texture_amp *
                     (value_noise(texture_seed, (c + xshift) * 0.55, r * 0.55) - 0.5);
                if (shadow[static_cast<size_t>(r) * w + c]) v *= 0.45;
            }
            scene.image.at(r, c) = clamp01(v);
        }
    }
    return trace;
}

LabeledScene render_scene(const SceneConfig& config, uint64_t seed, int h, int w) {
    return render_scene_traced(config, seed, h, w).scene;
}

double sky_proportion(const Mask& mask) {
    if (mask.data.empty()) throw std::invalid_argument("sky_proportion: empty mask");
    size_t sky = 0;
    for (uint8_t v : mask.data) sky += (v == kSky);
    return static_cast<double>(sky) / static_cast<double>(mask.size());
}

TransformId parse_transform_id(const std::string& name) {
    if (name == "identity") return TransformId::kIdentity;
    if (name == "style-perturb") return TransformId::kStylePerturb;
    throw std::invalid_argument("unknown realism transform: " + name);
}

std::string transform_id_name(TransformId id) {
    switch (id) {
        case TransformId::kIdentity: return "identity";
        case TransformId::kStylePerturb: return "style-perturb";
    }
    throw std::logic_error("unreachable");
}

Image apply_realism_transform(const Image& image, TransformId transform, uint64_t seed) {
    if (transform == TransformId::kIdentity) return image;

    // Seeded global tone curve. A spatially uniform remap restyles the frame
    // while leaving local contrast ordering — and thus scene semantics —
    // intact.
    Rng rng(derive_seed(seed, "style"));
    const double gamma = 0.97 + 0.06 * rng.uniform();
    const double gain = 0.99 + 0.02 * rng.uniform();
    Image out(image.h, image.w);
    for (int r = 0; r < image.h; ++r) {
        for (int c = 0; c < image.w; ++c) {
            const double v = gain * std::pow(std::max(image.at(r, c), 0.0), gamma);
            out.at(r, c) = clamp01(v);
        }
    }
    return out;
}

Image apply_realism_transform(const Image& image, const std::string& transform, uint64_t seed) {
    return apply_realism_transform(image, parse_transform_id(transform), seed);
}

}  // namespace orbit::sim
