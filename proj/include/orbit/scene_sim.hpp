#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "orbit/grid.hpp"

namespace orbit::sim {

/// Search individual: a fixed-length vector of scene parameters in [0,1]
/// plus the seed that fixes the stochastic details of the rendered scene.
struct Genome {
    std::vector<double> genes;
    uint64_t seed = 0;
};

/// Throws std::invalid_argument when a gene is outside [0,1] or the length
/// differs from expected_length (pass -1 to skip the length check).
void validate_genome(const Genome& g, int expected_length);

/// Simulator parameters the genome maps onto.
struct SceneConfig {
    double camera_pitch = 0.0;        // radians, [0, 0.9]
    double lateral_offset = 0.0;      // meters, [-8, 8]
    double terrain_roughness = 0.0;   // [0, 1]
    double rock_density = 0.0;        // rocks per 64x64 tile, [0, 16]
    double rock_size_scale = 0.0;     // [0.5, 2.5]
    double sand_coverage = 0.0;       // fraction, [0, 1]
    double bedrock_exposure = 0.0;    // fraction, [0, 1]
    double illumination_angle = 0.0;  // radians, [0, pi]
};

/// Number of genes the built-in simulator consumes.
inline constexpr int kSceneGenomeLength = 8;

/// Per-field [lo, hi] bounds, in SceneConfig declaration order.
struct FieldRange {
    const char* name;
    double lo;
    double hi;
};
const std::vector<FieldRange>& scene_field_ranges();

/// Affine map of each gene onto its field's range. Requires exactly
/// kSceneGenomeLength genes, each in [0,1].
SceneConfig genome_to_scene(const Genome& g);

struct LabeledScene {
    Image image;   // intensities in [0,1]
    Mask mask;     // SceneClass indices
    SceneConfig config;
    uint64_t seed = 0;
};

/// Elliptical rock blob painted into the mask; kept so tests can check that
/// every rock-labeled cell lies inside a registered blob.
struct RockBlob {
    double cy = 0.0;
    double cx = 0.0;
    double ry = 0.0;
    double rx = 0.0;
    uint8_t scene_class = kSmallRock;  // kBigRock or kSmallRock
};

struct RenderTrace {
    LabeledScene scene;
    std::vector<RockBlob> blobs;
};

/// Deterministic procedural render: layered value-noise ground classes under
/// a pitch-dependent sky band, with elliptical rock blobs on top. Pure
/// function of (config, seed, height, width).
LabeledScene render_scene(const SceneConfig& config, uint64_t seed,
                          int height = 64, int width = 64);
RenderTrace render_scene_traced(const SceneConfig& config, uint64_t seed,
                                int height = 64, int width = 64);

/// Fraction of cells labeled kSky. Throws on an empty mask.
double sky_proportion(const Mask& mask);

enum class TransformId {
    kIdentity,
    kStylePerturb,
};

TransformId parse_transform_id(const std::string& name);
std::string transform_id_name(TransformId id);

/// Realism-transform stage standing in for the GAN. identity returns the
/// input unchanged; style-perturb applies a seeded tone curve plus a faint
/// texture-noise overlay. Deterministic given (transform, seed).
Image apply_realism_transform(const Image& image, TransformId transform, uint64_t seed);
Image apply_realism_transform(const Image& image, const std::string& transform, uint64_t seed);

}  // namespace orbit::sim
