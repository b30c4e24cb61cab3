#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mats/agents/agents.hpp"

namespace mats {

enum class FusionMethod {
  simple_average,
  weighted_average,
  attention,
  transformer,
  dynamic_weight,
  content_aware
};

inline constexpr FusionMethod kAllFusionMethods[] = {
    FusionMethod::simple_average, FusionMethod::weighted_average, FusionMethod::attention,
    FusionMethod::transformer,    FusionMethod::dynamic_weight,   FusionMethod::content_aware};

std::string_view to_string(FusionMethod method);

// A method plus its configured variant. `neural` parses to dynamic_weight
// with one extra hidden layer in the weight network.
struct FusionSpec {
  FusionMethod method = FusionMethod::simple_average;
  std::size_t extra_layers = 0;
  std::string name;
};

// Throws ConfigError on unknown names.
FusionSpec parse_fusion_spec(std::string_view name);
std::vector<FusionSpec> parse_fusion_list(std::string_view comma_separated);
std::vector<FusionSpec> all_fusion_specs();

struct FusionParams {
  std::uint64_t seed = 0;
  // weighted_average only: bypasses the weight network when set.
  std::optional<std::vector<double>> explicit_weights;
  TagSet prompt_tags;  // content_aware
  std::size_t patch_size = 8;
  std::size_t attention_heads = 4;
  std::size_t attention_layers = 2;
  std::size_t extra_layers = 0;  // dynamic_weight depth override
};

// Global (one weight per input) or per-pixel (one H*W map per input) convex
// weights. Exactly one of the two is populated.
struct FusionWeights {
  std::vector<double> global;
  std::vector<std::vector<double>> per_pixel;
};

struct FusionResult {
  GeneratedImage image;
  FusionWeights weights;
};

// Combines >= 2 same-shaped images. Every method is a per-pixel convex
// combination; results are clamped to the per-pixel input envelope so range
// preservation holds exactly. Output tags are the union of input tags.
FusionResult fuse_with_weights(std::span<const GeneratedImage> images, FusionMethod method,
                               const FusionParams& params = {});
GeneratedImage fuse(std::span<const GeneratedImage> images, FusionMethod method,
                    const FusionParams& params = {});

struct ImageStatistics {
  double contrast = 0.0;     // std of luminance
  double sharpness = 0.0;    // mean gradient magnitude
  double complexity = 0.0;   // normalized 16-bin luminance entropy
  double mean_luminance = 0.0;
};

ImageStatistics image_statistics(const Tensor& pixels);

inline constexpr double kContrastCap = 0.25;
inline constexpr double kSharpnessCap = 0.2;

// 0.5 min(1, contrast / 0.25) + 0.5 min(1, sharpness / 0.2).
double image_quality_score(const Tensor& pixels);
double image_quality_score(const GeneratedImage& image);

struct OverallWeighting {
  double quality = 0.5;
  double similarity = 0.5;
};

// w_q * quality + w_s * similarity; throws ConfigError unless the weights are
// nonnegative and sum to 1.
double overall_score(double quality, double similarity, OverallWeighting weighting = {});

struct FusionReport {
  std::string method;
  double quality = 0.0;
  double similarity = 0.0;
  double overall = 0.0;
  double elapsed_seconds = 0.0;
  std::optional<std::string> error;
};

using SimilarityFn = std::function<double(const GeneratedImage&)>;

// One report per spec, in the given order. A failing method yields a report
// with `error` set; the remaining methods still run.
std::vector<FusionReport> benchmark_fusion(std::span<const GeneratedImage> images,
                                           std::span<const FusionSpec> methods,
                                           const SimilarityFn& similarity,
                                           const FusionParams& params = {},
                                           OverallWeighting weighting = {});

// Header `Method,Quality,Similarity,Overall,TimeSeconds`, values in %.6f.
std::string fusion_reports_csv(std::span<const FusionReport> reports);

}  // namespace mats
