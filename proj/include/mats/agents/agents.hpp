#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mats/embeddings/tokenize.hpp"
#include "mats/numerics/mlp.hpp"
#include "mats/numerics/tensor.hpp"

namespace mats {

enum class TextRole { expander, architecture, portrait, landscape };
enum class Domain { architecture, portrait, landscape };

std::string_view to_string(TextRole role);
std::string_view to_string(Domain domain);
TextRole parse_text_role(std::string_view name);
Domain parse_domain(std::string_view name);
inline constexpr Domain kDomains[] = {Domain::architecture, Domain::portrait, Domain::landscape};

using TagSet = std::set<std::string>;

struct LexiconEntry {
  std::string phrase;
  Tokens tokens;
  std::vector<std::string> tags;  // 1-3 concept tags
};

struct Lexicon {
  std::vector<LexiconEntry> entries;

  std::size_t size() const { return entries.size(); }
  TagSet all_tags() const;
};

// Line format: `phrase <TAB> tag[,tag...]`, UTF-8. Blank lines and lines
// starting with '#' are skipped.
Lexicon parse_lexicon(std::string_view content);
Lexicon load_lexicon(const std::filesystem::path& path);

// ---------------------------------------------------------------- text agents

inline constexpr std::size_t kTextStateDim = 769;  // hashed text embedding + step fraction
inline constexpr double kInitialStopBias = -4.0;

struct TextAgentSpec {
  TextRole role = TextRole::expander;
  Lexicon lexicon;
  MLPParams policy;  // state -> lexicon.size() + 1 logits; the last is "stop"
  std::uint64_t seed = 0;

  std::size_t action_count() const { return lexicon.size() + 1; }
  std::size_t stop_action() const { return lexicon.size(); }
  void validate() const;
};

TextAgentSpec make_text_agent(TextRole role, Lexicon lexicon, std::uint64_t seed,
                              std::size_t hidden = 16);

// Embedding of the current text followed by step / max_steps.
std::vector<double> text_agent_state(const Tokens& current, std::size_t step,
                                     std::size_t max_steps);

struct Sampling {
  // Unset: greedy argmax. Set: categorical sampling at this temperature.
  std::optional<double> temperature;
  std::uint64_t seed = 0;
};

struct EnhanceStep {
  std::vector<double> state;
  std::vector<std::uint8_t> mask;  // 1 = action allowed
  std::size_t action = 0;
  double log_prob = 0.0;
};

struct EnhanceTrace {
  Tokens tokens;
  std::vector<std::size_t> phrases;  // lexicon indices appended, in order
  std::vector<EnhanceStep> steps;
};

// Appends lexicon phrases chosen by the policy until the stop action or
// max_steps. Used phrases are masked out; the prompt is always a prefix of
// the result. Throws EmptyInputError on an empty prompt.
EnhanceTrace enhance_text_trace(const TextAgentSpec& agent, const Tokens& prompt,
                                std::size_t max_steps, const Sampling& sampling = {});
Tokens enhance_text(const TextAgentSpec& agent, const Tokens& prompt, std::size_t max_steps,
                    const Sampling& sampling = {});

struct DomainRouting {
  std::map<Domain, TagSet> keywords;

  static DomainRouting defaults();
  // Domain with the most prompt keyword hits; ties resolve in enum order.
  std::optional<Domain> route(const Tokens& prompt) const;
};

struct TextAgentTeam {
  TextAgentSpec expander;
  TextAgentSpec architecture;
  TextAgentSpec portrait;
  TextAgentSpec landscape;

  const TextAgentSpec& for_domain(Domain d) const;
  TextAgentSpec& for_domain(Domain d);
  TextAgentSpec& for_role(TextRole r);
  const TextAgentSpec& for_role(TextRole r) const;
};

struct MultiAgentOutput {
  Tokens tokens;
  std::optional<Domain> routed;
  std::size_t expander_phrases = 0;
  std::size_t domain_phrases = 0;
  EnhanceTrace expander_trace;
  std::optional<EnhanceTrace> domain_trace;
};

inline constexpr std::size_t kDefaultEnhanceSteps = 16;

// Expander first, then the routed domain agent on the expander's output.
// Domain phrases whose text the expander already appended are dropped.
MultiAgentOutput multi_agent_enhance(const Tokens& prompt, const TextAgentTeam& agents,
                                     const DomainRouting& routing,
                                     std::size_t max_steps = kDefaultEnhanceSteps,
                                     const Sampling& expander_sampling = {},
                                     const Sampling& domain_sampling = {});

// --------------------------------------------------------------- image agents

inline constexpr std::size_t kLatentDim = 32;

struct RendererConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t channels = 3;
};

struct ImageAgentSpec {
  Domain domain = Domain::architecture;
  MLPParams specialized_layer;  // 768 -> kLatentDim
  RendererConfig renderer;
  TagSet lexicon_tags;
  std::uint64_t seed = 0;

  std::string id() const;
};

ImageAgentSpec make_image_agent(Domain domain, TagSet lexicon_tags, std::uint64_t seed,
                                RendererConfig renderer = {});

struct AgentLatent {
  std::vector<double> values;
  std::string agent_id;
};

struct Provenance {
  std::string agent_id;
  std::uint64_t seed = 0;
  std::uint64_t prompt_hash = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct GeneratedImage {
  Tensor pixels;  // H x W x C in [0, 1]
  TagSet concept_tags;
  Provenance provenance;
};

TagSet base_tags(Domain domain);

// z = specialized_layer(features). Features must be 768-long and unit norm.
AgentLatent route_features(const ImageAgentSpec& agent, std::span<const double> text_features);

// Procedural renderer keyed by domain; a zero latent gives the domain's base
// pattern. Tags = base_tags(domain) | (prompt_tags & lexicon_tags).
GeneratedImage generate_image(const ImageAgentSpec& agent, const AgentLatent& latent,
                              const TagSet& prompt_tags);

// Raw procedural renderer, exposed for tests and distractor generation.
Tensor render_domain(Domain domain, std::span<const double> latent, const RendererConfig& config);

// Text-agent adapter settings. Recorded in run configs only; no computation
// reads them.
struct LoRAConfig {
  std::size_t rank = 8;
  double alpha = 32.0;
  double dropout = 0.1;
};

// -------------------------------------------------------------------- loading

struct AgentRoster {
  TextAgentTeam text;
  std::vector<ImageAgentSpec> image;  // architecture, portrait, landscape
  DomainRouting routing;
};

std::filesystem::path default_data_dir();
AgentRoster load_agents(const std::filesystem::path& data_dir, std::uint64_t seed,
                        RendererConfig renderer = {});

}  // namespace mats
