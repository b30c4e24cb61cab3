#include <algorithm>
#include <cmath>
#include <limits>

#include "mats/agents/agents.hpp"
#include "mats/embeddings/embeddings.hpp"
#include "mats/error.hpp"
#include "mats/numerics/rng.hpp"
#include "mats/numerics/softmax.hpp"

namespace mats {

void TextAgentSpec::validate() const {
  if (lexicon.entries.empty()) throw ConfigError("text agent: empty lexicon");
  policy.validate();
  if (policy.in_dim() != kTextStateDim || policy.out_dim() != action_count())
    throw ConfigError("text agent: policy shape does not match lexicon");
}

TextAgentSpec make_text_agent(TextRole role, Lexicon lexicon, std::uint64_t seed,
                              std::size_t hidden) {
  TextAgentSpec a;
  a.role = role;
  a.seed = seed;
  const std::size_t actions = lexicon.size() + 1;
  a.lexicon = std::move(lexicon);
  a.policy = make_mlp({kTextStateDim, hidden, actions}, {Activation::tanh, Activation::identity},
                      seed);
  a.policy.layers.back().bias.back() = kInitialStopBias;
  a.validate();
  return a;
}

std::vector<double> text_agent_state(const Tokens& current, std::size_t step,
                                     std::size_t max_steps) {
  std::vector<double> s = embed_text(current).values;
  s.push_back(max_steps == 0 ? 0.0
                             : static_cast<double>(step) / static_cast<double>(max_steps));
  return s;
}

EnhanceTrace enhance_text_trace(const TextAgentSpec& agent, const Tokens& prompt,
                                std::size_t max_steps, const Sampling& sampling) {
  if (prompt.empty()) throw EmptyInputError("enhance_text: empty prompt");
  if (max_steps == 0) throw InvalidArgument("enhance_text: max_steps must be >= 1");
  agent.validate();
  if (sampling.temperature && !(*sampling.temperature > 0.0))
    throw InvalidArgument("enhance_text: sampling temperature must be positive");

  EnhanceTrace trace;
  trace.tokens = prompt;
  std::vector<std::uint8_t> mask(agent.action_count(), 1);
  SplitMix64 rng(sampling.seed);
  const double temperature = sampling.temperature.value_or(1.0);

  for (std::size_t step = 0; step < max_steps; ++step) {
    EnhanceStep st;
    st.state = text_agent_state(trace.tokens, step, max_steps);
    st.mask = mask;
    const auto logits = mlp_apply(agent.policy, st.state);
    const auto logp = masked_log_softmax(logits, mask, temperature);
    std::size_t action = agent.stop_action();
    if (sampling.temperature) {
      double u = rng.uniform(), acc = 0.0;
      for (std::size_t i = 0; i < logp.size(); ++i) {
        if (!mask[i]) continue;
        action = i;
        acc += std::exp(logp[i]);
        if (u < acc) break;
      }
    } else {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < logits.size(); ++i)
        if (mask[i] && logits[i] > best) {
          best = logits[i];
          action = i;
        }
    }
    st.action = action;
    st.log_prob = logp[action];
    trace.steps.push_back(std::move(st));
    if (action == agent.stop_action()) break;
    const auto& phrase = agent.lexicon.entries[action].tokens;
    trace.tokens.insert(trace.tokens.end(), phrase.begin(), phrase.end());
    trace.phrases.push_back(action);
    mask[action] = 0;
  }
  return trace;
}

Tokens enhance_text(const TextAgentSpec& agent, const Tokens& prompt, std::size_t max_steps,
                    const Sampling& sampling) {
  return enhance_text_trace(agent, prompt, max_steps, sampling).tokens;
}

DomainRouting DomainRouting::defaults() {
  DomainRouting r;
  r.keywords[Domain::architecture] = {
      "architecture", "building", "castle",   "cathedral", "church", "city",  "fortress",
      "house",        "palace",   "skyline",  "station",   "street", "temple", "tower",
      "bridge",       "skyscraper"};
  r.keywords[Domain::portrait] = {"portrait", "face", "man",   "woman",   "person",
                                  "elder",    "king", "queen", "knight",  "wizard",
                                  "child",    "girl", "boy",   "warrior", "character"};
  r.keywords[Domain::landscape] = {"landscape", "mountain", "lake",  "forest", "valley",
                                   "river",     "ocean",    "vista", "meadow", "desert",
                                   "field",     "sea",      "beach", "canyon", "waterfall"};
  return r;
}

std::optional<Domain> DomainRouting::route(const Tokens& prompt) const {
  std::optional<Domain> best;
  std::size_t best_hits = 0;
  for (Domain d : kDomains) {
    auto it = keywords.find(d);
    if (it == keywords.end()) continue;
    std::size_t hits = 0;
    for (const auto& t : prompt) hits += it->second.contains(t) ? 1 : 0;
    if (hits > best_hits) {
      best_hits = hits;
      best = d;
    }
  }
  return best;
}

const TextAgentSpec& TextAgentTeam::for_domain(Domain d) const {
  switch (d) {
    case Domain::architecture: return architecture;
    case Domain::portrait: return portrait;
    case Domain::landscape: return landscape;
  }
  return architecture;
}

TextAgentSpec& TextAgentTeam::for_domain(Domain d) {
  return const_cast<TextAgentSpec&>(std::as_const(*this).for_domain(d));
}

const TextAgentSpec& TextAgentTeam::for_role(TextRole r) const {
  switch (r) {
    case TextRole::expander: return expander;
    case TextRole::architecture: return architecture;
    case TextRole::portrait: return portrait;
    case TextRole::landscape: return landscape;
  }
  return expander;
}

TextAgentSpec& TextAgentTeam::for_role(TextRole r) {
  return const_cast<TextAgentSpec&>(std::as_const(*this).for_role(r));
}

MultiAgentOutput multi_agent_enhance(const Tokens& prompt, const TextAgentTeam& agents,
                                     const DomainRouting& routing, std::size_t max_steps,
                                     const Sampling& expander_sampling,
                                     const Sampling& domain_sampling) {
  MultiAgentOutput out;
  const auto expanded = enhance_text_trace(agents.expander, prompt, max_steps, expander_sampling);
  out.tokens = expanded.tokens;
  out.expander_phrases = expanded.phrases.size();
  out.routed = routing.route(prompt);
  if (!out.routed) {
    out.expander_trace = expanded;
    return out;
  }

  std::set<std::string> seen;
  for (std::size_t idx : expanded.phrases)
    seen.insert(join(agents.expander.lexicon.entries[idx].tokens));
  const auto& domain_agent = agents.for_domain(*out.routed);
  const auto domain = enhance_text_trace(domain_agent, expanded.tokens, max_steps,
                                         domain_sampling);
  for (std::size_t idx : domain.phrases) {
    const auto& phrase = domain_agent.lexicon.entries[idx].tokens;
    if (!seen.insert(join(phrase)).second) continue;
    out.tokens.insert(out.tokens.end(), phrase.begin(), phrase.end());
    ++out.domain_phrases;
  }
  out.expander_trace = expanded;
  out.domain_trace = domain;
  return out;
}

}  // namespace mats
