#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mats/agents/agents.hpp"
#include "mats/error.hpp"
#include "mats/numerics/rng.hpp"

#ifndef MATS_DEFAULT_DATA_DIR
#define MATS_DEFAULT_DATA_DIR "data"
#endif

namespace mats {

std::string_view to_string(TextRole role) {
  switch (role) {
    case TextRole::expander: return "expander";
    case TextRole::architecture: return "architecture";
    case TextRole::portrait: return "portrait";
    case TextRole::landscape: return "landscape";
  }
  return "?";
}

std::string_view to_string(Domain domain) {
  switch (domain) {
    case Domain::architecture: return "architecture";
    case Domain::portrait: return "portrait";
    case Domain::landscape: return "landscape";
  }
  return "?";
}

TextRole parse_text_role(std::string_view name) {
  for (auto r : {TextRole::expander, TextRole::architecture, TextRole::portrait,
                 TextRole::landscape})
    if (to_string(r) == name) return r;
  throw ConfigError("unknown text agent role '" + std::string(name) + "'");
}

Domain parse_domain(std::string_view name) {
  for (auto d : kDomains)
    if (to_string(d) == name) return d;
  throw ConfigError("unknown domain '" + std::string(name) + "'");
}

TagSet Lexicon::all_tags() const {
  TagSet tags;
  for (const auto& e : entries) tags.insert(e.tags.begin(), e.tags.end());
  return tags;
}

Lexicon parse_lexicon(std::string_view content) {
  Lexicon lex;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ConfigError("lexicon line " + std::to_string(lineno) + ": missing TAB");
    LexiconEntry e;
    e.phrase = line.substr(0, tab);
    e.tokens = tokenize(e.phrase);
    if (e.tokens.empty())
      throw ConfigError("lexicon line " + std::to_string(lineno) + ": empty phrase");
    std::istringstream tags(line.substr(tab + 1));
    std::string tag;
    while (std::getline(tags, tag, ',')) {
      const auto norm = tokenize(tag);
      if (norm.size() != 1)
        throw ConfigError("lexicon line " + std::to_string(lineno) + ": bad tag '" + tag + "'");
      e.tags.push_back(norm[0]);
    }
    if (e.tags.empty() || e.tags.size() > 3)
      throw ConfigError("lexicon line " + std::to_string(lineno) + ": need 1-3 tags");
    lex.entries.push_back(std::move(e));
  }
  if (lex.entries.empty()) throw ConfigError("lexicon is empty");
  return lex;
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open lexicon " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_lexicon(ss.str());
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("MATS_DATA_DIR"); env && *env) return env;
  return MATS_DEFAULT_DATA_DIR;
}

AgentRoster load_agents(const std::filesystem::path& data_dir, std::uint64_t seed,
                        RendererConfig renderer) {
  auto lex = [&](std::string_view name) {
    return load_lexicon(data_dir / "lexicons" / (std::string(name) + ".tsv"));
  };
  AgentRoster roster;
  auto text = [&](TextRole r) {
    return make_text_agent(r, lex(to_string(r)),
                           derive_seed(seed, {1, static_cast<std::uint64_t>(r)}));
  };
  roster.text.expander = text(TextRole::expander);
  roster.text.architecture = text(TextRole::architecture);
  roster.text.portrait = text(TextRole::portrait);
  roster.text.landscape = text(TextRole::landscape);
  for (Domain d : kDomains)
    roster.image.push_back(make_image_agent(d, roster.text.for_domain(d).lexicon.all_tags(),
                                            derive_seed(seed, {2, static_cast<std::uint64_t>(d)}),
                                            renderer));
  roster.routing = DomainRouting::defaults();
  return roster;
}

}  // namespace mats
