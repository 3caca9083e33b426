// Rule-based sentence -> scene graph parser.
//
// Grammar, applied left to right over lexicon tags:
//   - nouns start an object mention; directly adjacent nouns form a compound
//     whose last word is the head ("traffic light");
//   - adjectives seen before a mention become its attributes;
//   - a numeral >= 2 before a plural head expands the mention into that many
//     object nodes and is then dropped;
//   - verbs/prepositions between two mentions form the relation predicate
//     from the current subject to the next mention; a verb moves the subject
//     to that mention, a bare preposition keeps it ("man with a bag walks");
//   - a mention with no predicate in front of it becomes the subject and the
//     head of its clause;
//   - pronouns re-mention the most recently created object;
//   - "X is red": adjectives after a copula-only predicate attach to X when
//     no mention follows before the clause ends ("X is wet and dark" too);
//   - conjunctions end a clause (pending predicate/adjectives are dropped)
//     and hand the subject back to the clause head.

#include <algorithm>
#include <nlohmann/json.hpp>
#include <sstream>

#include "msgf/textsg.hpp"

namespace msgf {

namespace {

constexpr int kMaxExpansion = 12;

struct Builder {
  TextualSceneGraph g;

  std::size_t add_object(std::string phrase) {
    g.objects.push_back(std::move(phrase));
    return g.objects.size() - 1;
  }

  void add_attribute(std::size_t obj, const std::string& phrase) {
    for (auto [o, a] : g.edges_oa)
      if (o == obj && g.attributes[a] == phrase) return;
    g.attributes.push_back(phrase);
    g.edges_oa.emplace_back(obj, g.attributes.size() - 1);
  }

  void add_relation(std::size_t s, const std::string& pred, std::size_t o) {
    if (s == o) return;
    TextualSceneGraph::Relation r{s, pred, o};
    if (std::find(g.relations.begin(), g.relations.end(), r) != g.relations.end()) return;
    g.relations.push_back(std::move(r));
  }
};

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

}  // namespace

const char* warning_name(ParseWarning w) {
  switch (w) {
    case ParseWarning::none: return "none";
    case ParseWarning::no_object: return "no_object";
    case ParseWarning::unresolved_pronoun: return "unresolved_pronoun";
  }
  return "?";
}

std::vector<std::size_t> TextualSceneGraph::attributes_of(std::size_t object) const {
  std::vector<std::size_t> out;
  for (auto [o, a] : edges_oa)
    if (o == object) out.push_back(a);
  return out;
}

TextualSceneGraph parse_text(const Sentence& tokens, const Lexicon& lex) {
  Builder b;
  std::vector<LexEntry> tags;
  tags.reserve(tokens.size());
  for (const auto& t : tokens) tags.push_back(lex.tag(t));

  std::vector<std::string> pending_adjs;
  std::vector<std::string> pending_pred;
  bool pred_copula_only = true;
  bool pred_has_verb = false;
  int pending_count = 0;
  std::vector<std::size_t> subject;
  std::vector<std::size_t> clause_head;
  bool unresolved = false;

  auto reset_pending = [&] {
    pending_adjs.clear();
    pending_pred.clear();
    pred_copula_only = true;
    pred_has_verb = false;
    pending_count = 0;
  };
  auto end_clause = [&] {
    if (!pending_adjs.empty() && !pending_pred.empty() && pred_copula_only)
      for (auto s : subject)
        for (const auto& a : pending_adjs) b.add_attribute(s, a);
    reset_pending();
    subject = clause_head;
  };
  auto mention = [&](const std::vector<std::size_t>& group) {
    if (subject.empty() || pending_pred.empty()) {
      subject = clause_head = group;
    } else {
      const std::string pred = join(pending_pred);
      for (auto s : subject)
        for (auto o : group) b.add_relation(s, pred, o);
      if (pred_has_verb) subject = group;
    }
    reset_pending();
  };
  auto next_is_adj = [&](std::size_t i) {
    for (std::size_t k = i + 1; k < tags.size(); ++k) {
      if (tags[k].pos == Pos::adv) continue;
      return tags[k].pos == Pos::adj;
    }
    return false;
  };

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const LexEntry& e = tags[i];
    switch (e.pos) {
      case Pos::det:
      case Pos::adv:
        break;
      case Pos::num:
        pending_count = e.number;
        break;
      case Pos::adj:
        pending_adjs.push_back(tokens[i]);
        break;
      case Pos::verb:
      case Pos::prep:
        pending_pred.push_back(tokens[i]);
        pred_copula_only = pred_copula_only && e.copula;
        pred_has_verb = pred_has_verb || e.pos == Pos::verb;
        break;
      case Pos::conj:
        if (!pending_adjs.empty() && !pending_pred.empty() && pred_copula_only && next_is_adj(i)) {
          for (auto s : subject)
            for (const auto& a : pending_adjs) b.add_attribute(s, a);
          pending_adjs.clear();
          break;
        }
        end_clause();
        break;
      case Pos::pron: {
        if (b.g.objects.empty()) {
          unresolved = true;
          break;
        }
        const std::size_t target = b.g.objects.size() - 1;
        for (const auto& a : pending_adjs) b.add_attribute(target, a);
        mention({target});
        break;
      }
      case Pos::noun: {
        std::size_t j = i;
        while (j + 1 < tokens.size() && tags[j + 1].pos == Pos::noun) ++j;
        std::vector<std::string> words(tokens.begin() + static_cast<long>(i),
                                       tokens.begin() + static_cast<long>(j));
        words.push_back(tags[j].lemma);
        const std::string phrase = join(words);
        int count = 1;
        if (tags[j].plural && pending_count >= 2 && pending_count <= kMaxExpansion)
          count = pending_count;
        std::vector<std::size_t> group;
        for (int c = 0; c < count; ++c) {
          const std::size_t id = b.add_object(phrase);
          for (const auto& a : pending_adjs) b.add_attribute(id, a);
          group.push_back(id);
        }
        mention(group);
        i = j;
        break;
      }
    }
  }
  end_clause();

  if (b.g.objects.empty())
    b.g.warning = ParseWarning::no_object;
  else if (unresolved)
    b.g.warning = ParseWarning::unresolved_pronoun;
  return std::move(b.g);
}

std::string graph_to_json(const TextualSceneGraph& g) {
  nlohmann::ordered_json doc;
  doc["objects"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < g.objects.size(); ++i) {
    nlohmann::ordered_json o;
    o["phrase"] = g.objects[i];
    o["attributes"] = nlohmann::ordered_json::array();
    for (auto a : g.attributes_of(i)) o["attributes"].push_back(g.attributes[a]);
    doc["objects"].push_back(std::move(o));
  }
  doc["relations"] = nlohmann::ordered_json::array();
  for (const auto& r : g.relations) doc["relations"].push_back({r.subject, r.predicate, r.object});
  if (g.warning != ParseWarning::none) doc["warning"] = warning_name(g.warning);
  return doc.dump();
}

std::string graph_to_dot(const TextualSceneGraph& g, const std::string& name) {
  auto quote = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') out.push_back('\\');
      out.push_back(c);
    }
    return out + "\"";
  };
  std::ostringstream os;
  os << "digraph " << quote(name) << " {\n";
  for (std::size_t i = 0; i < g.objects.size(); ++i)
    os << "  o" << i << " [label=" << quote(g.objects[i]) << ", shape=box];\n";
  for (std::size_t a = 0; a < g.attributes.size(); ++a)
    os << "  a" << a << " [label=" << quote(g.attributes[a]) << ", shape=ellipse];\n";
  for (auto [o, a] : g.edges_oa) os << "  o" << o << " -> a" << a << " [style=dashed];\n";
  for (const auto& r : g.relations)
    os << "  o" << r.subject << " -> o" << r.object << " [label=" << quote(r.predicate) << "];\n";
  os << "}\n";
  return os.str();
}

}  // namespace msgf
