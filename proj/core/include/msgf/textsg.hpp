#pragma once

// Textual scene graphs: closed-lexicon rule parser, GRU phrase encoder,
// object-attribute attention, directed object-object aggregation and
// attention pooling into one token per sentence.

#include <array>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "msgf/autograd.hpp"
#include "msgf/params.hpp"
#include "msgf/sgio.hpp"

namespace msgf {

enum class Pos { noun, adj, verb, prep, det, num, pron, conj, adv };
const char* pos_name(Pos p);

struct LexEntry {
  Pos pos = Pos::noun;
  std::string lemma;  // singular form for nouns, the word itself otherwise
  bool plural = false;
  int number = 0;     // value for numerals
  bool copula = false;
  bool known = true;  // false when tagged by the fallback suffix rules
};

/// Part-of-speech word list shipped with the library. Word classes are
/// disjoint; unknown words fall back to suffix rules.
class Lexicon {
 public:
  static const Lexicon& builtin();

  LexEntry tag(const std::string& word) const;
  // Every surface form the lexicon knows, sorted.
  std::vector<std::string> words() const;

 private:
  Lexicon();
  std::unordered_map<std::string, LexEntry> entries_;
  std::unordered_map<std::string, std::string> noun_singulars_;  // lemma set
};

enum class ParseWarning { none, no_object, unresolved_pronoun };
const char* warning_name(ParseWarning w);

struct TextualSceneGraph {
  struct Relation {
    std::size_t subject;
    std::string predicate;
    std::size_t object;
    bool operator==(const Relation&) const = default;
  };

  std::vector<std::string> objects;     // object phrases, first-mention order
  std::vector<std::string> attributes;  // attribute phrases (one node per use)
  std::vector<std::pair<std::size_t, std::size_t>> edges_oa;  // (object, attribute)
  std::vector<Relation> relations;      // directed, no self-loops, deduplicated
  ParseWarning warning = ParseWarning::none;

  std::vector<std::size_t> attributes_of(std::size_t object) const;
  bool empty() const { return objects.empty(); }
};

// Deterministic pattern grammar over the lexicon tags. Never throws for any
// token list; a sentence without an object yields an empty graph flagged
// with ParseWarning::no_object.
TextualSceneGraph parse_text(const Sentence& tokens, const Lexicon& lex = Lexicon::builtin());

// Compact JSON: {"objects":[{"phrase":..,"attributes":[..]}],
// "relations":[[subj,"pred",obj]]} plus "warning" when set.
std::string graph_to_json(const TextualSceneGraph& g);
std::string graph_to_dot(const TextualSceneGraph& g, const std::string& name = "tsg");

/// Word index over the lexicon's surface forms; index 0 is the unknown word.
class Vocabulary {
 public:
  static constexpr std::size_t kUnknown = 0;
  static Vocabulary from_lexicon(const Lexicon& lex = Lexicon::builtin());
  explicit Vocabulary(std::vector<std::string> words);

  std::size_t index(const std::string& word) const;
  std::size_t size() const noexcept { return words_.size(); }
  const std::vector<std::string>& words() const noexcept { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct TextGraphParams {
  Var embedding;       // [V x d] word table
  GruParams gru;       // phrase encoder, e = d
  Var w_g;             // [d x d] shared projection of the attribute attention
  Var q;               // [2d] attention vector
  Var w_act;           // [d x 3d] outgoing-edge transform
  Var w_pas;           // [d x 3d] incoming-edge transform
  Var w_p;             // [h x d] pooling projection
  Var b_p;             // [h]
  Var v_p;             // [h] pooling score vector
  Var null_token;      // [d] stands in for an empty sentence graph
  double leaky_slope = kDefaultLeakySlope;
};

TextGraphParams make_text_params(ParamStore& store, Initializer& init, std::size_t vocab_size,
                                 std::size_t d, double leaky_slope = kDefaultLeakySlope);

// GRU over the word embeddings from a zero state; returns the last state.
Var encode_phrase(const Sentence& words, const Vocabulary& vocab, const TextGraphParams& p);
Var encode_phrase(const std::string& phrase, const Vocabulary& vocab, const TextGraphParams& p);

struct EmbeddedTextGraph {
  std::vector<Var> objects;     // h_i
  std::vector<Var> attributes;  // h_j
  std::vector<Var> relations;   // r_ij, aligned with graph.relations
};
EmbeddedTextGraph embed_nodes(const TextualSceneGraph& g, const Vocabulary& vocab,
                              const TextGraphParams& p);

struct AttentionOutput {
  std::vector<Var> embeddings;
  std::vector<Var> weights;  // per object; undefined when it has no attributes
};

// e_i = sum_j alpha_ij W_g h_j over attribute neighbours, alpha from a
// LeakyReLU-scored softmax; objects without attributes keep W_g h_i.
AttentionOutput oa_attend(const TextualSceneGraph& g, const EmbeddedTextGraph& h,
                          const TextGraphParams& p);

// e'_i = e_i + mean_out W_act [r_ij|e_i|e_j] + mean_in W_pas [r_ji|e_j|e_i];
// an empty direction contributes nothing.
std::vector<Var> oo_aggregate(const TextualSceneGraph& g, std::span<const Var> e,
                              std::span<const Var> relation_h, const TextGraphParams& p);

struct PoolOutput {
  Var pooled;   // [d]
  Var weights;  // [N]
};
// Attention pooling; throws ContractError for an empty feature list.
PoolOutput gpo_pool(std::span<const Var> features, const TextGraphParams& p);

struct SentenceEmbedding {
  Var token;  // [d]
  ParseWarning warning = ParseWarning::none;
};
SentenceEmbedding embed_sentence(const Sentence& s, const Vocabulary& vocab,
                                 const TextGraphParams& p);

struct TextTokens {
  Var tokens;  // [5 x d], order obj, obj, obj, reg, glob
  std::array<ParseWarning, 5> warnings{};
};
TextTokens embed_annotation(const TextAnnotation& a, const Vocabulary& vocab,
                            const TextGraphParams& p);

}  // namespace msgf
