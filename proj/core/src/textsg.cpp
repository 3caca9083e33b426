#include "msgf/textsg.hpp"

#include "msgf/error.hpp"

namespace msgf {

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  if (words_.empty()) throw ContractError("vocabulary needs at least the unknown-word slot");
  for (std::size_t i = 1; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], i).second)
      throw ContractError("vocabulary word '" + words_[i] + "' listed twice");
  }
}

Vocabulary Vocabulary::from_lexicon(const Lexicon& lex) {
  std::vector<std::string> words{"<unk>"};
  for (auto& w : lex.words()) words.push_back(std::move(w));
  return Vocabulary(std::move(words));
}

std::size_t Vocabulary::index(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnknown : it->second;
}

TextGraphParams make_text_params(ParamStore& store, Initializer& init, std::size_t vocab_size,
                                 std::size_t d, double leaky_slope) {
  TextGraphParams p;
  p.embedding = store.add("text.embedding", init.normal({vocab_size, d}, 1.0));
  p.gru = make_gru_params(store, init, "text.gru", d, d);
  p.w_g = store.add("text.w_g", init.lecun({d, d}, d));
  p.q = store.add("text.q", init.lecun({2 * d}, 2 * d));
  p.w_act = store.add("text.w_act", init.lecun({d, 3 * d}, 3 * d));
  p.w_pas = store.add("text.w_pas", init.lecun({d, 3 * d}, 3 * d));
  p.w_p = store.add("text.w_p", init.lecun({d, d}, d));
  p.b_p = store.add("text.b_p", Tensor({d}));
  p.v_p = store.add("text.v_p", init.lecun({d}, d));
  p.null_token = store.add("text.null", init.normal({d}, 0.1));
  p.leaky_slope = leaky_slope;
  return p;
}

Var encode_phrase(const Sentence& words, const Vocabulary& vocab, const TextGraphParams& p) {
  if (words.empty()) throw ContractError("encode_phrase: empty phrase");
  const std::size_t d = p.gru.u_z.shape()[0];
  Var h = Var::constant(Tensor({d}));
  for (const auto& w : words) h = gru_cell(embedding_lookup(p.embedding, vocab.index(w)), h, p.gru);
  return h;
}

Var encode_phrase(const std::string& phrase, const Vocabulary& vocab, const TextGraphParams& p) {
  return encode_phrase(tokenize(phrase), vocab, p);
}

EmbeddedTextGraph embed_nodes(const TextualSceneGraph& g, const Vocabulary& vocab,
                              const TextGraphParams& p) {
  EmbeddedTextGraph h;
  for (const auto& o : g.objects) h.objects.push_back(encode_phrase(o, vocab, p));
  for (const auto& a : g.attributes) h.attributes.push_back(encode_phrase(a, vocab, p));
  for (const auto& r : g.relations) h.relations.push_back(encode_phrase(r.predicate, vocab, p));
  return h;
}

AttentionOutput oa_attend(const TextualSceneGraph& g, const EmbeddedTextGraph& h,
                          const TextGraphParams& p) {
  AttentionOutput out;
  for (std::size_t i = 0; i < g.objects.size(); ++i) {
    const Var gi = matvec(p.w_g, h.objects[i]);
    const auto nbrs = g.attributes_of(i);
    if (nbrs.empty()) {
      out.embeddings.push_back(gi);
      out.weights.emplace_back();
      continue;
    }
    std::vector<Var> projected, scores;
    for (auto a : nbrs) {
      Var gj = matvec(p.w_g, h.attributes[a]);
      scores.push_back(leaky_relu(dot(p.q, concat({gi, gj}, 0)), p.leaky_slope));
      projected.push_back(std::move(gj));
    }
    Var alpha = softmax_rows(concat(scores, 0));
    out.embeddings.push_back(matvec(transpose(stack_rows(projected)), alpha));
    out.weights.push_back(std::move(alpha));
  }
  return out;
}

std::vector<Var> oo_aggregate(const TextualSceneGraph& g, std::span<const Var> e,
                              std::span<const Var> relation_h, const TextGraphParams& p) {
  if (e.size() != g.objects.size() || relation_h.size() != g.relations.size())
    throw ContractError("oo_aggregate: embeddings do not match the graph");
  std::vector<Var> out;
  out.reserve(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    std::vector<Var> act, pas;
    for (std::size_t k = 0; k < g.relations.size(); ++k) {
      const auto& r = g.relations[k];
      if (r.subject == i)
        act.push_back(matvec(p.w_act, concat({relation_h[k], e[i], e[r.object]}, 0)));
      if (r.object == i)
        pas.push_back(matvec(p.w_pas, concat({relation_h[k], e[r.subject], e[i]}, 0)));
    }
    Var v = e[i];
    if (!act.empty()) v = add(v, mean_of(act));
    if (!pas.empty()) v = add(v, mean_of(pas));
    out.push_back(std::move(v));
  }
  return out;
}

PoolOutput gpo_pool(std::span<const Var> features, const TextGraphParams& p) {
  if (features.empty()) throw ContractError("gpo_pool: no features to pool");
  std::vector<Var> scores;
  scores.reserve(features.size());
  for (const auto& f : features)
    scores.push_back(dot(p.v_p, tanh(add(matvec(p.w_p, f), p.b_p))));
  Var alpha = softmax_rows(concat(scores, 0));
  return {matvec(transpose(stack_rows(features)), alpha), alpha};
}

SentenceEmbedding embed_sentence(const Sentence& s, const Vocabulary& vocab,
                                 const TextGraphParams& p) {
  const TextualSceneGraph g = parse_text(s);
  if (g.empty()) return {p.null_token, g.warning};
  const EmbeddedTextGraph h = embed_nodes(g, vocab, p);
  const AttentionOutput att = oa_attend(g, h, p);
  const auto enhanced = oo_aggregate(g, att.embeddings, h.relations, p);
  return {gpo_pool(enhanced, p).pooled, g.warning};
}

TextTokens embed_annotation(const TextAnnotation& a, const Vocabulary& vocab,
                            const TextGraphParams& p) {
  TextTokens out;
  std::vector<Var> rows;
  const auto tiers = a.tiers();
  for (std::size_t k = 0; k < tiers.size(); ++k) {
    auto s = embed_sentence(*tiers[k], vocab, p);
    out.warnings[k] = s.warning;
    rows.push_back(std::move(s.token));
  }
  out.tokens = stack_rows(rows);
  return out;
}

}  // namespace msgf
