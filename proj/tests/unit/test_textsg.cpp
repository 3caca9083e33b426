#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "msgf/error.hpp"
#include "msgf/gradcheck.hpp"
#include "msgf/textsg.hpp"
#include "test_support.hpp"

using namespace msgf;
using msgf::test::random_leaf;
using msgf::test::random_tensor;

namespace {

using Vec = std::vector<double>;

Vec plain_matvec(const Tensor& w, const Vec& x) {
  Vec y(w.dim(0), 0.0);
  for (std::size_t i = 0; i < w.dim(0); ++i)
    for (std::size_t j = 0; j < w.dim(1); ++j) y[i] += w.at(i, j) * x[j];
  return y;
}

Vec cat(std::initializer_list<Vec> parts) {
  Vec out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

double plain_dot(const Vec& a, const Vec& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Vec vec_of(const Var& v) { return v.value().vector(); }

struct Fixture {
  ParamStore store;
  Initializer init{7};
  Vocabulary vocab = Vocabulary::from_lexicon();
  TextGraphParams p;
  std::size_t d = 6;

  Fixture() { p = make_text_params(store, init, vocab.size(), d); }
};

TextualSceneGraph parse(const std::string& s) { return parse_text(tokenize(s)); }

}  // namespace

TEST_CASE("parser: spec sentences") {
  auto g = parse("red car");
  REQUIRE(g.objects == std::vector<std::string>{"car"});
  REQUIRE(g.attributes == std::vector<std::string>{"red"});
  CHECK(g.attributes_of(0) == std::vector<std::size_t>{0});
  CHECK(g.relations.empty());

  g = parse("girl walking on road");
  REQUIRE(g.objects == std::vector<std::string>{"girl", "road"});
  REQUIRE(g.relations.size() == 1);
  CHECK(g.relations[0] == TextualSceneGraph::Relation{0, "walking on", 1});

  g = parse("two cars");
  CHECK(g.objects == std::vector<std::string>{"car", "car"});
  CHECK(g.attributes.empty());
  CHECK(g.relations.empty());
}

TEST_CASE("parser: pronouns, copulas and warnings") {
  auto g = parse("a dog sits under the tree and it is black");
  CHECK(g.objects == std::vector<std::string>{"dog", "tree"});
  CHECK(g.attributes_of(1).size() == 1);

  g = parse("it is dark");
  CHECK(g.empty());
  CHECK(g.warning == ParseWarning::no_object);

  g = parse("it is parked near the car");
  CHECK(g.objects == std::vector<std::string>{"car"});
  CHECK(g.warning == ParseWarning::unresolved_pronoun);

  g = parse("the car is red");
  CHECK(g.attributes == std::vector<std::string>{"red"});

  g = parse("traffic lights above the road");
  CHECK(g.objects == std::vector<std::string>{"traffic light", "road"});
}

TEST_CASE("parser: relations have no self loops or duplicates") {
  auto g = parse("a man near a car near a car and it is near it");
  for (const auto& r : g.relations) CHECK(r.subject != r.object);
  for (std::size_t i = 0; i < g.relations.size(); ++i)
    for (std::size_t j = i + 1; j < g.relations.size(); ++j)
      CHECK_FALSE(g.relations[i] == g.relations[j]);
}

TEST_CASE("parser: total and deterministic on random token lists") {
  const auto words = Lexicon::builtin().words();
  std::mt19937_64 rng(3);
  const std::vector<std::string> junk{"zzz", "qwerty", "123", "99999999", "xs", "ing"};
  for (int trial = 0; trial < 500; ++trial) {
    Sentence s;
    const std::size_t n = rng() % 14;
    for (std::size_t k = 0; k < n; ++k)
      s.push_back(rng() % 5 == 0 ? junk[rng() % junk.size()] : words[rng() % words.size()]);
    TextualSceneGraph a, b;
    REQUIRE_NOTHROW(a = parse_text(s));
    b = parse_text(s);
    CHECK(graph_to_json(a) == graph_to_json(b));
    for (auto [o, at] : a.edges_oa) {
      CHECK(o < a.objects.size());
      CHECK(at < a.attributes.size());
    }
    for (const auto& r : a.relations) {
      CHECK(r.subject < a.objects.size());
      CHECK(r.object < a.objects.size());
    }
    CHECK((a.empty() == (a.warning == ParseWarning::no_object)));
  }
}

TEST_CASE("parser: corpus matches golden graphs") {
  std::ifstream corpus(test::data_dir() / "parser_corpus.txt");
  std::ifstream golden(test::data_dir() / "parser_golden.jsonl");
  REQUIRE(corpus);
  REQUIRE(golden);
  std::string sentence, expected;
  std::size_t n = 0;
  while (std::getline(corpus, sentence)) {
    REQUIRE(std::getline(golden, expected));
    CAPTURE(sentence);
    CHECK(graph_to_json(parse(sentence)) == expected);
    ++n;
  }
  CHECK(n == 30);
}

TEST_CASE("graph serialization") {
  auto g = parse("a white truck parked behind a bus");
  CHECK(graph_to_json(g) ==
        R"({"objects":[{"phrase":"truck","attributes":["white"]},{"phrase":"bus","attributes":[]}],"relations":[[0,"parked behind",1]]})");
  const std::string dot = graph_to_dot(g, "s");
  CHECK(dot.rfind("digraph \"s\"", 0) == 0);
  CHECK(dot.find("parked behind") != std::string::npos);
}

TEST_CASE("vocabulary reserves the unknown index") {
  Vocabulary v = Vocabulary::from_lexicon();
  CHECK(v.index("definitelynotaword") == Vocabulary::kUnknown);
  CHECK(v.index("car") != Vocabulary::kUnknown);
  CHECK(v.words()[Vocabulary::kUnknown] == "<unk>");
}

TEST_CASE("encode_phrase") {
  Fixture f;
  CHECK_THROWS_AS(encode_phrase(Sentence{}, f.vocab, f.p), ContractError);

  Var one = encode_phrase(Sentence{"car"}, f.vocab, f.p);
  Var direct = gru_cell(embedding_lookup(f.p.embedding, f.vocab.index("car")),
                        Var::constant(Tensor({f.d})), f.p.gru);
  CHECK(one.value() == direct.value());

  Var ab = encode_phrase(Sentence{"red", "car"}, f.vocab, f.p);
  Var ba = encode_phrase(Sentence{"car", "red"}, f.vocab, f.p);
  CHECK(test::max_abs_diff(ab.value(), ba.value()) > 1e-6);

  for (auto& np : f.store.params()) np.var.mutable_value().fill(0.0);
  CHECK(encode_phrase(Sentence{"a", "red", "car"}, f.vocab, f.p).value() == Tensor({f.d}, 0.0));
}

TEST_CASE("oa_attend: trivial weights") {
  Fixture f;
  std::mt19937_64 rng(4);
  TextualSceneGraph g;
  g.objects = {"o0", "o1"};
  g.attributes = {"a", "b", "c"};
  g.edges_oa = {{0, 0}, {1, 1}, {1, 2}};
  EmbeddedTextGraph h;
  h.objects = {random_leaf({f.d}, rng), random_leaf({f.d}, rng)};
  Var shared = random_leaf({f.d}, rng);
  h.attributes = {random_leaf({f.d}, rng), shared, shared};
  auto out = oa_attend(g, h, f.p);
  CHECK(out.weights[0].value() == Tensor::vec({1.0}));
  CHECK(std::fabs(out.weights[1].value()[0] - 0.5) < 1e-15);
  CHECK(std::fabs(out.weights[1].value()[1] - 0.5) < 1e-15);

  TextualSceneGraph lone;
  lone.objects = {"o"};
  EmbeddedTextGraph hl;
  hl.objects = {h.objects[0]};
  auto iso = oa_attend(lone, hl, f.p);
  CHECK_FALSE(iso.weights[0].defined());
  CHECK(iso.embeddings[0].value() == matvec(f.p.w_g, h.objects[0]).value());
}

TEST_CASE("oa_attend: three attributes vs a scalar transcription") {
  Fixture f;
  std::mt19937_64 rng(5);
  TextualSceneGraph g;
  g.objects = {"o"};
  g.attributes = {"a", "b", "c"};
  g.edges_oa = {{0, 0}, {0, 1}, {0, 2}};
  EmbeddedTextGraph h;
  h.objects = {random_leaf({f.d}, rng)};
  for (int k = 0; k < 3; ++k) h.attributes.push_back(random_leaf({f.d}, rng));
  auto out = oa_attend(g, h, f.p);

  const Tensor& wg = f.p.w_g.value();
  const Vec q = vec_of(f.p.q);
  const Vec gi = plain_matvec(wg, vec_of(h.objects[0]));
  Vec scores, gj[3];
  for (int k = 0; k < 3; ++k) {
    gj[k] = plain_matvec(wg, vec_of(h.attributes[k]));
    const double s = plain_dot(q, cat({gi, gj[k]}));
    scores.push_back(s > 0 ? s : 0.2 * s);
  }
  double z = 0;
  for (double s : scores) z += std::exp(s);
  Vec expect(f.d, 0.0);
  for (int k = 0; k < 3; ++k) {
    const double a = std::exp(scores[k]) / z;
    CHECK(std::fabs(out.weights[0].value()[k] - a) < 1e-12);
    for (std::size_t i = 0; i < f.d; ++i) expect[i] += a * gj[k][i];
  }
  for (std::size_t i = 0; i < f.d; ++i)
    CHECK(std::fabs(out.embeddings[0].value()[i] - expect[i]) < 1e-12);
}

TEST_CASE("oo_aggregate: roles and a three-node chain oracle") {
  Fixture f;
  std::mt19937_64 rng(6);
  std::vector<Var> e;
  for (int k = 0; k < 3; ++k) e.push_back(random_leaf({f.d}, rng));

  TextualSceneGraph iso;
  iso.objects = {"a", "b", "c"};
  auto same = oo_aggregate(iso, e, {}, f.p);
  for (int k = 0; k < 3; ++k) CHECK(same[k].value() == e[k].value());

  TextualSceneGraph g;
  g.objects = {"a", "b", "c"};
  g.relations = {{0, "r0", 1}, {1, "r1", 2}};
  std::vector<Var> r{random_leaf({f.d}, rng), random_leaf({f.d}, rng)};
  auto out = oo_aggregate(g, e, r, f.p);

  const Tensor& wa = f.p.w_act.value();
  const Tensor& wp = f.p.w_pas.value();
  const Vec e0 = vec_of(e[0]), e1 = vec_of(e[1]), e2 = vec_of(e[2]);
  const Vec r0 = vec_of(r[0]), r1 = vec_of(r[1]);
  const Vec a0 = plain_matvec(wa, cat({r0, e0, e1}));  // 0 -> 1, active for 0
  const Vec p1 = plain_matvec(wp, cat({r0, e0, e1}));  // 0 -> 1, passive for 1
  const Vec a1 = plain_matvec(wa, cat({r1, e1, e2}));
  const Vec p2 = plain_matvec(wp, cat({r1, e1, e2}));
  for (std::size_t i = 0; i < f.d; ++i) {
    CHECK(std::fabs(out[0].value()[i] - (e0[i] + a0[i])) < 1e-12);
    CHECK(std::fabs(out[1].value()[i] - (e1[i] + a1[i] + p1[i])) < 1e-12);
    CHECK(std::fabs(out[2].value()[i] - (e2[i] + p2[i])) < 1e-12);
  }

  // Zeroing W_P removes any dependence on incoming edges.
  f.p.w_pas.mutable_value().fill(0.0);
  auto no_pas = oo_aggregate(g, e, r, f.p);
  CHECK(no_pas[2].value() == e[2].value());
  f.p.w_act.mutable_value().fill(0.0);
  auto none = oo_aggregate(g, e, r, f.p);
  CHECK(none[0].value() == e[0].value());
}

TEST_CASE("oo_aggregate: mean over multiple outgoing edges") {
  Fixture f;
  std::mt19937_64 rng(7);
  std::vector<Var> e;
  for (int k = 0; k < 3; ++k) e.push_back(random_leaf({f.d}, rng));
  TextualSceneGraph g;
  g.objects = {"a", "b", "c"};
  g.relations = {{0, "x", 1}, {0, "y", 2}};
  std::vector<Var> r{random_leaf({f.d}, rng), random_leaf({f.d}, rng)};
  auto out = oo_aggregate(g, e, r, f.p);
  const Tensor& wa = f.p.w_act.value();
  const Vec e0 = vec_of(e[0]);
  const Vec t1 = plain_matvec(wa, cat({vec_of(r[0]), e0, vec_of(e[1])}));
  const Vec t2 = plain_matvec(wa, cat({vec_of(r[1]), e0, vec_of(e[2])}));
  for (std::size_t i = 0; i < f.d; ++i)
    CHECK(std::fabs(out[0].value()[i] - (e0[i] + 0.5 * (t1[i] + t2[i]))) < 1e-12);
}

TEST_CASE("gpo_pool") {
  Fixture f;
  std::mt19937_64 rng(8);
  CHECK_THROWS_AS(gpo_pool({}, f.p), ContractError);

  Var a = random_leaf({f.d}, rng);
  std::vector<Var> one{a};
  auto p1 = gpo_pool(one, f.p);
  CHECK(p1.pooled.value() == a.value());
  CHECK(p1.weights.value() == Tensor::vec({1.0}));

  std::vector<Var> same{a, a, a};
  CHECK(test::max_abs_diff(gpo_pool(same, f.p).pooled.value(), a.value()) < 1e-15);

  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Var> feats;
    for (int k = 0; k < 4; ++k) feats.push_back(random_leaf({f.d}, rng));
    auto out = gpo_pool(feats, f.p);
    double s = 0;
    for (double w : out.weights.value().data()) {
      CHECK(w >= 0.0);
      s += w;
    }
    CHECK(std::fabs(s - 1.0) < 1e-9);
    for (std::size_t i = 0; i < f.d; ++i) {
      double lo = INFINITY, hi = -INFINITY;
      for (const auto& v : feats) {
        lo = std::min(lo, v.value()[i]);
        hi = std::max(hi, v.value()[i]);
      }
      CHECK(out.pooled.value()[i] >= lo - 1e-12);
      CHECK(out.pooled.value()[i] <= hi + 1e-12);
    }
  }

  std::vector<Var> feats;
  for (int k = 0; k < 3; ++k) feats.push_back(Var::constant(random_tensor({f.d}, rng)));
  const Tensor w = random_tensor({f.d}, rng);
  Var params[] = {f.p.w_p};
  auto r = check_gradients([&] { return dot(gpo_pool(feats, f.p).pooled, Var::constant(w)); },
                           params);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("embed_annotation") {
  Fixture f;
  TextAnnotation a;
  for (auto& o : a.object) o = tokenize("red car");
  a.region = tokenize("red car");
  a.global = tokenize("red car");
  TextTokens t = embed_annotation(a, f.vocab, f.p);
  REQUIRE(t.tokens.shape() == Shape{5, f.d});
  for (std::size_t k = 1; k < 5; ++k) CHECK(row(t.tokens, k).value() == row(t.tokens, 0).value());

  a.region = tokenize("it is dark");
  TextTokens w = embed_annotation(a, f.vocab, f.p);
  CHECK(w.tokens.shape() == Shape{5, f.d});
  CHECK(w.warnings[3] == ParseWarning::no_object);
  CHECK(row(w.tokens, 3).value() == f.p.null_token.value());
}

TEST_CASE("embed_annotation: gradient reaches the word table") {
  ParamStore store;
  Initializer init(9);
  Vocabulary vocab({"<unk>", "a", "red", "car", "on", "road", "two", "trees", "dark"});
  TextGraphParams p = make_text_params(store, init, vocab.size(), 4);
  TextAnnotation a;
  a.object = {tokenize("a red car on road"), tokenize("two trees"), tokenize("car")};
  a.region = tokenize("dark road");
  a.global = tokenize("a car on a road");
  std::mt19937_64 rng(10);
  const Tensor w = random_tensor({5, 4}, rng);
  Var params[] = {p.embedding};
  auto r = check_gradients(
      [&] { return dot(embed_annotation(a, vocab, p).tokens, Var::constant(w)); }, params);
  CHECK(r.max_rel_error < 1e-4);
}
