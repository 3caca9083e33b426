#include <cmath>
#include <random>

#include "doctest.h"
#include "msgf/error.hpp"
#include "msgf/fusenet.hpp"
#include "msgf/gradcheck.hpp"
#include "msgf/tensor_io.hpp"
#include "test_support.hpp"

using namespace msgf;
using msgf::test::max_abs_diff;
using msgf::test::random_leaf;
using msgf::test::random_tensor;
using msgf::test::small_config;
using msgf::test::small_sample;

namespace {

void zero(std::initializer_list<ConvLayer*> layers) {
  for (ConvLayer* c : layers) {
    c->kernel.mutable_value().fill(0.0);
    c->bias.mutable_value().fill(0.0);
  }
}

}  // namespace

TEST_CASE("encoder") {
  FusionModel m(small_config());
  const std::size_t c = m.config().channels;
  std::mt19937_64 rng(1);

  SUBCASE("shape and range") {
    Var psi = encode_image(Var::constant(random_tensor({8, 8}, rng)), m);
    CHECK(psi.shape() == Shape{c, 8, 8});
    for (double x : psi.value().data()) CHECK(std::fabs(x) < 1.0);
    CHECK_THROWS_AS(encode_image(Var::constant(Tensor({2, 8, 8})), m), ShapeError);
  }
  SUBCASE("zero weights") {
    for (auto& l : m.encoder) zero({&l});
    Var psi = encode_image(Var::constant(random_tensor({8, 8}, rng)), m);
    for (double x : psi.value().data()) CHECK(x == 0.0);
  }
  SUBCASE("translation equivariance away from the border") {
    const std::size_t n = 16;
    Tensor a = random_tensor({n, n}, rng);
    Tensor s({n, n});
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 1; x < n; ++x) s.at(y, x) = a.at(y, x - 1);
    const Tensor pa = encode_image(Var::constant(a), m).value();
    const Tensor ps = encode_image(Var::constant(s), m).value();
    // Three 3x3 layers see a radius of 3 pixels.
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 3; y < n - 3; ++y)
        for (std::size_t x = 4; x < n - 3; ++x)
          CHECK(std::fabs(ps.at(ch, y, x) - pa.at(ch, y, x - 1)) < 1e-14);
  }
  SUBCASE("gradient to the first kernel") {
    Var img = Var::constant(random_tensor({8, 8}, rng));
    const Tensor w = random_tensor({c, 8, 8}, rng);
    Var params[] = {m.encoder[0].kernel};
    GradCheckOptions opts;
    opts.max_coords = 12;
    auto r = check_gradients([&] { return sum(hadamard(encode_image(img, m), Var::constant(w))); },
                             params, opts);
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("affine head") {
  FusionModel m(small_config());
  const std::size_t c = m.config().channels;
  std::mt19937_64 rng(2);
  Var ir = Var::constant(random_tensor({c, 6, 6}, rng)), vi = Var::constant(random_tensor({c, 6, 6}, rng));

  SUBCASE("lambda ignores the infrared features") {
    Var other = Var::constant(random_tensor({c, 6, 6}, rng));
    CHECK(affine_params(ir, vi, m).lambda.value() == affine_params(other, vi, m).lambda.value());
    CHECK(affine_params(ir, vi, m).mu.value() == affine_params(ir, other, m).mu.value());
  }
  SUBCASE("zero mu network") {
    zero({&m.mu.hidden, &m.mu.out});
    auto ap = affine_params(ir, vi, m);
    for (double x : ap.mu.value().data()) CHECK(x == 0.0);
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(affine_params(ir, Var::constant(Tensor({c, 5, 6})), m), ShapeError);
  }
  SUBCASE("gradient") {
    Var a = random_leaf({c, 4, 4}, rng), b = random_leaf({c, 4, 4}, rng);
    const Tensor w = random_tensor({c, 4, 4}, rng);
    Var params[] = {a, b};
    auto r = check_gradients(
        [&] {
          auto ap = affine_params(a, b, m);
          return sum(hadamard(add(ap.mu, square(ap.lambda)), Var::constant(w)));
        },
        params);
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("fuse_features") {
  FusionModel m(small_config());
  const std::size_t c = m.config().channels, d = m.config().d;
  std::mt19937_64 rng(3);
  Var mu = Var::constant(random_tensor({c, 5, 5}, rng));
  Var lambda = Var::constant(random_tensor({c, 5, 5}, rng));

  SUBCASE("unit mu and zero lambda reproduce the projected embedding") {
    Var e = Var::constant(random_tensor({d}, rng));
    Tensor out = fuse_features(Var::constant(Tensor({c, 5, 5}, 1.0)), Var::constant(Tensor({c, 5, 5})),
                               e, m).value();
    for (std::size_t ch = 0; ch < c; ++ch) {
      double proj = m.e_proj_b.value()[ch];
      for (std::size_t k = 0; k < d; ++k) proj += m.e_proj_w.value().at(ch, k) * e.value()[k];
      for (std::size_t y = 0; y < 5; ++y)
        for (std::size_t x = 0; x < 5; ++x) CHECK(std::fabs(out.at(ch, y, x) - proj) < 1e-12);
    }
  }
  SUBCASE("a zero projection leaves lambda") {
    m.e_proj_w.mutable_value().fill(0.0);
    m.e_proj_b.mutable_value().fill(0.0);
    CHECK(fuse_features(mu, lambda, Var::constant(random_tensor({d}, rng)), m).value() ==
          lambda.value());
  }
  SUBCASE("affine in the embedding") {
    for (int trial = 0; trial < 20; ++trial) {
      const Tensor e1 = random_tensor({d}, rng), e2 = random_tensor({d}, rng);
      const double a = std::uniform_real_distribution<double>(-2, 2)(rng);
      Tensor mix({d});
      for (std::size_t k = 0; k < d; ++k) mix[k] = a * e1[k] + (1 - a) * e2[k];
      const Tensor f1 = fuse_features(mu, lambda, Var::constant(e1), m).value();
      const Tensor f2 = fuse_features(mu, lambda, Var::constant(e2), m).value();
      const Tensor fm = fuse_features(mu, lambda, Var::constant(mix), m).value();
      double worst = 0;
      for (std::size_t i = 0; i < fm.numel(); ++i)
        worst = std::max(worst, std::fabs(fm[i] - (a * f1[i] + (1 - a) * f2[i])));
      CHECK(worst < 1e-12);
    }
  }
}

TEST_CASE("decoder") {
  FusionModel m(small_config());
  const std::size_t c = m.config().channels;
  std::mt19937_64 rng(4);
  Var psi = Var::constant(random_tensor({c, 7, 5}, rng, 3.0));
  Tensor img = decode_image(psi, m).value();
  CHECK(img.shape() == Shape{7, 5});
  for (double x : img.data()) CHECK((x > 0.0 && x < 1.0));

  zero({&m.dec1, &m.dec2});
  const Tensor half = decode_image(psi, m).value();
  for (double x : half.data()) CHECK(x == 0.5);
}

TEST_CASE("fuse_pair") {
  FusionModel m(small_config());
  const DataSample s = small_sample();
  std::vector<std::string> warnings;
  ImageGray a = fuse_pair(s.ir, s.vi, s.annotation, s.regions, m, {}, &warnings);
  ImageGray b = fuse_pair(s.ir, s.vi, s.annotation, s.regions, m);
  CHECK(a == b);
  CHECK(a.width == s.ir.width);
  CHECK(a.height == s.ir.height);
  CHECK_NOTHROW(a.validate());

  ImageGray smaller(s.ir.width - 1, s.ir.height, 0.5);
  CHECK_THROWS_AS(fuse_pair(smaller, s.vi, s.annotation, s.regions, m), ShapeError);

  RegionSet none;
  none.feature_map = s.regions.feature_map;
  std::vector<std::string> w2;
  ImageGray c = fuse_pair(s.ir, s.vi, s.annotation, none, m, {}, &w2);
  CHECK(c.width == s.ir.width);
  bool flagged = false;
  for (const auto& w : w2) flagged |= w.find("no regions") != std::string::npos;
  CHECK(flagged);

  BranchFlags off;
  off.tsg = off.vsg = off.msgha = false;
  CHECK_NOTHROW(fuse_pair(s.ir, s.vi, s.annotation, s.regions, m, off));
}

TEST_CASE("checkpoints") {
  RunConfig cfg = small_config();
  cfg.seed = 9;
  FusionModel m(cfg);
  std::mt19937_64 rng(5);
  for (auto& p : m.store().params()) p.var.mutable_value() = random_tensor(p.var.shape(), rng);

  test::TempDir tmp;
  save_checkpoint(m, tmp / "model.ckpt");
  FusionModel back = load_checkpoint(tmp / "model.ckpt");
  CHECK(back.config() == m.config());
  REQUIRE(back.store().params().size() == m.store().params().size());
  for (std::size_t i = 0; i < m.store().params().size(); ++i) {
    CHECK(back.store().params()[i].name == m.store().params()[i].name);
    CHECK(back.store().params()[i].var.value() == m.store().params()[i].var.value());
  }
  const DataSample s = small_sample();
  CHECK(fuse_pair(s.ir, s.vi, s.annotation, s.regions, m) ==
        fuse_pair(s.ir, s.vi, s.annotation, s.regions, back));

  const std::string bytes = encode_checkpoint(m);
  CHECK_THROWS_AS(decode_checkpoint("XXXXXXXX" + bytes.substr(8)), ParseError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, 12)), ParseError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 10)), Error);
  std::string flipped = bytes;
  flipped[20] = '#';
  CHECK_THROWS_AS(decode_checkpoint(flipped), Error);

  RunConfig wider = cfg;
  wider.d = 12;
  const std::string other = encode_checkpoint(FusionModel(wider));
  // Splice the smaller manifest onto the wider blobs: shapes no longer match.
  std::uint64_t len = 0;
  for (int b = 0; b < 8; ++b) len |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 + b])) << (8 * b);
  std::uint64_t olen = 0;
  for (int b = 0; b < 8; ++b) olen |= static_cast<std::uint64_t>(static_cast<unsigned char>(other[8 + b])) << (8 * b);
  const std::string spliced = bytes.substr(0, 16 + len) + other.substr(16 + olen);
  CHECK_THROWS_AS(decode_checkpoint(spliced), Error);
}

TEST_CASE("end-to-end gradient to an encoder weight") {
  FusionModel m(small_config());
  const DataSample s = small_sample();
  Var ir = Var::constant(s.ir.to_tensor()), vi = Var::constant(s.vi.to_tensor());
  std::mt19937_64 rng(6);
  const Tensor w = random_tensor({s.ir.height, s.ir.width}, rng);
  Var params[] = {m.encoder[2].kernel, m.e_proj_w};
  GradCheckOptions opts;
  opts.max_coords = 6;
  auto r = check_gradients(
      [&] {
        return sum(hadamard(fuse_forward(ir, vi, s.annotation, s.regions, m).image, Var::constant(w)));
      },
      params, opts);
  CHECK(r.max_rel_error < 1e-5);
}
