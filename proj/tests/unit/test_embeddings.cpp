#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "mats/error.hpp"
#include "mats/embeddings/embeddings.hpp"
#include "mats/embeddings/tokenize.hpp"
#include "mats/numerics/rng.hpp"
#include "support/golden.hpp"

using namespace mats;

namespace {

Tensor constant_image(double v, std::size_t h = 16, std::size_t w = 16) {
  return Tensor({h, w, 3}, v);
}

Tensor noise_image(std::uint64_t seed, std::size_t h = 32, std::size_t w = 32) {
  SplitMix64 rng(seed);
  Tensor t({h, w, 3});
  for (double& v : t.data()) v = rng.uniform();
  return t;
}

}  // namespace

TEST_CASE("tokenize lowercases, strips punctuation, splits whitespace") {
  CHECK(tokenize("Hello, World!  It's\tfine.") == Tokens{"hello", "world", "its", "fine"});
  CHECK(tokenize("").empty());
  CHECK(tokenize(" ... ").empty());
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("embed_text determinism, norm and errors") {
  const auto a = embed_text("A medieval castle.");
  const auto b = embed_text("a medieval castle");
  CHECK(a.values == b.values);
  CHECK(a.values.size() == kTextDim);
  CHECK(a.source_token_count == 3);
  CHECK(std::abs(l2_norm(a.values) - 1.0) <= 1e-12);
  CHECK_THROWS_AS(embed_text("?!"), EmptyInputError);
  CHECK_THROWS_AS(embed_text(Tokens{}), EmptyInputError);
}

TEST_CASE("embed_text bucket orthogonality") {
  // Find two tokens whose buckets differ; their embeddings are orthogonal.
  const std::string a = "castle";
  std::string b = "lake";
  REQUIRE(text_bucket(a) != text_bucket(b));
  CHECK(cosine_similarity(embed_text(a).values, embed_text(b).values) == 0.0);
  CHECK(embed_text(a).values[text_bucket(a)] == 1.0);
}

TEST_CASE("embed_text golden cosine") {
  const auto g = golden::load();
  const double c = cosine_similarity(embed_text("medieval castle").values,
                                     embed_text("medieval castle on a hill").values);
  CHECK(c == doctest::Approx(g["text_cosine_medieval"].get<double>()).epsilon(1e-12));
  // With five distinct buckets the value is 2 / sqrt(2 * 5).
  CHECK(c == doctest::Approx(2.0 / std::sqrt(10.0)).epsilon(1e-12));
}

TEST_CASE("embed_text is invariant to token order") {
  SplitMix64 rng(3);
  const Tokens vocab{"red", "blue", "tower", "sky", "lake", "old", "man", "glass", "night", "sun"};
  for (int trial = 0; trial < 200; ++trial) {
    Tokens t;
    const std::size_t n = 1 + rng.below(12);
    for (std::size_t i = 0; i < n; ++i) t.push_back(vocab[rng.below(vocab.size())]);
    Tokens shuffled = t;
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
    CHECK(embed_text(t).values == embed_text(shuffled).values);
  }
}

TEST_CASE("extract_image_features") {
  const auto img = noise_image(1);
  const auto f = extract_image_features(img);
  CHECK(f.values.size() == kImageDim);
  CHECK(std::abs(l2_norm(f.values) - 1.0) <= 1e-12);
  CHECK(extract_image_features(img).values == f.values);

  const auto zero = extract_image_features(constant_image(0.0)).values;
  const auto one = extract_image_features(constant_image(1.0)).values;
  double dist = 0.0;
  for (std::size_t i = 0; i < zero.size(); ++i) dist += std::abs(zero[i] - one[i]);
  CHECK(dist > 0.1);

  auto bad = constant_image(0.5);
  bad[4] = 1.5;
  CHECK_THROWS_AS(extract_image_features(bad), InvalidArgument);
  CHECK_THROWS_AS(extract_image_features(constant_image(0.5, 4, 16)), InvalidArgument);
}

TEST_CASE("extract_image_features golden checksum") {
  const auto img = render_domain(Domain::landscape, golden::seeded_latent(7), RendererConfig{});
  CHECK(golden::digest(extract_image_features(img).values) ==
        golden::load()["image_feature"].get<std::string>());
}

TEST_CASE("project_to_shared") {
  ProjectionParams p;
  p.text.assign(kSharedDim * kTextDim, 0.0);
  p.image.assign(kSharedDim * kImageDim, 0.0);
  for (std::size_t i = 0; i < kSharedDim; ++i) p.text[i * kTextDim + i] = 2.0;
  std::vector<double> e(kTextDim, 0.0);
  e[3] = 1.0;
  const auto s = project_to_shared(e, Modality::text, p);
  CHECK(s.values[3] == 1.0);
  CHECK(s.modality == Modality::text);
  CHECK(std::count(s.values.begin(), s.values.end(), 0.0) == static_cast<long>(kSharedDim - 1));

  std::vector<double> f(kImageDim, 0.0);
  f[0] = 1.0;
  CHECK_THROWS_AS(project_to_shared(f, Modality::image, p), DegenerateProjectionError);
  CHECK_THROWS_AS(project_to_shared(f, Modality::text, p), InvalidArgument);

  const auto seeded = make_projection(5);
  CHECK(seeded.text == make_projection(5).text);
  CHECK(seeded.text != make_projection(6).text);
  const auto g = project_to_shared(embed_text("medieval castle").values, Modality::text, seeded);
  CHECK(std::abs(l2_norm(g.values) - 1.0) <= 1e-12);
  CHECK(golden::digest(g.values) == golden::load()["projection"].get<std::string>());
}

TEST_CASE("cosine_similarity") {
  const std::vector<double> x{0.3, -2.0, 5.0};
  CHECK(cosine_similarity(x, x) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
  CHECK(cosine_similarity(std::vector<double>{1, 1, 0}, std::vector<double>{1, 0, 0}) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 0}),
                  InvalidArgument);

  SplitMix64 rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> a(6), b(6);
    for (double& v : a) v = rng.uniform(-10, 10);
    for (double& v : b) v = rng.uniform(-10, 10);
    const double ab = cosine_similarity(a, b);
    CHECK(ab == cosine_similarity(b, a));
    CHECK(std::abs(ab) <= 1.0);
  }
}
