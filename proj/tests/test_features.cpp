#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <sstream>

#include "murln/features.hpp"
#include "oracles.hpp"

namespace murln {
namespace {

TEST(Spatial, HandEvaluatedExample) {
  // union [2,2,10,8], w 8, h 6
  const auto f = spatial_features(BoundingBox(2, 2, 6, 6), BoundingBox(4, 4, 10, 8));
  const std::array<double, 8> expected{0, 0, -0.5, -1.0 / 3, 0.25, 1.0 / 3, 0, 0};
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(f[i], expected[i], 1e-15) << i;
}

TEST(Spatial, IdenticalBoxesGiveZeros) {
  const BoundingBox b(3, 1, 9, 4);
  for (double v : spatial_features(b, b)) EXPECT_EQ(v, 0.0);
}

TEST(Spatial, SubjectEqualToUnionZeroesFirstHalf) {
  const auto f = spatial_features(BoundingBox(0, 0, 10, 10), BoundingBox(2, 3, 5, 7));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(f[i], 0.0);
}

TEST(Spatial, RangeAndInvarianceProperties) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> scale(0.1, 10.0), shift(-50.0, 50.0);
  for (int i = 0; i < 1000; ++i) {
    const auto s = oracle::random_box(rng);
    const auto o = oracle::random_box(rng);
    const auto f = spatial_features(s, o);
    for (std::size_t k : {0, 1, 4, 5}) {
      EXPECT_GE(f[k], 0.0);
      EXPECT_LE(f[k], 1.0);
    }
    for (std::size_t k : {2, 3, 6, 7}) {
      EXPECT_LE(f[k], 0.0);
      EXPECT_GE(f[k], -1.0);
    }
    const double a = scale(rng), dx = shift(rng), dy = shift(rng);
    auto tf = [&](const BoundingBox& b) {
      return BoundingBox(a * b.x_min() + dx, a * b.y_min() + dy, a * b.x_max() + dx,
                         a * b.y_max() + dy);
    };
    const auto g = spatial_features(tf(s), tf(o));
    for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(f[k], g[k], 1e-9);
  }
}

TEST(TripletStatistics, CountsTrainingSplitOnly) {
  Vocabulary vocab{{"person", "horse"}, {"ride"}};
  const BoundingBox b(0, 0, 1, 1);
  SceneRecord train{"a", 10, 10, {}, {{b, 0, 0, b, 1}, {b, 0, 0, b, 1}, {b, 0, 0, b, 1}},
                    Split::Train};
  SceneRecord test = train;
  test.split = Split::Test;
  const auto stats = build_triplet_statistics({train, test}, vocab);
  EXPECT_EQ(stats.count(0, 0, 1), 3u);
  EXPECT_EQ(stats.total(), 3u);
  EXPECT_EQ(build_triplet_statistics({}, vocab).total(), 0u);
}

TEST(TripletStatistics, OutOfVocabularyIsIngestionError) {
  TripletStatistics stats(2, 1);
  EXPECT_THROW(stats.add(2, 0, 0), IngestionError);
  EXPECT_THROW(stats.add(0, 1, 0), IngestionError);
}

TEST(InternalLinguistic, HandEvaluatedExample) {
  // objects {person, dog, horse, street}, predicates {ride, on}
  TripletStatistics stats(4, 2);
  stats.add(0, 0, 2, 2);
  stats.add(0, 1, 3);
  stats.add(1, 1, 3);
  const auto p = internal_linguistic(stats, 0, 2);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_NEAR(p[0], 9.0 / 11.0, 1e-12);
  EXPECT_NEAR(p[1], 2.0 / 11.0, 1e-12);
  EXPECT_NEAR(p[0], 0.8182, 5e-5);
}

TEST(InternalLinguistic, EmptyStatisticsAreUniform) {
  TripletStatistics stats(5, 4);
  for (double v : internal_linguistic(stats, 1, 3)) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(InternalLinguistic, MatchesOracleAndIsADistribution) {
  std::mt19937_64 rng(17);
  const std::size_t n = 6, m = 5;
  std::uniform_int_distribution<std::size_t> obj(0, n - 1), pred(0, m - 1);
  std::vector<oracle::RawTriplet> raw;
  TripletStatistics stats(n, m);
  for (int i = 0; i < 80; ++i) {
    const oracle::RawTriplet t{obj(rng), pred(rng), obj(rng)};
    raw.push_back(t);
    stats.add(t.s, t.p, t.o);
  }
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t o = 0; o < n; ++o) {
      const auto got = internal_linguistic(stats, s, o);
      const auto want = oracle::naive_bayes(raw, n, m, s, o);
      double sum = 0.0;
      for (std::size_t p = 0; p < m; ++p) {
        EXPECT_GT(got[p], 0.0);
        EXPECT_NEAR(got[p], want[p], 1e-12);
        sum += got[p];
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

EmbeddingTable small_table() {
  std::istringstream in("Traffic 1 2 3\nlight 3 4 5\nperson -1 0 1\n");
  return EmbeddingTable::parse(in);
}

TEST(ExternalLinguistic, LookupAveragingAndFallback) {
  const auto t = small_table();
  EXPECT_EQ(t.dim(), 3u);
  EXPECT_EQ(external_linguistic(t, "person"), (std::vector<double>{-1, 0, 1}));
  EXPECT_EQ(external_linguistic(t, "traffic light"), (std::vector<double>{2, 3, 4}));
  EXPECT_EQ(external_linguistic(t, "PERSON"), (std::vector<double>{-1, 0, 1}));
  EXPECT_EQ(external_linguistic(t, "zebra"), (std::vector<double>(3, 0.0)));
  // An unknown token still counts in the mean.
  EXPECT_EQ(external_linguistic(t, "light zebra"), (std::vector<double>{1.5, 2, 2.5}));
}

TEST(EmbeddingTable, ParseErrorsCarryLineNumbers) {
  std::istringstream ragged("a 1 2\nb 1 2 3\n");
  try {
    EmbeddingTable::parse(ragged);
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  std::istringstream bad("a 1 x\n");
  EXPECT_THROW(EmbeddingTable::parse(bad), IngestionError);
  std::istringstream empty("");
  EXPECT_THROW(EmbeddingTable::parse(empty), IngestionError);
}

TEST(VisualFeatureStore, MissingRegionIsIngestionError) {
  VisualFeatureStore store(2);
  const BoundingBox b(0, 0, 1, 1);
  const std::vector<double> v{1, 2};
  store.put("img", b, v);
  EXPECT_TRUE(store.contains("img", b));
  EXPECT_EQ(store.get("img", b)[1], 2.0);
  EXPECT_THROW(store.get("img", BoundingBox(0, 0, 1, 2)), IngestionError);
  EXPECT_THROW(store.get("other", b), IngestionError);
  EXPECT_THROW(store.put("img", b, std::vector<double>{1}), DimensionError);
}

TEST(FeatureExtractor, BundleShapes) {
  Vocabulary vocab{{"person", "traffic light"}, {"near", "on", "under"}};
  const auto table = small_table();
  TripletStatistics stats(2, 3);
  VisualFeatureStore store(5);
  const BoundingBox a(0, 0, 2, 2), b(1, 1, 4, 3);
  const std::vector<double> v(5, 0.5);
  store.put("img", a, v);
  store.put("img", b, v);
  store.put("img", union_box(a, b), v);
  FeatureExtractor fx(vocab, stats, table, store);
  const ObjectPair pair{0, 1, {a, 0, 0.9}, {b, 1, 0.8}, PairStatus::Undetermined, {}, {}};
  const auto bundle = fx.assemble(pair, "img");
  EXPECT_EQ(bundle.visual_subject.size(), 5u);
  EXPECT_EQ(bundle.visual_object.size(), 5u);
  EXPECT_EQ(bundle.visual_union.size(), 5u);
  EXPECT_EQ(bundle.spatial.size(), 8u);
  EXPECT_EQ(bundle.external_subject.size(), 3u);
  EXPECT_EQ(bundle.external_object, (std::vector<double>{2, 3, 4}));
  EXPECT_EQ(bundle.internal.size(), 3u);

  VisualFeatureStore partial(5);
  partial.put("img", a, v);
  partial.put("img", b, v);
  FeatureExtractor fx2(vocab, stats, table, partial);
  EXPECT_THROW(fx2.assemble(pair, "img"), IngestionError);
}

}  // namespace
}  // namespace murln
