// Tests for candidate generation: tempered sampling distributions, the
// three sampling strategies, and prefix-conditioned sequence generation.
#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "v6forge/addr.hpp"
#include "v6forge/corpus.hpp"
#include "v6forge/embed.hpp"
#include "v6forge/errors.hpp"
#include "v6forge/gen.hpp"
#include "v6forge/infer.hpp"
#include "v6forge/lm.hpp"
#include "v6forge/rng.hpp"

using namespace v6forge;

namespace {

lm::ModelConfig tiny_config(int d = 16, int layers = 2, int heads = 2) {
  lm::ModelConfig cfg;
  cfg.layers = layers;
  cfg.heads = heads;
  cfg.d_model = d;
  cfg.ff_width = 2 * d;
  return cfg;
}

/// Seeds with `prefixes` distinct prefix halves (all nybbles of prefix k
/// equal k) and pseudo-random suffixes, `per_prefix` seeds each.
std::vector<addr::WordSequence> seeds_with_prefixes(int prefixes, int per_prefix,
                                                    std::uint64_t seed) {
  rng::Engine eng = rng::engine(seed, 0x5eedf);
  std::vector<addr::WordSequence> out;
  for (int k = 0; k < prefixes; ++k) {
    for (int i = 0; i < per_prefix; ++i) {
      addr::Address a;
      for (int p = 0; p < 16; ++p) a.set_nybble(p, k);
      for (int p = 16; p < 32; ++p) a.set_nybble(p, static_cast<int>(rng::below(eng, 8)));
      out.push_back(addr::WordSequence::from_address(a));
    }
  }
  return out;
}

embed::EmbeddingTable random_table(const std::vector<addr::WordSequence>& seqs, int dim,
                                   std::uint64_t seed) {
  corpus::Vocabulary vocab = corpus::Vocabulary::build(seqs);
  rng::Engine eng = rng::engine(seed, 0x7ab1e);
  return embed::EmbeddingTable(vocab, num::Tensor::uniform({vocab.size(), dim}, -0.8, 0.8, eng));
}

std::vector<double> softmax_of(std::vector<double> scores) {
  return gen::softmax_probs(scores);
}

}  // namespace

TEST(Strategy, NamesRoundTrip) {
  for (auto s : {gen::Strategy::greedy, gen::Strategy::random, gen::Strategy::temperature})
    EXPECT_EQ(gen::parse_strategy(gen::to_string(s)), s);
  EXPECT_THROW(gen::parse_strategy("warm"), ParamError);
  EXPECT_THROW(gen::parse_strategy(""), ParamError);
}

TEST(SoftmaxProbs, KnownValues) {
  const std::vector<double> p = softmax_of({0.0, std::log(2.0)});
  ASSERT_EQ(p.size(), 2u);
  EXPECT_NEAR(p[0], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(p[1], 2.0 / 3.0, 1e-12);
  EXPECT_THROW(gen::softmax_probs(std::vector<double>{}), ParamError);
}

TEST(Temper, IdentityAtOne) {
  const std::vector<double> p = softmax_of({0.3, -1.2, 2.0, 0.0});
  const std::vector<double> q = gen::temper(p, 1.0);
  ASSERT_EQ(q.size(), p.size());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(q[i], p[i]);  // bitwise
}

TEST(Temper, KnownValues) {
  // t = 1/2 squares the probabilities before renormalizing.
  {
    const std::vector<double> q = gen::temper(std::vector<double>{0.6, 0.4}, 0.5);
    EXPECT_NEAR(q[0], 9.0 / 13.0, 1e-12);
    EXPECT_NEAR(q[1], 4.0 / 13.0, 1e-12);
  }
  {
    const std::vector<double> q = gen::temper(std::vector<double>{1.0 / 3.0, 2.0 / 3.0}, 0.5);
    EXPECT_NEAR(q[0], 1.0 / 5.0, 1e-12);
    EXPECT_NEAR(q[1], 4.0 / 5.0, 1e-12);
  }
  // t = 2 takes square roots: (sqrt(.8), sqrt(.2)) normalized.
  {
    const std::vector<double> q = gen::temper(std::vector<double>{0.8, 0.2}, 2.0);
    const double s = std::sqrt(0.8) + std::sqrt(0.2);
    EXPECT_NEAR(q[0], std::sqrt(0.8) / s, 1e-12);
    EXPECT_NEAR(q[1], std::sqrt(0.2) / s, 1e-12);
  }
}

TEST(Temper, ZeroEntriesStayZero) {
  const std::vector<double> q = gen::temper(std::vector<double>{0.5, 0.5, 0.0}, 0.5);
  EXPECT_NEAR(q[0], 0.5, 1e-12);
  EXPECT_NEAR(q[1], 0.5, 1e-12);
  EXPECT_EQ(q[2], 0.0);
}

TEST(Temper, ExtremesFlattenAndSharpen) {
  rng::Engine eng = rng::engine(7, 0x7e3);
  std::vector<double> scores(8);
  for (double& s : scores) s = rng::uniform(eng, -2.0, 2.0);
  const std::vector<double> p = softmax_of(scores);

  const std::vector<double> flat = gen::temper(p, 1e6);
  for (double v : flat) EXPECT_NEAR(v, 1.0 / 8.0, 1e-3);

  const std::vector<double> sharp = gen::temper(p, 1e-3);
  const std::size_t best =
      static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  EXPECT_GT(sharp[best], 0.999);
}

TEST(Temper, PreservesOrderAndSharpens) {
  rng::Engine eng = rng::engine(11, 0x7e4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> scores(6);
    for (double& s : scores) s = rng::uniform(eng, -1.5, 1.5);
    const std::vector<double> p = softmax_of(scores);
    const std::vector<double> q = gen::temper(p, 0.5);
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      sum += q[i];
      for (std::size_t j = 0; j < p.size(); ++j)
        if (p[i] > p[j]) EXPECT_GT(q[i], q[j]);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    // Sharpening: the max/min ratio cannot shrink below the base ratio.
    const double base_ratio = *std::max_element(p.begin(), p.end()) /
                              *std::min_element(p.begin(), p.end());
    const double new_ratio = *std::max_element(q.begin(), q.end()) /
                             *std::min_element(q.begin(), q.end());
    EXPECT_GE(new_ratio, base_ratio - 1e-12);
  }
}

TEST(Temper, RejectsBadInput) {
  const std::vector<double> p{0.5, 0.5};
  EXPECT_THROW(gen::temper(p, 0.0), ParamError);
  EXPECT_THROW(gen::temper(p, -1.0), ParamError);
  EXPECT_THROW(gen::temper(std::vector<double>{0.0, 0.0}, 0.5), ParamError);
}

TEST(MakeDistribution, CandidatesScoresAndNormalization) {
  const auto seqs = seeds_with_prefixes(2, 4, 3);
  const embed::EmbeddingTable table = random_table(seqs, 12, 5);
  rng::Engine eng = rng::engine(9);
  const num::Tensor pred = num::Tensor::uniform({12}, -1.0, 1.0, eng);

  const gen::SamplingDistribution dist =
      gen::make_distribution(pred.values(), table, 16, 0.5);
  EXPECT_EQ(dist.position, 16);
  EXPECT_EQ(dist.temperature, 0.5);
  ASSERT_EQ(dist.candidate_ids, table.vocabulary().words_at_position(16));
  ASSERT_FALSE(dist.candidate_ids.empty());
  for (std::size_t i = 1; i < dist.candidate_ids.size(); ++i)
    EXPECT_LT(dist.candidate_ids[i - 1], dist.candidate_ids[i]);

  double base_sum = 0.0;
  for (std::size_t i = 0; i < dist.candidate_ids.size(); ++i) {
    EXPECT_DOUBLE_EQ(dist.cosines[i],
                     num::cosine_similarity(pred.values(), table.row(dist.candidate_ids[i])));
    base_sum += dist.base_p[i];
  }
  EXPECT_NEAR(base_sum, 1.0, 1e-12);
  const std::vector<double> expect_tempered = gen::temper(dist.base_p, 0.5);
  for (std::size_t i = 0; i < expect_tempered.size(); ++i)
    EXPECT_DOUBLE_EQ(dist.tempered_p[i], expect_tempered[i]);
}

TEST(SampleIndex, GreedyPicksArgmaxWithLowestIdTie) {
  gen::SamplingDistribution dist;
  dist.candidate_ids = {3, 7, 9};
  dist.tempered_p = {0.4, 0.4, 0.2};
  rng::Engine eng = rng::engine(1);
  EXPECT_EQ(gen::sample_index(dist, gen::Strategy::greedy, eng), 0);
  EXPECT_EQ(gen::sample_index(dist, gen::Strategy::greedy, eng), 0);
  dist.tempered_p = {0.1, 0.2, 0.7};
  EXPECT_EQ(gen::sample_index(dist, gen::Strategy::greedy, eng), 2);
}

TEST(SampleIndex, RandomIgnoresProbabilities) {
  gen::SamplingDistribution dist;
  dist.candidate_ids = {0, 1, 2};
  dist.tempered_p = {0.98, 0.01, 0.01};
  rng::Engine eng = rng::engine(42, 0xd1ce);
  std::array<int, 3> counts{};
  const int draws = 30000;
  for (int i = 0; i < draws; ++i)
    counts[static_cast<std::size_t>(gen::sample_index(dist, gen::Strategy::random, eng))]++;
  for (int c : counts) {
    EXPECT_GT(c, 8000);
    EXPECT_LT(c, 12000);
  }
}

TEST(SampleIndex, TemperatureFollowsTemperedDistribution) {
  gen::SamplingDistribution dist;
  dist.candidate_ids = {0, 1, 2};
  dist.tempered_p = {0.2, 0.3, 0.5};
  rng::Engine eng = rng::engine(77, 0xd1ce);
  std::array<int, 3> counts{};
  const int draws = 50000;
  for (int i = 0; i < draws; ++i)
    counts[static_cast<std::size_t>(gen::sample_index(dist, gen::Strategy::temperature, eng))]++;
  EXPECT_NEAR(counts[0] / static_cast<double>(draws), 0.2, 0.015);
  EXPECT_NEAR(counts[1] / static_cast<double>(draws), 0.3, 0.015);
  EXPECT_NEAR(counts[2] / static_cast<double>(draws), 0.5, 0.015);

  // Zero-probability entries are never drawn.
  dist.tempered_p = {0.0, 1.0, 0.0};
  for (int i = 0; i < 100; ++i)
    EXPECT_EQ(gen::sample_index(dist, gen::Strategy::temperature, eng), 1);
}

TEST(Generate, GreedyIsDeterministicAndPrefixFaithful) {
  const auto seeds = seeds_with_prefixes(3, 2, 21);
  const embed::EmbeddingTable table = random_table(seeds, 16, 5);
  lm::Transformer model(tiny_config(16), 33);

  gen::GenConfig cfg;
  cfg.count = 3;
  cfg.strategy = gen::Strategy::greedy;
  cfg.seed = 9;
  const gen::GenerationRun a = gen::generate(model, table, seeds, cfg);
  const gen::GenerationRun b = gen::generate(model, table, seeds, cfg);

  ASSERT_EQ(a.candidates.size(), 3u);
  EXPECT_EQ(a.candidates, b.candidates);
  EXPECT_EQ(a.prefix_of, b.prefix_of);
  EXPECT_EQ(a.prefixes.size(), 3u);
  EXPECT_EQ(a.requested, 3);
  EXPECT_GE(a.attempts, 3);

  std::set<std::uint64_t> seed_prefixes;
  for (const auto& s : seeds) seed_prefixes.insert(s.to_address().high64());
  std::set<addr::Address> unique(a.candidates.begin(), a.candidates.end());
  EXPECT_EQ(unique.size(), a.candidates.size());
  for (const addr::Address& c : a.candidates) {
    EXPECT_TRUE(seed_prefixes.count(c.high64()));
    const addr::WordSequence ws = addr::WordSequence::from_address(c);
    for (int p = 0; p < 32; ++p) EXPECT_TRUE(table.vocabulary().contains(ws.word(p)));
  }
}

TEST(Generate, GreedySuffixMatchesManualDecode) {
  const auto seeds = seeds_with_prefixes(1, 3, 4);
  const embed::EmbeddingTable table = random_table(seeds, 16, 6);
  lm::Transformer model(tiny_config(16), 17);

  gen::GenConfig cfg;
  cfg.count = 1;
  cfg.strategy = gen::Strategy::greedy;
  const gen::GenerationRun run = gen::generate(model, table, seeds, cfg);
  ASSERT_EQ(run.candidates.size(), 1u);

  // Re-derive the suffix by stepping the decoder by hand.
  num::Tensor rows({16, 16});
  for (int p = 0; p < 16; ++p) {
    const auto r = table.row(table.vocabulary().id_of(seeds[0].word(p)));
    std::copy(r.begin(), r.end(), rows.data() + static_cast<std::size_t>(p) * 16);
  }
  infer::DecoderSession session(model, infer::encode_memory(model, rows));
  std::vector<double> input(model.start_vector().begin(), model.start_vector().end());
  addr::Address expect = seeds[0].to_address();
  for (int t = 0; t < 16; ++t) {
    const std::vector<double> pred = session.step(input);
    const auto dist = gen::make_distribution(pred, table, 16 + t, cfg.temperature);
    std::size_t best = 0;
    for (std::size_t i = 1; i < dist.tempered_p.size(); ++i)
      if (dist.tempered_p[i] > dist.tempered_p[best]) best = i;
    const int id = dist.candidate_ids[best];
    expect.set_nybble(16 + t, table.vocabulary().word(id).value);
    const auto r = table.row(id);
    input.assign(r.begin(), r.end());
  }
  EXPECT_EQ(run.candidates[0], expect);
}

TEST(Generate, GreedyExhaustsBudgetAndReportsPartial) {
  const auto seeds = seeds_with_prefixes(2, 2, 8);
  const embed::EmbeddingTable table = random_table(seeds, 16, 5);
  lm::Transformer model(tiny_config(16), 33);

  gen::GenConfig cfg;
  cfg.count = 10;
  cfg.strategy = gen::Strategy::greedy;
  try {
    gen::generate(model, table, seeds, cfg);
    FAIL() << "expected PartialResult";
  } catch (const gen::PartialResult& e) {
    EXPECT_EQ(e.run.candidates.size(), 2u);  // one per prefix, then duplicates
    EXPECT_EQ(e.run.attempts, 100);          // 10x count
    EXPECT_EQ(e.run.requested, 10);
    EXPECT_NE(std::string(e.what()).find("2 of 10"), std::string::npos);
  }
}

TEST(Generate, TemperatureReproducesForSeedAndVariesAcrossSeeds) {
  const auto seeds = seeds_with_prefixes(4, 3, 13);
  const embed::EmbeddingTable table = random_table(seeds, 16, 5);
  lm::Transformer model(tiny_config(16), 33);

  gen::GenConfig cfg;
  cfg.count = 12;
  cfg.strategy = gen::Strategy::temperature;
  cfg.temperature = 0.5;
  cfg.seed = 4;
  const gen::GenerationRun a = gen::generate(model, table, seeds, cfg);
  const gen::GenerationRun b = gen::generate(model, table, seeds, cfg);
  ASSERT_EQ(a.candidates.size(), 12u);
  EXPECT_EQ(a.candidates, b.candidates);
  EXPECT_EQ(a.prefix_of, b.prefix_of);

  std::set<addr::Address> unique(a.candidates.begin(), a.candidates.end());
  EXPECT_EQ(unique.size(), a.candidates.size());

  cfg.seed = 5;
  const gen::GenerationRun c = gen::generate(model, table, seeds, cfg);
  EXPECT_NE(a.candidates, c.candidates);
}

TEST(Generate, RoundRobinCoversEveryPrefix) {
  const auto seeds = seeds_with_prefixes(4, 2, 19);
  const embed::EmbeddingTable table = random_table(seeds, 16, 5);
  lm::Transformer model(tiny_config(16), 33);

  gen::GenConfig cfg;
  cfg.count = 4;
  cfg.strategy = gen::Strategy::temperature;
  cfg.temperature = 1.0;
  const gen::GenerationRun run = gen::generate(model, table, seeds, cfg);

  ASSERT_EQ(run.candidates.size(), 4u);
  std::set<std::uint64_t> covered;
  for (const addr::Address& c : run.candidates) covered.insert(c.high64());
  EXPECT_EQ(covered.size(), 4u);  // four prefixes, one candidate each
}

TEST(Generate, RejectsBadArguments) {
  const auto seeds = seeds_with_prefixes(2, 2, 8);
  const embed::EmbeddingTable table = random_table(seeds, 16, 5);
  lm::Transformer model(tiny_config(16), 33);

  gen::GenConfig cfg;
  EXPECT_THROW(gen::generate(model, table, std::span<const addr::WordSequence>{}, cfg),
               EmptyCorpusError);

  cfg.count = 0;
  EXPECT_THROW(gen::generate(model, table, seeds, cfg), ParamError);
  cfg.count = 1;
  cfg.temperature = -0.5;
  EXPECT_THROW(gen::generate(model, table, seeds, cfg), ParamError);
  cfg.temperature = 0.01;
  cfg.attempt_factor = 0;
  EXPECT_THROW(gen::generate(model, table, seeds, cfg), ParamError);
  cfg.attempt_factor = 10;

  // Embedding width must match the model.
  const embed::EmbeddingTable narrow = random_table(seeds, 12, 5);
  EXPECT_THROW(gen::generate(model, narrow, seeds, cfg), ParamError);

  // Seed words missing from the vocabulary surface as vocabulary errors.
  // count == prefix count forces the round robin to visit every prefix,
  // including ones whose words the table has never seen.
  const auto other = seeds_with_prefixes(5, 1, 99);
  const embed::EmbeddingTable partial = random_table(seeds, 16, 5);
  cfg.count = 5;
  EXPECT_THROW(gen::generate(model, partial, other, cfg), VocabError);
}
