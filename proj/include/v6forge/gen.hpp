// Candidate generation: decode suffixes for seed prefixes and sample words
// from cosine-similarity distributions.
//
// Each decode step predicts a vector; the candidate words are the
// vocabulary entries for that suffix position, scored by cosine similarity
// and turned into probabilities with a softmax. A temperature reshapes the
// distribution in log space. Sampling picks one word per position, whose
// embedding becomes the next decoder input, and the finished suffix joins
// the seed prefix to form one candidate address. Prefixes rotate round
// robin, each with its own derived random stream, so any one prefix
// produces the same stream of suffixes no matter how many other prefixes
// are in play.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "v6forge/addr.hpp"
#include "v6forge/embed.hpp"
#include "v6forge/errors.hpp"
#include "v6forge/infer.hpp"
#include "v6forge/lm.hpp"
#include "v6forge/rng.hpp"
#include "v6forge/tensor.hpp"

namespace v6forge::gen {

enum class Strategy { greedy, random, temperature };

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::greedy: return "greedy";
    case Strategy::random: return "random";
    case Strategy::temperature: return "temperature";
  }
  throw ParamError("invalid strategy");
}

inline Strategy parse_strategy(const std::string& s) {
  if (s == "greedy") return Strategy::greedy;
  if (s == "random") return Strategy::random;
  if (s == "temperature") return Strategy::temperature;
  throw ParamError("unknown strategy \"" + s + "\" (greedy, random, temperature)");
}

/// Softmax over raw scores, numerically stable, fixed accumulation order.
inline std::vector<double> softmax_probs(std::span<const double> scores) {
  if (scores.empty()) throw ParamError("softmax over an empty score list");
  const double mx = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

/// Reshapes probabilities as softmax(log(p)/t), computed in log space so
/// small probabilities survive. t == 1 returns the input unchanged; zero
/// entries stay exactly zero.
inline std::vector<double> temper(std::span<const double> probs, double t) {
  if (t <= 0.0) throw ParamError("temperature must be positive, got " + std::to_string(t));
  std::vector<double> out(probs.begin(), probs.end());
  if (t == 1.0) return out;
  double mx = -std::numeric_limits<double>::infinity();
  for (double& v : out) {
    v = std::log(v) / t;  // log(0) == -inf stays -inf
    mx = std::max(mx, v);
  }
  if (!std::isfinite(mx)) throw ParamError("cannot temper an all-zero distribution");
  double sum = 0.0;
  for (double& v : out) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : out) v /= sum;
  return out;
}

/// The sampling distribution for one suffix position: every vocabulary word
/// at that position, scored against the predicted vector.
struct SamplingDistribution {
  int position = 0;                // nybble index 16..31
  std::vector<int> candidate_ids;  // ascending vocabulary ids
  std::vector<double> cosines;     // cos(prediction, word vector)
  std::vector<double> base_p;      // softmax of cosines
  std::vector<double> tempered_p;  // base_p after temperature
  double temperature = 1.0;
};

inline SamplingDistribution make_distribution(std::span<const double> pred,
                                              const embed::EmbeddingTable& table, int position,
                                              double temperature) {
  SamplingDistribution dist;
  dist.position = position;
  dist.temperature = temperature;
  dist.candidate_ids = table.vocabulary().words_at_position(position);
  if (dist.candidate_ids.empty())
    throw VocabError("vocabulary has no words at position " + std::to_string(position));
  dist.cosines.reserve(dist.candidate_ids.size());
  for (int id : dist.candidate_ids)
    dist.cosines.push_back(num::cosine_similarity(pred, table.row(id)));
  dist.base_p = softmax_probs(dist.cosines);
  dist.tempered_p = temper(dist.base_p, temperature);
  return dist;
}

/// Picks an entry of dist.candidate_ids. Greedy takes the most probable
/// word (ties break to the lowest id); random ignores the probabilities and
/// draws uniformly; temperature draws from tempered_p.
inline int sample_index(const SamplingDistribution& dist, Strategy strategy, rng::Engine& eng) {
  const std::size_t n = dist.candidate_ids.size();
  switch (strategy) {
    case Strategy::greedy: {
      std::size_t best = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (dist.tempered_p[i] > dist.tempered_p[best]) best = i;
      return static_cast<int>(best);
    }
    case Strategy::random:
      return static_cast<int>(rng::below(eng, n));
    case Strategy::temperature: {
      const double u = rng::uniform01(eng);
      double cum = 0.0;
      std::size_t last_positive = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (dist.tempered_p[i] <= 0.0) continue;
        last_positive = i;
        cum += dist.tempered_p[i];
        if (u < cum) return static_cast<int>(i);
      }
      return static_cast<int>(last_positive);  // cumsum rounded below 1
    }
  }
  throw ParamError("invalid strategy");
}

struct GenConfig {
  int count = 1000;
  Strategy strategy = Strategy::temperature;
  double temperature = 0.01;
  std::uint64_t seed = 1;
  int attempt_factor = 10;  // attempt budget = attempt_factor * count
};

/// One generation pass: the unique candidates in emission order, which
/// prefix produced each, and how many decode attempts were spent.
struct GenerationRun {
  std::vector<addr::Address> candidates;
  std::vector<int> prefix_of;  // index into `prefixes` per candidate
  std::vector<std::array<addr::AddressWord, 16>> prefixes;  // first-appearance order
  long attempts = 0;
  int requested = 0;
  Strategy strategy = Strategy::temperature;
  double temperature = 0.01;
  std::uint64_t seed = 0;
};

/// Raised when the attempt budget runs out before `count` distinct
/// candidates exist; carries everything generated so far.
class PartialResult : public Error {
 public:
  PartialResult(GenerationRun run_)
      : Error("generated " + std::to_string(run_.candidates.size()) + " of " +
              std::to_string(run_.requested) + " requested candidates in " +
              std::to_string(run_.attempts) + " attempts"),
        run(std::move(run_)) {}

  GenerationRun run;
};

/// Generates `cfg.count` distinct candidate addresses conditioned on the
/// unique seed prefixes. Each prefix keeps a random stream derived from
/// (seed, its first-appearance index), so runs reproduce for a fixed seed.
inline GenerationRun generate(lm::Transformer& model, const embed::EmbeddingTable& table,
                              std::span<const addr::WordSequence> seeds, const GenConfig& cfg) {
  if (seeds.empty()) throw EmptyCorpusError("no seed sequences to condition on");
  if (cfg.count <= 0) throw ParamError("candidate count must be positive");
  if (cfg.attempt_factor < 1) throw ParamError("attempt factor must be at least 1");
  if (cfg.temperature <= 0.0)
    throw ParamError("temperature must be positive, got " + std::to_string(cfg.temperature));
  const lm::ModelConfig& mcfg = model.config();
  if (mcfg.d_model != table.dim())
    throw ParamError("model d_model " + std::to_string(mcfg.d_model) +
                     " does not match embedding dim " + std::to_string(table.dim()));

  GenerationRun run;
  run.requested = cfg.count;
  run.strategy = cfg.strategy;
  run.temperature = cfg.temperature;
  run.seed = cfg.seed;

  // Unique prefixes in first-appearance order, identified by the high 64
  // bits of the address.
  std::unordered_map<std::uint64_t, int> prefix_index;
  std::vector<const addr::WordSequence*> representative;
  for (const auto& s : seeds) {
    const std::uint64_t hi = s.to_address().high64();
    if (prefix_index.emplace(hi, static_cast<int>(run.prefixes.size())).second) {
      std::array<addr::AddressWord, 16> words;
      for (int p = 0; p < 16; ++p) words[static_cast<std::size_t>(p)] = s.word(p);
      run.prefixes.push_back(words);
      representative.push_back(&s);
    }
  }

  // Round-robin order is a seeded shuffle of the prefix slots.
  std::vector<int> order(run.prefixes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  {
    rng::Engine eng = rng::engine(cfg.seed, 0x09dE9);
    rng::shuffle(order, eng);
  }

  std::vector<std::optional<num::Tensor>> memory(run.prefixes.size());
  std::vector<rng::Engine> streams;
  streams.reserve(run.prefixes.size());
  for (std::size_t i = 0; i < run.prefixes.size(); ++i)
    streams.push_back(rng::engine(cfg.seed, 0x5a3d1e, static_cast<std::uint64_t>(i)));

  const long budget = static_cast<long>(cfg.attempt_factor) * cfg.count;
  std::unordered_set<addr::Address, addr::AddressHash> seen;
  const std::vector<double> start(model.start_vector().begin(), model.start_vector().end());

  std::size_t cursor = 0;
  while (static_cast<int>(run.candidates.size()) < cfg.count && run.attempts < budget) {
    const int slot = order[cursor];
    cursor = (cursor + 1) % order.size();
    ++run.attempts;

    if (!memory[static_cast<std::size_t>(slot)].has_value()) {
      num::Tensor rows({16, mcfg.d_model});
      for (int p = 0; p < 16; ++p) {
        const auto r = table.row(table.vocabulary().id_of(
            run.prefixes[static_cast<std::size_t>(slot)][static_cast<std::size_t>(p)]));
        std::copy(r.begin(), r.end(), rows.data() + static_cast<std::size_t>(p) * r.size());
      }
      memory[static_cast<std::size_t>(slot)] = infer::encode_memory(model, rows);
    }

    infer::DecoderSession session(model, *memory[static_cast<std::size_t>(slot)]);
    rng::Engine& eng = streams[static_cast<std::size_t>(slot)];
    std::vector<double> input = start;
    std::vector<addr::AddressWord> words(
        run.prefixes[static_cast<std::size_t>(slot)].begin(),
        run.prefixes[static_cast<std::size_t>(slot)].end());
    for (int t = 0; t < 16; ++t) {
      const std::vector<double> pred = session.step(input);
      const SamplingDistribution dist = make_distribution(pred, table, 16 + t, cfg.temperature);
      const int pick = sample_index(dist, cfg.strategy, eng);
      const int id = dist.candidate_ids[static_cast<std::size_t>(pick)];
      words.push_back(table.vocabulary().word(id));
      const auto r = table.row(id);
      input.assign(r.begin(), r.end());
    }
    const addr::Address cand = addr::WordSequence::from_words(words).to_address();
    if (seen.insert(cand).second) {
      run.candidates.push_back(cand);
      run.prefix_of.push_back(slot);
    }
  }

  if (static_cast<int>(run.candidates.size()) < cfg.count) throw PartialResult(std::move(run));
  return run;
}

}  // namespace v6forge::gen
