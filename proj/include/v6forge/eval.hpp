// Candidate-set evaluation: hit and generation rates against the activity
// oracle, plus the temperature sweep and growth-curve studies.
//
// r_hit is the share of distinct candidates that are active; r_gen counts
// only active candidates outside the seed set. Both are computed in integer
// arithmetic and formatted to two decimals with half-up rounding, so
// reports never drift with floating-point printing.
#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "v6forge/addr.hpp"
#include "v6forge/embed.hpp"
#include "v6forge/errors.hpp"
#include "v6forge/gen.hpp"
#include "v6forge/lm.hpp"
#include "v6forge/synth.hpp"

namespace v6forge::eval {

inline constexpr int kMetricsFormatVersion = 1;

/// num/den as a percentage with two decimals, rounded half up: 1/3 ->
/// "33.33", 1/8 -> "12.50", 10/100 -> "10.00". Exact integer arithmetic.
inline std::string format_pct(long num, long den) {
  if (den <= 0) throw ParamError("percentage denominator must be positive");
  if (num < 0) throw ParamError("percentage numerator must be non-negative");
  const long scaled = num * 10000;  // percent, in hundredths
  long q = scaled / den;
  const long r = scaled % den;
  if (2 * r >= den) ++q;
  std::string frac = std::to_string(q % 100);
  if (frac.size() < 2) frac.insert(frac.begin(), '0');
  return std::to_string(q / 100) + "." + frac;
}

struct EvalReport {
  int n_candidate = 0;
  int n_hit = 0;
  int n_gen = 0;
  std::map<std::string, int> per_scheme;  // scheme label -> hits
  std::string r_hit_pct;                  // "10.00"
  std::string r_gen_pct;
  double r_hit = 0.0;  // exact ratio * 100, for arithmetic
  double r_gen = 0.0;

  bool operator==(const EvalReport&) const = default;
};

/// Scores a candidate list. Candidates are de-duplicated defensively;
/// activity is exact set membership; candidates equal to a seed never count
/// toward n_gen even when active.
inline EvalReport evaluate(std::span<const addr::Address> candidates,
                           std::span<const addr::Address> seeds, const synth::Universe& oracle) {
  if (candidates.empty()) throw ParamError("no candidates to evaluate");
  std::unordered_set<addr::Address, addr::AddressHash> seed_set(seeds.begin(), seeds.end());
  std::unordered_set<addr::Address, addr::AddressHash> unique;

  EvalReport rep;
  for (const addr::Address& c : candidates) {
    if (!unique.insert(c).second) continue;
    ++rep.n_candidate;
    if (!oracle.is_active(c)) continue;
    ++rep.n_hit;
    rep.per_scheme[oracle.label_of(c)]++;
    if (!seed_set.count(c)) ++rep.n_gen;
  }
  rep.r_hit_pct = format_pct(rep.n_hit, rep.n_candidate);
  rep.r_gen_pct = format_pct(rep.n_gen, rep.n_candidate);
  rep.r_hit = 100.0 * rep.n_hit / rep.n_candidate;
  rep.r_gen = 100.0 * rep.n_gen / rep.n_candidate;
  return rep;
}

inline nlohmann::json to_json(const EvalReport& rep) {
  nlohmann::json per_scheme = nlohmann::json::object();
  for (const auto& [label, hits] : rep.per_scheme) per_scheme[label] = hits;
  return nlohmann::json{{"format_version", kMetricsFormatVersion},
                        {"n_candidate", rep.n_candidate},
                        {"n_hit", rep.n_hit},
                        {"n_gen", rep.n_gen},
                        {"r_hit_pct", rep.r_hit_pct},
                        {"r_gen_pct", rep.r_gen_pct},
                        {"per_scheme", per_scheme}};
}

inline void save_metrics(const EvalReport& rep, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << to_json(rep).dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

namespace detail {

inline std::vector<addr::Address> to_addresses(std::span<const addr::WordSequence> seqs) {
  std::vector<addr::Address> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back(s.to_address());
  return out;
}

/// Generation that tolerates budget exhaustion: a partial run is a result,
/// not a failure, for the study loops below.
inline gen::GenerationRun generate_lenient(lm::Transformer& model,
                                           const embed::EmbeddingTable& table,
                                           std::span<const addr::WordSequence> seeds,
                                           const gen::GenConfig& cfg) {
  try {
    return gen::generate(model, table, seeds, cfg);
  } catch (const gen::PartialResult& partial) {
    return partial.run;
  }
}

}  // namespace detail

struct SweepRow {
  double temperature = 0.0;
  EvalReport report;
  int distinct_suffixes = 0;  // distinct low-64 halves among candidates

  bool operator==(const SweepRow&) const = default;
};

/// Regenerates and rescores at each temperature with the same seed base and
/// prefixes, so rows differ only in the temperature.
inline std::vector<SweepRow> sweep_temperature(lm::Transformer& model,
                                               const embed::EmbeddingTable& table,
                                               std::span<const addr::WordSequence> seed_seqs,
                                               const synth::Universe& oracle,
                                               std::span<const double> temperatures,
                                               const gen::GenConfig& base) {
  if (temperatures.empty()) throw ParamError("no temperatures to sweep");
  const std::vector<addr::Address> seed_addrs = detail::to_addresses(seed_seqs);
  std::vector<SweepRow> rows;
  rows.reserve(temperatures.size());
  for (double t : temperatures) {
    gen::GenConfig cfg = base;
    cfg.strategy = gen::Strategy::temperature;
    cfg.temperature = t;
    const gen::GenerationRun run = detail::generate_lenient(model, table, seed_seqs, cfg);
    if (run.candidates.empty()) throw StateError("temperature sweep produced no candidates");
    SweepRow row;
    row.temperature = t;
    row.report = evaluate(run.candidates, seed_addrs, oracle);
    std::unordered_set<std::uint64_t> suffixes;
    for (const addr::Address& c : run.candidates) suffixes.insert(c.low64());
    row.distinct_suffixes = static_cast<int>(suffixes.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

struct GrowthRow {
  int budget = 0;         // requested candidate budget
  int n_candidate = 0;    // actually available at this budget
  int n_gen = 0;
  std::string r_gen_pct;
  double r_gen = 0.0;

  bool operator==(const GrowthRow&) const = default;
};

/// Generates once at the largest budget and scores each prefix of the
/// candidate list, so smaller budgets are true subsets and n_gen is
/// non-decreasing by construction.
inline std::vector<GrowthRow> growth_curve(lm::Transformer& model,
                                           const embed::EmbeddingTable& table,
                                           std::span<const addr::WordSequence> seed_seqs,
                                           const synth::Universe& oracle,
                                           std::span<const int> budgets,
                                           const gen::GenConfig& base) {
  if (budgets.empty()) throw ParamError("no candidate budgets");
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    if (budgets[i] <= 0) throw ParamError("candidate budgets must be positive");
    if (i > 0 && budgets[i] <= budgets[i - 1])
      throw ParamError("candidate budgets must be strictly increasing");
  }
  const std::vector<addr::Address> seed_addrs = detail::to_addresses(seed_seqs);

  gen::GenConfig cfg = base;
  cfg.count = budgets.back();
  const gen::GenerationRun run = detail::generate_lenient(model, table, seed_seqs, cfg);
  if (run.candidates.empty()) throw StateError("growth curve produced no candidates");

  std::vector<GrowthRow> rows;
  rows.reserve(budgets.size());
  for (int budget : budgets) {
    const int avail = std::min<int>(budget, static_cast<int>(run.candidates.size()));
    const std::span<const addr::Address> head(run.candidates.data(),
                                              static_cast<std::size_t>(avail));
    const EvalReport rep = evaluate(head, seed_addrs, oracle);
    GrowthRow row;
    row.budget = budget;
    row.n_candidate = rep.n_candidate;
    row.n_gen = rep.n_gen;
    row.r_gen_pct = rep.r_gen_pct;
    row.r_gen = rep.r_gen;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace v6forge::eval
