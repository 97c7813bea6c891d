// v6forge command-line tool: synthesize address universes, train word
// vectors and the sequence model, generate candidate addresses, and score
// or cluster the results. Every artifact gets a sibling
// <name>.manifest.json recording the resolved options and input hashes so
// runs can be reproduced bit-for-bit.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "v6forge/addr.hpp"
#include "v6forge/checkpoint.hpp"
#include "v6forge/cluster.hpp"
#include "v6forge/corpus.hpp"
#include "v6forge/embed.hpp"
#include "v6forge/errors.hpp"
#include "v6forge/eval.hpp"
#include "v6forge/gen.hpp"
#include "v6forge/io.hpp"
#include "v6forge/lm.hpp"
#include "v6forge/synth.hpp"
#include "v6forge/version.hpp"

namespace fs = std::filesystem;
using namespace v6forge;

namespace {

void note(const std::string& msg) { std::cerr << "v6forge: " << msg << "\n"; }

std::vector<addr::WordSequence> to_sequences(const std::vector<addr::Address>& addrs) {
  std::vector<addr::WordSequence> out;
  out.reserve(addrs.size());
  for (const addr::Address& a : addrs) out.push_back(addr::WordSequence::from_address(a));
  return out;
}

/// Writes `<artifact>.manifest.json` for an output file this run produced.
void emit_manifest(const std::string& command, const nlohmann::json& config,
                   const std::vector<fs::path>& inputs, const fs::path& artifact) {
  io::RunManifest m;
  m.command = command;
  m.config = config;
  for (const fs::path& in : inputs) m.add_input(in);
  m.outputs.push_back(artifact.filename().string());
  io::save_manifest(m, io::manifest_path_for(artifact));
}

// ---------------------------------------------------------------------------
// synth

struct SynthOpts {
  std::string out_dir;
  int count = 50000;
  int prefixes = 20;
  double seed_fraction = 0.4;
  std::uint64_t seed = 1;
};

int cmd_synth(const SynthOpts& o) {
  const std::vector<synth::SchemeSpec> specs = synth::default_mixture(o.count, o.prefixes);
  const synth::Universe u = synth::synthesize(specs, o.seed);
  const synth::SplitResult parts = synth::split(u, o.seed_fraction, o.seed);
  note("synthesized " + std::to_string(u.size()) + " members (" + std::to_string(parts.seeds.size()) +
       " seeds, " + std::to_string(parts.hidden.size()) + " hidden), baseline rate " +
       std::to_string(synth::random_baseline_rate(specs)));

  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  nlohmann::json cfg{{"count", o.count},
                     {"prefixes", o.prefixes},
                     {"seed_fraction", o.seed_fraction},
                     {"seed", o.seed}};

  const fs::path universe_path = dir / "universe.txt";
  synth::save_universe(u, universe_path);
  emit_manifest("synth", cfg, {}, universe_path);

  const fs::path seeds_path = dir / "seeds.txt";
  io::save_addresses(parts.seeds, seeds_path, "seeds");
  emit_manifest("synth", cfg, {}, seeds_path);

  const fs::path hidden_path = dir / "hidden.txt";
  io::save_addresses(parts.hidden, hidden_path, "hidden");
  emit_manifest("synth", cfg, {}, hidden_path);

  note("wrote " + universe_path.string() + ", " + seeds_path.string() + ", " +
       hidden_path.string());
  return 0;
}

// ---------------------------------------------------------------------------
// embed

struct EmbedOpts {
  std::string seeds;
  std::string out;
  int dim = 100;
  int window = 5;
  int epochs = 50;
  double lr = 1e-3;
  std::uint64_t seed = 1;
};

int cmd_embed(const EmbedOpts& o) {
  const std::vector<addr::Address> addrs = io::load_addresses(o.seeds);
  const std::vector<addr::WordSequence> seqs = to_sequences(addrs);
  const corpus::Vocabulary vocab = corpus::Vocabulary::build(seqs);
  const std::vector<corpus::SkipGramSample> samples =
      corpus::generate_samples(seqs, vocab, o.window);
  note("vocabulary " + std::to_string(vocab.size()) + " words, " +
       std::to_string(samples.size()) + " skip-gram samples from " + std::to_string(seqs.size()) +
       " sequences");

  embed::TrainLog log;
  const embed::EmbeddingTable table = embed::train_embeddings(
      samples, vocab, {.dim = o.dim, .epochs = o.epochs, .lr = o.lr, .seed = o.seed}, &log);
  if (!log.epoch_loss.empty())
    note("skip-gram loss " + std::to_string(log.epoch_loss.front()) + " -> " +
         std::to_string(log.epoch_loss.back()) + " over " + std::to_string(o.epochs) + " epochs");

  const fs::path out(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  table.save_tsv(out);
  emit_manifest("embed", nlohmann::json{{"seeds", o.seeds},
                                        {"dim", o.dim},
                                        {"window", o.window},
                                        {"epochs", o.epochs},
                                        {"lr", o.lr},
                                        {"seed", o.seed}},
                {fs::path(o.seeds)}, out);
  note("wrote " + out.string());
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string seeds;
  std::string vectors;
  std::string out_dir;
  int layers = 6;
  int heads = 10;
  int epochs = 100;
  double lr = 1e-3;
  int batch = 64;
  int max_train_seqs = 1024;
  std::uint64_t seed = 1;
  int threads = 1;
  bool deterministic = false;
  bool fine_tune = false;
  std::string output_activation = "linear";
};

int cmd_train(const TrainOpts& o) {
  const std::vector<addr::Address> addrs = io::load_addresses(o.seeds);
  const std::vector<addr::WordSequence> seqs = to_sequences(addrs);
  const embed::EmbeddingTable table = embed::EmbeddingTable::load_tsv(o.vectors);

  lm::ModelConfig mcfg;
  mcfg.layers = o.layers;
  mcfg.heads = o.heads;
  mcfg.d_model = table.dim();
  mcfg.ff_width = 4 * table.dim();
  mcfg.output_activation = lm::parse_output_activation(o.output_activation);
  mcfg.validate();

  lm::TrainConfig tcfg;
  tcfg.epochs = o.epochs;
  tcfg.lr = o.lr;
  tcfg.batch = o.batch;
  tcfg.seed = o.seed;
  tcfg.threads = o.deterministic ? 1 : o.threads;
  tcfg.max_train_seqs = o.max_train_seqs;
  tcfg.fine_tune_embeddings = o.fine_tune;
  tcfg.progress = [&](int epoch, double train, double val) {
    if (epoch == 0 || epoch == o.epochs - 1 || (epoch + 1) % 10 == 0) {
      std::string line = "epoch " + std::to_string(epoch + 1) + "/" + std::to_string(o.epochs) +
                         " train " + std::to_string(train);
      if (val == val) line += " val " + std::to_string(val);
      note(line);
    }
  };
  note("training " + std::to_string(o.layers) + "-layer/" + std::to_string(o.heads) +
       "-head model, d_model " + std::to_string(table.dim()) + ", " +
       std::to_string(seqs.size()) + " sequences, threads " + std::to_string(tcfg.threads));

  embed::EmbeddingTable tuned;
  lm::Transformer model =
      lm::train_lm(seqs, table, mcfg, tcfg, nullptr, o.fine_tune ? &tuned : nullptr);

  const fs::path dir(o.out_dir);
  ckpt::save_checkpoint(dir, model, o.seed, o.epochs);

  const nlohmann::json cfg{{"seeds", o.seeds},
                           {"vectors", o.vectors},
                           {"layers", o.layers},
                           {"heads", o.heads},
                           {"epochs", o.epochs},
                           {"lr", o.lr},
                           {"batch", o.batch},
                           {"max_train_seqs", o.max_train_seqs},
                           {"seed", o.seed},
                           {"threads", tcfg.threads},
                           {"fine_tune", o.fine_tune},
                           {"output_activation", o.output_activation}};
  emit_manifest("train", cfg, {fs::path(o.seeds), fs::path(o.vectors)}, dir / "params.bin");

  if (o.fine_tune) {
    const fs::path tuned_path = dir / "vectors.tsv";
    tuned.save_tsv(tuned_path);
    emit_manifest("train", cfg, {fs::path(o.seeds), fs::path(o.vectors)}, tuned_path);
    note("wrote fine-tuned vectors to " + tuned_path.string());
  }
  note("wrote checkpoint to " + dir.string());
  return 0;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOpts {
  std::string seeds;
  std::string model;
  std::string vectors;
  std::string out;
  int count = 1000;
  std::string strategy = "temperature";
  double temperature = 0.01;
  std::uint64_t seed = 1;
  int attempt_factor = 10;
};

int cmd_generate(const GenerateOpts& o) {
  const std::vector<addr::Address> addrs = io::load_addresses(o.seeds);
  const std::vector<addr::WordSequence> seqs = to_sequences(addrs);
  const embed::EmbeddingTable table = embed::EmbeddingTable::load_tsv(o.vectors);
  ckpt::LoadedCheckpoint loaded = ckpt::load_checkpoint(o.model);

  gen::GenConfig cfg;
  cfg.count = o.count;
  cfg.strategy = gen::parse_strategy(o.strategy);
  cfg.temperature = o.temperature;
  cfg.seed = o.seed;
  cfg.attempt_factor = o.attempt_factor;

  gen::GenerationRun run;
  try {
    run = gen::generate(loaded.model, table, seqs, cfg);
  } catch (gen::PartialResult& partial) {
    note(std::string("warning: ") + partial.what());
    run = std::move(partial.run);
  }
  note("generated " + std::to_string(run.candidates.size()) + " unique candidates in " +
       std::to_string(run.attempts) + " attempts");

  const fs::path out(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  io::save_addresses(run.candidates, out, "candidates");
  emit_manifest("generate",
                nlohmann::json{{"seeds", o.seeds},
                               {"model", o.model},
                               {"vectors", o.vectors},
                               {"count", o.count},
                               {"strategy", o.strategy},
                               {"temperature", o.temperature},
                               {"seed", o.seed},
                               {"attempt_factor", o.attempt_factor}},
                {fs::path(o.seeds), fs::path(o.vectors), fs::path(o.model) / "params.bin"}, out);
  note("wrote " + out.string());
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
  std::string candidates;
  std::string seeds;
  std::string universe;
  std::string out;
};

int cmd_eval(const EvalOpts& o) {
  const std::vector<addr::Address> candidates = io::load_addresses(o.candidates);
  const std::vector<addr::Address> seeds = io::load_addresses(o.seeds);
  const synth::Universe oracle = synth::load_universe(o.universe);
  const eval::EvalReport rep = eval::evaluate(candidates, seeds, oracle);

  const fs::path out(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  eval::save_metrics(rep, out);
  emit_manifest(
      "eval",
      nlohmann::json{{"candidates", o.candidates}, {"seeds", o.seeds}, {"universe", o.universe}},
      {fs::path(o.candidates), fs::path(o.seeds), fs::path(o.universe)}, out);

  std::cout << "r_hit " << rep.r_hit_pct << "% r_gen " << rep.r_gen_pct << "%\n";
  note("n_candidate " + std::to_string(rep.n_candidate) + ", n_hit " + std::to_string(rep.n_hit) +
       ", n_gen " + std::to_string(rep.n_gen) + "; wrote " + out.string());
  return 0;
}

// ---------------------------------------------------------------------------
// cluster

struct ClusterOpts {
  std::string universe;
  std::string vectors;
  std::string out;
  double eps = 0.0;  // 0 = choose automatically
  int min_pts = 4;
  int sample = 2000;
  std::uint64_t seed = 1;
};

int cmd_cluster(const ClusterOpts& o) {
  const synth::Universe u = synth::load_universe(o.universe);
  const embed::EmbeddingTable table = embed::EmbeddingTable::load_tsv(o.vectors);

  // Vectors exist only for words the embedding training saw, so members
  // with unseen words cannot be placed in either representation.
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < static_cast<std::size_t>(u.size()); ++i) {
    const addr::WordSequence seq = addr::WordSequence::from_address(u.members()[i]);
    bool ok = true;
    for (int p = 0; p < 32 && ok; ++p) ok = table.vocabulary().contains(seq.word(p));
    if (ok) eligible.push_back(i);
  }
  if (eligible.empty()) throw DataError("no universe member is fully covered by the vocabulary");
  if (eligible.size() < static_cast<std::size_t>(u.size()))
    note("skipping " + std::to_string(u.size() - static_cast<int>(eligible.size())) +
         " members with out-of-vocabulary words");

  // Deterministic sample, kept in insertion order.
  std::vector<std::size_t> chosen;
  if (o.sample > 0 && static_cast<std::size_t>(o.sample) < eligible.size()) {
    rng::Engine eng = rng::engine(o.seed, 0xc105);
    const std::vector<std::size_t> perm = rng::permutation(eligible.size(), eng);
    chosen.reserve(static_cast<std::size_t>(o.sample));
    for (int i = 0; i < o.sample; ++i) chosen.push_back(eligible[perm[static_cast<std::size_t>(i)]]);
    std::sort(chosen.begin(), chosen.end());
  } else {
    chosen = eligible;
  }

  const int n = static_cast<int>(chosen.size());
  const int d = table.dim();
  std::vector<addr::Address> members;
  members.reserve(chosen.size());
  num::Tensor vecs({n, d});
  num::Tensor onehot({n, table.vocabulary().size()});
  for (int i = 0; i < n; ++i) {
    const addr::Address& a = u.members()[chosen[static_cast<std::size_t>(i)]];
    members.push_back(a);
    const addr::WordSequence seq = addr::WordSequence::from_address(a);
    const std::vector<double> v = table.address_vector(seq);
    std::copy(v.begin(), v.end(), vecs.data() + static_cast<std::size_t>(i) * d);
    const std::vector<double> oh = embed::one_hot_address_vector(seq, table.vocabulary());
    std::copy(oh.begin(), oh.end(), onehot.data() + static_cast<std::size_t>(i) * oh.size());
  }
  note("clustering " + std::to_string(n) + " of " + std::to_string(u.size()) +
       " universe members, dim " + std::to_string(d));

  const std::optional<double> eps =
      o.eps > 0.0 ? std::optional<double>(o.eps) : std::nullopt;
  const cluster::BaselineComparison cmp = cluster::compare_baseline(vecs, onehot, eps, o.min_pts);
  const cluster::ClusterResult& res = cmp.embedding;
  note("embedding: " + std::to_string(res.cluster_count) + " clusters, " +
       std::to_string(res.noise_count) + " noise, eps " + std::to_string(res.eps) +
       ", silhouette " + std::to_string(res.silhouette));
  note("one-hot baseline silhouette " + std::to_string(cmp.one_hot.silhouette));

  const fs::path out(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  cluster::save_clusters(members, res, out);
  const nlohmann::json cfg{{"universe", o.universe}, {"vectors", o.vectors},
                           {"eps", o.eps},           {"min_pts", o.min_pts},
                           {"sample", o.sample},     {"seed", o.seed}};
  const std::vector<fs::path> inputs{fs::path(o.universe), fs::path(o.vectors)};
  emit_manifest("cluster", cfg, inputs, out);

  fs::path summary = out;
  summary.replace_extension(".summary.json");
  cluster::save_comparison(cmp, summary);
  emit_manifest("cluster", cfg, inputs, summary);
  note("wrote " + out.string() + " and " + summary.string());
  return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOpts {
  std::string seeds;
  std::string model;
  std::string vectors;
  std::string universe;
  std::string out;
  std::vector<double> temperatures{0.001, 0.01, 0.1, 1.0};
  std::vector<int> budgets;  // optional growth curve
  int count = 1000;
  std::uint64_t seed = 1;
};

int cmd_sweep(const SweepOpts& o) {
  const std::vector<addr::Address> seed_addrs = io::load_addresses(o.seeds);
  const std::vector<addr::WordSequence> seqs = to_sequences(seed_addrs);
  const embed::EmbeddingTable table = embed::EmbeddingTable::load_tsv(o.vectors);
  ckpt::LoadedCheckpoint loaded = ckpt::load_checkpoint(o.model);
  const synth::Universe oracle = synth::load_universe(o.universe);

  gen::GenConfig base;
  base.count = o.count;
  base.seed = o.seed;

  nlohmann::json j;
  j["format_version"] = 1;

  std::vector<double> temps = o.temperatures;
  std::sort(temps.begin(), temps.end());
  note("sweeping " + std::to_string(temps.size()) + " temperatures at count " +
       std::to_string(o.count));
  const std::vector<eval::SweepRow> rows =
      eval::sweep_temperature(loaded.model, table, seqs, oracle, temps, base);
  nlohmann::json jrows = nlohmann::json::array();
  for (const eval::SweepRow& r : rows) {
    nlohmann::json row;
    row["temperature"] = r.temperature;
    row["distinct_suffixes"] = r.distinct_suffixes;
    row["metrics"] = eval::to_json(r.report);
    jrows.push_back(std::move(row));
    note("t " + std::to_string(r.temperature) + ": r_hit " + r.report.r_hit_pct + "% r_gen " +
         r.report.r_gen_pct + "% distinct_suffixes " + std::to_string(r.distinct_suffixes));
  }
  j["temperature_sweep"] = std::move(jrows);

  if (!o.budgets.empty()) {
    std::vector<int> budgets = o.budgets;
    std::sort(budgets.begin(), budgets.end());
    budgets.erase(std::unique(budgets.begin(), budgets.end()), budgets.end());
    note("growth curve over " + std::to_string(budgets.size()) + " budgets up to " +
         std::to_string(budgets.back()));
    const std::vector<eval::GrowthRow> grows =
        eval::growth_curve(loaded.model, table, seqs, oracle, budgets, base);
    nlohmann::json jgrow = nlohmann::json::array();
    for (const eval::GrowthRow& g : grows) {
      jgrow.push_back(nlohmann::json{{"budget", g.budget},
                                     {"n_candidate", g.n_candidate},
                                     {"n_gen", g.n_gen},
                                     {"r_gen_pct", g.r_gen_pct}});
      note("budget " + std::to_string(g.budget) + ": n_gen " + std::to_string(g.n_gen));
    }
    j["growth_curve"] = std::move(jgrow);
  }

  const fs::path out(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw DataError("cannot open " + out.string() + " for writing");
    f << j.dump(2) << '\n';
    if (!f) throw DataError("failed writing " + out.string());
  }
  emit_manifest("sweep",
                nlohmann::json{{"seeds", o.seeds},
                               {"model", o.model},
                               {"vectors", o.vectors},
                               {"universe", o.universe},
                               {"temperatures", o.temperatures},
                               {"budgets", o.budgets},
                               {"count", o.count},
                               {"seed", o.seed}},
                {fs::path(o.seeds), fs::path(o.vectors), fs::path(o.universe),
                 fs::path(o.model) / "params.bin"},
                out);
  note("wrote " + out.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"v6forge: IPv6 address words, embeddings, and candidate generation"};
  app.set_version_flag("--version", std::string("v6forge ") + kVersionString);
  app.set_config("--config")->configurable(false);
  app.require_subcommand(1);

  SynthOpts syn;
  CLI::App* c_synth = app.add_subcommand("synth", "Synthesize a labeled active-address universe");
  c_synth->add_option("--out", syn.out_dir, "Output directory for universe/seeds/hidden files")
      ->required();
  c_synth->add_option("--count", syn.count, "Total universe size before dedupe")
      ->check(CLI::PositiveNumber);
  c_synth->add_option("--prefixes", syn.prefixes, "Number of documentation /64 prefixes")
      ->check(CLI::Range(1, 65535));
  c_synth->add_option("--seed-fraction", syn.seed_fraction, "Fraction revealed as seeds")
      ->check(CLI::Range(1e-9, 1.0 - 1e-9));
  c_synth->add_option("--seed", syn.seed, "RNG seed");

  EmbedOpts emb;
  CLI::App* c_embed = app.add_subcommand("embed", "Train word vectors from seed addresses");
  c_embed->add_option("--seeds", emb.seeds, "Seed address list")->required()
      ->check(CLI::ExistingFile);
  c_embed->add_option("--out", emb.out, "Output vectors file (TSV)")->required();
  c_embed->add_option("--dim", emb.dim, "Embedding dimension")->check(CLI::PositiveNumber);
  c_embed->add_option("--window", emb.window, "Skip-gram window")->check(CLI::PositiveNumber);
  c_embed->add_option("--epochs", emb.epochs, "Training epochs")->check(CLI::PositiveNumber);
  c_embed->add_option("--lr", emb.lr, "Learning rate")->check(CLI::PositiveNumber);
  c_embed->add_option("--seed", emb.seed, "RNG seed");

  TrainOpts trn;
  CLI::App* c_train = app.add_subcommand("train", "Train the sequence model on seed addresses");
  c_train->add_option("--seeds", trn.seeds, "Seed address list")->required()
      ->check(CLI::ExistingFile);
  c_train->add_option("--vectors", trn.vectors, "Word vectors (TSV)")->required()
      ->check(CLI::ExistingFile);
  c_train->add_option("--out", trn.out_dir, "Checkpoint output directory")->required();
  c_train->add_option("--layers", trn.layers, "Encoder/decoder layers")->check(CLI::PositiveNumber);
  c_train->add_option("--heads", trn.heads, "Attention heads")->check(CLI::PositiveNumber);
  c_train->add_option("--epochs", trn.epochs, "Training epochs")->check(CLI::PositiveNumber);
  c_train->add_option("--lr", trn.lr, "Learning rate")->check(CLI::PositiveNumber);
  c_train->add_option("--batch", trn.batch, "Batch size")->check(CLI::PositiveNumber);
  c_train->add_option("--max-train-seqs", trn.max_train_seqs,
                      "Cap on training sequences (0 = all)")
      ->check(CLI::NonNegativeNumber);
  c_train->add_option("--seed", trn.seed, "RNG seed");
  c_train->add_option("--threads", trn.threads, "Worker threads")->check(CLI::PositiveNumber);
  c_train->add_flag("--deterministic", trn.deterministic, "Force single-threaded training");
  c_train->add_flag("--fine-tune", trn.fine_tune, "Also fine-tune the word vectors");
  c_train->add_option("--output-activation", trn.output_activation, "Output head activation")
      ->check(CLI::IsMember({"linear", "sigmoid"}));

  GenerateOpts gno;
  CLI::App* c_gen = app.add_subcommand("generate", "Generate candidate addresses");
  c_gen->add_option("--seeds", gno.seeds, "Seed address list")->required()
      ->check(CLI::ExistingFile);
  c_gen->add_option("--model", gno.model, "Checkpoint directory")->required()
      ->check(CLI::ExistingDirectory);
  c_gen->add_option("--vectors", gno.vectors, "Word vectors (TSV)")->required()
      ->check(CLI::ExistingFile);
  c_gen->add_option("--out", gno.out, "Output candidate list")->required();
  c_gen->add_option("--count", gno.count, "Candidates to generate")->check(CLI::PositiveNumber);
  c_gen->add_option("--strategy", gno.strategy, "Sampling strategy")
      ->check(CLI::IsMember({"greedy", "random", "temperature"}));
  c_gen->add_option("--temperature", gno.temperature, "Softmax temperature")
      ->check(CLI::PositiveNumber);
  c_gen->add_option("--seed", gno.seed, "RNG seed");
  c_gen->add_option("--attempt-factor", gno.attempt_factor,
                    "Attempt budget as a multiple of --count")
      ->check(CLI::PositiveNumber);

  EvalOpts evo;
  CLI::App* c_eval = app.add_subcommand("eval", "Score candidates against a universe");
  c_eval->add_option("--candidates", evo.candidates, "Candidate address list")->required()
      ->check(CLI::ExistingFile);
  c_eval->add_option("--seeds", evo.seeds, "Seed address list")->required()
      ->check(CLI::ExistingFile);
  c_eval->add_option("--universe", evo.universe, "Labeled universe file")->required()
      ->check(CLI::ExistingFile);
  c_eval->add_option("--out", evo.out, "Output metrics JSON")->required();

  ClusterOpts clo;
  CLI::App* c_cluster =
      app.add_subcommand("cluster", "Project, cluster, and compare address vectors");
  c_cluster->add_option("--universe", clo.universe, "Labeled universe file")->required()
      ->check(CLI::ExistingFile);
  c_cluster->add_option("--vectors", clo.vectors, "Word vectors (TSV)")->required()
      ->check(CLI::ExistingFile);
  c_cluster->add_option("--out", clo.out, "Output clusters TSV")->required();
  c_cluster->add_option("--eps", clo.eps, "DBSCAN radius (omit to choose automatically)")
      ->check(CLI::PositiveNumber);
  c_cluster->add_option("--min-pts", clo.min_pts, "DBSCAN core threshold")
      ->check(CLI::PositiveNumber);
  c_cluster->add_option("--sample", clo.sample, "Universe sample size (0 = all members)")
      ->check(CLI::NonNegativeNumber);
  c_cluster->add_option("--seed", clo.seed, "RNG seed for sampling");

  SweepOpts swo;
  CLI::App* c_sweep =
      app.add_subcommand("sweep", "Temperature sweep and optional growth curve");
  c_sweep->add_option("--seeds", swo.seeds, "Seed address list")->required()
      ->check(CLI::ExistingFile);
  c_sweep->add_option("--model", swo.model, "Checkpoint directory")->required()
      ->check(CLI::ExistingDirectory);
  c_sweep->add_option("--vectors", swo.vectors, "Word vectors (TSV)")->required()
      ->check(CLI::ExistingFile);
  c_sweep->add_option("--universe", swo.universe, "Labeled universe file")->required()
      ->check(CLI::ExistingFile);
  c_sweep->add_option("--out", swo.out, "Output JSON")->required();
  c_sweep->add_option("--temperatures", swo.temperatures, "Temperatures to sweep")
      ->delimiter(',');
  c_sweep->add_option("--budgets", swo.budgets, "Candidate budgets for the growth curve")
      ->delimiter(',');
  c_sweep->add_option("--count", swo.count, "Candidates per sweep point")
      ->check(CLI::PositiveNumber);
  c_sweep->add_option("--seed", swo.seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints the message; 0 for --help/--version
    return code == 0 ? 0 : 1;
  }

  try {
    if (c_synth->parsed()) return cmd_synth(syn);
    if (c_embed->parsed()) return cmd_embed(emb);
    if (c_train->parsed()) return cmd_train(trn);
    if (c_gen->parsed()) return cmd_generate(gno);
    if (c_eval->parsed()) return cmd_eval(evo);
    if (c_cluster->parsed()) return cmd_cluster(clo);
    if (c_sweep->parsed()) return cmd_sweep(swo);
  } catch (const ParamError& e) {
    std::cerr << "v6forge: error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "v6forge: error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "v6forge: internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
