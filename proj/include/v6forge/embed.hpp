#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "v6forge/addr.hpp"
#include "v6forge/corpus.hpp"
#include "v6forge/optim.hpp"
#include "v6forge/tensor.hpp"

namespace v6forge::embed {

struct EmbedConfig {
  int dim = 100;
  int epochs = 50;
  double lr = 1e-3;
  std::uint64_t seed = 1;
};

/// Trained word vectors keyed by vocabulary id.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  EmbeddingTable(corpus::Vocabulary vocab, num::Tensor rows)
      : vocab_(std::move(vocab)), rows_(std::move(rows)) {
    if (rows_.rank() != 2 || rows_.dim(0) != vocab_.size())
      throw ShapeError("embedding rows " + num::shape_text(rows_.shape()) +
                       " do not match vocabulary size " + std::to_string(vocab_.size()));
  }

  const corpus::Vocabulary& vocabulary() const { return vocab_; }
  int dim() const { return rows_.dim(1); }
  int size() const { return rows_.dim(0); }
  const num::Tensor& rows() const { return rows_; }

  std::span<const double> row(int id) const {
    if (id < 0 || id >= size()) throw IndexError("word id out of range: " + std::to_string(id));
    return rows_.values().subspan(static_cast<std::size_t>(id) * static_cast<std::size_t>(dim()),
                                  static_cast<std::size_t>(dim()));
  }

  std::vector<double> vector_of(const addr::AddressWord& w) const {
    const auto r = row(vocab_.id_of(w));
    return {r.begin(), r.end()};
  }

  /// Address vector: elementwise mean of the 32 word vectors.
  std::vector<double> address_vector(const addr::WordSequence& seq) const {
    std::vector<double> out(static_cast<std::size_t>(dim()), 0.0);
    for (int i = 0; i < 32; ++i) {
      const auto r = row(vocab_.id_of(seq.word(i)));
      for (std::size_t j = 0; j < out.size(); ++j) out[j] += r[j];
    }
    for (double& x : out) x /= 32.0;
    return out;
  }

  /// word<TAB>v1<TAB>...<TAB>vD per line, %.9g, vocabulary id order.
  void save_tsv(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path.string() + " for writing");
    char buf[32];
    for (int id = 0; id < size(); ++id) {
      f << vocab_.word_text(id);
      for (double v : row(id)) {
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        f << '\t' << buf;
      }
      f << '\n';
    }
    if (!f) throw DataError("failed writing " + path.string());
  }

  static EmbeddingTable load_tsv(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path.string());
    std::vector<addr::AddressWord> words;
    std::vector<std::vector<double>> vecs;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string word_text;
      if (!std::getline(ss, word_text, '\t'))
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": missing word column");
      addr::AddressWord w;
      try {
        w = addr::AddressWord::parse(word_text);
      } catch (const ParseError& e) {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
      std::vector<double> vec;
      std::string cell;
      while (std::getline(ss, cell, '\t')) {
        try {
          std::size_t used = 0;
          vec.push_back(std::stod(cell, &used));
          if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
          throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad value \"" + cell + "\"");
        }
      }
      if (vec.empty())
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": no vector values");
      if (!vecs.empty() && vec.size() != vecs.front().size())
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": inconsistent dimension");
      words.push_back(w);
      vecs.push_back(std::move(vec));
    }
    if (words.empty()) throw DataError(path.string() + ": empty vectors file");
    corpus::Vocabulary vocab = corpus::Vocabulary::from_words(words);
    const int dim = static_cast<int>(vecs.front().size());
    num::Tensor rows({static_cast<int>(words.size()), dim});
    for (std::size_t i = 0; i < words.size(); ++i) {
      const int id = vocab.id_of(words[i]);
      for (int j = 0; j < dim; ++j) rows.at(id, j) = vecs[i][static_cast<std::size_t>(j)];
    }
    return EmbeddingTable(std::move(vocab), std::move(rows));
  }

 private:
  corpus::Vocabulary vocab_;
  num::Tensor rows_;
};

struct TrainLog {
  std::vector<double> epoch_loss;
};

/// Pair counts aggregated over the sample stream: counts(i, j) is how often
/// context j was observed for input i.
inline num::Tensor count_pairs(std::span<const corpus::SkipGramSample> samples, int vocab_size) {
  if (samples.empty()) throw EmptyCorpusError("no skip-gram samples");
  num::Tensor counts({vocab_size, vocab_size});
  for (const auto& s : samples) counts.at(s.input_id, s.context_id) += 1.0;
  return counts;
}

/// One full-batch pass of the softmax skip-gram objective. Returns the mean
/// cross-entropy over all counted pairs; when `fill_grads` is set the exact
/// mean-gradient lands in the parameter grads (overwriting them). Because
/// every pair appears in the aggregate, this equals the mean over an
/// explicit per-sample pass.
inline double skipgram_epoch(const num::Tensor& counts, num::Parameter& w_in,
                             num::Parameter& w_out, bool fill_grads) {
  const int v = counts.dim(0);
  const int d = w_in.value.dim(1);
  if (w_in.value.dim(0) != v || w_out.value.dim(0) != d || w_out.value.dim(1) != v)
    throw ShapeError("skip-gram parameter shapes disagree with vocabulary size");
  const double* cv = counts.data();
  const std::size_t vv = static_cast<std::size_t>(v) * static_cast<std::size_t>(v);
  const double total = num::detail::sum_n(cv, static_cast<std::ptrdiff_t>(vv));
  if (total <= 0.0) throw EmptyCorpusError("no counted pairs");

  num::EMat logits = w_in.value.mat() * w_out.value.mat();
  num::EMat logp(v, v);
  for (int r = 0; r < v; ++r) {
    const double* lr = logits.data() + static_cast<std::ptrdiff_t>(r) * v;
    const double mx = num::detail::max_n(lr, v);
    double sum = 0.0;
    for (int j = 0; j < v; ++j) sum += std::exp(lr[j] - mx);
    const double lse = std::log(sum) + mx;
    for (int j = 0; j < v; ++j) logp(r, j) = lr[j] - lse;
  }
  const double loss = -num::detail::dot_n(cv, logp.data(), static_cast<std::ptrdiff_t>(vv)) / total;

  if (fill_grads) {
    num::EMat glogits(v, v);
    for (int r = 0; r < v; ++r) {
      const double* cr = cv + static_cast<std::ptrdiff_t>(r) * v;
      const double n_r = num::detail::sum_n(cr, v);
      for (int j = 0; j < v; ++j) glogits(r, j) = (n_r * std::exp(logp(r, j)) - cr[j]) / total;
    }
    w_in.zero_grad();
    w_out.zero_grad();
    w_in.grad.mat().noalias() = glogits * w_out.value.mat().transpose();
    w_out.grad.mat().noalias() = w_in.value.mat().transpose() * glogits;
  }
  return loss;
}

/// Trains word vectors with full-softmax skip-gram. One optimizer step per
/// epoch over the aggregated pair counts.
inline EmbeddingTable train_embeddings(std::span<const corpus::SkipGramSample> samples,
                                       const corpus::Vocabulary& vocab, const EmbedConfig& cfg = {},
                                       TrainLog* log = nullptr) {
  if (cfg.dim <= 0) throw ParamError("embedding dim must be positive");
  if (cfg.epochs <= 0) throw ParamError("epochs must be positive");
  const int v = vocab.size();
  const num::Tensor counts = count_pairs(samples, v);

  rng::Engine eng = rng::engine(cfg.seed, 0xe3bed);
  const double s = 0.5 / cfg.dim;
  num::Parameter w_in("w_in", num::Tensor::uniform({v, cfg.dim}, -s, s, eng));
  num::Parameter w_out("w_out", num::Tensor({cfg.dim, v}));

  num::Adam opt({.lr = cfg.lr});
  std::vector<num::Parameter*> params = {&w_in, &w_out};
  for (int e = 0; e < cfg.epochs; ++e) {
    const double loss = skipgram_epoch(counts, w_in, w_out, true);
    opt.step(params);
    if (log) log->epoch_loss.push_back(loss);
  }
  return EmbeddingTable(vocab, std::move(w_in.value));
}

/// Sparse one-hot address baseline: mean of one-hot word vectors, so each of
/// the 32 word ids carries weight 1/32.
inline std::vector<double> one_hot_address_vector(const addr::WordSequence& seq,
                                                  const corpus::Vocabulary& vocab) {
  std::vector<double> out(static_cast<std::size_t>(vocab.size()), 0.0);
  for (int i = 0; i < 32; ++i) out[static_cast<std::size_t>(vocab.id_of(seq.word(i)))] += 1.0 / 32.0;
  return out;
}

}  // namespace v6forge::embed
