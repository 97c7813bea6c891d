#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "v6forge/addr.hpp"
#include "v6forge/errors.hpp"

namespace v6forge::corpus {

/// Distinct words of a seed corpus. Ids are assigned in (index, value)
/// order, so id 0 is the smallest-value word at position 0. Size is at
/// most 512 (16 values x 32 positions).
class Vocabulary {
 public:
  static Vocabulary build(std::span<const addr::WordSequence> seeds) {
    if (seeds.empty()) throw EmptyCorpusError("cannot build a vocabulary from zero sequences");
    Vocabulary v;
    std::array<std::array<bool, 16>, 32> seen{};
    for (const auto& seq : seeds) {
      for (int i = 0; i < 32; ++i) {
        seen[static_cast<std::size_t>(i)][static_cast<std::size_t>(seq.word(i).value)] = true;
      }
    }
    for (auto& row : v.id_by_pos_) row.fill(-1);
    for (int i = 0; i < 32; ++i) {
      for (int val = 0; val < 16; ++val) {
        if (!seen[static_cast<std::size_t>(i)][static_cast<std::size_t>(val)]) continue;
        const int id = static_cast<int>(v.words_.size());
        v.words_.push_back(addr::AddressWord{static_cast<std::uint8_t>(val), static_cast<std::uint8_t>(i)});
        v.id_by_pos_[static_cast<std::size_t>(i)][static_cast<std::size_t>(val)] = id;
        v.by_index_[static_cast<std::size_t>(i)].push_back(id);
      }
    }
    return v;
  }

  /// Rebuilds a vocabulary from an explicit word list (e.g. a vectors file).
  /// Words may arrive in any order; ids are reassigned canonically.
  static Vocabulary from_words(std::vector<addr::AddressWord> words) {
    if (words.empty()) throw EmptyCorpusError("cannot build a vocabulary from zero words");
    std::sort(words.begin(), words.end(),
              [](const addr::AddressWord& a, const addr::AddressWord& b) {
                return a.index != b.index ? a.index < b.index : a.value < b.value;
              });
    Vocabulary v;
    for (auto& row : v.id_by_pos_) row.fill(-1);
    for (const auto& w : words) {
      if (w.index > 31 || w.value > 15) throw VocabError("word out of range");
      if (v.id_by_pos_[w.index][w.value] >= 0)
        throw VocabError("duplicate word \"" + w.text() + "\"");
      const int id = static_cast<int>(v.words_.size());
      v.words_.push_back(w);
      v.id_by_pos_[w.index][w.value] = id;
      v.by_index_[w.index].push_back(id);
    }
    return v;
  }

  int size() const { return static_cast<int>(words_.size()); }

  const addr::AddressWord& word(int id) const {
    if (id < 0 || id >= size()) throw IndexError("word id out of range: " + std::to_string(id));
    return words_[static_cast<std::size_t>(id)];
  }

  std::string word_text(int id) const { return word(id).text(); }

  /// Id of a word, or -1 when absent.
  int find(const addr::AddressWord& w) const {
    if (w.index > 31 || w.value > 15) return -1;
    return id_by_pos_[w.index][w.value];
  }

  int id_of(const addr::AddressWord& w) const {
    const int id = find(w);
    if (id < 0) throw VocabError("word \"" + w.text() + "\" is not in the vocabulary");
    return id;
  }

  bool contains(const addr::AddressWord& w) const { return find(w) >= 0; }

  /// Ids of all words at a given position, ascending by value.
  const std::vector<int>& words_at_position(int pos) const {
    if (pos < 0 || pos > 31) throw IndexError("position out of range: " + std::to_string(pos));
    return by_index_[static_cast<std::size_t>(pos)];
  }

  bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

 private:
  std::vector<addr::AddressWord> words_;
  std::array<std::array<int, 16>, 32> id_by_pos_{};
  std::array<std::vector<int>, 32> by_index_;
};

/// One training pair: the id of a center word and one context word.
struct SkipGramSample {
  int input_id = 0;
  int context_id = 0;
  bool operator==(const SkipGramSample&) const = default;
};

/// Emits one sample per (center, context) pair with 0 < |distance| <= window,
/// clipped at the sequence ends. Order: sequence, then center position, then
/// context position, both ascending.
inline std::vector<SkipGramSample> generate_samples(std::span<const addr::WordSequence> seeds,
                                                    const Vocabulary& vocab, int window = 5) {
  if (window < 1) throw ParamError("window must be >= 1, got " + std::to_string(window));
  if (seeds.empty()) throw EmptyCorpusError("cannot generate samples from zero sequences");
  std::vector<SkipGramSample> out;
  for (const auto& seq : seeds) {
    for (int p = 0; p < 32; ++p) {
      const int input_id = vocab.id_of(seq.word(p));
      const int lo = std::max(0, p - window);
      const int hi = std::min(31, p + window);
      for (int q = lo; q <= hi; ++q) {
        if (q == p) continue;
        out.push_back({input_id, vocab.id_of(seq.word(q))});
      }
    }
  }
  return out;
}

/// Basis vector of length `size` with a 1 at `id`.
inline std::vector<double> one_hot(int id, int size) {
  if (size <= 0) throw ParamError("one_hot size must be positive");
  if (id < 0 || id >= size)
    throw IndexError("one_hot id " + std::to_string(id) + " out of range for size " + std::to_string(size));
  std::vector<double> v(static_cast<std::size_t>(size), 0.0);
  v[static_cast<std::size_t>(id)] = 1.0;
  return v;
}

}  // namespace v6forge::corpus
