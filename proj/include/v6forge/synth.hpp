// Synthetic active-address universe: a materialized stand-in for live
// scanning. Four addressing schemes with tunable structure populate a pool
// of documentation prefixes; the resulting set answers activity queries
// exactly and splits into seed/hidden halves for end-to-end evaluation.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "v6forge/addr.hpp"
#include "v6forge/errors.hpp"
#include "v6forge/rng.hpp"

namespace v6forge::synth {

enum class Scheme { fixed_iid, structured_subnet, eui64, privacy };

inline std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::fixed_iid: return "fixed-iid";
    case Scheme::structured_subnet: return "structured-subnet";
    case Scheme::eui64: return "eui64";
    case Scheme::privacy: return "privacy";
  }
  throw ParamError("invalid scheme");
}

inline Scheme parse_scheme(const std::string& s) {
  if (s == "fixed-iid") return Scheme::fixed_iid;
  if (s == "structured-subnet") return Scheme::structured_subnet;
  if (s == "eui64") return Scheme::eui64;
  if (s == "privacy") return Scheme::privacy;
  throw ParamError("unknown scheme \"" + s + "\"");
}

/// One addressing scheme over a prefix pool. `count` addresses are spread
/// round robin over the prefixes; the kind-specific fields shape the
/// interface identifier (the low 64 bits).
struct SchemeSpec {
  Scheme kind = Scheme::fixed_iid;
  std::vector<std::uint64_t> prefixes;  // high-64 values, /64 networks
  int count = 0;

  // fixed-iid: IIDs come from {1..iid_set_size}, the same set in every
  // prefix (hosts numbered ::1, ::2, ... across networks).
  int iid_set_size = 256;

  // structured-subnet: nybbles at pattern_positions draw from `alphabet`,
  // nybbles at host_positions are uniform over 0..15, all other suffix
  // nybbles are zero. Positions are 0-based within the full address, so the
  // suffix spans 16..31.
  std::vector<int> alphabet = {0, 1, 2, 3};
  std::vector<int> pattern_positions = {16, 17, 18, 19};
  std::vector<int> host_positions = {28, 29, 30, 31};

  // eui64: the IID embeds a MAC address: three OUI bytes (universal/local
  // bit flipped), the 0xfffe marker, then three device bytes of which only
  // the low `device_entropy_bits` are random.
  std::vector<std::uint32_t> oui_pool = {0x00163e, 0x001a2b, 0x3c0754, 0x001b21};
  int device_entropy_bits = 16;

  // privacy: IIDs are uniform 64-bit values; no extra parameters.
};

namespace detail {

inline void validate(const SchemeSpec& spec) {
  if (spec.count < 0) throw ParamError("scheme count must be non-negative");
  if (spec.count == 0) return;
  if (spec.prefixes.empty()) throw ParamError("scheme with a positive count needs prefixes");
  switch (spec.kind) {
    case Scheme::fixed_iid:
      if (spec.iid_set_size < 1) throw ParamError("fixed-iid set size must be positive");
      if (static_cast<long>(spec.count) >
          static_cast<long>(spec.prefixes.size()) * spec.iid_set_size)
        throw ParamError("fixed-iid count exceeds prefixes x iid set size");
      break;
    case Scheme::structured_subnet: {
      if (spec.alphabet.empty()) throw ParamError("structured-subnet alphabet is empty");
      for (int v : spec.alphabet)
        if (v < 0 || v > 15) throw ParamError("alphabet values must be nybbles (0..15)");
      std::array<bool, 32> used{};
      auto claim = [&](const std::vector<int>& positions, const char* what) {
        if (positions.empty()) throw ParamError(std::string(what) + " positions are empty");
        for (int p : positions) {
          if (p < 16 || p > 31)
            throw ParamError(std::string(what) + " positions must lie in the suffix (16..31)");
          if (used[static_cast<std::size_t>(p)])
            throw ParamError("position " + std::to_string(p) + " listed twice");
          used[static_cast<std::size_t>(p)] = true;
        }
      };
      claim(spec.pattern_positions, "pattern");
      claim(spec.host_positions, "host");
      break;
    }
    case Scheme::eui64:
      if (spec.oui_pool.empty()) throw ParamError("eui64 OUI pool is empty");
      for (std::uint32_t oui : spec.oui_pool)
        if (oui > 0xffffff) throw ParamError("OUI must fit 24 bits");
      if (spec.device_entropy_bits < 0 || spec.device_entropy_bits > 24)
        throw ParamError("device entropy must be 0..24 bits");
      break;
    case Scheme::privacy:
      break;
  }
}

/// Number of distinct IIDs the scheme can produce within one prefix.
/// Saturates at 2^63 to stay in range; only small supports matter exactly.
inline double support_per_prefix(const SchemeSpec& spec) {
  switch (spec.kind) {
    case Scheme::fixed_iid: return static_cast<double>(spec.iid_set_size);
    case Scheme::structured_subnet:
      return std::pow(static_cast<double>(spec.alphabet.size()),
                      static_cast<double>(spec.pattern_positions.size())) *
             std::pow(16.0, static_cast<double>(spec.host_positions.size()));
    case Scheme::eui64:
      return static_cast<double>(spec.oui_pool.size()) *
             std::pow(2.0, static_cast<double>(spec.device_entropy_bits));
    case Scheme::privacy: return std::pow(2.0, 64.0);
  }
  throw ParamError("invalid scheme");
}

/// How many of the spec's addresses land in prefix slot j (round robin).
inline int count_in_slot(const SchemeSpec& spec, std::size_t j) {
  const int p = static_cast<int>(spec.prefixes.size());
  return spec.count / p + (static_cast<int>(j) < spec.count % p ? 1 : 0);
}

/// Decodes a structured-subnet IID from a mixed-radix index: pattern digits
/// first (ascending position), then host digits.
inline std::uint64_t structured_iid(const SchemeSpec& spec, std::uint64_t index) {
  std::uint64_t iid = 0;
  auto put = [&](int pos, std::uint64_t value) {
    iid |= value << (4 * (31 - pos));  // nybble 16 is the IID's top nybble
  };
  for (int pos : spec.pattern_positions) {
    put(pos, static_cast<std::uint64_t>(
                 spec.alphabet[static_cast<std::size_t>(index % spec.alphabet.size())]));
    index /= spec.alphabet.size();
  }
  for (int pos : spec.host_positions) {
    put(pos, index % 16);
    index /= 16;
  }
  return iid;
}

inline std::uint64_t eui64_iid(const SchemeSpec& spec, std::uint64_t index) {
  const std::uint64_t dev_space = 1ull << spec.device_entropy_bits;
  const std::uint32_t oui = spec.oui_pool[static_cast<std::size_t>(index / dev_space)];
  const std::uint64_t device = index % dev_space;
  std::uint64_t iid = 0;
  iid |= static_cast<std::uint64_t>((oui >> 16) ^ 0x02) << 56;  // U/L bit flipped
  iid |= static_cast<std::uint64_t>((oui >> 8) & 0xff) << 48;
  iid |= static_cast<std::uint64_t>(oui & 0xff) << 40;
  iid |= 0xffull << 32;
  iid |= 0xfeull << 24;
  iid |= device & 0xffffff;
  return iid;
}

/// Draws `want` distinct indices below `support`, deterministically. Small
/// or nearly-full supports are enumerated and shuffled; large ones use
/// rejection sampling.
inline std::vector<std::uint64_t> distinct_indices(std::uint64_t want, double support,
                                                   rng::Engine& eng) {
  std::vector<std::uint64_t> out;
  if (want == 0) return out;
  if (support < static_cast<double>(want))
    throw ParamError("scheme count exceeds the scheme's address support");
  if (support <= 2.0 * static_cast<double>(want)) {
    std::vector<std::uint64_t> all(static_cast<std::size_t>(support));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    rng::shuffle(all, eng);
    all.resize(static_cast<std::size_t>(want));
    return all;
  }
  std::unordered_set<std::uint64_t> seen;
  out.reserve(static_cast<std::size_t>(want));
  while (out.size() < want) {
    const std::uint64_t idx = support >= 18446744073709551616.0
                                  ? eng()
                                  : rng::below(eng, static_cast<std::uint64_t>(support));
    if (seen.insert(idx).second) out.push_back(idx);
  }
  return out;
}

}  // namespace detail

/// True when the address could have been produced by the spec (prefix and
/// IID shape both match). Used as the post-synthesis predicate check.
inline bool matches_scheme(const SchemeSpec& spec, const addr::Address& a) {
  const bool prefix_ok = std::find(spec.prefixes.begin(), spec.prefixes.end(), a.high64()) !=
                         spec.prefixes.end();
  if (!prefix_ok) return false;
  const std::uint64_t iid = a.low64();
  switch (spec.kind) {
    case Scheme::fixed_iid:
      return iid >= 1 && iid <= static_cast<std::uint64_t>(spec.iid_set_size);
    case Scheme::structured_subnet: {
      for (int pos = 16; pos < 32; ++pos) {
        const int v = a.nybble(pos);
        const bool is_pattern = std::find(spec.pattern_positions.begin(),
                                          spec.pattern_positions.end(),
                                          pos) != spec.pattern_positions.end();
        const bool is_host = std::find(spec.host_positions.begin(), spec.host_positions.end(),
                                       pos) != spec.host_positions.end();
        if (is_pattern) {
          if (std::find(spec.alphabet.begin(), spec.alphabet.end(), v) == spec.alphabet.end())
            return false;
        } else if (!is_host && v != 0) {
          return false;
        }
      }
      return true;
    }
    case Scheme::eui64: {
      if (((iid >> 32) & 0xff) != 0xff || ((iid >> 24) & 0xff) != 0xfe) return false;
      const std::uint32_t oui = (static_cast<std::uint32_t>((iid >> 56) ^ 0x02) << 16) |
                                (static_cast<std::uint32_t>(iid >> 48) & 0xff) << 8 |
                                (static_cast<std::uint32_t>(iid >> 40) & 0xff);
      if (std::find(spec.oui_pool.begin(), spec.oui_pool.end(), oui) == spec.oui_pool.end())
        return false;
      const std::uint64_t device = iid & 0xffffff;
      return spec.device_entropy_bits >= 24 || device < (1ull << spec.device_entropy_bits);
    }
    case Scheme::privacy:
      return true;
  }
  return false;
}

/// The materialized active set. Immutable after synthesis; membership and
/// label lookups are exact.
class Universe {
 public:
  Universe() = default;

  static Universe from_members(std::vector<addr::Address> members, std::vector<std::string> labels,
                               std::uint64_t seed) {
    if (members.size() != labels.size())
      throw ParamError("universe members and labels differ in length");
    Universe u;
    u.seed_ = seed;
    for (std::size_t i = 0; i < members.size(); ++i) u.add(members[i], labels[i]);
    return u;
  }

  /// Appends a member; duplicates are ignored (first label wins). Returns
  /// whether the address was new.
  bool add(const addr::Address& a, const std::string& label) {
    if (index_.count(a)) return false;
    int lid = -1;
    for (std::size_t i = 0; i < label_names_.size(); ++i)
      if (label_names_[i] == label) lid = static_cast<int>(i);
    if (lid < 0) {
      lid = static_cast<int>(label_names_.size());
      label_names_.push_back(label);
    }
    index_.emplace(a, lid);
    members_.push_back(a);
    member_labels_.push_back(lid);
    return true;
  }

  int size() const { return static_cast<int>(members_.size()); }
  const std::vector<addr::Address>& members() const { return members_; }
  const std::vector<std::string>& label_names() const { return label_names_; }
  std::uint64_t seed() const { return seed_; }

  bool is_active(const addr::Address& a) const { return index_.count(a) > 0; }

  /// Scheme label of a member; DataError for non-members.
  const std::string& label_of(const addr::Address& a) const {
    const auto it = index_.find(a);
    if (it == index_.end()) throw DataError("address is not a universe member");
    return label_names_[static_cast<std::size_t>(it->second)];
  }

  const std::string& label_at(int i) const {
    return label_names_[static_cast<std::size_t>(
        member_labels_[static_cast<std::size_t>(i)])];
  }

  /// Members per label, in label registration order.
  std::unordered_map<std::string, int> label_counts() const {
    std::unordered_map<std::string, int> out;
    for (int lid : member_labels_) out[label_names_[static_cast<std::size_t>(lid)]]++;
    return out;
  }

 private:
  std::vector<addr::Address> members_;
  std::vector<int> member_labels_;
  std::vector<std::string> label_names_;
  std::unordered_map<addr::Address, int, addr::AddressHash> index_;
  std::uint64_t seed_ = 0;
};

/// Materializes every spec in order. Deterministic under `seed`; every
/// produced address is re-checked against its scheme predicate.
inline Universe synthesize(const std::vector<SchemeSpec>& specs, std::uint64_t seed) {
  if (specs.empty()) throw ParamError("no scheme specs to synthesize");
  long total = 0;
  for (const SchemeSpec& spec : specs) {
    detail::validate(spec);
    total += spec.count;
  }
  if (total < 1) throw ParamError("total universe count must be at least 1");

  Universe u = Universe::from_members({}, {}, seed);
  for (std::size_t si = 0; si < specs.size(); ++si) {
    const SchemeSpec& spec = specs[si];
    if (spec.count == 0) continue;
    const std::string label = to_string(spec.kind);
    const std::size_t np = spec.prefixes.size();

    if (spec.kind == Scheme::fixed_iid) {
      // Enumerated, not sampled: prefix c%np gets IID 1 + c/np, so every
      // prefix shares the low IID numbers.
      for (int c = 0; c < spec.count; ++c) {
        const std::uint64_t hi = spec.prefixes[static_cast<std::size_t>(c) % np];
        const std::uint64_t iid = 1 + static_cast<std::uint64_t>(c) / np;
        const addr::Address a = addr::Address::from_halves(hi, iid);
        if (!matches_scheme(spec, a)) throw StateError("synthesized address fails its predicate");
        u.add(a, label);
      }
      continue;
    }

    for (std::size_t j = 0; j < np; ++j) {
      const int want = detail::count_in_slot(spec, j);
      if (want == 0) continue;
      rng::Engine eng = rng::engine(seed, 0x0becca + si, j);
      std::vector<std::uint64_t> iids;
      switch (spec.kind) {
        case Scheme::structured_subnet: {
          const auto idx = detail::distinct_indices(static_cast<std::uint64_t>(want),
                                                    detail::support_per_prefix(spec), eng);
          for (std::uint64_t i : idx) iids.push_back(detail::structured_iid(spec, i));
          break;
        }
        case Scheme::eui64: {
          const auto idx = detail::distinct_indices(static_cast<std::uint64_t>(want),
                                                    detail::support_per_prefix(spec), eng);
          for (std::uint64_t i : idx) iids.push_back(detail::eui64_iid(spec, i));
          break;
        }
        case Scheme::privacy: {
          const auto idx = detail::distinct_indices(static_cast<std::uint64_t>(want),
                                                    detail::support_per_prefix(spec), eng);
          iids = idx;
          break;
        }
        default: break;
      }
      for (std::uint64_t iid : iids) {
        const addr::Address a = addr::Address::from_halves(spec.prefixes[j], iid);
        if (!matches_scheme(spec, a)) throw StateError("synthesized address fails its predicate");
        u.add(a, label);
      }
    }
  }
  return u;
}

/// Disjoint stratified partition: per label, a seeded shuffle selects
/// round(fraction * label size) members as seeds; both halves keep universe
/// insertion order.
struct SplitResult {
  std::vector<addr::Address> seeds;
  std::vector<addr::Address> hidden;
};

inline SplitResult split(const Universe& u, double seed_fraction, std::uint64_t rng_seed) {
  if (!(seed_fraction > 0.0 && seed_fraction < 1.0))
    throw ParamError("seed fraction must lie strictly between 0 and 1");
  if (u.size() < 2) throw ParamError("cannot split a universe with fewer than 2 members");

  std::unordered_map<std::string, std::vector<int>> by_label;
  for (int i = 0; i < u.size(); ++i) by_label[u.label_at(i)].push_back(i);

  std::vector<bool> is_seed(static_cast<std::size_t>(u.size()), false);
  // Iterate labels in registration order so the partition is deterministic.
  for (std::size_t lid = 0; lid < u.label_names().size(); ++lid) {
    std::vector<int>& idx = by_label[u.label_names()[lid]];
    rng::Engine eng = rng::engine(rng_seed, 0x59117, lid);
    rng::shuffle(idx, eng);
    const long take = std::llround(seed_fraction * static_cast<double>(idx.size()));
    for (long i = 0; i < take; ++i) is_seed[static_cast<std::size_t>(idx[i])] = true;
  }

  SplitResult out;
  for (int i = 0; i < u.size(); ++i) {
    (is_seed[static_cast<std::size_t>(i)] ? out.seeds : out.hidden)
        .push_back(u.members()[static_cast<std::size_t>(i)]);
  }
  if (out.seeds.empty() || out.hidden.empty())
    throw ParamError("split fraction leaves one side empty");
  return out;
}

/// Chance that one uniform draw from a random seed prefix hits an active
/// address: per-prefix active counts / 2^64, averaged over distinct
/// prefixes. Analytic, from the target counts.
inline double random_baseline_rate(const std::vector<SchemeSpec>& specs) {
  if (specs.empty()) throw ParamError("no scheme specs");
  std::unordered_map<std::uint64_t, double> per_prefix;
  for (const SchemeSpec& spec : specs) {
    detail::validate(spec);
    if (spec.count == 0) continue;
    for (std::size_t j = 0; j < spec.prefixes.size(); ++j)
      per_prefix[spec.prefixes[j]] += detail::count_in_slot(spec, j);
  }
  if (per_prefix.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [prefix, count] : per_prefix) sum += count;
  const double two64 = 18446744073709551616.0;
  return sum / static_cast<double>(per_prefix.size()) / two64;
}

/// Documentation-range prefix pool: 2001:db8:x::/64 for x = 0..n-1.
inline std::vector<std::uint64_t> documentation_prefixes(int n) {
  if (n < 1 || n > 0xffff) throw ParamError("prefix count must be 1..65535");
  std::vector<std::uint64_t> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int x = 0; x < n; ++x)
    out.push_back((0x2001ull << 48) | (0x0db8ull << 32) | (static_cast<std::uint64_t>(x) << 16));
  return out;
}

/// Default mixture: 30% fixed-iid, 30% structured-subnet, 30% eui64, 10%
/// privacy over 20 documentation prefixes. Privacy takes the remainder so
/// the counts add up to `total` exactly.
inline std::vector<SchemeSpec> default_mixture(int total = 50000, int prefix_count = 20) {
  if (total < 4) throw ParamError("mixture total must be at least 4");
  const std::vector<std::uint64_t> prefixes = documentation_prefixes(prefix_count);
  const int third = static_cast<int>(std::llround(0.3 * total));

  SchemeSpec fixed;
  fixed.kind = Scheme::fixed_iid;
  fixed.prefixes = prefixes;
  fixed.count = third;
  fixed.iid_set_size = (third + prefix_count - 1) / prefix_count;

  SchemeSpec structured;
  structured.kind = Scheme::structured_subnet;
  structured.prefixes = prefixes;
  structured.count = third;

  SchemeSpec eui;
  eui.kind = Scheme::eui64;
  eui.prefixes = prefixes;
  eui.count = third;

  SchemeSpec privacy;
  privacy.kind = Scheme::privacy;
  privacy.prefixes = prefixes;
  privacy.count = total - 3 * third;

  return {fixed, structured, eui, privacy};
}

/// universe.txt: "<address>\t<label>" per line, leading "# " comments
/// allowed. Written in insertion order with a format-version header.
inline void save_universe(const Universe& u, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "# v6forge universe format 1\n";
  for (int i = 0; i < u.size(); ++i)
    out << addr::format_address(u.members()[static_cast<std::size_t>(i)]) << '\t' << u.label_at(i)
        << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

inline Universe load_universe(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  Universe u;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab + 1 >= line.size())
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": expected \"address<TAB>label\"");
    try {
      u.add(addr::parse_address(line.substr(0, tab)), line.substr(tab + 1));
    } catch (const ParseError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (u.size() == 0) throw DataError(path.string() + ": no universe members");
  return u;
}

}  // namespace v6forge::synth
