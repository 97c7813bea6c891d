#include "v6forge/addr.hpp"

#include <arpa/inet.h>
#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "v6forge/rng.hpp"

using namespace v6forge;
using addr::Address;
using addr::AddressWord;
using addr::WordSequence;

namespace {

// Oracle: system inet_pton/inet_ntop. glibc's inet_ntop follows the same
// canonical rules for pure-hex output; samples it would print with dotted
// IPv4 notation are skipped.
std::string ntop_oracle(const Address& a) {
  char buf[INET6_ADDRSTRLEN] = {};
  inet_ntop(AF_INET6, a.bytes().data(), buf, sizeof(buf));
  return std::string(buf);
}

Address pton_oracle(const std::string& text) {
  Address::Bytes b{};
  EXPECT_EQ(inet_pton(AF_INET6, text.c_str(), b.data()), 1) << text;
  return Address(b);
}

}  // namespace

TEST(Address, ParseFullForm) {
  const Address a = addr::parse_address("2001:0db8:0000:0000:0000:0000:0000:0003");
  EXPECT_EQ(a.bytes()[0], 0x20);
  EXPECT_EQ(a.bytes()[1], 0x01);
  EXPECT_EQ(a.bytes()[2], 0x0d);
  EXPECT_EQ(a.bytes()[3], 0xb8);
  for (int i = 4; i < 15; ++i) EXPECT_EQ(a.bytes()[static_cast<std::size_t>(i)], 0);
  EXPECT_EQ(a.bytes()[15], 0x03);
}

TEST(Address, ParseCompressed) {
  EXPECT_EQ(addr::parse_address("2001:db8::3"), addr::parse_address("2001:0db8:0:0:0:0:0:3"));
  EXPECT_EQ(addr::parse_address("::"), Address());
  EXPECT_EQ(addr::parse_address("::1").bytes()[15], 1);
  EXPECT_EQ(addr::parse_address("1::").bytes()[1], 1);
  EXPECT_EQ(addr::parse_address("ABCD::ef01").group(0), 0xabcd);
}

TEST(Address, ParseMatchesSystemOracle) {
  const std::vector<std::string> cases = {
      "2001:db8::3",  "::",    "::1",  "1::", "fe80::1:2:3:4", "2001:db8:0:1:1:1:1:1",
      "1:0:0:1:0:0:1:1", "a:b:c:d:e:f:1:2", "ffff:ffff:ffff:ffff:ffff:ffff:ffff:ffff",
  };
  for (const auto& text : cases) {
    EXPECT_EQ(addr::parse_address(text), pton_oracle(text)) << text;
  }
}

TEST(Address, ParseRejectsMalformed) {
  const std::vector<std::string> bad = {
      "",
      ":",
      ":::",
      "1:2:3:4:5:6:7",
      "1:2:3:4:5:6:7:8:9",
      "1::2::3",
      "12345::",
      "g::1",
      "2001:db8::1%eth0",
      "::ffff:1.2.3.4",
      "1:2:3:4:5:6:7:",
      ":1:2:3:4:5:6:7",
  };
  for (const auto& text : bad) {
    EXPECT_THROW(addr::parse_address(text), ParseError) << text;
  }
}

TEST(Address, ParseErrorNamesOffendingToken) {
  try {
    addr::parse_address("2001:xyzw::1");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("xyzw"), std::string::npos);
  }
}

TEST(Address, FormatCanonical) {
  EXPECT_EQ(addr::format_address(addr::parse_address("2001:0DB8::0003")), "2001:db8::3");
  EXPECT_EQ(addr::format_address(Address()), "::");
  EXPECT_EQ(addr::format_address(addr::parse_address("0:0:0:0:0:0:0:1")), "::1");
  // Leftmost of two equal zero runs is compressed.
  EXPECT_EQ(addr::format_address(addr::parse_address("1:0:0:1:0:0:1:1")), "1::1:0:0:1:1");
  // A single zero group is not compressed.
  EXPECT_EQ(addr::format_address(addr::parse_address("2001:db8:0:1:1:1:1:1")), "2001:db8:0:1:1:1:1:1");
  // Longer run wins even when it is to the right.
  EXPECT_EQ(addr::format_address(addr::parse_address("1:0:0:1:0:0:0:1")), "1:0:0:1::1");
}

TEST(Address, FormatMatchesSystemOracleOnRandomAddresses) {
  rng::Engine eng = rng::engine(20260818);
  int checked = 0;
  for (int n = 0; n < 5000; ++n) {
    Address::Bytes b{};
    // Mix dense random bytes with zero-heavy patterns to exercise compression.
    const std::uint64_t mask = eng();
    for (int i = 0; i < 16; ++i) {
      const bool zero_group = (mask >> (2 * (i / 2))) & 1;
      b[static_cast<std::size_t>(i)] = zero_group ? 0 : static_cast<std::uint8_t>(eng());
    }
    const Address a{b};
    const std::string oracle = ntop_oracle(a);
    if (oracle.find('.') != std::string::npos) continue;  // dotted IPv4 form
    EXPECT_EQ(addr::format_address(a), oracle);
    ++checked;
  }
  EXPECT_GT(checked, 4000);
}

TEST(Address, RoundTripRandom) {
  rng::Engine eng = rng::engine(7);
  for (int n = 0; n < 2000; ++n) {
    Address::Bytes b{};
    for (auto& byte : b) byte = static_cast<std::uint8_t>(eng());
    const Address a{b};
    EXPECT_EQ(addr::parse_address(addr::format_address(a)), a);
  }
}

TEST(AddressWord, TextUsesIndexAlphabet) {
  // Value 2 at the 11th nybble position (zero-based 10) renders as "2a".
  EXPECT_EQ((AddressWord{2, 10}).text(), "2a");
  EXPECT_EQ((AddressWord{0, 0}).text(), "00");
  EXPECT_EQ((AddressWord{15, 31}).text(), "fv");
  EXPECT_EQ((AddressWord{10, 9}).text(), "a9");
  EXPECT_EQ(AddressWord::parse("2a"), (AddressWord{2, 10}));
  EXPECT_EQ(AddressWord::parse("fv"), (AddressWord{15, 31}));
  EXPECT_THROW(AddressWord::parse("2w"), ParseError);
  EXPECT_THROW(AddressWord::parse("g0"), ParseError);
  EXPECT_THROW(AddressWord::parse("2aa"), ParseError);
}

TEST(WordSequence, ToWordsGivesPositionTaggedNybbles) {
  const Address a = addr::parse_address("2001:db8::3");
  const WordSequence s = addr::to_words(a);
  EXPECT_EQ(s.word_text(0), "20");
  EXPECT_EQ(s.word_text(1), "01");
  EXPECT_EQ(s.word_text(2), "02");
  EXPECT_EQ(s.word_text(3), "13");
  EXPECT_EQ(s.word_text(4), "04");
  EXPECT_EQ(s.word_text(5), "d5");
  EXPECT_EQ(s.word_text(6), "b6");
  EXPECT_EQ(s.word_text(7), "87");
  for (int i = 8; i < 31; ++i) {
    EXPECT_EQ(s.word(i).value, 0);
    EXPECT_EQ(s.word(i).index, i);
  }
  EXPECT_EQ(s.word_text(31), "3v");
}

TEST(WordSequence, Eui64MarkerPositions) {
  // ff:fe occupies nybble positions 22..25 (the 23rd through 26th nybbles).
  const Address a = addr::parse_address("fe80::0211:22ff:fe33:4455");
  const WordSequence s = addr::to_words(a);
  EXPECT_EQ(s.word_text(22), "fm");
  EXPECT_EQ(s.word_text(23), "fn");
  EXPECT_EQ(s.word_text(24), "fo");
  EXPECT_EQ(s.word_text(25), "ep");
}

TEST(WordSequence, RoundTrip) {
  rng::Engine eng = rng::engine(99);
  for (int n = 0; n < 500; ++n) {
    Address::Bytes b{};
    for (auto& byte : b) byte = static_cast<std::uint8_t>(eng());
    const Address a{b};
    EXPECT_EQ(addr::from_words(addr::to_words(a)), a);
  }
}

TEST(WordSequence, FromWordsValidates) {
  std::vector<AddressWord> words;
  for (int i = 0; i < 32; ++i) words.push_back({0, static_cast<std::uint8_t>(i)});
  EXPECT_EQ(WordSequence::from_words(words).to_address(), Address());

  std::vector<AddressWord> short_list(words.begin(), words.end() - 1);
  EXPECT_THROW(WordSequence::from_words(short_list), SequenceError);

  std::vector<AddressWord> swapped = words;
  std::swap(swapped[3].index, swapped[4].index);
  EXPECT_THROW(WordSequence::from_words(swapped), SequenceError);

  std::vector<AddressWord> dup = words;
  dup[5].index = 4;
  EXPECT_THROW(WordSequence::from_words(dup), SequenceError);
}

TEST(WordSequence, TextJoinsWords) {
  const WordSequence s = addr::to_words(addr::parse_address("::"));
  std::string expected;
  for (int i = 0; i < 32; ++i) {
    if (i) expected.push_back(' ');
    expected.push_back('0');
    expected.push_back(addr::kIndexAlphabet[i]);
  }
  EXPECT_EQ(s.text(), expected);
}
