#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "funfoc/io.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace funfoc;

TEST(Csv, SplitsQuotedFields) {
  auto f = io::split_csv(R"(a,"b,c","say ""hi""",)");
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f[0], "a");
  EXPECT_EQ(f[1], "b,c");
  EXPECT_EQ(f[2], "say \"hi\"");
  EXPECT_EQ(f[3], "");
}

TEST(Csv, FieldRoundTrip) {
  oracle::Rng rng(3);
  const std::string alphabet = "ab,\" x";
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::string> row(static_cast<std::size_t>(rng.integer(1, 5)));
    for (auto& cell : row)
      for (int k = rng.integer(0, 6); k > 0; --k) cell.push_back(alphabet[rng.index(alphabet.size())]);
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) line += (i ? "," : "") + io::csv_field(row[i]);
    EXPECT_EQ(io::split_csv(line), row) << line;
  }
}

TEST(Numbers, ShortestDoubleRoundTrips) {
  oracle::Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    double v = rng.normal() * std::pow(10.0, rng.integer(-12, 12));
    auto back = io::parse_double(io::format_double(v));
    ASSERT_TRUE(back);
    EXPECT_EQ(*back, v);
  }
  EXPECT_EQ(io::format_double(std::numeric_limits<double>::quiet_NaN()), "NA");
  EXPECT_EQ(io::format_double(0.5), "0.5");
}

TEST(Numbers, StrictParsing) {
  EXPECT_FALSE(io::parse_double(""));
  EXPECT_FALSE(io::parse_double("1.5x"));
  EXPECT_FALSE(io::parse_int("12 "));
  EXPECT_FALSE(io::parse_int("3.0"));
  EXPECT_EQ(io::parse_int("-42"), -42);
  EXPECT_EQ(io::format_fixed(0.1594, 3), "0.159");
}

TEST(Digest, KnownVector) {
  EXPECT_EQ(io::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(io::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Files, AtomicWriteReplacesContentAndLeavesNoTemp) {
  testutil::TempDir dir;
  auto p = dir / "sub" / "out.txt";
  io::write_file_atomic(p, "first");
  io::write_file_atomic(p, "second");
  EXPECT_EQ(io::read_file(p), "second");
  EXPECT_FALSE(std::filesystem::exists(p.string() + ".tmp"));
  EXPECT_EQ(io::sha256_file(p), io::sha256_hex("second"));
}

TEST(Files, MissingFileIsInputError) {
  EXPECT_THROW(io::read_file("/nonexistent/funfoc/file"), InputError);
}

TEST(WordList, CommentsAndBlanks) {
  std::istringstream in("# header\napple  \n\n  pear # fruit\n\t\n");
  EXPECT_EQ(io::read_word_list(in), (std::vector<std::string>{"apple", "pear"}));
}
