#include <algorithm>
#include <sstream>

#include "csem/corpus.hpp"
#include "csem/errors.hpp"
#include "csem/utf8.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace csem;

TEST_CASE("utf8 round-trips Devanagari") {
  std::string s = "अब तो घर जाओ";
  std::u32string u = utf8::decode(s);
  CHECK(u.size() == 12);  // scalar count, not byte count
  CHECK(utf8::encode(u) == s);
}

TEST_CASE("utf8 replaces malformed bytes") {
  std::string bad = "a\xC3(";
  std::u32string u = utf8::decode(bad);
  REQUIRE(u.size() == 3);
  CHECK(u[0] == U'a');
  CHECK(u[1] == 0xFFFD);
  CHECK(u[2] == U'(');
}

TEST_CASE("character dictionary basics") {
  CharDictionary d = build_char_dictionary({"अब", "अब"});
  CHECK(d.size() == 4);  // 2 chars + UNK + boundary
  CHECK(d.lookup(U'अ') >= 2);
  CHECK(d.lookup(U'ब') >= 2);
  CHECK(d.lookup(U'x') == CharDictionary::kUnk);

  SUBCASE("round-trip of retained characters") {
    for (std::int32_t id = 2; id < d.size(); ++id) {
      CHECK(d.lookup(d.char_at(id)) == id);
    }
  }
}

TEST_CASE("character dictionary frequency pruning") {
  CharDictionary d = build_char_dictionary({"aab"}, 1);
  CHECK(d.size() == 3);
  CHECK(d.lookup(U'a') == 2);
  CHECK(d.lookup(U'b') == CharDictionary::kUnk);
}

TEST_CASE("character dictionary tie break by first occurrence") {
  CharDictionary d = build_char_dictionary({"ba"}, 2);
  CHECK(d.lookup(U'b') == 2);
  CHECK(d.lookup(U'a') == 3);
}

TEST_CASE("character dictionary rejects empty corpus") {
  CHECK_THROWS_AS(build_char_dictionary({}), DataError);
  CHECK_THROWS_AS(build_char_dictionary({"", ""}), DataError);
}

TEST_CASE("corpus split") {
  std::vector<std::string> lines;
  for (int i = 0; i < 10; ++i) lines.push_back("line " + std::to_string(i));

  SUBCASE("10 lines split 8/1/1") {
    auto r = split_corpus(lines, {0.8, 0.1, 0.1}, 42);
    CHECK(r.train.size() == 8);
    CHECK(r.valid.size() == 1);
    CHECK(r.test.size() == 1);
  }
  SUBCASE("3 lines split 1/1/1") {
    std::vector<std::string> three(lines.begin(), lines.begin() + 3);
    auto r = split_corpus(three, {0.8, 0.1, 0.1}, 42);
    CHECK(r.train.size() == 1);
    CHECK(r.valid.size() == 1);
    CHECK(r.test.size() == 1);
  }
  SUBCASE("same seed gives the same partition") {
    auto a = split_corpus(lines, {0.8, 0.1, 0.1}, 7);
    auto b = split_corpus(lines, {0.8, 0.1, 0.1}, 7);
    CHECK(a.train == b.train);
    CHECK(a.valid == b.valid);
    CHECK(a.test == b.test);
  }
  SUBCASE("parts are disjoint and cover the input") {
    auto r = split_corpus(lines, {0.8, 0.1, 0.1}, 3);
    std::vector<std::string> all = r.train;
    all.insert(all.end(), r.valid.begin(), r.valid.end());
    all.insert(all.end(), r.test.begin(), r.test.end());
    std::sort(all.begin(), all.end());
    auto want = lines;
    std::sort(want.begin(), want.end());
    CHECK(all == want);
  }
  SUBCASE("too few lines") {
    std::vector<std::string> two = {"a", "b"};
    CHECK_THROWS_AS(split_corpus(two, {0.8, 0.1, 0.1}, 1), DataError);
  }
  SUBCASE("bad ratios") {
    CHECK_THROWS_AS(split_corpus(lines, {0.5, 0.1, 0.1}, 1), ConfigError);
  }
}

TEST_CASE("conllu reader") {
  testutil::TempDir tmp("conllu");
  SUBCASE("two-token block with XPOS") {
    testutil::write_file(tmp.path("a.conllu"),
                         "# sent_id = 1\n"
                         "1\tघर\t_\tNOUN\tNN\t_\t_\t_\t_\t_\n"
                         "2\tजाओ\t_\tVERB\tVM\t_\t_\t_\t_\t_\n"
                         "\n");
    auto s = read_conllu(tmp.path("a.conllu"));
    REQUIRE(s.size() == 1);
    CHECK(s[0].tokens == std::vector<std::string>{"घर", "जाओ"});
    CHECK(s[0].tags == std::vector<std::string>{"NN", "VM"});
  }
  SUBCASE("comments only gives zero sentences") {
    testutil::write_file(tmp.path("b.conllu"), "# a\n# b\n");
    CHECK(read_conllu(tmp.path("b.conllu")).empty());
  }
  SUBCASE("range and empty-node ids are skipped") {
    testutil::write_file(tmp.path("c.conllu"),
                         "1-2\tफिर भी\t_\t_\t_\t_\t_\t_\t_\t_\n"
                         "1\tफिर\t_\t_\tRB\t_\t_\t_\t_\t_\n"
                         "1.1\tghost\t_\t_\t_\t_\t_\t_\t_\t_\n"
                         "2\tभी\t_\t_\tRP\t_\t_\t_\t_\t_\n");
    auto s = read_conllu(tmp.path("c.conllu"));
    REQUIRE(s.size() == 1);
    CHECK(s[0].tokens == std::vector<std::string>{"फिर", "भी"});
  }
  SUBCASE("short line reports its number") {
    testutil::write_file(tmp.path("d.conllu"), "1\tword\n");
    try {
      read_conllu(tmp.path("d.conllu"));
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(":1:") != std::string::npos);
    }
  }
  SUBCASE("round-trip of retained columns is lossless") {
    std::string text =
        "1\tराम\t_\t_\tNNP\t_\t_\t_\t_\t_\n"
        "2\tघर\t_\t_\tNN\t_\t_\t_\t_\t_\n"
        "\n"
        "1\tजाओ\t_\t_\tVM\t_\t_\t_\t_\t_\n"
        "\n";
    testutil::write_file(tmp.path("e.conllu"), text);
    auto first = read_conllu(tmp.path("e.conllu"));
    std::ostringstream out;
    write_conllu(first, out);
    testutil::write_file(tmp.path("f.conllu"), out.str());
    auto second = read_conllu(tmp.path("f.conllu"));
    REQUIRE(first.size() == second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
      CHECK(first[i].tokens == second[i].tokens);
      CHECK(first[i].tags == second[i].tags);
    }
  }
}

TEST_CASE("labeled text reader") {
  testutil::TempDir tmp("labeled");
  SUBCASE("basic record") {
    testutil::write_file(tmp.path("a.txt"), "__label__pos अच्छी फिल्म\n");
    auto r = read_labeled(tmp.path("a.txt"));
    REQUIRE(r.size() == 1);
    CHECK(r[0].label == "pos");
    CHECK(r[0].text.tokens.size() == 2);
  }
  SUBCASE("three lines in order") {
    testutil::write_file(tmp.path("b.txt"),
                         "__label__a x\n__label__b y\n__label__a z\n");
    auto r = read_labeled(tmp.path("b.txt"));
    REQUIRE(r.size() == 3);
    CHECK(r[0].label == "a");
    CHECK(r[1].label == "b");
    CHECK(r[2].text.tokens == std::vector<std::string>{"z"});
  }
  SUBCASE("missing prefix") {
    testutil::write_file(tmp.path("c.txt"), "no prefix here\n");
    CHECK_THROWS_AS(read_labeled(tmp.path("c.txt")), ParseError);
  }
  SUBCASE("empty text after label") {
    testutil::write_file(tmp.path("d.txt"), "__label__pos \n");
    CHECK_THROWS_AS(read_labeled(tmp.path("d.txt")), ParseError);
  }
}

TEST_CASE("vec table loader") {
  testutil::TempDir tmp("vec");
  SUBCASE("two rows of width three") {
    testutil::write_file(tmp.path("a.vec"),
                         "2 3\nघर 0.1 0.2 0.3\nजाओ -1 0 1\n");
    auto t = load_vec_table(tmp.path("a.vec"));
    CHECK(t.dim == 3);
    CHECK(t.entries.size() == 2);
    const Tensor* v = t.find("घर");
    REQUIRE(v != nullptr);
    CHECK((*v)[1] == doctest::Approx(0.2f));
    CHECK(t.find("नहीं") == nullptr);
  }
  SUBCASE("short row names the line") {
    testutil::write_file(tmp.path("b.vec"), "1 3\nघर 0.1 0.2\n");
    try {
      load_vec_table(tmp.path("b.vec"));
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
  }
  SUBCASE("duplicate keeps the last row") {
    testutil::write_file(tmp.path("c.vec"), "2 2\nw 1 2\nw 3 4\n");
    auto t = load_vec_table(tmp.path("c.vec"));
    CHECK(t.entries.size() == 1);
    CHECK((*t.find("w"))[0] == 3.0f);
  }
  SUBCASE("row count must match header") {
    testutil::write_file(tmp.path("d.vec"), "3 2\nw 1 2\n");
    CHECK_THROWS_AS(load_vec_table(tmp.path("d.vec")), ParseError);
  }
}

TEST_CASE("sentence construction") {
  CHECK_THROWS_AS(Sentence::from_tokens({}), DataError);
  CHECK_THROWS_AS(Sentence::from_tokens({"a b"}), DataError);
  Sentence s = Sentence::from_line("  राम  घर   जाता ");
  CHECK(s.tokens.size() == 3);
  CHECK(s.joined() == "राम घर जाता");
}
