#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "vista/corpus.hpp"
#include "vista/error.hpp"

using namespace vista;
using namespace vista::corpus;

namespace {

void write_lines(const std::filesystem::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p);
  for (const auto& l : lines) out << l << '\n';
}

Corpus corpus_with_activations(const std::vector<double>& acts, LatentId latent, std::size_t dim) {
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < acts.size(); ++i) {
    std::vector<double> dense(dim, 0.0);
    dense[0] = 1.0;
    dense[latent] = acts[i];
    entries.push_back({{"item" + std::to_string(i), "caption " + std::to_string(i)},
                       ActivationVector::from_dense(dense)});
  }
  return Corpus(std::move(entries), dim);
}

}  // namespace

TEST_CASE("load_corpus reads valid lines") {
  test::TempDir dir;
  write_lines(dir / "c.jsonl",
              {R"({"id":"a","text":"a red apple","indices":[3,9745],"values":[0.5,2.0]})",
               R"({"id":"b","text":"a green pear","indices":[0],"values":[1.5]})",
               "",
               R"({"id":"c","text":"a blue sky","indices":[16383],"values":[0.25]})"});
  const Corpus c = load_corpus(dir / "c.jsonl", 16384);
  CHECK(c.size() == 3);
  CHECK(c.entries()[0].item.id == "a");
  CHECK(c.entries()[2].vector.indices() == std::vector<LatentId>{16383});
}

TEST_CASE("load_corpus rejects invalid input with line numbers") {
  test::TempDir dir;
  SUBCASE("duplicate id") {
    write_lines(dir / "c.jsonl", {R"({"id":"a","text":"x","indices":[1],"values":[1.0]})",
                                  R"({"id":"a","text":"y","indices":[2],"values":[1.0]})"});
    CHECK_THROWS_WITH_AS(load_corpus(dir / "c.jsonl", 16), doctest::Contains("duplicate"),
                         ValidationError);
  }
  SUBCASE("repeated index") {
    write_lines(dir / "c.jsonl", {R"({"id":"a","text":"x","indices":[5,5],"values":[1.0,2.0]})"});
    CHECK_THROWS_WITH_AS(load_corpus(dir / "c.jsonl", 16),
                         doctest::Contains("strictly increasing"), ValidationError);
  }
  SUBCASE("index out of range") {
    write_lines(dir / "c.jsonl", {R"({"id":"a","text":"x","indices":[1],"values":[1.0]})",
                                  R"({"id":"b","text":"x","indices":[16],"values":[1.0]})"});
    CHECK_THROWS_WITH_AS(load_corpus(dir / "c.jsonl", 16), doctest::Contains(":2"),
                         ValidationError);
  }
  SUBCASE("non-positive value") {
    write_lines(dir / "c.jsonl", {R"({"id":"a","text":"x","indices":[1],"values":[0.0]})"});
    CHECK_THROWS_AS(load_corpus(dir / "c.jsonl", 16), ValidationError);
  }
  SUBCASE("malformed json") {
    write_lines(dir / "c.jsonl", {R"({"id":"a","text":"x","indices":[1],"values":[1.0]})",
                                  R"({"id":"b", oops)"});
    CHECK_THROWS_WITH_AS(load_corpus(dir / "c.jsonl", 16), doctest::Contains(":2"),
                         ValidationError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_corpus(dir / "nope.jsonl", 16), IoError); }
}

TEST_CASE("dense vector lines") {
  const Entry e = parse_corpus_line(R"({"id":"a","text":"t","vector":[0,1.5,0,2]})", 4);
  CHECK(e.vector.indices() == std::vector<LatentId>{1, 3});
  CHECK(e.vector.values() == std::vector<double>{1.5, 2.0});
  CHECK_THROWS_AS(parse_corpus_line(R"({"id":"a","text":"t","vector":[0,1]})", 4),
                  ValidationError);
  CHECK_THROWS_AS(parse_corpus_line(R"({"id":"a","text":"t","vector":[0,-1,0,0]})", 4),
                  ValidationError);
}

TEST_CASE("write_corpus round trip") {
  test::TempDir dir;
  const Corpus c = corpus_with_activations({0.3, 1.0 / 3.0, 7.25}, 5, 8);
  write_corpus(c, dir / "out.jsonl");
  CHECK(load_corpus(dir / "out.jsonl", 8) == c);
}

TEST_CASE("activation_of") {
  const auto v = test::sparse({3, 9745}, {0.5, 2.0}, 16384);
  CHECK(activation_of(v, 9745) == 2.0);
  CHECK(activation_of(v, 3) == 0.5);
  CHECK(activation_of(v, 4) == 0.0);
  CHECK_THROWS_AS(activation_of(v, 20000), ValidationError);
}

TEST_CASE("SelectionTarget resolution") {
  CHECK(SelectionTarget::fraction(0.02).resolve(200000) == 4000);
  CHECK(SelectionTarget::fraction(1.0).resolve(7) == 7);
  CHECK(SelectionTarget::fraction(0.5).resolve(3) == 2);
  CHECK(SelectionTarget::count(5).resolve(3) == 5);
  CHECK_THROWS_AS(SelectionTarget::fraction(0.0), ValidationError);
  CHECK_THROWS_AS(SelectionTarget::fraction(1.5), ValidationError);
  CHECK_THROWS_AS(SelectionTarget::count(0), ValidationError);
}

TEST_CASE("select_top_activating") {
  SUBCASE("fraction of a large corpus") {
    std::vector<double> acts(200000);
    for (std::size_t i = 0; i < acts.size(); ++i) acts[i] = 1.0 + static_cast<double>(i % 997);
    const auto slice = select_top_activating(corpus_with_activations(acts, 2, 4), 2,
                                             SelectionTarget::fraction(0.02));
    CHECK(slice.size() == 4000);
    CHECK(slice.source_size == 200000);
  }
  SUBCASE("items that do not activate are excluded") {
    const auto c = corpus_with_activations({0, 2, 0, 0, 1, 0, 0, 3, 0, 0}, 1, 4);
    const auto slice = select_top_activating(c, 1, SelectionTarget::count(5));
    REQUIRE(slice.size() == 3);
    CHECK(slice.members[0].item.id == "item7");
    CHECK(slice.members[2].item.id == "item4");
  }
  SUBCASE("ties go to the earlier item") {
    const auto c = corpus_with_activations({5, 3, 3, 1}, 1, 4);
    const auto slice = select_top_activating(c, 1, SelectionTarget::count(2));
    REQUIRE(slice.size() == 2);
    CHECK(slice.members[0].item.id == "item0");
    CHECK(slice.members[1].item.id == "item1");
  }
  SUBCASE("no activating item") {
    const auto c = corpus_with_activations({0, 0}, 1, 4);
    CHECK_THROWS_AS(select_top_activating(c, 1, SelectionTarget::count(2)), ValidationError);
  }
  SUBCASE("latent out of range") {
    const auto c = corpus_with_activations({1, 2}, 1, 4);
    CHECK_THROWS_AS(select_top_activating(c, 4, SelectionTarget::count(2)), ValidationError);
  }
}

TEST_CASE("normalize_activations") {
  auto slice = select_top_activating(corpus_with_activations({4, 2, 3}, 1, 4), 1,
                                     SelectionTarget::count(3));
  normalize_activations(slice);
  CHECK(slice.members[0].norm_activation == 1.0);
  CHECK(slice.members[1].norm_activation == 0.5);
  CHECK(slice.members[2].norm_activation == 0.0);

  auto flat = select_top_activating(corpus_with_activations({2, 2}, 1, 4), 1,
                                    SelectionTarget::count(2));
  normalize_activations(flat);
  CHECK(flat.members[0].norm_activation == 0.0);
  CHECK(flat.members[1].norm_activation == 0.0);
}

TEST_CASE("slice persistence round trip") {
  test::TempDir dir;
  auto slice = select_top_activating(corpus_with_activations({0.1, 1.0 / 7.0, 3.3}, 1, 4), 1,
                                     SelectionTarget::count(3));
  normalize_activations(slice);
  save_slice(slice, dir / "slice.json");
  CHECK(load_slice(dir / "slice.json") == slice);
}
