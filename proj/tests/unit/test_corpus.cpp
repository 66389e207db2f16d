#include "doctest.h"

#include <filesystem>
#include <set>

#include "ccg/corpus.hpp"

using namespace ccg;
using namespace ccg::corpus;
namespace fs = std::filesystem;

namespace {

json raw_paper(const std::string& id, std::vector<std::pair<std::string, std::vector<std::string>>> sections) {
  json body = json::array();
  for (auto& [title, paras] : sections) body.push_back({{"section_title", title}, {"paragraphs", paras}});
  return {{"paper_id", id}, {"title", "Title " + id}, {"abstract", "About " + id + "."}, {"year", 2010},
          {"domains", {"computer science"}}, {"body", body}};
}

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("ccg_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("split_sentences examples") {
  CHECK(split_sentences("").empty());
  CHECK(split_sentences("A b. C d.") == std::vector<std::string>{"A b.", "C d."});
  CHECK(split_sentences("One sentence without terminator") ==
        std::vector<std::string>{"One sentence without terminator"});
  CHECK(split_sentences("Smith et al. showed this. See Fig. 2 for details.") ==
        std::vector<std::string>{"Smith et al. showed this.", "See Fig. 2 for details."});
  CHECK(split_sentences("We use e.g. Adam here. J. Smith agrees!") ==
        std::vector<std::string>{"We use e.g. Adam here.", "J. Smith agrees!"});
  CHECK(split_sentences("Is it? Yes. no split before lowercase. Done.") ==
        std::vector<std::string>{"Is it?", "Yes. no split before lowercase.", "Done."});
}

TEST_CASE("split_sentences is idempotent on its outputs") {
  const std::vector<std::string> texts{
      "Smith et al. showed this. See Fig. 2 for details. Results (Table 1.) are strong.",
      "A. B. C. Then we go! And again? Fine.", "Model [3] works. We use [3, 4]. End"};
  for (const auto& t : texts)
    for (const auto& s : split_sentences(t)) CHECK(split_sentences(s) == std::vector<std::string>{s});
}

TEST_CASE("parse_paper_record defaults and errors") {
  auto rec = parse_paper_record({{"paper_id", "p1"}, {"title", "T"}});
  CHECK(rec.paper_id == "p1");
  CHECK(rec.abstract.empty());
  CHECK(rec.body.empty());

  try {
    parse_paper_record({{"title", "T"}});
    FAIL("expected MissingId");
  } catch (const RecordError& e) {
    CHECK(e.code() == RecordErrorCode::MissingId);
  }
  try {
    parse_paper_record({{"paper_id", "p"}});
    FAIL("expected MissingTitle");
  } catch (const RecordError& e) {
    CHECK(e.code() == RecordErrorCode::MissingTitle);
  }
  CHECK_THROWS_AS(parse_paper_record(json::array()), RecordError);
}

TEST_CASE("sentence counts follow the segmenter per paragraph") {
  std::vector<std::string> paras{"First one. Second one.", "Only one here", "Fig. 3 shows it. Then more. And more.",
                                 "A. B. Smith et al. wrote. Next.", "x", "Q? A!", "One. Two. Three. Four.",
                                 "Tail text", "e.g. this is fine. Yes.", "End."};
  auto raw = raw_paper("p", {{"Intro", {paras[0], paras[1], paras[2]}},
                             {"Method", {paras[3], paras[4], paras[5], paras[6]}},
                             {"Results", {paras[7], paras[8], paras[9]}}});
  const auto rec = parse_paper_record(raw);
  REQUIRE(rec.body.size() == 3);
  std::size_t p = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    std::size_t expected = 0;
    for (std::size_t k = 0; k < (s == 1 ? 4u : 3u); ++k) expected += split_sentences(paras[p++]).size();
    CHECK(rec.body[s].sentences.size() == expected);
  }
}

TEST_CASE("citation mentions are detected, grouped and normalized") {
  Bibliography bib;
  bib.add("p", "1", "A");
  bib.add("p", "2", "B");
  bib.add_global("Smith2020", "C");
  auto rec = parse_paper_record(
      raw_paper("p", {{"Intro", {"We build on [1]. Two works [1, 2] exist. No marker here. See [Smith2020; 9]."}}}));
  std::vector<Diagnostic> diags;
  auto mentions = detect_citation_mentions(rec, bib, &diags);
  REQUIRE(mentions.size() == 3);
  CHECK(mentions[0].cited_paper_ids == std::vector<std::string>{"A"});
  CHECK(mentions[1].cited_paper_ids == std::vector<std::string>{"A", "B"});
  CHECK(mentions[2].cited_paper_ids == std::vector<std::string>{"C"});
  CHECK(diags.size() == 1);
  for (const auto& m : mentions) {
    std::set<std::string> distinct(m.cited_paper_ids.begin(), m.cited_paper_ids.end());
    CHECK(distinct.size() == m.cited_paper_ids.size());
  }

  normalize_citation_markers(rec, mentions);
  const auto& s = rec.body[0].sentences;
  CHECK(s[0] == "We build on [].");
  CHECK(s[1] == "Two works [] exist.");
  CHECK(s[2] == "No marker here.");
  for (const auto& m : mentions)
    for (auto [b, e] : m.marker_spans)
      CHECK(rec.body[m.where.section].sentences[m.where.sentence].substr(b, e - b) == "[]");
}

TEST_CASE("duplicate keys in one group yield distinct ids and at most one mention per sentence") {
  Bibliography bib;
  bib.add("p", "1", "A");
  bib.add("p", "2", "A");
  auto rec = parse_paper_record(raw_paper("p", {{"S", {"Twice [1] and again [2, 1]."}}}));
  auto mentions = detect_citation_mentions(rec, bib);
  REQUIRE(mentions.size() == 1);
  CHECK(mentions[0].cited_paper_ids == std::vector<std::string>{"A"});
}

TEST_CASE("ingest keeps going past bad records and corpus round trip is exact") {
  std::vector<json> raw{raw_paper("p", {{"Intro", {"We cite [1] here. Plain text."}}}), json{{"title", "no id"}},
                        raw_paper("q", {{"Body", {"Nothing."}}}), raw_paper("p", {{"X", {"dup."}}})};
  Bibliography bib;
  bib.add("p", "1", "q");
  auto result = ingest(raw, bib);
  CHECK(result.corpus.size() == 2);
  CHECK(result.rejected == 2);
  CHECK(result.diagnostics.size() >= 2);
  REQUIRE(result.corpus.find("p") != nullptr);
  CHECK(result.corpus.find("p")->mentions.size() == 1);

  const auto dir = temp_dir("corpus");
  result.corpus.save(dir / "corpus.jsonl");
  const auto back = Corpus::load(dir / "corpus.jsonl");
  REQUIRE(back.size() == result.corpus.size());
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back.entries()[i] == result.corpus.entries()[i]);
  back.save(dir / "again.jsonl");
  CHECK(io::read_text(dir / "again.jsonl") == io::read_text(dir / "corpus.jsonl"));
}

TEST_CASE("Corpus rejects duplicate ids") {
  Corpus c;
  c.add({parse_paper_record({{"paper_id", "a"}, {"title", "T"}}), {}});
  CHECK_THROWS_AS(c.add({parse_paper_record({{"paper_id", "a"}, {"title", "T"}}), {}}), RecordError);
}
