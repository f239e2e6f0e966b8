#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "snvt/error.hpp"
#include "snvt/metrics.hpp"
#include "metric_fixtures.hpp"
#include "properties.hpp"

using namespace snvt;
using namespace snvt::testing;
namespace fs = std::filesystem;

TEST_CASE("tokenize: lowercase, strip punctuation, split on whitespace, idempotent") {
  const metrics::TokenSeq tokens = metrics::tokenize("  The CAT, sat!  on 2 mats.\n");
  const metrics::TokenSeq expect = {"the", "cat", "sat", "on", "2", "mats"};
  CHECK(tokens == expect);
  // punctuation is deleted, not turned into separators
  CHECK(metrics::tokenize("don't stop") == metrics::TokenSeq{"dont", "stop"});
  // idempotence: re-tokenizing the joined normal form changes nothing
  std::string joined;
  for (const auto& t : tokens) joined += t + " ";
  CHECK(metrics::tokenize(joined) == tokens);
  CHECK(metrics::tokenize("!!! ...").empty());
}

TEST_CASE("all hand-computed metric fixtures reproduce") {
  const auto failures = run_metric_fixtures();
  for (const auto& f : failures) MESSAGE(f);
  CHECK(failures.empty());
  CHECK(metric_fixtures().size() >= 20);
}

TEST_CASE("bleu: empty candidate scores zero, bad max_n is rejected") {
  CHECK(metrics::bleu({}, {{"a"}}, 4) == 0.0);
  CHECK_THROWS_AS(metrics::bleu({"a"}, {{"a"}}, 0), ContractError);
  CHECK_THROWS_AS(metrics::bleu({"a"}, {{"a"}}, 5), ContractError);
  CHECK_THROWS_AS(metrics::bleu({"a"}, {}, 1), ContractError);
}

TEST_CASE("bleu: smoothed disjoint score stays under the add-one bound") {
  // zero matches at n=1: smoothed precision is 1/(len+1)
  const metrics::TokenSeq cand = {"q", "w", "e"};
  const double score = metrics::bleu(cand, {{"a", "b", "c"}}, 1);
  CHECK(score > 0.0);
  CHECK(score <= 100.0 / static_cast<double>(cand.size() + 1) + 1e-12);
}

TEST_CASE("meteor: chunk counting splits broken runs") {
  // candidate "a b c d" vs reference "a c b d": matches 4, precision=recall=1,
  // aligned positions (0,0) (1,2) (2,1) (3,3) -> 4 chunks, penalty 0.5
  const double score = metrics::meteor_lite({"a", "b", "c", "d"}, {{"a", "c", "b", "d"}});
  CHECK(std::abs(score - 50.0) <= 1e-9);
}

TEST_CASE("cider rejects empty corpora and images without references") {
  CHECK_THROWS_AS(metrics::cider({}), ContractError);
  metrics::CaptionEntry entry{"i", {"a"}, {}};
  CHECK_THROWS_AS(metrics::cider({entry}), ContractError);
}

TEST_CASE("vqa: count answers compare after rounding, others case-insensitively") {
  std::vector<metrics::VqaRecord> records = {
      {"q1", metrics::VqaCategory::count, "2.6", "3"},
      {"q2", metrics::VqaCategory::count, "2.4", "3"},
      {"q3", metrics::VqaCategory::presence, " Yes ", "yes"},
      {"q4", metrics::VqaCategory::urban_rural, "Urban", "urban"},
      {"q5", metrics::VqaCategory::comparison, "larger", "smaller"},
  };
  const auto report = metrics::vqa_accuracy(records);
  CHECK(report.categories.at(metrics::VqaCategory::count).correct == 1);
  CHECK(report.categories.at(metrics::VqaCategory::presence).correct == 1);
  CHECK(report.categories.at(metrics::VqaCategory::urban_rural).correct == 1);
  CHECK(report.categories.at(metrics::VqaCategory::comparison).correct == 0);
}

TEST_CASE("vqa: absent categories are dropped from the average and flagged") {
  std::vector<metrics::VqaRecord> records = {
      {"q1", metrics::VqaCategory::presence, "yes", "yes"},
      {"q2", metrics::VqaCategory::count, "1", "1"},
      {"q3", metrics::VqaCategory::count, "2", "4"},
  };
  const auto report = metrics::vqa_accuracy(records);
  CHECK(report.partial);
  CHECK(report.categories.size() == 2);
  CHECK(std::abs(report.average - (100.0 + 50.0) / 2) <= 1e-12);
  CHECK(std::abs(report.overall - 200.0 / 3.0) <= 1e-9);
}

TEST_CASE("vqa rejects empty answers") {
  std::vector<metrics::VqaRecord> records = {{"q", metrics::VqaCategory::count, "", "1"}};
  CHECK_THROWS_AS(metrics::vqa_accuracy(records), ValidationError);
}

TEST_CASE("jsonl readers parse records and report bad lines") {
  const std::string dir = fs::temp_directory_path().string();
  const std::string cap_path = dir + "/snvt_test_caps.jsonl";
  {
    std::ofstream out(cap_path);
    out << R"({"id":"i1","candidate":"a green field","references":["a green field","green fields"]})"
        << "\n";
    out << R"({"id":"i2","candidate":"roads","references":["two roads"]})" << "\n";
  }
  const auto corpus = metrics::read_caption_jsonl(cap_path);
  CHECK(corpus.size() == 2);
  CHECK(corpus[0].references.size() == 2);
  CHECK(corpus[0].candidate == metrics::TokenSeq{"a", "green", "field"});

  const std::string vqa_path = dir + "/snvt_test_vqa.jsonl";
  {
    std::ofstream out(vqa_path);
    out << R"({"id":"q1","category":"presence","predicted":"yes","truth":"yes"})" << "\n";
    out << R"({"id":"q2","category":"urban-rural","predicted":"urban","truth":"rural"})" << "\n";
  }
  const auto records = metrics::read_vqa_jsonl(vqa_path);
  CHECK(records.size() == 2);
  CHECK(records[1].category == metrics::VqaCategory::urban_rural);

  {
    std::ofstream out(vqa_path);
    out << R"({"id":"q1","category":"nope","predicted":"a","truth":"b"})" << "\n";
  }
  CHECK_THROWS_AS(metrics::read_vqa_jsonl(vqa_path), ValidationError);
  {
    std::ofstream out(cap_path);
    out << "not json\n";
  }
  CHECK_THROWS_AS(metrics::read_caption_jsonl(cap_path), ValidationError);
  fs::remove(cap_path);
  fs::remove(vqa_path);
}

TEST_CASE("caption report: table and JSON carry the same numbers") {
  metrics::CaptionEntry a{"i0", metrics::tokenize("a b c"), {metrics::tokenize("a b c")}};
  metrics::CaptionEntry b{"i1", metrics::tokenize("x y"), {metrics::tokenize("x y z")}};
  const auto report = metrics::score_captions({a, b});
  const std::string table = metrics::render_caption_table(report);
  const std::string json_text = metrics::caption_report_json(report);
  // spot values appear in both renderings at 6 significant digits
  std::ostringstream b1;
  b1.precision(6);
  b1 << report.bleu1;
  CHECK(table.find(b1.str()) != std::string::npos);
  CHECK(json_text.find("\"bleu1\"") != std::string::npos);
}

TEST_CASE("property: metrics are invariant under reference reordering") {
  CHECK_NOTHROW(metric_reference_reorder_property(401, 120));
}

TEST_CASE("property: metric ranges and perfect-match pins") {
  CHECK_NOTHROW(metric_range_property(402, 120));
}

TEST_CASE("property: bleu non-increasing in max_n without smoothing") {
  CHECK_NOTHROW(bleu_monotone_property(403, 120));
}

TEST_CASE("property: one-image cider degenerates to zero") {
  CHECK_NOTHROW(cider_single_image_property(404, 120));
}

TEST_CASE("property: overall equals the record-weighted category mean") {
  CHECK_NOTHROW(vqa_overall_identity_property(405, 120));
}

TEST_CASE("property: metrics are pure functions") {
  CHECK_NOTHROW(metric_purity_property(406, 120));
}
