#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace snvt::metrics {

using TokenSeq = std::vector<std::string>;

// Lowercase, delete every character outside [a-z0-9] (whitespace kept as
// the separator), split on whitespace. Idempotent.
TokenSeq tokenize(std::string_view text);

// Modified n-gram precision with per-reference clipping, geometric mean
// over n = 1..max_n with uniform weights, times the brevity penalty
// exp(1 - r/c) when the candidate is shorter than the closest reference.
// Any zero precision is smoothed add-one: (m+1)/(t+1). Returns percent.
double bleu(const TokenSeq& candidate, const std::vector<TokenSeq>& references, int max_n);

// LCS F-measure, beta^2 = 1.44 (recall-weighted), maximum over references.
// Returns percent.
double rouge_l(const TokenSeq& candidate, const std::vector<TokenSeq>& references);

// Unigram alignment allowing exact, shared-prefix (>= 4 chars) and light
// suffix-stem matches; F = 10PR / (R + 9P); fragmentation penalty
// 0.5 * (chunks / matches)^3; best reference wins. No synonym lexicon.
// Returns percent.
double meteor_lite(const TokenSeq& candidate, const std::vector<TokenSeq>& references);

struct CaptionEntry {
  std::string id;
  TokenSeq candidate;
  std::vector<TokenSeq> references;
};

// Consensus score: per n in 1..4, TF-IDF n-gram vectors (IDF = log(M/df)
// over reference sets, df clamped >= 1), cosine against each reference,
// averaged over references and n, scaled by 10. Corpus value is the mean
// over images.
double cider(const std::vector<CaptionEntry>& corpus);

enum class VqaCategory { count, presence, comparison, urban_rural };

std::string category_name(VqaCategory c);
std::optional<VqaCategory> parse_category(std::string_view name);

struct VqaRecord {
  std::string id;
  VqaCategory category = VqaCategory::count;
  std::string predicted;
  std::string truth;
};

struct CategoryScore {
  std::size_t correct = 0;
  std::size_t total = 0;
  double percent() const {
    return total ? 100.0 * static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  }
};

struct VqaReport {
  std::map<VqaCategory, CategoryScore> categories;  // only categories with records
  double average = 0;  // unweighted mean over present categories
  double overall = 0;  // pooled correct / total
  bool partial = false;  // true when some category had no records
};

// Count answers are compared after rounding to the nearest nonnegative
// integer; the rest compare case-insensitively after trimming.
VqaReport vqa_accuracy(const std::vector<VqaRecord>& records);
// The aggregation step alone, from per-category tallies.
VqaReport vqa_aggregate(const std::map<VqaCategory, CategoryScore>& tallies);

struct CaptionReport {
  double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0;  // percent, mean over images
  double meteor = 0, rouge = 0;                       // percent, mean over images
  double cider = 0;                                   // corpus-level, x10 scale
  std::size_t images = 0;
};

CaptionReport score_captions(const std::vector<CaptionEntry>& corpus);

// UTF-8 JSON-lines readers. Caption records: {"id","candidate","references":[...]}.
// VQA records: {"id","category","predicted","truth"}.
std::vector<CaptionEntry> read_caption_jsonl(const std::string& path);
std::vector<VqaRecord> read_vqa_jsonl(const std::string& path);

// Rendering: aligned plain-text table and JSON with identical values.
// The notes name the fixed choices (BLEU add-one smoothing, METEOR-lite
// matching, CIDEr x10) so reported numbers are unambiguous.
std::string render_caption_table(const CaptionReport& report);
std::string render_vqa_table(const VqaReport& report);
std::string caption_report_json(const CaptionReport& report);
std::string vqa_report_json(const VqaReport& report);

}  // namespace snvt::metrics
