#include "snvt/metrics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "snvt/error.hpp"

namespace snvt::metrics {

using nlohmann::ordered_json;

TokenSeq tokenize(std::string_view text) {
  TokenSeq tokens;
  std::string current;
  for (char raw : text) {
    const unsigned char c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current)), current.clear();
      continue;
    }
    const char lower = static_cast<char>(std::tolower(c));
    if ((lower >= 'a' && lower <= 'z') || (lower >= '0' && lower <= '9')) current.push_back(lower);
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace {

// n-gram as the joined token run; '\x1f' cannot appear in normalized tokens
std::string join_ngram(const TokenSeq& tokens, std::size_t start, std::size_t n) {
  std::string key;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) key.push_back('\x1f');
    key += tokens[start + i];
  }
  return key;
}

std::map<std::string, std::size_t> ngram_counts(const TokenSeq& tokens, std::size_t n) {
  std::map<std::string, std::size_t> counts;
  if (tokens.size() >= n && n > 0) {
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++counts[join_ngram(tokens, i, n)];
  }
  return counts;
}

}  // namespace

double bleu(const TokenSeq& candidate, const std::vector<TokenSeq>& references, int max_n) {
  if (max_n < 1 || max_n > 4) throw ContractError("bleu: max_n must be in 1..4");
  if (references.empty()) throw ContractError("bleu: need at least one reference");
  if (candidate.empty()) return 0.0;

  double log_sum = 0;
  for (int n = 1; n <= max_n; ++n) {
    const auto cand_counts = ngram_counts(candidate, static_cast<std::size_t>(n));
    std::size_t total = 0, matched = 0;
    for (const auto& [gram, count] : cand_counts) {
      total += count;
      std::size_t best_ref = 0;
      for (const auto& ref : references) {
        const auto ref_counts = ngram_counts(ref, static_cast<std::size_t>(n));
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) best_ref = std::max(best_ref, it->second);
      }
      matched += std::min(count, best_ref);
    }
    double precision;
    if (matched == 0) {
      precision = static_cast<double>(matched + 1) / static_cast<double>(total + 1);  // add-one
    } else {
      precision = static_cast<double>(matched) / static_cast<double>(total);
    }
    log_sum += std::log(precision);
  }
  double score = std::exp(log_sum / max_n);

  // closest reference length; ties go to the shorter one
  const std::size_t c = candidate.size();
  std::size_t r = references.front().size();
  for (const auto& ref : references) {
    const auto diff = [&](std::size_t len) {
      return len > c ? len - c : c - len;
    };
    if (diff(ref.size()) < diff(r) || (diff(ref.size()) == diff(r) && ref.size() < r)) {
      r = ref.size();
    }
  }
  if (c < r) {
    score *= std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  }
  return 100.0 * score;
}

namespace {

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double rouge_l(const TokenSeq& candidate, const std::vector<TokenSeq>& references) {
  if (references.empty()) throw ContractError("rouge_l: need at least one reference");
  if (candidate.empty()) return 0.0;
  constexpr double beta2 = 1.44;  // 1.2^2, recall-weighted
  double best = 0;
  for (const auto& ref : references) {
    if (ref.empty()) continue;
    const double lcs = static_cast<double>(lcs_length(candidate, ref));
    if (lcs == 0) continue;
    const double recall = lcs / static_cast<double>(ref.size());
    const double precision = lcs / static_cast<double>(candidate.size());
    const double f = (1 + beta2) * recall * precision / (recall + beta2 * precision);
    best = std::max(best, f);
  }
  return 100.0 * best;
}

namespace {

// Light suffix stemmer: strip one of ing/ed/es/s (longest first, keeping at
// least 3 characters), then undouble a trailing doubled consonant after
// ing/ed so running -> run.
std::string stem(const std::string& token) {
  static const std::vector<std::string> suffixes = {"ing", "ed", "es", "s"};
  for (const auto& suffix : suffixes) {
    if (token.size() >= suffix.size() + 3 && token.ends_with(suffix)) {
      std::string base = token.substr(0, token.size() - suffix.size());
      if ((suffix == "ing" || suffix == "ed") && base.size() >= 4 &&
          base[base.size() - 1] == base[base.size() - 2]) {
        base.pop_back();
      }
      return base;
    }
  }
  return token;
}

bool tokens_match(const std::string& a, const std::string& b) {
  if (a == b) return true;
  // shared-prefix rule: one token extends the other and they share >= 4 chars
  const std::string& shorter = a.size() <= b.size() ? a : b;
  const std::string& longer = a.size() <= b.size() ? b : a;
  if (shorter.size() >= 4 && longer.compare(0, shorter.size(), shorter) == 0) return true;
  return stem(a) == stem(b);
}

struct Alignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};

// Two greedy left-to-right passes: exact matches first, then stem/prefix
// matches, each candidate token aligning to the first free reference token.
Alignment align(const TokenSeq& candidate, const TokenSeq& reference) {
  std::vector<int> cand_to_ref(candidate.size(), -1);
  std::vector<bool> ref_used(reference.size(), false);
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i < candidate.size(); ++i) {
      if (cand_to_ref[i] >= 0) continue;
      for (std::size_t j = 0; j < reference.size(); ++j) {
        if (ref_used[j]) continue;
        const bool hit = pass == 0 ? candidate[i] == reference[j]
                                   : tokens_match(candidate[i], reference[j]);
        if (hit) {
          cand_to_ref[i] = static_cast<int>(j);
          ref_used[j] = true;
          break;
        }
      }
    }
  }
  Alignment result;
  int prev_ref = -2;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    if (cand_to_ref[i] < 0) {
      prev_ref = -2;
      continue;
    }
    ++result.matches;
    if (cand_to_ref[i] != prev_ref + 1) ++result.chunks;
    prev_ref = cand_to_ref[i];
  }
  return result;
}

}  // namespace

double meteor_lite(const TokenSeq& candidate, const std::vector<TokenSeq>& references) {
  if (references.empty()) throw ContractError("meteor_lite: need at least one reference");
  if (candidate.empty()) return 0.0;
  double best = 0;
  for (const auto& ref : references) {
    if (ref.empty()) continue;
    const Alignment a = align(candidate, ref);
    if (a.matches == 0) continue;
    const double m = static_cast<double>(a.matches);
    const double precision = m / static_cast<double>(candidate.size());
    const double recall = m / static_cast<double>(ref.size());
    const double f = 10.0 * precision * recall / (recall + 9.0 * precision);
    const double frag = static_cast<double>(a.chunks) / m;
    const double penalty = 0.5 * frag * frag * frag;
    best = std::max(best, f * (1.0 - penalty));
  }
  return 100.0 * best;
}

namespace {

using TfIdf = std::map<std::string, double>;

struct NgramVectors {
  std::array<TfIdf, 4> by_n;
  std::array<double, 4> norm = {0, 0, 0, 0};
};

NgramVectors tfidf_vectors(const TokenSeq& tokens,
                           const std::array<std::map<std::string, std::size_t>, 4>& df,
                           double image_count) {
  NgramVectors out;
  for (std::size_t n = 1; n <= 4; ++n) {
    for (const auto& [gram, count] : ngram_counts(tokens, n)) {
      auto it = df[n - 1].find(gram);
      const double docs = it == df[n - 1].end() ? 0.0 : static_cast<double>(it->second);
      const double idf = std::log(image_count / std::max(1.0, docs));
      const double w = static_cast<double>(count) * idf;
      out.by_n[n - 1][gram] = w;
      out.norm[n - 1] += w * w;
    }
    out.norm[n - 1] = std::sqrt(out.norm[n - 1]);
  }
  return out;
}

double cosine(const TfIdf& a, double norm_a, const TfIdf& b, double norm_b) {
  if (norm_a == 0 || norm_b == 0) return 0.0;
  double dot = 0;
  for (const auto& [gram, w] : a) {
    auto it = b.find(gram);
    if (it != b.end()) dot += w * it->second;
  }
  return dot / (norm_a * norm_b);
}

}  // namespace

double cider(const std::vector<CaptionEntry>& corpus) {
  if (corpus.empty()) throw ContractError("cider: corpus is empty");
  const double image_count = static_cast<double>(corpus.size());

  // document frequencies over reference sets: one count per image whose
  // references contain the n-gram
  std::array<std::map<std::string, std::size_t>, 4> df;
  for (const auto& entry : corpus) {
    if (entry.references.empty()) {
      throw ContractError("cider: image '" + entry.id + "' has no references");
    }
    for (std::size_t n = 1; n <= 4; ++n) {
      std::map<std::string, bool> present;
      for (const auto& ref : entry.references) {
        for (const auto& [gram, count] : ngram_counts(ref, n)) present[gram] = true;
      }
      for (const auto& [gram, _] : present) ++df[n - 1][gram];
    }
  }

  double corpus_score = 0;
  for (const auto& entry : corpus) {
    const NgramVectors cand = tfidf_vectors(entry.candidate, df, image_count);
    std::array<double, 4> score_n = {0, 0, 0, 0};
    for (const auto& ref : entry.references) {
      const NgramVectors rv = tfidf_vectors(ref, df, image_count);
      for (std::size_t n = 0; n < 4; ++n) {
        score_n[n] += cosine(cand.by_n[n], cand.norm[n], rv.by_n[n], rv.norm[n]);
      }
    }
    double image_score = 0;
    for (std::size_t n = 0; n < 4; ++n) {
      image_score += score_n[n] / static_cast<double>(entry.references.size());
    }
    corpus_score += 10.0 * image_score / 4.0;
  }
  return corpus_score / image_count;
}

std::string category_name(VqaCategory c) {
  switch (c) {
    case VqaCategory::count: return "count";
    case VqaCategory::presence: return "presence";
    case VqaCategory::comparison: return "comparison";
    case VqaCategory::urban_rural: return "urban_rural";
  }
  return "?";
}

std::optional<VqaCategory> parse_category(std::string_view name) {
  if (name == "count") return VqaCategory::count;
  if (name == "presence") return VqaCategory::presence;
  if (name == "comparison" || name == "comparisons") return VqaCategory::comparison;
  if (name == "urban_rural" || name == "urban-rural" || name == "urban/rural") {
    return VqaCategory::urban_rural;
  }
  return std::nullopt;
}

namespace {

std::string trim_lower(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  std::string out = s.substr(a, b - a);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool answers_match(VqaCategory category, const std::string& predicted, const std::string& truth) {
  if (category == VqaCategory::count) {
    try {
      std::size_t used_p = 0, used_t = 0;
      const double p = std::stod(predicted, &used_p);
      const double t = std::stod(truth, &used_t);
      if (used_p == predicted.size() && used_t == truth.size()) {
        const auto as_count = [](double v) { return std::max(0.0, std::round(v)); };
        return as_count(p) == as_count(t);
      }
    } catch (...) {
      // non-numeric count answers fall back to string comparison
    }
  }
  return trim_lower(predicted) == trim_lower(truth);
}

}  // namespace

VqaReport vqa_aggregate(const std::map<VqaCategory, CategoryScore>& tallies) {
  VqaReport report;
  std::size_t correct = 0, total = 0, present = 0;
  double percent_sum = 0;
  for (const auto& [category, score] : tallies) {
    if (score.total == 0) continue;
    report.categories[category] = score;
    percent_sum += score.percent();
    ++present;
    correct += score.correct;
    total += score.total;
  }
  if (total == 0) throw ContractError("vqa: no records");
  report.average = percent_sum / static_cast<double>(present);
  report.overall = 100.0 * static_cast<double>(correct) / static_cast<double>(total);
  report.partial = present < 4;
  return report;
}

VqaReport vqa_accuracy(const std::vector<VqaRecord>& records) {
  std::map<VqaCategory, CategoryScore> tallies;
  for (const auto& record : records) {
    if (record.predicted.empty() || record.truth.empty()) {
      throw ValidationError("vqa record '" + record.id + "' has an empty answer");
    }
    CategoryScore& score = tallies[record.category];
    ++score.total;
    if (answers_match(record.category, record.predicted, record.truth)) ++score.correct;
  }
  return vqa_aggregate(tallies);
}

CaptionReport score_captions(const std::vector<CaptionEntry>& corpus) {
  if (corpus.empty()) throw ContractError("score_captions: corpus is empty");
  CaptionReport report;
  report.images = corpus.size();
  for (const auto& entry : corpus) {
    report.bleu1 += bleu(entry.candidate, entry.references, 1);
    report.bleu2 += bleu(entry.candidate, entry.references, 2);
    report.bleu3 += bleu(entry.candidate, entry.references, 3);
    report.bleu4 += bleu(entry.candidate, entry.references, 4);
    report.meteor += meteor_lite(entry.candidate, entry.references);
    report.rouge += rouge_l(entry.candidate, entry.references);
  }
  const double inv = 1.0 / static_cast<double>(corpus.size());
  report.bleu1 *= inv;
  report.bleu2 *= inv;
  report.bleu3 *= inv;
  report.bleu4 *= inv;
  report.meteor *= inv;
  report.rouge *= inv;
  report.cider = cider(corpus);
  return report;
}

namespace {

std::vector<ordered_json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<ordered_json> lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      lines.push_back(ordered_json::parse(line));
    } catch (const ordered_json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": bad JSON: " + e.what());
    }
  }
  return lines;
}

}  // namespace

std::vector<CaptionEntry> read_caption_jsonl(const std::string& path) {
  std::vector<CaptionEntry> out;
  std::size_t line_no = 0;
  for (const auto& j : read_jsonl(path)) {
    ++line_no;
    CaptionEntry entry;
    try {
      entry.id = j.at("id").get<std::string>();
      entry.candidate = tokenize(j.at("candidate").get<std::string>());
      for (const auto& r : j.at("references")) {
        entry.references.push_back(tokenize(r.get<std::string>()));
      }
    } catch (const ordered_json::exception& e) {
      throw ValidationError(path + ": record " + std::to_string(line_no) + ": " + e.what());
    }
    if (entry.references.empty()) {
      throw ValidationError(path + ": record '" + entry.id + "' has no references");
    }
    out.push_back(std::move(entry));
  }
  if (out.empty()) throw ValidationError(path + ": no caption records");
  return out;
}

std::vector<VqaRecord> read_vqa_jsonl(const std::string& path) {
  std::vector<VqaRecord> out;
  std::size_t line_no = 0;
  for (const auto& j : read_jsonl(path)) {
    ++line_no;
    VqaRecord record;
    try {
      record.id = j.at("id").get<std::string>();
      const std::string cat = j.at("category").get<std::string>();
      const auto parsed = parse_category(cat);
      if (!parsed) {
        throw ValidationError(path + ": record " + std::to_string(line_no) +
                              ": unknown category '" + cat + "'");
      }
      record.category = *parsed;
      record.predicted = j.at("predicted").get<std::string>();
      record.truth = j.at("truth").get<std::string>();
    } catch (const ordered_json::exception& e) {
      throw ValidationError(path + ": record " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(std::move(record));
  }
  if (out.empty()) throw ValidationError(path + ": no vqa records");
  return out;
}

namespace {

// 6 significant digits, the precision shared by tables and JSON output
std::string sig6(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

constexpr const char* kCaptionNotes =
    "bleu: add-one smoothing on zero precisions; meteor: exact/prefix/stem matching, "
    "no synonym lexicon; cider: idf over reference sets, x10 scale";

}  // namespace

std::string render_caption_table(const CaptionReport& report) {
  std::ostringstream out;
  out << "metric      value\n";
  out << "----------  ----------\n";
  const auto row = [&](const char* name, double v) {
    out << name;
    for (std::size_t i = std::string(name).size(); i < 12; ++i) out << ' ';
    out << sig6(v) << "\n";
  };
  row("bleu1", report.bleu1);
  row("bleu2", report.bleu2);
  row("bleu3", report.bleu3);
  row("bleu4", report.bleu4);
  row("meteor", report.meteor);
  row("rouge_l", report.rouge);
  row("cider", report.cider);
  out << "images      " << report.images << "\n";
  out << "# " << kCaptionNotes << "\n";
  return out.str();
}

std::string caption_report_json(const CaptionReport& report) {
  ordered_json j;
  j["bleu1"] = report.bleu1;
  j["bleu2"] = report.bleu2;
  j["bleu3"] = report.bleu3;
  j["bleu4"] = report.bleu4;
  j["meteor"] = report.meteor;
  j["rouge_l"] = report.rouge;
  j["cider"] = report.cider;
  j["images"] = report.images;
  j["notes"] = kCaptionNotes;
  return j.dump(2);
}

std::string render_vqa_table(const VqaReport& report) {
  std::ostringstream out;
  out << "category     accuracy\n";
  out << "-----------  ----------\n";
  for (const auto& [category, score] : report.categories) {
    const std::string name = category_name(category);
    out << name;
    for (std::size_t i = name.size(); i < 13; ++i) out << ' ';
    out << sig6(score.percent()) << "\n";
  }
  out << "average      " << sig6(report.average) << "\n";
  out << "overall      " << sig6(report.overall) << "\n";
  if (report.partial) out << "# average over present categories only\n";
  return out.str();
}

std::string vqa_report_json(const VqaReport& report) {
  ordered_json j;
  for (const auto& [category, score] : report.categories) {
    j["categories"][category_name(category)] = {{"correct", score.correct},
                                                {"total", score.total},
                                                {"accuracy", score.percent()}};
  }
  j["average"] = report.average;
  j["overall"] = report.overall;
  j["partial_categories"] = report.partial;
  return j.dump(2);
}

}  // namespace snvt::metrics
