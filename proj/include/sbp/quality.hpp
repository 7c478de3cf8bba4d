#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sbp/corpus.hpp"
#include "sbp/pairing.hpp"
#include "sbp/shingle.hpp"

namespace sbp::quality {

inline constexpr double kDuplicateThreshold = 0.6;
inline constexpr double kCopyThreshold = 0.9;

// ---------------------------------------------------------------------------
// Rule metrics

/// Fraction of documents whose raw tokens repeat some `width`-token window.
/// Throws sbp::Error on an empty sample.
double repetition_rate(std::span<const corpus::Document> docs, std::size_t width = shingle::kDefaultWidth,
                       unsigned threads = 0);

enum class DuplicateMode { Exact, MinHash };

struct DuplicateOptions {
    double threshold = kDuplicateThreshold;
    DuplicateMode mode = DuplicateMode::Exact;
    std::size_t width = shingle::kDefaultWidth;
    std::size_t permutations = shingle::kDefaultPermutations;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

/// Greedy scan in sample order over normalized shingle sets: document i is a
/// duplicate when its similarity to some earlier non-duplicate reaches the
/// threshold. Returns one flag per document.
std::vector<bool> duplicate_flags(std::span<const corpus::Document> docs, const DuplicateOptions& options = {});

/// Duplicates / N. Throws ConfigError for N < 2.
double duplicate_at_n(std::span<const corpus::Document> docs, const DuplicateOptions& options = {});

/// Fraction of pairs whose normalized shingle Jaccard reaches `threshold`. Seeds
/// resolve in `seeds`, targets in `targets`; a dangling id throws sbp::Error.
double pair_copying_rate(std::span<const pairing::PairRecord> pairs, const corpus::CorpusHandle& seeds,
                         const corpus::CorpusHandle& targets, double threshold = kCopyThreshold,
                         std::size_t width = shingle::kDefaultWidth, unsigned threads = 0);

// ---------------------------------------------------------------------------
// Judge client

enum class Template { PairRelevance, PairNovelty, NonRepetition, Factuality };
enum class Verdict { Yes, No, WellDefinedTrue, WellDefinedFalse, NotWellDefined };

const char* to_string(Verdict verdict);

/// Verbatim template text, with the input block placeholders {text1}, {text2},
/// {text} or {document}.
std::string_view template_text(Template t);

struct Payload {
    std::string text1;  // the single text for NonRepetition and Factuality
    std::string text2;
};

/// Substitutes the payload into the last occurrence of each placeholder.
std::string render_prompt(Template t, const Payload& payload);

class ParseError : public Error {
public:
    explicit ParseError(std::string raw)
        : Error("unparseable judge response: " + raw.substr(0, 200)), raw_(std::move(raw)) {}
    const std::string& raw() const { return raw_; }

private:
    std::string raw_;
};

class TransportError : public Error {
public:
    using Error::Error;
};

/// Reads the verdict from the final non-empty line. Yes/No for the pair and
/// repetition templates, one of the three factuality tags otherwise.
Verdict parse_verdict(Template t, const std::string& response);

struct JudgeConfig {
    std::string endpoint;  // e.g. http://127.0.0.1:8080/judge
    int attempts = 3;
    std::chrono::milliseconds backoff{200};
    std::chrono::seconds timeout{60};
    unsigned concurrency = 4;
};

struct JudgeVerdict {
    std::string item;
    std::optional<Verdict> verdict;  // empty when the response did not parse
    std::string raw;
};

class JudgeClient {
public:
    explicit JudgeClient(JudgeConfig config);

    /// POSTs {"prompt"} and expects {"text"}. Retries transport failures and
    /// non-200 responses with exponential backoff; throws TransportError once
    /// attempts are exhausted and ParseError for an unparseable verdict.
    JudgeVerdict evaluate(Template t, const Payload& payload, std::string item = {}) const;

    /// Bounded-concurrency batch. Parse failures are recorded in the result
    /// rather than thrown; output order follows input order.
    std::vector<JudgeVerdict> evaluate_batch(Template t, std::span<const Payload> payloads,
                                             std::span<const std::string> items) const;

    const JudgeConfig& config() const { return config_; }

private:
    std::string post(const std::string& prompt) const;

    JudgeConfig config_;
    std::string base_;
    std::string path_;
};

// ---------------------------------------------------------------------------
// Report

enum class Method { Rule, Judge };

struct MetricResult {
    std::string name;
    double fraction = 0.0;
    std::size_t sample_size = 0;
    Method method = Method::Rule;
};

struct QualityReport {
    std::string corpus_id;
    std::vector<MetricResult> metrics;
    std::vector<std::string> notes;

    const MetricResult* find(std::string_view name) const;
};

struct ReportConfig {
    std::string corpus_id;
    std::size_t width = shingle::kDefaultWidth;
    DuplicateOptions duplicate;
    std::size_t duplicate_sample = 1'000'000;
    std::size_t judge_sample = 1'000;
    std::size_t factuality_sample = 10'000;
    double copy_threshold = kCopyThreshold;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::optional<JudgeConfig> judge;
};

/// Seeded sample of min(n, size) indices, returned in ascending order.
std::vector<std::size_t> sample_indices(std::size_t size, std::size_t n, std::uint64_t seed);

/// Rule metrics on `docs` (and on `pairs` when given), plus judge metrics when
/// an endpoint is configured. Throws sbp::Error on an empty document set.
QualityReport quality_report(const corpus::CorpusHandle& docs, std::span<const pairing::PairRecord> pairs,
                             const corpus::CorpusHandle& seeds, const ReportConfig& config);

/// metric,method,fraction,sample_size
std::string report_csv(const QualityReport& report);
std::string report_summary(const QualityReport& report);

}  // namespace sbp::quality
