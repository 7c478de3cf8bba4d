#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "sbp/corpus.hpp"
#include "sbp/pairing.hpp"
#include "sbp/shingle.hpp"

namespace sbp::synthesis {

inline constexpr double kDefaultTemperature = 1.0;
inline constexpr double kDefaultTopP = 0.9;
inline constexpr double kDefaultSmoothing = 0.1;
inline constexpr std::size_t kDefaultOrder = 3;
inline constexpr std::size_t kDefaultFeatureBuckets = 256;
inline constexpr std::size_t kDefaultMaxTokens = 256;

/// Synthetic document ids carry this bit; the low bits hold the record index.
inline constexpr DocId kSyntheticIdBit = 0x8000000000000000ULL;

class DistributionError : public Error {
public:
    using Error::Error;
};

/// Conditional next-token model p(next | seed document, generated prefix).
/// Outcomes are dense indices 0..vocab_size()-1 plus end-of-document at
/// index vocab_size(). Implementations must be safe for concurrent calls.
class ConditionalModel {
public:
    virtual ~ConditionalModel() = default;

    virtual std::size_t vocab_size() const = 0;
    virtual TokenId token_at(std::size_t index) const = 0;

    /// Fills `out` with vocab_size() + 1 probabilities summing to 1.
    virtual void next_distribution(std::span<const TokenId> seed, std::span<const std::uint32_t> prefix,
                                   std::vector<double>& out) const = 0;

    std::size_t end_index() const { return vocab_size(); }
};

// ---------------------------------------------------------------------------
// Reference synthesizer: count-based conditional n-gram model over target
// tokens. The context is (seed feature, last order-1 target tokens); the seed
// feature summarizes the seed's token multiset.

struct FitOptions {
    std::size_t order = kDefaultOrder;
    double smoothing = kDefaultSmoothing;
    /// Seed multisets are hashed into this many buckets; 0 keeps every distinct
    /// multiset as its own feature.
    std::size_t feature_buckets = kDefaultFeatureBuckets;
    /// When false the model ignores the seed and fits p(target) alone.
    bool use_seed = true;
};

struct TrainingPair {
    std::vector<TokenId> seed;
    std::vector<TokenId> target;
    /// Surface strings aligned with `target`. May be empty.
    std::vector<std::string> target_surface;
};

/// Builds training pairs from a pair dataset. Target surfaces are the
/// whitespace pieces of the target's text, which the reference tokenizer maps
/// one-to-one onto its tokens.
std::vector<TrainingPair> training_pairs(const pairing::PairDataset& dataset,
                                         const corpus::CorpusHandle& corpus);

class ReferenceSynthesizer final : public ConditionalModel {
public:
    /// Throws sbp::Error on an empty pair set, ConfigError on bad options.
    static ReferenceSynthesizer fit(std::span<const TrainingPair> pairs, const FitOptions& options = {});

    std::size_t vocab_size() const override { return vocab_.size(); }
    TokenId token_at(std::size_t index) const override { return vocab_.at(index); }
    void next_distribution(std::span<const TokenId> seed, std::span<const std::uint32_t> prefix,
                           std::vector<double>& out) const override;

    const std::string& surface_at(std::size_t index) const { return surface_.at(index); }
    const FitOptions& options() const { return options_; }
    std::size_t context_count() const { return keys_.size(); }

    void save(const std::filesystem::path& path) const;
    static ReferenceSynthesizer load(const std::filesystem::path& path);

private:
    static constexpr std::uint32_t kNoFeature = 0xffffffffu;

    std::uint32_t feature_of(std::span<const TokenId> seed) const;
    std::uint64_t context_key(std::uint32_t feature, std::span<const std::uint32_t> prefix,
                              std::size_t history) const;
    /// Position of `key` in keys_, or keys_.size() when absent.
    std::size_t find_context(std::uint64_t key) const;

    FitOptions options_;
    std::vector<TokenId> vocab_;       // ascending token ids
    std::vector<std::string> surface_;  // aligned with vocab_
    std::map<std::vector<TokenId>, std::uint32_t> exact_features_;

    // Contexts keyed by a 64-bit hash, sorted by key; entries are CSR rows.
    std::vector<std::uint64_t> keys_;
    std::vector<std::uint64_t> totals_;
    std::vector<std::uint64_t> offsets_;  // size keys_.size() + 1
    std::vector<std::uint32_t> entry_index_;
    std::vector<std::uint32_t> entry_count_;
};

// ---------------------------------------------------------------------------
// Sampling

/// Keeps the minimal prefix, in descending probability with ties by index,
/// whose cumulative mass reaches top_p, then renormalizes. Throws
/// DistributionError when `dist` is not normalized within 1e-6 and
/// ConfigError when top_p is outside (0, 1].
std::vector<double> nucleus_filter(std::span<const double> dist, double top_p = kDefaultTopP);

struct SamplingOptions {
    double temperature = kDefaultTemperature;
    double top_p = kDefaultTopP;
    std::size_t max_tokens = kDefaultMaxTokens;
    /// Argmax decoding (the zero-temperature limit), ties to the lowest index.
    bool greedy = false;
};

void validate(const SamplingOptions& options);

/// Autoregressive sampling; returns dense outcome indices without the end marker.
/// A pure function of (model, seed document, options, seed).
std::vector<std::uint32_t> sample_indices(const ConditionalModel& model, std::span<const TokenId> seed_doc,
                                          const SamplingOptions& options, std::uint64_t seed);

/// As sample_indices, mapped through token_at.
std::vector<TokenId> sample_conditional(const ConditionalModel& model, std::span<const TokenId> seed_doc,
                                        const SamplingOptions& options, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Document-level generation

struct Generated {
    std::string text;
    std::vector<TokenId> tokens;
};

/// Produces a target document from a seed document.
class DocumentSynthesizer {
public:
    virtual ~DocumentSynthesizer() = default;
    virtual Generated generate(const corpus::Document& seed_doc, const SamplingOptions& options,
                               std::uint64_t seed) const = 0;
};

/// Renders reference-model samples as surface strings joined by spaces.
class ReferenceDocumentSynthesizer final : public DocumentSynthesizer {
public:
    explicit ReferenceDocumentSynthesizer(std::shared_ptr<const ReferenceSynthesizer> model)
        : model_(std::move(model)) {}
    Generated generate(const corpus::Document& seed_doc, const SamplingOptions& options,
                       std::uint64_t seed) const override;

private:
    std::shared_ptr<const ReferenceSynthesizer> model_;
};

/// Child process speaking JSON lines over stdin/stdout. Request:
/// {"seed_text", "temperature", "top_p", "max_tokens", "seed"}; response: {"text"}.
/// Calls are serialized over the single pipe.
class ExternalSynthesizer final : public DocumentSynthesizer {
public:
    explicit ExternalSynthesizer(std::vector<std::string> command);
    ~ExternalSynthesizer() override;
    ExternalSynthesizer(const ExternalSynthesizer&) = delete;
    ExternalSynthesizer& operator=(const ExternalSynthesizer&) = delete;

    Generated generate(const corpus::Document& seed_doc, const SamplingOptions& options,
                       std::uint64_t seed) const override;

private:
    mutable std::mutex mutex_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    mutable std::string buffer_;
};

enum class FilterStatus { Kept, DroppedRepetition };

const char* to_string(FilterStatus status);

struct SynthesisRecord {
    DocId id = 0;
    DocId seed_id = 0;
    std::string text;
    std::vector<TokenId> tokens;
    double temperature = kDefaultTemperature;
    double top_p = kDefaultTopP;
    std::uint64_t seed = 0;
    FilterStatus status = FilterStatus::Kept;
};

/// True when some `width`-token window occurs at least twice (stride 1).
bool has_repeated_window(std::span<const TokenId> tokens, std::size_t width = shingle::kDefaultWidth);

FilterStatus post_filter_repetition(std::span<const TokenId> tokens, std::size_t width = shingle::kDefaultWidth);

struct HierarchicalOptions {
    SamplingOptions sampling;
    std::uint64_t seed = 0;
    std::size_t width = shingle::kDefaultWidth;
    unsigned threads = 0;
};

/// Record i draws its seed document uniformly from the corpus with a seed
/// derived from (run seed, i), then generates and filters. Throws ConfigError
/// for n_docs < 0 and sbp::Error for an empty corpus.
std::vector<SynthesisRecord> hierarchical_sample(const corpus::CorpusHandle& corpus,
                                                 const DocumentSynthesizer& synthesizer, std::int64_t n_docs,
                                                 const HierarchicalOptions& options = {});

/// JSON lines of {"id", "seed_id", "text"} for Kept records.
void write_synthetic_jsonl(const std::filesystem::path& path, std::span<const SynthesisRecord> records);

}  // namespace sbp::synthesis
