#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbp/corpus.hpp"
#include "sbp/synthesis.hpp"

namespace sbp::concept_lab {

/// Enumeration guard on the document space V^L.
inline constexpr std::uint64_t kMaxDocumentSpace = 1'000'000;

/// A document is a length-L string over symbols 0..V-1.
using Symbols = std::vector<std::uint32_t>;

/// Latent-concept model: c ~ prior, then L i.i.d. symbols from emission row c.
class ConceptModel {
public:
    /// Throws ConfigError when a row does not sum to 1 within 1e-12, when a
    /// probability is negative, or when V^L exceeds the guard.
    ConceptModel(std::vector<double> prior, std::vector<std::vector<double>> emissions, std::size_t length);

    std::size_t concepts() const { return prior_.size(); }
    std::size_t vocab() const { return emissions_.front().size(); }
    std::size_t length() const { return length_; }
    std::uint64_t document_space() const { return space_; }
    const std::vector<double>& prior() const { return prior_; }
    const std::vector<double>& emission(std::size_t c) const { return emissions_.at(c); }

    /// P(d | c). Throws sbp::Error for a wrong length or out-of-vocabulary symbol.
    double likelihood(std::size_t c, std::span<const std::uint32_t> doc) const;

    void check_document(std::span<const std::uint32_t> doc) const;

private:
    std::vector<double> prior_;
    std::vector<std::vector<double>> emissions_;
    std::size_t length_;
    std::uint64_t space_;
};

/// Dirichlet(1) prior and Dirichlet(concentration) emission rows.
ConceptModel random_model(std::size_t concepts, std::size_t vocab, std::size_t length, std::uint64_t seed,
                          double concentration = 1.0);

/// Base-V index of a document (first symbol most significant), and its inverse.
std::uint64_t encode(std::span<const std::uint32_t> doc, std::size_t vocab);
Symbols decode(std::uint64_t index, std::size_t vocab, std::size_t length);

double marginal(const ConceptModel& model, std::span<const std::uint32_t> doc);

/// P(c | d). Throws sbp::Error when marginal(d) = 0.
std::vector<double> posterior(const ConceptModel& model, std::span<const std::uint32_t> doc);

/// sum_c P(d2 | c) P(c | d1).
double exact_conditional(const ConceptModel& model, std::span<const std::uint32_t> d1,
                         std::span<const std::uint32_t> d2);

/// exact_conditional(d1, .) for every d2 in index order.
std::vector<double> exact_conditional_row(const ConceptModel& model, std::span<const std::uint32_t> d1);

/// marginal(.) for every document in index order.
std::vector<double> marginal_table(const ConceptModel& model);

Symbols sample_document(const ConceptModel& model, std::uint64_t seed);

/// Documents with ids 0..n-1; tokens are the symbols, text their decimal rendering.
corpus::CorpusHandle sample_corpus(const ConceptModel& model, std::size_t n_docs, std::uint64_t seed);

/// Pairs sharing one concept draw: c ~ prior, then d1, d2 i.i.d. from c.
std::vector<synthesis::TrainingPair> sample_pairs(const ConceptModel& model, std::size_t n_pairs,
                                                  std::uint64_t seed);

/// Posterior-predictive next-symbol model: p(v | d1, prefix) =
/// sum_c P(c | d1, prefix) p_c(v); end of document exactly after L symbols.
class ExactSynthesizer final : public synthesis::ConditionalModel {
public:
    explicit ExactSynthesizer(ConceptModel model) : model_(std::move(model)) {}
    std::size_t vocab_size() const override { return model_.vocab(); }
    TokenId token_at(std::size_t index) const override { return static_cast<TokenId>(index); }
    void next_distribution(std::span<const TokenId> seed, std::span<const std::uint32_t> prefix,
                           std::vector<double>& out) const override;

private:
    ConceptModel model_;
};

/// Model probability of emitting exactly `doc` followed by end of document.
double sequence_probability(const synthesis::ConditionalModel& model, std::span<const TokenId> seed,
                            std::span<const std::uint32_t> doc);

/// Key/value text: K, V, L, prior, and emission.<c> rows of space-separated numbers.
ConceptModel parse_model_spec(const std::string& text);
ConceptModel read_model_spec(const std::filesystem::path& path);
std::string format_model_spec(const ConceptModel& model);

// ---------------------------------------------------------------------------
// Simulation: a smoothed document-frequency learner trained on three streams
// of equal length (repeated real data, real plus synthetic, fresh draws).

struct SimulationConfig {
    std::size_t concepts = 6;
    std::size_t vocab = 4;
    std::size_t length = 4;
    double concentration = 0.3;
    std::uint64_t model_seed = 11;
    /// Replaces the random model drawn from the fields above.
    std::optional<ConceptModel> model;

    std::size_t real_docs = 64;
    std::size_t budget_docs = 1024;
    std::size_t synthetic_docs = 512;
    std::size_t checkpoint_every = 64;
    double learner_smoothing = 1e-3;
    /// 0 evaluates the exact expected cross-entropy under the true marginal.
    std::size_t heldout_docs = 0;

    std::size_t pair_neighbors = 8;
    double pair_alpha = 0.9;
    synthesis::FitOptions synthesizer{2, 0.1, 0, true};
    synthesis::SamplingOptions sampling{1.0, 1.0, 4, false};
    std::size_t mixture_block = 16;

    std::uint64_t data_seed = 1;
    std::uint64_t synthesis_seed = 2;
    std::uint64_t schedule_seed = 3;
    std::uint64_t oracle_seed = 4;
    std::uint64_t heldout_seed = 5;
};

void validate(const SimulationConfig& config);

struct Checkpoint {
    std::size_t step = 0;
    std::string regime;
    double loss = 0.0;
};

struct SimulationReport {
    std::vector<Checkpoint> checkpoints;  // ordered by regime, then step
    double model_entropy = 0.0;
    std::size_t pairs = 0;
    std::size_t synthetic_generated = 0;
    std::size_t synthetic_used = 0;
    SimulationConfig config;

    double final_loss(const std::string& regime) const;
    std::vector<double> curve(const std::string& regime) const;
};

/// Incremental learner: q(d) = (count(d) / seen + smoothing) / (1 + smoothing * V^L).
class DocumentFrequencyLearner {
public:
    DocumentFrequencyLearner(std::uint64_t space, double smoothing);
    void observe(std::uint64_t doc_index);
    double probability(std::uint64_t doc_index) const;
    std::uint64_t seen() const { return seen_; }

private:
    std::vector<std::uint64_t> counts_;
    std::uint64_t seen_ = 0;
    double smoothing_;
};

/// -sum_d P(d) log q(d), with q given as a full table.
double cross_entropy(std::span<const double> truth, std::span<const double> q);

SimulationReport run_sbp_simulation(const SimulationConfig& config);

/// CSV with header "step,regime,loss".
std::string report_csv(const SimulationReport& report);
std::string report_summary(const SimulationReport& report);

}  // namespace sbp::concept_lab
