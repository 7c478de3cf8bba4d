#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sbp/ann_index.hpp"
#include "sbp/concept_lab.hpp"
#include "sbp/mixture.hpp"
#include "sbp/pairing.hpp"
#include "sbp/rng.hpp"

namespace sbp::concept_lab {

namespace {

const char* const kBaseline = "baseline";
const char* const kSbp = "sbp";
const char* const kOracle = "oracle";

ann::EmbeddingSet symbol_histograms(const corpus::CorpusHandle& docs, std::size_t vocab) {
    std::vector<float> values(docs.size() * vocab, 0.0f);
    for (std::size_t i = 0; i < docs.size(); ++i) {
        for (TokenId s : docs.documents()[i].tokens) values[i * vocab + s] += 1.0f;
    }
    return ann::EmbeddingSet(vocab, docs.ids(), std::move(values));
}

std::vector<synthesis::TrainingPair> related_pairs(const corpus::CorpusHandle& real, std::size_t vocab,
                                                   const SimulationConfig& config, std::size_t& pair_count) {
    const auto vectors = symbol_histograms(real, vocab);
    std::vector<ann::QueryNeighbors> lists;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        const DocId id = vectors.ids()[i];
        lists.push_back({id, ann::brute_force_topk(vectors, vectors.row(i), config.pair_neighbors, id)});
    }
    const auto pairs = pairing::pair_by_threshold(lists, {config.pair_alpha, true});
    std::vector<synthesis::TrainingPair> out;
    for (const auto& p : pairs) {
        const auto& seed = real.at(p.seed_id).tokens;
        const auto& target = real.at(p.target_id).tokens;
        // Documents are shorter than a shingle, so the overlap rule reduces to identity.
        if (seed == target) continue;
        out.push_back({seed, target, {}});
    }
    pair_count = out.size();
    return out;
}

class Evaluator {
public:
    Evaluator(const ConceptModel& model, const SimulationConfig& config) : truth_(marginal_table(model)) {
        for (std::size_t i = 0; i < config.heldout_docs; ++i) {
            const auto d = sample_document(model, derive_seed(config.heldout_seed, i));
            heldout_.push_back(encode(d, model.vocab()));
        }
    }

    double loss(const DocumentFrequencyLearner& learner) const {
        if (heldout_.empty()) {
            std::vector<double> q(truth_.size());
            for (std::uint64_t i = 0; i < q.size(); ++i) q[i] = learner.probability(i);
            return cross_entropy(truth_, q);
        }
        double total = 0.0;
        for (auto d : heldout_) total -= std::log(learner.probability(d));
        return total / static_cast<double>(heldout_.size());
    }

    const std::vector<double>& truth() const { return truth_; }

private:
    std::vector<double> truth_;
    std::vector<std::uint64_t> heldout_;
};

void run_regime(const char* name, const std::vector<std::uint64_t>& stream, const Evaluator& eval,
                const SimulationConfig& config, std::uint64_t space, SimulationReport& report) {
    DocumentFrequencyLearner learner(space, config.learner_smoothing);
    for (std::size_t step = 1; step <= stream.size(); ++step) {
        learner.observe(stream[step - 1]);
        if (step % config.checkpoint_every == 0 || step == stream.size()) {
            report.checkpoints.push_back({step, name, eval.loss(learner)});
        }
    }
}

}  // namespace

DocumentFrequencyLearner::DocumentFrequencyLearner(std::uint64_t space, double smoothing)
    : counts_(space, 0), smoothing_(smoothing) {}

void DocumentFrequencyLearner::observe(std::uint64_t doc_index) {
    counts_.at(doc_index) += 1;
    seen_ += 1;
}

double DocumentFrequencyLearner::probability(std::uint64_t doc_index) const {
    const double space = static_cast<double>(counts_.size());
    if (seen_ == 0) return 1.0 / space;
    const double freq = static_cast<double>(counts_.at(doc_index)) / static_cast<double>(seen_);
    return (freq + smoothing_) / (1.0 + smoothing_ * space);
}

double cross_entropy(std::span<const double> truth, std::span<const double> q) {
    if (truth.size() != q.size()) throw Error("cross_entropy: table sizes differ");
    double h = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] > 0.0) h -= truth[i] * std::log(q[i]);
    }
    return h;
}

void validate(const SimulationConfig& c) {
    if (c.real_docs == 0) throw ConfigError("real_docs", "must be positive");
    if (c.budget_docs < c.real_docs) throw ConfigError("budget_docs", "budget is smaller than one pass over the real set");
    if (c.synthetic_docs > c.budget_docs - c.real_docs) {
        throw ConfigError("synthetic_docs", "synthetic volume leaves less than one real pass in the budget");
    }
    if (c.checkpoint_every == 0) throw ConfigError("checkpoint_every", "must be positive");
    if (!(c.learner_smoothing > 0.0) || !std::isfinite(c.learner_smoothing)) {
        throw ConfigError("learner_smoothing", "must be positive so held-out losses stay finite");
    }
    if (c.pair_neighbors == 0) throw ConfigError("pair_neighbors", "must be positive");
    synthesis::validate(c.sampling);
}

double SimulationReport::final_loss(const std::string& regime) const {
    const auto values = curve(regime);
    if (values.empty()) throw Error("no checkpoints for regime " + regime);
    return values.back();
}

std::vector<double> SimulationReport::curve(const std::string& regime) const {
    std::vector<double> out;
    for (const auto& c : checkpoints) {
        if (c.regime == regime) out.push_back(c.loss);
    }
    return out;
}

SimulationReport run_sbp_simulation(const SimulationConfig& config) {
    validate(config);
    const ConceptModel model = config.model ? *config.model
                                            : random_model(config.concepts, config.vocab, config.length,
                                                           config.model_seed, config.concentration);
    const std::uint64_t space = model.document_space();
    const Evaluator eval(model, config);

    SimulationReport report;
    report.config = config;
    for (double p : eval.truth()) {
        if (p > 0.0) report.model_entropy -= p * std::log(p);
    }

    const auto real = sample_corpus(model, config.real_docs, config.data_seed);

    // SBP: pair related real documents, fit the synthesizer, sample once.
    const auto pairs = related_pairs(real, model.vocab(), config, report.pairs);
    if (pairs.empty()) throw Error("no related pairs above the similarity threshold");
    auto synthesizer = std::make_shared<const synthesis::ReferenceSynthesizer>(
        synthesis::ReferenceSynthesizer::fit(pairs, config.synthesizer));
    synthesis::SamplingOptions sampling = config.sampling;
    sampling.max_tokens = model.length();
    const auto records = synthesis::hierarchical_sample(real, synthesis::ReferenceDocumentSynthesizer(synthesizer),
                                                        static_cast<std::int64_t>(config.synthetic_docs),
                                                        {sampling, config.synthesis_seed, shingle::kDefaultWidth, 1});
    report.synthetic_generated = records.size();
    std::vector<corpus::Document> synthetic_docs;
    for (const auto& r : records) {
        // Off-length samples are outside the document space the learner models.
        if (r.status != synthesis::FilterStatus::Kept || r.tokens.size() != model.length()) continue;
        synthetic_docs.push_back({r.id, r.text, r.tokens, corpus::Provenance::synthetic(r.seed_id)});
    }
    report.synthetic_used = synthetic_docs.size();
    const corpus::CorpusHandle synthetic(std::move(synthetic_docs));

    auto to_indices = [&](const std::vector<mixture::ScheduleEntry>& schedule) {
        std::vector<std::uint64_t> stream;
        stream.reserve(schedule.size());
        for (const auto& e : schedule) {
            const auto& doc = e.synthetic ? synthetic.at(e.id) : real.at(e.id);
            stream.push_back(encode(doc.tokens, model.vocab()));
        }
        return stream;
    };

    const std::uint64_t l = model.length();
    const mixture::ScheduleOptions schedule{config.schedule_seed, config.mixture_block};
    const auto baseline_plan = mixture::plan_mixture(config.budget_docs * l, config.real_docs * l, 0);
    const auto sbp_plan = mixture::plan_mixture(config.budget_docs * l, config.real_docs * l, synthetic.size() * l);
    const auto baseline_stream = to_indices(mixture::emit_schedule(baseline_plan, real, corpus::CorpusHandle(), schedule));
    const auto sbp_stream = to_indices(mixture::emit_schedule(sbp_plan, real, synthetic, schedule));

    std::vector<std::uint64_t> oracle_stream;
    for (std::size_t i = 0; i < config.budget_docs; ++i) {
        oracle_stream.push_back(encode(sample_document(model, derive_seed(config.oracle_seed, i)), model.vocab()));
    }

    run_regime(kBaseline, baseline_stream, eval, config, space, report);
    run_regime(kSbp, sbp_stream, eval, config, space, report);
    run_regime(kOracle, oracle_stream, eval, config, space, report);
    return report;
}

std::string report_csv(const SimulationReport& report) {
    std::ostringstream out;
    out << "step,regime,loss\n";
    char buf[64];
    for (const auto& c : report.checkpoints) {
        std::snprintf(buf, sizeof buf, "%.10f", c.loss);
        out << c.step << ',' << c.regime << ',' << buf << '\n';
    }
    return out.str();
}

std::string report_summary(const SimulationReport& report) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "entropy=%.6f baseline=%.6f sbp=%.6f oracle=%.6f pairs=%zu synthetic=%zu/%zu",
                  report.model_entropy, report.final_loss(kBaseline), report.final_loss(kSbp),
                  report.final_loss(kOracle), report.pairs, report.synthetic_used, report.synthetic_generated);
    return buf;
}

}  // namespace sbp::concept_lab
