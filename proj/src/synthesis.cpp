#include "sbp/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "sbp/binary_io.hpp"
#include "sbp/hash.hpp"
#include "sbp/parallel.hpp"
#include "sbp/rng.hpp"

namespace sbp::synthesis {

using nlohmann::json;

namespace {

constexpr std::uint32_t kBoundary = 0xfffffffeu;  // history padding before the first token
constexpr std::uint64_t kModelMagic = 0x314c444f4d504253ULL;  // "SBPMODL1"

std::uint64_t to_bits(double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    return bits;
}

double from_bits(std::uint64_t bits) {
    double x;
    std::memcpy(&x, &bits, sizeof x);
    return x;
}

void check_normalized(std::span<const double> dist) {
    double total = 0.0;
    for (double p : dist) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw DistributionError("distribution has a negative or non-finite entry");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-6) {
        throw DistributionError("distribution sums to " + std::to_string(total) + ", not 1");
    }
}

// Shared by nucleus_filter and the sampler; `order` is scratch space.
void nucleus_in_place(std::vector<double>& dist, double top_p, std::vector<std::uint32_t>& order) {
    if (top_p >= 1.0) return;
    order.resize(dist.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return dist[a] > dist[b] || (dist[a] == dist[b] && a < b);
    });
    double mass = 0.0;
    std::size_t kept = 0;
    while (kept < order.size()) {
        mass += dist[order[kept++]];
        if (mass >= top_p) break;
    }
    for (std::size_t i = kept; i < order.size(); ++i) dist[order[i]] = 0.0;
    for (std::size_t i = 0; i < kept; ++i) dist[order[i]] /= mass;
}

void apply_temperature(std::vector<double>& dist, double temperature) {
    if (temperature == 1.0) return;
    const double inv = 1.0 / temperature;
    double total = 0.0;
    for (double& p : dist) {
        p = p > 0.0 ? std::pow(p, inv) : 0.0;
        total += p;
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw DistributionError("temperature scaling left no probability mass");
    }
    for (double& p : dist) p /= total;
}

}  // namespace

// ---------------------------------------------------------------------------
// Reference synthesizer

std::vector<TrainingPair> training_pairs(const pairing::PairDataset& dataset,
                                         const corpus::CorpusHandle& corpus) {
    std::vector<TrainingPair> out;
    out.reserve(dataset.pairs.size());
    for (const auto& p : dataset.pairs) {
        const auto& seed = corpus.at(p.seed_id);
        const auto& target = corpus.at(p.target_id);
        TrainingPair tp{seed.tokens, target.tokens, {}};
        const auto pieces = corpus::HashTokenizer::split(target.text);
        if (pieces.size() == target.tokens.size()) tp.target_surface.assign(pieces.begin(), pieces.end());
        out.push_back(std::move(tp));
    }
    return out;
}

std::uint32_t ReferenceSynthesizer::feature_of(std::span<const TokenId> seed) const {
    if (!options_.use_seed) return kNoFeature;
    std::vector<TokenId> multiset(seed.begin(), seed.end());
    std::sort(multiset.begin(), multiset.end());
    if (options_.feature_buckets > 0) {
        return static_cast<std::uint32_t>(hash_tokens(multiset) % options_.feature_buckets);
    }
    const auto it = exact_features_.find(multiset);
    return it == exact_features_.end() ? kNoFeature : it->second;
}

std::uint64_t ReferenceSynthesizer::context_key(std::uint32_t feature, std::span<const std::uint32_t> prefix,
                                                std::size_t history) const {
    std::uint64_t h = hash_combine(kFnvOffset, feature);
    h = hash_combine(h, history);
    for (std::size_t i = 0; i < history; ++i) {
        // Position prefix.size() - history + i, padded with the boundary marker.
        const std::size_t back = history - i;
        h = hash_combine(h, back <= prefix.size() ? prefix[prefix.size() - back] : kBoundary);
    }
    return h;
}

std::size_t ReferenceSynthesizer::find_context(std::uint64_t key) const {
    const auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
    if (it == keys_.end() || *it != key) return keys_.size();
    return static_cast<std::size_t>(it - keys_.begin());
}

ReferenceSynthesizer ReferenceSynthesizer::fit(std::span<const TrainingPair> pairs, const FitOptions& options) {
    if (pairs.empty()) throw Error("cannot fit a synthesizer on an empty pair dataset");
    if (options.order == 0) throw ConfigError("order", "n-gram order must be at least 1");
    if (!(options.smoothing >= 0.0) || !std::isfinite(options.smoothing)) {
        throw ConfigError("smoothing", "must be a finite nonnegative number");
    }

    ReferenceSynthesizer model;
    model.options_ = options;

    std::unordered_map<TokenId, std::string> first_surface;
    for (const auto& p : pairs) {
        const bool aligned = p.target_surface.size() == p.target.size();
        for (std::size_t i = 0; i < p.target.size(); ++i) {
            auto [it, inserted] = first_surface.try_emplace(p.target[i]);
            if (inserted) it->second = aligned ? p.target_surface[i] : std::to_string(p.target[i]);
        }
    }
    model.vocab_.reserve(first_surface.size());
    for (const auto& entry : first_surface) model.vocab_.push_back(entry.first);
    std::sort(model.vocab_.begin(), model.vocab_.end());
    std::unordered_map<TokenId, std::uint32_t> index;
    for (std::size_t i = 0; i < model.vocab_.size(); ++i) {
        index.emplace(model.vocab_[i], static_cast<std::uint32_t>(i));
        model.surface_.push_back(first_surface.at(model.vocab_[i]));
    }
    const auto end_marker = static_cast<std::uint32_t>(model.vocab_.size());

    if (options.use_seed && options.feature_buckets == 0) {
        for (const auto& p : pairs) {
            std::vector<TokenId> multiset(p.seed);
            std::sort(multiset.begin(), multiset.end());
            model.exact_features_.try_emplace(std::move(multiset),
                                              static_cast<std::uint32_t>(model.exact_features_.size()));
        }
    }

    std::vector<std::pair<std::uint64_t, std::uint32_t>> events;
    std::vector<std::uint32_t> target;
    for (const auto& p : pairs) {
        const std::uint32_t feature = model.feature_of(p.seed);
        target.clear();
        for (TokenId t : p.target) target.push_back(index.at(t));
        for (std::size_t k = 0; k <= target.size(); ++k) {
            const std::uint32_t next = k < target.size() ? target[k] : end_marker;
            const std::span<const std::uint32_t> prefix(target.data(), k);
            for (std::size_t h = 0; h < options.order; ++h) {
                events.emplace_back(model.context_key(kNoFeature, prefix, h), next);
                if (feature != kNoFeature) events.emplace_back(model.context_key(feature, prefix, h), next);
            }
        }
    }
    std::sort(events.begin(), events.end());

    model.offsets_.push_back(0);
    for (std::size_t i = 0; i < events.size();) {
        const std::uint64_t key = events[i].first;
        std::uint64_t total = 0;
        while (i < events.size() && events[i].first == key) {
            std::size_t j = i;
            while (j < events.size() && events[j] == events[i]) ++j;
            model.entry_index_.push_back(events[i].second);
            model.entry_count_.push_back(static_cast<std::uint32_t>(j - i));
            total += j - i;
            i = j;
        }
        model.keys_.push_back(key);
        model.totals_.push_back(total);
        model.offsets_.push_back(model.entry_index_.size());
    }
    return model;
}

void ReferenceSynthesizer::next_distribution(std::span<const TokenId> seed, std::span<const std::uint32_t> prefix,
                                             std::vector<double>& out) const {
    const std::uint32_t feature = feature_of(seed);
    std::size_t row = keys_.size();
    for (std::size_t h = options_.order; h-- > 0 && row == keys_.size();) {
        if (feature != kNoFeature) row = find_context(context_key(feature, prefix, h));
        if (row == keys_.size()) row = find_context(context_key(kNoFeature, prefix, h));
    }
    const std::size_t outcomes = vocab_.size() + 1;
    if (row == keys_.size()) {
        // Unreachable for a fitted model: the empty-history context always has counts.
        out.assign(outcomes, 1.0 / static_cast<double>(outcomes));
        return;
    }
    const double lambda = options_.smoothing;
    const double denom = static_cast<double>(totals_[row]) + lambda * static_cast<double>(outcomes);
    out.assign(outcomes, lambda / denom);
    for (std::uint64_t e = offsets_[row]; e < offsets_[row + 1]; ++e) {
        out[entry_index_[e]] += static_cast<double>(entry_count_[e]) / denom;
    }
}

void ReferenceSynthesizer::save(const std::filesystem::path& path) const {
    auto out = io::open_out(path, std::ios::binary);
    io::put_u64(out, kModelMagic);
    io::put_u64(out, options_.order);
    io::put_u64(out, to_bits(options_.smoothing));
    io::put_u64(out, options_.feature_buckets);
    io::put_u64(out, options_.use_seed ? 1 : 0);
    io::put_u64(out, vocab_.size());
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
        io::put_u32(out, vocab_[i]);
        io::put_u64(out, surface_[i].size());
        out.write(surface_[i].data(), static_cast<std::streamsize>(surface_[i].size()));
    }
    io::put_u64(out, exact_features_.size());
    for (const auto& [multiset, id] : exact_features_) {
        io::put_u32(out, id);
        io::put_u64(out, multiset.size());
        for (TokenId t : multiset) io::put_u32(out, t);
    }
    io::put_u64(out, keys_.size());
    for (std::size_t r = 0; r < keys_.size(); ++r) {
        io::put_u64(out, keys_[r]);
        io::put_u64(out, offsets_[r + 1] - offsets_[r]);
        for (std::uint64_t e = offsets_[r]; e < offsets_[r + 1]; ++e) {
            io::put_u32(out, entry_index_[e]);
            io::put_u32(out, entry_count_[e]);
        }
    }
    if (!out) throw Error("failed writing " + path.string());
}

ReferenceSynthesizer ReferenceSynthesizer::load(const std::filesystem::path& path) {
    auto in = io::open_in(path, std::ios::binary);
    if (io::get_u64(in) != kModelMagic) throw Error(path.string() + " is not a synthesizer model file");
    ReferenceSynthesizer model;
    model.options_.order = io::get_u64(in);
    model.options_.smoothing = from_bits(io::get_u64(in));
    model.options_.feature_buckets = io::get_u64(in);
    model.options_.use_seed = io::get_u64(in) != 0;
    const std::uint64_t vocab = io::get_u64(in);
    for (std::uint64_t i = 0; i < vocab; ++i) {
        model.vocab_.push_back(io::get_u32(in));
        std::string s(io::get_u64(in), '\0');
        in.read(s.data(), static_cast<std::streamsize>(s.size()));
        model.surface_.push_back(std::move(s));
    }
    const std::uint64_t features = io::get_u64(in);
    for (std::uint64_t i = 0; i < features; ++i) {
        const std::uint32_t id = io::get_u32(in);
        std::vector<TokenId> multiset(io::get_u64(in));
        for (auto& t : multiset) t = io::get_u32(in);
        model.exact_features_.emplace(std::move(multiset), id);
    }
    const std::uint64_t rows = io::get_u64(in);
    model.offsets_.push_back(0);
    for (std::uint64_t r = 0; r < rows; ++r) {
        model.keys_.push_back(io::get_u64(in));
        const std::uint64_t entries = io::get_u64(in);
        std::uint64_t total = 0;
        for (std::uint64_t e = 0; e < entries; ++e) {
            model.entry_index_.push_back(io::get_u32(in));
            model.entry_count_.push_back(io::get_u32(in));
            total += model.entry_count_.back();
        }
        model.totals_.push_back(total);
        model.offsets_.push_back(model.entry_index_.size());
    }
    if (!in) throw Error("truncated synthesizer model file " + path.string());
    return model;
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<double> nucleus_filter(std::span<const double> dist, double top_p) {
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p", "must lie in (0, 1]");
    check_normalized(dist);
    std::vector<double> out(dist.begin(), dist.end());
    std::vector<std::uint32_t> order;
    nucleus_in_place(out, top_p, order);
    return out;
}

void validate(const SamplingOptions& options) {
    if (!(options.temperature > 0.0) || !std::isfinite(options.temperature)) {
        throw ConfigError("temperature", "must be a positive finite number");
    }
    if (!(options.top_p > 0.0 && options.top_p <= 1.0)) throw ConfigError("top_p", "must lie in (0, 1]");
}

std::vector<std::uint32_t> sample_indices(const ConditionalModel& model, std::span<const TokenId> seed_doc,
                                          const SamplingOptions& options, std::uint64_t seed) {
    validate(options);
    Rng rng(seed);
    std::vector<std::uint32_t> prefix;
    std::vector<double> dist;
    std::vector<std::uint32_t> order;
    const std::size_t end = model.end_index();
    while (prefix.size() < options.max_tokens) {
        model.next_distribution(seed_doc, prefix, dist);
        check_normalized(dist);
        std::size_t next;
        if (options.greedy) {
            next = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        } else {
            apply_temperature(dist, options.temperature);
            nucleus_in_place(dist, options.top_p, order);
            next = rng.categorical(dist);
        }
        if (next == end) break;
        prefix.push_back(static_cast<std::uint32_t>(next));
    }
    return prefix;
}

std::vector<TokenId> sample_conditional(const ConditionalModel& model, std::span<const TokenId> seed_doc,
                                        const SamplingOptions& options, std::uint64_t seed) {
    const auto indices = sample_indices(model, seed_doc, options, seed);
    std::vector<TokenId> tokens;
    tokens.reserve(indices.size());
    for (auto i : indices) tokens.push_back(model.token_at(i));
    return tokens;
}

Generated ReferenceDocumentSynthesizer::generate(const corpus::Document& seed_doc, const SamplingOptions& options,
                                                 std::uint64_t seed) const {
    Generated g;
    for (auto i : sample_indices(*model_, seed_doc.tokens, options, seed)) {
        if (!g.text.empty()) g.text += ' ';
        g.text += model_->surface_at(i);
        g.tokens.push_back(model_->token_at(i));
    }
    return g;
}

// ---------------------------------------------------------------------------
// Filtering and hierarchical generation

const char* to_string(FilterStatus status) {
    return status == FilterStatus::Kept ? "kept" : "dropped_repetition";
}

bool has_repeated_window(std::span<const TokenId> tokens, std::size_t width) {
    if (width == 0) throw ConfigError("width", "shingle width must be at least 1");
    if (tokens.size() <= width) return false;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> seen;
    for (std::size_t i = 0; i + width <= tokens.size(); ++i) {
        const auto window = tokens.subspan(i, width);
        auto& starts = seen[shingle::window_hash(window)];
        for (std::size_t s : starts) {
            if (std::equal(window.begin(), window.end(), tokens.begin() + static_cast<std::ptrdiff_t>(s))) {
                return true;
            }
        }
        starts.push_back(i);
    }
    return false;
}

FilterStatus post_filter_repetition(std::span<const TokenId> tokens, std::size_t width) {
    return has_repeated_window(tokens, width) ? FilterStatus::DroppedRepetition : FilterStatus::Kept;
}

std::vector<SynthesisRecord> hierarchical_sample(const corpus::CorpusHandle& corpus,
                                                 const DocumentSynthesizer& synthesizer, std::int64_t n_docs,
                                                 const HierarchicalOptions& options) {
    if (n_docs < 0) throw ConfigError("n_docs", "must be nonnegative");
    validate(options.sampling);
    if (n_docs > 0 && corpus.empty()) throw Error("cannot sample seed documents from an empty corpus");
    std::vector<SynthesisRecord> records(static_cast<std::size_t>(n_docs));
    const auto& docs = corpus.documents();
    parallel_for(records.size(), options.threads, [&](std::size_t i) {
        Rng rng(derive_seed(options.seed, i));
        const auto& seed_doc = docs[rng.below(docs.size())];
        const std::uint64_t generation_seed = rng.next();
        auto generated = synthesizer.generate(seed_doc, options.sampling, generation_seed);
        SynthesisRecord& r = records[i];
        r.id = kSyntheticIdBit | static_cast<DocId>(i);
        r.seed_id = seed_doc.id;
        r.text = std::move(generated.text);
        r.tokens = std::move(generated.tokens);
        r.temperature = options.sampling.temperature;
        r.top_p = options.sampling.top_p;
        r.seed = generation_seed;
        r.status = post_filter_repetition(r.tokens, options.width);
    });
    return records;
}

void write_synthetic_jsonl(const std::filesystem::path& path, std::span<const SynthesisRecord> records) {
    auto out = io::open_out(path);
    for (const auto& r : records) {
        if (r.status != FilterStatus::Kept) continue;
        out << json{{"id", r.id}, {"seed_id", r.seed_id}, {"text", r.text}}.dump() << '\n';
    }
}

}  // namespace sbp::synthesis
