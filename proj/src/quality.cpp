#include "sbp/quality.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "sbp/parallel.hpp"
#include "sbp/rng.hpp"
#include "sbp/synthesis.hpp"

namespace sbp::quality {

namespace {

std::vector<shingle::ShingleSet> normalized_sets(std::span<const corpus::Document> docs, std::size_t width,
                                                 unsigned threads) {
    std::vector<shingle::ShingleSet> sets(docs.size());
    parallel_for(docs.size(), threads, [&](std::size_t i) {
        sets[i] = shingle::shingles(shingle::normalize_for_shingling(docs[i].text), width, docs[i].id);
    });
    return sets;
}

double jaccard_from_counts(std::size_t inter, std::size_t a, std::size_t b) {
    const std::size_t uni = a + b - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<bool> exact_flags(const std::vector<shingle::ShingleSet>& sets, double threshold) {
    std::vector<bool> dup(sets.size(), false);
    if (threshold <= 0.0) {
        // Every pair qualifies, including disjoint ones.
        for (std::size_t i = 1; i < sets.size(); ++i) dup[i] = true;
        return dup;
    }
    // Inverted index over retained documents; only overlapping ones can qualify.
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> postings;
    std::unordered_map<std::uint32_t, std::size_t> overlap;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        overlap.clear();
        for (auto h : sets[i].hashes) {
            const auto it = postings.find(h);
            if (it == postings.end()) continue;
            for (auto j : it->second) ++overlap[j];
        }
        for (const auto& [j, inter] : overlap) {
            if (jaccard_from_counts(inter, sets[i].size(), sets[j].size()) >= threshold) {
                dup[i] = true;
                break;
            }
        }
        if (dup[i]) continue;
        for (auto h : sets[i].hashes) postings[h].push_back(static_cast<std::uint32_t>(i));
    }
    return dup;
}

std::vector<bool> minhash_flags(const std::vector<shingle::ShingleSet>& sets, const DuplicateOptions& options) {
    std::vector<shingle::MinHashSignature> sigs(sets.size());
    parallel_for(sets.size(), options.threads, [&](std::size_t i) {
        sigs[i] = shingle::minhash(sets[i], options.permutations, options.seed);
    });
    std::vector<bool> dup(sets.size(), false);
    std::vector<std::size_t> retained;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        for (std::size_t j : retained) {
            if (shingle::estimate_jaccard(sigs[i], sigs[j]) >= options.threshold) {
                dup[i] = true;
                break;
            }
        }
        if (!dup[i]) retained.push_back(i);
    }
    return dup;
}

const char* method_name(Method m) { return m == Method::Rule ? "rule" : "judge"; }

}  // namespace

double repetition_rate(std::span<const corpus::Document> docs, std::size_t width, unsigned threads) {
    if (docs.empty()) throw Error("repetition rate needs a nonempty sample");
    std::vector<char> repeated(docs.size(), 0);
    parallel_for(docs.size(), threads,
                 [&](std::size_t i) { repeated[i] = synthesis::has_repeated_window(docs[i].tokens, width); });
    const auto hits = static_cast<double>(std::count(repeated.begin(), repeated.end(), 1));
    return hits / static_cast<double>(docs.size());
}

std::vector<bool> duplicate_flags(std::span<const corpus::Document> docs, const DuplicateOptions& options) {
    const auto sets = normalized_sets(docs, options.width, options.threads);
    return options.mode == DuplicateMode::Exact ? exact_flags(sets, options.threshold) : minhash_flags(sets, options);
}

double duplicate_at_n(std::span<const corpus::Document> docs, const DuplicateOptions& options) {
    if (docs.size() < 2) throw ConfigError("N", "Duplicate@N needs at least two documents");
    const auto flags = duplicate_flags(docs, options);
    return static_cast<double>(std::count(flags.begin(), flags.end(), true)) / static_cast<double>(docs.size());
}

double pair_copying_rate(std::span<const pairing::PairRecord> pairs, const corpus::CorpusHandle& seeds,
                         const corpus::CorpusHandle& targets, double threshold, std::size_t width, unsigned threads) {
    if (pairs.empty()) throw Error("pair copying rate needs a nonempty pair set");
    for (const auto& p : pairs) {
        seeds.at(p.seed_id);
        targets.at(p.target_id);
    }
    std::vector<char> copied(pairs.size(), 0);
    parallel_for(pairs.size(), threads, [&](std::size_t i) {
        const auto a = shingle::shingles(shingle::normalize_for_shingling(seeds.at(pairs[i].seed_id).text), width);
        const auto b = shingle::shingles(shingle::normalize_for_shingling(targets.at(pairs[i].target_id).text), width);
        copied[i] = shingle::jaccard(a, b) >= threshold;
    });
    return static_cast<double>(std::count(copied.begin(), copied.end(), 1)) / static_cast<double>(pairs.size());
}

const MetricResult* QualityReport::find(std::string_view name) const {
    for (const auto& m : metrics) {
        if (m.name == name) return &m;
    }
    return nullptr;
}

std::vector<std::size_t> sample_indices(std::size_t size, std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(size);
    for (std::size_t i = 0; i < size; ++i) idx[i] = i;
    if (n >= size) return idx;
    Rng rng(seed);
    rng.shuffle(idx);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    return idx;
}

namespace {

std::vector<corpus::Document> pick(const corpus::CorpusHandle& docs, const std::vector<std::size_t>& idx) {
    std::vector<corpus::Document> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(docs.documents()[i]);
    return out;
}

void add_judge_metric(QualityReport& report, const std::string& name, const std::vector<JudgeVerdict>& verdicts,
                      Verdict counted) {
    std::size_t parsed = 0;
    std::size_t hits = 0;
    for (const auto& v : verdicts) {
        if (!v.verdict) continue;
        ++parsed;
        hits += *v.verdict == counted;
    }
    if (parsed < verdicts.size()) {
        report.notes.push_back(name + ": " + std::to_string(verdicts.size() - parsed) + " unparseable verdicts excluded");
    }
    if (parsed == 0) {
        report.notes.push_back(name + ": no parseable verdicts, metric omitted");
        return;
    }
    report.metrics.push_back({name, static_cast<double>(hits) / static_cast<double>(parsed), parsed, Method::Judge});
}

}  // namespace

QualityReport quality_report(const corpus::CorpusHandle& docs, std::span<const pairing::PairRecord> pairs,
                             const corpus::CorpusHandle& seeds, const ReportConfig& config) {
    if (docs.empty()) throw Error("quality report requires a nonempty document set");
    QualityReport report;
    report.corpus_id = config.corpus_id;

    const auto& all = docs.documents();
    report.metrics.push_back({"repetition", repetition_rate(all, config.width, config.threads), all.size(), Method::Rule});

    const auto dup_idx = sample_indices(docs.size(), config.duplicate_sample, derive_seed(config.seed, 1));
    if (dup_idx.size() >= 2) {
        const auto sample = pick(docs, dup_idx);
        DuplicateOptions dopt = config.duplicate;
        dopt.threads = config.threads;
        report.metrics.push_back({"duplicate@" + std::to_string(sample.size()), duplicate_at_n(sample, dopt),
                                  sample.size(), Method::Rule});
    } else {
        report.notes.push_back("duplicate: fewer than two documents, metric omitted");
    }

    if (!pairs.empty()) {
        report.metrics.push_back({"pair_copying",
                                  pair_copying_rate(pairs, seeds, docs, config.copy_threshold, config.width, config.threads),
                                  pairs.size(), Method::Rule});
    }

    if (!config.judge) return report;
    const JudgeClient client(*config.judge);

    const auto rep_idx = sample_indices(docs.size(), config.judge_sample, derive_seed(config.seed, 2));
    std::vector<Payload> payloads;
    std::vector<std::string> items;
    for (auto i : rep_idx) {
        payloads.push_back({all[i].text, {}});
        items.push_back(std::to_string(all[i].id));
    }
    add_judge_metric(report, "repetition_judge", client.evaluate_batch(Template::NonRepetition, payloads, items),
                     Verdict::Yes);

    const auto fact_idx = sample_indices(docs.size(), config.factuality_sample, derive_seed(config.seed, 3));
    payloads.clear();
    items.clear();
    for (auto i : fact_idx) {
        payloads.push_back({all[i].text, {}});
        items.push_back(std::to_string(all[i].id));
    }
    add_judge_metric(report, "non_factual", client.evaluate_batch(Template::Factuality, payloads, items),
                     Verdict::WellDefinedFalse);

    if (!pairs.empty()) {
        const auto pair_idx = sample_indices(pairs.size(), config.judge_sample, derive_seed(config.seed, 4));
        payloads.clear();
        items.clear();
        for (auto i : pair_idx) {
            payloads.push_back({seeds.at(pairs[i].seed_id).text, docs.at(pairs[i].target_id).text});
            items.push_back(std::to_string(pairs[i].seed_id) + ":" + std::to_string(pairs[i].target_id));
        }
        add_judge_metric(report, "pair_irrelevance", client.evaluate_batch(Template::PairRelevance, payloads, items),
                         Verdict::No);
        add_judge_metric(report, "pair_copying_judge", client.evaluate_batch(Template::PairNovelty, payloads, items),
                         Verdict::Yes);
    }
    return report;
}

std::string report_csv(const QualityReport& report) {
    std::ostringstream out;
    out << "metric,method,fraction,sample_size\n";
    char buf[32];
    for (const auto& m : report.metrics) {
        std::snprintf(buf, sizeof buf, "%.6f", m.fraction);
        out << m.name << ',' << method_name(m.method) << ',' << buf << ',' << m.sample_size << '\n';
    }
    return out.str();
}

std::string report_summary(const QualityReport& report) {
    std::ostringstream out;
    out << "quality report";
    if (!report.corpus_id.empty()) out << " for " << report.corpus_id;
    out << '\n';
    char buf[128];
    for (const auto& m : report.metrics) {
        std::snprintf(buf, sizeof buf, "  %-20s %8.4f  (n=%zu, %s)\n", m.name.c_str(), m.fraction, m.sample_size,
                      method_name(m.method));
        out << buf;
    }
    for (const auto& n : report.notes) out << "  note: " << n << '\n';
    return out.str();
}

}  // namespace sbp::quality
