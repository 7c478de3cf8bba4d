#include "sbp/pairing.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "sbp/binary_io.hpp"
#include "sbp/parallel.hpp"
#include "sbp/rng.hpp"

namespace sbp::pairing {

using nlohmann::json;

namespace {

bool by_ids(const PairRecord& a, const PairRecord& b) {
    return a.seed_id < b.seed_id || (a.seed_id == b.seed_id && a.target_id < b.target_id);
}

}  // namespace

std::vector<PairRecord> pair_by_threshold(std::span<const ann::QueryNeighbors> neighbors,
                                          const ThresholdOptions& options) {
    if (!(options.alpha >= -1.0 && options.alpha <= 1.0)) {
        throw ConfigError("alpha", "similarity threshold must lie in [-1, 1]");
    }
    std::vector<PairRecord> pairs;
    for (const auto& q : neighbors) {
        for (const auto& n : q.neighbors) {
            if (n.id == q.doc_id) continue;
            if (n.score > options.alpha) pairs.push_back({q.doc_id, n.id, n.score});
        }
    }
    std::sort(pairs.begin(), pairs.end(), by_ids);
    pairs.erase(std::unique(pairs.begin(), pairs.end(),
                            [](const PairRecord& a, const PairRecord& b) {
                                return a.seed_id == b.seed_id && a.target_id == b.target_id;
                            }),
                pairs.end());
    if (options.both_orderings) return pairs;

    std::set<std::pair<DocId, DocId>> kept;
    std::vector<PairRecord> one_way;
    for (const auto& p : pairs) {
        const auto key = std::minmax(p.seed_id, p.target_id);
        if (kept.insert(key).second) one_way.push_back(p);
    }
    return one_way;
}

std::vector<PairRecord> dedup_pairs(std::span<const PairRecord> pairs,
                                    const corpus::CorpusHandle& corpus, std::size_t width,
                                    unsigned threads) {
    std::vector<DocId> ids;
    for (const auto& p : pairs) {
        ids.push_back(p.seed_id);
        ids.push_back(p.target_id);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (DocId id : ids) {
        if (!corpus.find(id)) throw Error("pair references unknown document id " + std::to_string(id));
    }

    std::vector<shingle::ShingleSet> sets(ids.size());
    parallel_for(ids.size(), threads, [&](std::size_t i) {
        const auto& doc = corpus.at(ids[i]);
        sets[i] = shingle::shingles(shingle::normalize_for_shingling(doc.text), width, doc.id);
    });
    std::unordered_map<DocId, std::size_t> slot;
    for (std::size_t i = 0; i < ids.size(); ++i) slot.emplace(ids[i], i);

    std::vector<char> keep(pairs.size(), 0);
    parallel_for(pairs.size(), threads, [&](std::size_t i) {
        keep[i] = !shingle::intersects(sets[slot.at(pairs[i].seed_id)], sets[slot.at(pairs[i].target_id)]);
    });
    std::vector<PairRecord> out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (keep[i]) out.push_back(pairs[i]);
    }
    return out;
}

PairDataset emit_pair_dataset(std::vector<PairRecord> pairs, const corpus::CorpusHandle& corpus,
                              const EmitOptions& options) {
    PairDataset ds;
    ds.alpha = options.alpha;
    ds.width = options.width;
    ds.context_cap = options.context_cap;
    ds.seed = options.seed;
    std::sort(pairs.begin(), pairs.end(), by_ids);
    for (auto& p : pairs) {
        const std::size_t tokens = corpus.at(p.seed_id).token_count() + corpus.at(p.target_id).token_count();
        if (tokens <= options.context_cap) {
            ds.pairs.push_back(p);
        } else {
            ++ds.dropped_over_cap;
        }
    }
    Rng rng(options.seed);
    rng.shuffle(ds.pairs);
    return ds;
}

void write_pairs_jsonl(const std::filesystem::path& path, std::span<const PairRecord> pairs) {
    auto out = io::open_out(path);
    for (const auto& p : pairs) {
        out << json{{"seed_id", p.seed_id}, {"target_id", p.target_id}, {"similarity", p.similarity}}.dump()
            << '\n';
    }
}

std::vector<PairRecord> read_pairs_jsonl(const std::filesystem::path& path) {
    auto in = io::open_in(path);
    std::vector<PairRecord> pairs;
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        const std::size_t line_offset = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        try {
            const json obj = json::parse(line);
            pairs.push_back({obj.at("seed_id").get<DocId>(), obj.at("target_id").get<DocId>(),
                             obj.at("similarity").get<double>()});
        } catch (const json::exception& e) {
            throw corpus::FramingError(line_offset, e.what());
        }
    }
    return pairs;
}

std::string similarity_histogram_csv(std::span<const PairRecord> pairs, double lower, double bin_width) {
    std::map<long, std::size_t> bins;
    for (const auto& p : pairs) {
        bins[static_cast<long>(std::floor((p.similarity - lower) / bin_width))]++;
    }
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(4);
    out << "bin_lower,bin_upper,count\n";
    for (const auto& [bin, count] : bins) {
        const double lo = lower + static_cast<double>(bin) * bin_width;
        out << lo << ',' << lo + bin_width << ',' << count << '\n';
    }
    return out.str();
}

}  // namespace sbp::pairing
