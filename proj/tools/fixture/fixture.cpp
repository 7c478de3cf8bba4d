#include "fixture.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "sbp/binary_io.hpp"
#include "sbp/quality.hpp"
#include "sbp/rng.hpp"
#include "sbp/synthesis.hpp"

namespace sbp::fixture {

namespace {

const char* const kSyllables[] = {"ka", "lo",  "mi",  "ren", "tu",  "sa",  "vel", "dor", "pi",  "qua", "zen", "bri",
                                  "fo", "gal", "hun", "jis", "nor", "pel", "ruk", "sti", "tho", "wen", "yar", "xel",
                                  "mo", "dra", "ce",  "lin", "ba",  "sor", "ti",  "gru", "ne",  "vo",  "pra", "el"};

std::vector<std::string> make_words(std::size_t count, Rng& rng) {
    std::set<std::string> seen;
    std::vector<std::string> words;
    const std::size_t syllables = std::size(kSyllables);
    while (words.size() < count) {
        const std::size_t parts = 2 + rng.below(2);
        std::string w;
        for (std::size_t i = 0; i < parts; ++i) w += kSyllables[rng.below(syllables)];
        if (seen.insert(w).second) words.push_back(w);
    }
    return words;
}

struct Vocabulary {
    std::vector<std::vector<std::string>> topics;
    std::vector<std::string> common;
    std::vector<double> topic_weights;  // Zipf-like weights over a topic's words
};

std::string sentence(const Vocabulary& v, std::size_t topic, std::size_t words, double p_topic, Rng& rng) {
    std::string s;
    for (std::size_t i = 0; i < words; ++i) {
        std::string w = rng.uniform() < p_topic ? v.topics[topic][rng.categorical(v.topic_weights)]
                                                : v.common[rng.below(v.common.size())];
        if (i == 0) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
        if (i + 1 < words && rng.uniform() < 0.08) w += ',';
        if (!s.empty()) s += ' ';
        s += w;
    }
    return s + '.';
}

std::string join_sentences(const std::vector<std::string>& sentences, Rng& rng) {
    std::string text;
    for (const auto& s : sentences) {
        if (!text.empty()) text += rng.uniform() < 0.15 ? "\n\n" : " ";
        text += s;
    }
    return text;
}

// Punctuation, case and whitespace edits only; normalized text is unchanged.
std::string near_copy(const std::string& source, Rng& rng) {
    std::string out;
    std::size_t i = 0;
    while (i < source.size()) {
        const std::size_t end = source.find_first_of(" \n", i);
        std::string word = source.substr(i, end == std::string::npos ? std::string::npos : end - i);
        const double u = rng.uniform();
        if (u < 0.08) {
            word[0] = static_cast<char>(std::islower(static_cast<unsigned char>(word[0]))
                                            ? std::toupper(static_cast<unsigned char>(word[0]))
                                            : std::tolower(static_cast<unsigned char>(word[0])));
        } else if (u < 0.14 && (word.back() == ',' || word.back() == '.')) {
            word.pop_back();
        } else if (u < 0.20) {
            word += rng.uniform() < 0.5 ? ";" : "!";
        }
        out += word;
        if (end == std::string::npos) break;
        std::size_t next = source.find_first_not_of(" \n", end);
        std::string gap = source.substr(end, next - end);
        if (rng.uniform() < 0.05) gap = gap == " " ? "  " : " \n";
        out += gap;
        i = next;
    }
    return out;
}

}  // namespace

double Fixture::expected_repetition() const {
    return static_cast<double>(repetition_ids.size()) / static_cast<double>(records.size());
}

double Fixture::expected_duplicate() const {
    return static_cast<double>(near_duplicates.size()) / static_cast<double>(records.size());
}

Fixture make_fixture(const FixtureOptions& options) {
    if (options.near_duplicates + options.repetition_docs >= options.documents) {
        throw ConfigError("documents", "too few documents for the planted sets");
    }
    Rng rng(options.seed);
    const std::size_t topics = options.topics ? options.topics : std::max<std::size_t>(1, options.documents / 50);

    Vocabulary vocab;
    const auto words = make_words(topics * options.topic_words + options.common_words, rng);
    for (std::size_t t = 0; t < topics; ++t) {
        vocab.topics.emplace_back(words.begin() + static_cast<std::ptrdiff_t>(t * options.topic_words),
                                  words.begin() + static_cast<std::ptrdiff_t>((t + 1) * options.topic_words));
    }
    vocab.common.assign(words.begin() + static_cast<std::ptrdiff_t>(topics * options.topic_words), words.end());
    for (std::size_t r = 0; r < options.topic_words; ++r) vocab.topic_weights.push_back(1.0 / (1.0 + 0.3 * r));

    // Slots for near-duplicates start after the first tenth so every copy has
    // earlier sources to draw from.
    std::vector<std::size_t> slots;
    for (std::size_t i = options.documents / 10; i < options.documents; ++i) slots.push_back(i);
    rng.shuffle(slots);
    const std::set<std::size_t> copy_slots(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(options.near_duplicates));
    std::vector<std::size_t> base_slots;
    for (std::size_t i = 0; i < options.documents; ++i) {
        if (!copy_slots.count(i)) base_slots.push_back(i);
    }
    rng.shuffle(base_slots);
    const std::set<std::size_t> repeat_slots(base_slots.begin(),
                                             base_slots.begin() + static_cast<std::ptrdiff_t>(options.repetition_docs));

    Fixture fx;
    std::vector<std::size_t> plain_sources;  // earlier slots eligible as copy sources
    for (std::size_t i = 0; i < options.documents; ++i) {
        const DocId id = i + 1;
        if (copy_slots.count(i)) {
            const std::size_t src = plain_sources[rng.below(plain_sources.size())];
            fx.records.push_back({id, near_copy(fx.records[src].text, rng)});
            fx.topic.push_back(fx.topic[src]);
            fx.near_duplicates.emplace_back(id, fx.records[src].id);
            continue;
        }
        const std::size_t topic = rng.below(topics);
        std::vector<std::string> sentences;
        const std::size_t count = 4 + rng.below(4);
        for (std::size_t s = 0; s < count; ++s) {
            sentences.push_back(sentence(vocab, topic, 8 + rng.below(9), options.topic_probability, rng));
        }
        if (repeat_slots.count(i)) {
            sentences[0] = sentence(vocab, topic, 14 + rng.below(3), options.topic_probability, rng);
            sentences.push_back(sentences[0]);
            fx.repetition_ids.push_back(id);
        } else {
            plain_sources.push_back(i);
        }
        fx.records.push_back({id, join_sentences(sentences, rng)});
        fx.topic.push_back(topic);
    }

    // Check the planted truth against the rule definitions on cleaned text.
    corpus::IngestStats stats;
    const auto docs = corpus::ingest(fx.records, {}, &stats);
    if (stats.admitted != fx.records.size()) throw Error("fixture documents were dropped at ingest");
    std::vector<DocId> repeated;
    for (const auto& d : docs.documents()) {
        if (synthesis::has_repeated_window(d.tokens)) repeated.push_back(d.id);
    }
    if (repeated != fx.repetition_ids) throw Error("fixture repetition truth does not hold; try another seed");
    const auto flags = quality::duplicate_flags(docs.documents());
    std::vector<DocId> flagged;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        if (flags[i]) flagged.push_back(docs.documents()[i].id);
    }
    std::vector<DocId> planted;
    for (const auto& [copy, source] : fx.near_duplicates) planted.push_back(copy);
    if (flagged != planted) throw Error("fixture near-duplicate truth does not hold; try another seed");
    return fx;
}

void write_fixture(const std::filesystem::path& jsonl_path, const Fixture& fx, const FixtureOptions& options) {
    using nlohmann::json;
    auto out = io::open_out(jsonl_path);
    for (const auto& r : fx.records) out << json{{"id", r.id}, {"text", r.text}}.dump() << '\n';

    json truth;
    truth["schema_version"] = kManifestSchemaVersion;
    truth["documents"] = fx.records.size();
    truth["seed"] = options.seed;
    truth["repetition_ids"] = fx.repetition_ids;
    truth["near_duplicates"] = fx.near_duplicates;
    truth["expected_repetition"] = fx.expected_repetition();
    truth["expected_duplicate"] = fx.expected_duplicate();
    truth["topic"] = fx.topic;
    auto path = jsonl_path;
    path.replace_extension(".truth.json");
    io::open_out(path) << truth.dump(1) << '\n';
}

}  // namespace sbp::fixture
