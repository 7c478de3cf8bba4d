#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "sbp/corpus.hpp"

namespace sbp::fixture {

/// Synthetic topical corpus with planted self-repeating documents and planted
/// near-duplicates (punctuation, case and whitespace edits of an earlier document).
struct FixtureOptions {
    std::size_t documents = 1000;
    std::size_t topics = 0;  // 0 selects documents / 50
    std::size_t repetition_docs = 50;
    std::size_t near_duplicates = 40;
    std::size_t topic_words = 30;
    std::size_t common_words = 400;
    double topic_probability = 0.8;
    std::uint64_t seed = 7;
};

struct Fixture {
    std::vector<corpus::RawRecord> records;
    std::vector<std::size_t> topic;  // per record
    std::vector<DocId> repetition_ids;
    std::vector<std::pair<DocId, DocId>> near_duplicates;  // (copy, source)

    double expected_repetition() const;
    double expected_duplicate() const;
};

/// Builds the corpus and checks the planted ground truth against the rule
/// metrics after cleaning; throws sbp::Error when they disagree.
Fixture make_fixture(const FixtureOptions& options = {});

/// Writes `<stem>.jsonl` and `<stem>.truth.json`.
void write_fixture(const std::filesystem::path& jsonl_path, const Fixture& fixture, const FixtureOptions& options);

}  // namespace sbp::fixture
