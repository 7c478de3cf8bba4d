#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sbp/common.hpp"

namespace sbp::corpus {

struct Provenance {
    enum class Kind { Real, Synthetic };
    Kind kind = Kind::Real;
    DocId seed_id = 0;  // meaningful only for Synthetic

    static Provenance real() { return {}; }
    static Provenance synthetic(DocId seed) { return {Kind::Synthetic, seed}; }
    bool is_synthetic() const { return kind == Kind::Synthetic; }
    bool operator==(const Provenance&) const = default;
};

struct Document {
    DocId id = 0;
    std::string text;
    std::vector<TokenId> tokens;
    Provenance provenance;

    std::size_t token_count() const { return tokens.size(); }
};

/// Tokenizer contract. Implementations must be deterministic across processes.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::vector<TokenId> encode(std::string_view text) const = 0;
};

/// Reference tokenizer: split on Unicode whitespace, hash each piece into a
/// fixed vocabulary of 2^vocab_bits ids.
class HashTokenizer final : public Tokenizer {
public:
    explicit HashTokenizer(unsigned vocab_bits = 24);

    std::vector<TokenId> encode(std::string_view text) const override;
    TokenId id_of(std::string_view piece) const;
    std::uint32_t vocab_size() const { return mask_ + 1; }

    /// Whitespace-delimited pieces, in order. Views point into `text`.
    static std::vector<std::string_view> split(std::string_view text);

private:
    std::uint32_t mask_;
};

const HashTokenizer& reference_tokenizer();

/// Tokenizes with the reference tokenizer.
std::vector<TokenId> tokenize(std::string_view text);

struct CleanOptions {
    std::size_t max_url_length = 80;  // URLs strictly longer than this are removed
};

/// Repairs UTF-8 (malformed sequences and U+FFFD dropped), normalizes CR/CRLF,
/// removes long http(s) URLs and collapses runs of 3+ line breaks to 2.
/// Total and idempotent.
std::string clean_text(std::string_view raw, const CleanOptions& options = {});

struct RawRecord {
    DocId id = 0;
    std::string text;
};

class DuplicateIdError : public Error {
public:
    explicit DuplicateIdError(DocId id)
        : Error("duplicate document id " + std::to_string(id)), id_(id) {}
    DocId id() const { return id_; }

private:
    DocId id_;
};

class FramingError : public Error {
public:
    FramingError(std::size_t offset, const std::string& what)
        : Error("invalid record at byte offset " + std::to_string(offset) + ": " + what),
          offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Maps a JSON id (unsigned integer, or string) to a 64-bit document id.
/// Decimal strings map to their value, other strings to a stable hash.
DocId parse_doc_id(std::string_view text_id);

/// Reads {"id", "text"} JSON lines. Blank lines are skipped.
std::vector<RawRecord> read_jsonl_records(std::istream& in);

/// Immutable corpus snapshot: documents, |D| and total token count.
class CorpusHandle {
public:
    CorpusHandle();
    explicit CorpusHandle(std::vector<Document> documents);

    std::size_t size() const { return store_->docs.size(); }
    bool empty() const { return size() == 0; }
    std::uint64_t total_tokens() const { return store_->total_tokens; }
    const std::vector<DocId>& ids() const { return store_->ids; }
    const std::vector<Document>& documents() const { return store_->docs; }

    const Document* find(DocId id) const;
    /// Throws sbp::Error naming the id when absent.
    const Document& at(DocId id) const;

private:
    struct Store {
        std::vector<Document> docs;
        std::vector<DocId> ids;
        std::unordered_map<DocId, std::size_t> index;
        std::uint64_t total_tokens = 0;
    };
    std::shared_ptr<const Store> store_;
};

struct IngestOptions {
    std::size_t max_tokens = 4096;
    CleanOptions clean;
    unsigned threads = 0;
    const Tokenizer* tokenizer = nullptr;  // null selects the reference tokenizer
};

struct IngestStats {
    std::size_t records = 0;
    std::size_t admitted = 0;
    std::size_t over_length = 0;
};

/// Cleans, tokenizes and length-filters records. Membership and totals do not
/// depend on record order; admitted documents keep stream order.
CorpusHandle ingest(std::span<const RawRecord> records, const IngestOptions& options = {},
                    IngestStats* stats = nullptr);

/// Writes manifest.json, tokens.bin and documents.jsonl into `dir`.
/// tokens.bin holds, per document in manifest order, a little-endian u32
/// length followed by that many u32 token ids.
void write_corpus(const std::filesystem::path& dir, const CorpusHandle& corpus,
                  const std::string& config_json = "{}");

CorpusHandle read_corpus(const std::filesystem::path& dir);

/// Reads documents in the synthetic output layout ({id, seed_id, text} lines).
std::vector<Document> read_synthetic_jsonl(const std::filesystem::path& path,
                                           const Tokenizer* tokenizer = nullptr);

}  // namespace sbp::corpus
