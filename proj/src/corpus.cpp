#include "sbp/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "sbp/binary_io.hpp"
#include "sbp/hash.hpp"
#include "sbp/parallel.hpp"
#include "sbp/utf8.hpp"

namespace sbp::corpus {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Tokenizer

HashTokenizer::HashTokenizer(unsigned vocab_bits) {
    if (vocab_bits == 0 || vocab_bits > 31) throw ConfigError("vocab_bits", "must be in [1, 31]");
    mask_ = (1u << vocab_bits) - 1;
}

std::vector<std::string_view> HashTokenizer::split(std::string_view text) {
    std::vector<std::string_view> pieces;
    std::size_t pos = 0;
    std::size_t start = std::string_view::npos;
    while (pos < text.size()) {
        const std::size_t here = pos;
        const char32_t cp = utf8::decode(text, pos);
        if (utf8::is_whitespace(cp)) {
            if (start != std::string_view::npos) {
                pieces.push_back(text.substr(start, here - start));
                start = std::string_view::npos;
            }
        } else if (start == std::string_view::npos) {
            start = here;
        }
    }
    if (start != std::string_view::npos) pieces.push_back(text.substr(start));
    return pieces;
}

TokenId HashTokenizer::id_of(std::string_view piece) const {
    return static_cast<TokenId>(splitmix64(fnv1a64(piece)) & mask_);
}

std::vector<TokenId> HashTokenizer::encode(std::string_view text) const {
    const auto pieces = split(text);
    std::vector<TokenId> ids;
    ids.reserve(pieces.size());
    for (auto p : pieces) ids.push_back(id_of(p));
    return ids;
}

const HashTokenizer& reference_tokenizer() {
    static const HashTokenizer tokenizer;
    return tokenizer;
}

std::vector<TokenId> tokenize(std::string_view text) { return reference_tokenizer().encode(text); }

// ---------------------------------------------------------------------------
// Cleaning

namespace {

bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\v' || c == '\f' || c == '\r';
}

bool starts_with_scheme(std::string_view s, std::size_t i) {
    auto match = [&](std::string_view scheme) {
        if (s.size() - i < scheme.size()) return false;
        for (std::size_t k = 0; k < scheme.size(); ++k) {
            if (std::tolower(static_cast<unsigned char>(s[i + k])) != scheme[k]) return false;
        }
        return true;
    };
    return match("http://") || match("https://");
}

std::string strip_replacement_chars(std::string_view valid) {
    std::string out;
    out.reserve(valid.size());
    std::size_t pos = 0;
    while (pos < valid.size()) {
        const char32_t cp = utf8::decode(valid, pos);
        if (cp != utf8::kReplacement) utf8::append(out, cp);
    }
    return out;
}

std::string normalize_carriage_returns(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\r') {
            out.push_back('\n');
            if (i + 1 < s.size() && s[i + 1] == '\n') ++i;
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

std::string remove_long_urls(std::string_view s, std::size_t max_len) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (!starts_with_scheme(s, i)) {
            std::size_t next = i;
            utf8::decode(s, next);
            out.append(s.substr(i, next - i));
            i = next;
            continue;
        }
        std::size_t j = i;
        std::size_t length = 0;
        while (j < s.size()) {
            std::size_t next = j;
            if (utf8::is_whitespace(utf8::decode(s, next))) break;
            j = next;
            ++length;
        }
        if (length <= max_len) {
            out.append(s.substr(i, j - i));
            i = j;
            continue;
        }
        // Drop the URL and fold the whitespace on both sides into one separator.
        std::size_t newlines = 0;
        while (!out.empty() && is_ascii_space(out.back())) {
            newlines += out.back() == '\n';
            out.pop_back();
        }
        i = j;
        while (i < s.size() && is_ascii_space(s[i])) {
            newlines += s[i] == '\n';
            ++i;
        }
        if (!out.empty() && i < s.size()) {
            if (newlines > 0) {
                out.append(std::min<std::size_t>(newlines, 2), '\n');
            } else {
                out.push_back(' ');
            }
        }
    }
    return out;
}

std::string collapse_line_breaks(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t run = 0;
    for (char c : s) {
        if (c == '\n') {
            if (++run <= 2) out.push_back(c);
        } else {
            run = 0;
            out.push_back(c);
        }
    }
    return out;
}

}  // namespace

std::string clean_text(std::string_view raw, const CleanOptions& options) {
    std::string text = strip_replacement_chars(utf8::repair(raw));
    text = normalize_carriage_returns(text);
    text = remove_long_urls(text, options.max_url_length);
    return collapse_line_breaks(text);
}

// ---------------------------------------------------------------------------
// Records

DocId parse_doc_id(std::string_view text_id) {
    if (!text_id.empty() &&
        std::all_of(text_id.begin(), text_id.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        DocId value = 0;
        const auto [ptr, ec] = std::from_chars(text_id.data(), text_id.data() + text_id.size(), value);
        if (ec == std::errc() && ptr == text_id.data() + text_id.size()) return value;
    }
    return splitmix64(fnv1a64(text_id));
}

namespace {

DocId id_from_json(const json& value) {
    if (value.is_number_unsigned()) return value.get<std::uint64_t>();
    if (value.is_number_integer()) {
        const auto v = value.get<std::int64_t>();
        if (v < 0) throw std::invalid_argument("negative id");
        return static_cast<DocId>(v);
    }
    if (value.is_string()) return parse_doc_id(value.get<std::string>());
    throw std::invalid_argument("id must be an integer or a string");
}

}  // namespace

std::vector<RawRecord> read_jsonl_records(std::istream& in) {
    std::vector<RawRecord> records;
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        const std::size_t line_offset = offset;
        offset += line.size() + 1;
        if (std::all_of(line.begin(), line.end(), [](char c) { return is_ascii_space(c); })) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw FramingError(line_offset, "malformed JSON");
        }
        if (!obj.is_object() || !obj.contains("id") || !obj.contains("text") ||
            !obj["text"].is_string()) {
            throw FramingError(line_offset, "expected an object with \"id\" and string \"text\"");
        }
        RawRecord rec;
        try {
            rec.id = id_from_json(obj["id"]);
        } catch (const std::exception& e) {
            throw FramingError(line_offset, e.what());
        }
        rec.text = obj["text"].get<std::string>();
        records.push_back(std::move(rec));
    }
    return records;
}

// ---------------------------------------------------------------------------
// CorpusHandle

CorpusHandle::CorpusHandle() : CorpusHandle(std::vector<Document>{}) {}

CorpusHandle::CorpusHandle(std::vector<Document> documents) {
    auto store = std::make_shared<Store>();
    store->docs = std::move(documents);
    store->ids.reserve(store->docs.size());
    for (std::size_t i = 0; i < store->docs.size(); ++i) {
        const auto& doc = store->docs[i];
        if (!store->index.emplace(doc.id, i).second) throw DuplicateIdError(doc.id);
        store->ids.push_back(doc.id);
        store->total_tokens += doc.token_count();
    }
    store_ = std::move(store);
}

const Document* CorpusHandle::find(DocId id) const {
    const auto it = store_->index.find(id);
    return it == store_->index.end() ? nullptr : &store_->docs[it->second];
}

const Document& CorpusHandle::at(DocId id) const {
    if (const auto* doc = find(id)) return *doc;
    throw Error("unknown document id " + std::to_string(id));
}

CorpusHandle ingest(std::span<const RawRecord> records, const IngestOptions& options,
                    IngestStats* stats) {
    std::unordered_set<DocId> seen;
    seen.reserve(records.size());
    for (const auto& rec : records) {
        if (!seen.insert(rec.id).second) throw DuplicateIdError(rec.id);
    }
    const Tokenizer& tokenizer = options.tokenizer ? *options.tokenizer : reference_tokenizer();

    std::vector<Document> processed(records.size());
    parallel_for(records.size(), options.threads, [&](std::size_t i) {
        Document& doc = processed[i];
        doc.id = records[i].id;
        doc.text = clean_text(records[i].text, options.clean);
        doc.tokens = tokenizer.encode(doc.text);
    });

    std::vector<Document> admitted;
    admitted.reserve(processed.size());
    std::size_t over = 0;
    for (auto& doc : processed) {
        if (doc.token_count() <= options.max_tokens) {
            admitted.push_back(std::move(doc));
        } else {
            ++over;
        }
    }
    if (stats) {
        stats->records = records.size();
        stats->admitted = admitted.size();
        stats->over_length = over;
    }
    return CorpusHandle(std::move(admitted));
}

// ---------------------------------------------------------------------------
// Persistence

void write_corpus(const std::filesystem::path& dir, const CorpusHandle& corpus,
                  const std::string& config_json) {
    std::filesystem::create_directories(dir);
    json manifest;
    manifest["schema_version"] = kManifestSchemaVersion;
    manifest["stage"] = "ingest";
    manifest["config"] = json::parse(config_json);
    manifest["document_count"] = corpus.size();
    manifest["total_tokens"] = corpus.total_tokens();
    json docs = json::array();
    for (const auto& doc : corpus.documents()) {
        docs.push_back({{"id", doc.id}, {"token_count", doc.token_count()}});
    }
    manifest["documents"] = std::move(docs);
    io::open_out(dir / "manifest.json") << manifest.dump(2) << '\n';

    auto tokens = io::open_out(dir / "tokens.bin", std::ios::binary);
    for (const auto& doc : corpus.documents()) {
        io::put_u32(tokens, static_cast<std::uint32_t>(doc.tokens.size()));
        for (TokenId t : doc.tokens) io::put_u32(tokens, t);
    }

    auto text = io::open_out(dir / "documents.jsonl");
    for (const auto& doc : corpus.documents()) {
        text << json{{"id", doc.id}, {"text", doc.text}}.dump() << '\n';
    }
}

CorpusHandle read_corpus(const std::filesystem::path& dir) {
    auto manifest_in = io::open_in(dir / "manifest.json");
    const json manifest = json::parse(manifest_in);
    if (manifest.value("schema_version", 0) != kManifestSchemaVersion) {
        throw Error("unsupported corpus manifest schema in " + dir.string());
    }
    auto text_in = io::open_in(dir / "documents.jsonl");
    auto tokens_in = io::open_in(dir / "tokens.bin", std::ios::binary);
    const auto records = read_jsonl_records(text_in);
    const auto& listed = manifest.at("documents");
    if (listed.size() != records.size()) throw Error("corpus manifest and documents.jsonl disagree");

    std::vector<Document> docs;
    docs.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        Document doc;
        doc.id = records[i].id;
        doc.text = records[i].text;
        const std::uint32_t n = io::get_u32(tokens_in);
        doc.tokens.resize(n);
        for (auto& t : doc.tokens) t = io::get_u32(tokens_in);
        if (listed[i].at("id").get<DocId>() != doc.id ||
            listed[i].at("token_count").get<std::size_t>() != doc.token_count()) {
            throw Error("corpus files disagree at document " + std::to_string(doc.id));
        }
        docs.push_back(std::move(doc));
    }
    CorpusHandle handle(std::move(docs));
    if (handle.total_tokens() != manifest.at("total_tokens").get<std::uint64_t>()) {
        throw Error("corpus token total mismatch in " + dir.string());
    }
    return handle;
}

std::vector<Document> read_synthetic_jsonl(const std::filesystem::path& path,
                                           const Tokenizer* tokenizer) {
    const Tokenizer& tok = tokenizer ? *tokenizer : reference_tokenizer();
    auto in = io::open_in(path);
    std::vector<Document> docs;
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        const std::size_t line_offset = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error&) {
            throw FramingError(line_offset, "malformed JSON");
        }
        if (!obj.contains("id") || !obj.contains("seed_id") || !obj.contains("text")) {
            throw FramingError(line_offset, "expected {id, seed_id, text}");
        }
        Document doc;
        doc.id = id_from_json(obj["id"]);
        doc.text = obj["text"].get<std::string>();
        doc.tokens = tok.encode(doc.text);
        doc.provenance = Provenance::synthetic(id_from_json(obj["seed_id"]));
        docs.push_back(std::move(doc));
    }
    return docs;
}

}  // namespace sbp::corpus
