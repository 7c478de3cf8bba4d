#include "sbp/shingle.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>

#include "sbp/binary_io.hpp"
#include "sbp/hash.hpp"
#include "sbp/utf8.hpp"

namespace sbp::shingle {

namespace {

bool is_punctuation(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
               (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
    }
    switch (cp) {
        case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB: case 0xBF:
            return true;
        default:
            break;
    }
    return (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E) ||
           (cp >= 0x3001 && cp <= 0x3003) || (cp >= 0x3008 && cp <= 0x3011) ||
           (cp >= 0xFF01 && cp <= 0xFF0F);
}

char32_t to_lower(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 32;
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;
    return cp;
}

bool all_digits(std::string_view piece) {
    return !piece.empty() &&
           std::all_of(piece.begin(), piece.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

std::string normalize_surface(std::string_view text) {
    std::string stripped;
    stripped.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        const char32_t cp = utf8::decode(text, pos);
        if (cp == utf8::kReplacement || is_punctuation(cp)) continue;
        utf8::append(stripped, to_lower(cp));
    }
    std::string out;
    out.reserve(stripped.size());
    for (auto piece : corpus::HashTokenizer::split(stripped)) {
        if (all_digits(piece)) continue;
        if (!out.empty()) out.push_back(' ');
        out.append(piece);
    }
    return out;
}

std::vector<TokenId> normalize_for_shingling(std::string_view text,
                                             const corpus::Tokenizer* tokenizer) {
    const auto& tok = tokenizer ? *tokenizer : corpus::reference_tokenizer();
    return tok.encode(normalize_surface(text));
}

std::uint64_t window_hash(std::span<const TokenId> window) { return hash_tokens(window); }

ShingleSet shingles(std::span<const TokenId> tokens, std::size_t width, DocId doc_id) {
    if (width == 0) throw ConfigError("width", "shingle width must be at least 1");
    ShingleSet set;
    set.doc_id = doc_id;
    set.width = width;
    if (tokens.size() < width) return set;
    set.hashes.reserve(tokens.size() - width + 1);
    for (std::size_t i = 0; i + width <= tokens.size(); ++i) {
        set.hashes.push_back(window_hash(tokens.subspan(i, width)));
    }
    std::sort(set.hashes.begin(), set.hashes.end());
    set.hashes.erase(std::unique(set.hashes.begin(), set.hashes.end()), set.hashes.end());
    return set;
}

namespace {

std::size_t intersection_size(const ShingleSet& a, const ShingleSet& b) {
    std::size_t common = 0;
    auto ia = a.hashes.begin();
    auto ib = b.hashes.begin();
    while (ia != a.hashes.end() && ib != b.hashes.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++common;
            ++ia;
            ++ib;
        }
    }
    return common;
}

void require_same_width(const ShingleSet& a, const ShingleSet& b) {
    if (a.width != b.width) {
        throw IncomparableError("shingle sets have different widths (" + std::to_string(a.width) +
                                " vs " + std::to_string(b.width) + ")");
    }
}

}  // namespace

double jaccard(const ShingleSet& a, const ShingleSet& b) {
    require_same_width(a, b);
    if (a.empty() && b.empty()) return 0.0;
    const std::size_t common = intersection_size(a, b);
    const std::size_t uni = a.size() + b.size() - common;
    return static_cast<double>(common) / static_cast<double>(uni);
}

bool intersects(const ShingleSet& a, const ShingleSet& b) {
    require_same_width(a, b);
    auto ia = a.hashes.begin();
    auto ib = b.hashes.begin();
    while (ia != a.hashes.end() && ib != b.hashes.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            return true;
        }
    }
    return false;
}

MinHashSignature minhash(const ShingleSet& set, std::size_t k, std::uint64_t seed) {
    if (k == 0) throw ConfigError("k", "signature length must be positive");
    MinHashSignature sig;
    sig.doc_id = set.doc_id;
    sig.seed = seed;
    sig.width = set.width;
    sig.empty_set = set.empty();
    sig.minima.assign(k, std::numeric_limits<std::uint64_t>::max());
    std::vector<std::uint64_t> salts(k);
    for (std::size_t i = 0; i < k; ++i) salts[i] = splitmix64(hash_combine(seed, i));
    for (std::uint64_t h : set.hashes) {
        for (std::size_t i = 0; i < k; ++i) {
            sig.minima[i] = std::min(sig.minima[i], splitmix64(h ^ salts[i]));
        }
    }
    return sig;
}

double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b) {
    if (a.seed != b.seed || a.minima.size() != b.minima.size() || a.width != b.width) {
        throw IncomparableError("MinHash signatures use different seeds, lengths or widths");
    }
    if (a.empty_set || b.empty_set) return 0.0;
    std::size_t agree = 0;
    for (std::size_t i = 0; i < a.minima.size(); ++i) agree += a.minima[i] == b.minima[i];
    return static_cast<double>(agree) / static_cast<double>(a.minima.size());
}

void write_signatures(std::ostream& out, std::span<const MinHashSignature> signatures) {
    const std::uint64_t k = signatures.empty() ? 0 : signatures.front().minima.size();
    const std::uint64_t seed = signatures.empty() ? 0 : signatures.front().seed;
    io::put_u64(out, k);
    io::put_u64(out, seed);
    io::put_u64(out, signatures.size());
    for (const auto& sig : signatures) {
        if (sig.minima.size() != k || sig.seed != seed) {
            throw IncomparableError("cannot dump signatures with mixed seeds or lengths");
        }
        io::put_u64(out, sig.doc_id);
        for (auto m : sig.minima) io::put_u64(out, m);
    }
}

std::vector<MinHashSignature> read_signatures(std::istream& in) {
    const std::uint64_t k = io::get_u64(in);
    const std::uint64_t seed = io::get_u64(in);
    const std::uint64_t count = io::get_u64(in);
    std::vector<MinHashSignature> out;
    out.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        MinHashSignature sig;
        sig.seed = seed;
        sig.doc_id = io::get_u64(in);
        sig.minima.resize(k);
        for (auto& m : sig.minima) m = io::get_u64(in);
        sig.empty_set = std::all_of(sig.minima.begin(), sig.minima.end(), [](std::uint64_t m) {
            return m == std::numeric_limits<std::uint64_t>::max();
        });
        out.push_back(std::move(sig));
    }
    return out;
}

}  // namespace sbp::shingle
