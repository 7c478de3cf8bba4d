#include <fstream>

#include <nlohmann/json.hpp>

#include "sbp/ann_index.hpp"
#include "sbp/binary_io.hpp"
#include "sbp/corpus.hpp"

namespace sbp::ann {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string shard_file(const char* stem, std::size_t s) {
    return std::string(stem) + "_" + std::to_string(s) + ".bin";
}

}  // namespace

void save_index(const fs::path& dir, const ShardedSearcher& searcher, const ShardingOptions& options) {
    fs::create_directories(dir);
    json manifest;
    manifest["schema_version"] = kManifestSchemaVersion;
    manifest["stage"] = "index-build";
    manifest["value_shards"] = searcher.value_shard_count();
    manifest["key_shards"] = options.key_shards;
    manifest["salts"] = options.salts;
    json assignment = json::array();
    for (std::size_t j = 0; j < searcher.key_shard_count(); ++j) {
        assignment.push_back({j, searcher.salt_of(j)});
    }
    manifest["assignment"] = assignment;
    manifest["seed"] = options.partition.seed;
    manifest["leaves_override"] = options.partition.leaves;
    manifest["max_iterations"] = options.partition.max_iterations;
    manifest["quantization"] = "affine-8bit";
    json shards = json::array();
    for (std::size_t s = 0; s < searcher.value_shard_count(); ++s) {
        const Searcher& shard = *searcher.shards()[s];
        const auto& values = shard.values();
        const auto& tree = shard.tree();
        shards.push_back({{"vectors", values.size()},
                          {"leaves", tree.leaf_count()},
                          {"dim", values.dim()}});

        auto centroids = io::open_out(dir / shard_file("centroids", s), std::ios::binary);
        io::put_u64(centroids, tree.leaf_count());
        io::put_u64(centroids, tree.dim);
        for (float f : tree.centroids) io::put_f32(centroids, f);

        auto postings = io::open_out(dir / shard_file("postings", s), std::ios::binary);
        io::put_u64(postings, tree.leaf_count());
        for (const auto& leaf : tree.postings) {
            io::put_u64(postings, leaf.size());
            for (auto row : leaf) io::put_u32(postings, row);
        }

        auto codes = io::open_out(dir / shard_file("codes", s), std::ios::binary);
        io::put_u64(codes, values.size());
        io::put_u64(codes, values.dim());
        codes.write(reinterpret_cast<const char*>(shard.codes().data()),
                    static_cast<std::streamsize>(shard.codes().size()));

        auto vectors = io::open_out(dir / shard_file("vectors", s), std::ios::binary);
        io::put_u64(vectors, values.size());
        io::put_u64(vectors, values.dim());
        for (DocId id : values.ids()) io::put_u64(vectors, id);
        for (float f : values.values()) io::put_f32(vectors, f);
    }
    manifest["shards"] = shards;
    io::open_out(dir / "manifest.json") << manifest.dump(2) << '\n';
}

std::pair<ShardedSearcher, ShardingOptions> load_index(const fs::path& dir) {
    auto in = io::open_in(dir / "manifest.json");
    const json manifest = json::parse(in);
    if (manifest.value("schema_version", 0) != kManifestSchemaVersion) {
        throw Error("unsupported index manifest schema in " + dir.string());
    }
    ShardingOptions options;
    options.value_shards = manifest.at("value_shards").get<std::size_t>();
    options.key_shards = manifest.at("key_shards").get<std::size_t>();
    options.salts = manifest.at("salts").get<std::size_t>();
    for (const auto& pair : manifest.at("assignment")) {
        options.assignment.emplace_back(pair.at(0).get<std::size_t>(), pair.at(1).get<std::size_t>());
    }
    options.partition.seed = manifest.at("seed").get<std::uint64_t>();
    options.partition.leaves = manifest.at("leaves_override").get<std::size_t>();
    options.partition.max_iterations = manifest.at("max_iterations").get<std::size_t>();

    std::vector<std::shared_ptr<const Searcher>> shards;
    for (std::size_t s = 0; s < options.value_shards; ++s) {
        auto vin = io::open_in(dir / shard_file("vectors", s), std::ios::binary);
        const std::uint64_t n = io::get_u64(vin);
        const std::uint64_t dim = io::get_u64(vin);
        std::vector<DocId> ids(n);
        for (auto& id : ids) id = io::get_u64(vin);
        std::vector<float> values(n * dim);
        for (auto& f : values) f = io::get_f32(vin);

        PartitionTree tree;
        auto cin = io::open_in(dir / shard_file("centroids", s), std::ios::binary);
        const std::uint64_t leaves = io::get_u64(cin);
        tree.dim = io::get_u64(cin);
        tree.centroids.resize(leaves * tree.dim);
        for (auto& f : tree.centroids) f = io::get_f32(cin);
        auto pin = io::open_in(dir / shard_file("postings", s), std::ios::binary);
        if (io::get_u64(pin) != leaves) throw Error("postings and centroids disagree on leaf count");
        tree.postings.resize(leaves);
        for (auto& leaf : tree.postings) {
            leaf.resize(io::get_u64(pin));
            for (auto& row : leaf) row = io::get_u32(pin);
        }
        // Codes are re-derived from the stored vectors; the stored block is checked
        // to catch a stale index.
        auto searcher = std::make_shared<const Searcher>(EmbeddingSet::from_normalized(dim, std::move(ids), std::move(values)),
                                                         std::move(tree));
        auto qin = io::open_in(dir / shard_file("codes", s), std::ios::binary);
        io::get_u64(qin);
        io::get_u64(qin);
        std::vector<std::uint8_t> codes(searcher->codes().size());
        qin.read(reinterpret_cast<char*>(codes.data()), static_cast<std::streamsize>(codes.size()));
        if (codes != searcher->codes()) throw Error("quantized code block does not match vectors");
        shards.push_back(std::move(searcher));
    }
    return {ShardedSearcher::from_shards(std::move(shards), options), options};
}

void write_matrix(const fs::path& path, const EmbeddingSet& set) {
    auto out = io::open_out(path, std::ios::binary);
    io::put_u64(out, set.size());
    io::put_u64(out, set.dim());
    for (float f : set.values()) io::put_f32(out, f);
}

void write_ids_sidecar(const fs::path& matrix_path, const std::vector<DocId>& ids) {
    json j;
    j["schema_version"] = kManifestSchemaVersion;
    j["ids"] = ids;
    io::open_out(fs::path(matrix_path.string() + ".ids.json")) << j.dump() << '\n';
}

EmbeddingSet read_matrix(const fs::path& path) {
    auto in = io::open_in(path, std::ios::binary);
    const std::uint64_t n = io::get_u64(in);
    const std::uint64_t dim = io::get_u64(in);
    std::vector<float> values(n * dim);
    for (auto& f : values) f = io::get_f32(in);
    std::vector<DocId> ids(n);
    const fs::path sidecar(path.string() + ".ids.json");
    if (fs::exists(sidecar)) {
        auto sin = io::open_in(sidecar);
        ids = json::parse(sin).at("ids").get<std::vector<DocId>>();
        if (ids.size() != n) throw Error("id sidecar length does not match matrix rows");
    } else {
        for (std::uint64_t i = 0; i < n; ++i) ids[i] = i;
    }
    return EmbeddingSet(dim, std::move(ids), std::move(values));
}

EmbeddingSet read_embeddings_jsonl(const fs::path& path) {
    auto in = io::open_in(path);
    std::vector<DocId> ids;
    std::vector<float> values;
    std::size_t dim = 0;
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
            throw corpus::FramingError(line_offset, "malformed JSON");
        }
        const auto& vec = obj.at("vector");
        if (dim == 0) dim = vec.size();
        if (vec.size() != dim || dim == 0) throw corpus::FramingError(line_offset, "inconsistent vector length");
        const auto& id = obj.at("id");
        ids.push_back(id.is_string() ? corpus::parse_doc_id(id.get<std::string>()) : id.get<DocId>());
        for (const auto& x : vec) values.push_back(x.get<float>());
    }
    return EmbeddingSet(dim == 0 ? 1 : dim, std::move(ids), std::move(values));
}

EmbeddingSet read_embeddings(const fs::path& path) {
    if (path.extension() == ".jsonl") return read_embeddings_jsonl(path);
    return read_matrix(path);
}

}  // namespace sbp::ann

namespace sbp::ann {

void write_neighbors_jsonl(const fs::path& path, std::span<const QueryNeighbors> lists) {
    auto out = io::open_out(path);
    for (const auto& q : lists) {
        json neighbors = json::array();
        for (const auto& n : q.neighbors) neighbors.push_back(json::array({n.id, n.score}));
        out << json{{"id", q.doc_id}, {"neighbors", std::move(neighbors)}}.dump() << '\n';
    }
}

std::vector<QueryNeighbors> read_neighbors_jsonl(const fs::path& path) {
    auto in = io::open_in(path);
    std::vector<QueryNeighbors> out;
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        const std::size_t line_offset = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        try {
            const json obj = json::parse(line);
            QueryNeighbors q;
            q.doc_id = obj.at("id").get<DocId>();
            for (const auto& n : obj.at("neighbors")) {
                q.neighbors.push_back({n.at(0).get<DocId>(), n.at(1).get<double>()});
            }
            out.push_back(std::move(q));
        } catch (const json::exception& e) {
            throw corpus::FramingError(line_offset, e.what());
        }
    }
    return out;
}

}  // namespace sbp::ann
