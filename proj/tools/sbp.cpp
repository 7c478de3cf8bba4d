// Command-line driver for the pipeline stages.
//
// Exit codes: 0 success, 2 missing input, 3 configuration error, 4 stage failure.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sbp/ann_index.hpp"
#include "sbp/binary_io.hpp"
#include "sbp/concept_lab.hpp"
#include "sbp/corpus.hpp"
#include "sbp/mixture.hpp"
#include "sbp/pairing.hpp"
#include "sbp/quality.hpp"
#include "sbp/synthesis.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sbp;

namespace {

void log(const std::string& stage, const std::string& message) { std::cerr << "[" << stage << "] " << message << '\n'; }

/// A directory input resolves to its default file; a file input is used as-is.
fs::path resolve(const fs::path& input, const char* default_name) {
    if (input.empty()) throw ConfigError(default_name, "input path is required");
    if (!fs::exists(input)) throw MissingInputError(input.string());
    return fs::is_directory(input) ? input / default_name : input;
}

/// Checks the producing stage's manifest when the input is a stage directory.
void check_stage(const fs::path& input, const std::string& expected_stage) {
    if (!fs::is_directory(input)) return;
    auto in = io::open_in(input / "manifest.json");
    const json manifest = json::parse(in);
    if (manifest.value("schema_version", 0) != kManifestSchemaVersion) {
        throw Error(input.string() + ": unsupported manifest schema version");
    }
    if (manifest.value("stage", std::string()) != expected_stage) {
        throw Error(input.string() + ": expected output of stage '" + expected_stage + "'");
    }
}

void write_manifest(const fs::path& dir, const std::string& stage, const json& config, const json& results) {
    json manifest;
    manifest["schema_version"] = kManifestSchemaVersion;
    manifest["stage"] = stage;
    manifest["config"] = config;
    manifest["results"] = results;
    io::open_out(dir / "manifest.json") << manifest.dump(2) << '\n';
}

std::uint64_t parse_tokens(const std::string& field, const std::string& text) {
    double value = 0.0;
    try {
        std::size_t used = 0;
        value = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
        throw ConfigError(field, "not a number: " + text);
    }
    if (!(value >= 0.0) || value != std::floor(value) || value >= 9.2e18) {
        throw ConfigError(field, "must be a nonnegative whole token count: " + text);
    }
    return static_cast<std::uint64_t>(value);
}

std::vector<std::string> split_command(const std::string& command) {
    std::istringstream in(command);
    std::vector<std::string> argv;
    std::string part;
    while (in >> part) argv.push_back(part);
    return argv;
}

json report_json(const quality::QualityReport& report) {
    json metrics = json::array();
    for (const auto& m : report.metrics) {
        metrics.push_back({{"name", m.name},
                           {"fraction", m.fraction},
                           {"sample_size", m.sample_size},
                           {"method", m.method == quality::Method::Rule ? "rule" : "judge"}});
    }
    return {{"corpus_id", report.corpus_id}, {"metrics", metrics}, {"notes", report.notes}};
}

// ---------------------------------------------------------------------------
// Stage options

struct Global {
    unsigned threads = 0;
};

struct IngestArgs {
    std::string input, out;
    std::size_t max_tokens = 4096;
    std::size_t max_url_length = 80;
};

struct EmbedArgs {
    std::string corpus, out;
    std::size_t dim = ann::kDefaultDim;
    std::uint64_t seed = 0;
};

struct IndexBuildArgs {
    std::string embeddings, out;
    std::size_t value_shards = 1, key_shards = 1, salts = 1, leaves = 0, max_iterations = 12;
    std::uint64_t seed = 0;
};

struct IndexSearchArgs {
    std::string index, out;
    std::size_t k = ann::kDefaultTopK, probe = 0;
    bool exhaustive = false, no_rescore = false;
};

struct PairArgs {
    std::string neighbors, out;
    double alpha = pairing::kDefaultAlpha;
    bool one_ordering = false;
};

struct DedupArgs {
    std::string pairs, corpus, out;
    std::size_t width = shingle::kDefaultWidth, context_cap = pairing::kDefaultContextCap;
    std::uint64_t seed = 0;
};

struct FitArgs {
    std::string pairs, corpus, out;
    synthesis::FitOptions fit;
};

struct RunArgs {
    std::string model, corpus, out, external;
    std::int64_t n_docs = -1;
    synthesis::SamplingOptions sampling;
    std::uint64_t seed = 0;
    std::size_t width = shingle::kDefaultWidth;
};

struct EvalArgs {
    std::string corpus, synthetic, pairs, out, judge_endpoint, duplicate_mode = "exact";
    std::size_t duplicate_sample = 1'000'000, judge_sample = 1'000, factuality_sample = 10'000;
    unsigned judge_concurrency = 4;
    int judge_attempts = 3;
    std::uint64_t seed = 0;
};

struct PlanArgs {
    std::string budget, real, synthetic, out;
};

struct EmitArgs {
    std::string corpus, synthetic, out, budget, real_tokens, synthetic_tokens;
    std::uint64_t seed = 0;
    std::size_t block = mixture::kDefaultBlock;
};

struct SimArgs {
    std::string out, model_spec;
    concept_lab::SimulationConfig config;
};

// ---------------------------------------------------------------------------
// Stage bodies

void run_ingest(const IngestArgs& a, const Global& g) {
    const fs::path input = resolve(a.input, "corpus.jsonl");
    auto in = io::open_in(input);
    const auto records = corpus::read_jsonl_records(in);
    corpus::IngestOptions opt;
    opt.max_tokens = a.max_tokens;
    opt.clean.max_url_length = a.max_url_length;
    opt.threads = g.threads;
    corpus::IngestStats stats;
    const auto c = corpus::ingest(records, opt, &stats);
    const json config{{"input", a.input},
                      {"max_tokens", a.max_tokens},
                      {"max_url_length", a.max_url_length},
                      {"stats", {{"records", stats.records}, {"admitted", stats.admitted}, {"over_length", stats.over_length}}}};
    corpus::write_corpus(a.out, c, config.dump());
    log("ingest", std::to_string(stats.admitted) + " of " + std::to_string(stats.records) + " documents admitted, " +
                      std::to_string(c.total_tokens()) + " tokens");
}

void run_embed(const EmbedArgs& a, const Global&) {
    check_stage(a.corpus, "ingest");
    const auto c = corpus::read_corpus(a.corpus);
    std::vector<DocId> ids;
    std::vector<float> values;
    for (const auto& d : c.documents()) {
        ids.push_back(d.id);
        const auto v = ann::toy_embed(d.tokens, a.dim, a.seed);
        values.insert(values.end(), v.begin(), v.end());
    }
    const ann::EmbeddingSet set(a.dim, ids, std::move(values));
    const fs::path out(a.out);
    ann::write_matrix(out / "embeddings.bin", set);
    ann::write_ids_sidecar(out / "embeddings.bin", ids);
    write_manifest(out, "embed-toy", {{"corpus", a.corpus}, {"dim", a.dim}, {"seed", a.seed}},
                   {{"vectors", set.size()}});
    log("embed-toy", std::to_string(set.size()) + " vectors of dimension " + std::to_string(a.dim));
}

void run_index_build(const IndexBuildArgs& a, const Global& g) {
    check_stage(a.embeddings, "embed-toy");
    const auto set = ann::read_embeddings(resolve(a.embeddings, "embeddings.bin"));
    ann::ShardingOptions opt;
    opt.value_shards = a.value_shards;
    opt.key_shards = a.key_shards;
    opt.salts = a.salts;
    opt.partition.leaves = a.leaves;
    opt.partition.seed = a.seed;
    opt.partition.max_iterations = a.max_iterations;
    opt.partition.threads = g.threads;
    const auto index = ann::ShardedSearcher::build(set, opt);
    ann::save_index(a.out, index, opt);
    // Record the invocation alongside the index layout.
    const fs::path manifest_path = fs::path(a.out) / "manifest.json";
    json manifest = json::parse(io::open_in(manifest_path));
    manifest["config"] = {{"embeddings", a.embeddings}};
    io::open_out(manifest_path) << manifest.dump(2) << '\n';
    log("index-build", std::to_string(set.size()) + " vectors in " + std::to_string(a.value_shards) + " shard(s)");
}

void run_index_search(const IndexSearchArgs& a, const Global& g) {
    check_stage(a.index, "index-build");
    const auto [index, sharding] = ann::load_index(a.index);
    std::vector<DocId> ids;
    std::vector<float> values;
    std::size_t dim = 0;
    for (const auto& shard : index.shards()) {
        const auto& v = shard->values();
        dim = v.dim();
        ids.insert(ids.end(), v.ids().begin(), v.ids().end());
        values.insert(values.end(), v.values().begin(), v.values().end());
    }
    const auto queries = ann::EmbeddingSet::from_normalized(dim == 0 ? 1 : dim, ids, std::move(values));
    ann::SearchOptions opt;
    opt.k = a.k;
    opt.probe_leaves = a.exhaustive ? std::numeric_limits<std::size_t>::max() : a.probe;
    opt.rescore = !a.no_rescore;
    const auto results = index.search_batch(queries, opt, true, g.threads);
    std::vector<ann::QueryNeighbors> lists;
    for (std::size_t i = 0; i < results.size(); ++i) lists.push_back({ids[i], results[i]});
    const fs::path out(a.out);
    ann::write_neighbors_jsonl(out / "neighbors.jsonl", lists);
    write_manifest(out, "index-search",
                   {{"index", a.index}, {"k", a.k}, {"probe", a.probe}, {"exhaustive", a.exhaustive}, {"rescore", !a.no_rescore}},
                   {{"queries", lists.size()}});
    log("index-search", std::to_string(lists.size()) + " queries searched");
}

void run_pair(const PairArgs& a, const Global&) {
    check_stage(a.neighbors, "index-search");
    const auto lists = ann::read_neighbors_jsonl(resolve(a.neighbors, "neighbors.jsonl"));
    const auto pairs = pairing::pair_by_threshold(lists, {a.alpha, !a.one_ordering});
    const fs::path out(a.out);
    pairing::write_pairs_jsonl(out / "pairs.jsonl", pairs);
    write_manifest(out, "pair", {{"neighbors", a.neighbors}, {"alpha", a.alpha}, {"both_orderings", !a.one_ordering}},
                   {{"pairs", pairs.size()}});
    log("pair", std::to_string(pairs.size()) + " pairs above alpha");
}

void run_dedup(const DedupArgs& a, const Global& g) {
    check_stage(a.pairs, "pair");
    check_stage(a.corpus, "ingest");
    const auto candidates = pairing::read_pairs_jsonl(resolve(a.pairs, "pairs.jsonl"));
    const auto c = corpus::read_corpus(a.corpus);
    auto kept = pairing::dedup_pairs(candidates, c, a.width, g.threads);
    const std::size_t after_dedup = kept.size();
    // Pairs carry their similarities; alpha is echoed from the pair stage when available.
    double alpha = pairing::kDefaultAlpha;
    if (fs::is_directory(a.pairs)) {
        alpha = json::parse(io::open_in(fs::path(a.pairs) / "manifest.json"))["config"].value("alpha", alpha);
    }
    const auto ds = pairing::emit_pair_dataset(std::move(kept), c, {alpha, a.width, a.context_cap, a.seed});
    const fs::path out(a.out);
    pairing::write_pairs_jsonl(out / "pairs.jsonl", ds.pairs);
    io::open_out(out / "similarity_histogram.csv") << pairing::similarity_histogram_csv(ds.pairs, alpha);
    write_manifest(out, "dedup",
                   {{"pairs", a.pairs}, {"corpus", a.corpus}, {"alpha", alpha}, {"width", a.width},
                    {"context_cap", a.context_cap}, {"seed", a.seed}},
                   {{"candidates", candidates.size()},
                    {"dropped_overlap", candidates.size() - after_dedup},
                    {"dropped_over_cap", ds.dropped_over_cap},
                    {"pairs", ds.pairs.size()}});
    log("dedup", std::to_string(ds.pairs.size()) + " of " + std::to_string(candidates.size()) + " pairs kept");
}

void run_fit(const FitArgs& a, const Global&) {
    check_stage(a.pairs, "dedup");
    check_stage(a.corpus, "ingest");
    pairing::PairDataset ds;
    ds.pairs = pairing::read_pairs_jsonl(resolve(a.pairs, "pairs.jsonl"));
    const auto c = corpus::read_corpus(a.corpus);
    const auto training = synthesis::training_pairs(ds, c);
    const auto model = synthesis::ReferenceSynthesizer::fit(training, a.fit);
    const fs::path out(a.out);
    model.save(out / "model.bin");
    write_manifest(out, "synth-fit",
                   {{"pairs", a.pairs}, {"corpus", a.corpus}, {"order", a.fit.order}, {"smoothing", a.fit.smoothing},
                    {"feature_buckets", a.fit.feature_buckets}, {"use_seed", a.fit.use_seed}},
                   {{"training_pairs", training.size()}, {"vocabulary", model.vocab_size()},
                    {"contexts", model.context_count()}});
    log("synth-fit", std::to_string(training.size()) + " pairs, vocabulary " + std::to_string(model.vocab_size()));
}

void run_synth(const RunArgs& a, const Global& g) {
    check_stage(a.corpus, "ingest");
    const auto c = corpus::read_corpus(a.corpus);
    std::unique_ptr<synthesis::DocumentSynthesizer> synthesizer;
    if (!a.external.empty()) {
        synthesizer = std::make_unique<synthesis::ExternalSynthesizer>(split_command(a.external));
    } else {
        check_stage(a.model, "synth-fit");
        auto model = std::make_shared<const synthesis::ReferenceSynthesizer>(
            synthesis::ReferenceSynthesizer::load(resolve(a.model, "model.bin")));
        synthesizer = std::make_unique<synthesis::ReferenceDocumentSynthesizer>(model);
    }
    const std::int64_t n = a.n_docs < 0 ? static_cast<std::int64_t>(c.size()) : a.n_docs;
    const auto records = synthesis::hierarchical_sample(c, *synthesizer, n, {a.sampling, a.seed, a.width, g.threads});
    std::size_t kept = 0;
    for (const auto& r : records) kept += r.status == synthesis::FilterStatus::Kept;
    const fs::path out(a.out);
    synthesis::write_synthetic_jsonl(out / "synthetic.jsonl", records);
    write_manifest(out, "synth-run",
                   {{"model", a.model}, {"external", a.external}, {"corpus", a.corpus}, {"n_docs", n},
                    {"temperature", a.sampling.temperature}, {"top_p", a.sampling.top_p},
                    {"max_tokens", a.sampling.max_tokens}, {"greedy", a.sampling.greedy}, {"seed", a.seed},
                    {"width", a.width}},
                   {{"generated", records.size()}, {"kept", kept}, {"dropped_repetition", records.size() - kept}});
    log("synth-run", std::to_string(kept) + " of " + std::to_string(records.size()) + " records kept");
}

void run_eval(const EvalArgs& a, const Global& g) {
    check_stage(a.corpus, "ingest");
    const auto real = corpus::read_corpus(a.corpus);
    quality::ReportConfig cfg;
    if (a.duplicate_mode == "exact") {
        cfg.duplicate.mode = quality::DuplicateMode::Exact;
    } else if (a.duplicate_mode == "minhash") {
        cfg.duplicate.mode = quality::DuplicateMode::MinHash;
    } else {
        throw ConfigError("duplicate_mode", "expected exact or minhash");
    }
    cfg.duplicate_sample = a.duplicate_sample;
    cfg.judge_sample = a.judge_sample;
    cfg.factuality_sample = a.factuality_sample;
    cfg.seed = a.seed;
    cfg.threads = g.threads;
    std::string endpoint = a.judge_endpoint;
    if (endpoint.empty()) {
        if (const char* env = std::getenv("SBP_JUDGE_ENDPOINT")) endpoint = env;
    }
    if (!endpoint.empty()) {
        quality::JudgeConfig judge;
        judge.endpoint = endpoint;
        judge.concurrency = a.judge_concurrency;
        judge.attempts = a.judge_attempts;
        cfg.judge = judge;
    }

    const fs::path out(a.out);
    json results;
    std::vector<pairing::PairRecord> real_pairs;
    if (!a.pairs.empty()) {
        check_stage(a.pairs, "dedup");
        real_pairs = pairing::read_pairs_jsonl(resolve(a.pairs, "pairs.jsonl"));
    }
    cfg.corpus_id = "real";
    const auto real_report = quality::quality_report(real, real_pairs, real, cfg);
    io::open_out(out / "real" / "quality.csv") << quality::report_csv(real_report);
    io::open_out(out / "real" / "summary.txt") << quality::report_summary(real_report);
    results["real"] = report_json(real_report);
    std::cout << quality::report_summary(real_report);

    if (!a.synthetic.empty()) {
        check_stage(a.synthetic, "synth-run");
        const corpus::CorpusHandle synthetic(corpus::read_synthetic_jsonl(resolve(a.synthetic, "synthetic.jsonl")));
        std::vector<pairing::PairRecord> provenance;
        for (const auto& d : synthetic.documents()) provenance.push_back({d.provenance.seed_id, d.id, 0.0});
        cfg.corpus_id = "synthetic";
        const auto syn_report = quality::quality_report(synthetic, provenance, real, cfg);
        io::open_out(out / "synthetic" / "quality.csv") << quality::report_csv(syn_report);
        io::open_out(out / "synthetic" / "summary.txt") << quality::report_summary(syn_report);
        results["synthetic"] = report_json(syn_report);
        std::cout << quality::report_summary(syn_report);
    }
    write_manifest(out, "eval",
                   {{"corpus", a.corpus}, {"synthetic", a.synthetic}, {"pairs", a.pairs},
                    {"duplicate_mode", a.duplicate_mode}, {"duplicate_sample", a.duplicate_sample},
                    {"judge_sample", a.judge_sample}, {"factuality_sample", a.factuality_sample},
                    {"judge_endpoint", endpoint}, {"seed", a.seed}},
                   results);
}

void run_plan(const PlanArgs& a, const Global&) {
    const auto plan = mixture::plan_mixture(parse_tokens("budget", a.budget), parse_tokens("real", a.real),
                                            parse_tokens("synthetic", a.synthetic));
    std::cout << "budget_tokens " << plan.budget_tokens << '\n'
              << "real_tokens " << plan.real_tokens << '\n'
              << "synthetic_tokens " << plan.synthetic_tokens << '\n'
              << "real_epochs " << mixture::format_decimal(plan.real_epochs) << '\n'
              << "real_epochs_exact " << mixture::format_fraction(plan.real_epochs) << '\n'
              << "synthetic_fraction " << mixture::format_decimal(plan.synthetic_fraction * mixture::Rational(100))
              << "%\n"
              << "synthetic_fraction_exact " << mixture::format_fraction(plan.synthetic_fraction) << '\n';
    if (!a.out.empty()) {
        write_manifest(a.out, "mixture-plan", {{"budget", a.budget}, {"real", a.real}, {"synthetic", a.synthetic}},
                       {{"real_epochs", mixture::format_fraction(plan.real_epochs)},
                        {"synthetic_fraction", mixture::format_fraction(plan.synthetic_fraction)}});
    }
}

void run_emit(const EmitArgs& a, const Global&) {
    check_stage(a.corpus, "ingest");
    const auto real = corpus::read_corpus(a.corpus);
    corpus::CorpusHandle synthetic;
    if (!a.synthetic.empty()) {
        check_stage(a.synthetic, "synth-run");
        synthetic = corpus::CorpusHandle(corpus::read_synthetic_jsonl(resolve(a.synthetic, "synthetic.jsonl")));
    }
    const std::uint64_t real_tokens = a.real_tokens.empty() ? real.total_tokens() : parse_tokens("real_tokens", a.real_tokens);
    const std::uint64_t syn_tokens =
        a.synthetic_tokens.empty() ? synthetic.total_tokens() : parse_tokens("synthetic_tokens", a.synthetic_tokens);
    const std::uint64_t budget = a.budget.empty() ? 0 : parse_tokens("budget", a.budget);
    const auto plan = mixture::plan_mixture(budget, real_tokens, syn_tokens);
    const auto schedule = mixture::emit_schedule(plan, real, synthetic, {a.seed, a.block});
    std::uint64_t scheduled_tokens = 0;
    std::size_t syn_entries = 0;
    for (const auto& e : schedule) {
        scheduled_tokens += (e.synthetic ? synthetic.at(e.id) : real.at(e.id)).token_count();
        syn_entries += e.synthetic;
    }
    const fs::path out(a.out);
    mixture::write_schedule(out / "schedule.tsv", schedule);
    write_manifest(out, "mixture-emit",
                   {{"corpus", a.corpus}, {"synthetic", a.synthetic}, {"budget", budget}, {"real_tokens", real_tokens},
                    {"synthetic_tokens", syn_tokens}, {"seed", a.seed}, {"block", a.block}},
                   {{"real_epochs", mixture::format_fraction(plan.real_epochs)},
                    {"synthetic_fraction", mixture::format_fraction(plan.synthetic_fraction)},
                    {"entries", schedule.size()},
                    {"synthetic_entries", syn_entries},
                    {"scheduled_tokens", scheduled_tokens}});
    log("mixture-emit", std::to_string(schedule.size()) + " entries, " + std::to_string(scheduled_tokens) + " tokens");
}

void run_sim(SimArgs a, const Global&) {
    if (!a.model_spec.empty()) a.config.model = concept_lab::read_model_spec(a.model_spec);
    const auto report = concept_lab::run_sbp_simulation(a.config);
    const fs::path out(a.out);
    io::open_out(out / "report.csv") << concept_lab::report_csv(report);
    const std::string summary = concept_lab::report_summary(report);
    io::open_out(out / "summary.txt") << summary << '\n';
    const auto& c = a.config;
    write_manifest(out, "concept-sim",
                   {{"model_spec", a.model_spec}, {"concepts", c.concepts}, {"vocab", c.vocab}, {"length", c.length},
                    {"concentration", c.concentration}, {"model_seed", c.model_seed}, {"real_docs", c.real_docs},
                    {"budget_docs", c.budget_docs}, {"synthetic_docs", c.synthetic_docs},
                    {"checkpoint_every", c.checkpoint_every}, {"learner_smoothing", c.learner_smoothing},
                    {"heldout_docs", c.heldout_docs}, {"pair_neighbors", c.pair_neighbors}, {"pair_alpha", c.pair_alpha},
                    {"order", c.synthesizer.order}, {"smoothing", c.synthesizer.smoothing},
                    {"feature_buckets", c.synthesizer.feature_buckets}, {"top_p", c.sampling.top_p},
                    {"temperature", c.sampling.temperature},
                    {"data_seed", c.data_seed}, {"synthesis_seed", c.synthesis_seed},
                    {"schedule_seed", c.schedule_seed}, {"oracle_seed", c.oracle_seed},
                    {"heldout_seed", c.heldout_seed}},
                   {{"baseline", report.final_loss("baseline")}, {"sbp", report.final_loss("sbp")},
                    {"oracle", report.final_loss("oracle")}, {"entropy", report.model_entropy},
                    {"pairs", report.pairs}, {"synthetic_used", report.synthetic_used}});
    std::cout << summary << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic bootstrapped pretraining pipeline"};
    app.fallthrough();
    app.set_config("--config", "", "Configuration file (TOML or INI); command-line flags take precedence");
    app.require_subcommand(1);
    Global g;
    app.add_option("--threads", g.threads, "Worker threads (0 = hardware concurrency)");

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Clean, tokenize and length-filter a JSON-lines corpus");
    c_ingest->add_option("--input", ingest.input, "JSON lines of {id, text}")->required();
    c_ingest->add_option("--out", ingest.out, "Output corpus directory")->required();
    c_ingest->add_option("--max-tokens", ingest.max_tokens, "Drop documents longer than this");
    c_ingest->add_option("--max-url-length", ingest.max_url_length, "Remove URLs longer than this");

    EmbedArgs embed;
    auto* c_embed = app.add_subcommand("embed-toy", "Hashed bag-of-tokens embeddings (tests and fixtures)");
    c_embed->add_option("--corpus", embed.corpus)->required();
    c_embed->add_option("--out", embed.out)->required();
    c_embed->add_option("--dim", embed.dim);
    c_embed->add_option("--seed", embed.seed);

    IndexBuildArgs ib;
    auto* c_ib = app.add_subcommand("index-build", "Build the sharded partition-tree index");
    c_ib->add_option("--embeddings", ib.embeddings, "embed-toy directory, .bin matrix or .jsonl file")->required();
    c_ib->add_option("--out", ib.out)->required();
    c_ib->add_option("--value-shards", ib.value_shards);
    c_ib->add_option("--key-shards", ib.key_shards);
    c_ib->add_option("--salts", ib.salts);
    c_ib->add_option("--leaves", ib.leaves, "Leaves per shard (0 = ceil(sqrt(shard size)))");
    c_ib->add_option("--max-iterations", ib.max_iterations);
    c_ib->add_option("--seed", ib.seed);

    IndexSearchArgs is;
    auto* c_is = app.add_subcommand("index-search", "Top-k neighbors of every indexed document");
    c_is->add_option("--index", is.index)->required();
    c_is->add_option("--out", is.out)->required();
    c_is->add_option("--k", is.k);
    c_is->add_option("--probe", is.probe, "Leaves probed per shard (0 = ceil(sqrt(leaves)))");
    c_is->add_flag("--exhaustive", is.exhaustive, "Probe every leaf");
    c_is->add_flag("--no-rescore", is.no_rescore, "Rank by quantized scores only");

    PairArgs pa;
    auto* c_pair = app.add_subcommand("pair", "Threshold neighbor lists into candidate pairs");
    c_pair->add_option("--neighbors", pa.neighbors)->required();
    c_pair->add_option("--out", pa.out)->required();
    c_pair->add_option("--alpha", pa.alpha);
    c_pair->add_flag("--one-ordering", pa.one_ordering, "Keep one record per unordered pair");

    DedupArgs dd;
    auto* c_dedup = app.add_subcommand("dedup", "Drop overlapping pairs and emit the pair dataset");
    c_dedup->add_option("--pairs", dd.pairs)->required();
    c_dedup->add_option("--corpus", dd.corpus)->required();
    c_dedup->add_option("--out", dd.out)->required();
    c_dedup->add_option("--width", dd.width);
    c_dedup->add_option("--context-cap", dd.context_cap);
    c_dedup->add_option("--seed", dd.seed);

    FitArgs fit;
    auto* c_fit = app.add_subcommand("synth-fit", "Fit the reference conditional synthesizer");
    c_fit->add_option("--pairs", fit.pairs)->required();
    c_fit->add_option("--corpus", fit.corpus)->required();
    c_fit->add_option("--out", fit.out)->required();
    c_fit->add_option("--order", fit.fit.order);
    c_fit->add_option("--smoothing", fit.fit.smoothing);
    c_fit->add_option("--feature-buckets", fit.fit.feature_buckets, "0 keeps seed multisets exact");

    RunArgs run;
    auto* c_run = app.add_subcommand("synth-run", "Hierarchical sampling of a synthetic corpus");
    c_run->add_option("--model", run.model);
    c_run->add_option("--external", run.external, "Command of an external synthesizer process");
    c_run->add_option("--corpus", run.corpus)->required();
    c_run->add_option("--out", run.out)->required();
    c_run->add_option("--n-docs", run.n_docs, "Records to generate (default: corpus size)");
    c_run->add_option("--temperature", run.sampling.temperature);
    c_run->add_option("--top-p", run.sampling.top_p);
    c_run->add_option("--max-tokens", run.sampling.max_tokens);
    c_run->add_flag("--greedy", run.sampling.greedy);
    c_run->add_option("--seed", run.seed);
    c_run->add_option("--width", run.width);

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Quality report for the real and synthetic corpora");
    c_eval->add_option("--corpus", ev.corpus)->required();
    c_eval->add_option("--synthetic", ev.synthetic);
    c_eval->add_option("--pairs", ev.pairs);
    c_eval->add_option("--out", ev.out)->required();
    c_eval->add_option("--duplicate-mode", ev.duplicate_mode);
    c_eval->add_option("--duplicate-sample", ev.duplicate_sample);
    c_eval->add_option("--judge-sample", ev.judge_sample);
    c_eval->add_option("--factuality-sample", ev.factuality_sample);
    c_eval->add_option("--judge-endpoint", ev.judge_endpoint, "HTTP judge endpoint (or SBP_JUDGE_ENDPOINT)");
    c_eval->add_option("--judge-concurrency", ev.judge_concurrency);
    c_eval->add_option("--judge-attempts", ev.judge_attempts);
    c_eval->add_option("--seed", ev.seed);

    PlanArgs pl;
    auto* c_plan = app.add_subcommand("mixture-plan", "Compute-matched mixture arithmetic");
    c_plan->add_option("--budget", pl.budget)->required();
    c_plan->add_option("--real", pl.real)->required();
    c_plan->add_option("--synthetic", pl.synthetic)->required();
    c_plan->add_option("--out", pl.out);

    EmitArgs em;
    auto* c_emit = app.add_subcommand("mixture-emit", "Emit the training schedule");
    c_emit->add_option("--corpus", em.corpus)->required();
    c_emit->add_option("--synthetic", em.synthetic);
    c_emit->add_option("--out", em.out)->required();
    c_emit->add_option("--budget", em.budget)->required();
    c_emit->add_option("--real-tokens", em.real_tokens, "Planned real tokens (default: corpus total)");
    c_emit->add_option("--synthetic-tokens", em.synthetic_tokens, "Planned synthetic tokens (default: corpus total)");
    c_emit->add_option("--seed", em.seed);
    c_emit->add_option("--block", em.block);

    SimArgs sim;
    auto& sc = sim.config;
    auto* c_sim = app.add_subcommand("concept-sim", "Desk-scale baseline / SBP / oracle simulation");
    c_sim->add_option("--out", sim.out)->required();
    c_sim->add_option("--model-spec", sim.model_spec, "Key/value model file (overrides the random model)");
    c_sim->add_option("--concepts", sc.concepts);
    c_sim->add_option("--vocab", sc.vocab);
    c_sim->add_option("--length", sc.length);
    c_sim->add_option("--concentration", sc.concentration);
    c_sim->add_option("--model-seed", sc.model_seed);
    c_sim->add_option("--real-docs", sc.real_docs);
    c_sim->add_option("--budget-docs", sc.budget_docs);
    c_sim->add_option("--synthetic-docs", sc.synthetic_docs);
    c_sim->add_option("--checkpoint-every", sc.checkpoint_every);
    c_sim->add_option("--learner-smoothing", sc.learner_smoothing);
    c_sim->add_option("--heldout-docs", sc.heldout_docs);
    c_sim->add_option("--pair-neighbors", sc.pair_neighbors);
    c_sim->add_option("--pair-alpha", sc.pair_alpha);
    c_sim->add_option("--order", sc.synthesizer.order);
    c_sim->add_option("--synth-smoothing", sc.synthesizer.smoothing);
    c_sim->add_option("--feature-buckets", sc.synthesizer.feature_buckets, "0 keeps seed multisets exact");
    c_sim->add_option("--top-p", sc.sampling.top_p);
    c_sim->add_option("--temperature", sc.sampling.temperature);
    c_sim->add_option("--data-seed", sc.data_seed);
    c_sim->add_option("--synthesis-seed", sc.synthesis_seed);
    c_sim->add_option("--schedule-seed", sc.schedule_seed);
    c_sim->add_option("--oracle-seed", sc.oracle_seed);
    c_sim->add_option("--heldout-seed", sc.heldout_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 3;
    }

    try {
        if (c_ingest->parsed()) run_ingest(ingest, g);
        else if (c_embed->parsed()) run_embed(embed, g);
        else if (c_ib->parsed()) run_index_build(ib, g);
        else if (c_is->parsed()) run_index_search(is, g);
        else if (c_pair->parsed()) run_pair(pa, g);
        else if (c_dedup->parsed()) run_dedup(dd, g);
        else if (c_fit->parsed()) run_fit(fit, g);
        else if (c_run->parsed()) {
            if (run.model.empty() && run.external.empty()) throw ConfigError("model", "--model or --external is required");
            run_synth(run, g);
        }
        else if (c_eval->parsed()) run_eval(ev, g);
        else if (c_plan->parsed()) run_plan(pl, g);
        else if (c_emit->parsed()) run_emit(em, g);
        else if (c_sim->parsed()) run_sim(sim, g);
    } catch (const MissingInputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
