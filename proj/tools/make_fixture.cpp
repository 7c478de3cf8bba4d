// Writes the synthetic evaluation fixture and its ground-truth sidecar.

#include <iostream>

#include <CLI11.hpp>

#include "fixture.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate a topical fixture corpus with planted repetition and near-duplicates"};
    sbp::fixture::FixtureOptions opt;
    std::string out;
    app.add_option("--out", out, "Output .jsonl path")->required();
    app.add_option("--documents", opt.documents);
    app.add_option("--topics", opt.topics, "0 selects documents / 50");
    app.add_option("--repetition-docs", opt.repetition_docs);
    app.add_option("--near-duplicates", opt.near_duplicates);
    app.add_option("--seed", opt.seed);
    CLI11_PARSE(app, argc, argv);
    try {
        const auto fx = sbp::fixture::make_fixture(opt);
        sbp::fixture::write_fixture(out, fx, opt);
        std::cerr << "wrote " << fx.records.size() << " documents to " << out << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
