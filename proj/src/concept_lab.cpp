#include "sbp/concept_lab.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "sbp/binary_io.hpp"
#include "sbp/rng.hpp"

namespace sbp::concept_lab {

namespace {

constexpr double kRowTolerance = 1e-12;

void check_row(const std::vector<double>& row, const std::string& field) {
    if (row.empty()) throw ConfigError(field, "empty distribution");
    double total = 0.0;
    for (double p : row) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError(field, "probabilities must be finite and nonnegative");
        total += p;
    }
    if (std::abs(total - 1.0) > kRowTolerance) throw ConfigError(field, "probabilities do not sum to 1");
}

std::vector<double> dirichlet(Rng& rng, std::size_t n, double concentration) {
    // Gamma(a) via Marsaglia-Tsang, boosted for a < 1.
    auto gamma = [&rng](double a) {
        double boost = 1.0;
        if (a < 1.0) {
            double u = rng.uniform();
            while (u <= 0.0) u = rng.uniform();
            boost = std::pow(u, 1.0 / a);
            a += 1.0;
        }
        const double d = a - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x;
            double v;
            do {
                x = rng.normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = rng.uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * boost;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * boost;
        }
    };
    std::vector<double> w(n);
    double total = 0.0;
    for (auto& x : w) {
        x = gamma(concentration);
        total += x;
    }
    if (!(total > 0.0)) {
        // All draws underflowed; fall back to a point mass on the first entry.
        w.assign(n, 0.0);
        w[0] = 1.0;
        return w;
    }
    for (auto& x : w) x /= total;
    return w;
}

std::vector<double> parse_numbers(const std::string& value, const std::string& field) {
    std::istringstream in(value);
    std::vector<double> out;
    std::string item;
    while (in >> item) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError(field, "not a number: " + item);
        }
    }
    return out;
}

// Rows written with 17 significant digits drift from 1 by a few ulps; rescale
// rows that are within a loose tolerance so the strict check holds.
void renormalize(std::vector<double>& row, const std::string& field) {
    double total = 0.0;
    for (double p : row) total += p;
    if (!(std::abs(total - 1.0) <= 1e-6)) throw ConfigError(field, "probabilities do not sum to 1");
    for (double& p : row) p /= total;
}

}  // namespace

ConceptModel::ConceptModel(std::vector<double> prior, std::vector<std::vector<double>> emissions, std::size_t length)
    : prior_(std::move(prior)), emissions_(std::move(emissions)), length_(length), space_(1) {
    check_row(prior_, "prior");
    if (emissions_.size() != prior_.size()) throw ConfigError("emission", "need one emission row per concept");
    for (std::size_t c = 0; c < emissions_.size(); ++c) {
        check_row(emissions_[c], "emission." + std::to_string(c));
        if (emissions_[c].size() != emissions_[0].size()) {
            throw ConfigError("emission." + std::to_string(c), "rows must share one vocabulary size");
        }
    }
    if (length_ == 0) throw ConfigError("L", "document length must be positive");
    for (std::size_t t = 0; t < length_; ++t) {
        space_ *= emissions_[0].size();
        if (space_ > kMaxDocumentSpace) throw ConfigError("L", "V^L exceeds the enumeration guard of 10^6");
    }
}

void ConceptModel::check_document(std::span<const std::uint32_t> doc) const {
    if (doc.size() != length_) {
        throw Error("document has " + std::to_string(doc.size()) + " symbols, expected " + std::to_string(length_));
    }
    for (auto s : doc) {
        if (s >= vocab()) throw Error("symbol " + std::to_string(s) + " is outside the vocabulary");
    }
}

double ConceptModel::likelihood(std::size_t c, std::span<const std::uint32_t> doc) const {
    check_document(doc);
    const auto& row = emissions_.at(c);
    double p = 1.0;
    for (auto s : doc) p *= row[s];
    return p;
}

ConceptModel random_model(std::size_t concepts, std::size_t vocab, std::size_t length, std::uint64_t seed,
                          double concentration) {
    if (concepts == 0) throw ConfigError("K", "need at least one concept");
    if (vocab == 0) throw ConfigError("V", "need at least one symbol");
    if (!(concentration > 0.0)) throw ConfigError("concentration", "must be positive");
    Rng rng(seed);
    auto prior = dirichlet(rng, concepts, 1.0);
    std::vector<std::vector<double>> rows;
    for (std::size_t c = 0; c < concepts; ++c) rows.push_back(dirichlet(rng, vocab, concentration));
    return ConceptModel(std::move(prior), std::move(rows), length);
}

std::uint64_t encode(std::span<const std::uint32_t> doc, std::size_t vocab) {
    std::uint64_t index = 0;
    for (auto s : doc) {
        if (s >= vocab) throw Error("symbol " + std::to_string(s) + " is outside the vocabulary");
        index = index * vocab + s;
    }
    return index;
}

Symbols decode(std::uint64_t index, std::size_t vocab, std::size_t length) {
    Symbols doc(length);
    for (std::size_t t = length; t-- > 0;) {
        doc[t] = static_cast<std::uint32_t>(index % vocab);
        index /= vocab;
    }
    return doc;
}

double marginal(const ConceptModel& model, std::span<const std::uint32_t> doc) {
    double total = 0.0;
    for (std::size_t c = 0; c < model.concepts(); ++c) total += model.prior()[c] * model.likelihood(c, doc);
    return total;
}

std::vector<double> posterior(const ConceptModel& model, std::span<const std::uint32_t> doc) {
    std::vector<double> joint(model.concepts());
    double total = 0.0;
    for (std::size_t c = 0; c < joint.size(); ++c) {
        joint[c] = model.prior()[c] * model.likelihood(c, doc);
        total += joint[c];
    }
    if (!(total > 0.0)) throw Error("document has zero probability under the model");
    for (auto& p : joint) p /= total;
    return joint;
}

double exact_conditional(const ConceptModel& model, std::span<const std::uint32_t> d1,
                         std::span<const std::uint32_t> d2) {
    const auto post = posterior(model, d1);
    double p = 0.0;
    for (std::size_t c = 0; c < post.size(); ++c) p += model.likelihood(c, d2) * post[c];
    return p;
}

namespace {

/// P(d | c) for every document in index order, built one position at a time.
std::vector<double> likelihood_table(const ConceptModel& model, std::size_t c) {
    const auto& e = model.emission(c);
    std::vector<double> table{1.0};
    for (std::size_t t = 0; t < model.length(); ++t) {
        std::vector<double> next(table.size() * e.size());
        for (std::size_t i = 0; i < table.size(); ++i) {
            for (std::size_t v = 0; v < e.size(); ++v) next[i * e.size() + v] = table[i] * e[v];
        }
        table = std::move(next);
    }
    return table;
}

/// sum_c weights[c] * P(d | c) for every document.
std::vector<double> mix_tables(const ConceptModel& model, const std::vector<double>& weights) {
    std::vector<double> out(model.document_space(), 0.0);
    for (std::size_t c = 0; c < model.concepts(); ++c) {
        if (weights[c] == 0.0) continue;
        const auto table = likelihood_table(model, c);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += table[i] * weights[c];
    }
    return out;
}

}  // namespace

std::vector<double> exact_conditional_row(const ConceptModel& model, std::span<const std::uint32_t> d1) {
    return mix_tables(model, posterior(model, d1));
}

std::vector<double> marginal_table(const ConceptModel& model) { return mix_tables(model, model.prior()); }

namespace {

Symbols draw_from_concept(const ConceptModel& model, std::size_t c, Rng& rng) {
    Symbols doc(model.length());
    for (auto& s : doc) s = static_cast<std::uint32_t>(rng.categorical(model.emission(c)));
    return doc;
}

}  // namespace

Symbols sample_document(const ConceptModel& model, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t c = rng.categorical(model.prior());
    return draw_from_concept(model, c, rng);
}

corpus::CorpusHandle sample_corpus(const ConceptModel& model, std::size_t n_docs, std::uint64_t seed) {
    std::vector<corpus::Document> docs;
    docs.reserve(n_docs);
    for (std::size_t i = 0; i < n_docs; ++i) {
        corpus::Document d;
        d.id = i;
        const auto symbols = sample_document(model, derive_seed(seed, i));
        d.tokens.assign(symbols.begin(), symbols.end());
        for (auto s : symbols) {
            if (!d.text.empty()) d.text += ' ';
            d.text += std::to_string(s);
        }
        docs.push_back(std::move(d));
    }
    return corpus::CorpusHandle(std::move(docs));
}

std::vector<synthesis::TrainingPair> sample_pairs(const ConceptModel& model, std::size_t n_pairs, std::uint64_t seed) {
    std::vector<synthesis::TrainingPair> pairs;
    pairs.reserve(n_pairs);
    for (std::size_t i = 0; i < n_pairs; ++i) {
        Rng rng(derive_seed(seed, i));
        const std::size_t c = rng.categorical(model.prior());
        const auto d1 = draw_from_concept(model, c, rng);
        const auto d2 = draw_from_concept(model, c, rng);
        pairs.push_back({{d1.begin(), d1.end()}, {d2.begin(), d2.end()}, {}});
    }
    return pairs;
}

void ExactSynthesizer::next_distribution(std::span<const TokenId> seed, std::span<const std::uint32_t> prefix,
                                         std::vector<double>& out) const {
    const std::size_t v = model_.vocab();
    out.assign(v + 1, 0.0);
    if (prefix.size() >= model_.length()) {
        out[v] = 1.0;
        return;
    }
    const Symbols d1(seed.begin(), seed.end());
    auto weight = posterior(model_, d1);
    double total = 0.0;
    for (std::size_t c = 0; c < weight.size(); ++c) {
        for (auto s : prefix) weight[c] *= model_.emission(c).at(s);
        total += weight[c];
    }
    if (!(total > 0.0)) throw Error("prefix has zero probability given the seed document");
    for (std::size_t c = 0; c < weight.size(); ++c) {
        const double w = weight[c] / total;
        for (std::size_t s = 0; s < v; ++s) out[s] += w * model_.emission(c)[s];
    }
}

double sequence_probability(const synthesis::ConditionalModel& model, std::span<const TokenId> seed,
                            std::span<const std::uint32_t> doc) {
    std::vector<double> dist;
    double p = 1.0;
    for (std::size_t t = 0; t <= doc.size(); ++t) {
        model.next_distribution(seed, doc.first(t), dist);
        p *= t < doc.size() ? dist.at(doc[t]) : dist.at(model.end_index());
    }
    return p;
}

ConceptModel parse_model_spec(const std::string& text) {
    std::map<std::string, std::string> values;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos) throw ConfigError(line, "expected key = value");
            continue;
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    auto integer = [&](const std::string& key) -> std::size_t {
        const auto it = values.find(key);
        if (it == values.end()) throw ConfigError(key, "missing");
        try {
            return std::stoull(it->second);
        } catch (const std::exception&) {
            throw ConfigError(key, "not an integer: " + it->second);
        }
    };
    const std::size_t k = integer("K");
    const std::size_t v = integer("V");
    const std::size_t l = integer("L");
    if (!values.count("prior")) throw ConfigError("prior", "missing");
    auto prior = parse_numbers(values["prior"], "prior");
    if (prior.size() != k) throw ConfigError("prior", "expected K entries");
    renormalize(prior, "prior");
    std::vector<std::vector<double>> rows;
    for (std::size_t c = 0; c < k; ++c) {
        const std::string key = "emission." + std::to_string(c);
        if (!values.count(key)) throw ConfigError(key, "missing");
        auto row = parse_numbers(values[key], key);
        if (row.size() != v) throw ConfigError(key, "expected V entries");
        renormalize(row, key);
        rows.push_back(std::move(row));
    }
    return ConceptModel(std::move(prior), std::move(rows), l);
}

ConceptModel read_model_spec(const std::filesystem::path& path) {
    auto in = io::open_in(path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_model_spec(text.str());
}

std::string format_model_spec(const ConceptModel& model) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "K = " << model.concepts() << "\nV = " << model.vocab() << "\nL = " << model.length() << "\nprior =";
    for (double p : model.prior()) out << ' ' << p;
    out << '\n';
    for (std::size_t c = 0; c < model.concepts(); ++c) {
        out << "emission." << c << " =";
        for (double p : model.emission(c)) out << ' ' << p;
        out << '\n';
    }
    return out.str();
}

}  // namespace sbp::concept_lab
