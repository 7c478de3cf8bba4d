#include "sbp/mixture.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <sstream>

#include "sbp/binary_io.hpp"
#include "sbp/rng.hpp"

namespace sbp::mixture {

namespace {

constexpr std::uint64_t kSyntheticStream = 0xffffffffULL;

std::int64_t checked(std::uint64_t v, const char* field) {
    if (v > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
        throw ConfigError(field, "token count exceeds the supported range");
    }
    return static_cast<std::int64_t>(v);
}

std::size_t longest_document(const corpus::CorpusHandle& c) {
    std::size_t longest = 0;
    for (const auto& d : c.documents()) longest = std::max(longest, d.token_count());
    return longest;
}

void check_total(const char* what, std::uint64_t planned, const corpus::CorpusHandle& c) {
    const std::uint64_t actual = c.total_tokens();
    const std::uint64_t diff = actual > planned ? actual - planned : planned - actual;
    if (diff > longest_document(c)) {
        throw PlanMismatchError(std::string(what) + " corpus has " + std::to_string(actual) +
                                " tokens but the plan expects " + std::to_string(planned));
    }
}

}  // namespace

MixturePlan plan_mixture(std::uint64_t budget_tokens, std::uint64_t real_tokens, std::uint64_t synthetic_tokens) {
    if (budget_tokens == 0) throw ConfigError("budget", "must be positive");
    if (real_tokens == 0) throw ConfigError("real", "real token count must be positive");
    if (synthetic_tokens > budget_tokens) throw ConfigError("synthetic", "synthetic tokens exceed the budget");
    MixturePlan plan;
    plan.budget_tokens = budget_tokens;
    plan.real_tokens = real_tokens;
    plan.synthetic_tokens = synthetic_tokens;
    const std::int64_t budget = checked(budget_tokens, "budget");
    const std::int64_t real = checked(real_tokens, "real");
    const std::int64_t synthetic = checked(synthetic_tokens, "synthetic");
    plan.real_epochs = Rational(budget - synthetic, real);
    plan.synthetic_fraction = Rational(synthetic, budget);
    return plan;
}

std::string format_fraction(const Rational& r) {
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

std::string format_decimal(const Rational& r, int max_digits) {
    std::int64_t num = r.numerator();
    const std::int64_t den = r.denominator();
    std::string out;
    if (num < 0) {
        out += '-';
        num = -num;
    }
    out += std::to_string(num / den);
    std::int64_t rem = num % den;
    if (rem == 0) return out;
    std::string digits;
    for (int i = 0; i < max_digits && rem != 0; ++i) {
        // rem < den <= 2^63 / 10 for every plan the checked() guard admits in practice.
        rem *= 10;
        digits += static_cast<char>('0' + rem / den);
        rem %= den;
    }
    if (rem == 0) return out + "." + digits;
    std::ostringstream approx;
    approx << std::fixed << std::setprecision(max_digits)
           << static_cast<long double>(r.numerator()) / static_cast<long double>(den);
    return approx.str();
}

std::vector<ScheduleEntry> emit_schedule(const MixturePlan& plan, const corpus::CorpusHandle& real,
                                         const corpus::CorpusHandle& synthetic, const ScheduleOptions& options) {
    if (options.block == 0) throw ConfigError("block", "block size must be positive");
    if (real.empty()) throw ConfigError("real", "real corpus is empty");
    check_total("real", plan.real_tokens, real);
    check_total("synthetic", plan.synthetic_tokens, synthetic);

    // Real stream: seeded permutation per pass, truncated by the real token share.
    const std::uint64_t real_target = plan.budget_tokens - plan.synthetic_tokens;
    const auto& epochs = plan.real_epochs;
    const std::uint64_t max_passes =
        static_cast<std::uint64_t>(epochs.numerator() / epochs.denominator() + (epochs.numerator() % epochs.denominator() != 0));
    std::vector<ScheduleEntry> real_stream;
    std::uint64_t real_emitted = 0;
    for (std::uint64_t pass = 0; pass < max_passes && real_emitted < real_target; ++pass) {
        std::vector<std::size_t> order(real.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng(derive_seed(options.seed, pass));
        rng.shuffle(order);
        for (std::size_t i : order) {
            if (real_emitted >= real_target) break;
            const auto& doc = real.documents()[i];
            real_stream.push_back({doc.id, false, static_cast<std::uint32_t>(pass + 1)});
            real_emitted += doc.token_count();
        }
    }

    std::vector<ScheduleEntry> synthetic_stream;
    for (const auto& doc : synthetic.documents()) synthetic_stream.push_back({doc.id, true, 0});
    Rng srng(derive_seed(options.seed, kSyntheticStream));
    srng.shuffle(synthetic_stream);

    // Block interleaving: block b holds floor(end * S / T) - floor(start * S / T)
    // synthetic entries, spread evenly within the block by the same rule.
    const std::uint64_t total = real_stream.size() + synthetic_stream.size();
    const std::uint64_t syn_total = synthetic_stream.size();
    std::vector<ScheduleEntry> schedule;
    schedule.reserve(total);
    std::size_t next_real = 0;
    std::size_t next_syn = 0;
    for (std::uint64_t start = 0; start < total; start += options.block) {
        const std::uint64_t end = std::min<std::uint64_t>(total, start + options.block);
        const std::uint64_t quota = end * syn_total / total - start * syn_total / total;
        const std::uint64_t width = end - start;
        for (std::uint64_t j = 0; j < width; ++j) {
            const bool take_syn = (j + 1) * quota / width > j * quota / width;
            if (take_syn) {
                schedule.push_back(synthetic_stream[next_syn++]);
            } else {
                schedule.push_back(real_stream[next_real++]);
            }
        }
    }
    return schedule;
}

void write_schedule(const std::filesystem::path& path, std::span<const ScheduleEntry> schedule) {
    auto out = io::open_out(path);
    for (const auto& e : schedule) out << e.id << '\t' << (e.synthetic ? "synthetic" : "real") << '\n';
}

std::vector<ScheduleEntry> read_schedule(const std::filesystem::path& path) {
    auto in = io::open_in(path);
    std::vector<ScheduleEntry> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw Error("malformed schedule line: " + line);
        ScheduleEntry e;
        e.id = std::stoull(line.substr(0, tab));
        const std::string tag = line.substr(tab + 1);
        if (tag != "real" && tag != "synthetic") throw Error("unknown provenance tag: " + tag);
        e.synthetic = tag == "synthetic";
        out.push_back(e);
    }
    return out;
}

}  // namespace sbp::mixture
