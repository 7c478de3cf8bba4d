#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <boost/rational.hpp>

#include "sbp/corpus.hpp"

namespace sbp::mixture {

using Rational = boost::rational<std::int64_t>;

inline constexpr std::size_t kDefaultBlock = 1024;

struct MixturePlan {
    std::uint64_t budget_tokens = 0;
    std::uint64_t real_tokens = 0;
    std::uint64_t synthetic_tokens = 0;
    Rational real_epochs;         // (budget - synthetic) / real
    Rational synthetic_fraction;  // synthetic / budget
};

/// Exact plan arithmetic. Throws ConfigError on a zero budget or real size,
/// or synthetic tokens above the budget.
MixturePlan plan_mixture(std::uint64_t budget_tokens, std::uint64_t real_tokens, std::uint64_t synthetic_tokens);

/// "25/2" style.
std::string format_fraction(const Rational& r);
/// Exact decimal when the expansion terminates within `max_digits`, otherwise rounded.
std::string format_decimal(const Rational& r, int max_digits = 12);

class PlanMismatchError : public Error {
public:
    using Error::Error;
};

struct ScheduleEntry {
    DocId id = 0;
    bool synthetic = false;
    std::uint32_t pass = 0;  // real pass number; 0 for synthetic entries
    bool operator==(const ScheduleEntry&) const = default;
};

struct ScheduleOptions {
    std::uint64_t seed = 0;
    std::size_t block = kDefaultBlock;
};

/// Real documents are emitted in seeded permutations, one per pass, until the
/// real token share (budget - synthetic) is reached or ceil(real_epochs) passes
/// are done; the final pass is truncated by token count. Synthetic documents
/// are emitted once in a seeded order. Each block of `block` entries receives
/// synthetic entries in proportion to the two stream lengths. Throws
/// PlanMismatchError when a corpus token total differs from the plan by more
/// than its longest document.
std::vector<ScheduleEntry> emit_schedule(const MixturePlan& plan, const corpus::CorpusHandle& real,
                                         const corpus::CorpusHandle& synthetic,
                                         const ScheduleOptions& options = {});

/// One line per entry: "<id>\t<real|synthetic>".
void write_schedule(const std::filesystem::path& path, std::span<const ScheduleEntry> schedule);
std::vector<ScheduleEntry> read_schedule(const std::filesystem::path& path);

}  // namespace sbp::mixture
