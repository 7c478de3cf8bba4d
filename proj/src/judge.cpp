#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sbp/quality.hpp"

namespace sbp::quality {

namespace prompts {
extern const std::string_view kPairRelevance;
extern const std::string_view kPairNovelty;
extern const std::string_view kNonRepetition;
extern const std::string_view kFactuality;
}  // namespace prompts

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

struct Slot {
    std::size_t pos;
    std::string_view name;
    const std::string* value;
};

}  // namespace

const char* to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::Yes: return "Yes";
        case Verdict::No: return "No";
        case Verdict::WellDefinedTrue: return "WellDefinedTrue";
        case Verdict::WellDefinedFalse: return "WellDefinedFalse";
        case Verdict::NotWellDefined: return "NotWellDefined";
    }
    return "?";
}

std::string_view template_text(Template t) {
    switch (t) {
        case Template::PairRelevance: return prompts::kPairRelevance;
        case Template::PairNovelty: return prompts::kPairNovelty;
        case Template::NonRepetition: return prompts::kNonRepetition;
        case Template::Factuality: return prompts::kFactuality;
    }
    throw Error("unknown template");
}

std::string render_prompt(Template t, const Payload& payload) {
    const std::string_view text = template_text(t);
    std::vector<Slot> slots;
    auto add = [&](std::string_view name, const std::string& value) {
        const auto pos = text.rfind(name);
        if (pos == std::string_view::npos) throw Error("template lacks placeholder " + std::string(name));
        slots.push_back({pos, name, &value});
    };
    if (t == Template::PairRelevance || t == Template::PairNovelty) {
        add("{text1}", payload.text1);
        add("{text2}", payload.text2);
    } else if (t == Template::NonRepetition) {
        add("{text}", payload.text1);
    } else {
        add("{document}", payload.text1);
    }
    std::sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) { return a.pos < b.pos; });
    std::string out;
    std::size_t cursor = 0;
    for (const auto& s : slots) {
        out.append(text.substr(cursor, s.pos - cursor));
        out.append(*s.value);
        cursor = s.pos + s.name.size();
    }
    out.append(text.substr(cursor));
    return out;
}

Verdict parse_verdict(Template t, const std::string& response) {
    std::string_view rest(response);
    std::string_view last;
    while (!rest.empty()) {
        const auto nl = rest.rfind('\n');
        const std::string_view line = trim(nl == std::string_view::npos ? rest : rest.substr(nl + 1));
        if (!line.empty()) {
            last = line;
            break;
        }
        if (nl == std::string_view::npos) break;
        rest = rest.substr(0, nl);
    }
    if (t == Template::Factuality) {
        if (last == "<well defined>True</well defined>") return Verdict::WellDefinedTrue;
        if (last == "<well defined>False</well defined>") return Verdict::WellDefinedFalse;
        if (last == "<not well defined></not well defined>") return Verdict::NotWellDefined;
    } else {
        if (last == "Yes") return Verdict::Yes;
        if (last == "No") return Verdict::No;
    }
    throw ParseError(response);
}

JudgeClient::JudgeClient(JudgeConfig config) : config_(std::move(config)) {
    const std::string& url = config_.endpoint;
    const std::string scheme = "http://";
    if (url.rfind(scheme, 0) != 0) throw ConfigError("judge_endpoint", "only http:// endpoints are supported");
    const auto slash = url.find('/', scheme.size());
    base_ = slash == std::string::npos ? url : url.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : url.substr(slash);
    if (base_.size() == scheme.size()) throw ConfigError("judge_endpoint", "missing host");
    if (config_.attempts < 1) throw ConfigError("judge_attempts", "must be at least 1");
    if (config_.concurrency == 0) throw ConfigError("judge_concurrency", "must be at least 1");
}

std::string JudgeClient::post(const std::string& prompt) const {
    const std::string body = json{{"prompt", prompt}}.dump();
    std::string last_error;
    auto delay = config_.backoff;
    for (int attempt = 0; attempt < config_.attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(delay);
            delay *= 2;
        }
        httplib::Client client(base_);
        client.set_connection_timeout(config_.timeout);
        client.set_read_timeout(config_.timeout);
        const auto res = client.Post(path_, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP status " + std::to_string(res->status);
            continue;
        }
        try {
            return json::parse(res->body).at("text").get<std::string>();
        } catch (const json::exception&) {
            throw ParseError(res->body);
        }
    }
    throw TransportError("judge request failed after " + std::to_string(config_.attempts) +
                         " attempts: " + last_error);
}

JudgeVerdict JudgeClient::evaluate(Template t, const Payload& payload, std::string item) const {
    JudgeVerdict v;
    v.item = std::move(item);
    v.raw = post(render_prompt(t, payload));
    v.verdict = parse_verdict(t, v.raw);
    return v;
}

std::vector<JudgeVerdict> JudgeClient::evaluate_batch(Template t, std::span<const Payload> payloads,
                                                      std::span<const std::string> items) const {
    if (items.size() != payloads.size()) throw Error("judge batch: item and payload counts differ");
    std::vector<JudgeVerdict> out(payloads.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < payloads.size(); i = next++) {
            try {
                out[i] = evaluate(t, payloads[i], items[i]);
            } catch (const ParseError& e) {
                out[i].item = items[i];
                out[i].raw = e.raw();
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = payloads.size();
            }
        }
    };
    const std::size_t workers = std::min<std::size_t>(config_.concurrency, payloads.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

}  // namespace sbp::quality
