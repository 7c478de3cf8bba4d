#include <cerrno>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "sbp/synthesis.hpp"

namespace sbp::synthesis {

using nlohmann::json;

namespace {

void write_all(int fd, const std::string& data) {
    std::size_t written = 0;
    while (written < data.size()) {
        const ssize_t n = ::write(fd, data.data() + written, data.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(std::string("external synthesizer write failed: ") + std::strerror(errno));
        }
        written += static_cast<std::size_t>(n);
    }
}

}  // namespace

ExternalSynthesizer::ExternalSynthesizer(std::vector<std::string> command) {
    if (command.empty()) throw ConfigError("synthesizer_command", "empty command");
    // A dead child must surface as a write error, not terminate the process.
    std::signal(SIGPIPE, SIG_IGN);

    int in_pipe[2];
    int out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0 || ::pipe2(out_pipe, O_CLOEXEC) != 0) {
        throw Error(std::string("pipe failed: ") + std::strerror(errno));
    }
    std::vector<char*> argv;
    for (auto& arg : command) argv.push_back(arg.data());
    argv.push_back(nullptr);

    pid_ = ::fork();
    if (pid_ < 0) throw Error(std::string("fork failed: ") + std::strerror(errno));
    if (pid_ == 0) {
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::execvp(argv[0], argv.data());
        ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
}

ExternalSynthesizer::~ExternalSynthesizer() {
    if (to_child_ >= 0) ::close(to_child_);
    if (from_child_ >= 0) ::close(from_child_);
    if (pid_ > 0) {
        int status = 0;
        ::waitpid(pid_, &status, 0);
    }
}

Generated ExternalSynthesizer::generate(const corpus::Document& seed_doc, const SamplingOptions& options,
                                        std::uint64_t seed) const {
    const json request{{"seed_text", seed_doc.text},
                       {"temperature", options.temperature},
                       {"top_p", options.top_p},
                       {"max_tokens", options.max_tokens},
                       {"seed", seed}};
    std::lock_guard lock(mutex_);
    write_all(to_child_, request.dump() + "\n");

    std::size_t newline;
    while ((newline = buffer_.find('\n')) == std::string::npos) {
        char chunk[4096];
        const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) throw Error("external synthesizer closed its output");
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
    const std::string line = buffer_.substr(0, newline);
    buffer_.erase(0, newline + 1);

    Generated g;
    try {
        g.text = json::parse(line).at("text").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(std::string("malformed external synthesizer response: ") + e.what());
    }
    g.tokens = corpus::tokenize(g.text);
    return g;
}

}  // namespace sbp::synthesis
