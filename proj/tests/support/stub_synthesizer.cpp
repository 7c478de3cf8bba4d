// External synthesizer stand-in: reads JSON requests line by line and answers
// with a deterministic rewrite of the seed text.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

int main(int argc, char** argv) {
    const std::string mode = argc > 1 ? argv[1] : "reverse";
    std::string line;
    while (std::getline(std::cin, line)) {
        if (mode == "crash") return 1;
        const auto request = nlohmann::json::parse(line);
        std::istringstream words(request.at("seed_text").get<std::string>());
        std::vector<std::string> pieces;
        std::string w;
        while (words >> w) pieces.push_back(w);
        const auto max_tokens = request.at("max_tokens").get<std::size_t>();
        const auto seed = request.at("seed").get<std::uint64_t>();
        std::string text;
        std::size_t emitted = 0;
        if (mode == "repeat") {
            // Twice the same 13-word run, which the repetition filter must drop.
            for (int r = 0; r < 2; ++r) {
                for (int i = 0; i < 13; ++i) text += "w" + std::to_string(i) + " ";
            }
        } else {
            for (std::size_t i = pieces.size(); i-- > 0 && emitted < max_tokens; ++emitted) {
                text += pieces[i] + " ";
            }
            text += "s" + std::to_string(seed % 1000);
        }
        std::cout << nlohmann::json{{"text", text}}.dump() << '\n' << std::flush;
    }
    return 0;
}
