#include "forge/textgen.hpp"

#include <cstdlib>
#include <sstream>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "forge/error.hpp"

namespace forge {

namespace {

struct ActionNote {
    long subject = 0;
    std::string action;
};

// The prompt layout is owned by compose_future; the "Actions:" section
// lists one "id: text" line per subject.
std::vector<ActionNote> extract_actions(const std::string& prompt) {
    std::vector<ActionNote> notes;
    const std::size_t section = prompt.find("Actions:\n");
    if (section == std::string::npos) return notes;
    std::istringstream lines(prompt.substr(section + 9));
    std::string line;
    while (std::getline(lines, line)) {
        const std::size_t colon = line.find(": ");
        if (colon == std::string::npos || colon == 0) break;
        char* end = nullptr;
        const long id = std::strtol(line.c_str(), &end, 10);
        if (end != line.c_str() + colon) break;
        notes.push_back({id, line.substr(colon + 2)});
    }
    return notes;
}

}  // namespace

std::string TemplateTextGenClient::generate(const std::string& prompt) {
    const std::vector<ActionNote> notes = extract_actions(prompt);
    if (notes.empty()) return "";
    std::ostringstream os;
    os << "Based on the observed trajectories, ";
    for (std::size_t i = 0; i < notes.size(); ++i) {
        if (i > 0) os << ", while ";
        os << "subject " << notes[i].subject << " is likely to keep "
           << notes[i].action;
    }
    os << '.';
    return os.str();
}

HttpTextGenClient::HttpTextGenClient(std::string base_url)
    : base_url_(std::move(base_url)) {
    if (const char* token = std::getenv("FORGE_TEXTGEN_TOKEN")) token_ = token;
}

std::string HttpTextGenClient::generate(const std::string& prompt) {
    httplib::Client client(base_url_);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);
    httplib::Headers headers;
    if (!token_.empty())
        headers.emplace("Authorization", "Bearer " + token_);
    nlohmann::json body;
    body["prompt"] = prompt;
    const auto response =
        client.Post("/generate", headers, body.dump(), "application/json");
    if (!response || response->status != 200) {
        std::ostringstream os;
        os << "text generation request failed";
        if (response) os << " with status " << response->status;
        throw Error(ErrorKind::External, os.str());
    }
    try {
        const auto parsed = nlohmann::json::parse(response->body);
        return parsed.at("completion").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::External,
                    std::string("bad completion payload: ") + e.what());
    }
}

std::unique_ptr<TextGenClient> make_textgen_client(const std::string& mode,
                                                   const std::string& base_url) {
    if (mode.empty() || mode == "template")
        return std::make_unique<TemplateTextGenClient>();
    if (mode == "http") {
        if (base_url.empty())
            throw Error(ErrorKind::Config,
                        "textgen mode 'http' needs a base_url");
        return std::make_unique<HttpTextGenClient>(base_url);
    }
    throw Error(ErrorKind::Config, "unknown textgen mode: " + mode);
}

}  // namespace forge
