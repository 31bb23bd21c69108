#pragma once

#include <memory>
#include <string>

namespace forge {

// Abstract completion endpoint used to turn action notes into future
// reasoning text. The pipeline only requires that generate() is callable
// concurrently with independent prompts.
class TextGenClient {
public:
    virtual ~TextGenClient() = default;
    virtual std::string generate(const std::string& prompt) = 0;
    virtual bool deterministic() const = 0;
};

// Offline fallback: reads the action notes back out of the prompt and
// composes a fixed-template future sentence. Identical prompts yield
// identical output, which keeps the whole pipeline reproducible without
// network access.
class TemplateTextGenClient : public TextGenClient {
public:
    std::string generate(const std::string& prompt) override;
    bool deterministic() const override { return true; }
};

// Remote endpoint: POST {"prompt": ...} to <base_url>/generate, reading
// {"completion": ...} back. The bearer token comes from the
// FORGE_TEXTGEN_TOKEN environment variable.
class HttpTextGenClient : public TextGenClient {
public:
    explicit HttpTextGenClient(std::string base_url);
    std::string generate(const std::string& prompt) override;
    bool deterministic() const override { return false; }

private:
    std::string base_url_;
    std::string token_;
};

std::unique_ptr<TextGenClient> make_textgen_client(const std::string& mode,
                                                   const std::string& base_url);

}  // namespace forge
