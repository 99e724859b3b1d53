#pragma once

#include "sep/errors.hpp"
#include "sep/llmio.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <semaphore>
#include <string>
#include <vector>

// OpenAI-compatible chat-completions backend (POST /v1/chat/completions).
// Kept out of llmio.hpp so only transports pay the httplib/json compile cost.

namespace sep {

class HttpBackend final : public Backend {
  public:
    struct Options {
        std::string base_url = "https://api.openai.com";
        std::string api_key;                     // empty = no Authorization header
        std::string model = "gpt-3.5-turbo-16k";
        int max_in_flight = 4;
        int timeout_seconds = 120;
    };

    // SEP_API_BASE, SEP_API_KEY, SEP_MODEL; unset variables keep defaults.
    static Options from_env() {
        Options opts;
        if (const char* base = std::getenv("SEP_API_BASE"); base && *base) opts.base_url = base;
        if (const char* key = std::getenv("SEP_API_KEY"); key && *key) opts.api_key = key;
        if (const char* model = std::getenv("SEP_MODEL"); model && *model) opts.model = model;
        return opts;
    }

    explicit HttpBackend(Options opts)
        : opts_(std::move(opts)), slots_(opts_.max_in_flight) {
        if (opts_.base_url.empty()) throw ConfigError("backend base URL must be non-empty");
        if (opts_.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
        while (opts_.base_url.back() == '/') opts_.base_url.pop_back();
    }

    std::string id() const override { return "http:" + opts_.model; }

    std::vector<std::string> generate(const CompletionRequest& request) override {
        slots_.acquire();
        struct Release {
            std::counting_semaphore<>& s;
            ~Release() { s.release(); }
        } release{slots_};

        nlohmann::json body = {
            {"model", opts_.model},
            {"temperature", request.temperature},
            {"n", request.n},
            {"max_tokens", request.max_tokens},
        };
        body["messages"] = nlohmann::json::array();
        for (const ChatMessage& m : request.messages)
            body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});

        httplib::Client client(opts_.base_url);
        client.set_connection_timeout(opts_.timeout_seconds);
        client.set_read_timeout(opts_.timeout_seconds);
        httplib::Headers headers;
        if (!opts_.api_key.empty())
            headers.emplace("Authorization", "Bearer " + opts_.api_key);

        const httplib::Result result =
            client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
        if (!result)
            throw TransientBackendError("transport failure against " + opts_.base_url + ": " +
                                        httplib::to_string(result.error()));
        if (result->status == 429 || result->status >= 500)
            throw TransientBackendError("HTTP " + std::to_string(result->status) + " from " +
                                        opts_.base_url);
        if (result->status != 200)
            throw BackendUnavailable("HTTP " + std::to_string(result->status) + " from " +
                                     opts_.base_url + ": " + result->body);

        nlohmann::json reply = nlohmann::json::parse(result->body, nullptr, false);
        if (reply.is_discarded() || !reply.contains("choices") || !reply["choices"].is_array())
            throw MalformedBackendReply("undecodable chat-completions payload");
        std::vector<std::string> completions;
        for (const auto& choice : reply["choices"]) {
            if (!choice.contains("message") || !choice["message"].contains("content") ||
                !choice["message"]["content"].is_string())
                throw MalformedBackendReply("choice without message content");
            completions.push_back(choice["message"]["content"].get<std::string>());
        }
        return completions;
    }

  private:
    Options opts_;
    std::counting_semaphore<> slots_;
};

} // namespace sep
