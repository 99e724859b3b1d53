#pragma once

#include "sep/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

// LLM transport layer: chat messages, completion requests, the Backend
// contract, prompt templates with exemplars, retrying `complete`, a scripted
// mock, and journal/replay plumbing. Every backend call in the engine flows
// through complete(); nothing else builds wire payloads.

namespace sep {

// ---------------------------------------------------------------------------
// Messages and requests
// ---------------------------------------------------------------------------

enum class ChatRole { System, User, Assistant };

inline std::string to_string(ChatRole role) {
    switch (role) {
        case ChatRole::System: return "system";
        case ChatRole::User: return "user";
        case ChatRole::Assistant: return "assistant";
    }
    throw std::invalid_argument("unknown chat role");
}

inline ChatRole chat_role_from_string(std::string_view s) {
    if (s == "system") return ChatRole::System;
    if (s == "user") return ChatRole::User;
    if (s == "assistant") return ChatRole::Assistant;
    throw std::invalid_argument("unknown chat role: " + std::string(s));
}

struct ChatMessage {
    ChatRole role = ChatRole::User;
    std::string content;

    ChatMessage() = default;
    ChatMessage(ChatRole role_, std::string content_)
        : role(role_), content(std::move(content_)) {
        if (role != ChatRole::System && content.empty())
            throw std::invalid_argument("user/assistant message content must be non-empty");
    }

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct CompletionRequest {
    std::string template_name;  // keys the scripted mock and the journal
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int n = 1;
    int max_tokens = 1024;

    CompletionRequest() = default;
    CompletionRequest(std::string template_name_, std::vector<ChatMessage> messages_,
                      double temperature_ = 0.0, int n_ = 1, int max_tokens_ = 1024)
        : template_name(std::move(template_name_)), messages(std::move(messages_)),
          temperature(temperature_), n(n_), max_tokens(max_tokens_) {
        if (template_name.empty())
            throw std::invalid_argument("template_name must be non-empty");
        if (!(temperature >= 0.0 && temperature <= 2.0))
            throw std::invalid_argument("temperature must lie in [0, 2]");
        if (n < 1) throw std::invalid_argument("n must be >= 1");
        if (max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
        bool has_user = false;
        for (const ChatMessage& m : messages)
            if (m.role == ChatRole::User) has_user = true;
        if (!has_user) throw std::invalid_argument("request needs at least one user message");
    }

    friend bool operator==(const CompletionRequest&, const CompletionRequest&) = default;
};

// ---------------------------------------------------------------------------
// Backend contract
// ---------------------------------------------------------------------------

class Backend {
  public:
    virtual ~Backend() = default;
    virtual std::string id() const = 0;
    // Returns exactly request.n completions or throws; never truncates.
    virtual std::vector<std::string> generate(const CompletionRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Retrying completion
// ---------------------------------------------------------------------------

struct RetryPolicy {
    int retries = 3;  // retries after the first attempt: delays 1s, 2s, 4s
    std::chrono::milliseconds base_delay{1000};
    std::uint64_t jitter_seed = 0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

// Single choke point for backend traffic. Retries transient transport
// failures with jittered exponential backoff (+/- 50%), enforces the
// exactly-n contract, and converts persistent failure into
// BackendUnavailable. Non-transient errors propagate untouched.
inline std::vector<std::string> complete(Backend& backend, const CompletionRequest& request,
                                         const RetryPolicy& policy = {},
                                         const Sleeper& sleeper = {}) {
    std::mt19937_64 rng(policy.jitter_seed);
    std::uniform_real_distribution<double> jitter(0.5, 1.5);
    std::string last_error = "no attempt made";
    for (int attempt = 0;; ++attempt) {
        try {
            std::vector<std::string> replies = backend.generate(request);
            if (replies.size() != static_cast<std::size_t>(request.n))
                throw MalformedBackendReply(
                    "backend " + backend.id() + " returned " + std::to_string(replies.size()) +
                    " completions, wanted " + std::to_string(request.n));
            return replies;
        } catch (const TransientBackendError& e) {
            last_error = e.what();
            if (attempt >= policy.retries) break;
            const double scale = static_cast<double>(1 << attempt) * jitter(rng);
            const auto delay = std::chrono::milliseconds(
                static_cast<std::int64_t>(static_cast<double>(policy.base_delay.count()) * scale));
            if (sleeper) {
                sleeper(delay);
            } else {
                std::this_thread::sleep_for(delay);
            }
        }
    }
    throw BackendUnavailable("backend " + backend.id() + " still failing after " +
                             std::to_string(policy.retries + 1) + " attempts: " + last_error);
}

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

struct Exemplar {
    std::string input;
    std::string response;

    Exemplar() = default;
    Exemplar(std::string input_, std::string response_)
        : input(std::move(input_)), response(std::move(response_)) {
        if (input.empty() || response.empty())
            throw std::invalid_argument("exemplar input and response must be non-empty");
    }
};

// Body text with {placeholder} slots plus few-shot exemplars. Explain-family
// templates must carry exactly two exemplars, one Positive and one Negative,
// so neither label is the in-context majority.
class PromptTemplate {
  public:
    PromptTemplate() = default;
    PromptTemplate(std::string name, std::string body, std::vector<Exemplar> exemplars = {})
        : name_(std::move(name)), body_(std::move(body)), exemplars_(std::move(exemplars)) {
        if (name_.empty()) throw std::invalid_argument("template name must be non-empty");
        if (body_.empty()) throw std::invalid_argument("template body must be non-empty");
        if (name_.rfind("explain", 0) == 0) {
            if (exemplars_.size() != 2)
                throw std::invalid_argument("explain templates need exactly 2 exemplars");
            const bool first_positive =
                exemplars_[0].response.find("Prediction: Positive") != std::string::npos;
            const bool second_positive =
                exemplars_[1].response.find("Prediction: Positive") != std::string::npos;
            const bool first_negative =
                exemplars_[0].response.find("Prediction: Negative") != std::string::npos;
            const bool second_negative =
                exemplars_[1].response.find("Prediction: Negative") != std::string::npos;
            if (!((first_positive && second_negative) || (first_negative && second_positive)))
                throw std::invalid_argument(
                    "explain templates need one Positive and one Negative exemplar");
        }
    }

    const std::string& name() const { return name_; }
    const std::string& body() const { return body_; }
    const std::vector<Exemplar>& exemplars() const { return exemplars_; }

    // Placeholder names in order of first appearance.
    std::vector<std::string> placeholders() const {
        std::vector<std::string> names;
        for (std::size_t i = 0; i < body_.size(); ++i) {
            if (body_[i] != '{') continue;
            const std::size_t close = body_.find('}', i + 1);
            if (close == std::string::npos) continue;
            const std::string name = body_.substr(i + 1, close - i - 1);
            if (name.empty() || !is_identifier(name)) continue;
            if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
            i = close;
        }
        return names;
    }

    static bool is_identifier(const std::string& s) {
        for (char c : s) {
            const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                            (c >= '0' && c <= '9') || c == '_';
            if (!ok) return false;
        }
        return !s.empty();
    }

  private:
    std::string name_;
    std::string body_;
    std::vector<Exemplar> exemplars_;
};

// Exemplars first (user then assistant, in order), then the bound body as the
// live user message. A '{' that does not open a known-shaped placeholder is
// kept literal; substituted text is never re-scanned.
inline std::vector<ChatMessage> render(const PromptTemplate& tpl,
                                       const std::map<std::string, std::string>& bindings) {
    std::string out;
    const std::string& body = tpl.body();
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] == '{') {
            const std::size_t close = body.find('}', i + 1);
            if (close != std::string::npos) {
                const std::string name = body.substr(i + 1, close - i - 1);
                if (PromptTemplate::is_identifier(name)) {
                    const auto it = bindings.find(name);
                    if (it == bindings.end())
                        throw TemplateError("unbound placeholder '" + name + "' in template " +
                                            tpl.name());
                    out += it->second;
                    i = close;
                    continue;
                }
            }
        }
        out += body[i];
    }
    std::vector<ChatMessage> messages;
    for (const Exemplar& e : tpl.exemplars()) {
        messages.emplace_back(ChatRole::User, e.input);
        messages.emplace_back(ChatRole::Assistant, e.response);
    }
    messages.emplace_back(ChatRole::User, std::move(out));
    return messages;
}

inline CompletionRequest build_request(const PromptTemplate& tpl,
                                       const std::map<std::string, std::string>& bindings,
                                       double temperature = 0.0, int n = 1,
                                       int max_tokens = 1024) {
    return CompletionRequest(tpl.name(), render(tpl, bindings), temperature, n, max_tokens);
}

// ---------------------------------------------------------------------------
// Scripted mock
// ---------------------------------------------------------------------------

// Deterministic offline backend: a FIFO queue of canned completions per
// template name; a request with n=k consumes k replies from its queue.
// Single-flight: calls serialize on an internal mutex.
class ScriptedBackend final : public Backend {
  public:
    std::string id() const override { return "scripted"; }

    void enqueue(const std::string& template_name, std::string reply) {
        const std::lock_guard<std::mutex> lock(mutex_);
        scripts_[template_name].push_back(std::move(reply));
    }

    void enqueue_all(const std::string& template_name, std::vector<std::string> replies) {
        const std::lock_guard<std::mutex> lock(mutex_);
        auto& queue = scripts_[template_name];
        for (std::string& r : replies) queue.push_back(std::move(r));
    }

    // The next `failures` calls throw TransientBackendError without consuming
    // any script.
    void fail_next(int failures) {
        const std::lock_guard<std::mutex> lock(mutex_);
        pending_failures_ = failures;
    }

    std::vector<std::string> generate(const CompletionRequest& request) override {
        const std::lock_guard<std::mutex> lock(mutex_);
        if (pending_failures_ > 0) {
            --pending_failures_;
            throw TransientBackendError("injected transient failure");
        }
        auto& queue = scripts_[request.template_name];
        if (queue.size() < static_cast<std::size_t>(request.n))
            throw ScriptExhausted("script for template '" + request.template_name + "' has " +
                                  std::to_string(queue.size()) + " replies, need " +
                                  std::to_string(request.n));
        std::vector<std::string> replies;
        replies.reserve(static_cast<std::size_t>(request.n));
        for (int i = 0; i < request.n; ++i) {
            replies.push_back(std::move(queue.front()));
            queue.pop_front();
        }
        ++call_counts_[request.template_name];
        return replies;
    }

    std::size_t remaining(const std::string& template_name) const {
        const std::lock_guard<std::mutex> lock(mutex_);
        const auto it = scripts_.find(template_name);
        return it == scripts_.end() ? 0 : it->second.size();
    }

    std::size_t call_count(const std::string& template_name) const {
        const std::lock_guard<std::mutex> lock(mutex_);
        const auto it = call_counts_.find(template_name);
        return it == call_counts_.end() ? 0 : it->second;
    }

  private:
    mutable std::mutex mutex_;
    std::map<std::string, std::deque<std::string>> scripts_;
    std::map<std::string, std::size_t> call_counts_;
    int pending_failures_ = 0;
};

// ---------------------------------------------------------------------------
// Journal and replay
// ---------------------------------------------------------------------------

struct JournalEntry {
    std::string template_name;
    CompletionRequest request;
    std::vector<std::string> replies;
    std::string timestamp;  // ISO-8601 UTC, informational only
};

inline std::string utc_timestamp(std::time_t t = std::time(nullptr)) {
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[24];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Records every successful completion flowing through it.
class JournalingBackend final : public Backend {
  public:
    explicit JournalingBackend(Backend& inner) : inner_(inner) {}

    std::string id() const override { return inner_.id(); }

    std::vector<std::string> generate(const CompletionRequest& request) override {
        std::vector<std::string> replies = inner_.generate(request);
        const std::lock_guard<std::mutex> lock(mutex_);
        entries_.push_back(JournalEntry{request.template_name, request, replies, utc_timestamp()});
        return replies;
    }

    const std::vector<JournalEntry>& entries() const { return entries_; }

    std::size_t call_count(const std::string& template_name) const {
        const std::lock_guard<std::mutex> lock(mutex_);
        std::size_t count = 0;
        for (const JournalEntry& e : entries_)
            if (e.template_name == template_name) ++count;
        return count;
    }

  private:
    Backend& inner_;
    mutable std::mutex mutex_;
    std::vector<JournalEntry> entries_;
};

// Serves a recorded session back, FIFO per template. With verification on
// (the default), a request whose messages differ from the recorded one raises
// DivergenceError instead of silently returning stale replies.
class ReplayBackend final : public Backend {
  public:
    explicit ReplayBackend(const std::vector<JournalEntry>& entries, bool verify = true)
        : verify_(verify) {
        for (const JournalEntry& e : entries) queues_[e.template_name].push_back(e);
    }

    std::string id() const override { return "replay"; }

    std::vector<std::string> generate(const CompletionRequest& request) override {
        const std::lock_guard<std::mutex> lock(mutex_);
        auto& queue = queues_[request.template_name];
        if (queue.empty())
            throw ScriptExhausted("journal has no more entries for template '" +
                                  request.template_name + "'");
        JournalEntry entry = std::move(queue.front());
        queue.pop_front();
        if (verify_ && entry.request.messages != request.messages)
            throw DivergenceError("request for template '" + request.template_name +
                                  "' diverges from the recorded session");
        return entry.replies;
    }

  private:
    bool verify_;
    mutable std::mutex mutex_;
    std::map<std::string, std::deque<JournalEntry>> queues_;
};

} // namespace sep
